"""Physical constants shared across the package."""

# Propagation speed fixed at exactly 3e8 m/s so delay/distance conversions
# match the round numbers used by the simulation configs.
SPEED_OF_LIGHT = 3.0e8
