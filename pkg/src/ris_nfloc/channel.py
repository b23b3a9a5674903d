"""Cascade channel synthesis: per-element forward/backward coefficients.

The forward link (BS to RIS element) and backward link (RIS element to UE)
each carry a deterministic direct component plus an optional stochastic
multipath sum.  The direct component attenuates with the tile-center distance
while its phase tracks the exact element position; the per-tile cascade gain
is the inner product of the two element vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Scene


@dataclass(frozen=True)
class MultipathConfig:
    """Stochastic multipath model shared by forward and backward links.

    Each of ``j_paths`` extra paths gets a circular complex Gaussian amplitude
    whose mean power sits ``power_rel_db`` below the direct component of its
    link, and an excess propagation length drawn uniformly from
    [``excess_min_m``, ``excess_max_m``].  Draws are independent per tile and
    per link direction.
    """

    j_paths: int = 3
    power_rel_db: float = -15.0
    excess_min_m: float = 0.5
    excess_max_m: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.j_paths < 0:
            raise ValueError("j_paths must be >= 0")
        if self.excess_min_m <= 0 or self.excess_max_m < self.excess_min_m:
            raise ValueError("excess delays must be positive and ordered")


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of the element channels and the per-tile cascade gains."""

    forward: np.ndarray  # (K, M) complex
    backward: np.ndarray  # (K, M) complex
    cascade: np.ndarray  # (K,) complex, row-wise inner products

    def __post_init__(self):
        ref = np.einsum("km,km->k", self.backward, self.forward)
        scale = np.maximum(np.abs(ref), 1e-300)
        if np.max(np.abs(self.cascade - ref) / scale) > 1e-12:
            raise ValueError("cascade inconsistent with forward/backward rows")


def _element_stack(scene: Scene) -> np.ndarray:
    return np.stack([t.element_positions for t in scene.tiles])  # (K, M, 3)


def forward_direct(scene: Scene, wavelength: float, k: int, m: int) -> complex:
    """Direct BS-to-element coefficient for tile ``k``, element ``m`` (1-based)."""
    tile = scene.tiles[k - 1]
    d_center = np.linalg.norm(scene.p_bs - tile.center)
    if d_center < 1e-12:
        raise ValueError("BS coincides with tile center")
    d_elem = np.linalg.norm(scene.p_bs - tile.element_positions[m - 1])
    return (
        wavelength
        / (4.0 * np.pi * d_center)
        * np.exp(-2j * np.pi / wavelength * d_elem)
    )


def backward_direct(scene: Scene, wavelength: float, k: int, m: int) -> complex:
    """Direct element-to-UE coefficient; carries the phase offset ``phi0``."""
    tile = scene.tiles[k - 1]
    d_center = np.linalg.norm(scene.p_ue - tile.center)
    if d_center < 1e-12:
        raise ValueError("UE coincides with tile center")
    d_elem = np.linalg.norm(scene.p_ue - tile.element_positions[m - 1])
    return (
        wavelength
        / (4.0 * np.pi * d_center)
        * np.exp(-2j * np.pi / wavelength * d_elem + 1j * scene.phi0)
    )


def _link_matrix(
    endpoint: np.ndarray,
    elements: np.ndarray,
    centers: np.ndarray,
    wavelength: float,
    mp: MultipathConfig,
    rng: np.random.Generator,
    extra_phase: float = 0.0,
) -> np.ndarray:
    """(K, M) coefficients of one link direction, direct plus multipath."""
    d_elem = np.linalg.norm(endpoint[None, None, :] - elements, axis=-1)  # (K, M)
    d_center = np.linalg.norm(endpoint[None, :] - centers, axis=-1)  # (K,)
    if np.min(d_center) < 1e-12:
        raise ValueError("link endpoint coincides with a tile center")
    mag = wavelength / (4.0 * np.pi * d_center)
    out = mag[:, None] * np.exp(-2j * np.pi / wavelength * d_elem + 1j * extra_phase)
    if mp.j_paths == 0:
        return out
    k = elements.shape[0]
    sigma = mag * 10.0 ** (mp.power_rel_db / 20.0)  # per-path amplitude scale
    eps = (
        rng.standard_normal((k, mp.j_paths)) + 1j * rng.standard_normal((k, mp.j_paths))
    ) / np.sqrt(2.0)
    eps *= sigma[:, None]
    excess = rng.uniform(mp.excess_min_m, mp.excess_max_m, size=(k, mp.j_paths))
    # phase of path j at element m: direct element distance plus excess length
    phase = -2j * np.pi / wavelength * (d_elem[:, :, None] + excess[:, None, :])
    out += np.sum(eps[:, None, :] * np.exp(phase + 1j * extra_phase), axis=-1)
    return out


def realize_channel(
    scene: Scene, wavelength: float, mp: MultipathConfig | None = None
) -> ChannelRealization:
    """Draw forward/backward element channels and per-tile cascade gains.

    With ``mp=None`` (or ``j_paths=0``) the channels are the pure direct
    components and the realization is deterministic.  Otherwise the multipath
    draws of the two directions are independent, seeded by ``mp.seed``.
    """
    mp = mp if mp is not None else MultipathConfig(j_paths=0)
    rng = np.random.default_rng(mp.seed)
    elements = _element_stack(scene)
    centers = scene.tile_centers
    forward = _link_matrix(scene.p_bs, elements, centers, wavelength, mp, rng)
    backward = _link_matrix(
        scene.p_ue, elements, centers, wavelength, mp, rng, extra_phase=scene.phi0
    )
    cascade = np.einsum("km,km->k", backward, forward)
    return ChannelRealization(forward=forward, backward=backward, cascade=cascade)


def tile_gain(ch: ChannelRealization, scene: Scene, k: int, omega: complex) -> complex:
    """Gain of tile ``k`` under a shared per-tile coefficient ``omega``.

    ``omega`` already folds in the on/off reflection state (0 for a switched
    off tile, unit modulus otherwise).
    """
    if abs(omega) > 1.0 + 1e-12:
        raise ValueError("|omega| must not exceed 1")
    return omega * ch.cascade[k - 1]
