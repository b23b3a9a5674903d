"""RIS-assisted near-field localization via joint delay/slope path classification."""

from .bounds import FimResult, cascade_snrs, fim, toa_variance
from .channel import (
    ChannelRealization,
    MultipathConfig,
    backward_direct,
    forward_direct,
    realize_channel,
    tile_gain,
)
from .geometry import RisLayout, Scene, TilePose, build_scene, toa, toa_vector
from .labeling import (
    Discriminant,
    LabelHypothesis,
    LabelMap,
    bootstrap_position,
    build_discriminant,
    in_region,
    in_region_quadric,
    label_pair,
    run_spl,
    spl_residual,
    spl_sort,
    verify_nonadjacent,
)
from .psp import PspAssignment, assign, phase_shift, psp_list
from .spectrum import SpectrumMap, ToaGroups, extract_toas, quadratic_refine, spectrum_2d
from .tdoa import PositionEstimationError, TdoaSystem, build_system, solve_position
from .waveform import (
    FrameMatrix,
    WaveformConfig,
    dump_frames,
    frames_from_paths,
    load_frames,
    synthesize_frames,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelRealization",
    "Discriminant",
    "FimResult",
    "FrameMatrix",
    "LabelHypothesis",
    "LabelMap",
    "MultipathConfig",
    "PositionEstimationError",
    "PspAssignment",
    "RisLayout",
    "Scene",
    "SpectrumMap",
    "TdoaSystem",
    "TilePose",
    "ToaGroups",
    "WaveformConfig",
    "assign",
    "backward_direct",
    "bootstrap_position",
    "build_discriminant",
    "build_scene",
    "build_system",
    "cascade_snrs",
    "dump_frames",
    "extract_toas",
    "fim",
    "forward_direct",
    "frames_from_paths",
    "in_region",
    "in_region_quadric",
    "label_pair",
    "load_frames",
    "phase_shift",
    "psp_list",
    "quadratic_refine",
    "realize_channel",
    "run_spl",
    "solve_position",
    "spectrum_2d",
    "spl_residual",
    "spl_sort",
    "synthesize_frames",
    "tile_gain",
    "toa",
    "toa_variance",
    "toa_vector",
    "verify_nonadjacent",
]
