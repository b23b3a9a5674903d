"""Path decomposition on the joint (delay, slope) spectrum.

The demodulated frame matrix is transformed into an oversampled 2-D map whose
columns index the frame-ramp slope and whose rows index delay; every path
shows up as a 2-D sinc mainlobe at (delay bin, slope bin).  Peak extraction
walks the column of each slope group, keeps the required number of local
maxima, and converts bins to arrival times, optionally refining each peak by
a three-point parabola fit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .psp import PspAssignment
from .waveform import FrameMatrix, WaveformConfig


@dataclass(frozen=True)
class SpectrumMap:
    """Oversampled joint spectrum of one frame matrix."""

    grid: np.ndarray  # (n_bar, L) complex
    oversampling: int
    n_bar: int
    cfg: WaveformConfig

    def __post_init__(self):
        if self.n_bar != self.oversampling * self.cfg.n_subcarriers:
            raise ValueError("n_bar must equal oversampling * n_subcarriers")
        if self.grid.shape != (self.n_bar, self.cfg.l_frames):
            raise ValueError("grid shape mismatch")

    @property
    def bin_seconds(self) -> float:
        """Delay width of one oversampled row."""
        return 1.0 / (self.n_bar * self.cfg.spacing)


@dataclass(frozen=True)
class ToaGroups:
    """Per-slope-group arrival times extracted from a spectrum map.

    ``toas[i]`` holds the group's arrival times sorted descending with
    ``magnitudes[i]`` the matching peak heights.  Groups whose column did not
    yield enough admissible local maxima appear in ``under_detected`` and are
    absent from ``toas``.
    """

    toas: dict[int, np.ndarray]
    magnitudes: dict[int, np.ndarray]
    under_detected: frozenset[int] = field(default_factory=frozenset)

    def all_toas(self) -> np.ndarray:
        if not self.toas:
            return np.array([])
        return np.concatenate([self.toas[i] for i in sorted(self.toas)])


def spectrum_2d(
    frames: FrameMatrix, oversampling: int, method: str = "fft"
) -> SpectrumMap:
    """Transform frames into the oversampled joint spectrum.

    ``method="fft"`` computes the zero-padded transform with FFTs (the
    production path); ``method="dense"`` evaluates the literal double sum via
    the kernels module.  Both use 1-based subcarrier/frame indices in the
    transform phases and agree to 1e-9 relative.
    """
    if oversampling < 1:
        raise ValueError("oversampling must be >= 1")
    s = frames.s
    n, l = s.shape
    n_bar = oversampling * n

    if method == "dense":
        grid = kernels.idft2_dense(s, n_bar)
    elif method == "fft":
        padded = np.zeros((n_bar, l), dtype=np.complex128)
        padded[np.arange(1, n + 1) % n_bar, :] = s
        grid = np.fft.fft2(padded)
        # frame index is 1-based: row placement handles the subcarrier
        # offset, the column offset becomes a per-column phase
        grid *= np.exp(-2j * np.pi * np.arange(l) / l)[None, :]
    else:
        raise ValueError(f"unknown method {method!r}")
    return SpectrumMap(
        grid=grid, oversampling=oversampling, n_bar=n_bar, cfg=frames.config
    )


def quadratic_refine(spec: SpectrumMap, u: int, v: int) -> float:
    """Sub-bin arrival time from a three-point parabola around bin ``u``.

    Falls back to the unrefined bin center at the grid edges or on a flat
    neighborhood; the fitted offset is clamped to half a bin.
    """
    bin_s = spec.bin_seconds
    if not 1 <= u <= spec.n_bar - 2:
        return u * bin_s
    a, b, c = np.abs(spec.grid[u - 1 : u + 2, v])
    denom = a - 2.0 * b + c
    if abs(denom) < 1e-300:
        return u * bin_s
    offset = 0.5 * (a - c) / denom
    offset = float(np.clip(offset, -0.5, 0.5))
    return (u + offset) * bin_s


def extract_toas(
    spec: SpectrumMap,
    assignment: PspAssignment,
    refine: bool = True,
    threshold_factor: float = 6.0,
) -> ToaGroups:
    """Pull each slope group's arrival times out of its spectrum column.

    For slope i/L the column is ``round(L * i/L) mod L``; the group needs as
    many admissible local maxima as it has tiles, the largest ones win, and
    ties in magnitude resolve toward the smaller bin.  Columns that cannot
    supply enough peaks mark their group under-detected.  Arrival-time sets
    spanning more than half the unambiguous range are unwrapped jointly, which
    keeps differential delays intact when the clock offset pushes the set
    across the period boundary.
    """
    if spec.cfg.l_frames != assignment.l_frames:
        raise ValueError("spectrum and assignment frame counts differ")
    l = assignment.l_frames
    bin_s = spec.bin_seconds
    toas: dict[int, np.ndarray] = {}
    mags: dict[int, np.ndarray] = {}
    under: set[int] = set()

    for i in sorted(assignment.groups):
        tiles = assignment.groups[i]
        v = int(np.round(l * (i / l))) % l
        column = np.abs(spec.grid[:, v])
        threshold = threshold_factor * float(np.median(column))
        mask = kernels.column_peak_mask(column, threshold)
        peak_bins = np.nonzero(mask)[0]
        if len(peak_bins) < len(tiles):
            under.add(i)
            continue
        order = np.lexsort((peak_bins, -column[peak_bins]))
        chosen = peak_bins[order[: len(tiles)]]
        if refine:
            tau = np.array([quadratic_refine(spec, int(u), v) for u in chosen])
        else:
            tau = chosen * bin_s
        toas[i] = tau
        mags[i] = column[chosen]

    _unwrap_inplace(toas, 1.0 / spec.cfg.spacing)
    for i in toas:
        desc = np.argsort(-toas[i], kind="stable")
        toas[i] = toas[i][desc]
        mags[i] = mags[i][desc]
    return ToaGroups(toas=toas, magnitudes=mags, under_detected=frozenset(under))


def _unwrap_inplace(toas: dict[int, np.ndarray], period: float) -> None:
    """Shift wrapped arrival times up by one period when a set straddles zero.

    Physical per-trial spreads are far below half a period, so a spread above
    period/2 can only come from the modulo wrap of the common clock offset.
    """
    values = [t for arr in toas.values() for t in arr]
    if not values:
        return
    if max(values) - min(values) <= period / 2.0:
        return
    for i, arr in toas.items():
        toas[i] = np.where(arr < period / 2.0, arr + period, arr)


def spectrum_to_csv(spec: SpectrumMap, path) -> None:
    """Dump (u, v, magnitude) triplets for heatmap rendering."""
    mag = np.abs(spec.grid)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["u", "v", "magnitude"])
        for u in range(spec.n_bar):
            for v in range(spec.cfg.l_frames):
                writer.writerow([u, v, f"{mag[u, v]:.12g}"])
