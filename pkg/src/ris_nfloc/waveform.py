"""Frame synthesis at the demodulated-symbol level.

The conjugate demodulator of the multi-frame OFDM link is analytic, so frames
are generated directly in closed form: per subcarrier n and frame l the symbol
is the sum over tiles of the conjugated cascade gain rotated by the subcarrier
delay phase and the tile's frame-ramp phase, plus circular Gaussian receiver
noise of variance P*N0/N per cell.  A quadrature test validates the closed
form against the integral demodulator once on a tiny case.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .geometry import Scene, toa_vector
from .psp import PspAssignment


@dataclass(frozen=True)
class WaveformConfig:
    """OFDM signaling parameters.

    ``noise_psd`` is the receiver noise power N0 entering the demodulated
    cell variance P*N0/N.
    """

    n_subcarriers: int
    spacing: float  # subcarrier spacing (Hz)
    carrier: float  # carrier frequency (Hz)
    tx_power: float  # transmit power (W)
    noise_psd: float  # noise power N0 (W)
    l_frames: int

    def __post_init__(self):
        if self.tx_power <= 0:
            raise ValueError("tx_power must be positive")
        if self.noise_psd < 0:
            raise ValueError("noise_psd must be non-negative")
        if self.n_subcarriers < 1 or self.l_frames < 1:
            raise ValueError("grid dimensions must be >= 1")

    @property
    def bandwidth(self) -> float:
        return self.n_subcarriers * self.spacing

    @property
    def frame_duration(self) -> float:
        return 1.0 / self.spacing

    def subcarrier_frequencies(self) -> np.ndarray:
        n = np.arange(1, self.n_subcarriers + 1)
        return self.carrier + (n - (self.n_subcarriers + 1) / 2.0) * self.spacing


@dataclass(frozen=True)
class FrameMatrix:
    """Demodulated symbols, subcarriers along rows and frames along columns."""

    s: np.ndarray  # (N, L) complex
    config: WaveformConfig

    def __post_init__(self):
        if self.s.shape != (self.config.n_subcarriers, self.config.l_frames):
            raise ValueError("symbol matrix shape does not match config")


def frames_from_paths(
    taus: np.ndarray,
    betas: np.ndarray,
    amplitudes: np.ndarray,
    cfg: WaveformConfig,
    rng: np.random.Generator | None = None,
) -> FrameMatrix:
    """Closed-form frames for explicit per-path (delay, slope, amplitude) triples.

    ``amplitudes`` are the conjugated cascade gains; tests use this entry point
    to place paths at arbitrary delays without building a scene.
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    amplitudes = np.atleast_1d(np.asarray(amplitudes, dtype=complex))
    freqs = cfg.subcarrier_frequencies()
    ells = np.arange(1, cfg.l_frames + 1)

    delay_phase = np.exp(2j * np.pi * freqs[:, None] * taus[None, :])  # (N, K)
    ramp_phase = np.exp(2j * np.pi * betas[:, None] * ells[None, :])  # (K, L)
    scale = cfg.tx_power / cfg.n_subcarriers
    s = scale * (delay_phase * amplitudes[None, :]) @ ramp_phase

    if rng is not None and cfg.noise_psd > 0:
        var = cfg.tx_power * cfg.noise_psd / cfg.n_subcarriers
        noise = rng.standard_normal(s.shape) + 1j * rng.standard_normal(s.shape)
        s = s + np.sqrt(var / 2.0) * noise
    return FrameMatrix(s=s, config=cfg)


def synthesize_frames(
    scene: Scene,
    cascade: np.ndarray,
    assignment: PspAssignment,
    cfg: WaveformConfig,
    noise_seed: int | None = 0,
) -> FrameMatrix:
    """Demodulated frames for a scene, channel cascade and slope assignment.

    ``noise_seed=None`` disables the noise term regardless of ``noise_psd``.
    """
    if assignment.l_frames != cfg.l_frames:
        raise ValueError("assignment frame count does not match waveform config")
    if len(cascade) != scene.n_tiles:
        raise ValueError("cascade length does not match tile count")
    rng = np.random.default_rng(noise_seed) if noise_seed is not None else None
    return frames_from_paths(
        toa_vector(scene), assignment.beta, np.conj(cascade), cfg, rng
    )


_HEADER = struct.Struct("<II")


def dump_frames(frames: FrameMatrix, path) -> None:
    """Write frames as little-endian (uint32 N, uint32 L) header plus
    row-major complex64 payload, for cross-implementation comparison."""
    n, l = frames.s.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(n, l))
        fh.write(np.ascontiguousarray(frames.s.astype("<c8")).tobytes())


def load_frames(path, cfg: WaveformConfig) -> FrameMatrix:
    """Read a frame dump written by :func:`dump_frames`."""
    with open(path, "rb") as fh:
        n, l = _HEADER.unpack(fh.read(_HEADER.size))
        data = np.frombuffer(fh.read(), dtype="<c8")
    if data.size != n * l:
        raise ValueError("truncated frame dump")
    if (n, l) != (cfg.n_subcarriers, cfg.l_frames):
        raise ValueError("frame dump dimensions do not match config")
    return FrameMatrix(s=data.reshape(n, l).astype(np.complex128), config=cfg)
