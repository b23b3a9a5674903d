import numpy as np
import pytest

from ris_nfloc.geometry import RisLayout, build_scene, toa_vector
from ris_nfloc.psp import assign
from ris_nfloc.waveform import (
    WaveformConfig,
    dump_frames,
    frames_from_paths,
    load_frames,
    synthesize_frames,
)


def small_cfg(noise=0.0, n=64, l=8):
    return WaveformConfig(
        n_subcarriers=n,
        spacing=1e6,
        carrier=1e9,
        tx_power=0.2,
        noise_psd=noise,
        l_frames=l,
    )


def test_single_path_closed_form():
    cfg = small_cfg()
    tau, beta = 150e-9, 0.25
    frames = frames_from_paths([tau], [beta], [1.0], cfg)
    freqs = cfg.subcarrier_frequencies()
    n, ell = 10, 3
    expected = (
        cfg.tx_power
        / cfg.n_subcarriers
        * np.exp(2j * np.pi * freqs[n - 1] * tau)
        * np.exp(2j * np.pi * beta * ell)
    )
    assert frames.s[n - 1, ell - 1] == pytest.approx(expected, rel=1e-12)


def test_unmodulated_profile_frame_independent():
    cfg = small_cfg()
    frames = frames_from_paths([100e-9, 210e-9], [1.0, 1.0], [0.7, 0.2 - 0.4j], cfg)
    for ell in range(1, cfg.l_frames):
        assert np.allclose(frames.s[:, ell], frames.s[:, 0], rtol=1e-12)


def test_noise_variance_statistical():
    # zero signal: sample variance of the cells approaches P*N0/N
    cfg = small_cfg(noise=3e-3, n=100, l=10)
    rng = np.random.default_rng(0)
    draws = []
    for _ in range(100):  # 100 * 1000 cells
        frames = frames_from_paths([0.0], [0.5], [0.0], cfg, rng)
        draws.append(frames.s.ravel())
    cells = np.concatenate(draws)
    var = np.mean(np.abs(cells) ** 2)
    expected = cfg.tx_power * cfg.noise_psd / cfg.n_subcarriers
    assert var == pytest.approx(expected, rel=0.05)


def test_linearity_in_cascade():
    cfg = small_cfg()
    taus = np.array([100e-9, 170e-9])
    betas = np.array([0.25, 0.75])
    a = frames_from_paths(taus, betas, [1.0, 0.0], cfg)
    b = frames_from_paths(taus, betas, [0.0, 0.5j], cfg)
    both = frames_from_paths(taus, betas, [1.0, 0.5j], cfg)
    assert np.allclose(both.s, a.s + b.s, rtol=1e-12)


def test_amplitude_bound():
    cfg = small_cfg()
    amps = np.array([0.5, 0.25 - 0.3j, 0.1j])
    frames = frames_from_paths(
        [100e-9, 140e-9, 300e-9], [0.25, 0.5, 0.75], amps, cfg
    )
    bound = cfg.tx_power / cfg.n_subcarriers * np.sum(np.abs(amps))
    assert np.max(np.abs(frames.s)) <= bound + 1e-15


def test_synthesize_frames_uses_scene_delays():
    layout = RisLayout(tile_count=3, tile_spacing=0.3, center=[5, 10, 2], axis=[1, 0, 0])
    scene = build_scene(layout, [0, 5, 2], [4, 4, 0], t0=1e-7)
    assignment = assign(3, 4, 3, min_k0=3)
    cfg = small_cfg(l=4)
    cascade = np.array([1.0, 0.5 - 0.2j, 0.3j])
    frames = synthesize_frames(scene, cascade, assignment, cfg, noise_seed=None)
    expected = frames_from_paths(
        toa_vector(scene), assignment.beta, np.conj(cascade), cfg
    )
    assert np.allclose(frames.s, expected.s, rtol=1e-12)


def test_synthesize_frames_validation():
    layout = RisLayout(tile_count=3, tile_spacing=0.3, center=[5, 10, 2], axis=[1, 0, 0])
    scene = build_scene(layout, [0, 5, 2], [4, 4, 0])
    assignment = assign(3, 4, 3, min_k0=3)
    with pytest.raises(ValueError):
        synthesize_frames(scene, np.ones(3), assignment, small_cfg(l=8))
    with pytest.raises(ValueError):
        synthesize_frames(scene, np.ones(2), assignment, small_cfg(l=4))


def test_noise_reproducible_by_seed():
    cfg = small_cfg(noise=1e-3)
    layout = RisLayout(tile_count=3, tile_spacing=0.3, center=[5, 10, 2], axis=[1, 0, 0])
    scene = build_scene(layout, [0, 5, 2], [4, 4, 0])
    assignment = assign(3, 8, 3, min_k0=3)
    a = synthesize_frames(scene, np.ones(3), assignment, cfg, noise_seed=5)
    b = synthesize_frames(scene, np.ones(3), assignment, cfg, noise_seed=5)
    c = synthesize_frames(scene, np.ones(3), assignment, cfg, noise_seed=6)
    assert np.array_equal(a.s, b.s)
    assert not np.array_equal(a.s, c.s)


def test_frame_dump_round_trip(tmp_path):
    cfg = small_cfg(l=4, n=16)
    rng = np.random.default_rng(1)
    frames = frames_from_paths(
        [120e-9], [0.5], [0.8 - 0.1j], cfg, rng=None
    )
    path = tmp_path / "frames.bin"
    dump_frames(frames, path)
    raw = path.read_bytes()
    assert len(raw) == 8 + 16 * 4 * 8  # header + complex64 payload
    assert int.from_bytes(raw[:4], "little") == 16
    assert int.from_bytes(raw[4:8], "little") == 4
    loaded = load_frames(path, cfg)
    assert np.allclose(loaded.s, frames.s, atol=1e-6)  # float32 round trip
    with pytest.raises(ValueError):
        load_frames(path, small_cfg(l=8, n=16))
