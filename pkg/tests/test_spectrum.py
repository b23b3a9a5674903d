import numpy as np
import pytest

from ris_nfloc.psp import assign
from ris_nfloc.spectrum import (
    SpectrumMap,
    extract_toas,
    quadratic_refine,
    spectrum_2d,
    spectrum_to_csv,
)
from ris_nfloc.waveform import FrameMatrix, WaveformConfig, frames_from_paths


def small_cfg(n=64, l=8, noise=0.0, spacing=1e6):
    return WaveformConfig(
        n_subcarriers=n,
        spacing=spacing,
        carrier=1e9,
        tx_power=0.2,
        noise_psd=noise,
        l_frames=l,
    )


def grid_path(cfg, q, u_star, v_star, amp=1.0):
    """Single path exactly on the oversampled grid."""
    n_bar = q * cfg.n_subcarriers
    tau = u_star / (n_bar * cfg.spacing)
    beta = v_star / cfg.l_frames
    return tau, beta, frames_from_paths([tau], [beta], [amp], cfg)


def test_on_grid_peak_location_and_value():
    cfg = small_cfg()
    q = 4
    tau, beta, frames = grid_path(cfg, q, 40, 3)
    spec = spectrum_2d(frames, q)
    mag = np.abs(spec.grid)
    u, v = np.unravel_index(np.argmax(mag), mag.shape)
    assert (u, v) == (40, 3)
    # geometric series collapses to N*L in-phase terms of height P/N
    expected = cfg.tx_power / cfg.n_subcarriers * cfg.n_subcarriers * cfg.l_frames
    assert mag[u, v] == pytest.approx(expected, rel=1e-12)


def test_zero_frames_zero_map():
    cfg = small_cfg()
    frames = FrameMatrix(s=np.zeros((64, 8), dtype=complex), config=cfg)
    spec = spectrum_2d(frames, 4)
    assert np.all(spec.grid == 0)


def test_fft_matches_dense_sum():
    rng = np.random.default_rng(0)
    cfg = small_cfg(n=48, l=8)
    s = rng.standard_normal((48, 8)) + 1j * rng.standard_normal((48, 8))
    frames = FrameMatrix(s=s, config=cfg)
    for q in (1, 2, 4):
        fast = spectrum_2d(frames, q, method="fft")
        dense = spectrum_2d(frames, q, method="dense")
        rel = np.max(np.abs(fast.grid - dense.grid)) / np.max(np.abs(dense.grid))
        assert rel < 1e-9


def test_parseval_with_zero_padding():
    rng = np.random.default_rng(3)
    cfg = small_cfg(n=32, l=8)
    s = rng.standard_normal((32, 8)) + 1j * rng.standard_normal((32, 8))
    frames = FrameMatrix(s=s, config=cfg)
    spec = spectrum_2d(frames, 4)
    lhs = np.sum(np.abs(spec.grid) ** 2)
    rhs = spec.n_bar * cfg.l_frames * np.sum(np.abs(s) ** 2)
    assert abs(lhs - rhs) / rhs < 1e-9


def test_two_separated_paths_two_maxima():
    cfg = small_cfg()
    q = 4
    n_bar = q * 64
    # same slope, delays two resolution cells apart
    u1, u2, v = 60, 60 + 2 * q, 2
    taus = np.array([u1, u2]) / (n_bar * cfg.spacing)
    frames = frames_from_paths(taus, [v / 8, v / 8], [1.0, 0.8], cfg)
    spec = spectrum_2d(frames, q)
    col = np.abs(spec.grid[:, v])
    peaks = [
        u
        for u in range(n_bar)
        if col[u] > col[u - 1] and col[u] >= col[(u + 1) % n_bar]
        and col[u] > 0.4 * col.max()
    ]
    assert len(peaks) >= 2
    found = sorted(peaks, key=lambda u: -col[u])[:2]
    assert {min(found), max(found)} == {u1, u2}


def test_extract_exact_on_grid():
    cfg = small_cfg()
    q = 4
    assignment = assign(3, 8, 3)
    n_bar = q * 64
    u_stars = {i: 30 + 10 * i for i in assignment.groups}
    taus, betas = [], []
    for i, tiles in sorted(assignment.groups.items()):
        taus.append(u_stars[i] / (n_bar * cfg.spacing))
        betas.append(i / 8)
    frames = frames_from_paths(taus, betas, np.ones(3), cfg)
    spec = spectrum_2d(frames, q)
    groups = extract_toas(spec, assignment, refine=False)
    for i in assignment.groups:
        assert groups.toas[i][0] == pytest.approx(
            u_stars[i] / (n_bar * cfg.spacing), abs=1e-18
        )


def test_extract_off_grid_within_half_bin():
    cfg = small_cfg()
    q = 4
    assignment = assign(3, 8, 3)
    rng = np.random.default_rng(7)
    n_bar = q * 64
    bin_s = 1.0 / (n_bar * cfg.spacing)
    for _ in range(10):
        taus = []
        betas = []
        for i in sorted(assignment.groups):
            taus.append((rng.uniform(20, 120)) * bin_s)  # within half a period
            betas.append(i / 8)
        frames = frames_from_paths(taus, betas, np.ones(3), cfg)
        spec = spectrum_2d(frames, q)
        groups = extract_toas(spec, assignment, refine=False)
        for idx, i in enumerate(sorted(assignment.groups)):
            assert abs(groups.toas[i][0] - taus[idx]) <= bin_s / 2 + 1e-15


def test_under_detection_flag():
    cfg = small_cfg(l=3)
    q = 4
    # two tiles share one slope but their delays nearly coincide
    assignment = assign(4, 3, 2, min_k0=2)
    shared = [i for i, t in assignment.groups.items() if len(t) == 2][0]
    n_bar = q * 64
    bin_s = 1.0 / (n_bar * cfg.spacing)
    taus, betas = [], []
    for i, tiles in sorted(assignment.groups.items()):
        for j, _ in enumerate(tiles):
            base = 100 * bin_s if i == shared else (140 + 30 * i) * bin_s
            taus.append(base + j * 0.4 / cfg.bandwidth)
            betas.append(i / 3)
    frames = frames_from_paths(taus, betas, np.ones(len(taus)), cfg)
    spec = spectrum_2d(frames, q)
    groups = extract_toas(spec, assignment, threshold_factor=30.0)
    assert shared in groups.under_detected
    assert shared not in groups.toas


def test_toas_sorted_descending_with_magnitudes():
    cfg = small_cfg(l=3)
    q = 4
    assignment = assign(4, 3, 2, min_k0=2)
    shared = [i for i, t in assignment.groups.items() if len(t) == 2][0]
    n_bar = q * 64
    taus, betas, amps = [], [], []
    for i, tiles in sorted(assignment.groups.items()):
        for j, _ in enumerate(tiles):
            taus.append((60 + 40 * i + j * 16 * q) / (n_bar * cfg.spacing))
            betas.append(i / 3)
            amps.append(1.0 - 0.3 * j)
    frames = frames_from_paths(taus, betas, amps, cfg)
    spec = spectrum_2d(frames, q)
    groups = extract_toas(spec, assignment)
    arr = groups.toas[shared]
    assert len(arr) == 2 and arr[0] > arr[1]
    assert len(groups.magnitudes[shared]) == 2


def test_unwrap_recovers_differences_across_period():
    cfg = small_cfg(n=64, l=8, spacing=1.5625e6)  # period 640 ns
    q = 4
    assignment = assign(3, 8, 3)
    period = 1.0 / cfg.spacing
    # common clock offset pushes the set across the wrap boundary
    geo = np.array([40e-9, 52e-9, 64e-9])
    taus = np.mod(geo + 0.59e-6, period)
    assert taus.max() - taus.min() > period / 2  # the set straddles zero
    betas = [i / 8 for i in sorted(assignment.groups)]
    frames = frames_from_paths(taus, betas, np.ones(3), cfg)
    spec = spectrum_2d(frames, q)
    groups = extract_toas(spec, assignment)
    got = np.sort([groups.toas[i][0] for i in assignment.groups])
    diffs = np.diff(got)
    expected = np.diff(np.sort(geo))
    assert np.allclose(diffs, expected, atol=1.0 / (2 * q * cfg.bandwidth))


def test_quadratic_refine_symmetric_and_clamped():
    cfg = small_cfg(n=16, l=2)
    grid = np.zeros((64, 2))
    grid[10, 0] = 2.0
    grid[9, 0] = grid[11, 0] = 1.0
    spec = SpectrumMap(
        grid=grid.astype(complex), oversampling=4, n_bar=64, cfg=cfg
    )
    bin_s = spec.bin_seconds
    assert quadratic_refine(spec, 10, 0) == pytest.approx(10 * bin_s)
    # monotone neighborhood clamps to half a bin
    grid2 = np.zeros((64, 2), dtype=complex)
    grid2[9:12, 1] = [1.0, 2.0, 2.9]
    spec2 = SpectrumMap(grid=grid2, oversampling=4, n_bar=64, cfg=cfg)
    assert quadratic_refine(spec2, 10, 1) == pytest.approx((10 + 0.5) * bin_s)
    # flat neighborhood falls back to the bin center
    grid3 = np.ones((64, 2), dtype=complex)
    spec3 = SpectrumMap(grid=grid3, oversampling=4, n_bar=64, cfg=cfg)
    assert quadratic_refine(spec3, 20, 0) == pytest.approx(20 * bin_s)
    # edge bins are returned unrefined
    assert quadratic_refine(spec, 0, 0) == 0.0


def test_quadratic_refine_off_grid_accuracy():
    cfg = small_cfg()
    q = 4
    n_bar = q * 64
    bin_s = 1.0 / (n_bar * cfg.spacing)
    rng = np.random.default_rng(11)
    for _ in range(12):
        tau = rng.uniform(30, 220) * bin_s
        frames = frames_from_paths([tau], [0.25], [1.0], cfg)
        spec = spectrum_2d(frames, q)
        col = np.abs(spec.grid[:, 2])
        u = int(np.argmax(col))
        refined = quadratic_refine(spec, u, 2)
        assert abs(refined - tau) < 0.05 * bin_s


def test_spectrum_csv(tmp_path):
    cfg = small_cfg(n=8, l=2)
    frames = frames_from_paths([50e-9], [0.5], [1.0], cfg)
    spec = spectrum_2d(frames, 2)
    path = tmp_path / "spectrum.csv"
    spectrum_to_csv(spec, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "u,v,magnitude"
    assert len(lines) == 1 + spec.n_bar * 2
