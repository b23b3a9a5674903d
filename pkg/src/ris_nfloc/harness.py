"""Monte Carlo experiments, the fixed-order baseline, metrics and timing.

A trial draws the UE on the room floor, the clock and phase offsets, a
multipath realization and receiver noise, then runs the shared pipeline
(channel, frames, spectrum, peak extraction) once.  Two labelers consume the
same extraction: the geometric one and the fixed-order baseline that models
code-collision failure.  Censored trials (position fit failures) are counted,
never dropped silently.

Power bookkeeping: the nominal absolute powers are meaningless against raw
double-bounce path loss, so cascade gains are path-loss-normalized per trial
(transmit power control): gains scaled so the tile-averaged magnitude equals
``gain_reference``.  The same normalized gains feed the per-tile SNRs for the
error bound, keeping simulation and bound coherent; the exact convention is
in :mod:`ris_nfloc.bounds`.
"""

from __future__ import annotations

import csv
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .accel import NUMBA_ENABLED
from .bounds import cascade_snrs, fim
from .channel import MultipathConfig, realize_channel
from .constants import SPEED_OF_LIGHT
from .geometry import RisLayout, build_scene, toa_vector
from .labeling import run_spl
from .psp import PspAssignment, assign
from .spectrum import ToaGroups, extract_toas, spectrum_2d
from .tdoa import PositionEstimationError, build_system, solve_position
from .waveform import WaveformConfig, synthesize_frames

THREADS_ENV = "RIS_NFLOC_THREADS"


def _dbm_to_watt(dbm: float) -> float:
    return 1e-3 * 10.0 ** (dbm / 10.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """Full experiment description; defaults follow the reference setup
    (64-tile linear RIS on the y=10 wall of a 10x10x3 room, 400 MHz OFDM
    at 28 GHz)."""

    # scene
    tile_count: int = 64
    tile_spacing_m: float = 0.1
    ris_center_m: tuple = (5.0, 10.0, 2.0)
    ris_axis: tuple = (1.0, 0.0, 0.0)
    elements_x: int = 4
    elements_z: int = 10
    bs_position_m: tuple = (0.0, 5.0, 2.0)
    room_min_m: tuple = (0.0, 0.0, 0.0)
    room_max_m: tuple = (10.0, 10.0, 3.0)
    wall_margin_m: float = 0.5
    # waveform
    subcarriers: int = 3200
    spacing_hz: float = 120e3
    carrier_hz: float = 28e9
    power_dbm: float = 20.0
    noise_dbm: float = -8.0
    # slope assignment
    frames: int = 16
    exclusive_tiles: int = 4
    # multipath
    multipath_paths: int = 3
    multipath_power_db: float = -15.0
    multipath_excess_min_m: float = 0.5
    multipath_excess_max_m: float = 5.0
    # experiment
    trials: int = 1000
    seed: int = 1
    oversampling: int = 4
    clock_uncertainty_s: float = 1e-6
    refine: bool = True
    peak_threshold: float = 6.0
    residual_cap: int = 8
    gain_reference: float = 2.0
    resolvability_margin: float = 2.0
    magnitude_weighting: bool = True

    @property
    def bandwidth_hz(self) -> float:
        return self.subcarriers * self.spacing_hz

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def room(self) -> tuple:
        return (self.room_min_m, self.room_max_m)

    def waveform_config(self) -> WaveformConfig:
        return WaveformConfig(
            n_subcarriers=self.subcarriers,
            spacing=self.spacing_hz,
            carrier=self.carrier_hz,
            tx_power=_dbm_to_watt(self.power_dbm),
            noise_psd=_dbm_to_watt(self.noise_dbm),
            l_frames=self.frames,
        )

    def layout(self) -> RisLayout:
        return RisLayout(
            tile_count=self.tile_count,
            tile_spacing=self.tile_spacing_m,
            center=np.asarray(self.ris_center_m, dtype=float),
            axis=np.asarray(self.ris_axis, dtype=float),
            elements_x=self.elements_x,
            elements_z=self.elements_z,
        )

    def assignment(self) -> PspAssignment:
        return assign(self.tile_count, self.frames, self.exclusive_tiles)


@dataclass(frozen=True)
class TrialResult:
    """Outcome of one Monte Carlo trial for both labelers."""

    error_proposed: float
    error_baseline: float
    label_acc_proposed: float
    label_acc_baseline: float
    labeled_proposed: int
    labeled_baseline: int
    censored_proposed: bool
    censored_baseline: bool
    peb: float


@dataclass(frozen=True)
class SweepPoint:
    sweep_value: float
    rmse_proposed: float
    rmse_baseline: float
    peb: float
    label_acc: float
    label_acc_baseline: float
    rmse_proposed_all: float  # censored trials included at their best iterate
    rmse_baseline_all: float
    censored_fraction: float
    wall_time_s: float


@dataclass(frozen=True)
class MetricsTable:
    variable: str
    points: tuple[SweepPoint, ...]


def _draw_ue(cfg: ExperimentConfig, rng: np.random.Generator) -> np.ndarray:
    """Uniform floor position, rejecting draws hugging the RIS wall."""
    lo = np.asarray(cfg.room_min_m, dtype=float)
    hi = np.asarray(cfg.room_max_m, dtype=float)
    center = np.asarray(cfg.ris_center_m, dtype=float)
    axis = np.asarray(cfg.ris_axis, dtype=float)
    up = np.array([0.0, 0.0, 1.0])
    normal = np.cross(axis, up)
    norm = np.linalg.norm(normal)
    while True:
        p = np.array([rng.uniform(lo[0], hi[0]), rng.uniform(lo[1], hi[1]), 0.0])
        if norm < 1e-9:
            return p
        if abs(np.dot(p - center, normal / norm)) >= cfg.wall_margin_m:
            return p


def _truth_sequences(
    assignment: PspAssignment, true_toas: np.ndarray
) -> dict[int, tuple[int, ...]]:
    out = {}
    for i, tiles in assignment.groups.items():
        out[i] = tuple(sorted(tiles, key=lambda k: (-true_toas[k - 1], k)))
    return out


def _label_accuracy(
    entries, assignment: PspAssignment, truth: dict[int, tuple[int, ...]]
) -> tuple[float, int]:
    """Fraction of labeled arrivals whose tile matches the ground truth.

    Per group, the descending arrivals correspond position-wise to the tiles
    sorted by descending true ToA; unlabeled (skipped) groups are excluded
    from the denominator.
    """
    correct = 0
    labeled = 0
    by_tile = {k: t for t, k in entries}
    for i, tiles in assignment.groups.items():
        group_entries = [(by_tile[k], k) for k in tiles if k in by_tile]
        if not group_entries:
            continue
        group_entries.sort(key=lambda e: (-e[0], e[1]))
        estimated = tuple(k for _, k in group_entries)
        correct += sum(a == b for a, b in zip(estimated, truth[i]))
        labeled += len(estimated)
    return (correct / labeled if labeled else 0.0), labeled


def label_baseline_dft(
    toa_groups: ToaGroups, assignment: PspAssignment
) -> tuple[list[tuple[float, int]], list[float]]:
    """Fixed-order labeling modeling the code-collision failure.

    Within each slope group the descending arrivals are mapped to the tiles
    in ascending index order (the unsorted initial hypothesis); no geometry
    is consulted, so collided groups come out wrong whenever the true delay
    order disagrees with tile order.
    """
    entries: list[tuple[float, int]] = []
    mags: list[float] = []
    for i in sorted(assignment.groups):
        if i not in toa_groups.toas:
            continue
        tiles = sorted(assignment.groups[i])
        for tau, k, m in zip(
            toa_groups.toas[i], tiles, toa_groups.magnitudes[i]
        ):
            entries.append((float(tau), k))
            mags.append(float(m))
    return entries, mags


def _solve_entries(entries, mags, scene, cfg: ExperimentConfig) -> np.ndarray:
    system = build_system(entries, scene.tile_centers, scene.p_bs)
    if not cfg.magnitude_weighting:
        return solve_position(system, room=cfg.room)
    by_tile = {k: m for (_, k), m in zip(entries, mags)}
    sigma_ref = 1.0 / max(by_tile[system.ref_tile], 1e-30)
    sigmas = np.array(
        [1.0 / max(by_tile[k], 1e-30) for _, k in entries if k != system.ref_tile]
    )
    return solve_position(system, room=cfg.room, sigmas=sigmas, sigma_ref=sigma_ref)


def run_trial(cfg: ExperimentConfig, trial_seed) -> TrialResult:
    """One Monte Carlo trial: shared pipeline, two labelers, one bound.

    ``trial_seed`` is any seed accepted by ``numpy.random.default_rng``;
    the harness derives it deterministically from (config seed, trial index).
    """
    rng = np.random.default_rng(trial_seed)
    ue = _draw_ue(cfg, rng)
    t0 = rng.uniform(0.0, cfg.clock_uncertainty_s)
    phi0 = rng.uniform(0.0, 2.0 * np.pi)
    scene = build_scene(
        cfg.layout(),
        np.asarray(cfg.bs_position_m, dtype=float),
        ue,
        t0=t0,
        phi0=phi0,
        wavelength=cfg.wavelength_m,
    )
    mp = MultipathConfig(
        j_paths=cfg.multipath_paths,
        power_rel_db=cfg.multipath_power_db,
        excess_min_m=cfg.multipath_excess_min_m,
        excess_max_m=cfg.multipath_excess_max_m,
        seed=int(rng.integers(2**63)),
    )
    channel = realize_channel(scene, cfg.wavelength_m, mp)
    cascade = cfg.gain_reference * channel.cascade / np.mean(np.abs(channel.cascade))
    assignment = cfg.assignment()
    wcfg = cfg.waveform_config()
    frames = synthesize_frames(
        scene, cascade, assignment, wcfg, noise_seed=int(rng.integers(2**63))
    )
    spec_map = spectrum_2d(frames, cfg.oversampling)
    toa_groups = extract_toas(
        spec_map, assignment, refine=cfg.refine, threshold_factor=cfg.peak_threshold
    )
    true_toas = toa_vector(scene)
    truth = _truth_sequences(assignment, true_toas)

    err_p, acc_p, nlab_p, cens_p = np.nan, 0.0, 0, True
    try:
        label_map, p_hat, _ = run_spl(
            toa_groups,
            assignment,
            scene,
            room=cfg.room,
            residual_cap=cfg.residual_cap,
            min_toa_gap=cfg.resolvability_margin / cfg.bandwidth_hz,
            magnitude_weighting=cfg.magnitude_weighting,
        )
        err_p = float(np.linalg.norm(p_hat - ue))
        acc_p, nlab_p = _label_accuracy(label_map.entries, assignment, truth)
        cens_p = False
    except PositionEstimationError as exc:
        if exc.best_estimate is not None:
            err_p = float(np.linalg.norm(exc.best_estimate - ue))
    except ValueError:
        pass

    err_b, acc_b, nlab_b, cens_b = np.nan, 0.0, 0, True
    base_entries, base_mags = label_baseline_dft(toa_groups, assignment)
    if len(base_entries) >= 3:
        try:
            p_base = _solve_entries(base_entries, base_mags, scene, cfg)
            err_b = float(np.linalg.norm(p_base - ue))
            acc_b, nlab_b = _label_accuracy(base_entries, assignment, truth)
            cens_b = False
        except PositionEstimationError as exc:
            if exc.best_estimate is not None:
                err_b = float(np.linalg.norm(exc.best_estimate - ue))

    k_ref = int(np.argmin(true_toas)) + 1
    bound = fim(scene, cascade_snrs(cascade, wcfg), cfg.bandwidth_hz, k_ref)
    peb = bound.peb if np.isfinite(bound.peb) else bound.peb_observable

    return TrialResult(
        error_proposed=err_p,
        error_baseline=err_b,
        label_acc_proposed=acc_p,
        label_acc_baseline=acc_b,
        labeled_proposed=nlab_p,
        labeled_baseline=nlab_b,
        censored_proposed=cens_p,
        censored_baseline=cens_b,
        peb=peb,
    )


def _worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_trials(cfg: ExperimentConfig, point_index: int = 0) -> list[TrialResult]:
    """All trials of one config, deterministic regardless of scheduling."""
    seeds = [
        np.random.SeedSequence(entropy=cfg.seed, spawn_key=(point_index, t))
        for t in range(cfg.trials)
    ]
    workers = _worker_count()
    if workers == 1:
        return [run_trial(cfg, s) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: run_trial(cfg, s), seeds))


def _rmse(values: np.ndarray) -> float:
    values = values[np.isfinite(values)]
    if len(values) == 0:
        return float("nan")
    return float(np.sqrt(np.mean(values**2)))


def summarize(cfg: ExperimentConfig, results: list[TrialResult], sweep_value: float,
              wall_time_s: float) -> SweepPoint:
    ep = np.array([r.error_proposed for r in results])
    eb = np.array([r.error_baseline for r in results])
    cens_p = np.array([r.censored_proposed for r in results])
    cens_b = np.array([r.censored_baseline for r in results])
    return SweepPoint(
        sweep_value=sweep_value,
        rmse_proposed=_rmse(ep[~cens_p]),
        rmse_baseline=_rmse(eb[~cens_b]),
        peb=float(np.nanmean([r.peb for r in results])),
        label_acc=float(np.mean([r.label_acc_proposed for r in results])),
        label_acc_baseline=float(np.mean([r.label_acc_baseline for r in results])),
        rmse_proposed_all=_rmse(ep),
        rmse_baseline_all=_rmse(eb),
        censored_fraction=float(np.mean(cens_p | cens_b)),
        wall_time_s=wall_time_s,
    )


def apply_sweep_value(cfg: ExperimentConfig, variable: str, value: float) -> ExperimentConfig:
    """Derive the config of one sweep point.

    ``K`` varies the tile count, ``L`` the frame budget, ``B`` the bandwidth
    (by scaling the subcarrier spacing at a fixed subcarrier count).
    """
    if variable == "K":
        return replace(cfg, tile_count=int(value))
    if variable == "L":
        return replace(cfg, frames=int(value))
    if variable == "B":
        return replace(cfg, spacing_hz=float(value) / cfg.subcarriers)
    raise ValueError(f"unknown sweep variable {variable!r} (use K, L or B)")


def sweep(cfg: ExperimentConfig, variable: str, values) -> MetricsTable:
    points = []
    for idx, value in enumerate(values):
        sub = apply_sweep_value(cfg, variable, value)
        start = time.perf_counter()
        results = run_trials(sub, point_index=idx)
        points.append(
            summarize(sub, results, float(value), time.perf_counter() - start)
        )
    return MetricsTable(variable=variable, points=tuple(points))


def cdf(errors) -> np.ndarray:
    """Sorted error samples; pairs with (i+1)/n cumulative probabilities."""
    errors = np.asarray(errors, dtype=float)
    return np.sort(errors[np.isfinite(errors)])


def heatmap(cfg: ExperimentConfig, grid_resolution_m: float) -> list[tuple[float, float, float]]:
    """Per-cell RMSE of the geometric labeler over a fixed floor grid."""
    if grid_resolution_m <= 0:
        raise ValueError("grid resolution must be positive")
    lo = np.asarray(cfg.room_min_m, dtype=float)
    hi = np.asarray(cfg.room_max_m, dtype=float)
    xs = np.arange(lo[0] + grid_resolution_m / 2, hi[0], grid_resolution_m)
    ys = np.arange(lo[1] + grid_resolution_m / 2, hi[1], grid_resolution_m)
    point_cfg = replace(cfg, wall_margin_m=0.0)
    rows = []
    for ix, x in enumerate(xs):
        for iy, y in enumerate(ys):
            errors = []
            for t in range(cfg.trials):
                seed = np.random.SeedSequence(
                    entropy=cfg.seed, spawn_key=(ix, iy, t)
                )
                res = _fixed_ue_trial(point_cfg, np.array([x, y, 0.0]), seed)
                errors.append(res)
            rmse = _rmse(np.array(errors))
            rows.append((float(x), float(y), rmse))
    return rows


def _fixed_ue_trial(cfg: ExperimentConfig, ue: np.ndarray, trial_seed) -> float:
    rng = np.random.default_rng(trial_seed)
    t0 = rng.uniform(0.0, cfg.clock_uncertainty_s)
    phi0 = rng.uniform(0.0, 2.0 * np.pi)
    scene = build_scene(
        cfg.layout(),
        np.asarray(cfg.bs_position_m, dtype=float),
        ue,
        t0=t0,
        phi0=phi0,
        wavelength=cfg.wavelength_m,
    )
    mp = MultipathConfig(
        j_paths=cfg.multipath_paths,
        power_rel_db=cfg.multipath_power_db,
        excess_min_m=cfg.multipath_excess_min_m,
        excess_max_m=cfg.multipath_excess_max_m,
        seed=int(rng.integers(2**63)),
    )
    channel = realize_channel(scene, cfg.wavelength_m, mp)
    cascade = cfg.gain_reference * channel.cascade / np.mean(np.abs(channel.cascade))
    assignment = cfg.assignment()
    frames = synthesize_frames(
        scene, cascade, assignment, cfg.waveform_config(),
        noise_seed=int(rng.integers(2**63)),
    )
    spec_map = spectrum_2d(frames, cfg.oversampling)
    toa_groups = extract_toas(
        spec_map, assignment, refine=cfg.refine, threshold_factor=cfg.peak_threshold
    )
    try:
        _, p_hat, _ = run_spl(
            toa_groups,
            assignment,
            scene,
            room=cfg.room,
            residual_cap=cfg.residual_cap,
            min_toa_gap=cfg.resolvability_margin / cfg.bandwidth_hz,
            magnitude_weighting=cfg.magnitude_weighting,
        )
        return float(np.linalg.norm(p_hat - ue))
    except (PositionEstimationError, ValueError):
        return float("nan")


def _time_callable(fn, min_time_s: float = 0.02, repeats: int = 3) -> float:
    """Per-call seconds, repetition-adjusted; min over repeats."""
    fn()  # warm up (JIT compilation, caches)
    best = float("inf")
    for _ in range(repeats):
        calls = 0
        start = time.perf_counter()
        elapsed = 0.0
        while elapsed < min_time_s:
            fn()
            calls += 1
            elapsed = time.perf_counter() - start
        best = min(best, elapsed / calls)
    return best


def timing_benchmark(cfg: ExperimentConfig, sizes=(256, 512, 1024, 2048, 4096)):
    """Stage timings plus the fitted spectrum growth exponent.

    Returns (rows, exponent) where rows are (stage, size, seconds) entries:
    the fast spectrum path across a 16x range of padded grid sizes, the dense
    reference kernel under both its numba and numpy implementations, and the
    labeling-plus-solve stage versus tile count.  The exponent fits
    ``time ~ (n*log2(n))^e`` for the fast path, ``n`` the padded grid size.
    """
    rng = np.random.default_rng(cfg.seed)
    rows = []
    fast_sizes, fast_times = [], []
    wcfg_l = 16
    for n_sub in sizes:
        wcfg = WaveformConfig(
            n_subcarriers=int(n_sub),
            spacing=cfg.bandwidth_hz / n_sub,
            carrier=cfg.carrier_hz,
            tx_power=1.0,
            noise_psd=0.0,
            l_frames=wcfg_l,
        )
        s = rng.standard_normal((n_sub, wcfg_l)) + 1j * rng.standard_normal(
            (n_sub, wcfg_l)
        )
        from .waveform import FrameMatrix

        frames = FrameMatrix(s=s, config=wcfg)
        seconds = _time_callable(lambda: spectrum_2d(frames, cfg.oversampling))
        size = cfg.oversampling * n_sub * wcfg_l
        rows.append(("spectrum_fft", size, seconds))
        fast_sizes.append(size)
        fast_times.append(seconds)

    # dense reference kernel: jitted vs vectorized numpy
    n_dense, l_dense = 128, 8
    s = rng.standard_normal((n_dense, l_dense)) + 1j * rng.standard_normal(
        (n_dense, l_dense)
    )
    n_bar = cfg.oversampling * n_dense
    if NUMBA_ENABLED:
        rows.append(
            (
                "spectrum_dense_numba",
                n_bar * l_dense,
                _time_callable(lambda: kernels.idft2_dense_numba(s, n_bar)),
            )
        )
    rows.append(
        (
            "spectrum_dense_numpy",
            n_bar * l_dense,
            _time_callable(lambda: kernels.idft2_dense_numpy(s, n_bar)),
        )
    )
    mag = np.abs(rng.standard_normal(4096))
    if NUMBA_ENABLED:
        rows.append(
            (
                "peak_scan_numba",
                4096,
                _time_callable(lambda: kernels.column_peak_mask_numba(mag, 0.5)),
            )
        )
    rows.append(
        (
            "peak_scan_numpy",
            4096,
            _time_callable(lambda: kernels.column_peak_mask_numpy(mag, 0.5)),
        )
    )

    # labeling + solve on exact arrivals across tile counts
    for k_tiles in (8, 16, 32, 64):
        sub = replace(cfg, tile_count=k_tiles, trials=1)
        scene = build_scene(
            sub.layout(),
            np.asarray(sub.bs_position_m, dtype=float),
            np.array([3.0, 4.0, 0.0]),
            wavelength=sub.wavelength_m,
        )
        assignment = sub.assignment()
        true_toas = toa_vector(scene)
        toas = {}
        mags = {}
        for i, tiles in assignment.groups.items():
            vals = np.sort([true_toas[k - 1] for k in tiles])[::-1]
            toas[i] = vals
            mags[i] = np.ones(len(tiles))
        groups = ToaGroups(toas=toas, magnitudes=mags)
        seconds = _time_callable(
            lambda: run_spl(groups, assignment, scene, room=sub.room)
        )
        rows.append(("spl_tdoa", k_tiles, seconds))

    x = np.log(np.array(fast_sizes) * np.log2(fast_sizes))
    y = np.log(np.array(fast_times))
    exponent = float(np.polyfit(x, y, 1)[0])
    return rows, exponent


def write_sweep_csv(table: MetricsTable, path) -> None:
    """sweep.csv with the fixed column order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["sweep_value", "rmse_proposed", "rmse_baseline", "peb", "label_acc"]
        )
        for p in table.points:
            writer.writerow(
                [
                    f"{p.sweep_value:.12g}",
                    f"{p.rmse_proposed:.12g}",
                    f"{p.rmse_baseline:.12g}",
                    f"{p.peb:.12g}",
                    f"{p.label_acc:.12g}",
                ]
            )


def write_cdf_csv(errors, path) -> None:
    samples = cdf(errors)
    n = len(samples)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["error_m", "cum_prob"])
        for i, e in enumerate(samples):
            writer.writerow([f"{e:.12g}", f"{(i + 1) / n:.12g}"])


def write_heatmap_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "rmse"])
        for x, y, rmse in rows:
            writer.writerow([f"{x:.12g}", f"{y:.12g}", f"{rmse:.12g}"])


def write_timing_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stage", "size", "seconds"])
        for stage, size, seconds in rows:
            writer.writerow([stage, size, f"{seconds:.6g}"])


def write_trials_csv(results: list[TrialResult], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "trial",
                "error_proposed_m",
                "error_baseline_m",
                "label_acc_proposed",
                "label_acc_baseline",
                "censored_proposed",
                "censored_baseline",
                "peb_m",
            ]
        )
        for t, r in enumerate(results):
            writer.writerow(
                [
                    t,
                    f"{r.error_proposed:.12g}",
                    f"{r.error_baseline:.12g}",
                    f"{r.label_acc_proposed:.12g}",
                    f"{r.label_acc_baseline:.12g}",
                    int(r.censored_proposed),
                    int(r.censored_baseline),
                    f"{r.peb:.12g}",
                ]
            )
