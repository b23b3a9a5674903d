"""Command-line front end.

Subcommands cover the Monte Carlo experiments (simulate, sweep, heatmap,
cdf), the error bound (peb), the timing benchmark (bench) and the built-in
property suite (selftest).  Flags override config-file keys; every output is
reproducible from (config, seed).  Exit codes: 0 success, 2 configuration
error, 3 pipeline failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import replace

import numpy as np

from . import harness
from .bounds import cascade_snrs, fim
from .channel import MultipathConfig, realize_channel
from .config import ConfigError, config_template, load_config
from .geometry import build_scene, toa_vector
from .selftest import run_selftest

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PIPELINE = 3


def _parse_values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"bad numeric list {text!r}") from None


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ris-nfloc",
        description="RIS-assisted near-field localization simulator",
    )
    parser.add_argument("--config", help="INI config file (see --print-config)")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, help="override experiment seed")
    parser.add_argument("--trials", type=int, help="override trial count")
    parser.add_argument("--tiles", type=int, help="override tile count K")
    parser.add_argument("--frames", type=int, help="override frame budget L")
    parser.add_argument(
        "--bandwidth-hz",
        type=float,
        help="override bandwidth (scales subcarrier spacing)",
    )
    parser.add_argument(
        "--print-config", action="store_true", help="print the config schema and exit"
    )
    sub = parser.add_subparsers(dest="command")

    sub.add_parser("simulate", help="Monte Carlo run; writes trials.csv")

    p_sweep = sub.add_parser("sweep", help="sweep K, L or B; writes sweep.csv")
    p_sweep.add_argument("--var", required=True, choices=("K", "L", "B"))
    p_sweep.add_argument("--values", required=True, help="comma-separated values")

    p_heat = sub.add_parser("heatmap", help="floor RMSE grid; writes heatmap.csv")
    p_heat.add_argument("--resolution-m", type=float, default=1.0)

    sub.add_parser("cdf", help="error CDF of a Monte Carlo run; writes cdf.csv")

    p_peb = sub.add_parser("peb", help="position error bound; writes peb.csv")
    p_peb.add_argument(
        "--values", help="comma-separated bandwidths for a curve (Hz)"
    )
    p_peb.add_argument(
        "--ue", default="5,5", help="UE floor position x,y (default mid-room)"
    )

    p_bench = sub.add_parser("bench", help="timing benchmark; writes timing.csv")
    p_bench.add_argument(
        "--sizes", default="256,512,1024,2048,4096",
        help="subcarrier counts for the spectrum stage",
    )

    sub.add_parser("selftest", help="run the built-in property suites")
    return parser


def _apply_overrides(cfg, args):
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.trials is not None:
        cfg = replace(cfg, trials=args.trials)
    if args.tiles is not None:
        cfg = replace(cfg, tile_count=args.tiles)
    if args.frames is not None:
        cfg = replace(cfg, frames=args.frames)
    if args.bandwidth_hz is not None:
        cfg = replace(cfg, spacing_hz=args.bandwidth_hz / cfg.subcarriers)
    return cfg


def _peb_at(cfg, ue_xy, bandwidth=None) -> float:
    sub = cfg if bandwidth is None else harness.apply_sweep_value(cfg, "B", bandwidth)
    scene = build_scene(
        sub.layout(),
        np.asarray(sub.bs_position_m, dtype=float),
        np.array([ue_xy[0], ue_xy[1], 0.0]),
        wavelength=sub.wavelength_m,
    )
    mp = MultipathConfig(
        j_paths=sub.multipath_paths,
        power_rel_db=sub.multipath_power_db,
        excess_min_m=sub.multipath_excess_min_m,
        excess_max_m=sub.multipath_excess_max_m,
        seed=sub.seed,
    )
    channel = realize_channel(scene, sub.wavelength_m, mp)
    cascade = sub.gain_reference * channel.cascade / np.mean(np.abs(channel.cascade))
    k_ref = int(np.argmin(toa_vector(scene))) + 1
    result = fim(scene, cascade_snrs(cascade, sub.waveform_config()), sub.bandwidth_hz, k_ref)
    return result.peb if np.isfinite(result.peb) else result.peb_observable


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.print_config:
        print(config_template(), end="")
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = _apply_overrides(load_config(args.config), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    os.makedirs(args.out, exist_ok=True)

    try:
        if args.command == "simulate":
            results = harness.run_trials(cfg)
            harness.write_trials_csv(results, os.path.join(args.out, "trials.csv"))
            point = harness.summarize(cfg, results, 0.0, 0.0)
            print(
                f"trials={cfg.trials} rmse_proposed={point.rmse_proposed:.4g} "
                f"rmse_baseline={point.rmse_baseline:.4g} "
                f"label_acc={point.label_acc:.4g} "
                f"censored={point.censored_fraction:.4g}"
            )
        elif args.command == "sweep":
            values = _parse_values(args.values)
            table = harness.sweep(cfg, args.var, values)
            harness.write_sweep_csv(table, os.path.join(args.out, "sweep.csv"))
            for p in table.points:
                print(
                    f"{args.var}={p.sweep_value:g} rmse_proposed={p.rmse_proposed:.4g} "
                    f"rmse_baseline={p.rmse_baseline:.4g} peb={p.peb:.4g}"
                )
        elif args.command == "heatmap":
            rows = harness.heatmap(cfg, args.resolution_m)
            harness.write_heatmap_csv(rows, os.path.join(args.out, "heatmap.csv"))
            print(f"heatmap cells={len(rows)}")
        elif args.command == "cdf":
            results = harness.run_trials(cfg)
            errors = [r.error_proposed for r in results if not r.censored_proposed]
            harness.write_cdf_csv(errors, os.path.join(args.out, "cdf.csv"))
            samples = harness.cdf(errors)
            if len(samples):
                print(
                    f"n={len(samples)} p50={np.percentile(samples, 50):.4g} "
                    f"p90={np.percentile(samples, 90):.4g}"
                )
        elif args.command == "peb":
            ue_xy = _parse_values(args.ue)
            if len(ue_xy) != 2:
                raise ConfigError("--ue expects x,y")
            bandwidths = (
                _parse_values(args.values) if args.values else [cfg.bandwidth_hz]
            )
            rows = [(b, _peb_at(cfg, ue_xy, b)) for b in bandwidths]
            with open(os.path.join(args.out, "peb.csv"), "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["sweep_value", "peb"])
                for b, peb in rows:
                    writer.writerow([f"{b:.12g}", f"{peb:.12g}"])
            for b, peb in rows:
                print(f"bandwidth={b:g} peb={peb:.6g}")
        elif args.command == "bench":
            sizes = [int(v) for v in _parse_values(args.sizes)]
            rows, exponent = harness.timing_benchmark(cfg, sizes=sizes)
            harness.write_timing_csv(rows, os.path.join(args.out, "timing.csv"))
            for stage, size, seconds in rows:
                print(f"{stage:22s} size={size:<8d} {seconds * 1e3:.3f} ms")
            print(f"spectrum growth exponent vs n*log2(n): {exponent:.3f}")
        elif args.command == "selftest":
            if not run_selftest():
                return EXIT_PIPELINE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # pipeline failure
        print(f"pipeline failure: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
