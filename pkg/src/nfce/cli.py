"""Command-line entry point: ``nfce <subcommand> [options]``.

Exit codes: 0 success, 1 configuration error, 2 runtime error, 3 selftest failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .config import ConfigError, build_config, dump_defaults, parse_value, read_config_file
from .geometry import synthesize_channel, sample_scenario
from .measurement import angular_coefficients, dft_matrix
from .selftest import FAULTS, run_selftest

log = logging.getLogger("nfce")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_SELFTEST = 0, 1, 2, 3

DEFAULT_GRID = {
    "scaled": [(r, 1.0) for r in (2.0, 5.0, 10.0, 15.0, 20.0)],
    "fixed": [(r, 1.0) for r in (1e-2, 1e-1, 1.0, 10.0, 100.0)],
}


def _common_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="flat key = value config file")
    p.add_argument("--seed", help="base seed (unsigned 64-bit)")
    p.add_argument("--estimators", help="comma list from: " + ",".join(harness.ESTIMATORS))
    p.add_argument("--snr", help="comma list of SNR values in dB")
    p.add_argument("--nr", help="comma list of RIS element counts")
    p.add_argument("--nrf", help="comma list of RF-chain counts")
    p.add_argument("--trials", help="Monte-Carlo trials per point")
    p.add_argument("--threads", help="worker threads for trials")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    p.add_argument("--dump-defaults", action="store_true", help="print every default and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def make_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(prog="nfce", description="Near-field RIS channel estimation experiments")
    parser.add_argument("--dump-defaults", action="store_true", help="print every default and exit")
    sub = parser.add_subparsers(dest="command")
    sub.add_parser("spectrum", parents=[common], help="angular-domain amplitude of one two-path channel")
    sub.add_parser("snr-sweep", parents=[common], help="NMSE versus SNR")
    sub.add_parser("rf-sweep", parents=[common], help="NMSE versus SNR for several RF-chain counts")
    sub.add_parser("cpu-sweep", parents=[common], help="estimator wall time versus array size")
    gs = sub.add_parser("grid-search", parents=[common], help="cross-validate regularization weights")
    gs.add_argument("--grid", help="comma list of reg:penalty pairs")
    st = sub.add_parser("selftest", parents=[common], help="fast invariant checks")
    st.add_argument("--inject-fault", action="append", default=[], choices=FAULTS, help=argparse.SUPPRESS)
    return parser


def _overrides(args) -> dict:
    ov = {}

    def put(key, text):
        ov[key] = parse_value(key, text)

    if args.seed is not None:
        put("base_seed", args.seed)
    if args.estimators is not None:
        put("estimators", args.estimators)
    if args.snr is not None:
        put("snr_db_list", args.snr)
    if args.nr is not None:
        put("n_elements_list", args.nr)
        if len(ov["n_elements_list"]) == 1:
            ov["n_elements"] = ov["n_elements_list"][0]
    if args.nrf is not None:
        put("n_rf_list", args.nrf)
        if len(ov["n_rf_list"]) == 1:
            ov["n_rf"] = ov["n_rf_list"][0]
    if args.trials is not None:
        key = "cpu_trials" if args.command == "cpu-sweep" else "n_trials"
        put(key, args.trials)
    if args.threads is not None:
        put("threads", args.threads)
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, text = item.split("=", 1)
        put(key.strip(), text)
    return ov


def _write_sweep(out: Path, stem: str, summary: harness.MetricsSummary) -> None:
    out.mkdir(parents=True, exist_ok=True)
    harness.write_trials_csv(out / f"{stem}_trials.csv", summary.records)
    harness.write_summary_csv(out / f"{stem}_summary.csv", summary)
    print(summary.table())
    print(f"wrote {out / f'{stem}_trials.csv'} and {out / f'{stem}_summary.csv'}")


def cmd_spectrum(cfg: harness.ExperimentConfig, out: Path) -> Path:
    """Write ``|z|`` per DFT bin for one seeded two-path channel."""
    cfg = cfg.replace(n_paths=2)
    rng = np.random.default_rng(harness.derive_seed(cfg.base_seed, 0))
    geometry = cfg.geometry()
    channel = synthesize_channel(geometry, sample_scenario(cfg.scenario(), rng))
    z = angular_coefficients(channel.h, dft_matrix(geometry.n_elements))
    out.mkdir(parents=True, exist_ok=True)
    path = out / "spectrum.csv"
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["bin", "abs_z"])
        for k, v in enumerate(np.abs(z)):
            w.writerow([k, repr(float(v))])
    for p in channel.paths:
        print(f"{p.kind.value:<4} angle={p.angle_rad:+.4f} rad  distance={p.distance_m:.3f} m  |gain|={abs(p.gain):.3f}")
    print(f"wrote {path}")
    return path


def cmd_grid_search(cfg, estimator_id: str, grid, out: Path) -> Path:
    best, table = harness.grid_search_reg(cfg, estimator_id, grid)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"grid_{estimator_id}.csv"
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["reg", "penalty", "mean_nmse"])
        for reg, pen, err in table:
            w.writerow([repr(reg), repr(pen), repr(err)])
    for reg, pen, err in table:
        mark = "  <- best" if (reg, pen) == best else ""
        print(f"reg={reg:<10g} penalty={pen:<8g} mean_nmse={err:.4e}{mark}")
    print(f"wrote {path}")
    return path


def _parse_grid(text: str):
    pairs = []
    for item in text.split(","):
        reg, _, pen = item.partition(":")
        pairs.append((float(reg), float(pen) if pen else 1.0))
    return pairs


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse reports usage errors with status 2; those are config errors here
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    if args.dump_defaults:
        sys.stdout.write(dump_defaults())
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    try:
        file_values = read_config_file(args.config) if args.config else {}
        overrides = _overrides(args)
        if args.command == "rf-sweep" and "n_paths" not in {**file_values, **overrides}:
            # the RF-chain experiment is a multi-path one unless told otherwise
            overrides["n_paths"] = 2
        cfg = build_config(file_values, overrides)
        grid = None
        if args.command == "grid-search":
            if len(cfg.estimators) != 1:
                raise ConfigError("grid-search needs exactly one estimator (--estimators tvr or besvr)")
            grid = _parse_grid(args.grid) if args.grid else DEFAULT_GRID[cfg.reg_mode]
    except (ConfigError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "selftest":
            return EXIT_OK if run_selftest(args.inject_fault) else EXIT_SELFTEST
        if args.command == "spectrum":
            cmd_spectrum(cfg, args.out)
        elif args.command == "snr-sweep":
            _write_sweep(args.out, "snr", harness.sweep_snr(cfg))
        elif args.command == "rf-sweep":
            _write_sweep(args.out, "rf", harness.sweep_rf(cfg))
        elif args.command == "cpu-sweep":
            _write_sweep(args.out, "cpu", harness.sweep_elements_time(cfg))
        elif args.command == "grid-search":
            cmd_grid_search(cfg, cfg.estimators[0], grid, args.out)
    except Exception as exc:
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
