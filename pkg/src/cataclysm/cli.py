"""Command-line entry point: ``cataclysm <command> [options]``.

Exit status: 0 on success, 1 when ``validate`` finds a violated invariant,
2 on configuration or usage errors.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from cataclysm import config as cfgmod
from cataclysm import io
from cataclysm.errors import CalibrationInfeasibleError, ConfigError, InvalidParameterError
from cataclysm.hazard import sample_events, write_inventory
from cataclysm.runner import (
    build_model,
    damage_sweep,
    ensemble_with_pairs,
    run_baseline,
    worker_count,
)

EXIT_OK, EXIT_INVALID, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message, key="argv")


def _grid(text: str) -> np.ndarray:
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"grid must be a:b:n, got {text!r}") from exc
    if n < 1 or not 0 < a <= b < 1 or (n > 1 and a == b):
        raise argparse.ArgumentTypeError(f"invalid grid {text!r}")
    return np.linspace(a, b, n)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="first seed; run i uses seed + i")
    common.add_argument("--runs", type=int, default=50, help="number of seeds in the ensemble")
    common.add_argument("--config", default=None, help="YAML config file")
    common.add_argument("--out-dir", default="out", help="output directory")

    p = _Parser(prog="cataclysm", description="Flood catastrophe model coupled to an agent-based macroeconomy.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("calibrate", parents=[common], help="calibrate the hazard model")
    s = sub.add_parser("simulate", parents=[common], help="baseline/shocked ensemble for one event")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--return-period", type=float, help="event return period in years")
    g.add_argument("--loss-fraction", type=float, help="national direct loss as share of capital")
    w = sub.add_parser("sweep", parents=[common], help="damage-size sweep")
    w.add_argument("--grid", type=_grid, default=_grid("0.005:0.12:12"), help="a:b:n loss fractions")
    w.add_argument("--year", type=int, default=2, help="year counted from the shock year (1 = shock year)")
    sub.add_parser("baseline", parents=[common], help="undisturbed runs")
    sub.add_parser("validate", parents=[common], help="run the invariant suite")
    return p


def _calibrate(args, cfg, model, out: Path, manifest):
    hz = model.hazard
    rows = []
    rng = np.random.default_rng(args.seed)
    for (T, target), (_, k) in zip(hz.calibration_targets, hz.multipliers):
        events = sample_events(hz, T, 200, rng)
        mean = float(np.mean([e.total_loss_fraction for e in events]))
        rows.append([T, target, k, mean, mean / target - 1.0])
        print(f"T={T:g}: target {target:.4%}, ensemble mean {mean:.4%} (200 draws)")
    paths = [io.write_rows(out / "calibration.csv",
                           ["return_period", "target_loss_fraction", "severity_multiplier",
                            "mean_loss_fraction_200", "relative_error"], rows)]
    inv = out / "cells.csv"
    write_inventory(inv, hz.cells, hz.loss_scale, hz.reference_T)
    paths.append(inv)
    manifest.seeds = [args.seed]
    return paths


def _simulate(args, cfg, model, out: Path, manifest):
    if args.runs < 1:
        raise InvalidParameterError("--runs must be positive")
    T, x = args.return_period, args.loss_fraction
    if x is not None and not 0 <= x <= 1:
        raise InvalidParameterError("--loss-fraction must lie in [0, 1]")
    if T is not None and T < 1:
        raise InvalidParameterError("--return-period must be >= 1")
    metrics, pairs = ensemble_with_pairs(model, args.runs, return_period=T, loss_fraction=x,
                                         base_seed=args.seed, workers=worker_count())
    paths = [io.write_diff_metrics(out / "diff_metrics.csv", metrics)]
    runs = []
    for seed, p in zip(metrics.seeds, pairs):
        runs += [(f"baseline-{seed}", p.baseline), (f"shocked-{seed}", p.shocked)]
    paths.append(io.write_quarterly(out / "quarterly.csv", runs))
    paths.append(io.emit_plot_data(out / "plot_gdp.csv", metrics.years, metrics.gdp_mean, metrics.gdp_std))
    paths.append(io.emit_plot_data(out / "plot_unemployment.csv", metrics.years,
                                   metrics.unemployment_mean, metrics.unemployment_std))
    paths.append(io.emit_plot_data(out / "plot_debt_to_gdp.csv", metrics.years,
                                   metrics.debt_mean, metrics.debt_std))
    for k, name in enumerate(cfg.economy.sector_names):
        paths.append(io.emit_plot_data(out / f"plot_gva_s{k + 1}.csv", metrics.years,
                                       metrics.gva_mean[:, k], metrics.gva_std[:, k]))
    damage = out / "damage_report.csv"
    pairs[0].report.write_csv(damage)
    paths.append(damage)
    manifest.seeds = list(metrics.seeds)
    manifest.parameters = {"return_period": T, "loss_fraction": x}
    post = metrics.years >= metrics.shock_year
    print("year  cum. GDP growth diff (pp)")
    for y, m, s in zip(metrics.years[post], metrics.gdp_mean[post], metrics.gdp_std[post]):
        print(f"{int(y)}  {m:+.3f} +- {s:.3f}")
    return paths


def _sweep(args, cfg, model, out: Path, manifest):
    if args.runs < 1:
        raise InvalidParameterError("--runs must be positive")
    res = damage_sweep(model, args.grid, n_seeds=args.runs, year=args.year, base_seed=args.seed,
                       workers=worker_count())
    paths = [io.write_sweep(out / "sweep.csv", res, cfg.shock_year),
             io.write_summary(out / "summary.txt", res),
             io.emit_plot_data(out / "plot_sweep.csv", res.grid, res.mean, res.std)]
    manifest.seeds = [args.seed + i for i in range(args.runs)]
    manifest.parameters = {"grid": res.grid.tolist(), "year": args.year}
    print(f"inflection point: {res.inflection_point}, argmax: {res.argmax}")
    return paths


def _baseline(args, cfg, model, out: Path, manifest):
    if args.runs < 1:
        raise InvalidParameterError("--runs must be positive")
    seeds = [args.seed + i for i in range(args.runs)]
    runs = [(f"baseline-{s}", run_baseline(model, s)) for s in seeds]
    manifest.seeds = seeds
    return [io.write_quarterly(out / "quarterly.csv", runs)]


def _validate(args, cfg, model, out: Path, manifest):
    from cataclysm.validation import Check, run_suite

    text = cfgmod.dumps(cfg)
    again = cfgmod.dumps(cfgmod.loads(text))
    checks = [Check("config round-trip", again == text, "parse-serialize-parse")]
    n = max(1, min(args.runs, 4))
    checks += run_suite(model, seeds=tuple(args.seed + i for i in range(n)))
    for c in checks:
        print(c.line())
    lines = "".join(c.line() + "\n" for c in checks)
    path = out / "validation.txt"
    path.write_text(lines)
    manifest.seeds = [args.seed + i for i in range(n)]
    return [path], all(c.passed for c in checks)


COMMANDS = {"calibrate": _calibrate, "simulate": _simulate, "sweep": _sweep,
            "baseline": _baseline, "validate": _validate}


def _known_options(parser) -> set:
    opts = set(parser._option_string_actions)
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sp in action.choices.values():
                opts |= _known_options(sp)
    return opts


def _reject_unknown(parser, argv) -> None:
    known = _known_options(parser)
    for tok in argv:
        if tok.startswith("--") and tok.split("=", 1)[0] not in known:
            raise ConfigError(f"unrecognized option {tok.split('=', 1)[0]}", key=tok.split("=", 1)[0])


def main(argv=None) -> int:
    t0 = time.perf_counter()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser = build_parser()
        _reject_unknown(parser, argv)
        args = parser.parse_args(argv)
        cfg = cfgmod.load_config(args.config)
        try:
            model = build_model(cfg)
        except CalibrationInfeasibleError as exc:
            raise ConfigError(str(exc), key="hazard.calibration_targets") from exc
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        manifest = io.RunManifest(command=args.command, config_hash=cfgmod.config_hash(cfg), seeds=[])
        result = COMMANDS[args.command](args, cfg, model, out, manifest)
        ok = True
        if isinstance(result, tuple):
            result, ok = result
        cfg_path = out / "config.yaml"
        cfg_path.write_text(cfgmod.dumps(cfg))
        manifest.record(*result, cfg_path)
        manifest.wall_clock_seconds = round(time.perf_counter() - t0, 3)
        manifest.write(out / "manifest.json")
        return EXIT_OK if ok else EXIT_INVALID
    except ConfigError as exc:
        key = f" [{exc.key}]" if exc.key else ""
        print(f"config error{key}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidParameterError as exc:
        print(f"invalid argument: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
