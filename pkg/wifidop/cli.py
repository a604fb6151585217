"""Command-line entry point for wifidop."""

from __future__ import annotations

import argparse
import logging
import math
import re
import sys
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path
from typing import IO, Iterator, Sequence

from . import __version__
from .const import DEFAULT_FLOOR_HEIGHT, DEFAULT_RX_HEIGHT, DEFAULT_SEED, DEFAULT_SIGMA_DB, MODEL_FRIIS, MODEL_NAMES
from .coverage import build_grid, cell_rows, extract_cell, geometric_indicator, wlan_indicator
from .dop import QualifierPolicy, assess
from .errors import CellTooSmall, WifiDopError
from .files import (
    format_number,
    load_environment,
    load_report,
    load_scans,
    load_trajectory,
    write_assessments,
    write_cartography,
    write_cells,
    write_fixes,
    write_report,
    write_scans,
)
from .propagation import PropagationModel, model_from_name
from .radio import Environment, dbm_to_mw
from .settings import Settings, load_settings
from .sim import (
    EvaluationReport,
    NoiseModel,
    dop_cartography,
    run_experiment,
    sample_rng,
    sample_trajectory,
    summarize,
    synthesize_scan,
)
from .solver import SolverConfig, solve_trajectory

LOGGER = logging.getLogger(__name__)

__all__ = ["build_parser", "load_environment", "main", "parse_args"]

_LEVEL_FLAGS = ("--q", "--dropout-dbm")
_NEGATIVE_LEVEL = re.compile(r"^-\d+(\.\d+)?(dbm)?$", re.IGNORECASE)


def _vector(raw: str) -> tuple[float, float, float]:
    parts = raw.split(",")
    try:
        values = tuple(float(part) for part in parts)
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {raw!r}") from err
    if len(values) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {raw!r}")
    return values  # type: ignore[return-value]


def _bounds(raw: str) -> tuple[float, float, float, float]:
    try:
        values = tuple(float(part) for part in raw.split(","))
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected x0,y0,x1,y1, got {raw!r}") from err
    if len(values) != 4:
        raise argparse.ArgumentTypeError(f"expected x0,y0,x1,y1, got {raw!r}")
    return values  # type: ignore[return-value]


def _grid(raw: str) -> tuple[float, float]:
    try:
        width, height = (float(part) for part in raw.lower().split("x"))
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected WxH in metres, got {raw!r}") from err
    if width <= 0 or height <= 0:
        raise argparse.ArgumentTypeError("grid dimensions must be positive")
    return width, height


def _dbm(raw: str) -> float:
    text = raw.strip().lower().removesuffix("dbm")
    try:
        value = float(text)
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected a level in dBm, got {raw!r}") from err
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError("level must be finite")
    return value


def _bin_edges(raw: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in raw.split(","))
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected comma-separated edges, got {raw!r}") from err


def _model_choice(parser: argparse.ArgumentParser, default: str | None = MODEL_FRIIS) -> None:
    parser.add_argument("--model", choices=MODEL_NAMES, default=default, help="Propagation model.")
    parser.add_argument(
        "--friis-legacy",
        action="store_true",
        help="Invert Friis without the wavelength/4pi factor.",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wifidop",
        description="Wi-Fi positioning with dilution-of-precision quality estimates.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="More logging (repeatable).")
    parser.add_argument("--settings", type=Path, default=None, help="Path to a wifidop.env file.")
    subparsers = parser.add_subparsers(dest="command", required=True)

    dop_parser = subparsers.add_parser("dop", help="Assess the DOP of each scan at a fixed position.")
    dop_parser.add_argument("--env", type=Path, required=True)
    dop_parser.add_argument("--scans", type=Path, required=True)
    dop_parser.add_argument("--at", type=_vector, required=True, help="Position x,y,z in metres.")
    dop_parser.add_argument("--weighted", action="store_true", help="Signal-weighted coefficient (extension).")
    dop_parser.add_argument("--dim", type=int, choices=(2, 3), default=None)
    dop_parser.add_argument("--good-dop-max", type=float, default=None)
    dop_parser.add_argument("--out", type=Path, default=None)
    _model_choice(dop_parser)

    locate_parser = subparsers.add_parser("locate", help="Estimate a position for every scan.")
    locate_parser.add_argument("--env", type=Path, required=True)
    locate_parser.add_argument("--scans", type=Path, required=True)
    locate_parser.add_argument("--dim", type=int, choices=(2, 3), default=None)
    locate_parser.add_argument("--max-iterations", type=int, default=None)
    locate_parser.add_argument("--alert-dop", type=float, default=None, help="Warn when DOP exceeds this value.")
    locate_parser.add_argument("--weighted", action="store_true")
    locate_parser.add_argument("--out", type=Path, default=None)
    _model_choice(locate_parser)

    coverage_parser = subparsers.add_parser("coverage", help="Cell compactness indicators for one AP.")
    coverage_parser.add_argument("--env", type=Path, required=True)
    coverage_parser.add_argument("--grid", type=_grid, required=True, help="Area WxH in metres.")
    coverage_parser.add_argument("--pixel", type=float, default=0.5, help="Pixel size in metres.")
    coverage_parser.add_argument("--floors", type=int, default=1)
    coverage_parser.add_argument("--floor-height", type=float, default=DEFAULT_FLOOR_HEIGHT)
    coverage_parser.add_argument("--rx-height", type=float, default=DEFAULT_RX_HEIGHT)
    coverage_parser.add_argument("--q", type=_dbm, required=True, help="Quality threshold, e.g. -75dBm.")
    coverage_parser.add_argument("--ap", required=True)
    coverage_parser.add_argument("--dump", type=Path, default=None, help="Write pixel membership CSV.")
    coverage_parser.add_argument("--model", choices=(MODEL_NAMES[0], MODEL_NAMES[1]), default=MODEL_FRIIS)

    simulate_parser = subparsers.add_parser("simulate", help="Run a synthetic trajectory experiment.")
    simulate_parser.add_argument("--env", type=Path, required=True)
    simulate_parser.add_argument("--trajectory", type=Path, required=True)
    simulate_parser.add_argument("--sigma", type=float, default=DEFAULT_SIGMA_DB, help="Shadowing sigma in dB.")
    simulate_parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    simulate_parser.add_argument("--dropout-dbm", type=_dbm, default=None, help="Readings below are lost.")
    simulate_parser.add_argument("--dim", type=int, choices=(2, 3), default=None)
    simulate_parser.add_argument("--dop-at-truth", action="store_true")
    simulate_parser.add_argument("--weighted", action="store_true")
    simulate_parser.add_argument("--no-warm-start", action="store_true")
    simulate_parser.add_argument("--workers", type=int, default=None)
    simulate_parser.add_argument("--out", type=Path, required=True, help="Per-sample report CSV.")
    simulate_parser.add_argument("--scans-out", type=Path, default=None, help="Also write the synthetic scans.")
    _model_choice(simulate_parser)

    evaluate_parser = subparsers.add_parser("evaluate", help="Summarise a simulation report.")
    evaluate_parser.add_argument("--report", type=Path, required=True)
    evaluate_parser.add_argument("--bins", type=_bin_edges, default=None, help="DOP bin edges, e.g. 5,10,15.")
    evaluate_parser.add_argument("--gnuplot", action="store_true", help="Emit plot-ready column blocks.")

    carto_parser = subparsers.add_parser("cartography", help="Noiseless DOP map over a horizontal slice.")
    carto_parser.add_argument("--env", type=Path, required=True)
    carto_parser.add_argument("--z", type=float, required=True)
    carto_parser.add_argument("--step", type=float, default=1.0)
    carto_parser.add_argument("--bounds", type=_bounds, default=None, help="x0,y0,x1,y1")
    carto_parser.add_argument("--dim", type=int, choices=(2, 3), default=None)
    carto_parser.add_argument("--out", type=Path, default=None)
    _model_choice(carto_parser)
    return parser


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    return build_parser().parse_args(_attach_negative_levels(sys.argv[1:] if argv is None else argv))


def _attach_negative_levels(argv: Sequence[str]) -> list[str]:
    """Glue ``--q -75dBm`` into ``--q=-75dBm`` so argparse does not read the level as a flag."""
    tokens = list(argv)
    joined: list[str] = []
    index = 0
    while index < len(tokens):
        token = tokens[index]
        if token in _LEVEL_FLAGS and index + 1 < len(tokens) and _NEGATIVE_LEVEL.match(tokens[index + 1]):
            joined.append(f"{token}={tokens[index + 1]}")
            index += 2
            continue
        joined.append(token)
        index += 1
    return joined


def main(argv: Sequence[str] | None = None) -> int:
    args = parse_args(argv)
    _configure_logging(args.verbose)
    try:
        settings = load_settings(args.settings)
        handler = _HANDLERS[args.command]
        handler(args, settings)
    except (WifiDopError, OSError) as err:
        LOGGER.error("%s", err)
        return 1
    return 0


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


@contextmanager
def _output(path: Path | None) -> Iterator[IO[str]]:
    if path is None:
        yield sys.stdout
        return
    with path.open("w", newline="") as handle:
        yield handle


def _environment(args: argparse.Namespace) -> Environment:
    env = load_environment(args.env)
    if getattr(args, "dim", None) is not None:
        env = replace(env, dimension=args.dim)
    return env


def _model(args: argparse.Namespace, settings: Settings) -> PropagationModel:
    legacy = bool(getattr(args, "friis_legacy", False)) or settings.friis_legacy_inversion
    return model_from_name(args.model, legacy=legacy)


def _policy(args: argparse.Namespace, settings: Settings, model: PropagationModel) -> QualifierPolicy:
    good_dop_max = getattr(args, "good_dop_max", None) or settings.good_dop_max
    return QualifierPolicy(good_dop_max=good_dop_max, weighted=args.weighted, model=model)


def _run_dop(args: argparse.Namespace, settings: Settings) -> None:
    env = _environment(args)
    policy = _policy(args, settings, _model(args, settings))
    scans = load_scans(args.scans, env)
    rows = [(scan.timestamp, assess(env, scan, args.at, policy)) for scan in scans]
    with _output(args.out) as stream:
        write_assessments(stream, rows)


def _run_locate(args: argparse.Namespace, settings: Settings) -> None:
    env = _environment(args)
    model = _model(args, settings)
    cfg = SolverConfig(
        model=model,
        dimension=env.dimension,
        policy=_policy(args, settings, model),
        alert_dop=args.alert_dop if args.alert_dop is not None else settings.alert_dop,
    )
    if args.max_iterations is not None:
        cfg = replace(cfg, max_iterations=args.max_iterations)
    fixes = solve_trajectory(env, load_scans(args.scans, env), cfg)
    with _output(args.out) as stream:
        write_fixes(stream, fixes)


def _run_coverage(args: argparse.Namespace, settings: Settings) -> None:
    env = load_environment(args.env)
    env.ap(args.ap)
    width, height = args.grid
    grid = build_grid(
        env,
        model_from_name(args.model),
        width,
        height,
        args.pixel,
        args.floors,
        quality_threshold=dbm_to_mw(args.q),
        floor_height=args.floor_height,
        rx_height=args.rx_height,
    )
    cells = [extract_cell(grid, floor, args.ap) for floor in range(grid.floors)]
    usable = []
    print("floor,pixels,indicator")
    for cell in cells:
        try:
            value = format_number(geometric_indicator(cell))
            usable.append(cell)
        except CellTooSmall as err:
            LOGGER.warning("%s", err)
            value = "nan"
        print(f"{cell.floor},{len(cell)},{value}")
    if not usable:
        raise CellTooSmall(f"no floor has a usable cell for access point {args.ap!r}")
    print(f"wlan,{sum(len(cell) for cell in usable)},{format_number(wlan_indicator(usable))}")
    if args.dump is not None:
        write_cells(args.dump, cell_rows(grid, cells))


def _run_simulate(args: argparse.Namespace, settings: Settings) -> None:
    env = _environment(args)
    model = _model(args, settings)
    trajectory = load_trajectory(args.trajectory)
    seed = settings.seed if settings.seed is not None else args.seed
    noise = NoiseModel(
        sigma_db=args.sigma,
        dropout_below=dbm_to_mw(args.dropout_dbm) if args.dropout_dbm is not None else 0.0,
        seed=seed,
    )
    cfg = SolverConfig(model=model, dimension=env.dimension, policy=_policy(args, settings, model))
    report = run_experiment(
        env,
        trajectory,
        noise,
        model,
        cfg,
        dop_at_truth=args.dop_at_truth,
        warm_start=not args.no_warm_start,
        workers=args.workers or settings.workers,
    )
    write_report(args.out, report.samples)
    if args.scans_out is not None:
        write_scans(
            args.scans_out,
            [
                synthesize_scan(env, position, noise, model, rng=sample_rng(noise.seed, index), timestamp=time)
                for index, (time, position) in enumerate(sample_trajectory(trajectory))
            ],
        )
    _print_summary(report)


def _run_evaluate(args: argparse.Namespace, settings: Settings) -> None:
    samples = load_report(args.report)
    report = summarize(samples, args.bins) if args.bins else summarize(samples)
    if args.gnuplot:
        _print_gnuplot(report)
    else:
        _print_summary(report)


def _run_cartography(args: argparse.Namespace, settings: Settings) -> None:
    env = _environment(args)
    model = _model(args, settings)
    policy = QualifierPolicy(good_dop_max=settings.good_dop_max)
    points = dop_cartography(env, model, args.z, step=args.step, bounds=args.bounds, policy=policy)
    with _output(args.out) as stream:
        write_cartography(stream, points)


def _print_summary(report: EvaluationReport) -> None:
    print("dop_low,dop_high,count,mean_error_m,max_error_m")
    for summary in report.bins:
        print(
            ",".join(
                (
                    format_number(summary.low),
                    format_number(summary.high),
                    str(summary.count),
                    format_number(summary.mean_error),
                    format_number(summary.max_error),
                )
            )
        )
    print(f"inf,inf,{report.infinite_count},{format_number(report.infinite_mean_error)},")
    print(f"spearman,{format_number(report.spearman)}")
    print("qualified,count,infinite_share,mean_dop,mean_error_m")
    for group in report.by_qualified_count:
        print(
            f"{group.qualified},{group.count},{format_number(group.infinite_share)},"
            f"{format_number(group.mean_dop)},{format_number(group.mean_error)}"
        )


def _print_gnuplot(report: EvaluationReport) -> None:
    print("# dop error_m")
    for sample in report.samples:
        print(f"{format_number(sample.dop)} {format_number(sample.error_m)}")
    print("\n\n# time dop")
    for sample in report.samples:
        print(f"{format_number(sample.time)} {format_number(sample.dop)}")
    print("\n\n# min_rss_dbm dop")
    for sample in report.samples:
        print(f"{format_number(sample.min_rss_dbm)} {format_number(sample.dop)}")


_HANDLERS = {
    "dop": _run_dop,
    "locate": _run_locate,
    "coverage": _run_coverage,
    "simulate": _run_simulate,
    "evaluate": _run_evaluate,
    "cartography": _run_cartography,
}
