"""File formats: JSON environments and trajectories, CSV scans, fixes and reports.

This is the only place where dBm is converted to milliwatts and back.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import defaultdict
from pathlib import Path
from typing import IO, Any, Iterable, Mapping, Sequence

from .dop import DopAssessment
from .errors import ParseError, ValidationError
from .radio import AccessPoint, Environment, Receiver, RssScan, dbm_to_mw, mw_to_dbm
from .sim import CartographyPoint, SampleRecord, Trajectory
from .solver import PositionFix

LOGGER = logging.getLogger(__name__)

SCAN_COLUMNS = ("timestamp", "ap_id", "rss_dbm")
TRUTH_COLUMNS = ("truth_x", "truth_y", "truth_z")
REPORT_COLUMNS = (
    "time",
    "truth_x",
    "truth_y",
    "truth_z",
    "x",
    "y",
    "z",
    "error_m",
    "dop",
    "visible",
    "qualified",
    "classification",
    "min_rss_dbm",
    "converged",
)
_NOT_RECEIVED = {"", "-inf", "nan", "none"}


def format_number(value: float, digits: int = 12) -> str:
    """Locale-independent number text; infinite DOP is always ``inf``."""
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.{digits}g}"


def _read_json(path: Path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise ParseError(err.msg, path=path, line=err.lineno) from err


def _number(data: Mapping[str, Any], key: str, default: float | None = None) -> float:
    if key not in data or data[key] is None:
        if default is None:
            raise ValidationError(key, "missing")
        return default
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValidationError(key, f"expected a finite number, got {value!r}")
    return float(value)


def load_environment(path: Path | str) -> Environment:
    """Parse and validate an environment file, converting dBm fields to milliwatts."""
    data = _read_json(Path(path))
    if not isinstance(data, Mapping):
        raise ValidationError("environment", "top level must be a JSON object")
    aps_data = data.get("aps")
    if not isinstance(aps_data, list):
        raise ValidationError("aps", "expected a list of access points")

    aps = []
    for entry in aps_data:
        if not isinstance(entry, Mapping):
            raise ValidationError("aps", "each access point must be an object")
        ap_id = entry.get("id")
        if not isinstance(ap_id, str) or not ap_id:
            raise ValidationError("id", "each access point needs a non-empty string id")
        aps.append(
            AccessPoint(
                id=ap_id,
                position=(_number(entry, "x"), _number(entry, "y"), _number(entry, "z")),
                tx_power=dbm_to_mw(_number(entry, "tx_power_dbm")),
                tx_gain=_number(entry, "tx_gain", 1.0),
                wavelength=_number(entry, "wavelength_m", 0.125),
            )
        )

    receiver_data = data.get("receiver") or {}
    if not isinstance(receiver_data, Mapping):
        raise ValidationError("receiver", "expected an object")
    dimension = data.get("dimension", 3)
    if dimension not in (2, 3) or isinstance(dimension, bool):
        raise ValidationError("dimension", f"must be 2 or 3, got {dimension!r}")
    threshold_dbm = data.get("ss_threshold_dbm")
    threshold = 0.0 if threshold_dbm is None else dbm_to_mw(_number(data, "ss_threshold_dbm"))

    env = Environment(
        aps=aps,
        receiver=Receiver(rx_gain=_number(receiver_data, "gain", 1.0)),
        dimension=int(dimension),
        ss_threshold=threshold,
    )
    LOGGER.debug("Loaded %d access points from %s", len(env.aps), path)
    return env


def load_trajectory(path: Path | str) -> Trajectory:
    data = _read_json(Path(path))
    if not isinstance(data, Mapping):
        raise ValidationError("trajectory", "top level must be a JSON object")
    waypoints = data.get("waypoints")
    if not isinstance(waypoints, list):
        raise ValidationError("waypoints", "expected a list of [x, y, z] points")
    return Trajectory(
        waypoints=waypoints,
        speed=_number(data, "speed", 1.0),
        sample_period=_number(data, "sample_period", 1.0),
    )


def _parse_float(raw: str, column: str, path: Path, line: int) -> float:
    try:
        return float(raw)
    except ValueError as err:
        raise ParseError(f"column {column}: not a number: {raw!r}", path=path, line=line) from err


def load_scans(path: Path | str, env: Environment | None = None) -> list[RssScan]:
    """Group ``timestamp,ap_id,rss_dbm[,truth_*]`` rows into time-ordered scans."""
    path = Path(path)
    readings: dict[float, dict[str, float]] = defaultdict(dict)
    truths: dict[float, tuple[float, float, float]] = {}
    with path.open(newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        missing = [column for column in SCAN_COLUMNS if column not in header]
        if missing:
            raise ParseError(f"missing columns: {', '.join(missing)}", path=path, line=1)
        has_truth = all(column in header for column in TRUTH_COLUMNS)
        for row in reader:
            line = reader.line_num
            timestamp = _parse_float(row["timestamp"], "timestamp", path, line)
            ap_id = (row["ap_id"] or "").strip()
            if not ap_id:
                raise ParseError("empty ap_id", path=path, line=line)
            raw = (row["rss_dbm"] or "").strip()
            if raw.lower() in _NOT_RECEIVED:
                power = 0.0
            else:
                power = dbm_to_mw(_parse_float(raw, "rss_dbm", path, line))
            readings[timestamp][ap_id] = power
            if has_truth and all((row[column] or "").strip() for column in TRUTH_COLUMNS):
                truth = tuple(_parse_float(row[column], column, path, line) for column in TRUTH_COLUMNS)
                if truths.setdefault(timestamp, truth) != truth:
                    raise ParseError(f"conflicting truth for timestamp {timestamp}", path=path, line=line)

    scans = [
        RssScan(timestamp=timestamp, readings=values, truth=truths.get(timestamp))
        for timestamp, values in sorted(readings.items())
    ]
    if env is not None:
        for scan in scans:
            env.check_scan(scan)
    return scans


def write_scans(path: Path | str, scans: Iterable[RssScan]) -> None:
    scans = list(scans)
    with_truth = any(scan.truth is not None for scan in scans)
    columns = SCAN_COLUMNS + (TRUTH_COLUMNS if with_truth else ())
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for scan in scans:
            truth = [format_number(value, 17) for value in scan.truth] if scan.truth else ["", "", ""]
            for ap_id, power in sorted(scan.readings.items()):
                level = format_number(mw_to_dbm(power), 17) if power > 0 else "-inf"
                row = [format_number(scan.timestamp, 17), ap_id, level]
                writer.writerow(row + truth if with_truth else row)


def write_assessments(
    stream: IO[str], rows: Iterable[tuple[float, DopAssessment]]
) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("timestamp", "visible", "qualified", "dop", "classification"))
    for timestamp, assessment in rows:
        writer.writerow(
            (
                format_number(timestamp),
                assessment.visible_count,
                assessment.qualified_count,
                format_number(assessment.dop),
                assessment.classification.value,
            )
        )


def write_fixes(stream: IO[str], fixes: Sequence[PositionFix]) -> None:
    with_truth = any(fix.truth is not None for fix in fixes)
    columns = ["timestamp", "x", "y", "z", "residual", "iterations", "converged", "dop", "classification"]
    if with_truth:
        columns += [*TRUTH_COLUMNS, "error_m"]
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for fix in fixes:
        row = [
            format_number(fix.timestamp),
            *(format_number(value) for value in fix.position),
            format_number(fix.residual_norm),
            fix.iterations,
            str(fix.converged).lower(),
            format_number(fix.assessment.dop),
            fix.assessment.classification.value,
        ]
        if with_truth:
            if fix.truth is not None:
                row += [*(format_number(value) for value in fix.truth), format_number(fix.error or 0.0)]
            else:
                row += ["", "", "", ""]
        writer.writerow(row)


def write_cartography(stream: IO[str], points: Iterable[CartographyPoint]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("x", "y", "z", "visible", "qualified", "dop", "classification"))
    for point in points:
        writer.writerow(
            (
                format_number(point.x),
                format_number(point.y),
                format_number(point.z),
                point.visible,
                point.qualified,
                format_number(point.dop),
                point.classification,
            )
        )


def write_cells(path: Path | str, rows: Iterable[tuple[int, int, int, float, float]]) -> None:
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(("floor", "i", "j", "x", "y"))
        for floor, i, j, x, y in rows:
            writer.writerow((floor, i, j, format_number(x), format_number(y)))


def write_report(path: Path | str, samples: Iterable[SampleRecord]) -> None:
    """Per-sample report with round-trip precision."""
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for sample in samples:
            writer.writerow(
                (
                    format_number(sample.time, 17),
                    *(format_number(value, 17) for value in sample.truth),
                    *(format_number(value, 17) for value in sample.estimate),
                    format_number(sample.error_m, 17),
                    format_number(sample.dop, 17),
                    sample.visible,
                    sample.qualified,
                    sample.classification,
                    format_number(sample.min_rss_dbm, 17),
                    str(sample.converged).lower(),
                )
            )


def load_report(path: Path | str) -> list[SampleRecord]:
    path = Path(path)
    samples = []
    with path.open(newline="") as handle:
        reader = csv.DictReader(handle)
        missing = [column for column in REPORT_COLUMNS if column not in (reader.fieldnames or [])]
        if missing:
            raise ParseError(f"missing columns: {', '.join(missing)}", path=path, line=1)
        for row in reader:
            line = reader.line_num

            def number(column: str) -> float:
                return _parse_float(row[column], column, path, line)

            try:
                visible = int(row["visible"])
                qualified = int(row["qualified"])
            except ValueError as err:
                raise ParseError("visible/qualified must be integers", path=path, line=line) from err
            samples.append(
                SampleRecord(
                    time=number("time"),
                    truth=(number("truth_x"), number("truth_y"), number("truth_z")),
                    estimate=(number("x"), number("y"), number("z")),
                    error_m=number("error_m"),
                    dop=number("dop"),
                    visible=visible,
                    qualified=qualified,
                    classification=row["classification"],
                    min_rss_dbm=number("min_rss_dbm"),
                    converged=row["converged"].strip().lower() == "true",
                )
            )
    return samples
