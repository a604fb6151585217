"""Synthetic experiments: trajectories, noisy scans and DOP-versus-error analysis."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import spearmanr

from .const import COINCIDENCE_TOLERANCE, DEFAULT_DOP_BIN_EDGES, DEFAULT_SEED, DEFAULT_SIGMA_DB
from .dop import DopAssessment, QualifierPolicy, assess
from .errors import DegenerateRange, ValidationError
from .propagation import PropagationModel, forward_rss, snap_attenuation
from .radio import Environment, RssScan, Vector3, as_vector, dbm_to_mw, mw_to_dbm
from .solver import PositionFix, SolverConfig, solve_or_fallback, solve_trajectory

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class NoiseModel:
    """Log-normal shadowing with a reception floor."""

    sigma_db: float = DEFAULT_SIGMA_DB
    dropout_below: float = 0.0
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sigma_db) and self.sigma_db >= 0):
            raise ValidationError("sigma_db", "must be non-negative")
        if not self.dropout_below >= 0:
            raise ValidationError("dropout_below", "must be non-negative")


@dataclass(frozen=True)
class Trajectory:
    """Constant-speed walk through a list of waypoints."""

    waypoints: Sequence[Vector3]
    speed: float = 1.0
    sample_period: float = 1.0

    def __post_init__(self) -> None:
        points = tuple(as_vector(point, "waypoints") for point in self.waypoints)
        if not points:
            raise ValidationError("waypoints", "at least one waypoint is required")
        if not self.speed > 0:
            raise ValidationError("speed", "must be positive")
        if not self.sample_period > 0:
            raise ValidationError("sample_period", "must be positive")
        object.__setattr__(self, "waypoints", points)


@dataclass(frozen=True)
class SampleRecord:
    """One evaluated trajectory sample."""

    time: float
    truth: Vector3
    estimate: Vector3
    error_m: float
    dop: float
    visible: int
    qualified: int
    classification: str
    min_rss_dbm: float = math.nan
    converged: bool = True


@dataclass(frozen=True)
class BinSummary:
    low: float
    high: float
    count: int
    mean_error: float
    max_error: float


@dataclass(frozen=True)
class ApCountSummary:
    qualified: int
    count: int
    infinite_share: float
    mean_dop: float
    mean_error: float


@dataclass(frozen=True)
class EvaluationReport:
    """Per-sample records and their DOP-versus-error summaries."""

    samples: tuple[SampleRecord, ...]
    bins: tuple[BinSummary, ...]
    spearman: float
    infinite_count: int
    infinite_mean_error: float
    by_qualified_count: tuple[ApCountSummary, ...] = field(default_factory=tuple)

    @property
    def max_error(self) -> float:
        return max((sample.error_m for sample in self.samples), default=math.nan)


@dataclass(frozen=True)
class CartographyPoint:
    x: float
    y: float
    z: float
    visible: int
    qualified: int
    dop: float
    classification: str


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Independent random stream for sample ``index``; identical in any execution order."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def sample_trajectory(trajectory: Trajectory) -> list[tuple[float, Vector3]]:
    """Sample the walk every ``sample_period`` seconds, both endpoints included."""
    points = np.array(trajectory.waypoints, dtype=float)
    segment_lengths = np.linalg.norm(np.diff(points, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(segment_lengths)])
    duration = float(arc[-1]) / trajectory.speed
    if duration <= 0:
        return [(0.0, as_vector(points[0]))]

    steps = int(math.floor(duration / trajectory.sample_period + 1e-9))
    times = [k * trajectory.sample_period for k in range(steps + 1)]
    if duration - times[-1] > 1e-9 * max(1.0, duration):
        times.append(duration)
    else:
        times[-1] = duration

    samples = []
    for time in times:
        samples.append((time, _position_at(points, arc, min(time * trajectory.speed, float(arc[-1])))))
    return samples


def _position_at(points: np.ndarray, arc: np.ndarray, distance: float) -> Vector3:
    index = int(np.searchsorted(arc, distance, side="right")) - 1
    index = min(max(index, 0), len(points) - 2)
    length = arc[index + 1] - arc[index]
    fraction = 0.0 if length <= 0 else (distance - arc[index]) / length
    return as_vector(points[index] + fraction * (points[index + 1] - points[index]))


def synthesize_scan(
    env: Environment,
    truth: Sequence[float],
    noise: NoiseModel,
    model: PropagationModel,
    *,
    rng: np.random.Generator | None = None,
    timestamp: float = 0.0,
) -> RssScan:
    """Noisy scan of every AP as received at ``truth``."""
    point = as_vector(truth, "truth")
    rng = rng if rng is not None else np.random.default_rng(noise.seed)
    ap_ids = env.ap_ids
    shadowing = rng.normal(0.0, noise.sigma_db, size=len(ap_ids))

    readings: dict[str, float] = {}
    for ap_id, epsilon in zip(ap_ids, shadowing):
        ap = env.ap(ap_id)
        distance = math.dist(point, ap.position)
        if distance <= COINCIDENCE_TOLERANCE:
            raise DegenerateRange(f"truth coincides with access point {ap_id!r}")
        if model.is_path_loss:
            power = forward_rss(model, ap, env.receiver, distance) * 10.0 ** (epsilon / 10.0)
        else:
            power = dbm_to_mw(-snap_attenuation(distance) + epsilon)
        readings[ap_id] = 0.0 if power < noise.dropout_below else power
    return RssScan(timestamp=timestamp, readings=readings, truth=point)


def run_experiment(
    env: Environment,
    trajectory: Trajectory,
    noise: NoiseModel,
    model: PropagationModel,
    solver_cfg: SolverConfig,
    *,
    dop_at_truth: bool = False,
    bin_edges: Sequence[float] = DEFAULT_DOP_BIN_EDGES,
    warm_start: bool = True,
    workers: int = 1,
) -> EvaluationReport:
    """Walk the trajectory, position every noisy scan and summarise DOP against error."""
    samples = sample_trajectory(trajectory)
    scans = [
        synthesize_scan(env, position, noise, model, rng=sample_rng(noise.seed, index), timestamp=time)
        for index, (time, position) in enumerate(samples)
    ]
    fixes = _solve_all(env, scans, solver_cfg, warm_start=warm_start, workers=workers)

    records = []
    for scan, fix in zip(scans, fixes):
        assessment = fix.assessment
        if dop_at_truth:
            assessment = assess(env, scan, scan.truth, solver_cfg.policy)
        records.append(_record(scan, fix, assessment))
    report = summarize(records, bin_edges)
    LOGGER.info(
        "Experiment: %d samples, %d with infinite DOP, spearman=%.3f",
        len(records),
        report.infinite_count,
        report.spearman,
    )
    return report


def _solve_all(
    env: Environment,
    scans: Sequence[RssScan],
    cfg: SolverConfig,
    *,
    warm_start: bool,
    workers: int,
) -> list[PositionFix]:
    if warm_start:
        return solve_trajectory(env, scans, cfg)
    if workers <= 1:
        return [solve_or_fallback(env, scan, cfg) for scan in scans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda scan: solve_or_fallback(env, scan, cfg), scans))


def _record(scan: RssScan, fix: PositionFix, assessment: DopAssessment) -> SampleRecord:
    assert scan.truth is not None
    qualified = [scan.readings[ap_id] for ap_id in assessment.qualified_aps]
    return SampleRecord(
        time=scan.timestamp,
        truth=scan.truth,
        estimate=fix.position,
        error_m=math.dist(fix.position, scan.truth),
        dop=assessment.dop,
        visible=assessment.visible_count,
        qualified=assessment.qualified_count,
        classification=assessment.classification.value,
        min_rss_dbm=mw_to_dbm(min(qualified)) if qualified else math.nan,
        converged=fix.converged,
    )


def summarize(
    samples: Iterable[SampleRecord], bin_edges: Sequence[float] = DEFAULT_DOP_BIN_EDGES
) -> EvaluationReport:
    """Bin finite-DOP samples, rank-correlate DOP with error and tally by AP count."""
    records = tuple(samples)
    edges = _validated_edges(bin_edges)
    finite = [record for record in records if math.isfinite(record.dop)]
    infinite = [record for record in records if not math.isfinite(record.dop)]

    bins = []
    for low, high in zip(edges[:-1], edges[1:]):
        errors = [record.error_m for record in finite if low <= record.dop < high]
        bins.append(
            BinSummary(
                low=low,
                high=high,
                count=len(errors),
                mean_error=float(np.mean(errors)) if errors else math.nan,
                max_error=max(errors) if errors else math.nan,
            )
        )

    return EvaluationReport(
        samples=records,
        bins=tuple(bins),
        spearman=_rank_correlation(finite),
        infinite_count=len(infinite),
        infinite_mean_error=float(np.mean([record.error_m for record in infinite])) if infinite else math.nan,
        by_qualified_count=_by_qualified_count(records),
    )


def _validated_edges(bin_edges: Sequence[float]) -> tuple[float, ...]:
    edges = tuple(float(edge) for edge in bin_edges)
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValidationError("bins", "bin edges must be strictly increasing")
    if edges[0] > 0:
        edges = (0.0, *edges)
    if math.isfinite(edges[-1]):
        edges = (*edges, math.inf)
    return edges


def _rank_correlation(finite: Sequence[SampleRecord]) -> float:
    if len(finite) < 3:
        return math.nan
    dops = np.array([record.dop for record in finite])
    errors = np.array([record.error_m for record in finite])
    if np.ptp(dops) == 0 or np.ptp(errors) == 0:
        return math.nan
    return float(spearmanr(dops, errors)[0])


def _by_qualified_count(records: Sequence[SampleRecord]) -> tuple[ApCountSummary, ...]:
    groups: dict[int, list[SampleRecord]] = defaultdict(list)
    for record in records:
        groups[record.qualified].append(record)
    summaries = []
    for qualified in sorted(groups):
        group = groups[qualified]
        finite_dops = [record.dop for record in group if math.isfinite(record.dop)]
        summaries.append(
            ApCountSummary(
                qualified=qualified,
                count=len(group),
                infinite_share=1.0 - len(finite_dops) / len(group),
                mean_dop=float(np.mean(finite_dops)) if finite_dops else math.inf,
                mean_error=float(np.mean([record.error_m for record in group])),
            )
        )
    return tuple(summaries)


def dop_cartography(
    env: Environment,
    model: PropagationModel,
    z: float,
    *,
    step: float = 1.0,
    bounds: tuple[float, float, float, float] | None = None,
    policy: QualifierPolicy | None = None,
) -> list[CartographyPoint]:
    """Noiseless DOP over a horizontal slice at height ``z``.

    ``bounds`` is (x0, y0, x1, y1); it defaults to the AP footprint.
    """
    if not step > 0:
        raise ValidationError("step", "must be positive")
    if bounds is None:
        positions = env.positions(env.ap_ids)
        x0, y0 = positions[:, :2].min(axis=0)
        x1, y1 = positions[:, :2].max(axis=0)
        bounds = (float(x0), float(y0), float(x1), float(y1))
    x0, y0, x1, y1 = bounds
    if x1 < x0 or y1 < y0:
        raise ValidationError("bounds", "expected x0,y0,x1,y1 with x0 <= x1 and y0 <= y1")

    quiet = NoiseModel(sigma_db=0.0)
    points = []
    for y in np.arange(y0, y1 + step * 1e-6, step):
        for x in np.arange(x0, x1 + step * 1e-6, step):
            position = (float(x), float(y), float(z))
            try:
                scan = synthesize_scan(env, position, quiet, model)
                assessment = assess(env, scan, position, policy)
            except DegenerateRange:
                LOGGER.debug("Skipping cartography point %s on top of an access point", position)
                continue
            points.append(
                CartographyPoint(
                    x=position[0],
                    y=position[1],
                    z=position[2],
                    visible=assessment.visible_count,
                    qualified=assessment.qualified_count,
                    dop=assessment.dop,
                    classification=assessment.classification.value,
                )
            )
    return points
