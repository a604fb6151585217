"""Wi-Fi dilution of precision.

The qualifier runs three steps: census of the visible access points, removal of
those whose signal is under the environment threshold, and the geometric
coefficient sqrt(Tr((H^T H)^-1)) over the remaining ones. Too few access points
for the positioning dimension, or a singular geometry, yield an infinite value.

H has one unit row per access point pointing from the user towards it. Ranging
from received signal strength has no receiver clock unknown, so H carries no
fourth column.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .const import COINCIDENCE_TOLERANCE, DEFAULT_GOOD_DOP_MAX, SINGULAR_RTOL
from .errors import DegenerateRange, ValidationError
from .propagation import PropagationModel, range_sensitivity
from .radio import Environment, RssScan, as_vector

LOGGER = logging.getLogger(__name__)


class Classification(str, Enum):
    GOOD = "good"
    DEGRADED = "degraded"
    INSUFFICIENT = "insufficient"


class ExclusionReason(str, Enum):
    NOT_RECEIVED = "not_received"
    BELOW_THRESHOLD = "below_threshold"


@dataclass(frozen=True)
class ExcludedAp:
    ap_id: str
    reason: ExclusionReason


@dataclass(frozen=True)
class GeometryMatrix:
    """Unit direction rows b_i from the user towards each AP, with their ranges."""

    rows: np.ndarray
    ranges: np.ndarray
    ap_ids: tuple[str, ...] = ()

    def __len__(self) -> int:
        return int(self.rows.shape[0])


@dataclass(frozen=True)
class DopAssessment:
    """Outcome of the three-step qualifier."""

    visible_count: int
    qualified_count: int
    dop: float
    classification: Classification
    excluded_aps: tuple[ExcludedAp, ...] = ()
    qualified_aps: tuple[str, ...] = ()
    weighted: bool = False

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.dop)


@dataclass(frozen=True)
class QualifierPolicy:
    """Tunables of the qualifier."""

    good_dop_max: float = DEFAULT_GOOD_DOP_MAX
    weighted: bool = False
    model: PropagationModel | None = field(default=None)

    def __post_init__(self) -> None:
        if not self.good_dop_max > 0:
            raise ValidationError("good_dop_max", "must be positive")
        if self.weighted and self.model is None:
            raise ValidationError("model", "the weighted coefficient needs a propagation model")


def visible_aps(env: Environment, scan: RssScan) -> list[str]:
    """Step one: every AP the scan received, ordered by id."""
    env.check_scan(scan)
    return sorted(ap_id for ap_id, value in scan.readings.items() if value > 0)


def qualify_aps(
    env: Environment, visible: Sequence[str], scan: RssScan
) -> tuple[list[str], list[ExcludedAp]]:
    """Step two: keep the visible APs whose reading reaches the threshold."""
    qualified: list[str] = []
    excluded: list[ExcludedAp] = []
    for ap_id in visible:
        env.ap(ap_id)
        if scan.readings.get(ap_id, 0.0) >= env.ss_threshold:
            qualified.append(ap_id)
        else:
            excluded.append(ExcludedAp(ap_id, ExclusionReason.BELOW_THRESHOLD))
    return qualified, excluded


def build_geometry(env: Environment, user: Sequence[float], aps: Sequence[str]) -> GeometryMatrix:
    """Stack the unit vectors from ``user`` to each AP, in input order."""
    point = np.asarray(as_vector(user, "user"), dtype=float)
    deltas = env.positions(list(aps)) - point
    ranges = np.linalg.norm(deltas, axis=1)
    for ap_id, distance in zip(aps, ranges):
        if distance <= COINCIDENCE_TOLERANCE:
            raise DegenerateRange(f"position coincides with access point {ap_id!r}")
    rows = deltas / ranges[:, None] if len(aps) else np.zeros((0, 3))
    return GeometryMatrix(rows=rows, ranges=ranges, ap_ids=tuple(aps))


def normal_matrix(
    geometry: GeometryMatrix, dimension: int, weights: Sequence[float] | None = None
) -> np.ndarray | None:
    """N = H^T W H in the positioning dimension, or None when too few rows remain."""
    selected = _dimension_rows(geometry.rows, dimension)
    if selected is None:
        return None
    rows, kept = selected
    if rows.shape[0] < dimension + 1:
        return None
    w = np.ones(geometry.rows.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    return rows.T @ (rows * w[kept, None])


def is_singular(normal: np.ndarray) -> bool:
    """Scale-aware singularity test: det(N) < rtol * (Tr(N) / dim) ** dim."""
    dim = normal.shape[0]
    trace = float(np.trace(normal))
    if not trace > 0:
        return True
    return float(np.linalg.det(normal)) < SINGULAR_RTOL * (trace / dim) ** dim


def compute_dop(
    geometry: GeometryMatrix, dimension: int = 3, weights: Sequence[float] | None = None
) -> float:
    """sqrt(Tr((H^T H)^-1)), infinite when under-determined or singular."""
    if dimension not in (2, 3):
        raise ValidationError("dimension", f"must be 2 or 3, got {dimension!r}")
    normal = normal_matrix(geometry, dimension, weights)
    if normal is None or is_singular(normal):
        return math.inf
    return math.sqrt(float(np.trace(np.linalg.inv(normal))))


def classify(qualified_count: int, dop: float, dimension: int, good_dop_max: float) -> Classification:
    """Good means a finite DOP up to ``good_dop_max``.

    There is no lower bound of 1: with more than ``dimension + 1`` well spread
    APs the DOP drops below 1 and still counts as Good.
    """
    if qualified_count < dimension + 1:
        return Classification.INSUFFICIENT
    if math.isfinite(dop) and dop <= good_dop_max:
        return Classification.GOOD
    return Classification.DEGRADED


def assess(
    env: Environment,
    scan: RssScan,
    user: Sequence[float],
    policy: QualifierPolicy | None = None,
) -> DopAssessment:
    """Run the full qualifier for ``scan`` with the user at ``user``."""
    policy = policy or QualifierPolicy()
    visible = visible_aps(env, scan)
    qualified, excluded = qualify_aps(env, visible, scan)
    not_received = [
        ExcludedAp(ap_id, ExclusionReason.NOT_RECEIVED)
        for ap_id, value in sorted(scan.readings.items())
        if value <= 0
    ]

    dop = math.inf
    if len(qualified) >= env.dimension + 1:
        geometry = build_geometry(env, user, qualified)
        weights = _signal_weights(env, scan, qualified, policy) if policy.weighted else None
        dop = compute_dop(geometry, env.dimension, weights)

    classification = classify(len(qualified), dop, env.dimension, policy.good_dop_max)
    LOGGER.debug(
        "Assessed scan at t=%s: %d visible, %d qualified, dop=%s (%s)",
        scan.timestamp,
        len(visible),
        len(qualified),
        dop,
        classification.value,
    )
    return DopAssessment(
        visible_count=len(visible),
        qualified_count=len(qualified),
        dop=dop,
        classification=classification,
        excluded_aps=tuple(not_received + excluded),
        qualified_aps=tuple(qualified),
        weighted=policy.weighted,
    )


def insufficient(visible_count: int = 0, qualified_count: int = 0) -> DopAssessment:
    """Assessment for a fix that could not be computed."""
    return DopAssessment(
        visible_count=visible_count,
        qualified_count=qualified_count,
        dop=math.inf,
        classification=Classification.INSUFFICIENT,
    )


def needs_alert(assessment: DopAssessment, alert_dop: float | None) -> bool:
    """True when the user should be told the accuracy is not sufficient."""
    if alert_dop is None:
        return False
    return not assessment.is_finite or assessment.dop > alert_dop


def _dimension_rows(rows: np.ndarray, dimension: int) -> tuple[np.ndarray, np.ndarray] | None:
    if dimension == 3:
        return rows, np.arange(rows.shape[0])
    planar = rows[:, :2]
    norms = np.linalg.norm(planar, axis=1)
    kept = np.flatnonzero(norms > COINCIDENCE_TOLERANCE)
    if kept.size == 0:
        return None
    return planar[kept] / norms[kept, None], kept


def _signal_weights(
    env: Environment, scan: RssScan, qualified: Sequence[str], policy: QualifierPolicy
) -> list[float]:
    assert policy.model is not None
    weights = []
    for ap_id in qualified:
        c = range_sensitivity(policy.model, env.ap(ap_id), env.receiver, scan.readings[ap_id])
        weights.append(1.0 / (c * c))
    return weights
