"""Taylor-linearised least-squares trilateration.

Each scan is turned into ranges through a propagation model, then the position
is refined with damped Gauss-Newton steps on the linear system dd = J dX, where
J holds the partial derivatives of the predicted ranges d_hat_i = |AP_i - X|.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .const import (
    COINCIDENCE_TOLERANCE,
    DEFAULT_MAX_HALVINGS,
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_STEP_TOLERANCE,
    RESTART_RESIDUAL,
)
from .dop import (
    DopAssessment,
    QualifierPolicy,
    assess,
    build_geometry,
    classify,
    insufficient,
    is_singular,
    needs_alert,
    qualify_aps,
    visible_aps,
)
from .errors import DegenerateRange, InsufficientObservations, SingularGeometry, ValidationError
from .propagation import PropagationModel, invert_distance
from .radio import Environment, RssScan, Vector3, as_vector

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    """Iteration schedule and model selection for the solver.

    ``initial_guess`` of None starts from the centroid of the qualified APs.
    """

    model: PropagationModel = field(default_factory=PropagationModel.friis)
    dimension: int = 3
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    step_tolerance: float = DEFAULT_STEP_TOLERANCE
    initial_guess: Vector3 | None = None
    policy: QualifierPolicy = field(default_factory=QualifierPolicy)
    alert_dop: float | None = None

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValidationError("max_iterations", "must be at least 1")
        if not self.step_tolerance > 0:
            raise ValidationError("step_tolerance", "must be positive")
        if self.dimension not in (2, 3):
            raise ValidationError("dimension", f"must be 2 or 3, got {self.dimension!r}")
        if self.initial_guess is not None:
            object.__setattr__(self, "initial_guess", as_vector(self.initial_guess, "initial_guess"))


@dataclass(frozen=True)
class PositionFix:
    """Estimated position with its solver diagnostics and DOP assessment."""

    timestamp: float
    position: Vector3
    residual_norm: float
    iterations: int
    converged: bool
    assessment: DopAssessment
    truth: Vector3 | None = None

    @property
    def error(self) -> float | None:
        if self.truth is None:
            return None
        return math.dist(self.position, self.truth)


def initial_position(env: Environment, ap_ids: Sequence[str] = ()) -> Vector3:
    """Centroid of the given APs, or of every AP when none are given."""
    positions = env.positions(list(ap_ids) or env.ap_ids)
    return as_vector(positions.mean(axis=0))


def ranges_from_scan(
    env: Environment, scan: RssScan, model: PropagationModel
) -> list[tuple[str, float]]:
    """One range per qualified AP, in AP id order."""
    qualified, _ = qualify_aps(env, visible_aps(env, scan), scan)
    if not qualified:
        raise InsufficientObservations(f"no access point qualifies in scan at t={scan.timestamp}")
    return [
        (ap_id, invert_distance(model, env.ap(ap_id), env.receiver, scan.readings[ap_id]))
        for ap_id in qualified
    ]


def range_jacobian(env: Environment, point: Sequence[float], aps: Sequence[str]) -> np.ndarray:
    """Partial derivatives of |AP_i - X| with respect to X, one row per AP."""
    return -build_geometry(env, point, aps).rows


@dataclass(frozen=True)
class Refinement:
    """Outcome of one damped Gauss-Newton run from a single start.

    ``history`` holds the sum of squared range residuals at the start and after
    every accepted step.
    """

    estimate: np.ndarray
    ssr: float
    iterations: int
    converged: bool
    history: tuple[float, ...]


def refine(
    anchors: np.ndarray,
    measured: np.ndarray,
    start: Sequence[float],
    cfg: SolverConfig,
) -> Refinement:
    """Damped Gauss-Newton from ``start`` until the step drops below tolerance."""
    dim = cfg.dimension
    estimate = np.array(start, dtype=float)
    ssr = _sum_squared_residuals(anchors, measured, estimate)
    history = [ssr]
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iterations + 1):
        jacobian, residuals = _linearize(anchors, measured, estimate)
        reduced = jacobian[:, :dim]
        normal = reduced.T @ reduced
        if reduced.shape[0] < dim or is_singular(normal):
            raise SingularGeometry("normal matrix is singular")
        step = np.zeros(3)
        step[:dim] = np.linalg.solve(normal, reduced.T @ residuals)

        if np.linalg.norm(step) < cfg.step_tolerance:
            estimate = estimate + step
            ssr = _sum_squared_residuals(anchors, measured, estimate)
            history.append(ssr)
            converged = True
            break

        accepted = _damped_step(anchors, measured, estimate, step, ssr)
        if accepted is None:
            LOGGER.debug("No damped step reduces the residual at iteration %d", iterations)
            break
        estimate, ssr, taken = accepted
        history.append(ssr)
        if np.linalg.norm(taken) < cfg.step_tolerance:
            converged = True
            break
    return Refinement(estimate, ssr, iterations, converged, tuple(history))


def restart_points(anchors: np.ndarray, estimate: np.ndarray, dimension: int) -> list[np.ndarray]:
    """Alternative starts for a fit that stalled with a non-zero residual.

    A layout with a small height spread often has a second minimum mirrored
    through the mean AP height, so the stalled estimate is reflected there and
    also dropped to the lowest and highest AP heights.
    """
    points = [anchors.mean(axis=0)]
    if dimension == 3:
        heights = anchors[:, 2]
        for z in (2.0 * heights.mean() - estimate[2], heights.min(), heights.max()):
            points.append(np.array([estimate[0], estimate[1], z]))
    return points


def solve(env: Environment, scan: RssScan, cfg: SolverConfig) -> PositionFix:
    """Estimate the position for one scan."""
    observations = ranges_from_scan(env, scan, cfg.model)
    dim = cfg.dimension
    if len(observations) < dim + 1:
        raise InsufficientObservations(
            f"{len(observations)} qualified access points, {dim + 1} needed in {dim}-D"
        )

    ap_ids = [ap_id for ap_id, _ in observations]
    anchors = env.positions(ap_ids)
    measured = np.array([distance for _, distance in observations])
    start = cfg.initial_guess if cfg.initial_guess is not None else initial_position(env, ap_ids)
    try:
        best = refine(anchors, measured, start, cfg)
    except SingularGeometry as err:
        raise SingularGeometry(f"{err} for scan at t={scan.timestamp}") from err

    if math.sqrt(best.ssr) > RESTART_RESIDUAL:
        for point in restart_points(anchors, best.estimate, dim):
            if np.linalg.norm(point - np.asarray(start)) < cfg.step_tolerance:
                continue
            try:
                attempt = refine(anchors, measured, point, cfg)
            except SingularGeometry:
                continue
            if attempt.ssr < best.ssr:
                LOGGER.debug("Restart from %s lowered the residual to %.3g", point, math.sqrt(attempt.ssr))
                best = attempt

    position = as_vector(best.estimate)
    if env.dimension != dim:
        env = replace(env, dimension=dim)
    try:
        assessment = assess(env, scan, position, cfg.policy)
    except DegenerateRange:
        assessment = insufficient()
    if not best.converged:
        LOGGER.info(
            "Solver did not converge for scan at t=%s after %d iterations", scan.timestamp, best.iterations
        )
    return PositionFix(
        timestamp=scan.timestamp,
        position=position,
        residual_norm=math.sqrt(best.ssr),
        iterations=best.iterations,
        converged=best.converged,
        assessment=assessment,
        truth=scan.truth,
    )


def solve_trajectory(
    env: Environment,
    scans: Iterable[RssScan],
    cfg: SolverConfig,
    *,
    warm_start: bool = True,
) -> list[PositionFix]:
    """Solve a time-ordered sequence of scans, warm-starting from the previous fix."""
    fixes: list[PositionFix] = []
    previous: PositionFix | None = None
    for scan in scans:
        scan_cfg = cfg
        if warm_start and previous is not None:
            scan_cfg = replace(cfg, initial_guess=previous.position)
        fix = solve_or_fallback(env, scan, scan_cfg, previous)
        if needs_alert(fix.assessment, cfg.alert_dop):
            LOGGER.warning(
                "Position accuracy insufficient at t=%s: dop=%s (%s)",
                fix.timestamp,
                fix.assessment.dop,
                fix.assessment.classification.value,
            )
        fixes.append(fix)
        previous = fix
    return fixes


def solve_or_fallback(
    env: Environment, scan: RssScan, cfg: SolverConfig, previous: PositionFix | None = None
) -> PositionFix:
    """Like ``solve`` but embeds precondition failures in a non-converged fix."""
    try:
        return solve(env, scan, cfg)
    except (InsufficientObservations, SingularGeometry) as err:
        LOGGER.info("Scan at t=%s not solvable: %s", scan.timestamp, err)
    position = previous.position if previous is not None else initial_position(env)
    visible = visible_aps(env, scan)
    qualified, _ = qualify_aps(env, visible, scan)
    assessment = DopAssessment(
        visible_count=len(visible),
        qualified_count=len(qualified),
        dop=math.inf,
        classification=classify(len(qualified), math.inf, cfg.dimension, cfg.policy.good_dop_max),
        qualified_aps=tuple(qualified),
    )
    return PositionFix(
        timestamp=scan.timestamp,
        position=position,
        residual_norm=math.inf,
        iterations=0,
        converged=False,
        assessment=assessment,
        truth=scan.truth,
    )


def _linearize(
    anchors: np.ndarray, measured: np.ndarray, estimate: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    deltas = estimate - anchors
    predicted = np.linalg.norm(deltas, axis=1)
    # rows whose AP coincides with the estimate have no direction this iteration
    usable = predicted > COINCIDENCE_TOLERANCE
    jacobian = deltas[usable] / predicted[usable, None]
    residuals = measured[usable] - predicted[usable]
    return jacobian, residuals


def _sum_squared_residuals(anchors: np.ndarray, measured: np.ndarray, estimate: np.ndarray) -> float:
    predicted = np.linalg.norm(estimate - anchors, axis=1)
    return float(np.sum((measured - predicted) ** 2))


def _damped_step(
    anchors: np.ndarray,
    measured: np.ndarray,
    estimate: np.ndarray,
    step: np.ndarray,
    current_ssr: float,
) -> tuple[np.ndarray, float, np.ndarray] | None:
    best: tuple[np.ndarray, float, np.ndarray] | None = None
    scale = 1.0
    for _ in range(DEFAULT_MAX_HALVINGS + 1):
        taken = step * scale
        candidate = estimate + taken
        ssr = _sum_squared_residuals(anchors, measured, candidate)
        if ssr <= current_ssr and (best is None or ssr < best[1]):
            best = (candidate, ssr, taken)
            if scale == 1.0:
                break
        scale /= 2.0
    return best
