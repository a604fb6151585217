"""Tests for synthetic experiments and their summaries."""

from __future__ import annotations

import math

import numpy as np
import pytest

from helpers import make_env
from wifidop.dop import QualifierPolicy
from wifidop.errors import DegenerateRange, ValidationError
from wifidop.files import load_environment, load_trajectory
from wifidop.propagation import PropagationModel, forward_rss, invert_distance, model_from_name
from wifidop.radio import mw_to_dbm
from wifidop.sim import (
    NoiseModel,
    SampleRecord,
    Trajectory,
    dop_cartography,
    run_experiment,
    sample_rng,
    sample_trajectory,
    summarize,
    synthesize_scan,
)
from wifidop.solver import SolverConfig

FRIIS = PropagationModel.friis()
BOX = [(0, 0, 0.5), (20, 0, 2.5), (20, 20, 0.5), (0, 20, 2.5), (10, 1, 3.0), (19, 10, 1.0)]


def _record(dop: float, error: float, qualified: int = 5, time: float = 0.0) -> SampleRecord:
    return SampleRecord(
        time=time,
        truth=(0.0, 0.0, 0.0),
        estimate=(error, 0.0, 0.0),
        error_m=error,
        dop=dop,
        visible=qualified,
        qualified=qualified,
        classification="good",
    )


def test_sample_trajectory_includes_both_endpoints() -> None:
    samples = sample_trajectory(Trajectory(waypoints=[(0, 0, 0), (3, 0, 0)]))
    assert [time for time, _ in samples] == [0.0, 1.0, 2.0, 3.0]
    assert samples[-1][1] == (3.0, 0.0, 0.0)

    partial = sample_trajectory(Trajectory(waypoints=[(0, 0, 0), (2.5, 0, 0)]))
    assert [time for time, _ in partial] == [0.0, 1.0, 2.0, 2.5]


def test_sample_trajectory_follows_segments() -> None:
    samples = sample_trajectory(Trajectory(waypoints=[(0, 0, 0), (2, 0, 0), (2, 2, 0)], speed=2.0, sample_period=0.5))
    positions = dict(samples)
    assert positions[1.5] == pytest.approx((2.0, 1.0, 0.0))
    assert positions[2.0] == (2.0, 2.0, 0.0)


def test_single_waypoint_is_one_sample() -> None:
    assert sample_trajectory(Trajectory(waypoints=[(1, 2, 3)])) == [(0.0, (1.0, 2.0, 3.0))]


def test_trajectory_and_noise_validation() -> None:
    with pytest.raises(ValidationError):
        Trajectory(waypoints=[])
    with pytest.raises(ValidationError):
        Trajectory(waypoints=[(0, 0, 0)], speed=0.0)
    with pytest.raises(ValidationError):
        NoiseModel(sigma_db=-1.0)


def test_noiseless_scan_matches_forward_model() -> None:
    env = make_env(BOX)
    truth = (5.0, 6.0, 1.0)
    scan = synthesize_scan(env, truth, NoiseModel(sigma_db=0.0), FRIIS, timestamp=3.0)
    assert scan.timestamp == 3.0
    assert scan.truth == truth
    for ap in env.aps:
        assert scan.readings[ap.id] == pytest.approx(forward_rss(FRIIS, ap, env.receiver, math.dist(ap.position, truth)))


def test_noiseless_snap_scan_inverts_to_true_ranges() -> None:
    env = make_env(BOX)
    truth = (5.0, 6.0, 1.0)
    snap = PropagationModel.snap_wps()
    scan = synthesize_scan(env, truth, NoiseModel(sigma_db=0.0), snap)
    for ap in env.aps:
        recovered = invert_distance(snap, ap, env.receiver, scan.readings[ap.id])
        assert recovered == pytest.approx(math.dist(ap.position, truth), rel=1e-9)


def test_shadowing_is_reproducible_per_sample() -> None:
    env = make_env(BOX)
    noise = NoiseModel(sigma_db=2.0, seed=9)
    first = synthesize_scan(env, (5, 5, 1), noise, FRIIS, rng=sample_rng(9, 4))
    again = synthesize_scan(env, (5, 5, 1), noise, FRIIS, rng=sample_rng(9, 4))
    other = synthesize_scan(env, (5, 5, 1), noise, FRIIS, rng=sample_rng(9, 5))
    assert first.readings == again.readings
    assert first.readings != other.readings


def test_shadowing_spread_matches_sigma() -> None:
    env = make_env([(0, 0, 0), (12, 5, 2)])
    truth = (4.0, 3.0, 1.0)
    expected = {ap.id: forward_rss(FRIIS, ap, env.receiver, math.dist(ap.position, truth)) for ap in env.aps}
    noise = NoiseModel(sigma_db=2.0, seed=31)
    draws = 10_000
    shadowing = {ap_id: [] for ap_id in expected}
    for index in range(draws):
        scan = synthesize_scan(env, truth, noise, FRIIS, rng=sample_rng(31, index))
        for ap_id, power in scan.readings.items():
            shadowing[ap_id].append(10.0 * math.log10(power / expected[ap_id]))
    for samples in shadowing.values():
        assert abs(np.std(samples, ddof=1) - 2.0) < 2 * 2.0 / math.sqrt(draws)
        assert abs(np.mean(samples)) < 4 * 2.0 / math.sqrt(draws)


def test_dropout_zeroes_weak_readings() -> None:
    env = make_env([(0, 0, 0), (100, 0, 0)])
    floor = forward_rss(FRIIS, env.aps[0], env.receiver, 50.0)
    scan = synthesize_scan(env, (1, 0, 0), NoiseModel(sigma_db=0.0, dropout_below=floor), FRIIS)
    assert scan.readings["ap-00"] > 0
    assert scan.readings["ap-01"] == 0.0


def test_truth_on_an_ap_is_degenerate() -> None:
    env = make_env(BOX)
    with pytest.raises(DegenerateRange):
        synthesize_scan(env, BOX[0], NoiseModel(), FRIIS)


def test_summarize_bins_and_infinite_samples() -> None:
    records = [
        _record(1.0, 0.5),
        _record(2.0, 1.5),
        _record(6.0, 2.0),
        _record(12.0, 4.0),
        _record(40.0, 9.0),
        _record(math.inf, 7.0, qualified=3),
        _record(math.inf, 5.0, qualified=3),
    ]
    report = summarize(records)
    assert [(b.low, b.high, b.count) for b in report.bins] == [
        (0.0, 5.0, 2),
        (5.0, 10.0, 1),
        (10.0, 15.0, 1),
        (15.0, math.inf, 1),
    ]
    assert report.bins[0].mean_error == pytest.approx(1.0)
    assert report.bins[0].max_error == 1.5
    assert report.infinite_count == 2
    assert report.infinite_mean_error == pytest.approx(6.0)
    assert report.spearman == pytest.approx(1.0)
    assert report.max_error == 9.0
    by_count = {summary.qualified: summary for summary in report.by_qualified_count}
    assert by_count[3].infinite_share == 1.0
    assert by_count[3].mean_dop == math.inf
    assert by_count[5].count == 5
    assert by_count[5].mean_dop == pytest.approx(61.0 / 5)


def test_summarize_completes_bin_edges() -> None:
    report = summarize([_record(3.0, 1.0)], bin_edges=(2.0, 4.0))
    assert [(b.low, b.high) for b in report.bins] == [(0.0, 2.0), (2.0, 4.0), (4.0, math.inf)]
    assert [b.count for b in report.bins] == [0, 1, 0]
    assert math.isnan(report.bins[0].mean_error)
    assert math.isnan(report.spearman)
    with pytest.raises(ValidationError):
        summarize([], bin_edges=(5.0, 1.0))


def test_spearman_is_nan_for_constant_input() -> None:
    report = summarize([_record(2.0, 1.0), _record(2.0, 2.0), _record(2.0, 3.0)])
    assert math.isnan(report.spearman)


def test_noiseless_experiment_tracks_the_walk() -> None:
    env = make_env(BOX)
    trajectory = Trajectory(waypoints=[(3, 3, 1), (17, 3, 1), (17, 17, 1)], sample_period=2.0)
    report = run_experiment(env, trajectory, NoiseModel(sigma_db=0.0), FRIIS, SolverConfig())
    assert len(report.samples) == 15
    assert report.max_error < 1e-4
    assert report.infinite_count == 0
    for sample in report.samples:
        assert sample.converged
        assert sample.qualified == 6
        assert sample.min_rss_dbm <= mw_to_dbm(1.0)

    at_truth = run_experiment(
        env, trajectory, NoiseModel(sigma_db=0.0), FRIIS, SolverConfig(), dop_at_truth=True
    )
    assert [s.dop for s in at_truth.samples] == pytest.approx([s.dop for s in report.samples], rel=1e-4)


def test_parallel_evaluation_matches_sequential() -> None:
    env = make_env(BOX)
    trajectory = Trajectory(waypoints=[(3, 3, 1), (17, 17, 2)], sample_period=0.5)
    noise = NoiseModel(sigma_db=2.0, seed=5)
    sequential = run_experiment(env, trajectory, noise, FRIIS, SolverConfig(), warm_start=False)
    parallel = run_experiment(env, trajectory, noise, FRIIS, SolverConfig(), warm_start=False, workers=4)
    assert sequential.samples == parallel.samples


def test_experiment_is_deterministic_for_a_seed() -> None:
    env = make_env(BOX)
    trajectory = Trajectory(waypoints=[(3, 3, 1), (17, 17, 2)])
    noise = NoiseModel(sigma_db=2.0, seed=42)
    first = run_experiment(env, trajectory, noise, FRIIS, SolverConfig())
    second = run_experiment(env, trajectory, noise, FRIIS, SolverConfig())
    assert first.samples == second.samples


def test_three_visible_aps_are_reported_as_infinite() -> None:
    reference = make_env([(0, 0, 0)])
    reach = forward_rss(FRIIS, reference.aps[0], reference.receiver, 12.0)
    env = make_env([(0, 0, 0), (6, 0, 3), (0, 6, 3), (30, 30, 1.5)], threshold=reach)
    trajectory = Trajectory(waypoints=[(1, 1, 1), (3, 3, 1)])
    report = run_experiment(env, trajectory, NoiseModel(sigma_db=0.5, seed=42), FRIIS, SolverConfig())
    assert report.infinite_count == len(report.samples) == 4
    assert all(bin_.count == 0 for bin_ in report.bins)
    assert all(math.isfinite(sample.error_m) for sample in report.samples)
    assert all(sample.classification == "insufficient" for sample in report.samples)
    assert [(s.qualified, s.infinite_share) for s in report.by_qualified_count] == [(3, 1.0)]


def test_dop_cartography_covers_the_bounds() -> None:
    env = make_env(BOX)
    points = dop_cartography(env, FRIIS, 1.0, step=5.0, bounds=(0.0, 0.0, 20.0, 10.0))
    assert len(points) == 15
    assert {(p.x, p.y) for p in points} >= {(0.0, 0.0), (20.0, 10.0)}
    assert all(p.qualified == 6 and math.isfinite(p.dop) for p in points)

    on_ap = dop_cartography(env, FRIIS, 0.5, step=20.0, bounds=(0.0, 0.0, 20.0, 0.0))
    assert [(p.x, p.y) for p in on_ap] == [(20.0, 0.0)]

    with pytest.raises(ValidationError):
        dop_cartography(env, FRIIS, 1.0, step=0.0)


def test_cartography_defaults_to_ap_footprint() -> None:
    env = make_env(BOX)
    points = dop_cartography(env, FRIIS, 1.5, step=10.0, policy=QualifierPolicy(good_dop_max=2.0))
    assert sorted({p.x for p in points}) == [0.0, 10.0, 20.0]
    assert sorted({p.y for p in points}) == [0.0, 10.0, 20.0]


@pytest.mark.slow
def test_dop_ranks_with_error_on_a_lab_walk(lab_path) -> None:
    env = load_environment(lab_path)
    # 108 m out of the building and back, one sample every 108/999 s
    waypoints = [(5.0, 6.0, 1.2), (55.0, 6.0, 1.2), (55.0, 14.0, 1.2), (5.0, 14.0, 1.2)]
    trajectory = Trajectory(waypoints=waypoints, sample_period=108.0 / 999)
    report = run_experiment(env, trajectory, NoiseModel(sigma_db=2.0, seed=42), FRIIS, SolverConfig())
    assert len(report.samples) == 1000
    assert report.infinite_count == 0
    assert report.spearman > 0.3

    populated = [bin_ for bin_ in report.bins if bin_.count > 0]
    assert sum(bin_.count >= 20 for bin_ in populated) >= 2
    inversions = [
        (lower, upper)
        for lower, upper in zip(populated, populated[1:])
        if upper.mean_error < lower.mean_error
    ]
    assert len(inversions) <= 1
    assert all(min(lower.count, upper.count) < 20 for lower, upper in inversions)


@pytest.mark.slow
@pytest.mark.parametrize("model", ["friis", "interlink", "snap-wps"])
def test_lab_walk_errors_stay_bounded(lab_path, walk_path, model: str) -> None:
    env = load_environment(lab_path)
    trajectory = load_trajectory(walk_path)
    selected = model_from_name(model)
    report = run_experiment(env, trajectory, NoiseModel(sigma_db=2.0, seed=42), selected, SolverConfig(model=selected))
    errors = np.array([sample.error_m for sample in report.samples])
    assert np.all(np.isfinite(errors))
    assert errors.max() < 50.0
