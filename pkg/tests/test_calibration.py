import json
import math

import numpy as np
import pytest

from ovrv.calibration import (
    TABLE_HEADER,
    CalibrationProblem,
    calibrate,
    evaluate,
    initial_points,
    objective,
    rmse_velocity,
    synthesize,
)
from ovrv.errors import CalibrationError, DomainError, FormatError
from ovrv.model import ModelParams
from ovrv.profiles import builtin, constant
from ovrv.trajectory import Trajectory

HIDDEN = ModelParams(k1=0.08, k2=0.44, tau_e=0.52, eta=8.3)


@pytest.fixture(scope="module")
def lead_f():
    return builtin("F", 0.1, cycles=7, duration=400.0)


@pytest.fixture(scope="module")
def clean(lead_f):
    return synthesize(HIDDEN, lead_f)


def euler_rmse_oracle(p, traj, n):
    s, v = traj.space_gap[0], traj.v_follow[0]
    sq = (v - traj.v_follow[0]) ** 2
    for i in range(n - 1):
        a = p.k1 * (s - p.eta - p.tau_e * v) + p.k2 * (traj.v_lead[i] - v)
        s, v = s + 0.1 * (traj.v_lead[i] - v), v + 0.1 * a
        sq += (v - traj.v_follow[i + 1]) ** 2
    return math.sqrt(sq / n)


def test_rmse_examples():
    assert rmse_velocity([1.0, 2.0], [1.0, 2.0]) == 0.0
    sim = np.linspace(10, 20, 50)
    assert rmse_velocity(sim, sim + 0.1) == pytest.approx(0.1, rel=1e-12)
    assert rmse_velocity([20, 20, 20], [20, 20.3, 19.7]) == pytest.approx(0.2449, abs=1e-4)
    with pytest.raises(FormatError):
        rmse_velocity([1, 2], [1, 2, 3])


def test_objective_self_consistent(clean):
    problem = CalibrationProblem([clean], n_starts=1)
    assert objective(HIDDEN, problem) <= 1e-12
    assert objective(HIDDEN.replace(k2=HIDDEN.k2 * 1.1), problem) > 0


def test_objective_cross_setting(lead_f, min_params, max_params):
    traj = synthesize(max_params, lead_f)
    problem = CalibrationProblem([traj], n_starts=1)
    value = objective(min_params, problem)
    assert value > 0.3
    assert value == pytest.approx(euler_rmse_oracle(min_params, traj, 2000), rel=1e-12)
    # frozen from the plain-Python oracle
    assert value == pytest.approx(0.7934223684658948, rel=1e-9)


def test_objective_pools_by_sample_count(lead_f, min_params, max_params):
    a = synthesize(max_params, lead_f)
    b = synthesize(max_params, builtin("D", 0.1, 2))
    both = CalibrationProblem([a, b], n_starts=1)
    na, nb = both.n_train(a), both.n_train(b)
    expected = math.sqrt((euler_rmse_oracle(min_params, a, na) ** 2 * na
                          + euler_rmse_oracle(min_params, b, nb) ** 2 * nb) / (na + nb))
    assert objective(min_params, both) == pytest.approx(expected, rel=1e-12)
    swapped = CalibrationProblem([b, a], n_starts=1)
    assert objective(min_params, swapped) == pytest.approx(objective(min_params, both), rel=1e-14)


def test_problem_validation(clean):
    with pytest.raises(DomainError):
        CalibrationProblem([clean], bounds={"k1": (-1.0, 1.0)})
    with pytest.raises(DomainError):
        CalibrationProblem([clean], n_starts=0)
    with pytest.raises(DomainError):
        CalibrationProblem([clean], split=0.0)
    with pytest.raises(DomainError):
        CalibrationProblem([])
    with pytest.raises(FormatError):
        CalibrationProblem([clean], dt=0.2)
    with pytest.raises(DomainError):
        CalibrationProblem.from_config({"bogus": 1}, [clean])


def test_initial_points_uniform_in_bounds(clean):
    problem = CalibrationProblem([clean], n_starts=500, seed=4)
    pts = initial_points(problem)
    assert np.all(pts >= problem.lower) and np.all(pts <= problem.upper)
    assert np.array_equal(pts, initial_points(problem))


def test_start_at_truth_stays_there(clean):
    problem = CalibrationProblem([clean], n_starts=1)
    result = calibrate(problem, starts=[HIDDEN])
    assert result.best_params == HIDDEN
    assert result.best_rmse_velocity <= 1e-12


def test_self_recovery_noise_free(clean):
    result = calibrate(CalibrationProblem([clean], n_starts=20, seed=1))
    for name, value in HIDDEN.to_dict().items():
        assert getattr(result.best_params, name) == pytest.approx(value, rel=1e-3)
    assert result.best_rmse_velocity < 1e-3


def test_result_invariants(clean):
    result = calibrate(CalibrationProblem([clean], n_starts=8, seed=2))
    assert result.best_rmse_velocity == min(r.rmse for r in result.per_start if r.converged)
    assert np.all(result.best_params.as_array() >= 0)
    for rec in result.per_start:
        trace = np.array(rec.trace)
        assert np.all(np.diff(trace) <= 0)
        assert np.all(rec.final.as_array() >= 0)


def test_more_starts_never_worse(clean):
    few = calibrate(CalibrationProblem([clean], n_starts=3, seed=7))
    more = calibrate(CalibrationProblem([clean], n_starts=10, seed=7))
    assert more.best_rmse_velocity <= few.best_rmse_velocity


def test_deterministic(clean):
    problem = CalibrationProblem([clean], n_starts=5, seed=9)
    a, b = calibrate(problem), calibrate(problem)
    assert a.to_json() == b.to_json()
    assert a.errors.to_csv() == b.errors.to_csv()


def test_tie_break_lowest_index(clean):
    problem = CalibrationProblem([clean], n_starts=2)
    result = calibrate(problem, starts=[HIDDEN, HIDDEN])
    assert result.best_index == 0


def test_all_failed_raises(clean):
    problem = CalibrationProblem([clean], n_starts=1, bounds={"k1": (50.0, 60.0)})
    with pytest.raises(CalibrationError) as info:
        calibrate(problem)
    assert len(info.value.diagnostics) == 1


def test_evaluate_exact_params(clean):
    table = evaluate(HIDDEN, CalibrationProblem([clean], n_starts=1))
    s = table.summary
    assert s.velocity_train == s.velocity_test == s.gap_train == s.gap_test == 0.0


def test_evaluate_constant_gap_offset(clean):
    # measurements carry a +1 m gap bias after the initial sample; the simulation is exact
    gap = clean.space_gap.copy()
    gap[1:] += 1.0
    biased = Trajectory(clean.t, clean.v_lead, clean.v_follow, gap)
    table = evaluate(HIDDEN, CalibrationProblem([biased], n_starts=1, split=0.5))
    n = len(clean)
    n_tr = n // 2
    assert table.summary.gap_test == pytest.approx(1.0, rel=1e-12)
    assert table.summary.gap_train == pytest.approx(math.sqrt((n_tr - 1) / n_tr), rel=1e-12)
    assert table.summary.velocity_train == 0.0


def test_evaluate_stationary_train_test_agree():
    lead = constant(22.0, 400.0)
    traj = synthesize(HIDDEN, lead, noise_std=0.05, gap_noise_std=0.3, seed=21)
    table = evaluate(HIDDEN, CalibrationProblem([traj], n_starts=1))
    s = table.summary
    assert abs(s.velocity_train - s.velocity_test) / s.velocity_test < 0.10
    assert abs(s.gap_train - s.gap_test) / s.gap_test < 0.10


def test_error_table_csv(clean):
    table = evaluate(HIDDEN, CalibrationProblem([clean], n_starts=1, following_setting="minimum"))
    lines = table.to_csv().strip().splitlines()
    assert tuple(lines[0].split(",")) == TABLE_HEADER
    assert lines[-1].startswith("Summary,minimum,--,--,--,--,")
    row = lines[1].split(",")
    assert float(row[2]) == pytest.approx(400.0)
    assert float(row[4]) == pytest.approx(clean.v_follow.max() * 3.6)


def test_split_one_has_no_test_portion(clean):
    table = evaluate(HIDDEN, CalibrationProblem([clean], n_starts=1, split=1.0))
    assert table.summary.velocity_test is None


def test_result_json(clean):
    result = calibrate(CalibrationProblem([clean], n_starts=2, seed=3))
    doc = json.loads(result.to_json())
    assert set(doc["best_params"]) == {"k1", "k2", "tau_e", "eta"}
    assert len(doc["per_start"]) == 2
    assert doc["metadata"]["test_error_note"]
