from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ovrv.errors import DomainError
from ovrv.model import mph_to_mps
from ovrv.profiles import (
    BUILTIN_NAMES,
    ProfileSpec,
    builtin,
    builtin_spec,
    constant,
    generate,
    sinusoid,
    step_spec,
)
from ovrv.series import TimeSeries


def held_runs(series):
    """(velocity, duration) of each constant run in a piecewise-constant series."""
    v = series.values
    change = np.nonzero(np.diff(v))[0] + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change, [len(v) - 1]])
    return [(v[a], (b - a) * series.dt) for a, b in zip(starts, ends)]


def test_profile_a_schedule():
    spec = builtin_spec("A")
    mph = [round(v / 0.44704) for v, _ in spec.segments]
    assert mph == [5, 10, 15, 20, 25, 30, 25, 20, 15, 10, 5]
    assert all(hold == 60 for _, hold in spec.segments)
    series = builtin("A", 0.1, 1)
    assert series.duration == pytest.approx(660.0)


def test_profile_d_alternates():
    spec = builtin_spec("D", cycles=3)
    assert [round(v / 0.44704) for v, _ in spec.segments] == [30, 20] * 3
    assert {hold for _, hold in spec.segments} == {30.0}


def test_profile_g_two_cycles():
    series = builtin("G", 0.1, 2)
    runs = held_runs(series)
    assert [round(v / 0.44704) for v, _ in runs] == [70, 65, 70, 65]
    assert [d for _, d in runs] == pytest.approx([30.0] * 4)


def test_profile_i_floor():
    series = builtin("I", 0.1, 1)
    assert series.values.min() == mph_to_mps(30)
    assert series.values.min() == pytest.approx(13.4112, abs=1e-12)
    assert series.values.max() == mph_to_mps(50)
    dips = [round(v / 0.44704) for v, d in held_runs(series) if d == pytest.approx(5.0)]
    assert dips == [45, 40, 35, 30]


def test_constant_sample_count():
    series = constant(12.0, 37.0, 0.1)
    assert len(series) == 371
    assert np.all(series.values == 12.0)


def test_unknown_name():
    with pytest.raises(DomainError, match="valid names"):
        builtin("Z")


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_builtin_uniform_non_negative(name):
    series = builtin(name, 0.1, 2)
    assert np.all(series.values >= 0)
    assert np.allclose(np.diff(series.t), 0.1)


segment = st.tuples(st.integers(0, 40), st.integers(1, 50))


@given(st.lists(segment, min_size=1, max_size=8))
def test_instantaneous_holds_match_spec(segments):
    spec = ProfileSpec("step_schedule", [(float(v), float(h)) for v, h in segments], dt=0.5)
    series = generate(spec)
    runs = held_runs(series)
    # merge equal neighbours in the spec the same way the series merges them
    merged = []
    for v, h in spec.segments:
        if merged and merged[-1][0] == v:
            merged[-1] = (v, merged[-1][1] + h)
        else:
            merged.append((v, h))
    assert Counter(runs) == Counter(merged)


def test_ramped_transitions():
    spec = ProfileSpec("step_schedule", [(10.0, 5.0), (20.0, 5.0)], dt=0.1, ramp_accel=2.0)
    series = generate(spec)
    assert series.duration == pytest.approx(15.0)
    slope = np.diff(series.values) / 0.1
    assert slope.max() == pytest.approx(2.0)
    ramp = series.values[(series.t > 5.05) & (series.t < 9.95)]
    assert np.all((ramp > 10) & (ramp < 20))


def test_invalid_specs():
    with pytest.raises(DomainError):
        ProfileSpec("step_schedule", [(-1.0, 10.0)])
    with pytest.raises(DomainError):
        ProfileSpec("step_schedule", [(1.0, 0.0)])
    with pytest.raises(DomainError):
        ProfileSpec("warp", [(1.0, 1.0)])


def test_sinusoid_profile():
    series = sinusoid(20.0, 1.0, 0.204, 20.0, 100.0, 0.1)
    assert np.all(series.values[series.t <= 20.0] == 20.0)
    after = series.t > 20
    assert series.values[after] == pytest.approx(20 + np.sin(0.204 * (series.t[after] - 20)))


def test_step_spec_defaults():
    spec = step_spec()
    assert spec.segments == ((20.0, 20.0), (15.0, 60.0), (20.0, 120.0))


@pytest.mark.parametrize("name", ["A", "F", "I", "step"])
def test_csv_round_trip_bit_exact(name):
    series = builtin(name, 0.1, 1)
    back = TimeSeries.from_csv(series.to_csv())
    assert back.dt == series.dt
    assert np.array_equal(back.values, series.values)
    assert np.array_equal(back.t, series.t)


def test_spec_json_round_trip():
    spec = builtin_spec("I", cycles=2)
    assert ProfileSpec.from_json(spec.to_json()) == spec


def test_duration_truncate_and_pad():
    assert builtin("F", 0.1, 7, duration=400).duration == pytest.approx(400)
    padded = builtin("F", 0.1, 1, duration=100)
    assert len(padded) == 1001
    assert padded.values[-1] == padded.values[600]
