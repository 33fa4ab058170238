import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ovrv.errors import DomainError
from ovrv.model import (
    MPS_PER_MPH,
    ModelParams,
    VehicleState,
    accel,
    check_rdc,
    equilibrium_gap,
    mph_to_mps,
    time_gap_at,
)

from strategies import params as param_sets


def test_accel_at_equilibrium(min_params):
    assert accel(min_params, 18.6605, 20.0, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_accel_jam_equilibrium():
    assert accel(ModelParams(0.5, 0.5, 0.75, 8.0), 8.0, 0.0, 0.0) == 0.0


def test_accel_hand_evaluated(min_params):
    # 0.0782 * (20 - 8.3365 - 0.5162 * 20) + 0.4445 * 1
    assert accel(min_params, 20.0, 20.0, 1.0) == pytest.approx(0.5492489, abs=1e-9)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_accel_rejects_non_finite(min_params, bad):
    with pytest.raises(DomainError):
        accel(min_params, bad, 20.0, 0.0)
    with pytest.raises(DomainError):
        accel(min_params, 20.0, 20.0, bad)


def test_accel_vectorised(min_params):
    s = np.array([18.6605, 20.0])
    out = accel(min_params, s, np.array([20.0, 20.0]), np.array([0.0, 1.0]))
    assert out == pytest.approx([0.0, 0.5492489], abs=1e-9)


def test_equilibrium_gap(min_params, max_params):
    assert equilibrium_gap(min_params, 0.0) == min_params.eta
    assert equilibrium_gap(min_params, 20.0) == pytest.approx(18.6605, abs=1e-12)
    assert equilibrium_gap(max_params, 29.0576) == pytest.approx(56.62, abs=0.01)
    with pytest.raises(DomainError):
        equilibrium_gap(min_params, -1.0)


def test_time_gap(min_params):
    # 8.3365 / 20 + 0.5162
    assert time_gap_at(min_params, 20.0) == pytest.approx(0.933025, abs=1e-12)
    assert time_gap_at(ModelParams(0.1, 0.1, 1.3, 0.0), 17.0) == 1.3
    v = np.linspace(1, 1000, 200)
    tau = time_gap_at(min_params, v)
    assert np.all(np.diff(tau) < 0)
    assert np.all(tau > min_params.tau_e)
    for bad in (0.0, -3.0):
        with pytest.raises(DomainError):
            time_gap_at(min_params, bad)


def test_check_rdc(min_params):
    assert check_rdc(min_params).passed
    assert check_rdc(ModelParams(0, 0, 0, 0)).passed
    report = check_rdc((-0.1, 0.5, 1.0, 5.0))
    assert not report.passed
    assert "f_s >= 0" in report.failures


def test_construction_rejects_invalid():
    with pytest.raises(DomainError):
        ModelParams(-0.1, 0.5, 1.0, 5.0)
    with pytest.raises(DomainError):
        ModelParams(0.1, 0.5, math.nan, 5.0)


def test_derived_accessors(min_params):
    assert min_params.f_s == min_params.k1
    assert min_params.f_v == -min_params.k1 * min_params.tau_e
    assert min_params.f_dv == min_params.k2
    assert min_params.alpha == -min_params.f_v
    assert min_params.beta == min_params.k2


def test_json_round_trip(min_params, tmp_path):
    text = min_params.to_json()
    assert set(json.loads(text)) == {"k1", "k2", "tau_e", "eta"}
    assert ModelParams.from_json(text) == min_params
    path = tmp_path / "p.json"
    path.write_text(text)
    assert ModelParams.load(path) == min_params


def test_mph_conversion():
    assert mph_to_mps(1.0) == MPS_PER_MPH
    assert mph_to_mps(30.0) == pytest.approx(13.4112, abs=1e-12)


def test_vehicle_state_diagnostics():
    assert VehicleState(5.0, 3.0).diagnostics == []
    assert VehicleState(-1.0, -2.0).diagnostics == ["negative_gap", "negative_velocity"]


@given(param_sets(), st.floats(min_value=0, max_value=60))
def test_equilibrium_is_exact_fixed_point(p, v):
    assert accel(p, equilibrium_gap(p, v), v, 0.0) == 0.0


@given(param_sets(), st.floats(min_value=0.1, max_value=60))
def test_time_gap_consistent_with_spacing(p, v):
    assert time_gap_at(p, v) * v == pytest.approx(equilibrium_gap(p, v), rel=1e-12)


@given(param_sets(), st.floats(0, 100), st.floats(0, 40), st.floats(-10, 10))
def test_finite_difference_partials(p, s, v, dv):
    h = 1.0
    # accel is affine, so central differences are exact up to rounding
    fs = (accel(p, s + h, v, dv) - accel(p, s - h, v, dv)) / (2 * h)
    fv = (accel(p, s, v + h, dv) - accel(p, s, v - h, dv)) / (2 * h)
    fdv = (accel(p, s, v, dv + h) - accel(p, s, v, dv - h)) / (2 * h)
    assert fs == pytest.approx(p.f_s, rel=1e-9, abs=1e-12)
    assert fv == pytest.approx(p.f_v, rel=1e-9, abs=1e-12)
    assert fdv == pytest.approx(p.f_dv, rel=1e-9, abs=1e-12)


@given(param_sets())
def test_rdc_holds_for_valid_params(p):
    assert check_rdc(p).passed
