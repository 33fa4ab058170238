"""Fixed-step simulation of ACC followers and platoons.

Vehicle ``i`` follows vehicle ``i - 1`` (vehicle 1 follows the lead
profile).  No clamping is applied: negative gaps or velocities are kept and
reported as events so the trajectories stay faithful to the linear model.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DomainError, FormatError
from .model import ModelParams, equilibrium_gap
from .profiles import sinusoid
from .series import TimeSeries, check_uniform

INTEGRATORS = ("euler", "rk4")
DT_MATCH_RTOL = 1e-9


@njit(cache=True)
def _euler(k1, k2, tau_e, eta, v_lead, d, s0, v0, dt):
    n = v_lead.shape[0]
    s = np.empty(n)
    v = np.empty(n)
    a = np.empty(n)
    s[0] = s0
    v[0] = v0
    for i in range(n):
        dv = v_lead[i] - v[i]
        a[i] = k1 * (s[i] - (eta + tau_e * v[i])) + k2 * dv + d[i]
        if i + 1 < n:
            s[i + 1] = s[i] + dt * dv
            v[i + 1] = v[i] + dt * a[i]
    return s, v, a


@njit(cache=True)
def _rk4(k1, k2, tau_e, eta, v_lead, d, s0, v0, dt):
    n = v_lead.shape[0]
    s = np.empty(n)
    v = np.empty(n)
    a = np.empty(n)
    s[0] = s0
    v[0] = v0
    for i in range(n):
        a[i] = k1 * (s[i] - (eta + tau_e * v[i])) + k2 * (v_lead[i] - v[i]) + d[i]
        if i + 1 == n:
            break
        # leader velocity and disturbance linearly interpolated at the half step
        vl0, vl2 = v_lead[i], v_lead[i + 1]
        vl1 = 0.5 * (vl0 + vl2)
        d0, d2 = d[i], d[i + 1]
        d1 = 0.5 * (d0 + d2)
        si, vi = s[i], v[i]

        ks1 = vl0 - vi
        kv1 = k1 * (si - (eta + tau_e * vi)) + k2 * ks1 + d0
        s_b = si + 0.5 * dt * ks1
        v_b = vi + 0.5 * dt * kv1
        ks2 = vl1 - v_b
        kv2 = k1 * (s_b - (eta + tau_e * v_b)) + k2 * ks2 + d1
        s_c = si + 0.5 * dt * ks2
        v_c = vi + 0.5 * dt * kv2
        ks3 = vl1 - v_c
        kv3 = k1 * (s_c - (eta + tau_e * v_c)) + k2 * ks3 + d1
        s_d = si + dt * ks3
        v_d = vi + dt * kv3
        ks4 = vl2 - v_d
        kv4 = k1 * (s_d - (eta + tau_e * v_d)) + k2 * ks4 + d2

        s[i + 1] = si + dt / 6.0 * (ks1 + 2.0 * ks2 + 2.0 * ks3 + ks4)
        v[i + 1] = vi + dt / 6.0 * (kv1 + 2.0 * kv2 + 2.0 * kv3 + kv4)
    return s, v, a


_KERNELS = {"euler": _euler, "rk4": _rk4}


@dataclass(frozen=True)
class Event:
    vehicle: int
    kind: str  # "negative_gap" or "negative_velocity"
    t_first: float
    count: int

    def to_dict(self):
        return {"vehicle": self.vehicle, "kind": self.kind, "t_first": self.t_first, "count": self.count}


@dataclass(frozen=True, eq=False)
class FollowerTrajectory:
    t: np.ndarray
    s: np.ndarray
    v: np.ndarray
    a: np.ndarray
    events: list = field(default_factory=list)


def _lead_values(lead, dt):
    if isinstance(lead, TimeSeries):
        if not math.isclose(lead.dt, dt, rel_tol=DT_MATCH_RTOL):
            raise FormatError(f"lead series sampled at dt={lead.dt}, expected {dt}; resample upstream")
        values = lead.values
    else:
        values = np.asarray(lead, dtype=float)
    if values.ndim != 1 or len(values) == 0:
        raise FormatError("lead velocity series is empty")
    return np.ascontiguousarray(values, dtype=float)


def _find_events(vehicle, t, s, v):
    events = []
    for kind, series in (("negative_gap", s), ("negative_velocity", v)):
        bad = np.nonzero(series < 0)[0]
        if len(bad):
            events.append(Event(vehicle, kind, float(t[bad[0]]), int(len(bad))))
    return events


def simulate_follower(params: ModelParams, lead_velocity, s0, v0, dt=0.1, integrator="euler",
                      disturbance=None, vehicle=1, t=None) -> FollowerTrajectory:
    """Simulate one follower against a uniformly sampled leader velocity series.

    ``lead_velocity`` is a :class:`TimeSeries` at ``dt`` or a plain array
    assumed to be sampled at ``dt``.  ``disturbance`` is an optional
    acceleration offset series [m/s^2] of the same length.  Passing the
    sample times ``t`` checks them for uniform spacing at ``dt``.
    """
    if integrator not in _KERNELS:
        raise DomainError(f"integrator must be one of {INTEGRATORS}")
    if not (math.isfinite(s0) and math.isfinite(v0)):
        raise DomainError("initial state must be finite")
    if dt <= 0:
        raise DomainError("dt must be positive")
    vl = _lead_values(lead_velocity, dt)
    if t is not None:
        if len(t) != len(vl):
            raise FormatError("time stamps and lead velocity differ in length")
        check_uniform(t, dt)
    if disturbance is None:
        d = np.zeros_like(vl)
    else:
        d = np.ascontiguousarray(disturbance, dtype=float)
        if d.shape != vl.shape:
            raise FormatError("disturbance and lead series differ in length")
    s, v, a = _KERNELS[integrator](params.k1, params.k2, params.tau_e, params.eta, vl, d,
                                   float(s0), float(v0), float(dt))
    t = dt * np.arange(len(vl))
    return FollowerTrajectory(t, s, v, a, _find_events(vehicle, t, s, v))


@dataclass(frozen=True, eq=False)
class PlatoonScenario:
    """Lead profile plus an ordered list of followers.

    ``init`` is ``"equilibrium"`` or a list of ``(s, v)`` pairs, one per
    follower.  ``disturbance`` maps follower index (1-based) to an
    acceleration offset series.
    """

    lead_profile: TimeSeries
    follower_params: tuple
    dt: float = 0.1
    duration: float | None = None
    init: object = "equilibrium"
    disturbance: dict | None = None
    integrator: str = "euler"

    def __post_init__(self):
        object.__setattr__(self, "follower_params", tuple(self.follower_params))
        if self.dt <= 0:
            raise DomainError("dt must be positive")
        if not self.follower_params:
            raise DomainError("platoon needs at least one follower")
        if self.duration is not None and self.duration < self.dt:
            raise DomainError("duration must be at least dt")
        if self.init != "equilibrium" and len(self.init) != len(self.follower_params):
            raise DomainError("explicit init needs one (s, v) pair per follower")

    @classmethod
    def homogeneous(cls, params, n_followers, lead_profile, **kwargs):
        return cls(lead_profile, (params,) * int(n_followers), **kwargs)


@dataclass(frozen=True, eq=False)
class PlatoonResult:
    """Per-vehicle series, row 0 of ``v`` being the lead vehicle.

    ``s`` and ``a`` rows for the lead are NaN.  Metrics are computed over
    samples with ``t >= transient``.
    """

    t: np.ndarray
    s: np.ndarray
    v: np.ndarray
    a: np.ndarray
    events: list
    transient: float = 0.0

    @property
    def n_followers(self):
        return self.v.shape[0] - 1

    def _window(self):
        return self.t >= self.transient - 1e-9

    @property
    def peak_to_peak(self):
        """Peak-to-peak velocity per vehicle, lead first."""
        w = self._window()
        return np.ptp(self.v[:, w], axis=1)

    @property
    def amplification(self):
        """Peak-to-peak of each follower divided by that of its leader (NaN if leader is flat)."""
        ptp = self.peak_to_peak
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(ptp[:-1] > 0, ptp[1:] / ptp[:-1], np.nan)

    @property
    def min_velocity(self):
        w = self._window()
        return self.v[:, w].min(axis=1)

    def with_transient(self, transient):
        return PlatoonResult(self.t, self.s, self.v, self.a, self.events, transient)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "vehicle_index", "space_gap_m", "velocity_mps", "accel_mps2"])
        for k, t in enumerate(self.t):
            tr = repr(float(t))
            writer.writerow([tr, 0, "", repr(float(self.v[0, k])), ""])
            for i in range(1, self.v.shape[0]):
                writer.writerow([tr, i, repr(float(self.s[i, k])), repr(float(self.v[i, k])),
                                 repr(float(self.a[i, k]))])
        return buf.getvalue()

    def summary(self):
        ratios = self.amplification
        return {
            "n_followers": self.n_followers,
            "dt": float(self.t[1] - self.t[0]) if len(self.t) > 1 else None,
            "transient_s": self.transient,
            "peak_to_peak_mps": [float(x) for x in self.peak_to_peak],
            "amplification": [None if np.isnan(r) else float(r) for r in ratios],
            "min_velocity_mps": [float(x) for x in self.min_velocity],
            "events": [e.to_dict() for e in self.events],
        }

    def summary_json(self):
        return json.dumps(self.summary(), indent=2)


def simulate_platoon(scenario: PlatoonScenario, transient=0.0) -> PlatoonResult:
    lead = _lead_values(scenario.lead_profile, scenario.dt)
    if scenario.duration is not None:
        n = int(math.floor(scenario.duration / scenario.dt + 1e-9)) + 1
        if n > len(lead):
            raise FormatError("lead profile is shorter than the scenario duration")
        lead = lead[:n]
    n_veh = len(scenario.follower_params) + 1
    n = len(lead)
    s = np.full((n_veh, n), np.nan)
    v = np.empty((n_veh, n))
    a = np.full((n_veh, n), np.nan)
    v[0] = lead
    events = []
    for i, params in enumerate(scenario.follower_params, start=1):
        if scenario.init == "equilibrium":
            s0, v0 = equilibrium_gap(params, lead[0]), lead[0]
        else:
            s0, v0 = scenario.init[i - 1]
        d = None
        if scenario.disturbance and i in scenario.disturbance:
            d = scenario.disturbance[i][:n]
        traj = simulate_follower(params, v[i - 1], s0, v0, scenario.dt, scenario.integrator, d, vehicle=i)
        s[i], v[i], a[i] = traj.s, traj.v, traj.a
        events.extend(traj.events)
    t = scenario.dt * np.arange(n)
    return PlatoonResult(t, s, v, a, events, transient)


@dataclass(frozen=True, eq=False)
class SinusoidResponse:
    platoon: PlatoonResult
    amplitude: np.ndarray  # steady-state amplitude per vehicle, lead first
    omega: float

    @property
    def ratios(self):
        return self.amplitude[1:] / self.amplitude[:-1]


def steady_state_amplitude(t, v, omega, n_periods=2):
    """Half the peak-to-peak over the final ``n_periods`` full periods."""
    period = 2 * math.pi / omega
    window = t >= t[-1] - n_periods * period - 1e-9
    return 0.5 * np.ptp(v[..., window], axis=-1)


def sinusoid_response(params: ModelParams, n_followers=10, v_star=20.0, amplitude=1.0, omega=0.204,
                      warmup=20.0, duration=None, dt=0.1, transient_periods=10, measure_periods=2,
                      integrator="euler") -> SinusoidResponse:
    """Platoon response to a sinusoidal lead after a constant-speed warm-up.

    ``duration`` defaults to the warm-up plus ``transient_periods +
    measure_periods`` periods.  Shorter runs fall back to measuring over
    whatever full periods exist, but at least one is required.
    """
    if omega <= 0:
        raise DomainError("omega must be positive")
    if not 0 <= amplitude < v_star:
        raise DomainError("amplitude must satisfy 0 <= amplitude < v_star")
    period = 2 * math.pi / omega
    if duration is None:
        duration = warmup + (transient_periods + measure_periods) * period
    full_periods = math.floor((duration - warmup) / period + 1e-9)
    if full_periods < 1:
        raise DomainError("duration leaves less than one full period after the warm-up")
    lead = sinusoid(v_star, amplitude, omega, warmup, duration, dt)
    scenario = PlatoonScenario.homogeneous(params, n_followers, lead, dt=dt, integrator=integrator)
    result = simulate_platoon(scenario)
    n_measure = min(measure_periods, full_periods)
    result = result.with_transient(result.t[-1] - n_measure * period)
    amp = steady_state_amplitude(result.t, result.v, omega, n_measure)
    return SinusoidResponse(result, amp, omega)


def empirical_lead_response(params: ModelParams, recorded_lead, n_followers=15, dt=0.1,
                            integrator="euler") -> PlatoonResult:
    """Platoon of identical followers behind a recorded lead, started at equilibrium."""
    if isinstance(recorded_lead, TimeSeries):
        lead = recorded_lead
    else:
        lead = TimeSeries(np.asarray(recorded_lead, dtype=float), dt)
    if len(lead) == 0:
        raise FormatError("recorded lead series is empty")
    scenario = PlatoonScenario.homogeneous(params, n_followers, lead, dt=dt, integrator=integrator)
    return simulate_platoon(scenario)
