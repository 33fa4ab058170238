"""Synthetic lead-vehicle velocity profiles.

The named profiles ``A`` to ``I`` reproduce the field-test schedules (step
tests, oscillations and dips, all defined in mph).  ``step`` is the
platoon step-down/step-up disturbance and ``sinusoid`` a warm-up hold
followed by a sine wave.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError
from .model import mph_to_mps
from .series import TimeSeries

KINDS = ("step_schedule", "oscillatory", "dip", "sinusoid", "constant")
BUILTIN_NAMES = ("A", "B", "C", "D", "E", "F", "G", "H", "I", "step")

STEP_HOLD_S = 60.0
OSCILLATION_HOLD_S = 30.0
DIP_HOLD_S = 5.0
DIP_RECOVERY_S = 45.0


@dataclass(frozen=True)
class ProfileSpec:
    """Piecewise-constant velocity schedule.

    ``segments`` is a list of ``(velocity [m/s], hold [s])``.  With
    ``ramp_accel`` set, consecutive holds are joined by linear ramps at that
    acceleration [m/s^2] instead of instantaneous steps.  For
    ``kind == "sinusoid"`` the single segment is the warm-up hold and the
    sine wave of ``amplitude`` / ``omega`` runs for ``sine_duration``.
    """

    kind: str
    segments: tuple
    dt: float = 0.1
    ramp_accel: float | None = None
    amplitude: float = 0.0
    omega: float = 0.0
    sine_duration: float = 0.0
    label: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple((float(v), float(h)) for v, h in self.segments))
        if self.kind not in KINDS:
            raise DomainError(f"unknown profile kind {self.kind!r}; expected one of {KINDS}")
        if not self.segments:
            raise DomainError("profile needs at least one segment")
        for v, hold in self.segments:
            if v < 0:
                raise DomainError(f"segment velocity must be >= 0, got {v}")
            if hold <= 0:
                raise DomainError(f"segment hold must be > 0, got {hold}")
        if self.dt <= 0:
            raise DomainError("dt must be positive")
        if self.ramp_accel is not None and self.ramp_accel <= 0:
            raise DomainError("ramp acceleration must be positive")
        if self.kind == "sinusoid":
            if self.omega <= 0 or self.sine_duration <= 0:
                raise DomainError("sinusoid needs omega > 0 and sine_duration > 0")
            if self.amplitude > self.segments[0][0]:
                raise DomainError("sinusoid amplitude would drive the velocity negative")

    def to_dict(self):
        out = asdict(self)
        out["segments"] = [list(s) for s in self.segments]
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def _n_samples(duration, dt):
    return int(math.floor(duration / dt + 1e-9)) + 1


def generate(spec: ProfileSpec) -> TimeSeries:
    if spec.kind == "sinusoid":
        return _generate_sinusoid(spec)
    knots_t, knots_v = [0.0], [spec.segments[0][0]]
    for i, (v, hold) in enumerate(spec.segments):
        if i > 0 and spec.ramp_accel is not None:
            ramp = abs(v - knots_v[-1]) / spec.ramp_accel
            if ramp > 0:
                knots_t.append(knots_t[-1] + ramp)
                knots_v.append(v)
        elif i > 0:
            # zero-width knot pair gives an instantaneous step
            knots_t.append(knots_t[-1])
            knots_v.append(v)
        knots_t.append(knots_t[-1] + hold)
        knots_v.append(v)
    total = knots_t[-1]
    n = _n_samples(total, spec.dt)
    t = spec.dt * np.arange(n)
    if spec.ramp_accel is None:
        bounds = np.cumsum([hold for _, hold in spec.segments])
        idx = np.searchsorted(bounds, t + 1e-9 * spec.dt, side="right")
        idx = np.minimum(idx, len(spec.segments) - 1)
        values = np.array([v for v, _ in spec.segments])[idx]
    else:
        values = np.interp(t, knots_t, knots_v)
    return TimeSeries(values, spec.dt)


def _generate_sinusoid(spec: ProfileSpec) -> TimeSeries:
    v_star, warmup = spec.segments[0]
    n = _n_samples(warmup + spec.sine_duration, spec.dt)
    t = spec.dt * np.arange(n)
    phase = np.clip(t - warmup, 0.0, None)
    values = v_star + spec.amplitude * np.sin(spec.omega * phase)
    return TimeSeries(values, spec.dt)


def _mph_segments(mph_values, hold):
    return [(mph_to_mps(v), hold) for v in mph_values]


def _step_test(lo, hi, step=5):
    up = list(range(lo, hi + 1, step))
    return up + up[-2::-1]


def builtin_spec(name, dt=0.1, cycles=1, step_hold=STEP_HOLD_S, ramp_accel=None) -> ProfileSpec:
    """Expand a named field-test profile (or ``step``) into a :class:`ProfileSpec`."""
    if cycles < 1:
        raise DomainError("cycles must be >= 1")
    if name in ("A", "B", "C"):
        lo, hi = {"A": (5, 30), "B": (35, 55), "C": (60, 70)}[name]
        segments = _mph_segments(_step_test(lo, hi), step_hold) * cycles
        kind = "step_schedule"
    elif name in ("D", "E", "F", "G", "H"):
        hi, lo = {"D": (30, 20), "E": (50, 45), "F": (50, 40), "G": (70, 65), "H": (70, 60)}[name]
        segments = _mph_segments([hi, lo], OSCILLATION_HOLD_S) * cycles
        kind = "oscillatory"
    elif name == "I":
        segments = [(mph_to_mps(50), DIP_RECOVERY_S)]
        for _ in range(cycles):
            for drop in (5, 10, 15, 20):
                segments += [(mph_to_mps(50 - drop), DIP_HOLD_S), (mph_to_mps(50), DIP_RECOVERY_S)]
        kind = "dip"
    elif name == "step":
        return step_spec(dt=dt, ramp_accel=ramp_accel)
    else:
        raise DomainError(f"unknown profile {name!r}; valid names: {', '.join(BUILTIN_NAMES)}")
    return ProfileSpec(kind, segments, dt=dt, ramp_accel=ramp_accel, label=name)


def builtin(name, dt=0.1, cycles=1, duration=None, **kwargs) -> TimeSeries:
    """Generate a named profile; ``duration`` truncates or pads with the final value."""
    series = generate(builtin_spec(name, dt, cycles, **kwargs))
    if duration is None:
        return series
    return fit_duration(series, duration)


def fit_duration(series: TimeSeries, duration) -> TimeSeries:
    n = _n_samples(duration, series.dt)
    values = series.values[:n]
    if len(values) < n:
        values = np.concatenate([values, np.full(n - len(values), values[-1])])
    return TimeSeries(values, series.dt, series.t0)


def step_spec(v0=20.0, drop=5.0, lead_in=20.0, hold=STEP_HOLD_S, tail=120.0, dt=0.1, ramp_accel=None):
    """Step down by ``drop`` for ``hold`` seconds, then back up."""
    if drop > v0:
        raise DomainError("step drop exceeds initial velocity")
    segments = [(v0, lead_in), (v0 - drop, hold), (v0, tail)]
    return ProfileSpec("step_schedule", segments, dt=dt, ramp_accel=ramp_accel, label="step")


def constant(v, duration, dt=0.1) -> TimeSeries:
    return generate(ProfileSpec("constant", [(v, duration)], dt=dt))


def sinusoid(v_star, amplitude, omega, warmup, duration, dt=0.1) -> TimeSeries:
    """``v_star`` for ``warmup`` seconds, then ``v_star + amplitude * sin(omega * (t - warmup))``.

    ``duration`` is the total length including the warm-up.
    """
    if duration <= warmup:
        raise DomainError("duration must exceed the warm-up")
    spec = ProfileSpec("sinusoid", [(v_star, warmup)], dt=dt, amplitude=amplitude, omega=omega,
                       sine_duration=duration - warmup)
    return generate(spec)
