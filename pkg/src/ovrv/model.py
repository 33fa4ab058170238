"""Constant effective time-gap OVRV car-following model.

The follower acceleration is

    dv/dt = k1 * (s - eta - tau_e * v) + k2 * (v_lead - v)

with space-gap ``s`` [m], follower velocity ``v`` [m/s] and relative
velocity ``dv = v_lead - v``.  Everything here works in SI units; convert
mph at the boundary with :func:`mph_to_mps`.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError

MPS_PER_MPH = 0.44704

PARAM_NAMES = ("k1", "k2", "tau_e", "eta")


def mph_to_mps(mph):
    return mph * MPS_PER_MPH


def mps_to_mph(mps):
    return mps / MPS_PER_MPH


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the constant effective time-gap model.

    Attributes:
        k1: gain on the spacing error [1/s^2].
        k2: gain on the relative velocity [1/s].
        tau_e: desired effective time-gap [s].
        eta: jam distance [m].
    """

    k1: float
    k2: float
    tau_e: float
    eta: float
    _checked: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        for name in PARAM_NAMES:
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self._checked:
            return
        for name in PARAM_NAMES:
            value = getattr(self, name)
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value}")
            if value < 0:
                raise DomainError(f"{name} must be non-negative, got {value}")

    @classmethod
    def unchecked(cls, k1, k2, tau_e, eta):
        """Build parameters without the non-negativity check (for RDC probing)."""
        return cls(k1, k2, tau_e, eta, _checked=False)

    @classmethod
    def from_array(cls, x):
        return cls(*(float(v) for v in x))

    def as_array(self):
        return np.array([self.k1, self.k2, self.tau_e, self.eta])

    # partial derivatives of the acceleration function
    @property
    def f_s(self):
        return self.k1

    @property
    def f_v(self):
        return -self.k1 * self.tau_e

    @property
    def f_dv(self):
        return self.k2

    # OVRV coefficients: alpha on the optimal-velocity term, beta on dv
    @property
    def alpha(self):
        return self.k1 * self.tau_e

    @property
    def beta(self):
        return self.k2

    def replace(self, **changes):
        values = {name: getattr(self, name) for name in PARAM_NAMES}
        values.update(changes)
        return ModelParams(**values)

    def to_dict(self):
        return {name: getattr(self, name) for name in PARAM_NAMES}

    @classmethod
    def from_dict(cls, data):
        missing = [name for name in PARAM_NAMES if name not in data]
        if missing:
            raise DomainError(f"missing parameter(s): {', '.join(missing)}")
        return cls(*(data[name] for name in PARAM_NAMES))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text())


# Calibrated values for the two following settings of the tested ACC system.
MIN_SETTING = ModelParams(k1=0.0782, k2=0.4445, tau_e=0.5162, eta=8.3365)
MAX_SETTING = ModelParams(k1=0.0131, k2=0.2692, tau_e=1.6881, eta=7.5699)


@dataclass(frozen=True)
class VehicleState:
    s: float
    v: float

    @property
    def diagnostics(self):
        issues = []
        if self.s < 0:
            issues.append("negative_gap")
        if self.v < 0:
            issues.append("negative_velocity")
        return issues


def _require_finite(**values):
    for name, value in values.items():
        if not np.all(np.isfinite(value)):
            raise DomainError(f"{name} must be finite")


def accel(params: ModelParams, s, v, dv):
    """Follower acceleration [m/s^2]; accepts scalars or numpy arrays."""
    _require_finite(s=s, v=v, dv=dv)
    # grouping keeps accel(equilibrium_gap(v), v, 0) == 0 bit-exactly
    return params.k1 * (s - (params.eta + params.tau_e * v)) + params.k2 * dv


def equilibrium_gap(params: ModelParams, v):
    """Space-gap at which a follower at speed ``v`` does not accelerate."""
    if np.any(np.asarray(v) < 0):
        raise DomainError("equilibrium_gap requires v >= 0")
    return params.eta + params.tau_e * v


def time_gap_at(params: ModelParams, v):
    """Velocity-dependent time-gap eta / v + tau_e equivalent to the model."""
    if np.any(np.asarray(v) <= 0):
        raise DomainError("time-gap is undefined for v <= 0")
    return params.eta / v + params.tau_e


@dataclass(frozen=True)
class RdcReport:
    f_s: float
    f_v: float
    f_dv: float
    f_s_ok: bool
    f_v_ok: bool
    f_dv_ok: bool

    @property
    def passed(self):
        return self.f_s_ok and self.f_v_ok and self.f_dv_ok

    @property
    def failures(self):
        names = []
        if not self.f_s_ok:
            names.append("f_s >= 0")
        if not self.f_dv_ok:
            names.append("f_dv >= 0")
        if not self.f_v_ok:
            names.append("f_v <= 0")
        return names

    def to_dict(self):
        out = asdict(self)
        out["passed"] = self.passed
        out["failures"] = self.failures
        return out


def check_rdc(params) -> RdcReport:
    """Check the rational driving constraints f_s >= 0, f_dv >= 0, f_v <= 0.

    ``params`` may be a :class:`ModelParams` or any ``(k1, k2, tau_e, eta)``
    sequence; the latter is not validated so violating sets can be probed.
    """
    if not isinstance(params, ModelParams):
        params = ModelParams.unchecked(*params)
    return RdcReport(
        f_s=params.f_s,
        f_v=params.f_v,
        f_dv=params.f_dv,
        f_s_ok=params.f_s >= 0,
        f_v_ok=params.f_v <= 0,
        f_dv_ok=params.f_dv >= 0,
    )
