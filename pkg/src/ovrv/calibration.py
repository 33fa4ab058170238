"""Simulation-based calibration of the ACC model to trajectory data.

The objective is the velocity RMSE between measured follower velocity and
an explicit-Euler simulation driven by the measured lead velocity and
started from the measured initial gap and velocity.  Multiple bounded
Nelder-Mead searches from uniformly drawn starting points are run and the
lowest-RMSE result is kept.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import CalibrationError, DomainError, FormatError
from .model import PARAM_NAMES, ModelParams
from .platoon import _euler
from .trajectory import Trajectory

log = logging.getLogger(__name__)

DEFAULT_BOUNDS = {
    "k1": (0.001, 2.0),
    "k2": (0.001, 2.0),
    "tau_e": (0.1, 5.0),
    "eta": (0.0, 25.0),
}
XATOL = 1e-6
FATOL = 1e-8
MAX_ITER = 2000

TABLE_HEADER = (
    "velocity_profile",
    "following_setting",
    "duration_s",
    "distance_km",
    "max_velocity_kmh",
    "min_velocity_kmh",
    "velocity_train_error_mps",
    "velocity_test_error_mps",
    "space_gap_train_error_m",
    "space_gap_test_error_m",
)


def rmse_velocity(simulated, measured):
    simulated = np.asarray(simulated, dtype=float)
    measured = np.asarray(measured, dtype=float)
    if simulated.shape != measured.shape:
        raise FormatError(f"length mismatch: {simulated.shape} vs {measured.shape}")
    if simulated.size == 0:
        raise FormatError("rmse of empty series")
    return float(np.sqrt(np.mean((measured - simulated) ** 2)))


@dataclass(frozen=True, eq=False)
class CalibrationProblem:
    trajectories: tuple
    dt: float = 0.1
    bounds: dict = field(default_factory=lambda: dict(DEFAULT_BOUNDS))
    n_starts: int = 100
    seed: int = 0
    split: float = 0.5
    following_setting: str = ""

    def __post_init__(self):
        object.__setattr__(self, "trajectories", tuple(self.trajectories))
        bounds = dict(DEFAULT_BOUNDS)
        bounds.update({k: tuple(map(float, v)) for k, v in self.bounds.items()})
        object.__setattr__(self, "bounds", bounds)
        if not self.trajectories:
            raise DomainError("calibration needs at least one trajectory")
        for name in PARAM_NAMES:
            lo, hi = bounds[name]
            if lo < 0 or hi < lo:
                raise DomainError(f"bounds for {name} must satisfy 0 <= lower <= upper, got {(lo, hi)}")
        if self.n_starts < 1:
            raise DomainError("n_starts must be >= 1")
        if not 0 < self.split <= 1:
            raise DomainError("split must lie in (0, 1]")
        for traj in self.trajectories:
            if not math.isclose(traj.dt, self.dt, rel_tol=1e-6):
                raise FormatError(f"trajectory sampled at {traj.dt} s, problem dt is {self.dt} s")

    @property
    def lower(self):
        return np.array([self.bounds[n][0] for n in PARAM_NAMES])

    @property
    def upper(self):
        return np.array([self.bounds[n][1] for n in PARAM_NAMES])

    def n_train(self, traj):
        return max(1, int(math.floor(self.split * len(traj) + 1e-9)))

    @classmethod
    def from_config(cls, config, trajectories):
        """Build from a JSON-style dict with optional bounds, seed, n_starts, split, dt."""
        known = {"bounds", "seed", "n_starts", "split", "dt", "following_setting"}
        unknown = set(config) - known
        if unknown:
            raise DomainError(f"unknown calibration config keys: {sorted(unknown)}")
        return cls(trajectories=trajectories, **config)


def _simulate(params_vec, traj, n, dt):
    k1, k2, tau_e, eta = params_vec
    vl = np.ascontiguousarray(traj.v_lead[:n])
    s, v, _ = _euler(k1, k2, tau_e, eta, vl, np.zeros(n), traj.space_gap[0], traj.v_follow[0], dt)
    return s, v


def _squared_error(params_vec, problem):
    total, count = 0.0, 0
    for traj in problem.trajectories:
        n = problem.n_train(traj)
        _, v = _simulate(params_vec, traj, n, problem.dt)
        total += float(np.sum((traj.v_follow[:n] - v) ** 2))
        count += n
    return total, count


def objective(params, problem: CalibrationProblem) -> float:
    """Pooled training-portion velocity RMSE [m/s]."""
    vec = params.as_array() if isinstance(params, ModelParams) else np.asarray(params, dtype=float)
    total, count = _squared_error(vec, problem)
    value = math.sqrt(total / count)
    return value if math.isfinite(value) else math.inf


@dataclass(frozen=True)
class StartRecord:
    index: int
    initial: ModelParams
    final: ModelParams
    rmse: float
    converged: bool
    n_iterations: int
    n_evaluations: int
    trace: tuple = field(repr=False, default=())  # best objective after each iteration

    def to_dict(self):
        return {
            "index": self.index,
            "initial": self.initial.to_dict(),
            "final": self.final.to_dict(),
            "rmse": self.rmse,
            "converged": self.converged,
            "n_iterations": self.n_iterations,
            "n_evaluations": self.n_evaluations,
        }


@dataclass(frozen=True)
class ErrorRow:
    label: str
    duration_s: float | None
    distance_km: float | None
    max_velocity_kmh: float | None
    min_velocity_kmh: float | None
    velocity_train: float
    velocity_test: float | None
    gap_train: float
    gap_test: float | None


@dataclass(frozen=True)
class ErrorTable:
    rows: tuple  # per-trajectory ErrorRow
    summary: ErrorRow
    following_setting: str = ""
    test_reinitialized: bool = False

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TABLE_HEADER)

        def fmt(x):
            return "--" if x is None else repr(float(x))

        for row in (*self.rows, self.summary):
            writer.writerow([
                row.label, self.following_setting, fmt(row.duration_s), fmt(row.distance_km),
                fmt(row.max_velocity_kmh), fmt(row.min_velocity_kmh), fmt(row.velocity_train),
                fmt(row.velocity_test), fmt(row.gap_train), fmt(row.gap_test),
            ])
        return buf.getvalue()

    def to_dict(self):
        return {
            "following_setting": self.following_setting,
            "test_reinitialized": self.test_reinitialized,
            "rows": [r.__dict__ for r in self.rows],
            "summary": self.summary.__dict__,
        }


@dataclass(frozen=True)
class CalibrationResult:
    best_params: ModelParams
    best_rmse_velocity: float
    best_index: int
    per_start: tuple
    errors: ErrorTable
    seed: int

    def to_dict(self):
        return {
            "best_params": self.best_params.to_dict(),
            "best_rmse_velocity": self.best_rmse_velocity,
            "best_index": self.best_index,
            "seed": self.seed,
            "n_starts": len(self.per_start),
            "per_start": [r.to_dict() for r in self.per_start],
            "errors": self.errors.to_dict(),
            "metadata": {
                "integrator": "euler",
                "optimizer": "bounded Nelder-Mead, multi-start",
                "test_error_note": "test errors continue the simulation from t=0 without re-initialisation",
            },
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def _local_search(x0, problem, index):
    lo, hi = problem.lower, problem.upper
    span = np.where(hi > lo, hi - lo, 1.0)

    # search in unit-box coordinates so one tolerance fits all parameters
    def f(u):
        return objective(lo + u * span, problem)

    u0 = (np.asarray(x0) - lo) / span
    trace = []
    res = minimize(
        f, u0, method="Nelder-Mead",
        bounds=[(0.0, 1.0) if h > l else (0.0, 0.0) for l, h in zip(lo, hi)],
        callback=lambda intermediate_result: trace.append(float(intermediate_result.fun)),
        options={"xatol": XATOL, "fatol": FATOL, "maxiter": MAX_ITER, "maxfev": 4 * MAX_ITER},
    )
    x = np.clip(lo + res.x * span, lo, hi)
    rmse = objective(x, problem)
    return StartRecord(
        index=index,
        initial=ModelParams.from_array(x0),
        final=ModelParams.from_array(x),
        rmse=rmse,
        converged=bool(res.success) and math.isfinite(rmse),
        n_iterations=int(res.nit),
        n_evaluations=int(res.nfev),
        trace=tuple(trace),
    )


def initial_points(problem: CalibrationProblem):
    rng = np.random.default_rng(problem.seed)
    lo, hi = problem.lower, problem.upper
    return lo + rng.random((problem.n_starts, len(PARAM_NAMES))) * (hi - lo)


def calibrate(problem: CalibrationProblem, starts=None) -> CalibrationResult:
    """Multi-start bounded search; ``starts`` overrides the random initial points."""
    points = initial_points(problem) if starts is None else np.atleast_2d(
        [s.as_array() if isinstance(s, ModelParams) else s for s in starts]).astype(float)
    records = []
    for i, x0 in enumerate(points):
        rec = _local_search(x0, problem, i)
        log.debug("start %d: rmse=%.6g converged=%s", i, rec.rmse, rec.converged)
        records.append(rec)
    usable = [r for r in records if r.converged]
    if not usable:
        raise CalibrationError("no local search converged", [r.to_dict() for r in records])
    # strict < keeps the lowest index among ties
    best = usable[0]
    for rec in usable[1:]:
        if rec.rmse < best.rmse:
            best = rec
    return CalibrationResult(
        best_params=best.final,
        best_rmse_velocity=best.rmse,
        best_index=best.index,
        per_start=tuple(records),
        errors=evaluate(best.final, problem),
        seed=problem.seed,
    )


def _rmse_or_none(a, b):
    return None if len(a) == 0 else rmse_velocity(a, b)


def evaluate(params: ModelParams, problem: CalibrationProblem) -> ErrorTable:
    """Train/test velocity and space-gap RMSE per trajectory and pooled.

    Each trajectory is simulated once over its full span from its measured
    initial state; the leading ``split`` fraction is scored as training and
    the remainder as test.
    """
    rows = []
    sums = {"vtr": 0.0, "vte": 0.0, "gtr": 0.0, "gte": 0.0}
    n_tr = n_te = 0
    for k, traj in enumerate(problem.trajectories):
        n = problem.n_train(traj)
        s, v = _simulate(params.as_array(), traj, len(traj), problem.dt)
        ev = traj.v_follow - v
        eg = traj.space_gap - s
        sums["vtr"] += float(np.sum(ev[:n] ** 2))
        sums["gtr"] += float(np.sum(eg[:n] ** 2))
        sums["vte"] += float(np.sum(ev[n:] ** 2))
        sums["gte"] += float(np.sum(eg[n:] ** 2))
        n_tr += n
        n_te += len(traj) - n
        speed_kmh = traj.v_follow * 3.6
        rows.append(ErrorRow(
            label=traj.metadata.get("label") or f"trajectory_{k}",
            duration_s=float(traj.t[-1] - traj.t[0]),
            distance_km=float(np.sum(traj.v_follow[:-1]) * traj.dt / 1000),
            max_velocity_kmh=float(speed_kmh.max()),
            min_velocity_kmh=float(speed_kmh.min()),
            velocity_train=_rmse_or_none(v[:n], traj.v_follow[:n]),
            velocity_test=_rmse_or_none(v[n:], traj.v_follow[n:]),
            gap_train=_rmse_or_none(s[:n], traj.space_gap[:n]),
            gap_test=_rmse_or_none(s[n:], traj.space_gap[n:]),
        ))
    summary = ErrorRow(
        label="Summary",
        duration_s=None, distance_km=None, max_velocity_kmh=None, min_velocity_kmh=None,
        velocity_train=math.sqrt(sums["vtr"] / n_tr),
        velocity_test=math.sqrt(sums["vte"] / n_te) if n_te else None,
        gap_train=math.sqrt(sums["gtr"] / n_tr),
        gap_test=math.sqrt(sums["gte"] / n_te) if n_te else None,
    )
    return ErrorTable(tuple(rows), summary, problem.following_setting)


def synthesize(params: ModelParams, lead, duration=None, dt=0.1, s0=None, v0=None, noise_std=0.0,
               gap_noise_std=0.0, seed=0, label="synthetic") -> Trajectory:
    """Measured-style trajectory generated by the model itself.

    ``noise_std`` adds zero-mean Gaussian noise to the follower velocity
    channel (``gap_noise_std`` likewise to the gap); the lead channel stays
    exact.  Defaults start the follower at equilibrium with the lead.
    """
    vl = np.asarray(getattr(lead, "values", lead), dtype=float)
    if duration is not None:
        vl = vl[: int(math.floor(duration / dt + 1e-9)) + 1]
    v0 = vl[0] if v0 is None else v0
    s0 = params.eta + params.tau_e * v0 if s0 is None else s0
    s, v, _ = _euler(params.k1, params.k2, params.tau_e, params.eta, np.ascontiguousarray(vl),
                     np.zeros(len(vl)), float(s0), float(v0), float(dt))
    rng = np.random.default_rng(seed)
    if noise_std:
        v = v + rng.normal(0.0, noise_std, len(v))
    if gap_noise_std:
        s = s + rng.normal(0.0, gap_noise_std, len(s))
    t = dt * np.arange(len(vl))
    return Trajectory(t, vl, v, s, {"label": label, "generator": params.to_dict(), "noise_std": noise_std})
