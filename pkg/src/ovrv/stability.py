"""String stability of the linearised platoon.

The velocity-to-velocity transfer function between consecutive vehicles is

    Gamma(z) = (z f_dv + f_s) / (z^2 + z (f_dv - f_v) + f_s),   z = j omega

and the platoon is string stable when |Gamma(j omega)| <= 1 for every
omega >= 0, equivalently when lambda2 < 0.  None of these quantities depend
on the jam distance eta.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import DomainError, SingularityError
from .model import ModelParams

MARGINAL_TOL = 1e-9
DEFAULT_OMEGA_MIN = 1e-3
DEFAULT_OMEGA_MAX = 10.0
DEFAULT_N_POINTS = 500
PEAK_SWEEP_POINTS = 2000


def lambda2(params: ModelParams) -> float:
    fs, fv, fdv = params.f_s, params.f_v, params.f_dv
    if fv == 0:
        raise SingularityError(
            "lambda2 is undefined when k1 * tau_e == 0; use the transfer-function route"
        )
    return fs / fv**3 * (fv**2 / 2 - fdv * fv - fs)


def gamma_squared(params: ModelParams, omega):
    fs, fv, fdv = params.f_s, params.f_v, params.f_dv
    w2 = np.square(omega)
    num = w2 * fdv**2 + fs**2
    den = (fs - w2) ** 2 + w2 * (fdv - fv) ** 2
    return num / den


def gamma_magnitude(params: ModelParams, omega):
    """|Gamma(j omega)| for scalar or array ``omega`` >= 0."""
    if np.any(np.asarray(omega) < 0):
        raise DomainError("omega must be non-negative")
    out = np.sqrt(gamma_squared(params, omega))
    return float(out) if np.ndim(out) == 0 else out


def transfer_function(params: ModelParams, omega):
    """Complex Gamma(j omega); useful for phase information."""
    z = 1j * np.asarray(omega, dtype=float)
    fs, fv, fdv = params.f_s, params.f_v, params.f_dv
    return (z * fdv + fs) / (z**2 + z * (fdv - fv) + fs)


def _crossover_squared(params: ModelParams) -> float:
    # |Gamma|^2 = 1  <=>  omega^2 = 2 f_s + 2 f_dv f_v - f_v^2
    fs, fv, fdv = params.f_s, params.f_v, params.f_dv
    return 2 * fs + 2 * fdv * fv - fv**2


def excess_gain(params: ModelParams, omega):
    """|Gamma|^2 - 1 without cancellation: omega^2 (w_c^2 - omega^2) / den."""
    fs, fv, fdv = params.f_s, params.f_v, params.f_dv
    w2 = np.square(omega)
    den = (fs - w2) ** 2 + w2 * (fdv - fv) ** 2
    return w2 * (_crossover_squared(params) - w2) / den


def crossover_frequency(params: ModelParams):
    """Frequency [rad/s] where |Gamma| falls through 1, or None if never above 1."""
    w2 = _crossover_squared(params)
    if w2 <= 0:
        return None
    return math.sqrt(w2)


def crossover_frequency_numeric(params: ModelParams, omega_max=None, n=4000):
    """Root-find |Gamma| = 1 from a dense log sweep (independent of the closed form)."""
    scale = math.sqrt(params.f_s) if params.f_s > 0 else 1.0
    omega_max = omega_max or 100 * scale
    grid = np.logspace(math.log10(omega_max) - 8, math.log10(omega_max), n)
    h = gamma_squared(params, grid) - 1.0
    sign_change = np.nonzero((h[:-1] > 0) & (h[1:] <= 0))[0]
    if len(sign_change) == 0:
        return None
    i = sign_change[-1]
    return brentq(lambda w: gamma_squared(params, w) - 1.0, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15)


def peak_gain_analytic(params: ModelParams):
    """Stationary point of |Gamma|^2 as a rational function of x = omega^2.

    With |Gamma|^2 = (a x + b) / (x^2 + c x + b), a = f_dv^2, b = f_s^2, the
    derivative vanishes where a x^2 + 2 b x + b (c - a) = 0.
    """
    if params.f_s <= 0:
        raise DomainError("peak gain needs k1 > 0")
    a = params.f_dv**2
    b = params.f_s**2
    c = (params.f_dv - params.f_v) ** 2 - 2 * params.f_s
    if a == 0:
        x = -c / 2
    else:
        # stable root form avoids cancellation when a * (a - c) << b
        x = b * (a - c) / (b + math.sqrt(b * b + a * b * (a - c))) if b * b + a * b * (a - c) >= 0 else -1.0
    if x <= 0:
        return 0.0, 0.0
    omega = math.sqrt(x)
    return omega, 10 * math.log10(gamma_squared(params, omega))


def peak_gain(params: ModelParams, n_sweep=PEAK_SWEEP_POINTS):
    """Global maximiser of |Gamma| by log sweep plus golden-section refinement.

    Returns ``(peak_omega, peak_gain_db)``; a maximum at omega = 0 is reported
    as ``(0.0, 0.0)``.
    """
    if params.f_s <= 0:
        raise DomainError("peak gain needs k1 > 0")
    scale = math.sqrt(params.f_s)
    grid = np.logspace(math.log10(scale) - 5, math.log10(scale) + 3, n_sweep)
    excess = excess_gain(params, grid)
    i = int(np.argmax(excess))
    if excess[i] <= 0:
        return 0.0, 0.0
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, n_sweep - 1)]
    res = minimize_scalar(
        lambda logw: -excess_gain(params, math.exp(logw)),
        bracket=(math.log(lo), math.log(grid[i]), math.log(hi)),
        method="golden",
        tol=1e-12,
    )
    omega = math.exp(res.x)
    peak = excess_gain(params, omega)
    if peak <= 0:
        return 0.0, 0.0
    return omega, 10 * math.log10(1.0 + peak)


def bode_curve(params: ModelParams, omega_min=DEFAULT_OMEGA_MIN, omega_max=DEFAULT_OMEGA_MAX,
               n_points=DEFAULT_N_POINTS):
    """Log-spaced gain curve as an ``(n_points, 2)`` array of (omega, gain_db)."""
    if not (0 < omega_min < omega_max):
        raise DomainError("need 0 < omega_min < omega_max")
    if n_points < 2:
        raise DomainError("n_points must be at least 2")
    omega = np.logspace(math.log10(omega_min), math.log10(omega_max), int(n_points))
    omega[0], omega[-1] = omega_min, omega_max
    gain_db = 10 * np.log10(gamma_squared(params, omega))
    return np.column_stack([omega, gain_db])


@dataclass(frozen=True)
class StabilityReport:
    lambda2: float | None
    is_string_stable: bool
    marginal: bool
    crossover_omega: float | None
    peak_gain_db: float
    peak_omega: float
    gain_curve: np.ndarray = field(repr=False)

    def to_dict(self, include_curve=True):
        out = {
            "lambda2": self.lambda2,
            "is_string_stable": self.is_string_stable,
            "marginal": self.marginal,
            "crossover_omega": self.crossover_omega,
            "peak_gain_db": self.peak_gain_db,
            "peak_omega": self.peak_omega,
        }
        if include_curve:
            out["gain_curve"] = [[float(w), float(g)] for w, g in self.gain_curve]
        return out

    def to_json(self, include_curve=True):
        return json.dumps(self.to_dict(include_curve), indent=2)


def analyze(params: ModelParams, omega_min=DEFAULT_OMEGA_MIN, omega_max=DEFAULT_OMEGA_MAX,
            n_points=DEFAULT_N_POINTS) -> StabilityReport:
    curve = bode_curve(params, omega_min, omega_max, n_points)
    try:
        lam = lambda2(params)
    except SingularityError:
        lam = None
    if lam is None:
        # k1 * tau_e == 0: fall back on the magnitude condition directly
        if params.f_s == 0:
            # Gamma = f_dv / (z + f_dv): below 1 for every omega > 0
            stable, marginal = params.f_dv > 0, False
        else:
            stable = _crossover_squared(params) < 0
            marginal = abs(_crossover_squared(params)) < MARGINAL_TOL
    else:
        stable = lam < 0
        marginal = abs(lam) < MARGINAL_TOL
    if params.f_s > 0:
        peak_omega, peak_db = peak_gain(params)
    else:
        peak_omega, peak_db = 0.0, 0.0
    return StabilityReport(
        lambda2=lam,
        is_string_stable=bool(stable),
        marginal=bool(marginal),
        crossover_omega=crossover_frequency(params),
        peak_gain_db=peak_db,
        peak_omega=peak_omega,
        gain_curve=curve,
    )


@dataclass(frozen=True)
class SweepGrid:
    """lambda2 over a Cartesian (k1, k2, tau_e) grid, indexed [i_k1, i_k2, i_tau]."""

    k1: np.ndarray
    k2: np.ndarray
    tau_e: np.ndarray
    lambda2: np.ndarray  # NaN where undefined

    @property
    def status(self):
        out = np.full(self.lambda2.shape, "undefined", dtype=object)
        defined = ~np.isnan(self.lambda2)
        out[defined & (self.lambda2 < 0)] = "stable"
        out[defined & (self.lambda2 >= 0)] = "unstable"
        return out

    def rows(self):
        status = self.status
        for i, k1 in enumerate(self.k1):
            for j, k2 in enumerate(self.k2):
                for m, tau in enumerate(self.tau_e):
                    lam = self.lambda2[i, j, m]
                    yield float(k1), float(k2), float(tau), (None if np.isnan(lam) else float(lam)), status[i, j, m]

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k1", "k2", "tau_e", "lambda2", "stable"])
        for k1, k2, tau, lam, status in self.rows():
            stable = "undefined" if status == "undefined" else str(status == "stable").lower()
            writer.writerow([repr(k1), repr(k2), repr(tau), "" if lam is None else repr(lam), stable])
        return buf.getvalue()


def stability_sweep(k1_range, k2_range, tau_e_values, grid_resolution=50) -> SweepGrid:
    """Evaluate lambda2 on a grid; k1 and k2 ranges are ``(lo, hi)`` pairs or explicit arrays."""

    def axis(spec):
        arr = np.asarray(spec, dtype=float)
        if arr.shape == (2,) and grid_resolution != 2:
            arr = np.linspace(arr[0], arr[1], int(grid_resolution))
        if arr.size == 0 or np.any(arr < 0):
            raise DomainError("sweep ranges must be non-empty and non-negative")
        return arr

    k1 = axis(k1_range)
    k2 = axis(k2_range)
    tau = np.asarray(tau_e_values, dtype=float).ravel()
    if tau.size == 0 or np.any(tau < 0):
        raise DomainError("tau_e values must be non-empty and non-negative")
    K1, K2, TAU = np.meshgrid(k1, k2, tau, indexing="ij")
    fs, fv, fdv = K1, -K1 * TAU, K2
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = fs / fv**3 * (fv**2 / 2 - fdv * fv - fs)
    lam = np.where(fv == 0, np.nan, lam)
    return SweepGrid(k1=k1, k2=k2, tau_e=tau, lambda2=lam)


def gain_curve_csv(curve) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["omega_rad_s", "gain_db"])
    for omega, gain in curve:
        writer.writerow([repr(float(omega)), repr(float(gain))])
    return buf.getvalue()
