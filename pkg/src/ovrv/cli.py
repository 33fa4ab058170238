"""Command-line front end.

Every subcommand writes plain data files (CSV/JSON) into ``--out``.  Exit
codes: 0 success, 2 usage or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import calibration, platoon, profiles, stability, trajectory
from .errors import CalibrationError, OvrvError, SingularityError
from .model import ModelParams, check_rdc
from .series import TimeSeries

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

log = logging.getLogger("ovrv")


class UsageError(Exception):
    pass


def write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


# --- argument helpers ---------------------------------------------------------

def _add_param_args(p):
    p.add_argument("--params", type=Path, help="JSON file with k1, k2, tau_e, eta")
    p.add_argument("--k1", type=float, help="override k1 [1/s^2]")
    p.add_argument("--k2", type=float, help="override k2 [1/s]")
    p.add_argument("--tau-e", type=float, help="override tau_e [s]")
    p.add_argument("--eta", type=float, help="override eta [m]")


def _params_from_args(args, defaults=None):
    values = dict(defaults or {})
    if args.params is not None:
        if not args.params.is_file():
            raise UsageError(f"params file not found: {args.params}")
        values = ModelParams.load(args.params).to_dict()
    for name in ("k1", "k2", "tau_e", "eta"):
        override = getattr(args, name)
        if override is not None:
            values[name] = override
    missing = [n for n in ("k1", "k2", "tau_e", "eta") if n not in values]
    if missing:
        raise UsageError(f"missing parameter(s) {', '.join(missing)}; pass --params or the overrides")
    return ModelParams.from_dict(values)


def _parse_axis(text, name):
    try:
        if ":" in text:
            lo, hi = (float(x) for x in text.split(":"))
            if not 0 <= lo < hi:
                raise ValueError
            return ("range", lo, hi)
        values = [float(x) for x in text.split(",")]
        if any(v < 0 for v in values):
            raise ValueError
        return ("list", values)
    except ValueError:
        raise UsageError(f"invalid range for {name}: {text!r} (use lo:hi or v1,v2,...)") from None


def _parse_sweep(tokens, resolution):
    axes = {}
    for token in tokens:
        name, sep, spec = token.partition("=")
        if not sep or name not in ("k1", "k2", "tau_e"):
            raise UsageError(f"invalid sweep axis {token!r}; expected k1=..., k2=..., tau_e=...")
        axes[name] = _parse_axis(spec, name)
    missing = {"k1", "k2", "tau_e"} - set(axes)
    if missing:
        raise UsageError(f"sweep needs axes: {', '.join(sorted(missing))}")

    def expand(axis):
        if axis[0] == "range":
            return np.linspace(axis[1], axis[2], resolution)
        return np.array(axis[1])

    return expand(axes["k1"]), expand(axes["k2"]), expand(axes["tau_e"])


def _lead_from_args(args):
    if args.lead_csv is not None:
        if not args.lead_csv.is_file():
            raise UsageError(f"lead profile file not found: {args.lead_csv}")
        lead = TimeSeries.read_csv(args.lead_csv)
        if abs(lead.dt - args.dt) > 1e-9 * args.dt:
            raise UsageError(f"lead CSV sampled at {lead.dt} s but --dt is {args.dt}")
        return lead
    if args.profile == "sinusoid":
        duration = args.duration
        if duration is None:
            period = 2 * np.pi / args.omega
            duration = args.warmup + 12 * period
        return profiles.sinusoid(args.v_star, args.amplitude, args.omega, args.warmup, duration, args.dt)
    return profiles.builtin(args.profile, args.dt, args.cycles, duration=args.duration)


# --- subcommands --------------------------------------------------------------

def cmd_simulate(args):
    params = _params_from_args(args)
    lead = _lead_from_args(args)
    scenario = platoon.PlatoonScenario.homogeneous(params, args.followers, lead, dt=args.dt,
                                                   integrator=args.integrator)
    result = platoon.simulate_platoon(scenario, transient=args.transient)
    out = args.out
    write_atomic(out / "platoon.csv", result.to_csv())
    summary = result.summary()
    summary["params"] = params.to_dict()
    summary["integrator"] = args.integrator
    write_atomic(out / "summary.json", _dump(summary))
    if args.followers == 1:
        traj = trajectory.Trajectory(result.t, result.v[0], result.v[1], result.s[1],
                                     {"label": args.profile or "lead"})
        write_atomic(out / "trajectory.csv", traj.to_csv())
    print(_dump({k: summary[k] for k in ("n_followers", "peak_to_peak_mps", "amplification")}), end="")
    return EXIT_OK


def cmd_stability(args):
    out = args.out
    # stability does not depend on eta, so it may be omitted here
    wants_params = not args.sweep or args.params is not None or args.k1 is not None
    params = _params_from_args(args, {"eta": 0.0}) if wants_params else None
    if args.sweep:
        k1, k2, tau = _parse_sweep(args.sweep, args.resolution)
        grid = stability.stability_sweep(k1, k2, tau)
        write_atomic(out / "sweep.csv", grid.to_csv())
        counts = {s: int(np.sum(grid.status == s)) for s in ("stable", "unstable", "undefined")}
        print(_dump({"cells": int(grid.lambda2.size), **counts}), end="")
        if params is None:
            return EXIT_OK
    report = stability.analyze(params, args.omega_min, args.omega_max, args.points)
    doc = report.to_dict(include_curve=False)
    doc["params"] = params.to_dict()
    doc["rdc"] = check_rdc(params).to_dict()
    write_atomic(out / "stability.json", _dump(doc))
    if args.bode:
        write_atomic(out / "bode.csv", stability.gain_curve_csv(report.gain_curve))
    print(_dump(doc), end="")
    return EXIT_OK


def _collect_trajectories(paths):
    files = []
    for p in paths:
        if p.is_dir():
            files.extend(sorted(p.glob("*.csv")))
        elif p.is_file():
            files.append(p)
        else:
            raise UsageError(f"trajectory path not found: {p}")
    if not files:
        raise UsageError("no trajectory CSV files found")
    return [trajectory.Trajectory.read_csv(f) for f in files]


def cmd_calibrate(args):
    config = {}
    if args.config is not None:
        if not args.config.is_file():
            raise UsageError(f"config file not found: {args.config}")
        config = json.loads(args.config.read_text())
    config["seed"] = args.seed
    if args.starts is not None:
        config["n_starts"] = args.starts
    config.setdefault("n_starts", 100)
    if args.split is not None:
        config["split"] = args.split
    if args.dt is not None:
        config["dt"] = args.dt
    if args.setting:
        config["following_setting"] = args.setting
    trajs = _collect_trajectories(args.trajectories)
    if "dt" not in config:
        config["dt"] = trajs[0].dt
    problem = calibration.CalibrationProblem.from_config(config, trajs)
    result = calibration.calibrate(problem)
    out = args.out
    write_atomic(out / "calibration.json", result.to_json() + "\n")
    write_atomic(out / "errors.csv", result.errors.to_csv())
    write_atomic(out / "best_params.json", _dump(result.best_params.to_dict()))
    print(_dump({"best_params": result.best_params.to_dict(),
                 "best_rmse_velocity": result.best_rmse_velocity}), end="")
    return EXIT_OK


def cmd_profile(args):
    series = profiles.builtin(args.name, args.dt, args.cycles, duration=args.duration, ramp_accel=args.ramp)
    write_atomic(args.out, series.to_csv())
    if args.spec_out is not None:
        spec = profiles.builtin_spec(args.name, args.dt, args.cycles, ramp_accel=args.ramp)
        write_atomic(args.spec_out, spec.to_json() + "\n")
    return EXIT_OK


def cmd_ingest(args):
    for p in (args.lead, args.follow):
        if not p.is_file():
            raise UsageError(f"GPS log not found: {p}")
    lead = trajectory.GpsLog.read_csv(args.lead)
    follow = trajectory.GpsLog.read_csv(args.follow)
    offsets = None
    if args.lead_offset is not None or args.follow_offset is not None:
        offsets = (args.lead_offset or 0.0, args.follow_offset or 0.0)
    traj = trajectory.pair_logs(lead, follow, args.dt, args.lead_length, offsets, args.max_gap,
                                label=args.out.stem)
    write_atomic(args.out, traj.to_csv())
    if traj.metadata["flags"]:
        log.warning("trajectory flags: %s", ", ".join(traj.metadata["flags"]))
    return EXIT_OK


def cmd_gps_validate(args):
    for p in (args.a, args.b):
        if not p.is_file():
            raise UsageError(f"GPS log not found: {p}")
    report = trajectory.colocated_stats(trajectory.GpsLog.read_csv(args.a), trajectory.GpsLog.read_csv(args.b),
                                        args.true_separation, args.dt, args.bins)
    write_atomic(args.out, report.to_json() + "\n")
    return EXIT_OK


def cmd_synthesize(args):
    params = _params_from_args(args)
    lead = profiles.builtin(args.profile, args.dt, args.cycles, duration=args.duration)
    traj = calibration.synthesize(params, lead, dt=args.dt, noise_std=args.noise, seed=args.seed,
                                  label=args.profile)
    write_atomic(args.out, traj.to_csv())
    return EXIT_OK


# --- parser -------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="ovrv", description="ACC car-following model toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a follower or platoon behind a lead profile")
    _add_param_args(p)
    p.add_argument("--profile", default="step", choices=profiles.BUILTIN_NAMES + ("sinusoid",),
                   help="built-in lead profile (default: step)")
    p.add_argument("--lead-csv", type=Path, help="lead profile CSV (t,velocity_mps); overrides --profile")
    p.add_argument("--cycles", type=int, default=1, help="repetitions of the built-in profile")
    p.add_argument("--duration", type=float, help="total duration [s]")
    p.add_argument("--followers", type=int, default=1, help="number of followers")
    p.add_argument("--dt", type=float, default=0.1, help="time step [s]")
    p.add_argument("--integrator", choices=platoon.INTEGRATORS, default="euler")
    p.add_argument("--transient", type=float, default=0.0, help="seconds excluded from the metrics")
    p.add_argument("--omega", type=float, default=0.204, help="sinusoid frequency [rad/s]")
    p.add_argument("--amplitude", type=float, default=1.0, help="sinusoid amplitude [m/s]")
    p.add_argument("--v-star", type=float, default=20.0, help="sinusoid mean velocity [m/s]")
    p.add_argument("--warmup", type=float, default=20.0, help="constant hold before the sinusoid [s]")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stability", help="string stability report, Bode curve and parameter sweeps")
    _add_param_args(p)
    p.add_argument("--bode", action="store_true", help="also write bode.csv")
    p.add_argument("--omega-min", type=float, default=stability.DEFAULT_OMEGA_MIN)
    p.add_argument("--omega-max", type=float, default=stability.DEFAULT_OMEGA_MAX)
    p.add_argument("--points", type=int, default=stability.DEFAULT_N_POINTS)
    p.add_argument("--sweep", nargs=3, metavar="AXIS",
                   help="lambda2 grid, e.g. k1=0.1:1 k2=0.1:1 tau_e=0.5,1,2")
    p.add_argument("--resolution", type=int, default=50, help="points per lo:hi sweep range")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("calibrate", help="fit model parameters to trajectory CSVs")
    p.add_argument("trajectories", nargs="+", type=Path, help="trajectory CSV files or directories")
    p.add_argument("--seed", type=int, required=True, help="random seed for the initial points")
    p.add_argument("--starts", type=int, help="number of random starts (default 100)")
    p.add_argument("--config", type=Path, help="JSON with bounds, n_starts, split, dt")
    p.add_argument("--split", type=float, help="training fraction of each trajectory (default 0.5)")
    p.add_argument("--dt", type=float, help="sampling interval [s] (default: from data)")
    p.add_argument("--setting", default="", help="following-setting label for the error table")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("profile", help="write a built-in lead velocity profile as CSV")
    p.add_argument("--name", required=True, choices=profiles.BUILTIN_NAMES)
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--cycles", type=int, default=1)
    p.add_argument("--duration", type=float, help="truncate or pad to this duration [s]")
    p.add_argument("--ramp", type=float, help="ramp transitions at this acceleration [m/s^2]")
    p.add_argument("--spec-out", type=Path, help="also write the profile spec as JSON")
    p.add_argument("--out", type=Path, required=True, help="output CSV")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("ingest", help="pair lead and follower GPS logs into a trajectory CSV")
    p.add_argument("--lead", type=Path, required=True, help="lead GPS CSV (t_s,lat_deg,lon_deg,vel_mps)")
    p.add_argument("--follow", type=Path, required=True, help="follower GPS CSV")
    p.add_argument("--lead-length", type=float, default=0.0, help="lead vehicle length [m]")
    p.add_argument("--lead-offset", type=float, help="lead antenna distance behind its front bumper [m]")
    p.add_argument("--follow-offset", type=float, help="follower antenna distance behind its front bumper [m]")
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--max-gap", type=float, default=trajectory.DEFAULT_MAX_GAP_S,
                   help="largest tolerated hole in a log [s]")
    p.add_argument("--out", type=Path, required=True, help="output trajectory CSV")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("gps-validate", help="accuracy statistics for two co-located receivers")
    p.add_argument("--a", type=Path, required=True, help="first GPS CSV")
    p.add_argument("--b", type=Path, required=True, help="second GPS CSV")
    p.add_argument("--true-separation", type=float, required=True, help="known antenna distance [m]")
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--bins", type=int, default=30)
    p.add_argument("--out", type=Path, required=True, help="output JSON")
    p.set_defaults(func=cmd_gps_validate)

    p = sub.add_parser("synthesize", help="generate a model-consistent trajectory CSV")
    _add_param_args(p)
    p.add_argument("--profile", default="F", choices=profiles.BUILTIN_NAMES)
    p.add_argument("--cycles", type=int, default=7)
    p.add_argument("--duration", type=float, default=400.0)
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--noise", type=float, default=0.0, help="follower velocity noise std [m/s]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True, help="output trajectory CSV")
    p.set_defaults(func=cmd_synthesize)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.exit(EXIT_USAGE, f"ovrv {args.command}: error: {exc}\n")
    except (SingularityError, CalibrationError, FloatingPointError) as exc:
        print(f"ovrv {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OvrvError, OSError, json.JSONDecodeError) as exc:
        print(f"ovrv {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
