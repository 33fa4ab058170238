"""GPS log ingestion, Haversine space-gap and paired trajectories."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError, SamplingGapError
from .series import check_uniform

EARTH_RADIUS_M = 6_371_000.0
GPS_HEADER = ("t_s", "lat_deg", "lon_deg", "vel_mps")
TRAJECTORY_HEADER = ("t_s", "v_lead_mps", "v_follow_mps", "space_gap_m")
DEFAULT_MAX_GAP_S = 1.0


def _check_coords(lat, lon):
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    if not (np.all(np.isfinite(lat)) and np.all(np.isfinite(lon))):
        raise DomainError("coordinates must be finite")
    if np.any(np.abs(lat) > 90) or np.any(np.abs(lon) > 180):
        raise DomainError("latitude must lie in [-90, 90] and longitude in [-180, 180]")
    return lat, lon


def haversine(lat1, lon1, lat2, lon2):
    """Great-circle distance in metres between points given in degrees."""
    lat1, lon1 = _check_coords(lat1, lon1)
    lat2, lon2 = _check_coords(lat2, lon2)
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = phi2 - phi1
    dlmb = np.radians(lon2 - lon1)
    h = np.sin(dphi / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2) ** 2
    d = 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))
    return float(d) if np.ndim(d) == 0 else d


@dataclass(frozen=True, eq=False)
class GpsLog:
    t: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    vel: np.ndarray
    nominal_rate: float = 10.0
    source: str = ""

    def __post_init__(self):
        arrays = [np.asarray(getattr(self, k), dtype=float) for k in ("t", "lat", "lon", "vel")]
        if len({len(a) for a in arrays}) != 1:
            raise FormatError("GPS log columns differ in length")
        if len(arrays[0]) == 0:
            raise FormatError("GPS log is empty")
        if np.any(np.diff(arrays[0]) <= 0):
            raise FormatError("GPS timestamps must be strictly increasing")
        _check_coords(arrays[1], arrays[2])
        for k, a in zip(("t", "lat", "lon", "vel"), arrays):
            object.__setattr__(self, k, a)

    def __len__(self):
        return len(self.t)

    @classmethod
    def from_csv(cls, text, nominal_rate=10.0, source=""):
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != GPS_HEADER:
            raise FormatError(f"GPS CSV needs header {','.join(GPS_HEADER)}")
        rows = [[float(x) for x in row] for row in reader if row]
        if not rows:
            raise FormatError("GPS log is empty")
        cols = np.array(rows).T
        return cls(*cols, nominal_rate=nominal_rate, source=source)

    @classmethod
    def read_csv(cls, path, nominal_rate=10.0):
        return cls.from_csv(Path(path).read_text(), nominal_rate, source=str(path))

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(GPS_HEADER)
        for row in zip(self.t, self.lat, self.lon, self.vel):
            writer.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    def sampling_gaps(self, max_gap):
        steps = np.diff(self.t)
        idx = np.nonzero(steps > max_gap)[0]
        return [(float(self.t[i]), float(self.t[i + 1])) for i in idx]

    def resample(self, grid):
        """Linear interpolation of every channel onto ``grid`` (inside the log span)."""
        return (
            np.interp(grid, self.t, self.lat),
            np.interp(grid, self.t, self.lon),
            np.interp(grid, self.t, self.vel),
        )


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    v_lead: np.ndarray
    v_follow: np.ndarray
    space_gap: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        arrays = [np.asarray(getattr(self, k), dtype=float) for k in ("t", "v_lead", "v_follow", "space_gap")]
        if len({len(a) for a in arrays}) != 1:
            raise FormatError("trajectory columns differ in length")
        if len(arrays[0]) < 2:
            raise FormatError("trajectory needs at least two samples")
        check_uniform(arrays[0], arrays[0][1] - arrays[0][0])
        if not np.all(np.isfinite(arrays[3])):
            raise FormatError("space gap must be finite")
        for k, a in zip(("t", "v_lead", "v_follow", "space_gap"), arrays):
            a.setflags(write=False)
            object.__setattr__(self, k, a)

    def __len__(self):
        return len(self.t)

    @property
    def dt(self):
        return float(self.t[1] - self.t[0])

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRAJECTORY_HEADER)
        for row in zip(self.t, self.v_lead, self.v_follow, self.space_gap):
            writer.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, metadata=None):
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRAJECTORY_HEADER:
            raise FormatError(f"trajectory CSV needs header {','.join(TRAJECTORY_HEADER)}")
        rows = [[float(x) for x in row] for row in reader if row]
        if not rows:
            raise FormatError("trajectory CSV has no rows")
        return cls(*np.array(rows).T, metadata=dict(metadata or {}))

    @classmethod
    def read_csv(cls, path):
        path = Path(path)
        return cls.from_csv(path.read_text(), metadata={"label": path.stem, "source_files": [str(path)]})


def _uniform_grid(t_start, t_end, dt):
    n = int(math.floor((t_end - t_start) / dt + 1e-9)) + 1
    return t_start + dt * np.arange(n)


def pair_logs(lead: GpsLog, follow: GpsLog, dt=0.1, lead_length=0.0, antenna_offsets=None,
              max_gap=DEFAULT_MAX_GAP_S, label="") -> Trajectory:
    """Align two GPS logs on a common uniform grid and derive the space-gap.

    ``antenna_offsets = (lead, follow)`` are each antenna's distance behind
    its own vehicle's front bumper [m].  The space-gap is

        antenna distance + lead offset - follow offset - lead_length
    """
    if antenna_offsets is None:
        warnings.warn("antenna offsets not given; assuming antennas at the front bumpers", stacklevel=2)
        antenna_offsets = (0.0, 0.0)
    lead_off, follow_off = antenna_offsets
    holes = [("lead", a, b) for a, b in lead.sampling_gaps(max_gap)]
    holes += [("follow", a, b) for a, b in follow.sampling_gaps(max_gap)]
    if holes:
        raise SamplingGapError(f"{len(holes)} sampling gap(s) exceed {max_gap} s", holes)
    t_start = max(lead.t[0], follow.t[0])
    t_end = min(lead.t[-1], follow.t[-1])
    if t_end - t_start < dt:
        raise FormatError("GPS logs do not overlap in time")
    grid = _uniform_grid(t_start, t_end, dt)
    lat_l, lon_l, v_l = lead.resample(grid)
    lat_f, lon_f, v_f = follow.resample(grid)
    gap = haversine(lat_l, lon_l, lat_f, lon_f) + lead_off - follow_off - lead_length
    flags = []
    if np.any(gap <= 0):
        flags.append("implausible_gap")
    meta = {
        "label": label,
        "source_files": [lead.source, follow.source],
        "lead_length_m": lead_length,
        "antenna_offsets_m": [lead_off, follow_off],
        "flags": flags,
    }
    return Trajectory(grid - t_start, v_l, v_f, np.atleast_1d(gap), meta)


@dataclass(frozen=True)
class ValidationReport:
    mean_separation_m: float
    true_separation_m: float
    mean_position_error_m: float
    mean_abs_velocity_diff_mps: float
    n_samples: int
    position_hist_edges: list
    position_hist_counts: list
    velocity_hist_edges: list
    velocity_hist_counts: list

    def to_dict(self):
        return dict(self.__dict__)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def colocated_stats(log_a: GpsLog, log_b: GpsLog, true_separation, dt=0.1, bins=30,
                    max_gap=DEFAULT_MAX_GAP_S) -> ValidationReport:
    """Accuracy statistics for two receivers mounted a known distance apart."""
    holes = log_a.sampling_gaps(max_gap) + log_b.sampling_gaps(max_gap)
    if holes:
        raise SamplingGapError(f"{len(holes)} sampling gap(s) exceed {max_gap} s", holes)
    t_start = max(log_a.t[0], log_b.t[0])
    t_end = min(log_a.t[-1], log_b.t[-1])
    if t_end < t_start:
        raise FormatError("GPS logs do not overlap in time")
    grid = _uniform_grid(t_start, t_end, dt)
    lat_a, lon_a, v_a = log_a.resample(grid)
    lat_b, lon_b, v_b = log_b.resample(grid)
    sep = np.atleast_1d(haversine(lat_a, lon_a, lat_b, lon_b))
    pos_err = sep - true_separation
    dv = v_a - v_b
    pos_counts, pos_edges = np.histogram(pos_err, bins=bins)
    vel_counts, vel_edges = np.histogram(dv, bins=bins)
    return ValidationReport(
        mean_separation_m=float(sep.mean()),
        true_separation_m=float(true_separation),
        mean_position_error_m=float(np.abs(pos_err).mean()),
        mean_abs_velocity_diff_mps=float(np.abs(dv).mean()),
        n_samples=int(len(grid)),
        position_hist_edges=pos_edges.tolist(),
        position_hist_counts=pos_counts.tolist(),
        velocity_hist_edges=vel_edges.tolist(),
        velocity_hist_counts=vel_counts.tolist(),
    )
