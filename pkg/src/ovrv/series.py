"""Uniformly sampled scalar time series and their CSV form."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError

UNIFORM_RTOL = 1e-6


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Samples ``values[i]`` taken at ``t0 + i * dt``."""

    values: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise FormatError("time series must be one-dimensional")
        if not self.dt > 0:
            raise FormatError(f"dt must be positive, got {self.dt}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dt", float(self.dt))

    def __len__(self):
        return len(self.values)

    @property
    def t(self):
        return self.t0 + self.dt * np.arange(len(self.values))

    @property
    def duration(self):
        return self.dt * (len(self.values) - 1)

    def head(self, n):
        return TimeSeries(self.values[:n], self.dt, self.t0)

    @classmethod
    def from_samples(cls, t, values):
        t = np.asarray(t, dtype=float)
        if len(t) != len(values):
            raise FormatError("time and value columns differ in length")
        if len(t) < 2:
            raise FormatError("need at least two samples to infer dt")
        dt = t[1] - t[0]
        check_uniform(t, dt)
        return cls(np.asarray(values, dtype=float), dt, float(t[0]))

    def to_csv(self, value_header="velocity_mps"):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", value_header])
        for t, v in zip(self.t, self.values):
            writer.writerow([repr(float(t)), repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, value_header="velocity_mps"):
        t, values = [], []
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None or "t" not in reader.fieldnames or value_header not in reader.fieldnames:
            raise FormatError(f"profile CSV needs header 't,{value_header}'")
        for row in reader:
            t.append(float(row["t"]))
            values.append(float(row[value_header]))
        return cls.from_samples(t, values)

    @classmethod
    def read_csv(cls, path, value_header="velocity_mps"):
        return cls.from_csv(Path(path).read_text(), value_header)


def check_uniform(t, dt, rtol=UNIFORM_RTOL):
    steps = np.diff(np.asarray(t, dtype=float))
    if len(steps) and not np.allclose(steps, dt, rtol=rtol, atol=0):
        raise FormatError(f"series is not uniformly sampled at dt={dt}")
