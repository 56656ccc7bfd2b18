"""Piecewise-cubic vehicle trajectories and their CSV storage.

A trajectory holds break points t_0 < ... < t_n and, per segment i, the
coefficients (c0, c1, c2, c3) of x and y in the local variable s = t - t_i.
Outside [t_0, t_n] the vehicle is absent; evaluation returns NaN there.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from ..errors import ConfigError, DomainError
from ..kvfile import header_lines

TRAJECTORY_KIND = "trajectories"
COLUMNS = ("vehicle", "t_start", "t_end", "x0", "x1", "x2", "x3", "y0", "y1", "y2", "y3")


def _horner(coef, s):
    return ((coef[..., 3] * s + coef[..., 2]) * s + coef[..., 1]) * s + coef[..., 0]


def _horner_d(coef, s):
    return (3.0 * coef[..., 3] * s + 2.0 * coef[..., 2]) * s + coef[..., 1]


@dataclass
class Trajectory:
    vehicle_id: int
    breaks: np.ndarray  # (n + 1,)
    x_coef: np.ndarray  # (n, 4), ascending powers
    y_coef: np.ndarray  # (n, 4)

    def __post_init__(self):
        self.breaks = np.asarray(self.breaks, dtype=float)
        self.x_coef = np.asarray(self.x_coef, dtype=float).reshape(-1, 4)
        self.y_coef = np.asarray(self.y_coef, dtype=float).reshape(-1, 4)
        n = len(self.breaks) - 1
        if n < 1 or self.x_coef.shape[0] != n or self.y_coef.shape[0] != n:
            raise DomainError(f"vehicle {self.vehicle_id}: inconsistent segment count")
        if np.any(np.diff(self.breaks) <= 0):
            raise DomainError(f"vehicle {self.vehicle_id}: break points must increase")

    @property
    def t_start(self) -> float:
        return float(self.breaks[0])

    @property
    def t_end(self) -> float:
        return float(self.breaks[-1])

    def _segment(self, t):
        idx = np.searchsorted(self.breaks, t, side="right") - 1
        return np.clip(idx, 0, len(self.breaks) - 2)

    def _eval(self, t, extrapolate: bool, deriv: bool):
        t = np.asarray(t, dtype=float)
        idx = self._segment(t)
        s = t - self.breaks[idx]
        f = _horner_d if deriv else _horner
        x, y = f(self.x_coef[idx], s), f(self.y_coef[idx], s)
        if not extrapolate:
            absent = (t < self.t_start) | (t > self.t_end)
            x = np.where(absent, np.nan, x)
            y = np.where(absent, np.nan, y)
        return x, y

    def position(self, t, extrapolate: bool = False):
        """(x, y) at time(s) t; NaN where the vehicle is absent."""
        return self._eval(t, extrapolate, deriv=False)

    def velocity(self, t, extrapolate: bool = False):
        return self._eval(t, extrapolate, deriv=True)

    def speed(self, t):
        vx, vy = self.velocity(t)
        return np.hypot(vx, vy)

    @classmethod
    def fit(cls, vehicle_id: int, t, x, y) -> "Trajectory":
        """Interpolating cubic spline through sampled positions."""
        t = np.asarray(t, dtype=float)
        if len(t) < 2:
            raise DomainError("need at least two samples to fit a trajectory")
        sx, sy = CubicSpline(t, x), CubicSpline(t, y)
        return cls(vehicle_id, t, sx.c[::-1].T.copy(), sy.c[::-1].T.copy())


@dataclass
class Dataset:
    """Trajectories recorded on [0, duration] seconds."""

    dataset_id: int
    duration: float
    trajectories: list = field(default_factory=list)

    def grid(self, dt: float = 0.25) -> np.ndarray:
        n = int(np.floor(self.duration / dt + 1e-9))
        return np.arange(n + 1) * dt


def write_trajectories(path, dataset: Dataset, meta=None) -> None:
    info = {"dataset": dataset.dataset_id, "duration": repr(float(dataset.duration))}
    info.update(meta or {})
    with open(path, "w", newline="") as fh:
        for line in header_lines(TRAJECTORY_KIND, meta=info):
            fh.write(line + "\n")
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for tr in dataset.trajectories:
            for i in range(len(tr.breaks) - 1):
                w.writerow(
                    [tr.vehicle_id, repr(float(tr.breaks[i])), repr(float(tr.breaks[i + 1]))]
                    + [repr(float(c)) for c in tr.x_coef[i]]
                    + [repr(float(c)) for c in tr.y_coef[i]]
                )


def read_trajectories(path) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"trajectory file not found: {path}")
    meta, rows = {}, []
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith(f"# junctionflow {TRAJECTORY_KIND} "):
            raise ConfigError(f"{path}: not a trajectory file")
        body = []
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
            else:
                body.append(line)
    reader = csv.reader(body)
    header = next(reader, None)
    if tuple(header or ()) != COLUMNS:
        raise ConfigError(f"{path}: unexpected columns {header}")
    rows = [r for r in reader if r]
    by_vehicle: dict[int, list] = {}
    for r in rows:
        by_vehicle.setdefault(int(r[0]), []).append([float(v) for v in r[1:]])
    trajectories = []
    for vid, segs in by_vehicle.items():
        segs = np.array(sorted(segs))
        if np.any(np.abs(segs[1:, 0] - segs[:-1, 1]) > 1e-9):
            raise ConfigError(f"{path}: vehicle {vid} has non-contiguous segments")
        breaks = np.r_[segs[:, 0], segs[-1, 1]]
        trajectories.append(Trajectory(vid, breaks, segs[:, 2:6], segs[:, 6:10]))
    try:
        return Dataset(int(meta["dataset"]), float(meta["duration"]), trajectories)
    except KeyError as exc:
        raise ConfigError(f"{path}: missing header field {exc}") from None
