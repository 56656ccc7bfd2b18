"""Empirical densities, velocities and fluxes in the control volumes."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .. import units
from ..calibration.delays import GRID_DT, apply_delays as _shift
from ..calibration.errors import Samples
from ..errors import ConfigError, DomainError
from ..kvfile import header_lines
from .geometry import ControlVolume, JunctionGeometry
from .trajectory import Dataset

log = logging.getLogger(__name__)

SERIES_KIND = "empirical-series"


def _positions(dataset: Dataset, t: float):
    pts = np.array([tr.position(t) for tr in dataset.trajectories], dtype=float).reshape(-1, 2)
    return pts[:, 0], pts[:, 1]


def empirical_density(dataset: Dataset, volume: ControlVolume, t: float) -> float:
    """Vehicles inside the closed volume at time t per km of its diameter."""
    if not dataset.trajectories:
        return 0.0
    x, y = _positions(dataset, t)
    count = int(np.count_nonzero(volume.contains(x, y)))
    return units.per_m_to_per_km(count / volume.diameter)


def empirical_velocity(dataset: Dataset, volume: ControlVolume, t: float) -> float:
    """Mean speed (km/h) of the vehicles inside the volume; 0 when it is empty."""
    speeds = []
    for tr in dataset.trajectories:
        x, y = tr.position(t)
        if volume.contains(x, y):
            speeds.append(float(tr.speed(t)))
    return units.ms_to_kmh(float(np.mean(speeds))) if speeds else 0.0


@dataclass
class EmpiricalSeries:
    """Per-road signals on a 0.25 s grid; arrays have shape (n, 3)."""

    dataset_id: int
    times: np.ndarray
    density: np.ndarray  # veh/km
    velocity: np.ndarray  # km/h
    tau2: float = 0.0
    tau3: float = 0.0

    @property
    def flux(self) -> np.ndarray:
        """veh/h"""
        return self.density * self.velocity

    def __len__(self):
        return len(self.times)

    def shifted(self, tau2: float, tau3: float) -> "EmpiricalSeries":
        """Apply coupling delays to an unshifted series (road 1 is the reference)."""
        if self.tau2 or self.tau3:
            raise DomainError("series already carries delays")
        (d1, d2, d3), times = _shift([self.density[:, k] for k in range(3)], tau2, tau3, GRID_DT, self.times)
        (v1, v2, v3), _ = _shift([self.velocity[:, k] for k in range(3)], tau2, tau3, GRID_DT, self.times)
        return replace(
            self,
            times=times,
            density=np.stack([d1, d2, d3], axis=1),
            velocity=np.stack([v1, v2, v3], axis=1),
            tau2=float(tau2),
            tau3=float(tau3),
        )

    def samples(self, fds=None) -> Samples:
        """Training pairs (densities -> fluxes), densities clipped to rho_max if ``fds`` given."""
        rho = self.density.copy()
        if fds is not None:
            cap = np.array([fd.rho_max for fd in fds])
            over = rho > cap
            if over.any():
                log.warning("dataset %s: %d densities above rho_max clipped", self.dataset_id, int(over.sum()))
            rho = np.minimum(rho, cap)
        return Samples(rho, self.flux, self.times)


def compute_series(dataset: Dataset, geometry: JunctionGeometry, dt: float = GRID_DT) -> EmpiricalSeries:
    """Evaluate density and mean speed per volume on the grid k * dt of [0, duration]."""
    times = dataset.grid(dt)
    n = len(times)
    counts = np.zeros((n, 3))
    speed_sum = np.zeros((n, 3))
    for tr in dataset.trajectories:
        lo = np.searchsorted(times, tr.t_start - 1e-12)
        hi = np.searchsorted(times, tr.t_end + 1e-12)
        if hi <= lo:
            continue
        t = times[lo:hi]
        x, y = tr.position(t)
        v = tr.speed(t)
        for k, vol in enumerate(geometry.volumes):
            inside = vol.contains(x, y)
            counts[lo:hi, k] += inside
            speed_sum[lo:hi, k] += np.where(inside, v, 0.0)
    diam = np.array([vol.diameter for vol in geometry.volumes])
    density = units.per_m_to_per_km(counts / diam)
    with np.errstate(invalid="ignore", divide="ignore"):
        velocity = np.where(counts > 0, units.ms_to_kmh(speed_sum / np.maximum(counts, 1)), 0.0)
    return EmpiricalSeries(dataset.dataset_id, times, density, velocity)


def write_series(path, series: EmpiricalSeries, meta=None) -> None:
    info = {"dataset": series.dataset_id, "tau2": series.tau2, "tau3": series.tau3}
    info.update(meta or {})
    lines = header_lines(SERIES_KIND, meta=info)
    lines.append("t,rho1,rho2,rho3,v1,v2,v3,f1,f2,f3")
    f = series.flux
    for i, t in enumerate(series.times):
        vals = [t, *series.density[i], *series.velocity[i], *f[i]]
        lines.append(",".join(repr(float(v)) for v in vals))
    Path(path).write_text("\n".join(lines) + "\n")


def read_series(path) -> EmpiricalSeries:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"series file not found: {path}")
    text = path.read_text().splitlines()
    if not text or not text[0].startswith(f"# junctionflow {SERIES_KIND} "):
        raise ConfigError(f"{path}: not an empirical-series file")
    meta = {}
    for line in text[1:]:
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
    rows = [line for line in text if line and not line.startswith("#")][1:]
    data = np.array([[float(v) for v in r.split(",")] for r in rows]).reshape(-1, 10)
    return EmpiricalSeries(
        int(meta["dataset"]),
        data[:, 0],
        data[:, 1:4],
        data[:, 4:7],
        float(meta.get("tau2", 0.0)),
        float(meta.get("tau3", 0.0)),
    )
