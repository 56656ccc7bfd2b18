"""Boundary-crossing events, per-second histograms and their kernel smoothing."""

from __future__ import annotations

import bisect
import math
import warnings

import numpy as np
from scipy.stats import norm

from ..errors import DomainError
from .geometry import JunctionGeometry
from .trajectory import Dataset, Trajectory

KDE_BANDWIDTH = 0.75
EXTRAPOLATION_CAP = 30.0


def _cubic_roots(coef, level, s_lo, s_hi):
    """Real roots of sum_i coef[i] s^i = level inside [s_lo, s_hi]."""
    c = np.array(coef, dtype=float)
    c[0] -= level
    poly = np.polynomial.Polynomial(c)
    if np.all(c[1:] == 0.0):
        return np.array([])
    roots = poly.roots()
    real = roots[np.abs(roots.imag) <= 1e-9 * np.maximum(1.0, np.abs(roots.real))].real
    return np.sort(real[(real >= s_lo - 1e-12) & (real <= s_hi + 1e-12)])


def crossing_time(tr: Trajectory, x_b: float, cap: float = EXTRAPOLATION_CAP):
    """First time the trajectory reaches x = x_b, extrapolating its end pieces.

    Inside the recorded interval the first crossing is returned. A vehicle
    already past x_b at its first break point is traced back along its first
    piece by at most ``cap`` seconds; one not yet there at the end is traced
    forward along its last piece. Returns None if no crossing is found.
    """
    b = tr.breaks
    x_knots = np.r_[tr.x_coef[:, 0], tr.position(b[-1])[0]]
    if x_knots[0] >= x_b:
        roots = _cubic_roots(tr.x_coef[0], x_b, -cap, 0.0)
        return float(b[0] + roots[-1]) if roots.size else None
    for i in range(len(b) - 1):
        if x_knots[i + 1] >= x_b:
            roots = _cubic_roots(tr.x_coef[i], x_b, 0.0, b[i + 1] - b[i])
            if roots.size:
                return float(b[i] + roots[0])
    last = len(b) - 2
    roots = _cubic_roots(tr.x_coef[last], x_b, b[-1] - b[last], b[-1] - b[last] + cap)
    return float(b[last] + roots[0]) if roots.size else None


def boundary_events(dataset: Dataset, geometry: JunctionGeometry, cap: float = EXTRAPOLATION_CAP) -> dict:
    """Crossing times per road: entries of roads 1 and 2 at the left boundary,
    exits of road 3 at the right boundary. Road 1 vs 2 is decided by the
    lateral position at the crossing."""
    events = {1: [], 2: [], 3: []}
    skipped = 0
    for tr in dataset.trajectories:
        t_in = crossing_time(tr, geometry.left_boundary, cap)
        t_out = crossing_time(tr, geometry.right_boundary, cap)
        if t_in is None and t_out is None:
            skipped += 1
            continue
        if t_in is not None:
            y = float(tr.position(t_in, extrapolate=True)[1])
            events[geometry.road_at(y)].append(t_in)
        if t_out is not None:
            events[3].append(t_out)
    if skipped:
        warnings.warn(
            f"dataset {dataset.dataset_id}: {skipped} vehicle(s) never reach a network boundary "
            f"within {cap} s of extrapolation; skipped",
            RuntimeWarning,
        )
    return {k: np.sort(np.array(v, dtype=float)) for k, v in events.items()}


def boundary_histogram(dataset: Dataset, geometry: JunctionGeometry, road: int, events=None) -> np.ndarray:
    """Crossings on ``road`` counted per second bin [i, i+1) of the recording."""
    if road not in (1, 2, 3):
        raise DomainError(f"road must be 1, 2 or 3, got {road}")
    times = (events or boundary_events(dataset, geometry))[road]
    nbins = int(np.ceil(dataset.duration - 1e-9))
    counts = np.zeros(nbins, dtype=int)
    inside = times[(times >= 0.0) & (times < nbins)]
    np.add.at(counts, np.floor(inside).astype(int), 1)
    return counts


def kde_boundary_flux(event_times, t, bandwidth: float = KDE_BANDWIDTH):
    """Gaussian kernel estimate of the event rate (vehicles per second) at t."""
    if not bandwidth > 0:
        raise DomainError("bandwidth must be positive")
    ev = np.asarray(event_times, dtype=float).ravel()
    t = np.asarray(t, dtype=float)
    if ev.size == 0:
        return np.zeros_like(t) if t.ndim else 0.0
    out = norm.pdf((t[..., None] - ev) / bandwidth).sum(axis=-1) / bandwidth
    return float(out) if out.ndim == 0 else out


class KdeInflow:
    """Callable rate t -> KDE flux (veh/s), summing only nearby events.

    Called once per solver step with few events in reach, so plain Python
    beats array overhead here.
    """

    def __init__(self, event_times, bandwidth: float = KDE_BANDWIDTH, reach: float = 10.0):
        if not bandwidth > 0:
            raise DomainError("bandwidth must be positive")
        self.events = np.sort(np.asarray(event_times, dtype=float).ravel())
        self._ev = self.events.tolist()
        self.h = bandwidth
        self.reach = reach * bandwidth
        self._norm = 1.0 / (bandwidth * math.sqrt(2.0 * math.pi))

    def __call__(self, t: float) -> float:
        ev = self._ev
        lo = bisect.bisect_left(ev, t - self.reach)
        hi = bisect.bisect_right(ev, t + self.reach)
        inv = 1.0 / self.h
        total = 0.0
        for e in ev[lo:hi]:
            z = (t - e) * inv
            total += math.exp(-0.5 * z * z)
        return total * self._norm
