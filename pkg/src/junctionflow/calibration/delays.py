"""Coupling-delay estimation and application on the 0.25 s data grid."""

from __future__ import annotations

import numpy as np

from ..errors import DomainError
from .errors import rms_norm

GRID_DT = 0.25
MAX_TAU2 = 5.0
MAX_TAU3 = 25.0


def _steps(tau: float, dt: float) -> int:
    k = round(tau / dt)
    if abs(k * dt - tau) > 1e-9 * max(1.0, abs(tau)):
        raise DomainError(f"delay {tau} is not a multiple of the grid size {dt}")
    return int(k)


def shifted_support(n: int, a: int, b: int) -> tuple[int, int]:
    """Index range [lo, hi) such that i, i + a and i + b all lie in [0, n)."""
    return max(0, -a, -b), min(n, n - a, n - b)


def kirchhoff_residual(f1, f2, f3, tau2: float, tau3: float, dt: float = GRID_DT) -> float:
    """RMS over the common support of f1(t) + f2(t + tau2) - f3(t + tau3)."""
    f1, f2, f3 = (np.asarray(f, dtype=float) for f in (f1, f2, f3))
    a, b = _steps(tau2, dt), _steps(tau3, dt)
    lo, hi = shifted_support(len(f1), a, b)
    if hi <= lo:
        raise DomainError(f"no overlap for delays ({tau2}, {tau3})")
    return rms_norm(f1[lo:hi] + f2[lo + a : hi + a] - f3[lo + b : hi + b])


def estimate_delays(
    f1, f2, f3, dt: float = GRID_DT, max_tau2: float = MAX_TAU2, max_tau3: float = MAX_TAU3
) -> tuple[float, float]:
    """Exhaustive grid search for the delays best restoring Kirchhoff's law.

    Among (numerically) equal minima the smallest |tau3|, then |tau2| wins.
    """
    f1, f2, f3 = (np.asarray(f, dtype=float) for f in (f1, f2, f3))
    n = len(f1)
    if not (len(f2) == len(f3) == n):
        raise DomainError("flux series differ in length")
    k2, k3 = int(np.floor(max_tau2 / dt + 1e-9)), int(np.floor(max_tau3 / dt + 1e-9))
    if n <= k2 + k3:
        raise DomainError(f"series of {n} points too short for delays up to ({max_tau2}, {max_tau3})")
    values = np.empty((2 * k2 + 1, 2 * k3 + 1))
    for i, a in enumerate(range(-k2, k2 + 1)):
        for j, b in enumerate(range(-k3, k3 + 1)):
            lo, hi = shifted_support(n, a, b)
            r = f1[lo:hi] + f2[lo + a : hi + a] - f3[lo + b : hi + b]
            values[i, j] = np.sqrt(np.dot(r, r) / (hi - lo))
    best = values.min()
    tol = 1e-12 * max(1.0, best) + 1e-12 * float(np.max(np.abs(f3), initial=0.0))
    cand = np.argwhere(values <= best + tol)
    taus = [((a - k2) * dt, (b - k3) * dt) for a, b in cand]
    tau2, tau3 = min(taus, key=lambda t: (abs(t[1]), abs(t[0]), t[1], t[0]))
    return float(tau2), float(tau3)


def apply_delays(series, tau2: float, tau3: float, dt: float = GRID_DT, times=None):
    """Shift road-2 and road-3 signals by their delays and trim to the common support.

    ``series`` is a sequence of three arrays (or (n, ...) arrays per road) sharing
    one time grid. Returns ``(shifted, times)`` where ``times`` refers to road 1.
    """
    arrs = [np.asarray(s) for s in series]
    n = len(arrs[0])
    a, b = _steps(tau2, dt), _steps(tau3, dt)
    lo, hi = shifted_support(n, a, b)
    if hi <= lo:
        raise DomainError(f"empty common support for delays ({tau2}, {tau3})")
    shifted = [arrs[0][lo:hi], arrs[1][lo + a : hi + a], arrs[2][lo + b : hi + b]]
    t = np.arange(n) * dt if times is None else np.asarray(times)
    return shifted, t[lo:hi]
