"""Least-squares Greenshields fit with the stagnation-density bound."""

from __future__ import annotations

import logging
import warnings

import numpy as np

from ..errors import DomainError
from ..junction import FundamentalDiagram
from .de import DifferentialEvolutionConfig, differential_evolution

log = logging.getLogger(__name__)

VEHICLE_SPACING_M = 7.5


def stagnation_bound(lanes: int) -> float:
    """Upper bound on rho_max in veh/km for a road with ``lanes`` lanes."""
    return lanes * 1000.0 / VEHICLE_SPACING_M


def fd_objective(v_max: float, rho_max: float, rho, v) -> float:
    r = v_max - (v_max / rho_max) * rho - v
    return float(np.dot(r, r))


def best_vmax(rho_max: float, rho, v) -> float:
    """Optimal v_max for fixed rho_max (linear least squares in v_max)."""
    a = 1.0 - rho / rho_max
    denom = float(np.dot(a, a))
    if denom == 0.0:
        return float(np.mean(v)) if len(v) else 0.0
    return float(np.dot(a, v) / denom)


def fit_fundamental_diagram(rho, v, lanes: int, config: DifferentialEvolutionConfig | None = None) -> FundamentalDiagram:
    """Fit (v_max, rho_max) to density (veh/km) / velocity (km/h) samples.

    Zero-density samples are dropped. The outer search over rho_max is a
    bounded differential evolution with v_max profiled out in closed form; the
    result is compared against the closed-form candidates (unconstrained
    regression line and the bound-active solution) and the best is kept.
    """
    rho = np.asarray(rho, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    keep = rho > 0
    rho, v = rho[keep], v[keep]
    if rho.size == 0:
        raise DomainError("no samples with positive density")
    bound = stagnation_bound(lanes)

    if np.ptp(rho) == 0.0:
        warnings.warn("all samples share one density; rho_max set to the stagnation bound", RuntimeWarning)
        return FundamentalDiagram(max(best_vmax(bound, rho, v), np.finfo(float).tiny), bound)

    candidates = [(best_vmax(bound, rho, v), bound)]
    slope, intercept = np.polyfit(rho, v, 1)
    if slope < 0 < intercept and -intercept / slope <= bound:
        candidates.append((float(intercept), float(-intercept / slope)))

    lower = min(0.5 * float(rho.max()), bound)
    cfg = config or DifferentialEvolutionConfig(pop_size=12, generations=60, seed=0)
    res = differential_evolution(
        lambda x: fd_objective(best_vmax(x[0], rho, v), x[0], rho, v), [(lower, bound)], cfg
    )
    rho_max = float(res.x[0])
    if bound - rho_max <= 1e-9 * bound:
        rho_max = bound  # rounding at the active bound
    candidates.append((best_vmax(rho_max, rho, v), rho_max))

    feasible = [(vm, rm) for vm, rm in candidates if vm > 0 and 0 < rm <= bound]
    if not feasible:
        raise DomainError("no fundamental diagram with positive v_max fits the data")
    v_max, rho_max = min(feasible, key=lambda c: fd_objective(c[0], c[1], rho, v))
    log.debug("fd fit: v_max=%.4f rho_max=%.4f (bound %.2f)", v_max, rho_max, bound)
    return FundamentalDiagram(v_max, rho_max)
