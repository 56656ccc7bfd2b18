"""Central relaxation finite-volume scheme on the 2-to-1 network.

Roads 1 and 2 live on [-s, 0], road 3 on [0, s], each split into ``cells``
equal cells. The coupling solver supplies the three fluxes through the node
at x = 0; interior fluxes are

    F = (f(rho_l) + f(rho_r)) / 2 - lambda / 2 (rho_r - rho_l)

and lambda is chosen adaptively each step. Everything inside this module is
SI (m, s, veh/m, veh/s); coupling solvers keep their km/h interface and are
wrapped at the junction.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import units
from .errors import ConfigError, ContractError, DomainError
from .junction import AdmissibleSet, CouplingFluxes, FundamentalDiagram, admissible_contains
from .kvfile import header_lines

log = logging.getLogger(__name__)

ROAD_LENGTH = 270.28 / 2
NEG_TOL = 1e-12


class SolverError(DomainError):
    """The scheme produced NaN or clearly negative densities."""


@dataclass
class SolverConfig:
    cells: int = 200
    cfl: float = 0.24
    lambda_min: float = 10.0  # m/s
    road_length: float = ROAD_LENGTH  # m
    lambda_mode: str = "max"  # aggregation of the junction discrepancies: "max" or "min"
    check_admissible: bool = False

    def __post_init__(self):
        if self.cells < 2:
            raise ConfigError("need at least two cells per road")
        if not 0 < self.cfl < 1:
            raise ConfigError("CFL number must lie in (0, 1)")
        if not self.lambda_min > 0:
            raise ConfigError("lambda_min must be positive")
        if not self.road_length > 0:
            raise ConfigError("road length must be positive")
        if self.lambda_mode not in ("max", "min"):
            raise ConfigError("lambda_mode must be 'max' or 'min'")

    @property
    def dx(self) -> float:
        return self.road_length / self.cells


@dataclass
class NetworkState:
    rho: list  # three arrays of cell averages, veh/m
    t: float = 0.0

    def copy(self) -> "NetworkState":
        return NetworkState([r.copy() for r in self.rho], self.t)

    def mass(self, dx: float) -> float:
        return float(sum(r.sum() for r in self.rho) * dx)


@dataclass
class BoundarySpec:
    """Left condition per incoming road and right condition of road 3.

    A left entry is a callable t -> inflow (veh/s), "neumann" or "closed";
    the right entry is "neumann" or "closed".
    """

    left: tuple = ("neumann", "neumann")
    right: str = "neumann"

    def __post_init__(self):
        if len(self.left) != 2:
            raise ConfigError("need one left boundary per incoming road")
        for b in self.left:
            if not (callable(b) or b in ("neumann", "closed")):
                raise ConfigError(f"unknown left boundary {b!r}")
        if self.right not in ("neumann", "closed"):
            raise ConfigError(f"unknown right boundary {self.right!r}")


@dataclass
class StepInfo:
    dt: float
    lam: float
    junction: CouplingFluxes
    inflow: tuple  # flux through the left boundary of roads 1 and 2
    outflow: float  # flux through the right boundary of road 3


class SiCoupling:
    """Adapter: SI densities in, SI fluxes out, around a km/h coupling solver."""

    def __init__(self, solver):
        self.solver = solver

    def __call__(self, r1: float, r2: float, r3: float) -> CouplingFluxes:
        out = self.solver(
            units.per_m_to_per_km(r1), units.per_m_to_per_km(r2), units.per_m_to_per_km(r3)
        )
        return CouplingFluxes(*(units.per_h_to_per_s(float(v)) for v in out))


def _flux(fd: FundamentalDiagram, rho):
    return fd.v_max * rho * (1.0 - rho / fd.rho_max)


def interior_flux(fd: FundamentalDiagram, rho_left, rho_right, lam: float):
    """Relaxation flux between two neighbouring cells of one road."""
    rho_left = np.asarray(rho_left, dtype=float)
    rho_right = np.asarray(rho_right, dtype=float)
    out = 0.5 * (_flux(fd, rho_left) + _flux(fd, rho_right)) - 0.5 * lam * (rho_right - rho_left)
    return float(out) if out.ndim == 0 else out


def junction_flux(coupling, rho1_last: float, rho2_last: float, rho3_first: float) -> CouplingFluxes:
    """Coupling fluxes from the three cells adjacent to the node."""
    return CouplingFluxes(*(float(v) for v in coupling(rho1_last, rho2_last, rho3_first)))


def junction_discrepancy(fds, state: NetworkState, jf: CouplingFluxes) -> np.ndarray:
    r = state.rho
    return np.abs(
        [
            jf.f1 - _flux(fds[0], r[0][-1]),
            jf.f2 - _flux(fds[1], r[1][-1]),
            _flux(fds[2], r[2][0]) - jf.f3,
        ]
    )


def adaptive_lambda(fds, state: NetworkState, jf: CouplingFluxes, config: SolverConfig) -> float:
    """max(lambda_min, max |f'| over all cells, (2/dx) * aggregated junction discrepancy)."""
    char = max(float(np.max(np.abs(fd.dflux(r)))) for fd, r in zip(fds, state.rho))
    disc = junction_discrepancy(fds, state, jf)
    agg = disc.max() if config.lambda_mode == "max" else disc.min()
    return max(config.lambda_min, char, 2.0 / config.dx * float(agg))


def _left_flux(bc, fd, rho_first, t):
    if bc == "closed":
        return 0.0
    own = _flux(fd, rho_first)
    if bc == "neumann":
        return own
    v = float(bc(t))
    if v < 0:
        raise DomainError(f"negative inflow {v} at t={t}")
    return 0.5 * (own + v)


def _check_state(fds, rho, t):
    for k, (fd, r) in enumerate(zip(fds, rho)):
        if np.isnan(r).any():
            raise SolverError(f"NaN density on road {k + 1} at t={t}; state: {[x.tolist() for x in rho]}")
        tol = NEG_TOL * fd.rho_max
        low, high = r.min(), r.max()
        if low < -tol or high > fd.rho_max + tol:
            if low < -1e-6 * fd.rho_max:
                raise SolverError(
                    f"density {low} on road {k + 1} at t={t} below zero; state: {[x.tolist() for x in rho]}"
                )
            log.debug("road %d: densities clipped to [0, rho_max] at t=%g", k + 1, t)
            warnings.warn(f"road {k + 1}: densities clipped to [0, rho_max]", RuntimeWarning)
            np.clip(r, 0.0, fd.rho_max, out=r)


def step(
    state: NetworkState,
    fds: Sequence[FundamentalDiagram],
    coupling,
    config: SolverConfig,
    boundary: BoundarySpec,
    t_stop: float | None = None,
):
    """Advance one adaptive step (clipped to land on ``t_stop``). Returns (state, StepInfo)."""
    r1, r2, r3 = state.rho
    jf = junction_flux(coupling, r1[-1], r2[-1], r3[0])
    if config.check_admissible:
        g = AdmissibleSet(
            min(_flux(fds[0], min(r1[-1], fds[0].sigma)), fds[0].max_flux),
            min(_flux(fds[1], min(r2[-1], fds[1].sigma)), fds[1].max_flux),
            _flux(fds[2], max(r3[0], fds[2].sigma)),
        )
        scale = max(g.d1, g.d2, g.s3, 1e-300)
        if not admissible_contains(g, jf.f1, jf.f2, atol=1e-12 * scale) or abs(jf.f1 + jf.f2 - jf.f3) > 1e-12 * max(
            1.0, jf.f3
        ):
            raise ContractError(f"coupling fluxes {jf} not admissible for {g} at t={state.t}")
    lam = adaptive_lambda(fds, state, jf, config)
    dx = config.dx
    dt = config.cfl * dx / lam
    if t_stop is not None and state.t + dt > t_stop:
        dt = t_stop - state.t
    t = state.t
    inflow = (
        _left_flux(boundary.left[0], fds[0], r1[0], t),
        _left_flux(boundary.left[1], fds[1], r2[0], t),
    )
    outflow = 0.0 if boundary.right == "closed" else _flux(fds[2], r3[-1])
    new = []
    for k, r in enumerate(state.rho):
        fd = fds[k]
        f = _flux(fd, r)
        F = np.empty(len(r) + 1)
        F[1:-1] = 0.5 * (f[:-1] + f[1:]) - 0.5 * lam * (r[1:] - r[:-1])
        if k < 2:
            F[0], F[-1] = inflow[k], jf[k]
        else:
            F[0], F[-1] = jf.f3, outflow
        new.append(r - dt / dx * (F[1:] - F[:-1]))
    _check_state(fds, new, t + dt)
    out = NetworkState(new, t + dt)
    return out, StepInfo(dt, lam, jf, inflow, outflow)


def initial_state(fds, config: SolverConfig, fractions=(0.0, 0.0, 0.0)) -> NetworkState:
    return NetworkState([np.full(config.cells, frac * fd.rho_max) for frac, fd in zip(fractions, fds)], 0.0)


@dataclass
class SimulationLog:
    times: np.ndarray  # step start times
    dt: np.ndarray
    lam: np.ndarray
    inflow: np.ndarray  # (n, 2) boundary fluxes into roads 1 and 2 (veh/s)
    outflow: np.ndarray  # (n,) Neumann flux out of road 3 (veh/s)
    v3_model: np.ndarray  # (n,) f3 of the last cell of road 3 at the step start (veh/s)
    junction: np.ndarray  # (n, 3)


def simulate(
    fds_si,
    coupling_si,
    config: SolverConfig,
    boundary: BoundarySpec,
    t_end: float,
    state: NetworkState | None = None,
    on_step: Callable | None = None,
):
    """Run from ``state`` (zero by default) to ``t_end``. Returns (final state, SimulationLog)."""
    if state is None:
        state = initial_state(fds_si, config)
    rows = []
    while state.t < t_end - 1e-12 * max(1.0, t_end):
        v3 = _flux(fds_si[2], state.rho[2][-1])
        t0 = state.t
        state, info = step(state, fds_si, coupling_si, config, boundary, t_stop=t_end)
        rows.append((t0, info.dt, info.lam, *info.inflow, info.outflow, v3, *info.junction))
        if on_step is not None:
            on_step(state, info)
    arr = np.array(rows, dtype=float).reshape(-1, 10)
    log_ = SimulationLog(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3:5], arr[:, 5], arr[:, 6], arr[:, 7:10])
    return state, log_


def relative_l2_error(reference, model, weights) -> float:
    """||reference - model|| / ||reference|| in the weighted L2 norm; NaN if the reference vanishes."""
    reference, model, weights = (np.asarray(a, dtype=float) for a in (reference, model, weights))
    denom = float(np.sqrt(np.sum(weights * reference**2)))
    if denom == 0.0:
        return float("nan")
    return float(np.sqrt(np.sum(weights * (reference - model) ** 2)) / denom)


@dataclass
class BoundaryResult:
    log: SimulationLog
    v_hat: np.ndarray  # (n, 3) data boundary fluxes at the step times (veh/s)
    relative_error: float
    baseline_error: float  # relative error of an identically zero outflow
    mass_final: float
    mass_inflow: float
    mass_outflow: float


def run_boundary_experiment(
    fds,
    coupling,
    inflows: Sequence[Callable],
    outflow_reference: Callable,
    t_end: float,
    config: SolverConfig | None = None,
) -> BoundaryResult:
    """Drive the empty network with data inflows and compare the predicted outflow.

    ``fds`` are in km/h and veh/km, ``coupling`` a km/h coupling solver and
    the inflow / reference callables return vehicles per second.
    """
    config = config or SolverConfig()
    fds_si = [fd.to_si() for fd in fds]
    boundary = BoundarySpec(left=tuple(inflows), right="neumann")
    final, lg = simulate(fds_si, SiCoupling(coupling), config, boundary, t_end)
    v_hat = np.array([[inflows[0](t), inflows[1](t), outflow_reference(t)] for t in lg.times]).reshape(-1, 3)
    err = relative_l2_error(v_hat[:, 2], lg.v3_model, lg.dt)
    base = relative_l2_error(v_hat[:, 2], np.zeros_like(lg.v3_model), lg.dt)
    return BoundaryResult(
        lg,
        v_hat,
        err,
        base,
        final.mass(config.dx),
        float(np.sum(lg.dt * lg.inflow.sum(axis=1))),
        float(np.sum(lg.dt * lg.outflow)),
    )


@dataclass
class RiemannResult:
    x: tuple  # cell centres per road (m)
    density: tuple  # veh/km per road at the final time
    initial_mass: float
    final_mass: float
    inflow_integral: float
    outflow_integral: float
    log: SimulationLog

    @property
    def mass_defect(self) -> float:
        """Relative deviation from initial + inflow - outflow."""
        expected = self.initial_mass + self.inflow_integral - self.outflow_integral
        return abs(self.final_mass - expected) / max(abs(expected), 1e-300)


RIEMANN_FRACTIONS = (0.7, 0.5, 0.8)


def cell_centres(config: SolverConfig):
    dx, m = config.dx, config.cells
    upstream = -config.road_length + dx * (np.arange(m) + 0.5)
    downstream = dx * (np.arange(m) + 0.5)
    return upstream, upstream.copy(), downstream


def run_riemann_prediction(
    fds, coupling, config: SolverConfig | None = None, horizon: float = 10.0, fractions=RIEMANN_FRACTIONS
) -> RiemannResult:
    """Road-wise constant initial data, homogeneous Neumann at every boundary."""
    config = config or SolverConfig()
    fds_si = [fd.to_si() for fd in fds]
    state = initial_state(fds_si, config, fractions)
    m0 = state.mass(config.dx)
    boundary = BoundarySpec(left=("neumann", "neumann"), right="neumann")
    final, lg = simulate(fds_si, SiCoupling(coupling), config, boundary, horizon, state=state)
    return RiemannResult(
        cell_centres(config),
        tuple(units.per_m_to_per_km(r) for r in final.rho),
        m0,
        final.mass(config.dx),
        float(np.sum(lg.dt * lg.inflow.sum(axis=1))),
        float(np.sum(lg.dt * lg.outflow)),
        lg,
    )


def simulate_road(
    fd: FundamentalDiagram,
    rho0,
    length: float,
    t_end: float,
    cfl: float = 0.24,
    lambda_min: float = 1e-12,
    boundary: str = "periodic",
):
    """Single-road version of the scheme (any consistent units).

    ``boundary`` is "periodic" or "neumann". Returns the cell averages at t_end.
    """
    if boundary not in ("periodic", "neumann"):
        raise ConfigError(f"unknown boundary {boundary!r}")
    rho = np.array(rho0, dtype=float)
    dx = length / len(rho)
    t = 0.0
    while t < t_end - 1e-12 * max(1.0, t_end):
        lam = max(lambda_min, float(np.max(np.abs(fd.dflux(rho)))))
        dt = min(cfl * dx / lam, t_end - t)
        if boundary == "periodic":
            ext = np.r_[rho[-1], rho, rho[0]]
        else:
            ext = np.r_[rho[0], rho, rho[-1]]
        f = _flux(fd, ext)
        F = 0.5 * (f[:-1] + f[1:]) - 0.5 * lam * (ext[1:] - ext[:-1])
        rho = rho - dt / dx * (F[1:] - F[:-1])
        t += dt
    return rho


def write_timeseries_csv(path, times, columns: dict, meta=None, kind: str = "boundary-fluxes") -> None:
    names = list(columns)
    lines = header_lines(kind, meta=meta)
    lines.append(",".join(["t"] + names))
    data = [np.asarray(columns[n], dtype=float) for n in names]
    for i, t in enumerate(times):
        lines.append(",".join(repr(float(v)) for v in [t] + [c[i] for c in data]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_profiles_csv(path, result: RiemannResult, meta=None) -> None:
    """Density snapshot: x of the upstream roads, rho1, rho2, x of road 3, rho3 (veh/km)."""
    x1, _, x3 = result.x
    cols = {"rho1": result.density[0], "rho2": result.density[1], "x3": x3, "rho3": result.density[2]}
    lines = header_lines("density-profiles", meta=meta)
    lines.append("x12," + ",".join(cols))
    for i in range(len(x1)):
        lines.append(",".join(repr(float(v)) for v in [x1[i]] + [c[i] for c in cols.values()]))
    Path(path).write_text("\n".join(lines) + "\n")


def run_metadata(config: SolverConfig, lg: SimulationLog) -> dict:
    return {
        "cells": config.cells,
        "cfl": config.cfl,
        "lambda_min": config.lambda_min,
        "road_length": config.road_length,
        "lambda_mode": config.lambda_mode,
        "steps": len(lg.dt),
        "lambda_min_seen": float(lg.lam.min()) if len(lg.lam) else float("nan"),
        "lambda_max_seen": float(lg.lam.max()) if len(lg.lam) else float("nan"),
        "dt_min": float(lg.dt.min()) if len(lg.dt) else float("nan"),
        "dt_max": float(lg.dt.max()) if len(lg.dt) else float("nan"),
    }
