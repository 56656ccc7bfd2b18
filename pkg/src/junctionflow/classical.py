"""Classical junction Riemann solvers in flux form.

C1  flow maximisation with a right-of-way split of the supply,
C2  C1 with per-road Lagrangian markers scaling the junction flux functions,
C3  flow maximisation under a fixed proportional split,
C4  homogenised-pressure model; identical to C3 at the level of fluxes.

Every solver maps trace densities (scalars or equally shaped arrays) to
:class:`CouplingFluxes` satisfying f3 = f1 + f2 exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .junction import (
    AdmissibleSet,
    CouplingFluxes,
    FundamentalDiagram,
    MarkerParams,
    _out,
    fluxes_to_coupling_data,
)
from .kvfile import read_kv, write_kv

MODEL_IDS = ("c1", "c2", "c3", "c4")
# Solvers with a proportional split need beta strictly inside (0, 1).
BETA_MARGIN = 1e-3


def _c1_split(g: AdmissibleSet, beta: float) -> CouplingFluxes:
    d1, d2, s3 = (np.asarray(v, dtype=float) for v in (g.d1, g.d2, g.s3))
    demand_limited = d1 + d2 <= s3
    pre1 = beta * s3
    pre2 = (1.0 - beta) * s3
    viol1 = ~demand_limited & (pre1 > d1)
    viol2 = ~demand_limited & (pre2 > d2)
    if np.any(viol1 & viol2):
        # pre1 + pre2 = s3 < d1 + d2 rules this out
        raise AssertionError("both preliminary fluxes exceed their demands")
    f1 = np.where(demand_limited | viol1, d1, np.where(viol2, s3 - d2, pre1))
    f2 = np.where(demand_limited | viol2, d2, np.where(viol1, s3 - d1, pre2))
    return CouplingFluxes(_out(f1), _out(f2), _out(f1 + f2))


def _check_beta(beta: float, open_interval: bool) -> None:
    if open_interval:
        if not 0.0 < beta < 1.0:
            raise DomainError(f"beta must lie in (0, 1), got {beta}")
    elif not 0.0 <= beta <= 1.0:
        raise DomainError(f"beta must lie in [0, 1], got {beta}")


def solve_c1(traces, fds: Sequence[FundamentalDiagram], beta: float) -> CouplingFluxes:
    _check_beta(beta, open_interval=False)
    return _c1_split(AdmissibleSet.from_traces(fds, traces), beta)


def solve_c2(traces, fds, beta: float, markers) -> CouplingFluxes:
    _check_beta(beta, open_interval=False)
    return _c1_split(AdmissibleSet.from_traces(fds, traces, markers), beta)


def solve_c3(traces, fds, beta: float, markers) -> CouplingFluxes:
    _check_beta(beta, open_interval=True)
    g = AdmissibleSet.from_traces(fds, traces, markers)
    d1, d2, s3 = (np.asarray(v, dtype=float) for v in (g.d1, g.d2, g.s3))
    total = np.minimum(np.minimum(d1 / beta, d2 / (1.0 - beta)), s3)
    f1 = np.minimum(beta * total, d1)
    f2 = np.minimum((1.0 - beta) * total, d2)
    return CouplingFluxes(_out(f1), _out(f2), _out(f1 + f2))


def solve_c4(traces, fds, beta: float, markers) -> CouplingFluxes:
    # The pressure homogenisation only alters density boundary data downstream.
    return solve_c3(traces, fds, beta, markers)


@dataclass(frozen=True)
class ClassicalParams:
    beta: float
    markers: MarkerParams | None = None


@dataclass(frozen=True)
class ClassicalModel:
    """A classical solver bound to its fundamental diagrams and parameters."""

    kind: str
    fds: tuple
    params: ClassicalParams

    def __post_init__(self):
        if self.kind not in MODEL_IDS:
            raise DomainError(f"unknown classical model {self.kind!r}")
        _check_beta(self.params.beta, open_interval=self.kind in ("c3", "c4"))
        if self.kind != "c1" and self.params.markers is None:
            object.__setattr__(
                self, "params", ClassicalParams(self.params.beta, MarkerParams(*(fd.v_max for fd in self.fds)))
            )

    def __call__(self, rho1, rho2, rho3) -> CouplingFluxes:
        traces = (rho1, rho2, rho3)
        p = self.params
        if self.kind == "c1":
            return solve_c1(traces, self.fds, p.beta)
        if self.kind == "c2":
            return solve_c2(traces, self.fds, p.beta, p.markers)
        if self.kind == "c3":
            return solve_c3(traces, self.fds, p.beta, p.markers)
        return solve_c4(traces, self.fds, p.beta, p.markers)


CouplingSolver = Callable[..., CouplingFluxes]


def check_consistency(solver: CouplingSolver, traces, fds) -> float:
    """Max-norm difference between RS(traces) and RS(coupling data of RS(traces))."""
    first = solver(*traces)
    data = fluxes_to_coupling_data(fds, traces, first)
    second = solver(*data)
    return float(max(np.max(np.abs(np.asarray(a) - np.asarray(b))) for a, b in zip(first, second)))


def write_params_file(path, kind: str, params: ClassicalParams, meta=None) -> None:
    items: dict[str, object] = {"model": kind, "beta": float(params.beta)}
    if params.markers is not None:
        for k, w in enumerate(params.markers, 1):
            items[f"w{k}_kmh"] = float(w)
    write_kv(path, "coupling-params", items, meta)


def read_params_file(path) -> tuple[str, ClassicalParams]:
    kv = read_kv(path, "coupling-params")
    markers = None
    if "w1_kmh" in kv:
        markers = MarkerParams(*(float(kv[f"w{k}_kmh"]) for k in (1, 2, 3)))
    return kv["model"], ClassicalParams(float(kv["beta"]), markers)
