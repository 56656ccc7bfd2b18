"""Greenshields fundamental diagrams, demand/supply and the admissible flux set
of a 2-to-1 junction.

All functions accept scalars or numpy arrays (broadcasting elementwise) and
return a Python float when every argument is scalar.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import units
from .errors import ContractError, DomainError
from .kvfile import read_kv, write_kv

# Relative tolerance of the branch test f0 == f(rho0) in the coupling-data map.
BRANCH_RTOL = 1e-9
# Slack allowed when checking densities against [0, rho_max].
_RANGE_RTOL = 1e-12


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def _check_range(x, hi, name, lo=0.0):
    slack = _RANGE_RTOL * max(abs(hi), 1.0)
    if isinstance(x, (float, int, np.floating)):
        v = float(x)
        if not (lo - slack <= v <= hi + slack):  # also rejects NaN
            raise DomainError(f"{name} outside [{lo}, {hi}]: {x!r}")
        return min(max(v, lo), hi)
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < lo - slack) or np.any(arr > hi + slack):
        raise DomainError(f"{name} outside [{lo}, {hi}]: {x!r}")
    return np.clip(arr, lo, hi)


@dataclass(frozen=True)
class FundamentalDiagram:
    """Greenshields diagram V(rho) = v_max (1 - rho/rho_max)."""

    v_max: float
    rho_max: float

    def __post_init__(self):
        if not (self.v_max > 0 and self.rho_max > 0):
            raise DomainError(f"v_max and rho_max must be positive, got {self.v_max}, {self.rho_max}")

    @property
    def sigma(self) -> float:
        """Critical density (argmax of the flux)."""
        return 0.5 * self.rho_max

    @property
    def max_flux(self) -> float:
        return 0.25 * self.v_max * self.rho_max

    def flux(self, rho):
        return flux(self, rho)

    def velocity(self, rho):
        rho = _check_range(rho, self.rho_max, "rho")
        return _out(self.v_max * (1.0 - rho / self.rho_max))

    def dflux(self, rho):
        """Characteristic speed f'(rho)."""
        return _out(self.v_max * (1.0 - 2.0 * np.asarray(rho, dtype=float) / self.rho_max))

    def to_si(self) -> "FundamentalDiagram":
        """Convert (km/h, veh/km) to (m/s, veh/m)."""
        return FundamentalDiagram(units.kmh_to_ms(self.v_max), units.per_km_to_per_m(self.rho_max))


class JunctionTraces(NamedTuple):
    rho1: float
    rho2: float
    rho3: float


class CouplingFluxes(NamedTuple):
    f1: float
    f2: float
    f3: float


class MarkerParams(NamedTuple):
    w1: float
    w2: float
    w3: float


def flux(fd: FundamentalDiagram, rho):
    rho = _check_range(rho, fd.rho_max, "rho")
    return _out(fd.v_max * rho * (1.0 - rho / fd.rho_max))


def parameterized_flux(fd: FundamentalDiagram, rho, w):
    """Flux with the maximal velocity replaced by a marker ``w`` in [0, v_max]."""
    rho = _check_range(rho, fd.rho_max, "rho")
    w = _check_range(w, fd.v_max, "w")
    return _out(w * rho * (1.0 - rho / fd.rho_max))


def demand(fd: FundamentalDiagram, rho, w=None):
    if w is None:
        w = fd.v_max
    rho = _check_range(rho, fd.rho_max, "rho")
    w = _check_range(w, fd.v_max, "w")
    capped = np.minimum(rho, fd.sigma)
    return _out(w * capped * (1.0 - capped / fd.rho_max))


def supply(fd: FundamentalDiagram, rho, w=None):
    if w is None:
        w = fd.v_max
    rho = _check_range(rho, fd.rho_max, "rho")
    w = _check_range(w, fd.v_max, "w")
    floored = np.maximum(rho, fd.sigma)
    return _out(w * floored * (1.0 - floored / fd.rho_max))


def lower_inverse(fd: FundamentalDiagram, f):
    """Inverse of the flux on [0, sigma], in cancellation-free form."""
    f = np.asarray(f, dtype=float)
    disc = np.clip(1.0 - f / fd.max_flux, 0.0, None)
    return _out(2.0 * f / (fd.v_max * (1.0 + np.sqrt(disc))))


def upper_inverse(fd: FundamentalDiagram, f):
    """Inverse of the flux on [sigma, rho_max]."""
    return _out(fd.rho_max - np.asarray(lower_inverse(fd, f)))


@dataclass(frozen=True)
class AdmissibleSet:
    """Demands of the incoming roads and supply of the outgoing road.

    The restricted set G' is the rectangle [0, d1] x [0, d2] cut by f1 + f2 <= s3.
    Fields may be arrays for batched evaluation.
    """

    d1: float
    d2: float
    s3: float

    @classmethod
    def from_traces(cls, fds: Sequence[FundamentalDiagram], traces, markers=None) -> "AdmissibleSet":
        w = markers if markers is not None else (None, None, None)
        return cls(
            demand(fds[0], traces[0], w[0]),
            demand(fds[1], traces[1], w[1]),
            supply(fds[2], traces[2], w[2]),
        )

    def contains(self, f1, f2, atol: float = 0.0) -> bool:
        return admissible_contains(self, f1, f2, atol)

    def param_to_fluxes(self, theta1, theta2) -> CouplingFluxes:
        return param_to_fluxes(self, theta1, theta2)


def admissible_contains(g: AdmissibleSet, f1, f2, atol: float = 0.0):
    f1 = np.asarray(f1, dtype=float)
    f2 = np.asarray(f2, dtype=float)
    ok = (
        (f1 >= -atol)
        & (f1 <= np.minimum(g.d1, g.s3 - f2) + atol)
        & (f2 >= -atol)
        & (f2 <= np.minimum(g.d2, g.s3 - f1) + atol)
    )
    return bool(ok) if ok.ndim == 0 else ok


def param_to_fluxes(g: AdmissibleSet, theta1, theta2) -> CouplingFluxes:
    """Map (theta1, theta2) in [0, 1]^2 onto G' and append f3 = f1 + f2."""
    theta1 = _check_range(theta1, 1.0, "theta1")
    theta2 = _check_range(theta2, 1.0, "theta2")
    f1 = theta1 * np.minimum(g.d1, g.s3)
    f2 = theta2 * np.minimum(g.d2, g.s3 - f1)
    return CouplingFluxes(_out(f1), _out(f2), _out(f1 + f2))


def fluxes_to_theta(g: AdmissibleSet, fluxes) -> tuple:
    """Inverse of :func:`param_to_fluxes` where both clamps are positive."""
    m1 = np.minimum(g.d1, g.s3)
    m2 = np.minimum(g.d2, g.s3 - fluxes[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(m1 > 0, np.asarray(fluxes[0]) / np.where(m1 > 0, m1, 1.0), 0.0)
        t2 = np.where(m2 > 0, np.asarray(fluxes[1]) / np.where(m2 > 0, m2, 1.0), 0.0)
    return _out(t1), _out(t2)


def _same_flux(a, b):
    return np.abs(a - b) <= BRANCH_RTOL * np.maximum(np.abs(a), np.abs(b))


def fluxes_to_coupling_data(fds: Sequence[FundamentalDiagram], traces, fluxes, check: bool = True):
    """Turn coupling fluxes into coupling densities (rho_R^1, rho_R^2, rho_L^3).

    Incoming roads keep their trace when the flux matches it, otherwise take the
    congested preimage; the outgoing road takes the free-flow preimage.
    """
    rho = [_check_range(traces[k], fds[k].rho_max, f"rho{k + 1}") for k in range(3)]
    f0 = [np.asarray(fluxes[k], dtype=float) for k in range(3)]
    for k in range(3):
        tol = BRANCH_RTOL * fds[k].max_flux
        if np.any(f0[k] > fds[k].max_flux + tol) or np.any(f0[k] < -tol):
            raise DomainError(f"flux f{k + 1} outside [0, max flux {fds[k].max_flux}]")
    if check:
        bounds = (demand(fds[0], rho[0]), demand(fds[1], rho[1]), supply(fds[2], rho[2]))
        for k in range(3):
            if np.any(f0[k] > np.asarray(bounds[k]) + BRANCH_RTOL * fds[k].max_flux):
                what = "supply" if k == 2 else "demand"
                raise ContractError(f"flux f{k + 1} exceeds the {what} of road {k + 1}")
    out = []
    for k in range(3):
        fk = np.clip(f0[k], 0.0, fds[k].max_flux)
        own = fds[k].v_max * rho[k] * (1.0 - rho[k] / fds[k].rho_max)
        inverse = upper_inverse(fds[k], fk) if k < 2 else lower_inverse(fds[k], fk)
        out.append(_out(np.where(_same_flux(fk, own), rho[k], inverse)))
    return tuple(out)


def write_fd_file(path, fds: Sequence[FundamentalDiagram], meta=None) -> None:
    items = {}
    for k, fd in enumerate(fds, 1):
        items[f"road{k}.v_max_kmh"] = float(fd.v_max)
        items[f"road{k}.rho_max_per_km"] = float(fd.rho_max)
    write_kv(path, "fundamental-diagrams", items, meta)


def read_fd_file(path) -> tuple:
    kv = read_kv(path, "fundamental-diagrams")
    return tuple(
        FundamentalDiagram(float(kv[f"road{k}.v_max_kmh"]), float(kv[f"road{k}.rho_max_per_km"]))
        for k in (1, 2, 3)
    )


UNIT_FDS = (FundamentalDiagram(1.0, 1.0),) * 3
# Reference fits for a two-lane freeway with a one-lane on-ramp (km/h, veh/km).
PAPER_FDS = (
    FundamentalDiagram(62.94, 84.99),
    FundamentalDiagram(77.59, 400.0),
    FundamentalDiagram(75.28, 400.0),
)
