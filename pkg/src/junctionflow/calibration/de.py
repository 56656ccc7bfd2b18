"""Self-adaptive differential evolution (rand/1/bin).

Each population member carries its own scale factor F and crossover rate CR.
Before producing a trial vector they are resampled with small probability and
survive only together with a successful trial, so the control parameters are
tuned by the selection itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import DomainError


@dataclass
class DifferentialEvolutionConfig:
    pop_size: int = 40
    generations: int = 300
    seed: int = 0
    bounds: Sequence[tuple[float, float]] | None = None
    adapt_f: bool = True
    adapt_cr: bool = True
    f_init: float = 0.5
    cr_init: float = 0.9
    f_lower: float = 0.1
    f_upper: float = 0.9
    tau_f: float = 0.1
    tau_cr: float = 0.1

    def __post_init__(self):
        if self.pop_size < 4:
            raise DomainError("differential evolution needs a population of at least 4")


@dataclass
class DEResult:
    x: np.ndarray
    fun: float
    nfev: int
    history: list = field(default_factory=list)  # best objective after each generation


def _check_bounds(bounds) -> np.ndarray:
    b = np.asarray(bounds, dtype=float)
    if b.ndim != 2 or b.shape[1] != 2 or not np.all(np.isfinite(b)) or np.any(b[:, 0] > b[:, 1]):
        raise DomainError(f"infeasible bounds {bounds!r}")
    return b


def differential_evolution(
    objective: Callable[[np.ndarray], float],
    bounds,
    config: DifferentialEvolutionConfig | None = None,
    on_evaluate: Callable[[np.ndarray], None] | None = None,
) -> DEResult:
    cfg = config or DifferentialEvolutionConfig()
    b = _check_bounds(bounds)
    lo, hi = b[:, 0], b[:, 1]
    dim = len(b)
    n = cfg.pop_size
    rng = np.random.default_rng(cfg.seed)

    def evaluate(x):
        if on_evaluate is not None:
            on_evaluate(x)
        val = float(objective(x))
        return val if np.isfinite(val) else np.inf

    pop = lo + rng.random((n, dim)) * (hi - lo)
    fit = np.array([evaluate(x) for x in pop])
    nfev = n
    f_par = np.full(n, cfg.f_init)
    cr_par = np.full(n, cfg.cr_init)
    history = []

    for _ in range(cfg.generations):
        for i in range(n):
            f_i, cr_i = f_par[i], cr_par[i]
            if cfg.adapt_f and rng.random() < cfg.tau_f:
                f_i = cfg.f_lower + rng.random() * cfg.f_upper
            if cfg.adapt_cr and rng.random() < cfg.tau_cr:
                cr_i = rng.random()
            others = rng.choice(n - 1, size=3, replace=False)
            r1, r2, r3 = others + (others >= i)
            mutant = pop[r1] + f_i * (pop[r2] - pop[r3])
            # out-of-range components land between the parent and the violated bound
            below = mutant < lo
            above = mutant > hi
            mutant[below] = 0.5 * (lo[below] + pop[i, below])
            mutant[above] = 0.5 * (hi[above] + pop[i, above])
            cross = rng.random(dim) < cr_i
            cross[rng.integers(dim)] = True
            trial = np.where(cross, mutant, pop[i])
            val = evaluate(trial)
            nfev += 1
            if val <= fit[i]:
                pop[i], fit[i] = trial, val
                f_par[i], cr_par[i] = f_i, cr_i
        history.append(float(fit.min()))

    best = int(np.argmin(fit))
    return DEResult(pop[best].copy(), float(fit[best]), nfev, history)
