"""C1' capability benchmark: can the ML architectures learn flow maximisation?

C1' is C1 on unit diagrams (v_max = rho_max = 1) with beta = 0.5. Training
inputs are a 20^3 grid of [0, 1]^3, test inputs an 80^3 grid.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..classical import solve_c1
from ..errors import DomainError
from ..junction import UNIT_FDS
from ..ml import NormalizationParams, init_model
from .errors import Samples
from .training import AmsGradConfig, train_ml

C1PRIME_BETA = 0.5
REPORT_EPOCHS = (0, 1, 10, 100, 500)


def generate_c1prime_dataset(points: int) -> Samples:
    if points < 2:
        raise DomainError("need at least two grid points per axis")
    g = np.linspace(0.0, 1.0, points)
    rho = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    f = solve_c1((rho[:, 0], rho[:, 1], rho[:, 2]), UNIT_FDS, C1PRIME_BETA)
    return Samples(rho, np.stack(f, axis=1))


@dataclass
class CapabilityReport:
    epochs: tuple
    # variant -> {"train": array (runs, len(epochs)), "test": ...}
    losses: dict = field(default_factory=dict)
    seconds: dict = field(default_factory=dict)

    def summary(self, variant: str, which: str):
        arr = self.losses[variant][which]
        return arr.mean(axis=0), arr.std(axis=0, ddof=0)

    def rows(self):
        """(split, epoch, variant, mean, std) tuples in table order."""
        out = []
        for which in ("train", "test"):
            for j, epoch in enumerate(self.epochs):
                for variant in self.losses:
                    mean, std = self.summary(variant, which)
                    out.append((which, epoch, variant, float(mean[j]), float(std[j])))
        return out

    def format_table(self) -> str:
        variants = list(self.losses)
        lines = ["split,epoch," + ",".join(f"{v}_mean,{v}_std" for v in variants)]
        for which in ("train", "test"):
            for j, epoch in enumerate(self.epochs):
                cells = []
                for v in variants:
                    mean, std = self.summary(v, which)
                    cells += [f"{mean[j]:.3e}", f"{std[j]:.3e}"]
                lines.append(f"{which},{epoch}," + ",".join(cells))
        return "\n".join(lines)


def run_capability_test(
    variants=("ml1", "ml2", "ml3"),
    runs: int = 5,
    epochs: int = 500,
    train_points: int = 20,
    test_points: int = 80,
    config: AmsGradConfig | None = None,
    seed: int = 0,
    progress=None,
) -> CapabilityReport:
    """Train each variant ``runs`` times on C1' and collect train/test losses."""
    train = generate_c1prime_dataset(train_points)
    test = generate_c1prime_dataset(test_points)
    report_epochs = tuple(e for e in REPORT_EPOCHS if e <= epochs)
    if epochs not in report_epochs:
        report_epochs += (epochs,)
    base = config or AmsGradConfig()
    norm = NormalizationParams.from_training_inputs(UNIT_FDS, train.traces)
    report = CapabilityReport(report_epochs)
    for variant in variants:
        tr = np.empty((runs, len(report_epochs)))
        te = np.empty_like(tr)
        t0 = time.perf_counter()
        for r in range(runs):
            run_seed = seed + 1000 * r
            model = init_model(variant, UNIT_FDS, norm, seed=run_seed)
            cfg = AmsGradConfig(**{**base.__dict__, "epochs": epochs, "seed": run_seed + 1})
            result = train_ml(model, train, cfg, test=test, eval_epochs=report_epochs)
            by_epoch = {row["epoch"]: row for row in result.history}
            tr[r] = [by_epoch[e]["train_loss"] for e in report_epochs]
            te[r] = [by_epoch[e]["test_loss"] for e in report_epochs]
            if progress:
                progress(variant, r, tr[r], te[r])
        report.losses[variant] = {"train": tr, "test": te}
        report.seconds[variant] = time.perf_counter() - t0
    return report
