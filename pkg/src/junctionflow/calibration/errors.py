"""RMS norm, training samples and the road-dependent model errors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import DomainError
from ..junction import CouplingFluxes, JunctionTraces


def rms_norm(values) -> float:
    g = np.asarray(values, dtype=float).ravel()
    if g.size == 0:
        raise DomainError("RMS norm of an empty series")
    return float(np.sqrt(np.mean(g * g)))


class TrainingSample(NamedTuple):
    traces: JunctionTraces
    target: CouplingFluxes
    time_index: float


@dataclass
class Samples:
    """Columnar store of training pairs: traces (n, 3), targets (n, 3), times (n,)."""

    traces: np.ndarray
    targets: np.ndarray
    times: np.ndarray | None = None

    def __post_init__(self):
        self.traces = np.asarray(self.traces, dtype=float).reshape(-1, 3)
        self.targets = np.asarray(self.targets, dtype=float).reshape(-1, 3)
        if self.traces.shape != self.targets.shape:
            raise DomainError("traces and targets differ in length")
        if self.times is None:
            self.times = np.arange(len(self.traces)) * 0.25
        if np.any(self.traces < 0) or np.any(self.targets < 0):
            raise DomainError("samples must be nonnegative")

    def __len__(self):
        return len(self.traces)

    def __getitem__(self, i) -> TrainingSample:
        return TrainingSample(JunctionTraces(*self.traces[i]), CouplingFluxes(*self.targets[i]), float(self.times[i]))

    @classmethod
    def from_list(cls, samples) -> "Samples":
        samples = list(samples)
        return cls(
            np.array([s.traces for s in samples], dtype=float).reshape(-1, 3),
            np.array([s.target for s in samples], dtype=float).reshape(-1, 3),
            np.array([s.time_index for s in samples], dtype=float),
        )

    @classmethod
    def concat(cls, parts) -> "Samples":
        parts = list(parts)
        return cls(
            np.concatenate([p.traces for p in parts]),
            np.concatenate([p.targets for p in parts]),
            np.concatenate([p.times for p in parts]),
        )


def predict(solver, traces: np.ndarray) -> np.ndarray:
    if hasattr(solver, "predict"):
        return solver.predict(traces)
    out = solver(traces[:, 0], traces[:, 1], traces[:, 2])
    return np.stack([np.broadcast_to(np.asarray(v, dtype=float), traces.shape[:1]) for v in out], axis=1)


def road_errors(solver, samples: Samples) -> np.ndarray:
    """Squared RMS flux error per road, shape (3,)."""
    if len(samples) == 0:
        raise DomainError("model error over an empty sample set")
    resid = samples.targets - predict(solver, samples.traces)
    return np.mean(resid * resid, axis=0)


def model_error(solver, samples: Samples, road: int | None = None) -> float:
    """Error on road 1, 2 or 3, or the mean of the three when ``road`` is None."""
    errs = road_errors(solver, samples)
    if road is None:
        return float(errs.mean())
    if road not in (1, 2, 3):
        raise DomainError(f"road must be 1, 2 or 3, got {road}")
    return float(errs[road - 1])
