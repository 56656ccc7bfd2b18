"""Calibration of the classical junction models by differential evolution."""

from __future__ import annotations

import numpy as np

from ..classical import BETA_MARGIN, MODEL_IDS, ClassicalModel, ClassicalParams
from ..errors import DomainError
from ..junction import MarkerParams
from .de import DEResult, DifferentialEvolutionConfig, differential_evolution
from .errors import Samples, model_error

MARKER_FLOOR = 0.1  # markers are searched in [0.1 v_max, v_max]


def default_bounds(kind: str, fds) -> list[tuple[float, float]]:
    if kind not in MODEL_IDS:
        raise DomainError(f"unknown classical model {kind!r}")
    if kind in ("c1", "c2"):
        bounds = [(0.0, 1.0)]
    else:
        bounds = [(BETA_MARGIN, 1.0 - BETA_MARGIN)]
    if kind != "c1":
        bounds += [(MARKER_FLOOR * fd.v_max, fd.v_max) for fd in fds]
    return bounds


def params_from_vector(kind: str, x) -> ClassicalParams:
    if kind == "c1":
        return ClassicalParams(float(x[0]))
    return ClassicalParams(float(x[0]), MarkerParams(*(float(v) for v in x[1:4])))


def fit_classical(
    kind: str,
    fds,
    samples: Samples,
    bounds=None,
    config: DifferentialEvolutionConfig | None = None,
) -> tuple[ClassicalParams, DEResult]:
    """Minimise the total model error over the model's parameter box."""
    bounds = default_bounds(kind, fds) if bounds is None else list(bounds)
    expected = 1 if kind == "c1" else 4
    if len(bounds) != expected:
        raise DomainError(f"{kind} takes {expected} parameters, got {len(bounds)} bounds")
    b = np.asarray(bounds, dtype=float)
    if kind in ("c3", "c4") and (b[0, 0] <= 0.0 or b[0, 1] >= 1.0):
        raise DomainError("beta bounds for c3/c4 must stay inside (0, 1)")
    if kind in ("c1", "c2") and (b[0, 0] < 0.0 or b[0, 1] > 1.0):
        raise DomainError("beta bounds must lie within [0, 1]")
    if kind != "c1":
        for k, fd in enumerate(fds):
            if b[k + 1, 0] < 0.0 or b[k + 1, 1] > fd.v_max:
                raise DomainError(f"marker bounds for road {k + 1} exceed [0, v_max]")

    def objective(x):
        return model_error(ClassicalModel(kind, tuple(fds), params_from_vector(kind, x)), samples)

    result = differential_evolution(objective, bounds, config)
    return params_from_vector(kind, result.x), result
