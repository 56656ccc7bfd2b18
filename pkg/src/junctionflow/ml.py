"""Machine-learning junction couplings ML1-ML3.

A model maps trace densities to coupling fluxes by

    fluxes = JO( ANN( N( FE(traces) ) ), DS(traces) )

FE appends the road fluxes to the traces, N is a frozen affine normalisation,
ANN a stack of sigmoid dense layers producing (theta1, theta2) in (0, 1)^2, DS
evaluates demand/supply and JO maps theta onto the admissible set. Outputs
are admissible for any weights.

All trainable parameters live in one flat vector; the dense layers are views
into it, which keeps optimiser updates to a handful of vector operations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .errors import ConfigError, ContractError, DomainError
from .junction import AdmissibleSet, CouplingFluxes, FundamentalDiagram, _out

VARIANTS = ("ml1", "ml2", "ml3")
ARCHITECTURES = {
    "ml1": (6, 2),
    "ml2": (6, 12, 75, 75, 2),
    "ml3": (6, 12, 75, 75, 2),
}
MODEL_FORMAT = "junctionflow-ml-model"
STD_FLOOR = 1e-8


sigmoid = expit


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)

    def __call__(self, x):
        return sigmoid(x @ self.weights.T + self.bias)


@dataclass(frozen=True)
class NormalizationParams:
    shift: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        if np.shape(self.shift) != (6,) or np.shape(self.scale) != (6,):
            raise ContractError("normalisation vectors must have length 6")
        if np.any(np.asarray(self.scale) <= 0):
            raise ContractError("normalisation scales must be positive")

    @classmethod
    def identity(cls) -> "NormalizationParams":
        return cls(np.zeros(6), np.ones(6))

    @classmethod
    def from_training_inputs(cls, fds, traces) -> "NormalizationParams":
        """Per-component z-score of the flux-extended training traces."""
        x = flux_extension(np.asarray(traces, dtype=float).reshape(-1, 3).T, fds)
        return cls(x.mean(axis=0), np.maximum(x.std(axis=0), STD_FLOOR))

    def apply(self, x):
        return (x - self.shift) / self.scale


def flux_extension(traces, fds: Sequence[FundamentalDiagram]):
    """(rho1, rho2, rho3) -> (rho1, rho2, rho3, f1(rho1), f2(rho2), f3(rho3)).

    ``traces`` may be a triple of scalars or of equally shaped arrays; the
    result has a trailing axis of length 6.
    """
    rho = [np.asarray(traces[k], dtype=float) for k in range(3)]
    f = [fds[k].flux(rho[k]) for k in range(3)]
    return np.stack(rho + [np.asarray(v, dtype=float) for v in f], axis=-1)


def demand_supply_layer(traces, fds) -> AdmissibleSet:
    return AdmissibleSet.from_traces(fds, traces)


class MlCouplingModel:
    """A callable coupling solver backed by a dense sigmoid network."""

    def __init__(self, variant: str, fds, norm: NormalizationParams, params=None, shapes=None):
        if variant not in VARIANTS:
            raise ConfigError(f"unknown ML variant {variant!r}")
        self.variant = variant
        self.fds = tuple(fds)
        self.norm = norm
        if shapes is None:
            sizes = ARCHITECTURES[variant]
            shapes = [(sizes[j + 1], sizes[j]) for j in range(len(sizes) - 1)]
        self.shapes = [tuple(s) for s in shapes]
        if self.shapes[0][1] != 6 or self.shapes[-1][0] != 2:
            raise ContractError("network must map 6 inputs to 2 outputs")
        for (o, _), (_, i) in zip(self.shapes[:-1], self.shapes[1:]):
            if o != i:
                raise ContractError(f"layer chain mismatch: {self.shapes}")
        n = sum(o * i + o for o, i in self.shapes)
        self.params = np.zeros(n) if params is None else np.array(params, dtype=float)
        if self.params.shape != (n,):
            raise ContractError(f"expected {n} parameters, got {self.params.shape}")
        self.layers = self._views(self.params)

    def _views(self, flat):
        layers, pos = [], 0
        for o, i in self.shapes:
            w = flat[pos : pos + o * i].reshape(o, i)
            pos += o * i
            b = flat[pos : pos + o]
            pos += o
            layers.append(DenseLayer(w, b))
        return layers

    @property
    def n_params(self) -> int:
        return self.params.size

    def copy(self) -> "MlCouplingModel":
        return MlCouplingModel(self.variant, self.fds, self.norm, self.params.copy(), self.shapes)

    def set_params(self, flat) -> None:
        self.params[:] = flat

    def __call__(self, rho1, rho2, rho3) -> CouplingFluxes:
        return ml_forward(self, (rho1, rho2, rho3))

    def predict(self, traces):
        """Batched evaluation: (n, 3) densities -> (n, 3) fluxes."""
        return _forward(self, np.asarray(traces, dtype=float).reshape(-1, 3))["fluxes"]


def init_model(variant: str, fds, norm: NormalizationParams, seed: int = 0) -> MlCouplingModel:
    """Glorot-uniform weights, zero biases."""
    model = MlCouplingModel(variant, fds, norm)
    rng = np.random.default_rng(seed)
    for layer in model.layers:
        fan_out, fan_in = layer.weights.shape
        r = np.sqrt(6.0 / (fan_in + fan_out))
        layer.weights[...] = rng.uniform(-r, r, size=layer.weights.shape)
        layer.bias[...] = 0.0
    return model


def ann_forward(model: MlCouplingModel, x):
    """Normalise a flux-extended input (..., 6) and run the dense stack."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 6:
        raise ContractError(f"ANN input must have 6 components, got shape {x.shape}")
    a = model.norm.apply(x).reshape(-1, 6)
    for layer in model.layers:
        a = layer(a)
    out = a.reshape(x.shape[:-1] + (2,))
    return (_out(out[..., 0]), _out(out[..., 1]))


def _forward(model: MlCouplingModel, rho: np.ndarray) -> dict:
    """Batched forward pass keeping what the backward pass needs."""
    fds = model.fds
    vmax = np.array([fd.v_max for fd in fds])
    rmax = np.array([fd.rho_max for fd in fds])
    slack = 1e-12 * np.maximum(rmax, 1.0)
    if np.isnan(rho).any() or (rho < -slack).any() or (rho > rmax + slack).any():
        raise DomainError("trace densities outside [0, rho_max]")
    rho = np.clip(rho, 0.0, rmax)
    f = vmax * rho * (1.0 - rho / rmax)
    x = np.concatenate([rho, f], axis=1)
    acts = [model.norm.apply(x)]
    for layer in model.layers:
        acts.append(sigmoid(acts[-1] @ layer.weights.T + layer.bias))
    theta = acts[-1]
    fsig = 0.25 * vmax * rmax
    free = rho <= 0.5 * rmax
    d1 = np.where(free[:, 0], f[:, 0], fsig[0])
    d2 = np.where(free[:, 1], f[:, 1], fsig[1])
    s3 = np.where(free[:, 2], fsig[2], f[:, 2])
    m1 = np.minimum(d1, s3)
    f1 = theta[:, 0] * m1
    rest = s3 - f1
    first = d2 <= rest  # tie -> first argument of min
    m2 = np.where(first, d2, rest)
    f2 = theta[:, 1] * m2
    fluxes = np.stack([f1, f2, f1 + f2], axis=1)
    return {"acts": acts, "m1": m1, "m2": m2, "first": first, "fluxes": fluxes}


def _backward(model: MlCouplingModel, cache: dict, dfluxes: np.ndarray, out: np.ndarray | None = None):
    """Accumulate d(loss)/d(params) given d(loss)/d(fluxes) of shape (n, 3)."""
    grad = np.zeros_like(model.params) if out is None else out
    gviews = model._views(grad)
    acts = cache["acts"]
    theta = acts[-1]
    g1 = dfluxes[:, 0] + dfluxes[:, 2]
    g2 = dfluxes[:, 1] + dfluxes[:, 2]
    dtheta = np.empty_like(theta)
    # f2 depends on theta1 only through the clamp s3 - f1
    dtheta[:, 0] = g1 * cache["m1"] - np.where(cache["first"], 0.0, g2 * theta[:, 1] * cache["m1"])
    dtheta[:, 1] = g2 * cache["m2"]
    delta = dtheta
    for j in range(len(model.layers) - 1, -1, -1):
        a = acts[j + 1]
        dz = delta * a * (1.0 - a)
        gviews[j].weights[...] += dz.T @ acts[j]
        gviews[j].bias[...] += dz.sum(axis=0)
        if j:
            delta = dz @ model.layers[j].weights
    return grad


def ml_forward(model: MlCouplingModel, traces) -> CouplingFluxes:
    rho = np.stack([np.asarray(t, dtype=float) for t in traces], axis=-1)
    shape = rho.shape[:-1]
    fl = _forward(model, rho.reshape(-1, 3))["fluxes"]
    return CouplingFluxes(*(_out(fl[:, k].reshape(shape)) for k in range(3)))


def mse_loss(pred, target) -> float:
    return float(np.mean((np.asarray(pred) - np.asarray(target)) ** 2))


def ml_gradient(model: MlCouplingModel, traces, targets):
    """Mean squared flux error over a batch and its gradient w.r.t. all weights.

    Returns ``(loss, grad)`` with ``grad`` laid out like ``model.params``.
    """
    rho = np.asarray(traces, dtype=float).reshape(-1, 3)
    tgt = np.asarray(targets, dtype=float).reshape(-1, 3)
    if rho.shape[0] == 0:
        raise ContractError("empty batch")
    cache = _forward(model, rho)
    resid = cache["fluxes"] - tgt
    loss = float(np.mean(resid**2))
    grad = _backward(model, cache, 2.0 * resid / resid.size)
    return loss, grad


def save_model(model: MlCouplingModel, path, meta: dict | None = None) -> None:
    """Write the model as JSON. Field order:

    format, version, variant, fds [[v_max_kmh, rho_max_per_km] x3],
    norm_shift[6], norm_scale[6], layers [{out, in, weights (row-major), bias}],
    meta.
    """
    doc = {
        "format": MODEL_FORMAT,
        "version": 1,
        "variant": model.variant,
        "fds": [[fd.v_max, fd.rho_max] for fd in model.fds],
        "norm_shift": [float(v) for v in model.norm.shift],
        "norm_scale": [float(v) for v in model.norm.scale],
        "layers": [
            {
                "out": layer.weights.shape[0],
                "in": layer.weights.shape[1],
                "weights": layer.weights.ravel().tolist(),
                "bias": layer.bias.tolist(),
            }
            for layer in model.layers
        ],
        "meta": meta or {},
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_model(path) -> MlCouplingModel:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"model file not found: {path}")
    doc = json.loads(path.read_text())
    if doc.get("format") != MODEL_FORMAT:
        raise ConfigError(f"{path}: not a {MODEL_FORMAT} file")
    fds = tuple(FundamentalDiagram(float(v), float(r)) for v, r in doc["fds"])
    norm = NormalizationParams(np.array(doc["norm_shift"]), np.array(doc["norm_scale"]))
    shapes = [(layer["out"], layer["in"]) for layer in doc["layers"]]
    flat = np.concatenate([np.r_[layer["weights"], layer["bias"]] for layer in doc["layers"]])
    return MlCouplingModel(doc["variant"], fds, norm, flat, shapes)
