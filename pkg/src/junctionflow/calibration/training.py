"""AMSGrad training of the ML couplings, with the consistency penalty for ML3."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from ..errors import ContractError
from ..junction import BRANCH_RTOL
from ..ml import MlCouplingModel, _backward, _forward
from .errors import Samples, predict


class TrainingError(RuntimeError):
    pass


@dataclass
class AmsGradConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    penalty_weight: float = 0.5

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ContractError("AMSGrad decay rates must lie in (0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise ContractError("batch size must be positive and epochs nonnegative")


class AmsGrad:
    """Adam with a running maximum of the second-moment estimate."""

    def __init__(self, n: int, config: AmsGradConfig):
        self.cfg = config
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.v_hat = np.zeros(n)
        self.steps = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        c = self.cfg
        self.m *= c.beta1
        self.m += (1.0 - c.beta1) * grad
        self.v *= c.beta2
        self.v += (1.0 - c.beta2) * grad * grad
        np.maximum(self.v_hat, self.v, out=self.v_hat)
        params -= c.lr * self.m / (np.sqrt(self.v_hat) + c.eps)
        self.steps += 1


def _coupling_data(model: MlCouplingModel, rho: np.ndarray, fluxes: np.ndarray) -> np.ndarray:
    """Row-wise coupling densities of (n, 3) traces and admissible fluxes.

    Same rule as :func:`fluxes_to_coupling_data`, without the per-call checks
    (model outputs are admissible by construction).
    """
    vmax = np.array([fd.v_max for fd in model.fds])
    rmax = np.array([fd.rho_max for fd in model.fds])
    fmax = 0.25 * vmax * rmax
    f = np.clip(fluxes, 0.0, fmax)
    low = 2.0 * f / (vmax * (1.0 + np.sqrt(np.clip(1.0 - f / fmax, 0.0, None))))
    inv = np.where([True, True, False], rmax - low, low)
    own = vmax * rho * (1.0 - rho / rmax)
    same = np.abs(f - own) <= BRANCH_RTOL * np.maximum(np.abs(f), np.abs(own))
    return np.where(same, rho, inv)


def consistency_penalty(model, traces) -> float:
    """Mean squared difference between RS(rho) and RS(coupling data of RS(rho))."""
    rho = np.asarray(traces, dtype=float).reshape(-1, 3)
    first = predict(model, rho)
    second = predict(model, _coupling_data(model, rho, first))
    return float(np.mean((first - second) ** 2))


def loss_and_gradient(model: MlCouplingModel, rho, targets, penalty_weight: float = 0.0):
    """Return (flux MSE, penalty, gradient of MSE + weight * penalty).

    The coupling data fed to the second evaluation is held fixed when
    differentiating the penalty.
    """
    cache = _forward(model, rho)
    fluxes = cache["fluxes"]
    resid = fluxes - targets
    size = resid.size
    loss = float(np.mean(resid**2))
    dfl = 2.0 * resid / size
    penalty = 0.0
    if penalty_weight:
        cache2 = _forward(model, _coupling_data(model, rho, fluxes))
        diff = fluxes - cache2["fluxes"]
        penalty = float(np.mean(diff**2))
        dpen = (2.0 * penalty_weight / size) * diff
        grad = _backward(model, cache, dfl + dpen)
        _backward(model, cache2, -dpen, out=grad)
    else:
        grad = _backward(model, cache, dfl)
    return loss, penalty, grad


@dataclass
class TrainResult:
    model: MlCouplingModel
    history: list = field(default_factory=list)  # dicts: epoch, train_loss, test_loss, penalty


def train_ml(
    model: MlCouplingModel,
    train: Samples,
    config: AmsGradConfig | None = None,
    consistency: bool | None = None,
    test: Samples | None = None,
    eval_epochs: Iterable[int] | None = None,
    on_step: Callable[[AmsGrad], None] | None = None,
) -> TrainResult:
    """Shuffled mini-batch AMSGrad on the flux MSE (plus penalty when consistent).

    Train loss (without penalty), penalty and test loss are recorded after
    each epoch in ``eval_epochs`` (default: every epoch), epoch 0 being the
    untrained model. The final epoch is always recorded.
    """
    cfg = config or AmsGradConfig()
    if consistency is None:
        consistency = model.variant == "ml3"
    if model.variant == "ml3" and not consistency:
        raise ContractError("ML3 is trained with the consistency penalty")
    if len(train) == 0:
        raise ContractError("empty training set")
    weight = cfg.penalty_weight if consistency else 0.0
    evals = None if eval_epochs is None else set(eval_epochs)
    rng = np.random.default_rng(cfg.seed)
    opt = AmsGrad(model.n_params, cfg)
    history = []

    def record(epoch):
        pred = model.predict(train.traces)
        row = {
            "epoch": epoch,
            "train_loss": float(np.mean((pred - train.targets) ** 2)),
            "test_loss": float("nan"),
            "penalty": consistency_penalty(model, train.traces) if consistency else 0.0,
        }
        if test is not None:
            row["test_loss"] = float(np.mean((model.predict(test.traces) - test.targets) ** 2))
        if not np.isfinite(row["train_loss"]):
            raise TrainingError(f"loss became {row['train_loss']} at epoch {epoch}")
        history.append(row)

    if evals is None or 0 in evals:
        record(0)
    n = len(train)
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            loss, _, grad = loss_and_gradient(model, train.traces[idx], train.targets[idx], weight)
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise TrainingError(
                    f"non-finite loss/gradient in epoch {epoch}, batch starting at {start}: loss={loss}"
                )
            opt.step(model.params, grad)
            if on_step is not None:
                on_step(opt)
        if evals is None or epoch in evals or epoch == cfg.epochs:
            record(epoch)
    return TrainResult(model, history)


def write_history_csv(path, history, header_lines=()) -> None:
    lines = list(header_lines) + ["epoch,train_loss,test_loss,penalty"]
    for row in history:
        lines.append(",".join([str(row["epoch"])] + [repr(float(row[k])) for k in ("train_loss", "test_loss", "penalty")]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
