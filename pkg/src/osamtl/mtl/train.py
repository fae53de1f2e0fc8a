"""Minibatch SGD with momentum, plus a finite-difference gradient checker.

The training loop is deterministic given the config seed: the epoch
shuffles come from one generator consumed in order, batches are visited
in shuffle order, and per-batch gradients are accumulated in a fixed
sequence.  When a validation split is supplied, the returned model is the
epoch checkpoint with the best validation Lf1 (earliest epoch on ties).
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..imaging import GrayImage, TargetSet
from ..laf import aggregate_laf, binarize, laf_counts
from .losses import ACE, MSE, base_loss_fns, joint_grad_t, joint_loss
from .models import LogisticFeatures, PixelClassifier

TRACE_HEADER = "epoch,split,loss,lf1"


class TrainingDiverged(RuntimeError):
    """Raised when the loss or gradient stops being finite."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    momentum: float = 0.9
    epochs: int = 30
    batch_size: int = 8
    seed: int = 0
    base_loss: str = ACE
    alphas: tuple[float, ...] = (0.5, 0.5)

    def __post_init__(self) -> None:
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.base_loss not in (ACE, MSE):
            raise ValueError("base_loss must be 'ace' or 'mse'")
        if any(a < 0.0 for a in self.alphas) or abs(sum(self.alphas) - 1.0) > 1e-9:
            raise ValueError("alphas must be non-negative and sum to 1")


@dataclass(frozen=True, eq=False)
class TrainExample:
    """One training patch with its abduced targets."""

    image: GrayImage
    targets: TargetSet


@dataclass(frozen=True)
class TraceRow:
    epoch: int
    split: str
    loss: float
    lf1: float


@dataclass(frozen=True, eq=False)
class TrainResult:
    model: PixelClassifier
    trace: tuple[TraceRow, ...]
    best_epoch: int


class JointObjective:
    """The weighted multi-target loss; weights come from each TargetSet."""

    def __init__(self, base: str = ACE) -> None:
        base_loss_fns(base)
        self.base = base
        self.name = f"joint-{base}"

    def value(self, probs: np.ndarray, targets: TargetSet) -> float:
        return joint_loss(probs, targets, self.base)

    def grad_t(self, probs: np.ndarray, targets: TargetSet) -> np.ndarray:
        return joint_grad_t(probs, targets, self.base)


class SingleTargetObjective:
    """The base loss against just one of the two abduced targets."""

    def __init__(self, which: str, base: str = ACE) -> None:
        if which not in ("target1", "target2"):
            raise ValueError("which must be 'target1' or 'target2'")
        self._value_fn, self._grad_fn = base_loss_fns(base)
        self.which = which
        self.base = base
        self.name = f"{which}-{base}"

    def value(self, probs: np.ndarray, targets: TargetSet) -> float:
        return self._value_fn(probs, getattr(targets, self.which))

    def grad_t(self, probs: np.ndarray, targets: TargetSet) -> np.ndarray:
        return self._grad_fn(probs, getattr(targets, self.which))


def _model_gradient(model, prepared, targets, objective) -> tuple[float, np.ndarray]:
    probs, cache = model.forward(prepared)
    value = objective.value(probs, targets)
    if not np.isfinite(value):
        raise TrainingDiverged(f"loss became {value!r}")
    grad = model.backward(cache, objective.grad_t(probs, targets))
    if not np.all(np.isfinite(grad)):
        raise TrainingDiverged("gradient became non-finite")
    return value, grad


def gradient(
    model: PixelClassifier,
    batch: Sequence[GrayImage],
    targets: Sequence[TargetSet],
    config: TrainConfig,
    objective=None,
) -> np.ndarray:
    """Mean analytic gradient of the objective over a batch of patches."""
    if len(batch) == 0:
        raise ValueError("batch must be non-empty")
    if len(batch) != len(targets):
        raise ValueError("need exactly one target set per patch")
    obj = objective if objective is not None else JointObjective(config.base_loss)
    total = np.zeros(model.parameter_count())
    for img, tset in zip(batch, targets):
        _, grad = _model_gradient(model, model.prepare(img), tset, obj)
        total += grad
    return total / len(batch)


def batch_loss(
    model: PixelClassifier,
    batch: Sequence[GrayImage],
    targets: Sequence[TargetSet],
    config: TrainConfig,
    objective=None,
) -> float:
    """Mean objective value over a batch of patches."""
    if len(batch) == 0:
        raise ValueError("batch must be non-empty")
    if len(batch) != len(targets):
        raise ValueError("need exactly one target set per patch")
    obj = objective if objective is not None else JointObjective(config.base_loss)
    values = []
    for img, tset in zip(batch, targets):
        probs, _ = model.forward(model.prepare(img))
        values.append(obj.value(probs, tset))
    return float(np.mean(values))


def grad_check(
    model: PixelClassifier,
    batch: Sequence[GrayImage],
    targets: Sequence[TargetSet],
    config: TrainConfig,
    objective=None,
    step: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients."""
    analytic = gradient(model, batch, targets, config, objective)
    params = model.get_params()
    worst = 0.0
    for i in range(params.size):
        bumped = params.copy()
        bumped[i] = params[i] + step
        model.set_params(bumped)
        plus = batch_loss(model, batch, targets, config, objective)
        bumped[i] = params[i] - step
        model.set_params(bumped)
        minus = batch_loss(model, batch, targets, config, objective)
        fd = (plus - minus) / (2.0 * step)
        rel = abs(analytic[i] - fd) / max(abs(analytic[i]) + abs(fd), 1e-8)
        worst = max(worst, rel)
    model.set_params(params)
    return worst


def _split_metrics(model, prepared, objective) -> tuple[float, float]:
    """(mean loss, pooled Lf1) of a split under the current weights."""
    losses = []
    counts = []
    for inputs, tset in prepared:
        probs, _ = model.forward(inputs)
        losses.append(objective.value(probs, tset))
        t_f, t_b = binarize(probs)
        counts.append(laf_counts(t_f, t_b, tset.target1, tset.target2))
    return float(np.mean(losses)), aggregate_laf(counts).lf1


def train(
    examples: Sequence[TrainExample],
    objective,
    config: TrainConfig,
    val_examples: Sequence[TrainExample] = (),
    model: PixelClassifier | None = None,
) -> TrainResult:
    """Fit a classifier with momentum SGD; see the module docstring.

    ``objective`` may be None for the default multi-target joint loss, a
    SingleTargetObjective, or any object with value/grad_t methods (the
    label-noise baselines follow the same protocol).  epochs=0 returns the
    initial model untouched with an empty trace.
    """
    if not examples:
        raise ValueError("need at least one training example")
    obj = objective if objective is not None else JointObjective(config.base_loss)
    if model is None:
        model = LogisticFeatures()
    prepared = [(model.prepare(ex.image), ex.targets) for ex in examples]
    val_prepared = [(model.prepare(ex.image), ex.targets) for ex in val_examples]

    rng = np.random.default_rng(config.seed)
    velocity = np.zeros(model.parameter_count())
    trace: list[TraceRow] = []
    best_params: np.ndarray | None = None
    best_lf1 = -1.0
    best_epoch = 0

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(prepared))
        for start in range(0, len(order), config.batch_size):
            chunk = order[start:start + config.batch_size]
            grad_total = np.zeros_like(velocity)
            for idx in chunk:
                inputs, tset = prepared[idx]
                try:
                    _, grad = _model_gradient(model, inputs, tset, obj)
                except TrainingDiverged as exc:
                    raise TrainingDiverged(
                        f"epoch {epoch}, patch {idx}: {exc}"
                    ) from None
                grad_total += grad
            velocity = config.momentum * velocity - config.learning_rate * (
                grad_total / len(chunk)
            )
            model.set_params(model.get_params() + velocity)
        # Both trace rows are measured at epoch-end weights.
        train_loss, train_lf1 = _split_metrics(model, prepared, obj)
        trace.append(TraceRow(epoch, "train", train_loss, train_lf1))
        if val_prepared:
            val_loss, val_lf1 = _split_metrics(model, val_prepared, obj)
            trace.append(TraceRow(epoch, "val", val_loss, val_lf1))
            if val_lf1 > best_lf1:
                best_lf1 = val_lf1
                best_params = model.get_params()
                best_epoch = epoch

    if best_params is not None:
        model.set_params(best_params)
    else:
        best_epoch = config.epochs
    return TrainResult(model, tuple(trace), best_epoch)


def trace_csv(trace: Sequence[TraceRow]) -> str:
    lines = [TRACE_HEADER]
    for row in trace:
        lines.append(f"{row.epoch},{row.split},{row.loss:.6f},{row.lf1:.6f}")
    return "\n".join(lines) + "\n"


def write_trace(trace: Sequence[TraceRow], path: Path | str) -> None:
    Path(path).write_text(trace_csv(trace), encoding="utf-8")
