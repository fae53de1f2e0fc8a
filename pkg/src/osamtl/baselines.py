"""Label-noise baseline losses: transition corrections, bootstrapping,
and symmetric cross entropy.

Each loss comes as a (value, grad_t) pair so it plugs into the same
trainer as the multi-target joint loss.  Every baseline has an "off"
setting (identity transition, beta 1, symmetric weight 0) under which it
must match plain average cross entropy to within 1e-12; the test suite
holds them to that.

The backward-corrected loss can legitimately go negative: the inverse
transition re-weights the per-label losses with coefficients outside
[0, 1].  It is only required to stay finite.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .imaging import BinaryMask, TargetSet
from .mtl.losses import EPS, ace, ace_grad_t, clip_probs

BETA_HARD_DEFAULT = 0.8
BETA_SOFT_DEFAULT = 0.95
SCE_ALPHA_DEFAULT = 1.0
SCE_BETA_DEFAULT = 1.0
LOG_FLOOR_DEFAULT = -4.0

BASELINE_KINDS = ("forward", "backward", "bootstrap-hard", "bootstrap-soft", "sce")


@dataclass(frozen=True, eq=False)
class NoiseTransition:
    """2x2 row-stochastic matrix; rows are clean labels, columns noisy."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.matrix, dtype=np.float64)
        if arr.shape != (2, 2):
            raise ValueError("transition matrix must be 2x2")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("transition entries must lie in [0, 1]")
        if np.max(np.abs(arr.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("transition rows must sum to 1")
        object.__setattr__(self, "matrix", arr.copy())

    @classmethod
    def identity(cls) -> "NoiseTransition":
        return cls(np.eye(2))

    def inverse(self) -> np.ndarray:
        a, b = self.matrix[0]
        c, d = self.matrix[1]
        det = a * d - b * c
        if abs(det) < 1e-12:
            raise ValueError("transition matrix is singular")
        return np.array([[d, -b], [-c, a]]) / det


def _as_transition(T) -> NoiseTransition:
    return T if isinstance(T, NoiseTransition) else NoiseTransition(np.asarray(T))


def _probs_and_target(t, target) -> tuple[np.ndarray, np.ndarray]:
    probs = clip_probs(getattr(t, "probs", t))
    if isinstance(target, BinaryMask):
        soft = target.bits.astype(np.float64)
    else:
        soft = np.asarray(target, dtype=np.float64)
    if probs.shape != soft.shape:
        raise ValueError("prediction and target dimensions differ")
    return probs, soft


def forward_loss(t, target, T) -> float:
    """Cross entropy of the noisy target against the transition-adjusted
    prediction: the (1-t, t) class vector is pushed through T first."""
    probs, soft = _probs_and_target(t, target)
    m = _as_transition(T).matrix
    adjusted = (1.0 - probs) * m[0, 1] + probs * m[1, 1]
    return ace(adjusted, soft)


def forward_grad_t(t, target, T) -> np.ndarray:
    probs, soft = _probs_and_target(t, target)
    m = _as_transition(T).matrix
    adjusted = (1.0 - probs) * m[0, 1] + probs * m[1, 1]
    active = (adjusted > EPS) & (adjusted < 1.0 - EPS)
    inner = ace_grad_t(adjusted, soft)
    return np.where(active, inner * (m[1, 1] - m[0, 1]), 0.0)


def backward_loss(t, target, T) -> float:
    """Per-label cross-entropy vector multiplied by the inverse transition,
    read off at the observed noisy label, averaged over pixels."""
    probs, soft = _probs_and_target(t, target)
    inv = _as_transition(T).inverse()
    loss0 = -np.log1p(-probs)
    loss1 = -np.log(probs)
    corrected0 = inv[0, 0] * loss0 + inv[0, 1] * loss1
    corrected1 = inv[1, 0] * loss0 + inv[1, 1] * loss1
    return float(np.mean(np.where(soft >= 0.5, corrected1, corrected0)))


def backward_grad_t(t, target, T) -> np.ndarray:
    probs, soft = _probs_and_target(t, target)
    inv = _as_transition(T).inverse()
    dloss0 = 1.0 / (1.0 - probs)
    dloss1 = -1.0 / probs
    d0 = inv[0, 0] * dloss0 + inv[0, 1] * dloss1
    d1 = inv[1, 0] * dloss0 + inv[1, 1] * dloss1
    return np.where(soft >= 0.5, d1, d0) / probs.size


def bootstrap_loss(t, target, beta: float, hard: bool) -> float:
    """Cross entropy against the target blended with the model's own
    belief: beta*target + (1-beta)*q, q = thresholded or raw prediction."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    probs, soft = _probs_and_target(t, target)
    q = (probs >= 0.5).astype(np.float64) if hard else probs
    return ace(probs, beta * soft + (1.0 - beta) * q)


def bootstrap_grad_t(t, target, beta: float, hard: bool) -> np.ndarray:
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    probs, soft = _probs_and_target(t, target)
    if hard:
        # The thresholded belief is piecewise constant, so it contributes
        # no gradient away from the 0.5 boundary.
        q = (probs >= 0.5).astype(np.float64)
        return ace_grad_t(probs, beta * soft + (1.0 - beta) * q)
    blended = beta * soft + (1.0 - beta) * probs
    direct = ace_grad_t(probs, blended)
    through_target = -(1.0 - beta) * (np.log(probs) - np.log1p(-probs)) / probs.size
    return direct + through_target


def _floored_log(values: np.ndarray, floor: float) -> np.ndarray:
    safe = np.where(values > 0.0, values, 1.0)
    return np.where(values > 0.0, np.log(safe), floor)


def sce_loss(
    t,
    target,
    alpha_sce: float = SCE_ALPHA_DEFAULT,
    beta_sce: float = SCE_BETA_DEFAULT,
    log_floor: float = LOG_FLOOR_DEFAULT,
) -> float:
    """alpha*ACE plus beta times the reversed cross entropy, where the
    reversal swaps prediction and target and log 0 becomes ``log_floor``."""
    if alpha_sce < 0.0 or beta_sce < 0.0:
        raise ValueError("sce weights must be non-negative")
    if log_floor >= 0.0:
        raise ValueError("log_floor must be negative")
    probs, soft = _probs_and_target(t, target)
    reversed_ce = -np.mean(
        probs * _floored_log(soft, log_floor)
        + (1.0 - probs) * _floored_log(1.0 - soft, log_floor)
    )
    return alpha_sce * ace(probs, soft) + beta_sce * float(reversed_ce)


def sce_grad_t(
    t,
    target,
    alpha_sce: float = SCE_ALPHA_DEFAULT,
    beta_sce: float = SCE_BETA_DEFAULT,
    log_floor: float = LOG_FLOOR_DEFAULT,
) -> np.ndarray:
    if alpha_sce < 0.0 or beta_sce < 0.0:
        raise ValueError("sce weights must be non-negative")
    if log_floor >= 0.0:
        raise ValueError("log_floor must be negative")
    probs, soft = _probs_and_target(t, target)
    d_reversed = -(
        _floored_log(soft, log_floor) - _floored_log(1.0 - soft, log_floor)
    ) / probs.size
    return alpha_sce * ace_grad_t(probs, soft) + beta_sce * d_reversed


def estimate_transition(target1, target2) -> NoiseTransition:
    """Empirical transition frequencies, treating the refined target as
    proxy-clean (rows) and the permissive target as noisy (columns).

    Accepts a single mask pair or two parallel sequences of masks, which
    are pooled before normalizing.  A proxy class with no pixels at all
    is an error: its row frequencies would be undefined.
    """
    noisy = [target1] if isinstance(target1, BinaryMask) else list(target1)
    clean = [target2] if isinstance(target2, BinaryMask) else list(target2)
    if len(noisy) != len(clean):
        raise ValueError("need one noisy mask per proxy-clean mask")
    if not noisy:
        raise ValueError("need at least one mask pair")
    counts = np.zeros((2, 2), dtype=np.float64)
    for m1, m2 in zip(noisy, clean):
        if m1.bits.shape != m2.bits.shape:
            raise ValueError("mask dimensions differ")
        counts[1, 1] += np.count_nonzero(m2.bits & m1.bits)
        counts[1, 0] += np.count_nonzero(m2.bits & ~m1.bits)
        counts[0, 1] += np.count_nonzero(~m2.bits & m1.bits)
        counts[0, 0] += np.count_nonzero(~m2.bits & ~m1.bits)
    row_sums = counts.sum(axis=1)
    for label in (0, 1):
        if row_sums[label] == 0.0:
            raise ValueError(f"proxy-clean class {label} is empty")
    return NoiseTransition(counts / row_sums[:, None])


@dataclass(frozen=True, eq=False)
class BaselineConfig:
    """Which baseline loss to use and its parameters.

    ``transition`` may stay None for forward/backward until one has been
    estimated; building an objective then requires it.  ``beta`` of None
    means the conventional default for the bootstrap flavour.
    """

    kind: str
    transition: NoiseTransition | None = None
    beta: float | None = None
    alpha_sce: float = SCE_ALPHA_DEFAULT
    beta_sce: float = SCE_BETA_DEFAULT
    log_floor: float = LOG_FLOOR_DEFAULT

    def __post_init__(self) -> None:
        if self.kind not in BASELINE_KINDS:
            raise ValueError(f"unknown baseline kind {self.kind!r}")
        if self.beta is not None and not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.alpha_sce < 0.0 or self.beta_sce < 0.0:
            raise ValueError("sce weights must be non-negative")
        if self.log_floor >= 0.0:
            raise ValueError("log_floor must be negative")

    def resolved_beta(self) -> float:
        if self.beta is not None:
            return self.beta
        return BETA_HARD_DEFAULT if self.kind == "bootstrap-hard" else BETA_SOFT_DEFAULT


def baseline_value(config: BaselineConfig, probs: np.ndarray, target) -> float:
    if config.kind in ("forward", "backward"):
        if config.transition is None:
            raise ValueError(f"{config.kind} loss needs a transition matrix")
        fn = forward_loss if config.kind == "forward" else backward_loss
        return fn(probs, target, config.transition)
    if config.kind == "bootstrap-hard":
        return bootstrap_loss(probs, target, config.resolved_beta(), hard=True)
    if config.kind == "bootstrap-soft":
        return bootstrap_loss(probs, target, config.resolved_beta(), hard=False)
    return sce_loss(probs, target, config.alpha_sce, config.beta_sce, config.log_floor)


def baseline_grad_t(config: BaselineConfig, probs: np.ndarray, target) -> np.ndarray:
    if config.kind in ("forward", "backward"):
        if config.transition is None:
            raise ValueError(f"{config.kind} loss needs a transition matrix")
        fn = forward_grad_t if config.kind == "forward" else backward_grad_t
        return fn(probs, target, config.transition)
    if config.kind == "bootstrap-hard":
        return bootstrap_grad_t(probs, target, config.resolved_beta(), hard=True)
    if config.kind == "bootstrap-soft":
        return bootstrap_grad_t(probs, target, config.resolved_beta(), hard=False)
    return sce_grad_t(probs, target, config.alpha_sce, config.beta_sce, config.log_floor)


class BaselineObjective:
    """A baseline loss trained against one of the two abduced targets."""

    def __init__(self, config: BaselineConfig, which: str = "target1") -> None:
        if which not in ("target1", "target2"):
            raise ValueError("which must be 'target1' or 'target2'")
        self.config = config
        self.which = which
        self.name = f"{config.kind}-{which}"

    def value(self, probs: np.ndarray, targets: TargetSet) -> float:
        return baseline_value(self.config, probs, getattr(targets, self.which))

    def grad_t(self, probs: np.ndarray, targets: TargetSet) -> np.ndarray:
        return baseline_grad_t(self.config, probs, getattr(targets, self.which))


class WeightedBaselineObjective:
    """A baseline loss summed over both targets with the blend weights,
    the multi-target counterpart of ``BaselineObjective``."""

    def __init__(self, config: BaselineConfig) -> None:
        self.config = config
        self.name = f"{config.kind}-joint"

    def value(self, probs: np.ndarray, targets: TargetSet) -> float:
        masks = (targets.target1, targets.target2)
        return math.fsum(
            a * baseline_value(self.config, probs, m)
            for a, m in zip(targets.alphas, masks)
        )

    def grad_t(self, probs: np.ndarray, targets: TargetSet) -> np.ndarray:
        masks = (targets.target1, targets.target2)
        total = np.zeros_like(np.asarray(getattr(probs, "probs", probs), dtype=np.float64))
        for a, m in zip(targets.alphas, masks):
            total += a * baseline_grad_t(self.config, probs, m)
        return total


def build_objective(config: BaselineConfig, which: str):
    """An objective for 'target1', 'target2', or the weighted 'joint' mode."""
    if which == "joint":
        return WeightedBaselineObjective(config)
    return BaselineObjective(config, which)
