"""Base losses and the multi-target joint loss.

Two identities tie the joint loss to single-target training and are
verified numerically rather than assumed:

* with an average-cross-entropy base, the weighted sum of per-target
  losses equals the base loss against the alpha-blended soft target;
* with a mean-squared-error base, it equals the blended loss plus a
  variance penalty over the targets that the prediction cannot touch.

``verify_theorem1`` evaluates both sides through separate code paths and
returns the residual, so a regression in either path shows up as a
nonzero gap.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

from ..imaging import BinaryMask, TargetSet

# Predictions are clamped this far away from 0 and 1 so logs stay finite.
EPS = 1e-7

ACE = "ace"
MSE = "mse"


def clip_probs(values: np.ndarray) -> np.ndarray:
    """Clamp probabilities into the open interval (EPS, 1-EPS)."""
    return np.clip(np.asarray(values, dtype=np.float64), EPS, 1.0 - EPS)


def _as_probs(t) -> np.ndarray:
    # Accepts a Prediction (duck-typed via .probs) or a bare array.
    return clip_probs(getattr(t, "probs", t))


def _as_soft(target) -> np.ndarray:
    """A target as a float array in [0, 1]; binary masks count as 0/1."""
    if isinstance(target, BinaryMask):
        return target.bits.astype(np.float64)
    arr = np.asarray(target, dtype=np.float64)
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError("target values must lie in [0, 1]")
    return arr


def _check_dims(probs: np.ndarray, soft: np.ndarray) -> None:
    if probs.shape != soft.shape:
        raise ValueError(
            f"prediction shape {probs.shape} does not match target shape {soft.shape}"
        )


def ace(t, target) -> float:
    """Average cross entropy between a prediction and a (possibly soft) target."""
    probs = _as_probs(t)
    soft = _as_soft(target)
    _check_dims(probs, soft)
    per_pixel = soft * np.log(probs) + (1.0 - soft) * np.log1p(-probs)
    return float(-per_pixel.mean())


def ace_grad_t(t, target) -> np.ndarray:
    """Derivative of ``ace`` with respect to each predicted probability."""
    probs = _as_probs(t)
    soft = _as_soft(target)
    _check_dims(probs, soft)
    return (-soft / probs + (1.0 - soft) / (1.0 - probs)) / probs.size


def mse(t, target) -> float:
    """Mean squared error between a prediction and a (possibly soft) target."""
    probs = _as_probs(t)
    soft = _as_soft(target)
    _check_dims(probs, soft)
    return float(np.mean((probs - soft) ** 2))


def mse_grad_t(t, target) -> np.ndarray:
    """Derivative of ``mse`` with respect to each predicted probability."""
    probs = _as_probs(t)
    soft = _as_soft(target)
    _check_dims(probs, soft)
    return 2.0 * (probs - soft) / probs.size


_BASES = {ACE: (ace, ace_grad_t), MSE: (mse, mse_grad_t)}


def base_loss_fns(base: str):
    """The (value, grad_t) pair for a base-loss name, 'ace' or 'mse'."""
    try:
        return _BASES[base]
    except KeyError:
        raise ValueError(f"base loss must be 'ace' or 'mse', got {base!r}") from None


def _targets_and_alphas(targets, alphas) -> tuple[list[np.ndarray], tuple[float, ...]]:
    """Normalize either a TargetSet or an explicit (targets, alphas) pair."""
    if isinstance(targets, TargetSet):
        if alphas is not None:
            raise ValueError("alphas come from the TargetSet; do not pass both")
        masks = [
            targets.target1.bits.astype(np.float64),
            targets.target2.bits.astype(np.float64),
        ]
        weights = targets.alphas
    else:
        masks = [_as_soft(m) for m in targets]
        if alphas is None:
            raise ValueError("alphas are required with a plain target sequence")
        weights = tuple(float(a) for a in alphas)
    if not masks:
        raise ValueError("need at least one target")
    if len(masks) != len(weights):
        raise ValueError("need exactly one weight per target")
    if any(a < 0.0 for a in weights):
        raise ValueError("target weights must be non-negative")
    if abs(sum(weights) - 1.0) > 1e-9:
        raise ValueError("target weights must sum to 1")
    shape = masks[0].shape
    for m in masks[1:]:
        if m.shape != shape:
            raise ValueError("targets must share dimensions")
    return masks, weights


def joint_loss(t, targets, base: str = ACE, alphas: Sequence[float] | None = None) -> float:
    """Weighted sum of the base loss against every target.

    ``targets`` is a TargetSet (weights included) or any sequence of masks
    or soft arrays with explicit ``alphas``.  Summation uses ``math.fsum``
    so permuting the (target, weight) pairs cannot change the result.
    """
    value_fn, _ = base_loss_fns(base)
    masks, weights = _targets_and_alphas(targets, alphas)
    probs = _as_probs(t)
    return math.fsum(a * value_fn(probs, m) for a, m in zip(weights, masks))


def joint_grad_t(t, targets, base: str = ACE, alphas: Sequence[float] | None = None) -> np.ndarray:
    """Derivative of ``joint_loss`` with respect to each predicted probability."""
    _, grad_fn = base_loss_fns(base)
    masks, weights = _targets_and_alphas(targets, alphas)
    probs = _as_probs(t)
    total = np.zeros_like(probs)
    for a, m in zip(weights, masks):
        total += a * grad_fn(probs, m)
    return total


def blend_targets(targets, alphas: Sequence[float] | None = None) -> np.ndarray:
    """The weighted per-pixel combination of the targets, a soft array."""
    masks, weights = _targets_and_alphas(targets, alphas)
    blended = np.zeros_like(masks[0])
    for a, m in zip(weights, masks):
        blended += a * m
    return blended


def variance_term(targets, alphas: Sequence[float] | None = None) -> float:
    """Mean weighted spread of the targets around their blend.

    Written as a sum of squared deviations, so it is non-negative by
    construction and exactly zero when every weighted target agrees.
    """
    masks, weights = _targets_and_alphas(targets, alphas)
    blended = np.zeros_like(masks[0])
    for a, m in zip(weights, masks):
        blended += a * m
    spread = np.zeros_like(blended)
    for a, m in zip(weights, masks):
        spread += a * (m - blended) ** 2
    return float(spread.mean())


def verify_theorem1(t, targets, base: str = ACE, alphas: Sequence[float] | None = None) -> float:
    """Residual between the joint loss and its blended-target form.

    For the cross-entropy base the two should match directly; for the
    squared-error base the gap should equal ``variance_term``.  Both sides
    are computed through independent paths; callers assert the residual is
    tiny (1e-9 on well-scaled inputs).
    """
    base_loss_fns(base)
    joint = joint_loss(t, targets, base, alphas)
    blended = blend_targets(targets, alphas)
    if base == ACE:
        return abs(joint - ace(t, blended))
    return abs(joint - mse(t, blended) - variance_term(targets, alphas))
