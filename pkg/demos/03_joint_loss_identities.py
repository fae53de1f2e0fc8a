"""
Demo 03: the joint loss collapses to a single blended target
============================================================
Training against two targets with weights summing to one never needs two
loss evaluations:

  cross entropy:  sum_j a_j * ACE(t, t_j)  ==  ACE(t, sum_j a_j t_j)
  squared error:  sum_j a_j * MSE(t, t_j)  ==  MSE(t, blend) + spread

where `spread` depends only on the targets, never on the prediction, so the
two objectives share every gradient.  This script checks both identities on
random inputs.
"""

import numpy as np

from osamtl.imaging import BinaryMask, TargetSet
from osamtl.mtl.losses import ace, blend_targets, joint_loss, mse, variance_term


def main():
    rng = np.random.default_rng(7)
    shape = (16, 16)
    t = rng.uniform(0.02, 0.98, size=shape)
    t1 = rng.random(shape) < 0.5
    t2 = t1 & (rng.random(shape) < 0.5)
    targets = TargetSet(BinaryMask(t1), BinaryMask(t2), alphas=(0.7, 0.3))
    blend = blend_targets(targets)

    left = joint_loss(t, targets, base="ace")
    right = ace(t, blend)
    print("cross-entropy identity")
    print(f"  joint loss      = {left:.12f}")
    print(f"  blended-target  = {right:.12f}")
    print(f"  residual        = {abs(left - right):.2e}")

    left = joint_loss(t, targets, base="mse")
    right = mse(t, blend)
    spread = variance_term(targets)
    print("squared-error decomposition")
    print(f"  joint loss          = {left:.12f}")
    print(f"  blended + spread    = {right + spread:.12f}")
    print(f"  spread (>= 0)       = {spread:.12f}")
    print(f"  residual            = {abs(left - (right + spread)):.2e}")

    # The spread term is what the prediction can never remove: with weights
    # (0.5, 0.5) and targets disagreeing on a pixel, the best any prediction
    # can do there is 0.5.
    half = TargetSet(BinaryMask(np.ones((1, 4), bool)),
                     BinaryMask(np.zeros((1, 4), bool)))
    print(f"\nfully disagreeing targets, alphas (0.5, 0.5): "
          f"spread = {variance_term(half):.3f} (= 0.5^2)")


if __name__ == "__main__":
    main()
