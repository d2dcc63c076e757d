"""Finite-difference sweep over every loss with an analytic gradient.

Sample points are drawn away from each loss's kinks (by at least 1e-3,
well over ten finite-difference steps) so central differences are valid.
"""
import numpy as np

from .boxes import bounds
from .losses import dice_loss, finite_difference_check, focal_loss, giou_loss_3d, smooth_l1

KINK_MARGIN = 1e-3


def _smooth_l1_case(rng):
    target = rng.normal(size=8)
    while True:
        diff = rng.normal(scale=1.5, size=8)
        if np.all(np.abs(np.abs(diff) - 1.0) > KINK_MARGIN) and np.all(np.abs(diff) > KINK_MARGIN):
            break
    return target + diff, lambda x: smooth_l1(x, target, beta=1.0)


def _giou_case(rng):
    gt = np.concatenate([rng.uniform(-1, 1, 3), rng.uniform(0.2, 2.0, 3)])
    blo, bhi = bounds(gt)
    while True:
        pred = np.concatenate([rng.uniform(-1.5, 1.5, 3), rng.uniform(0.2, 2.0, 3)])
        alo, ahi = bounds(pred)
        gaps = np.concatenate([ahi - bhi, alo - blo, ahi - blo, alo - bhi])
        if np.all(np.abs(gaps) > KINK_MARGIN):
            return pred, lambda x: giou_loss_3d(x, gt)


def _focal_case(rng):
    target = (rng.random(16) < 0.4).astype(np.float64)
    return rng.uniform(0.1, 0.9, 16), lambda x: focal_loss(x, target, alpha_bal=0.25, gamma=2.0)


def _dice_case(rng):
    target = (rng.random(16) < 0.5).astype(np.float64)
    return rng.uniform(0.05, 0.95, 16), lambda x: dice_loss(x, target, smooth=1.0)


CASES = {
    "smooth_l1": _smooth_l1_case,
    "giou_loss_3d": _giou_case,
    "focal_loss": _focal_case,
    "dice_loss": _dice_case,
}


def run_gradcheck(trials=100, epsilon=1e-5, seed=0):
    """Worst relative gradient error per loss over ``trials`` random points."""
    rng = np.random.default_rng(seed)
    worst = {}
    for name, make in CASES.items():
        err = 0.0
        for _ in range(trials):
            point, op = make(rng)
            err = max(err, finite_difference_check(op, point, epsilon))
        worst[name] = err
    return worst
