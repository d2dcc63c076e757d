"""Loss terms with analytic gradients, the weighted combiners, and a gradient checker.

Every loss returns a :class:`LossValueGrad` whose ``grad`` is taken with
respect to the prediction argument and has the prediction's shape.
"""
from dataclasses import dataclass, field

import numpy as np

from .boxes import as_box, bounds, overlap, volume


@dataclass(frozen=True)
class LossValueGrad:
    value: float
    grad: np.ndarray


@dataclass(frozen=True)
class LossWeights:
    """``alpha`` weights the total loss, ``beta`` the per-decoder-layer loss.

    Slot order: alpha = (rec, focal, dice, kps); beta = (coord, size, giou,
    sem, pos).
    """

    alpha: tuple = field(default=None)
    beta: tuple = (5.0, 1.0, 1.0, 0.5, 0.5)
    num_decoder_layers: int = 6

    def __post_init__(self):
        if self.num_decoder_layers < 1:
            raise ValueError("num_decoder_layers must be >= 1")
        alpha = self.alpha
        if alpha is None:
            alpha = (1.0 / (self.num_decoder_layers + 1), 10.0, 2.0, 8.0)
        alpha = tuple(float(a) for a in alpha)
        beta = tuple(float(b) for b in self.beta)
        if len(alpha) != 4 or len(beta) != 5:
            raise ValueError("need 4 alpha and 5 beta weights")
        if min(alpha + beta) < 0:
            raise ValueError("loss weights must be non-negative")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def scanrefer(cls, num_decoder_layers=6):
        return cls(num_decoder_layers=num_decoder_layers)

    @classmethod
    def referit3d(cls, num_decoder_layers=6):
        return cls(beta=(5.0, 1.0, 1.0, 1.0, 1.0), num_decoder_layers=num_decoder_layers)


def _pair(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise ValueError("empty input")
    return pred, target


def smooth_l1(pred, target, beta=1.0):
    """Mean Huber-style loss: quadratic below ``beta``, linear above."""
    if beta <= 0:
        raise ValueError("beta must be > 0")
    pred, target = _pair(pred, target)
    diff = pred - target
    small = np.abs(diff) < beta
    per = np.where(small, 0.5 * diff * diff / beta, np.abs(diff) - 0.5 * beta)
    grad = np.where(small, diff / beta, np.sign(diff)) / diff.size
    return LossValueGrad(float(per.mean()), grad)


def _others(v):
    # products of the other two components, no division
    return np.array([v[1] * v[2], v[0] * v[2], v[0] * v[1]])


def giou_3d(a, b):
    a, b = as_box(a), as_box(b)
    _, inter = overlap(a, b)
    union = volume(a) + volume(b) - inter
    alo, ahi = bounds(a)
    blo, bhi = bounds(b)
    hull = float(np.prod(np.maximum(ahi, bhi) - np.minimum(alo, blo)))
    return inter / union - (hull - union) / hull


def giou_loss_3d(pred_box, gt_box):
    """``1 - GIoU`` for axis-aligned boxes; gradient w.r.t. ``pred_box``.

    At exactly coincident faces the min/max selectors take subgradient 0.
    """
    a, b = as_box(pred_box), as_box(gt_box)
    alo, ahi = bounds(a)
    blo, bhi = bounds(b)
    ext, inter = overlap(a, b)
    hull_ext = np.maximum(ahi, bhi) - np.minimum(alo, blo)
    hull = float(np.prod(hull_ext))
    va = volume(a)
    union = va + volume(b) - inter
    value = 2.0 - inter / union - union / hull

    d_inter = -(union + inter) / union**2 + 1.0 / hull
    d_va = inter / union**2 - 1.0 / hull
    d_hull = union / hull**2

    live = ext > 0
    inter_part = _others(ext) * live
    hull_part = _others(hull_ext)
    g_hi = d_inter * inter_part * (ahi < bhi) + d_hull * hull_part * (ahi > bhi)
    g_lo = -d_inter * inter_part * (alo > blo) - d_hull * hull_part * (alo < blo)
    grad = np.empty(6)
    grad[:3] = g_hi + g_lo
    grad[3:] = 0.5 * (g_hi - g_lo) + d_va * _others(a[3:])
    return LossValueGrad(float(value), grad)


def focal_loss(probs, targets, alpha_bal=0.25, gamma=2.0):
    """Mean binary focal loss on probabilities; gradient w.r.t. ``probs``."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    p, y = _pair(probs, targets)
    if not ((p > 0) & (p < 1)).all():
        raise ValueError("probs must lie strictly inside (0, 1)")
    pos = y > 0.5
    pt = np.where(pos, p, 1.0 - p)
    at = np.where(pos, alpha_bal, 1.0 - alpha_bal)
    q = 1.0 - pt
    log_pt = np.log(pt)
    per = -at * q**gamma * log_pt
    if gamma == 0:
        d_pt = -at / pt
    else:
        d_pt = at * (gamma * q ** (gamma - 1.0) * log_pt - q**gamma / pt)
    grad = np.where(pos, d_pt, -d_pt) / p.size
    return LossValueGrad(float(per.mean()), grad)


def dice_loss(probs, targets, smooth=1.0):
    """``1 - (2 sum(p y) + s) / (sum(p) + sum(y) + s)``; 0 when both sums and ``s`` vanish."""
    if smooth < 0:
        raise ValueError("smooth must be >= 0")
    p, y = _pair(probs, targets)
    num = 2.0 * float((p * y).sum()) + smooth
    den = float(p.sum() + y.sum()) + smooth
    if den == 0.0:
        return LossValueGrad(0.0, np.zeros_like(p))
    grad = -(2.0 * y * den - num) / den**2
    return LossValueGrad(1.0 - num / den, grad)


def mask_targets(gt_point_mask, partition, granularity="point"):
    """Binary targets at point or superpoint level.

    At superpoint level a segment is positive when at least half of its
    points are.
    """
    gt = np.asarray(gt_point_mask, dtype=bool)
    if granularity == "point":
        return gt.astype(np.float64)
    if granularity != "superpoint":
        raise ValueError(f"unknown granularity {granularity!r}")
    hits = np.bincount(partition.labels, weights=gt.astype(np.float64), minlength=partition.m)
    return (2.0 * hits >= partition.segment_sizes).astype(np.float64)


def mask_losses(mask, query_index, gt_point_mask, partition, granularity="point",
                alpha_bal=0.25, gamma=2.0, smooth=1.0):
    """Focal and dice terms for one query column of a mask prediction."""
    src = mask.full_mask if granularity == "point" else mask.superpoint_mask
    if src is None:
        raise ValueError(f"mask prediction has no {granularity}-level mask")
    probs = src[:, query_index]
    target = mask_targets(gt_point_mask, partition, granularity)
    return focal_loss(probs, target, alpha_bal, gamma), dice_loss(probs, target, smooth)


def combine_decoder_loss(terms, weights):
    """Weighted sum of (coord, size, giou, sem, pos) for one decoder layer."""
    terms = np.asarray(terms, dtype=np.float64)
    if terms.shape != (5,):
        raise ValueError("expected 5 loss terms")
    if not np.isfinite(terms).all() or (terms < 0).any():
        raise ValueError("loss terms must be finite and non-negative")
    return float(sum(b * t for b, t in zip(weights.beta, terms)))


def total_loss(per_layer_dec, focal, dice, kps=0.0, weights=None):
    weights = weights or LossWeights()
    dec = np.asarray(per_layer_dec, dtype=np.float64).ravel()
    if dec.size == 0 or not np.isfinite(dec).all():
        raise ValueError("per-layer decoder losses must be finite and non-empty")
    rec = float(dec.sum()) / dec.size
    a1, a2, a3, a4 = weights.alpha
    return a1 * rec + a2 * focal + a3 * dice + a4 * kps


def finite_difference_check(loss_op, point, epsilon=1e-5):
    """Max over coordinates of ``|fd - analytic| / max(1, |analytic|)``.

    ``loss_op`` maps an array to a :class:`LossValueGrad`; central differences
    are taken at ``point``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    x = np.array(point, dtype=np.float64)
    analytic = np.asarray(loss_op(x).grad, dtype=np.float64).reshape(x.shape)
    flat = x.reshape(-1)
    fd = np.empty(flat.size)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + epsilon
        up = loss_op(x).value
        flat[i] = keep - epsilon
        down = loss_op(x).value
        flat[i] = keep
        fd[i] = (up - down) / (2.0 * epsilon)
    a = analytic.reshape(-1)
    return float(np.max(np.abs(fd - a) / np.maximum(1.0, np.abs(a))))
