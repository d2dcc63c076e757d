"""Axis-aligned 3D boxes stored as (cx, cy, cz, sx, sy, sz)."""
import numpy as np


def as_box(box):
    box = np.asarray(box, dtype=np.float64)
    if box.shape != (6,):
        raise ValueError(f"box must have 6 entries, got shape {box.shape}")
    if not np.isfinite(box).all():
        raise ValueError("box must be finite")
    if not (box[3:] > 0).all():
        raise ValueError("box sizes must be positive")
    return box


def bounds(box):
    half = box[3:] / 2.0
    return box[:3] - half, box[:3] + half


def overlap(a, b):
    """Per-axis intersection extents (clamped at 0) and the intersection volume."""
    alo, ahi = bounds(a)
    blo, bhi = bounds(b)
    ext = np.maximum(np.minimum(ahi, bhi) - np.maximum(alo, blo), 0.0)
    return ext, float(np.prod(ext))


def volume(box):
    return float(np.prod(box[3:]))
