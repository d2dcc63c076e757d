"""Grounding metrics: box IoU, mask IoU, Acc@IoU and mIoU by category."""
from dataclasses import dataclass

import numpy as np

from .boxes import as_box, overlap, volume

CATEGORIES = ("unique", "multiple")
DEFAULT_THRESHOLDS = (0.25, 0.5)


@dataclass(frozen=True)
class EvalSample:
    pred_mask: np.ndarray
    gt_mask: np.ndarray
    pred_box: np.ndarray
    gt_box: np.ndarray
    category: str

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"category must be one of {CATEGORIES}, got {self.category!r}")
        if np.shape(self.pred_mask) != np.shape(self.gt_mask):
            raise ValueError("mask length mismatch")
        object.__setattr__(self, "pred_box", as_box(self.pred_box))
        object.__setattr__(self, "gt_box", as_box(self.gt_box))


@dataclass(frozen=True)
class Stratum:
    count: int
    acc: dict
    miou: float


@dataclass(frozen=True)
class EvalReport:
    """Per-stratum results keyed by ``"unique"``, ``"multiple"``, ``"overall"``.

    Strata with no samples are ``None``.
    """

    thresholds: tuple
    strata: dict

    def __getitem__(self, key):
        return self.strata[key]

    @property
    def overall(self):
        return self.strata["overall"]

    def acc(self, threshold, stratum="overall"):
        return self.strata[stratum].acc[threshold]

    def to_table(self):
        """Text table: Acc columns per stratum, then overall mIoU, in percent."""
        heads = [f"{s.capitalize()}@{t:g}" for s in CATEGORIES + ("overall",) for t in self.thresholds]
        rows = []
        for name in CATEGORIES + ("overall",):
            st = self.strata[name]
            for t in self.thresholds:
                rows.append("-" if st is None else f"{100.0 * st.acc[t]:.2f}")
        rows.append(f"{100.0 * self.overall.miou:.2f}")
        heads.append("mIoU")
        counts = "  ".join(
            f"{name}={0 if self.strata[name] is None else self.strata[name].count}"
            for name in CATEGORIES + ("overall",)
        )
        widths = [max(len(h), len(v)) for h, v in zip(heads, rows)]
        line1 = " | ".join(h.rjust(w) for h, w in zip(heads, widths))
        line2 = "-+-".join("-" * w for w in widths)
        line3 = " | ".join(v.rjust(w) for v, w in zip(rows, widths))
        return "\n".join([line1, line2, line3, f"samples: {counts}"])


def box_iou_3d(a, b):
    a, b = as_box(a), as_box(b)
    _, inter = overlap(a, b)
    return inter / (volume(a) + volume(b) - inter)


def mask_iou(pred, gt):
    """Intersection over union of two boolean masks; 1.0 when both are empty."""
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ValueError(f"mask length mismatch: {pred.shape} vs {gt.shape}")
    union = np.count_nonzero(pred | gt)
    if union == 0:
        return 1.0
    return np.count_nonzero(pred & gt) / union


def _stratum(ious, mious, thresholds):
    return Stratum(
        count=len(ious),
        acc={t: float(np.count_nonzero(ious >= t)) / len(ious) for t in thresholds},
        miou=float(mious.mean()),
    )


def evaluate(samples, thresholds=DEFAULT_THRESHOLDS):
    """Acc@t over box IoU and mIoU over descriptions, overall and per category."""
    samples = list(samples)
    if not samples:
        raise ValueError("no samples to evaluate")
    thresholds = tuple(float(t) for t in thresholds)
    if not all(0.0 < t < 1.0 for t in thresholds):
        raise ValueError("thresholds must lie in (0, 1)")
    ious = np.array([box_iou_3d(s.pred_box, s.gt_box) for s in samples])
    mious = np.array([mask_iou(s.pred_mask, s.gt_mask) for s in samples])
    cats = np.array([s.category for s in samples])
    strata = {"overall": _stratum(ious, mious, thresholds)}
    for name in CATEGORIES:
        sel = cats == name
        strata[name] = _stratum(ious[sel], mious[sel], thresholds) if sel.any() else None
    return EvalReport(thresholds, strata)
