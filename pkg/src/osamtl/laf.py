"""Logical assessment of predictions against abduced targets.

When clean labels do not exist, a prediction is scored logically: predicted
foreground inside the second target's foreground is certainly right (LTP),
predicted foreground outside the first target's foreground is certainly wrong
(LFP), predicted background inside the second target's foreground is a missed
certainty (LFN). Pixels between the two targets are unknowable and count
toward nothing. Ratio metrics follow the usual precision/recall shapes with
every 0/0 defined as 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from osamtl.imaging import BinaryMask


@dataclass(frozen=True)
class LafCounts:
    """Pixel counts; real-valued because per-image means are taken."""

    ltp: float
    lfp: float
    lfn: float

    def __post_init__(self) -> None:
        if min(self.ltp, self.lfp, self.lfn) < 0:
            raise ValueError("counts must be non-negative")


@dataclass(frozen=True)
class LafReport:
    counts: LafCounts
    lprecision: float
    lrecall: float
    lf1: float
    lfiou: float


@dataclass(frozen=True)
class OracleReport:
    """Plain confusion metrics against a known true mask."""

    precision: float
    recall: float
    f1: float
    iou: float


def binarize(probs: np.ndarray, threshold: float = 0.5) -> tuple[BinaryMask, BinaryMask]:
    """Split a probability map into predicted foreground/background; the
    threshold itself maps to foreground."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie strictly between 0 and 1")
    arr = np.asarray(probs, dtype=np.float64)
    foreground = arr >= threshold
    return BinaryMask(foreground), BinaryMask(~foreground)


def laf_counts(t_f: BinaryMask, t_b: BinaryMask, target1: BinaryMask, target2: BinaryMask) -> LafCounts:
    """ltp = |t_f ∩ target2|, lfp = |t_f \\ target1|, lfn = |t_b ∩ target2|."""
    shapes = {m.bits.shape for m in (t_f, t_b, target1, target2)}
    if len(shapes) != 1:
        raise ValueError("all masks must share dimensions")
    if np.any(t_f.bits & t_b.bits) or not np.all(t_f.bits | t_b.bits):
        raise ValueError("foreground/background must partition the pixels")
    if np.any(target2.bits & ~target1.bits):
        raise ValueError("the second target must be contained in the first")
    ltp = float(np.sum(t_f.bits & target2.bits))
    lfp = float(np.sum(t_f.bits & ~target1.bits))
    lfn = float(np.sum(t_b.bits & target2.bits))
    return LafCounts(ltp, lfp, lfn)


def _ratio(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator > 0 else 0.0


def laf_metrics(counts: LafCounts) -> LafReport:
    precision = _ratio(counts.ltp, counts.ltp + counts.lfp)
    recall = _ratio(counts.ltp, counts.ltp + counts.lfn)
    f1 = _ratio(2 * precision * recall, precision + recall)
    fiou = _ratio(counts.ltp, counts.ltp + counts.lfp + counts.lfn)
    return LafReport(counts, precision, recall, f1, fiou)


def aggregate_laf(per_image: Sequence[LafCounts]) -> LafReport:
    """Micro aggregation: mean counts over images, then metrics."""
    if not per_image:
        raise ValueError("nothing to aggregate")
    mean = LafCounts(
        float(np.mean([c.ltp for c in per_image])),
        float(np.mean([c.lfp for c in per_image])),
        float(np.mean([c.lfn for c in per_image])),
    )
    return laf_metrics(mean)


def macro_laf(per_image: Sequence[LafCounts]) -> LafReport:
    """Macro companion to aggregate_laf: metrics per image, then means.

    Emitted alongside the micro numbers for comparison; the micro form is the
    primary aggregation.
    """
    if not per_image:
        raise ValueError("nothing to aggregate")
    reports = [laf_metrics(c) for c in per_image]
    mean_counts = LafCounts(
        float(np.mean([c.ltp for c in per_image])),
        float(np.mean([c.lfp for c in per_image])),
        float(np.mean([c.lfn for c in per_image])),
    )
    return LafReport(
        mean_counts,
        float(np.mean([r.lprecision for r in reports])),
        float(np.mean([r.lrecall for r in reports])),
        float(np.mean([r.lf1 for r in reports])),
        float(np.mean([r.lfiou for r in reports])),
    )


def oracle_metrics(t_f: BinaryMask, true_mask: BinaryMask) -> OracleReport:
    if t_f.bits.shape != true_mask.bits.shape:
        raise ValueError("masks must share dimensions")
    tp = float(np.sum(t_f.bits & true_mask.bits))
    fp = float(np.sum(t_f.bits & ~true_mask.bits))
    fn = float(np.sum(~t_f.bits & true_mask.bits))
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f1 = _ratio(2 * precision * recall, precision + recall)
    iou = _ratio(tp, tp + fp + fn)
    return OracleReport(precision, recall, f1, iou)


def pooled_oracle_metrics(pairs: Iterable[tuple[BinaryMask, BinaryMask]]) -> OracleReport:
    """Oracle metrics over pooled counts of (predicted, true) mask pairs."""
    tp = fp = fn = 0.0
    seen = False
    for t_f, true_mask in pairs:
        seen = True
        if t_f.bits.shape != true_mask.bits.shape:
            raise ValueError("masks must share dimensions")
        tp += float(np.sum(t_f.bits & true_mask.bits))
        fp += float(np.sum(t_f.bits & ~true_mask.bits))
        fn += float(np.sum(~t_f.bits & true_mask.bits))
    if not seen:
        raise ValueError("nothing to aggregate")
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f1 = _ratio(2 * precision * recall, precision + recall)
    iou = _ratio(tp, tp + fp + fn)
    return OracleReport(precision, recall, f1, iou)


CSV_HEADER = "solution,ltp,lfp,lfn,lprecision,lrecall,lf1,lfiou"


def report_csv_row(solution: str, report: LafReport) -> str:
    """One CSV row per the fixed schema, ratios at 4 decimal places."""
    return (
        f"{solution},{report.counts.ltp:.4f},{report.counts.lfp:.4f},{report.counts.lfn:.4f},"
        f"{report.lprecision:.4f},{report.lrecall:.4f},{report.lf1:.4f},{report.lfiou:.4f}"
    )
