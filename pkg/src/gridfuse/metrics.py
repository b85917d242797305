"""Segmentation evaluation and split accounting.

Confusion counting keeps an explicit abstain vector: a prediction of 255 on
a labeled point is not silently dropped, it counts as a false negative for
the ground-truth class.  The mean IoU averages only classes present in the
ground truth or the predictions; exclusions are logged.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DataError

__all__ = [
    "ConfusionMatrix",
    "confusion",
    "miou",
    "SplitTable",
    "split_statistics",
    "format_split_table",
    "cloud_to_cloud",
]

log = logging.getLogger(__name__)

SUBSETS = ("train", "val", "test")


@dataclass
class ConfusionMatrix:
    counts: np.ndarray          # (K, K) int64, [gt, pred]
    abstain: np.ndarray         # (K,) int64, pred == ignore per gt class
    n_classes: int

    def total(self) -> int:
        return int(self.counts.sum() + self.abstain.sum())

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.n_classes != self.n_classes:
            raise ValueError("cannot merge confusion matrices of different K")
        return ConfusionMatrix(
            self.counts + other.counts, self.abstain + other.abstain, self.n_classes
        )


def confusion(pred, gt, n_classes: int, ignore: int = 255) -> ConfusionMatrix:
    """Count (gt, pred) pairs; gt == ignore skipped, pred == ignore abstains."""
    pred = np.asarray(pred).ravel()
    gt = np.asarray(gt).ravel()
    if pred.shape != gt.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {gt.shape}")
    if n_classes < 1:
        raise ValueError("n_classes must be >= 1")
    for name, arr in (("pred", pred), ("gt", gt)):
        if arr.size == 0:
            continue
        ok = (arr == ignore) | ((arr >= 0) & (arr < n_classes))
        if not ok.all():
            bad = int(arr[np.argmin(ok)])
            raise DataError(
                f"{name} label {bad} outside [0, {n_classes}) and not {ignore}"
            )
    valid = gt != ignore
    abstained = valid & (pred == ignore)
    counted = valid & ~abstained
    g = gt[counted].astype(np.int64)
    p = pred[counted].astype(np.int64)
    counts = np.bincount(g * n_classes + p, minlength=n_classes * n_classes)
    abstain = np.bincount(gt[abstained].astype(np.int64), minlength=n_classes)
    return ConfusionMatrix(
        counts.reshape(n_classes, n_classes).astype(np.int64),
        abstain.astype(np.int64),
        n_classes,
    )


def miou(cm: ConfusionMatrix):
    """Per-class IoU and their mean.

    Returns (iou, mean) where iou is float64 with NaN for classes absent
    from both gt and pred (those are excluded from the mean).
    """
    if cm.total() == 0:
        raise ValueError("confusion matrix holds no labeled points")
    tp = np.diag(cm.counts).astype(np.float64)
    gt_count = cm.counts.sum(axis=1) + cm.abstain
    pred_count = cm.counts.sum(axis=0)
    fn = gt_count - np.diag(cm.counts)
    fp = pred_count - np.diag(cm.counts)
    present = (gt_count > 0) | (pred_count > 0)
    denom = tp + fp + fn
    iou = np.full(cm.n_classes, np.nan)
    np.divide(tp, denom, out=iou, where=present & (denom > 0))
    iou[present & (denom == 0)] = 0.0   # unreachable, kept for safety
    absent = np.nonzero(~present)[0]
    if absent.size:
        log.info("mIoU excludes classes absent from gt and pred: %s",
                 ", ".join(map(str, absent)))
    return iou, float(np.nanmean(iou))


# ---------------------------------------------------------------------------
# split statistics

@dataclass
class SplitTable:
    """Per-class point counts for each of train/val/test.

    Percentages are always derived from the stored counts, never cached.
    """

    counts: dict                # subset -> (K,) int64
    n_classes: int

    def class_total(self) -> np.ndarray:
        return sum(self.counts[s] for s in SUBSETS)

    def subset_total(self, subset: str) -> int:
        return int(self.counts[subset].sum())

    def grand_total(self) -> int:
        return int(self.class_total().sum())

    def pct_of_total(self, subset: str) -> np.ndarray:
        """Per-class subset/total percentages (unrounded)."""
        total = self.class_total().astype(np.float64)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(total > 0, 100.0 * self.counts[subset] / total, np.nan)

    def distribution(self, subset: str) -> np.ndarray:
        """Class mix inside one subset, in percent (unrounded)."""
        tot = self.subset_total(subset)
        if tot == 0:
            return np.full(self.n_classes, np.nan)
        return 100.0 * self.counts[subset] / tot


def split_statistics(zone_counts, assignment, n_classes: int = 11) -> SplitTable:
    """Aggregate per-zone class counts into a split table.

    zone_counts: mapping zone -> (K,) count vector
    assignment: mapping zone -> 'train' | 'val' | 'test'
    """
    table = {s: np.zeros(n_classes, dtype=np.int64) for s in SUBSETS}
    for zone, vec in zone_counts.items():
        if zone not in assignment:
            raise DataError(f"zone '{zone}' has no subset assignment")
        subset = assignment[zone]
        if subset not in SUBSETS:
            raise DataError(
                f"zone '{zone}': unknown subset '{subset}' (want train/val/test)"
            )
        vec = np.asarray(vec, dtype=np.int64)
        if vec.shape != (n_classes,):
            raise ValueError(
                f"zone '{zone}': expected {n_classes} class counts, got {vec.shape}"
            )
        if (vec < 0).any():
            raise DataError(f"zone '{zone}': negative count")
        table[subset] += vec
    return SplitTable(counts=table, n_classes=n_classes)


def format_split_table(table: SplitTable, class_names=None) -> str:
    """Render the table with 1-decimal percentages, test share vs total."""
    lines = []
    header = (f"{'class':<28} {'train':>16} {'val':>14} {'test':>16} "
              f"{'total':>16} {'test/total%':>12}")
    lines.append(header)
    total_by_class = table.class_total()
    pct_test = table.pct_of_total("test")
    for c in range(table.n_classes):
        name = class_names[c] if class_names else str(c)
        pct = "-" if np.isnan(pct_test[c]) else f"{pct_test[c]:.1f}"
        lines.append(
            f"{name:<28} {table.counts['train'][c]:>16,} "
            f"{table.counts['val'][c]:>14,} {table.counts['test'][c]:>16,} "
            f"{total_by_class[c]:>16,} {pct:>12}"
        )
    grand = table.grand_total()
    test_total = table.subset_total("test")
    pct = f"{100.0 * test_total / grand:.1f}" if grand else "-"
    lines.append(
        f"{'TOTAL':<28} {table.subset_total('train'):>16,} "
        f"{table.subset_total('val'):>14,} {test_total:>16,} "
        f"{grand:>16,} {pct:>12}"
    )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# cloud-to-cloud distances

def cloud_to_cloud(cloud_a, cloud_b, workers: int = 1):
    """Exact nearest-neighbor distance from every point of A into B.

    Returns (distances, summary) where summary maps quantile labels to
    meters.  B must be non-empty.
    """
    a = np.asarray(cloud_a, dtype=np.float64)
    b = np.asarray(cloud_b, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != 3:
        raise ValueError(f"cloud A must be (N, 3), got {a.shape}")
    if b.ndim != 2 or b.shape[1] != 3:
        raise ValueError(f"cloud B must be (M, 3), got {b.shape}")
    if len(b) == 0:
        raise ValueError("cloud B is empty, nearest neighbors undefined")
    if len(a) == 0:
        return np.empty(0), {}
    tree = cKDTree(b)
    dists, _ = tree.query(a, k=1, workers=workers or 1)
    dists = np.asarray(dists, dtype=np.float64)
    qs = (0.0, 0.25, 0.50, 0.75, 0.90, 1.0)
    labels = ("min", "p25", "median", "p75", "p90", "max")
    summary = {lab: float(np.quantile(dists, q)) for lab, q in zip(labels, qs)}
    summary["mean"] = float(np.mean(dists))
    summary["rms"] = float(np.sqrt(np.mean(dists * dists)))
    return dists, summary
