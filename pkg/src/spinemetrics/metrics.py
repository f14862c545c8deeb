"""Confusion matrix and the four common segmentation metrics.

pixel accuracy, mean accuracy, mean IoU and frequency-weighted IoU, computed
from per-pixel class counts n_ij (rows: ground truth, columns: prediction).
Classes absent from the ground truth are excluded from the means and reported
as undefined (None) in the per-class IoU list.
"""

import io
import csv
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ClassIndexOutOfRange, DimensionMismatch, EmptyInput, EmptyMatrix
from .mask_core import InstanceSet, merge_to_binary


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (n_cl, n_cl) int64

    @property
    def n_cl(self):
        return self.counts.shape[0]


@dataclass
class MetricsRecord:
    pixel_accuracy: float
    mean_accuracy: float
    mean_iou: float
    fw_iou: float
    per_class_iou: list = field(default_factory=list)  # None where undefined


@dataclass
class DatasetSummary:
    pixel_accuracy: float
    mean_accuracy: float
    mean_iou: float
    fw_iou: float
    per_image: dict = field(default_factory=dict)  # image_id -> MetricsRecord


def confusion_matrix(gt, pred, n_cl):
    gt = np.asarray(gt)
    pred = np.asarray(pred)
    if gt.shape != pred.shape:
        raise DimensionMismatch(f"mask shapes differ: {gt.shape} vs {pred.shape}")
    if gt.size and (int(gt.max()) >= n_cl or int(pred.max()) >= n_cl):
        raise ClassIndexOutOfRange(f"pixel value >= n_cl ({n_cl})")
    return ConfusionMatrix(kernels.confusion_counts(gt, pred, n_cl))


def compute_metrics(cm):
    counts = cm.counts.astype(np.float64)
    total = counts.sum()
    if total == 0:
        raise EmptyMatrix("confusion matrix holds no pixels")
    t = counts.sum(axis=1)          # ground-truth pixels per class
    col = counts.sum(axis=0)        # predicted pixels per class
    diag = np.diag(counts)
    present = t > 0

    pixel_accuracy = float(diag.sum() / total)

    per_class_iou = []
    accs = []
    ious = []
    for i in range(cm.n_cl):
        if not present[i]:
            per_class_iou.append(None)
            continue
        denom = t[i] + col[i] - diag[i]
        iou = float(diag[i] / denom) if denom > 0 else 0.0
        per_class_iou.append(iou)
        ious.append(iou)
        accs.append(float(diag[i] / t[i]))

    mean_accuracy = float(np.mean(accs))
    mean_iou = float(np.mean(ious))
    fw = sum(t[i] * per_class_iou[i] for i in range(cm.n_cl) if present[i])
    fw_iou = float(fw / t[present].sum())
    return MetricsRecord(pixel_accuracy, mean_accuracy, mean_iou, fw_iou, per_class_iou)


def _as_binary(side):
    if isinstance(side, InstanceSet):
        return merge_to_binary(side)
    return (np.asarray(side) != 0).astype(np.uint8)


def paint_instances(iset, n_cl=None):
    """Paint an InstanceSet to a semantic label mask.

    Contested pixels go to the higher-scored instance (ties to the lower id):
    instances are painted lowest priority first so the highest-priority one
    lands last.
    """
    out = np.zeros((iset.height, iset.width), dtype=np.uint8)
    order = sorted(
        iset.instances,
        key=lambda inst: (-(inst.score if inst.score is not None else 1.0), inst.id),
    )
    for inst in reversed(order):
        out[inst.mask != 0] = inst.class_index
    return out


def evaluate_pair(gt, pred, mode="binary", n_cl=None):
    """Evaluate a prediction against ground truth.

    ``binary`` merges both sides to foreground/background first; ``per_class``
    compares full label masks (InstanceSets are painted, highest score wins).
    ``n_cl`` is required for per_class when passing raw label masks.
    """
    if mode == "binary":
        return compute_metrics(confusion_matrix(_as_binary(gt), _as_binary(pred), 2))
    if mode != "per_class":
        raise ValueError(f"unknown mode {mode!r}")
    gt_mask = paint_instances(gt) if isinstance(gt, InstanceSet) else np.asarray(gt)
    pred_mask = paint_instances(pred) if isinstance(pred, InstanceSet) else np.asarray(pred)
    if n_cl is None:
        n_cl = int(max(gt_mask.max(), pred_mask.max())) + 1
    return compute_metrics(confusion_matrix(gt_mask, pred_mask, n_cl))


def aggregate(records):
    """Unweighted arithmetic mean of each metric over (image_id, record) pairs."""
    records = list(records)
    if not records:
        raise EmptyInput("no metrics records to aggregate")
    per_image = dict(records)
    return DatasetSummary(
        pixel_accuracy=float(np.mean([r.pixel_accuracy for _, r in records])),
        mean_accuracy=float(np.mean([r.mean_accuracy for _, r in records])),
        mean_iou=float(np.mean([r.mean_iou for _, r in records])),
        fw_iou=float(np.mean([r.fw_iou for _, r in records])),
        per_image=per_image,
    )


def metrics_csv(records, n_cl):
    """Per-image metrics as CSV text; undefined per-class IoUs are empty cells."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["image_id", "pixel_accuracy", "mean_accuracy", "mean_iou", "fw_iou"]
    header += [f"iou_class_{i}" for i in range(n_cl)]
    writer.writerow(header)
    for image_id, rec in sorted(records, key=lambda kv: kv[0]):
        row = [image_id,
               f"{rec.pixel_accuracy:.12f}", f"{rec.mean_accuracy:.12f}",
               f"{rec.mean_iou:.12f}", f"{rec.fw_iou:.12f}"]
        per_class = list(rec.per_class_iou) + [None] * (n_cl - len(rec.per_class_iou))
        row += ["" if v is None else f"{v:.12f}" for v in per_class[:n_cl]]
        writer.writerow(row)
    return buf.getvalue()
