"""Box-level detection evaluation: IoU, greedy matching, P/R/F1, AP and mAP."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .boxes import CLASS_NAMES, Box, Detection, sort_key
from .errors import EmptyGroundTruthError, UndefinedAPError

DEFAULT_IOU = 0.5


def iou(a: Box, b: Box) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def match_detections(dets: Sequence[Detection], gts: Sequence[Box],
                     iou_thresh: float = DEFAULT_IOU) -> tuple[list[bool], int]:
    """Greedy confidence-ordered matching for a single class.

    Returns one TP flag per detection *in descending-confidence order* (see
    :func:`riverlitter.boxes.sort_key`) and the count of unmatched ground truths.
    """
    order = sorted(dets, key=sort_key)
    taken = [False] * len(gts)
    labels = []
    for d in order:
        best, best_iou = -1, -1.0
        for j, g in enumerate(gts):
            if taken[j]:
                continue
            v = iou(d.box, g)
            if v > best_iou:
                best, best_iou = j, v
        if best >= 0 and best_iou >= iou_thresh:
            taken[best] = True
            labels.append(True)
        else:
            labels.append(False)
    return labels, taken.count(False)


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)


def confusion_metrics(counts: ConfusionCounts) -> tuple[float, float, float]:
    """Precision, recall and F1; any zero denominator yields 0."""
    tp, fp, fn = counts.tp, counts.fp, counts.fn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def pr_curve(dets: Sequence[Detection], gts: Sequence[Box],
             iou_thresh: float = DEFAULT_IOU) -> tuple[np.ndarray, np.ndarray]:
    labels, _ = match_detections(dets, gts, iou_thresh)
    tp = np.cumsum(np.asarray(labels, dtype=np.float64))
    ranks = np.arange(1, len(labels) + 1, dtype=np.float64)
    return tp / len(gts), tp / ranks


def average_precision(dets: Sequence[Detection], gts: Sequence[Box],
                      iou_thresh: float = DEFAULT_IOU) -> float:
    """Area under the interpolated (right-envelope) precision/recall curve."""
    if not gts:
        raise UndefinedAPError("average precision undefined without ground truth")
    labels, _ = match_detections(dets, gts, iou_thresh)
    return envelope_ap(labels, len(gts))


def envelope_ap(labels: Sequence[bool], n_gt: int) -> float:
    """AP from TP flags already sorted by descending confidence."""
    tp = np.cumsum(np.asarray(labels, dtype=np.float64))
    recall = tp / n_gt
    precision = tp / np.arange(1, len(tp) + 1, dtype=np.float64)
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.nonzero(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


@dataclass
class ClassResult:
    precision: float
    recall: float
    f1: float
    ap: float | None
    gt_count: int
    counts: ConfusionCounts = field(default_factory=ConfusionCounts)

    def to_json(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                "ap": self.ap, "gt_count": self.gt_count,
                "tp": self.counts.tp, "fp": self.counts.fp, "fn": self.counts.fn}


@dataclass
class EvalReport:
    per_class: dict[int, ClassResult]
    map_score: float
    precision: float
    recall: float
    f1: float
    iou_thresh: float = DEFAULT_IOU
    class_names: tuple[str, ...] = CLASS_NAMES

    def to_json(self) -> dict:
        return {
            "iou_thresh": self.iou_thresh,
            "map": self.map_score,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "per_class": {self.class_names[k] if k < len(self.class_names) else str(k):
                          self.per_class[k].to_json() for k in sorted(self.per_class)},
        }


def mean_ap(dets_by_class: Mapping[int, Sequence[Detection]],
            gts_by_class: Mapping[int, Sequence[Box]],
            iou_thresh: float = DEFAULT_IOU,
            class_names: tuple[str, ...] = CLASS_NAMES) -> EvalReport:
    """Per-class results plus mAP over classes that have ground truth.

    The top-level precision/recall/F1 pool the confusion counts of every class.
    """
    classes = sorted(set(dets_by_class) | set(gts_by_class))
    per_class = {}
    total = ConfusionCounts()
    aps = []
    for k in classes:
        dets = list(dets_by_class.get(k, ()))
        gts = list(gts_by_class.get(k, ()))
        labels, fn = match_detections(dets, gts, iou_thresh)
        counts = ConfusionCounts(tp=sum(labels), fp=len(labels) - sum(labels), fn=fn)
        total = total + counts
        p, r, f1 = confusion_metrics(counts)
        ap = average_precision(dets, gts, iou_thresh) if gts else None
        if ap is not None:
            aps.append(ap)
        per_class[k] = ClassResult(p, r, f1, ap, len(gts), counts)
    if not aps:
        raise EmptyGroundTruthError("no class has ground truth")
    p, r, f1 = confusion_metrics(total)
    return EvalReport(per_class, float(np.mean(aps)), p, r, f1, iou_thresh, class_names)


def partition(items, binary: bool = False) -> dict[int, list]:
    """Group boxes or detections by class id; ``binary`` folds every class into 0."""
    out: dict[int, list] = {}
    for it in items:
        key = 0 if binary else it.class_id
        out.setdefault(key, []).append(it)
    return out


def evaluate(dets: Sequence[Detection], gts: Sequence[Box],
             iou_thresh: float = DEFAULT_IOU, binary: bool = False) -> EvalReport:
    """Convenience wrapper: partition flat lists by class and run :func:`mean_ap`.

    With ``binary=True`` every box counts as generic litter, but matching still
    uses geometry only, so a glass bottle reported as plastic is a hit.
    """
    names = ("litter",) if binary else CLASS_NAMES
    return mean_ap(partition(dets, binary), partition(gts, binary), iou_thresh, names)


def evaluate_images(pairs: Sequence[tuple[Sequence[Detection], Sequence[Box]]],
                    iou_thresh: float = DEFAULT_IOU, binary: bool = False) -> EvalReport:
    """Evaluate a test set of several images.

    Matching happens inside each image; the PR curve of each class then ranks
    all of that class's detections across images by confidence.
    """
    names = ("litter",) if binary else CLASS_NAMES
    ranked: dict[int, list] = {}
    gt_total: dict[int, int] = {}
    counts: dict[int, ConfusionCounts] = {}
    for index, (dets, gts) in enumerate(pairs):
        dets_by = partition(dets, binary)
        gts_by = partition(gts, binary)
        for k in set(dets_by) | set(gts_by):
            d, g = dets_by.get(k, []), gts_by.get(k, [])
            labels, fn = match_detections(d, g, iou_thresh)
            order = sorted(d, key=sort_key)
            ranked.setdefault(k, []).extend(
                (sort_key(det), index, lab) for det, lab in zip(order, labels))
            gt_total[k] = gt_total.get(k, 0) + len(g)
            counts[k] = counts.get(k, ConfusionCounts()) + ConfusionCounts(
                tp=sum(labels), fp=len(labels) - sum(labels), fn=fn)
    per_class = {}
    total = ConfusionCounts()
    aps = []
    for k in sorted(counts):
        labels = [lab for _, _, lab in sorted(ranked.get(k, []), key=lambda t: (t[0], t[1]))]
        n_gt = gt_total.get(k, 0)
        ap = envelope_ap(labels, n_gt) if n_gt else None
        if ap is not None:
            aps.append(ap)
        p, r, f1 = confusion_metrics(counts[k])
        total = total + counts[k]
        per_class[k] = ClassResult(p, r, f1, ap, n_gt, counts[k])
    if not aps:
        raise EmptyGroundTruthError("no class has ground truth")
    p, r, f1 = confusion_metrics(total)
    return EvalReport(per_class, float(np.mean(aps)), p, r, f1, iou_thresh, names)
