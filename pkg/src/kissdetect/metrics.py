"""Per-example binary classification metrics (class 1 is the positive class)."""
import json
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import ValidationError
from .validation import check_label_stream


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValidationError("confusion counts must be nonnegative")

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn


def confusion_counts(predicted, actual):
    pred = check_label_stream(predicted)
    act = check_label_stream(actual)
    if pred.shape != act.shape:
        raise ValidationError(f"length mismatch: {pred.size} predictions vs {act.size} labels")
    return ConfusionCounts(
        tp=int(np.sum((pred == 1) & (act == 1))),
        fp=int(np.sum((pred == 1) & (act == 0))),
        tn=int(np.sum((pred == 0) & (act == 0))),
        fn=int(np.sum((pred == 0) & (act == 1))),
    )


def precision_recall_f1(counts):
    """Precision, recall and F1; any zero denominator yields 0."""
    tp, fp, fn = counts.tp, counts.fp, counts.fn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def f1_score(predicted, actual):
    return precision_recall_f1(confusion_counts(predicted, actual))[2]


def metrics_dict(counts):
    p, r, f1 = precision_recall_f1(counts)
    return {"precision": p, "recall": r, "f1": f1, **asdict(counts)}


def metrics_json(counts):
    return json.dumps(metrics_dict(counts))
