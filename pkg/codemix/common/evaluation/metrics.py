"""Confusion matrices and precision / recall / F1 reports over the three sentiment classes.

Every ratio uses the 0/0 -> 0 convention. Both aggregates of per-class F1 are reported: the macro
(unweighted) mean and the support-weighted mean.
"""

from dataclasses import dataclass

import numpy as np

from codemix.common.datasets.corpus import Sentiment

NUM_CLASSES = len(Sentiment)


@dataclass(frozen=True)
class ConfusionMatrix:
    """3 x 3 counts, rows = gold class, columns = predicted class, in the order negative, neutral, positive."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.shape != (NUM_CLASSES, NUM_CLASSES) or np.any(counts < 0):
            raise ValueError(f"Confusion counts must be a non-negative {NUM_CLASSES}x{NUM_CLASSES} array.")
        object.__setattr__(self, "counts", counts.astype(np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_list(self) -> list[list[int]]:
        return self.counts.tolist()


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricsReport:
    per_class: dict[str, ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_f1: float
    accuracy: float

    @property
    def supports(self) -> dict[str, int]:
        return {name: m.support for name, m in self.per_class.items()}

    def to_dict(self) -> dict:
        return {
            "per_class": {
                name: {"precision": m.precision, "recall": m.recall, "f1": m.f1, "support": m.support}
                for name, m in self.per_class.items()
            },
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "accuracy": self.accuracy,
        }


def _ratio(num: float, den: float) -> float:
    return float(num / den) if den > 0 else 0.0


def confusion(golds, preds) -> ConfusionMatrix:
    golds = np.asarray([int(g) for g in golds], dtype=np.int64)
    preds = np.asarray([int(p) for p in preds], dtype=np.int64)
    if golds.shape != preds.shape:
        raise ValueError(f"Got {golds.shape[0]} gold labels but {preds.shape[0]} predictions.")
    if golds.size == 0:
        raise ValueError("Cannot build a confusion matrix from zero examples.")
    for name, values in (("gold", golds), ("predicted", preds)):
        if values.min() < 0 or values.max() >= NUM_CLASSES:
            raise ValueError(f"{name} classes must be in [0, {NUM_CLASSES}).")
    counts = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    np.add.at(counts, (golds, preds), 1)
    return ConfusionMatrix(counts)


def weighted_f1(f1s, supports) -> float:
    """Support-weighted mean of per-class F1."""
    f1s = np.asarray(f1s, dtype=np.float64)
    supports = np.asarray(supports, dtype=np.float64)
    return _ratio(float(np.dot(f1s, supports)), float(supports.sum()))


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    if cm.total == 0:
        raise ValueError("Cannot compute metrics of an empty confusion matrix.")
    counts = cm.counts
    tp = np.diag(counts)
    predicted = counts.sum(axis=0)
    support = counts.sum(axis=1)

    per_class = {}
    for c in Sentiment:
        precision = _ratio(tp[c], predicted[c])
        recall = _ratio(tp[c], support[c])
        f1 = _ratio(2 * precision * recall, precision + recall)
        per_class[c.label] = ClassMetrics(precision, recall, f1, int(support[c]))

    values = list(per_class.values())
    return MetricsReport(
        per_class=per_class,
        macro_precision=float(np.mean([m.precision for m in values])),
        macro_recall=float(np.mean([m.recall for m in values])),
        macro_f1=float(np.mean([m.f1 for m in values])),
        weighted_f1=weighted_f1([m.f1 for m in values], [m.support for m in values]),
        accuracy=_ratio(tp.sum(), cm.total),
    )


def format_confusion(cm: ConfusionMatrix, title: str | None = None) -> str:
    """Pretty 3 x 3 table, gold classes as rows."""
    names = [c.label for c in Sentiment]
    width = max(max(len(n) for n in names), len(str(int(cm.counts.max())))) + 2
    lines = [] if title is None else [title]
    lines.append("gold \\ pred".ljust(width + 2) + "".join(n.rjust(width) for n in names))
    for name, row in zip(names, cm.counts, strict=True):
        lines.append(name.ljust(width + 2) + "".join(str(int(v)).rjust(width) for v in row))
    return "\n".join(lines)
