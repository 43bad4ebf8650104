"""Classification agreement between the label-free and label-based criteria.

Violations detected by the ground-truth criteria act as class labels and
the distance-based decisions act as predictions; agreement is summarised
as accuracy, precision and recall over a sweep of decision thresholds.
Label decisions keep their own threshold fixed (0.05) while only the
distance-criterion threshold is swept.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .core import LengthMismatch, MtrajError
from .harness import SuiteReport
from .metrics import METRIC_KEYS
from .stats import EmptyInput

LABEL_P_THRESHOLD = 0.05

DEFAULT_SWEEP_THRESHOLDS = (0.01, 0.025, 0.05, 0.10, 0.15, 0.20)


class MissingBaselines(MtrajError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_pairs(cls, labels: Sequence[bool], predictions: Sequence[bool]) -> "ConfusionCounts":
        tp = fp = fn = tn = 0
        for label, pred in zip(labels, predictions):
            if label and pred:
                tp += 1
            elif not label and pred:
                fp += 1
            elif label and not pred:
                fn += 1
            else:
                tn += 1
        return cls(tp=tp, fp=fp, fn=fn, tn=tn)


@dataclass(frozen=True)
class ClassificationScores:
    accuracy: float
    precision: float
    recall: float


def classification_scores(labels: Sequence[bool], predictions: Sequence[bool]) -> ClassificationScores:
    """Accuracy, precision and recall of predictions against labels.

    Empty denominators (no predicted or no actual positives) score 1.0
    so all-healthy runs don't produce NaN.
    """
    if len(labels) != len(predictions):
        raise LengthMismatch(f"{len(labels)} labels vs {len(predictions)} predictions")
    if not labels:
        raise EmptyInput("no decisions to score")
    c = ConfusionCounts.from_pairs(labels, predictions)
    precision = c.tp / (c.tp + c.fp) if (c.tp + c.fp) else 1.0
    recall = c.tp / (c.tp + c.fn) if (c.tp + c.fn) else 1.0
    return ClassificationScores(
        accuracy=(c.tp + c.tn) / c.total, precision=precision, recall=recall
    )


@dataclass(frozen=True)
class SweepRow:
    threshold: float
    accuracy: float
    precision: float
    recall: float


def _decision_pairs(report: SuiteReport, label_criterion: str) -> tuple[list[float], list[bool]]:
    """Per-comparison distance p-values paired with broadcast case labels."""
    if label_criterion not in METRIC_KEYS:
        raise ValueError(f"unknown label criterion {label_criterion!r}")
    p_values: list[float] = []
    labels: list[bool] = []
    for case in report.case_reports:
        if case.baselines is None:
            raise MissingBaselines(
                f"case {case.test_case_id!r} has no ground-truth baselines"
            )
        label = case.baselines[label_criterion].p_value <= LABEL_P_THRESHOLD
        for cmp in case.comparisons:
            p_values.append(cmp.p_value)
            labels.append(label)
    return p_values, labels


def threshold_sweep(
    report: SuiteReport,
    label_criterion: str,
    thresholds: Sequence[float] = DEFAULT_SWEEP_THRESHOLDS,
) -> list[SweepRow]:
    """Re-score the stored p-values at each threshold against fixed labels."""
    p_values, labels = _decision_pairs(report, label_criterion)
    rows = []
    for t in thresholds:
        predictions = [p <= t for p in p_values]
        s = classification_scores(labels, predictions)
        rows.append(SweepRow(threshold=t, accuracy=s.accuracy, precision=s.precision, recall=s.recall))
    return rows


def sweep_table(rows: Sequence[SweepRow]) -> str:
    """Render sweep rows as a tab-separated table for plotting tools."""
    lines = ["threshold\taccuracy\tprecision\trecall"]
    for r in rows:
        lines.append(f"{r.threshold:g}\t{r.accuracy:.6f}\t{r.precision:.6f}\t{r.recall:.6f}")
    return "\n".join(lines) + "\n"
