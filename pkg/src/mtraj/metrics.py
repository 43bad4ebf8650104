"""Ground-truth displacement metrics and the label-based violation criteria.

ADE is the mean pointwise Euclidean distance between a predicted and the
true trajectory; FDE is the distance between their endpoints. For a set
of K samples both come in a Best-of-N flavour (minimum over the set) and
a Mean flavour (average over the set). These metrics need ground-truth
labels and serve as reference criteria to calibrate the label-free one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import EmptySet, LengthMismatch, PredictionSet, Trajectory
from .stats import TooFewSets, is_violation, variation_measures, z_test

METRIC_KEYS = ("bon_ade", "bon_fde", "mean_ade", "mean_fde")


@dataclass(frozen=True)
class DisplacementScores:
    bon_ade: float
    bon_fde: float
    mean_ade: float
    mean_fde: float

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in METRIC_KEYS}


def ade(pred: Trajectory, gt: Trajectory) -> float:
    if len(pred) != len(gt):
        raise LengthMismatch(f"trajectory lengths differ: {len(pred)} vs {len(gt)}")
    diff = pred.xy - gt.xy
    return float(np.sqrt((diff * diff).sum(axis=1)).mean())


def fde(pred: Trajectory, gt: Trajectory) -> float:
    if len(pred) != len(gt):
        raise LengthMismatch(f"trajectory lengths differ: {len(pred)} vs {len(gt)}")
    diff = pred.xy[-1] - gt.xy[-1]
    return float(np.sqrt((diff * diff).sum()))


def displacement_scores(preds: PredictionSet, gt: Trajectory) -> DisplacementScores:
    """Best-of-N and Mean ADE/FDE of a sampled prediction set."""
    if preds.k < 1:
        raise EmptySet("empty prediction set")
    if preds.horizon != len(gt):
        raise LengthMismatch(
            f"prediction length {preds.horizon} vs ground truth {len(gt)}"
        )
    diff = preds.stacked - gt.xy[None, :, :]
    norms = np.sqrt((diff * diff).sum(axis=2))  # (K, T)
    ades = norms.mean(axis=1)
    fdes = norms[:, -1]
    return DisplacementScores(
        bon_ade=float(ades.min()),
        bon_fde=float(fdes.min()),
        mean_ade=float(ades.mean()),
        mean_fde=float(fdes.mean()),
    )


def baseline_criterion(
    source_scores: Sequence[float],
    followup_score: float,
    threshold: float,
    two_sided: bool = False,
) -> tuple[float, bool]:
    """z-test of a follow-up metric score against the N source scores.

    Returns ``(p_value, violation)``; mirrors the decision rule of the
    label-free criterion so the two are directly comparable.
    """
    if len(source_scores) < 2:
        raise TooFewSets(f"need at least 2 source scores, got {len(source_scores)}")
    vm = variation_measures(list(source_scores))
    p = z_test(followup_score, vm, two_sided=two_sided)
    return p, is_violation(p, threshold)
