"""Evaluation: thresholded classification metrics, ranking metrics, diagnostics.

Conventions (documented, not paper-specified): the decision threshold is 0.5
with ties resolved as positive (s >= threshold); AUC counts tied pairs as 0.5;
AP breaks score ties by original index. Ranking metrics should be fed raw
logits to avoid clamp-induced ties.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, UndefinedMetricError


@dataclass(frozen=True)
class MetricReport:
    acc: float
    precision: float
    recall: float
    f1: float
    auc: float
    ap: float
    n_eval: int
    threshold: float
    degenerate: bool = False

    def to_json_dict(self) -> dict:
        return {
            "acc": self.acc,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "auc": self.auc,
            "ap": self.ap,
            "n_eval": self.n_eval,
            "threshold": self.threshold,
            "degenerate": self.degenerate,
        }


@dataclass(frozen=True)
class ErrorHistogram:
    """Score histogram of wrongly predicted examples over [0, 1]."""

    edges: np.ndarray
    counts: np.ndarray


def hard_labels(scores, threshold: float = 0.5) -> np.ndarray:
    """Threshold scores into {0,1}; s >= threshold counts as positive."""
    if not (0.0 < threshold < 1.0):
        raise ContractError(f"threshold must lie in (0, 1), got {threshold}")
    return (np.asarray(scores, dtype=np.float64) >= threshold).astype(np.int64)


def _as_labels(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    if x.ndim != 1:
        raise ContractError(f"{name} must be 1-d")
    if x.size and not np.isin(x, (0, 1)).all():
        raise ContractError(f"{name} must contain only 0/1")
    return x


def classification_report(predicted, truth, threshold: float = 0.5) -> MetricReport:
    """Confusion-matrix metrics. AUC/AP slots are NaN; see `metric_report`.

    Precision, recall, and F1 fall back to 0 with the degenerate flag set when
    their denominator is empty.
    """
    predicted = _as_labels(predicted, "predicted")
    truth = _as_labels(truth, "truth")
    if predicted.shape != truth.shape:
        raise ContractError("predicted and truth must have equal length")
    if predicted.size == 0:
        raise ContractError("cannot score an empty prediction set")
    tp = int(((predicted == 1) & (truth == 1)).sum())
    fp = int(((predicted == 1) & (truth == 0)).sum())
    fn = int(((predicted == 0) & (truth == 1)).sum())
    acc = float((predicted == truth).mean())
    degenerate = False
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision, degenerate = 0.0, True
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        recall, degenerate = 0.0, True
    if precision + recall > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        f1, degenerate = 0.0, True
    return MetricReport(
        acc=acc,
        precision=precision,
        recall=recall,
        f1=f1,
        auc=float("nan"),
        ap=float("nan"),
        n_eval=predicted.size,
        threshold=threshold,
        degenerate=degenerate,
    )


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned their average rank."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc(ranking_scores, truth) -> float:
    """Mann-Whitney AUC: (concordant pairs + 0.5*ties) / (n_pos * n_neg)."""
    scores = np.asarray(ranking_scores, dtype=np.float64)
    truth = _as_labels(truth, "truth")
    if scores.shape != truth.shape:
        raise ContractError("scores and truth must have equal length")
    n_pos = int((truth == 1).sum())
    n_neg = int((truth == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs at least one positive and one negative")
    ranks = _midranks(scores)
    rank_sum_pos = ranks[truth == 1].sum()
    return float((rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def average_precision(ranking_scores, truth) -> float:
    """AP over descending-score prefixes; ties broken by original index."""
    scores = np.asarray(ranking_scores, dtype=np.float64)
    truth = _as_labels(truth, "truth")
    if scores.shape != truth.shape:
        raise ContractError("scores and truth must have equal length")
    n_pos = int((truth == 1).sum())
    if n_pos == 0:
        raise UndefinedMetricError("AP needs at least one positive")
    order = np.argsort(-scores, kind="mergesort")
    hits = truth[order] == 1
    tp_at_k = np.cumsum(hits)
    k = np.arange(1, scores.size + 1)
    precision_at_k = tp_at_k / k
    return float(precision_at_k[hits].sum() / n_pos)


def predicted_prior(scores, threshold: float = 0.5) -> float:
    """Fraction of examples predicted positive at the given threshold."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ContractError("predicted_prior of an empty score vector is undefined")
    return float(hard_labels(scores, threshold).mean())


def error_histogram(scores, predicted, truth, n_bins: int) -> ErrorHistogram:
    """Histogram over [0, 1] of scores at wrongly predicted examples.

    Uniform bins, right-open except the last.
    """
    scores = np.asarray(scores, dtype=np.float64)
    predicted = _as_labels(predicted, "predicted")
    truth = _as_labels(truth, "truth")
    if not (scores.shape == predicted.shape == truth.shape):
        raise ContractError("scores, predicted, and truth must have equal length")
    if n_bins < 1:
        raise ContractError(f"n_bins must be >= 1, got {n_bins}")
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    wrong = scores[predicted != truth]
    counts, _ = np.histogram(wrong, bins=edges)
    return ErrorHistogram(edges=edges, counts=counts.astype(np.int64))


def metric_report(scores, ranking_scores, truth, threshold: float = 0.5) -> MetricReport:
    """Full report: thresholded metrics from `scores`, ranking metrics from logits."""
    predicted = hard_labels(scores, threshold)
    base = classification_report(predicted, truth, threshold)
    return MetricReport(
        acc=base.acc,
        precision=base.precision,
        recall=base.recall,
        f1=base.f1,
        auc=auc(ranking_scores, truth),
        ap=average_precision(ranking_scores, truth),
        n_eval=base.n_eval,
        threshold=threshold,
        degenerate=base.degenerate,
    )
