"""Evaluation battery: confusion matrix, per-class and aggregate rates,
multiclass MCC, one-vs-rest AUROC and AUPRC."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, UndefinedMetricError

N_CLASSES = 4


def confusion(y_true, y_pred, n_classes: int = N_CLASSES) -> np.ndarray:
    """C[i, j] = count of samples with true class i predicted as j."""
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise InvalidInputError(
            f"y_true and y_pred must be equal-length vectors, got "
            f"{y_true.shape} vs {y_pred.shape}")
    for name, arr in (("y_true", y_true), ("y_pred", y_pred)):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise InvalidInputError(f"{name} labels outside 0..{n_classes - 1}")
    C = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(C, (y_true, y_pred), 1)
    return C


def _safe_div(num: float, den: float, flags: list[str], what: str) -> float:
    if den == 0:
        flags.append(what)
        return 0.0
    return num / den


def matthews_corrcoef(C: np.ndarray) -> float:
    """Multiclass MCC (R_K statistic) from the confusion matrix.

    Degenerate denominators (e.g. a single predicted class) give 0.
    """
    C = np.asarray(C, dtype=float)
    t = C.sum(axis=1)   # true-class supports
    p = C.sum(axis=0)   # predicted-class totals
    s = C.sum()
    c = np.trace(C)
    cov_yp = c * s - float(t @ p)
    cov_yy = s * s - float(t @ t)
    cov_pp = s * s - float(p @ p)
    # sqrt of the product (not product of sqrts): collapses exactly to
    # cov_yy when the factors coincide, so a perfect classifier scores 1.0
    denom = np.sqrt(cov_yy * cov_pp)
    if denom == 0:
        return 0.0
    return float(cov_yp / denom)


def auroc_ovr(y_true, scores, positive_class: int) -> float:
    """One-vs-rest AUROC via the rank statistic (ties count half).

    Equals the probability that a random positive outranks a random
    negative.  Raises UndefinedMetricError when either side is empty.
    """
    y = np.asarray(y_true, dtype=int)
    s = np.asarray(scores, dtype=float)
    if y.shape != s.shape:
        raise InvalidInputError("labels and scores must align")
    pos = y == positive_class
    n_pos = int(pos.sum())
    n_neg = int(len(y) - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            f"AUROC undefined for class {positive_class}: one-vs-rest side empty")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s))
    sorted_s = s[order]
    # average ranks over tied score groups
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum = ranks[pos].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auprc_ovr(y_true, scores, positive_class: int) -> float:
    """One-vs-rest area under the precision-recall curve.

    Step summation sum_k (R_k - R_{k-1}) * P_k over descending score
    thresholds, no interpolation.  Raises UndefinedMetricError when there are
    no positives.
    """
    y = np.asarray(y_true, dtype=int)
    s = np.asarray(scores, dtype=float)
    if y.shape != s.shape:
        raise InvalidInputError("labels and scores must align")
    pos = (y == positive_class).astype(float)
    n_pos = pos.sum()
    if n_pos == 0:
        raise UndefinedMetricError(
            f"AUPRC undefined for class {positive_class}: no positives")
    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    pos_sorted = pos[order]
    tp = np.cumsum(pos_sorted)
    predicted = np.arange(1, len(s) + 1)
    # thresholds sit at the last element of each tied-score group
    boundary = np.flatnonzero(np.diff(s_sorted) != 0)
    idx = np.append(boundary, len(s) - 1)
    precision = tp[idx] / predicted[idx]
    recall = tp[idx] / n_pos
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(((recall - prev_recall) * precision).sum())


@dataclass
class ClassificationReport:
    """Per-class and aggregate metrics; AUROC/AUPRC absent without scores."""

    confusion_matrix: np.ndarray
    per_class: dict[int, dict]
    accuracy: float
    macro: dict[str, float]
    weighted: dict[str, float]
    mcc: float
    macro_auroc: float | None
    macro_auprc: float | None
    zero_division_flags: list[str]

    def as_dict(self, decimals: int = 4) -> dict:
        def r(x):
            if x is None:
                return None
            return round(float(x), decimals)

        return {
            "confusion_matrix": self.confusion_matrix.tolist(),
            "per_class": {
                str(c): {k: r(v) for k, v in m.items()}
                for c, m in self.per_class.items()
            },
            "accuracy": r(self.accuracy),
            "macro": {k: r(v) for k, v in self.macro.items()},
            "weighted": {k: r(v) for k, v in self.weighted.items()},
            "mcc": r(self.mcc),
            "macro_auroc": r(self.macro_auroc),
            "macro_auprc": r(self.macro_auprc),
            "zero_division_flags": self.zero_division_flags,
        }

    def to_json(self, decimals: int = 4, **kwargs) -> str:
        return json.dumps(self.as_dict(decimals), indent=2, **kwargs)


def report(C: np.ndarray, scores: np.ndarray | None = None,
           y_true=None) -> ClassificationReport:
    """Full metric battery from a confusion matrix and optional score columns.

    ``scores`` (rows on the probability simplex, one column per class) and
    ``y_true`` enable the one-vs-rest AUROC/AUPRC block; otherwise those
    fields are reported absent.  Zero-denominator rates are reported as 0 and
    flagged.
    """
    C = np.asarray(C)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise InvalidInputError(f"confusion matrix must be square, got {C.shape}")
    if (C < 0).any():
        raise InvalidInputError("confusion matrix counts must be non-negative")
    K = C.shape[0]
    total = float(C.sum())
    if total == 0:
        raise InvalidInputError("empty confusion matrix")
    flags: list[str] = []

    per_class: dict[int, dict] = {}
    supports = C.sum(axis=1).astype(float)
    for c in range(K):
        tp = float(C[c, c])
        fn = float(C[c].sum() - tp)
        fp = float(C[:, c].sum() - tp)
        tn = total - tp - fn - fp
        precision = _safe_div(tp, tp + fp, flags, f"precision[{c}]")
        sensitivity = _safe_div(tp, tp + fn, flags, f"sensitivity[{c}]")
        specificity = _safe_div(tn, tn + fp, flags, f"specificity[{c}]")
        f1 = _safe_div(2 * precision * sensitivity, precision + sensitivity,
                       flags, f"f1[{c}]")
        per_class[c] = {
            "precision": precision,
            "sensitivity": sensitivity,
            "specificity": specificity,
            "f1": f1,
            "support": supports[c],
            "auroc": None,
            "auprc": None,
        }

    accuracy = float(np.trace(C) / total)
    macro = {
        key: float(np.mean([per_class[c][key] for c in range(K)]))
        for key in ("precision", "sensitivity", "specificity", "f1")
    }
    weighted = {
        key: float(sum(per_class[c][key] * supports[c] for c in range(K)) / total)
        for key in ("precision", "sensitivity", "f1")
    }
    mcc = matthews_corrcoef(C)

    macro_auroc = macro_auprc = None
    if scores is not None:
        if y_true is None:
            raise InvalidInputError("scores provided without y_true")
        scores = np.asarray(scores, dtype=float)
        y_true = np.asarray(y_true, dtype=int)
        if scores.ndim != 2 or scores.shape != (len(y_true), K):
            raise InvalidInputError(
                f"scores must be (n, {K}), got {scores.shape}")
        aurocs, auprcs = [], []
        for c in range(K):
            try:
                per_class[c]["auroc"] = auroc_ovr(y_true, scores[:, c], c)
                aurocs.append(per_class[c]["auroc"])
            except UndefinedMetricError:
                pass
            try:
                per_class[c]["auprc"] = auprc_ovr(y_true, scores[:, c], c)
                auprcs.append(per_class[c]["auprc"])
            except UndefinedMetricError:
                pass
        macro_auroc = float(np.mean(aurocs)) if aurocs else None
        macro_auprc = float(np.mean(auprcs)) if auprcs else None

    return ClassificationReport(C, per_class, accuracy, macro, weighted, mcc,
                                macro_auroc, macro_auprc, flags)


def evaluate(y_true, y_pred, scores=None, n_classes: int = N_CLASSES) -> ClassificationReport:
    """Convenience wrapper: confusion + report in one call."""
    return report(confusion(y_true, y_pred, n_classes), scores, y_true)
