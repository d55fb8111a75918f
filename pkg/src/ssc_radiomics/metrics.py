"""
Rank-based AUROC and thresholded confusion metrics.

``auroc`` is the Mann-Whitney statistic ``U / (n_pos * n_neg)`` where ties
count one half; with mid-ranks the rank sum is a multiple of 1/2 and is exact
in floating point for any realistic sample size.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata


class UndefinedMetricError(ValueError):
    pass


def _check(scores, labels):
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be 1D arrays of equal length")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    return s, y.astype(bool)


def mann_whitney_u(scores, labels) -> float:
    """Pairs (pos, neg) with pos scored higher, ties counted 1/2."""
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    ranks = rankdata(s, method="average")
    return float(ranks[y].sum() - n_pos * (n_pos + 1) / 2.0)


def auroc(scores, labels) -> float:
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC needs both classes present")
    return mann_whitney_u(s, y) / (n_pos * n_neg)


def roc_curve(scores, labels):
    """``(thresholds, fpr, tpr)``; each threshold predicts positive for score >= threshold."""
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC curve needs both classes present")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    tp = np.cumsum(y)[last]
    fp = (last + 1) - tp
    thresholds = np.r_[np.inf, s[last]]
    return thresholds, np.r_[0.0, fp / n_neg], np.r_[0.0, tp / n_pos]


@dataclass
class ConfusionMetrics:
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int
    sensitivity: float
    specificity: float
    precision: float
    f1: float


def confusion_metrics(scores, labels, threshold: float = 0.5) -> ConfusionMetrics:
    s, y = _check(scores, labels)
    if y.all() or not y.any():
        raise UndefinedMetricError("confusion metrics need both classes present")
    pred = s >= threshold
    tp = int(np.sum(pred & y))
    fp = int(np.sum(pred & ~y))
    tn = int(np.sum(~pred & ~y))
    fn = int(np.sum(~pred & y))
    sens = tp / (tp + fn)
    spec = tn / (tn + fp)
    prec = tp / (tp + fp) if tp + fp else 0.0
    f1 = 2 * prec * sens / (prec + sens) if prec + sens else 0.0
    return ConfusionMetrics(float(threshold), tp, fp, tn, fn, sens, spec, prec, f1)


@dataclass
class EvalReport:
    task: str
    model: str
    auroc: float
    sensitivity: float
    specificity: float
    precision: float
    f1: float
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int
    n_test: int
    per_fold: list = field(default_factory=list)
    fold_mean: dict = field(default_factory=dict)
    fold_sd: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


_FOLD_KEYS = ("auroc", "sensitivity", "specificity", "precision", "f1")


def _fold_entry(fold_id, scores, labels, threshold) -> dict:
    entry = {"fold_id": fold_id, "n_test": int(len(labels))}
    y = np.asarray(labels)
    if y.min() == y.max():
        entry.update({k: None for k in _FOLD_KEYS})
        return entry
    cm = confusion_metrics(scores, labels, threshold)
    entry.update(auroc=auroc(scores, labels), sensitivity=cm.sensitivity,
                 specificity=cm.specificity, precision=cm.precision, f1=cm.f1)
    return entry


def evaluate_predictions(task: str, model_name: str, fold_scores: Sequence, fold_labels: Sequence,
                         threshold: float = 0.5, fold_ids: Optional[Sequence[int]] = None) -> EvalReport:
    """Pooled report over all folds' test predictions, plus per-fold metrics.

    Folds whose test set holds a single class appear in ``per_fold`` with
    null metrics and are left out of the fold mean and sd.
    """
    if fold_ids is None:
        fold_ids = list(range(len(fold_scores)))
    scores = np.concatenate([np.asarray(s, dtype=np.float64) for s in fold_scores])
    labels = np.concatenate([np.asarray(t) for t in fold_labels])
    cm = confusion_metrics(scores, labels, threshold)
    per_fold = [_fold_entry(f, s, t, threshold) for f, s, t in zip(fold_ids, fold_scores, fold_labels)]
    mean, sd = {}, {}
    for k in _FOLD_KEYS:
        vals = [e[k] for e in per_fold if e[k] is not None]
        if vals:
            mean[k] = float(np.mean(vals))
            sd[k] = float(np.std(vals))
    return EvalReport(task, model_name, auroc(scores, labels), cm.sensitivity, cm.specificity,
                      cm.precision, cm.f1, cm.threshold, cm.tp, cm.fp, cm.tn, cm.fn,
                      int(labels.size), per_fold, mean, sd)


def evaluate_run(fold_models: Sequence, plans: Sequence, table, labels: dict, task: str,
                 model_name: str, threshold: float = 0.5) -> EvalReport:
    """Score each fold's test scans with that fold's model and pool the results.

    ``table`` is a FeatureTable and ``labels`` maps scan_id to 0/1 for the
    window under evaluation.
    """
    fold_scores, fold_labels, ids = [], [], []
    for model, plan in zip(fold_models, plans):
        test = [s for s in plan.test if s in labels]
        if not test:
            continue
        fold_scores.append(model.predict_proba(table.rows(test)))
        fold_labels.append(np.array([labels[s] for s in test]))
        ids.append(plan.fold_id)
    if not fold_scores:
        raise UndefinedMetricError("no labelled test scans in any fold")
    return evaluate_predictions(task, model_name, fold_scores, fold_labels, threshold, ids)


def write_roc_csv(path, curves: dict) -> Path:
    """``curves`` maps model name to ``(thresholds, fpr, tpr)``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "threshold", "fpr", "tpr"])
        for name in sorted(curves):
            for thr, fpr, tpr in zip(*curves[name]):
                w.writerow([name, format(thr, ".17g"), format(fpr, ".17g"), format(tpr, ".17g")])
    return path


def write_report(path, reports: Sequence[EvalReport], extra: dict | None = None) -> Path:
    payload = {"reports": [r.to_dict() for r in reports]}
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return Path(path)
