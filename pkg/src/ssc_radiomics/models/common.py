from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import expit

SCHEMA_VERSION = 1
_PROBA_EPS = 1e-15


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class ClassWeights:
    """Per-class loss weights, held as exact rationals."""

    w_neg: Fraction
    w_pos: Fraction

    @classmethod
    def uniform(cls) -> "ClassWeights":
        return cls(Fraction(1), Fraction(1))

    def sample_weights(self, y) -> np.ndarray:
        y = np.asarray(y)
        return np.where(y == 1, float(self.w_pos), float(self.w_neg))

    def scaled(self, factor) -> "ClassWeights":
        factor = Fraction(factor)
        return ClassWeights(self.w_neg * factor, self.w_pos * factor)


def compute_class_weights(labels) -> ClassWeights:
    """Inverse-frequency weights ``N / (2 * n_c)``."""
    y = np.asarray(labels)
    if y.size and not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    n = int(y.size)
    n_pos = int(np.sum(y == 1))
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("class weights need both classes present")
    return ClassWeights(Fraction(n, 2 * n_neg), Fraction(n, 2 * n_pos))


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std < 1e-12, 1.0, std)
        return cls(mean, std)

    @classmethod
    def identity(cls, n_features: int) -> "Standardizer":
        return cls(np.zeros(n_features), np.ones(n_features))

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64))


def sigmoid(z):
    return expit(z)


def clip_proba(p):
    return np.clip(p, _PROBA_EPS, 1 - _PROBA_EPS)


def weighted_cross_entropy(z, y, sample_weight=None) -> float:
    """Mean of ``w_i * CE_i`` computed from logits ``z``; divisor is N, not sum of weights."""
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ce = np.logaddexp(0.0, z) - y * z
    if sample_weight is not None:
        ce = ce * sample_weight
    return float(np.mean(ce))


def log_loss(p, y, eps: float = 1e-15) -> float:
    """Unweighted binary cross-entropy of probabilities."""
    p = np.clip(np.asarray(p, dtype=np.float64), eps, 1 - eps)
    y = np.asarray(y, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)))


def check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"X must be (n, d) matching y, got {X.shape} and {y.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    if y.min() == y.max():
        raise ValueError("training needs both classes present")
    return X, y.astype(np.float64)
