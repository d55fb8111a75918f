from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .common import (SCHEMA_VERSION, ClassWeights, Standardizer, TrainingError, check_xy,
                     clip_proba, sigmoid, weighted_cross_entropy)


@dataclass(frozen=True)
class LogRegConfig:
    learning_rate: float = 0.05
    l2: float = 1e-4
    n_iter: int = 2000
    tol: float = 1e-8
    standardize: bool = True


def loss_and_grad(params: np.ndarray, X: np.ndarray, y: np.ndarray, sw: np.ndarray, l2: float):
    """Weighted logistic loss and its gradient.

    ``params = [w_1..w_d, b]``; the intercept is not penalized.
    ``L = mean(sw * CE) + l2 * ||w||^2``.
    """
    w, b = params[:-1], params[-1]
    z = X @ w + b
    loss = weighted_cross_entropy(z, y, sw) + l2 * float(w @ w)
    r = sw * (sigmoid(z) - y) / X.shape[0]
    grad = np.empty_like(params)
    grad[:-1] = X.T @ r + 2.0 * l2 * w
    grad[-1] = r.sum()
    return loss, grad


@dataclass(frozen=True, eq=False)
class LogRegModel:
    weights: np.ndarray
    intercept: float
    standardizer: Standardizer
    config: LogRegConfig = field(default_factory=LogRegConfig)
    n_iter_run: int = 0

    kind = "logreg"

    @property
    def n_features(self) -> int:
        return self.weights.size

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        return self.standardizer.transform(X) @ self.weights + self.intercept

    def predict_proba(self, X) -> np.ndarray:
        return clip_proba(sigmoid(self.decision_function(X)))

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "standardizer": self.standardizer.to_dict(),
            "config": asdict(self.config),
            "n_iter_run": self.n_iter_run,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LogRegModel":
        return cls(np.asarray(d["weights"], dtype=np.float64), float(d["intercept"]),
                   Standardizer.from_dict(d["standardizer"]), LogRegConfig(**d["config"]),
                   int(d.get("n_iter_run", 0)))


def train_logreg(X, y, weights: ClassWeights | None = None,
                 config: LogRegConfig | None = None) -> LogRegModel:
    """Full-batch gradient descent on the class-weighted logistic loss.

    Stops after ``n_iter`` steps or when the gradient norm drops below ``tol``.
    """
    config = config or LogRegConfig()
    X, y = check_xy(X, y)
    weights = weights or ClassWeights.uniform()
    std = Standardizer.fit(X) if config.standardize else Standardizer.identity(X.shape[1])
    Xs = std.transform(X)
    sw = weights.sample_weights(y)

    params = np.zeros(X.shape[1] + 1)
    it = 0
    for it in range(1, config.n_iter + 1):
        loss, grad = loss_and_grad(params, Xs, y, sw, config.l2)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise TrainingError(f"non-finite loss at iteration {it}; check feature scaling")
        if np.linalg.norm(grad) < config.tol:
            break
        params = params - config.learning_rate * grad
    if not np.all(np.isfinite(params)):
        raise TrainingError("non-finite parameters after training")
    return LogRegModel(params[:-1].copy(), float(params[-1]), std, config, it)
