"""From-scratch classifiers: class-weighted logistic regression and boosted trees."""

import json
from pathlib import Path

from .common import (ClassWeights, Standardizer, TrainingError, compute_class_weights, log_loss,
                     weighted_cross_entropy)
from .gbt import GbtConfig, GbtModel, Tree, staged_training_loss, train_gbt
from .logreg import LogRegConfig, LogRegModel, loss_and_grad, train_logreg

MODEL_KINDS = {"logreg": LogRegModel, "gbt": GbtModel}


def predict_proba(model, X):
    return model.predict_proba(X)


def save_model(model, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model.to_dict(), sort_keys=True) + "\n")
    return path


def load_model(path):
    d = json.loads(Path(path).read_text())
    try:
        cls = MODEL_KINDS[d["kind"]]
    except KeyError:
        raise ValueError(f"{path}: unknown model kind {d.get('kind')!r}") from None
    return cls.from_dict(d)


__all__ = [
    "ClassWeights", "GbtConfig", "GbtModel", "LogRegConfig", "LogRegModel", "MODEL_KINDS",
    "Standardizer", "TrainingError", "Tree", "compute_class_weights", "load_model", "log_loss",
    "loss_and_grad", "predict_proba", "save_model", "staged_training_loss", "train_gbt",
    "train_logreg", "weighted_cross_entropy",
]
