"""Radiomics mortality-prediction pipeline for CT volumes.

Submodules: ``volgrid`` (volume I/O and preprocessing), ``radiomics``
(feature extraction), ``cohort`` (labels and summaries), ``splits``,
``models``, ``hpo``, ``metrics``, ``synth`` (phantom cohorts), ``pipeline``
and ``cli``.
"""

from .cohort import LabeledScan, PatientRecord, ScanRecord, assign_labels, binary_labels
from .metrics import EvalReport, auroc, confusion_metrics, roc_curve
from .models import compute_class_weights, train_gbt, train_logreg
from .radiomics import ExtractionConfig, FeatureVector, extract_features
from .splits import SplitPlan, grouped_kfold, stratified_holdout
from .synth import PhantomSpec, generate_cohort
from .volgrid import MaskGrid, VolumeGrid, load_mask, load_volume, preprocess

__version__ = "0.1.0"

__all__ = [
    "EvalReport", "ExtractionConfig", "FeatureVector", "LabeledScan", "MaskGrid", "PatientRecord",
    "PhantomSpec", "ScanRecord", "SplitPlan", "VolumeGrid", "assign_labels", "auroc",
    "binary_labels", "compute_class_weights", "confusion_metrics", "extract_features",
    "generate_cohort", "grouped_kfold", "load_mask", "load_volume", "preprocess", "roc_curve",
    "stratified_holdout", "train_gbt", "train_logreg",
]
