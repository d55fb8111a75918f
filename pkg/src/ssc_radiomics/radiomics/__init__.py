"""Radiomics feature extraction: shape, first-order, GLCM and GLSZM families."""

from .discretize import DiscretizedVolume, discretize
from .extractor import (
    ExtractionConfig,
    FeatureTable,
    FeatureVector,
    extract_features,
    feature_names,
    read_feature_table,
    write_feature_table,
)
from .firstorder import first_order_features
from .glcm import DegenerateTextureError, GlcmMatrix, glcm_features, glcm_matrices
from .glszm import GlszmMatrix, glszm_features, glszm_matrix
from .shape import shape_features

__all__ = [
    "DegenerateTextureError", "DiscretizedVolume", "ExtractionConfig", "FeatureTable",
    "FeatureVector", "GlcmMatrix", "GlszmMatrix", "discretize", "extract_features",
    "feature_names", "first_order_features", "glcm_features", "glcm_matrices",
    "glszm_features", "glszm_matrix", "read_feature_table", "shape_features",
    "write_feature_table",
]
