"""Feature-vector assembly and the feature-table CSV format."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..volgrid import MaskGrid, VolumeGrid, check_pair
from . import firstorder, glcm, glszm, shape
from .discretize import discretize

FORMAT_VERSION = 1


@dataclass(frozen=True)
class ExtractionConfig:
    """``bin_width`` is in HU; on normalized volumes it is rescaled by the HU window width."""

    bin_width: float = 25.0
    hu_window: tuple = (-1200.0, 600.0)
    glcm_distance: int = 1

    def effective_bin_width(self, unit: str) -> float:
        if unit == "normalized":
            lo, hi = self.hu_window
            return self.bin_width / (hi - lo)
        return self.bin_width

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hu_window"] = list(self.hu_window)
        return d


@dataclass(frozen=True, eq=False)
class FeatureVector:
    names: tuple
    values: np.ndarray
    scan_id: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (len(self.names),):
            raise ValueError("names and values differ in length")
        object.__setattr__(self, "values", values)

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.values.tolist()))

    def __len__(self):
        return len(self.names)


def _family(prefix: str, feats: dict) -> list:
    return [(f"{prefix}_{k}", feats[k]) for k in sorted(feats)]


def feature_names() -> tuple:
    return tuple(
        [f"shape_{k}" for k in shape.FEATURE_NAMES]
        + [f"firstorder_{k}" for k in firstorder.FEATURE_NAMES]
        + [f"glcm_{k}" for k in glcm.FEATURE_NAMES]
        + [f"glszm_{k}" for k in glszm.FEATURE_NAMES]
    )


def extract_features(v: VolumeGrid, m: MaskGrid, config: ExtractionConfig | None = None,
                     scan_id: str = "") -> FeatureVector:
    """Shape, first-order, GLCM and GLSZM features in canonical order (72 values)."""
    config = config or ExtractionConfig()
    if config.glcm_distance != 1:
        raise ValueError("only GLCM distance 1 is supported")
    check_pair(v, m)
    d = discretize(v, m, config.effective_bin_width(v.intensity_unit))
    items = (
        _family("shape", shape.shape_features(m))
        + _family("firstorder", firstorder.first_order_features(v, m, d))
        + _family("glcm", glcm.glcm_features(d))
        + _family("glszm", glszm.glszm_features(d))
    )
    names = tuple(k for k, _ in items)
    values = np.array([x for _, x in items], dtype=np.float64)
    if not np.all(np.isfinite(values)):
        bad = [k for k, x in items if not np.isfinite(x)]
        raise ValueError(f"non-finite feature values for {scan_id or 'scan'}: {bad}")
    return FeatureVector(names, values, scan_id)


# ---------------------------------------------------------------------------
# feature table I/O
# ---------------------------------------------------------------------------

def write_feature_table(path, vectors: Sequence[FeatureVector], patient_ids: Sequence[str],
                        config: ExtractionConfig | None = None) -> Path:
    path = Path(path)
    if not vectors:
        raise ValueError("no feature vectors to write")
    names = vectors[0].names
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scan_id", "patient_id", *names])
        for fv, pid in zip(vectors, patient_ids):
            if fv.names != names:
                raise ValueError(f"feature names of {fv.scan_id} differ from the table header")
            w.writerow([fv.scan_id, pid, *(format(x, ".17g") for x in fv.values)])
    sidecar = {
        "config": (config or ExtractionConfig()).to_dict(),
        "feature_names": list(names),
        "format_version": FORMAT_VERSION,
        "n_scans": len(vectors),
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return path


@dataclass(frozen=True, eq=False)
class FeatureTable:
    scan_ids: tuple
    patient_ids: tuple
    names: tuple
    X: np.ndarray

    def rows(self, scan_ids) -> np.ndarray:
        index = {s: k for k, s in enumerate(self.scan_ids)}
        return self.X[[index[s] for s in scan_ids]]


def read_feature_table(path) -> FeatureTable:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[:2] != ["scan_id", "patient_id"]:
            raise ValueError(f"{path}: header must start with scan_id,patient_id")
        scans, patients, rows = [], [], []
        for line in r:
            scans.append(line[0])
            patients.append(line[1])
            rows.append([float(x) for x in line[2:]])
    X = np.array(rows, dtype=np.float64).reshape(len(rows), len(header) - 2)
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{path}: missing or non-finite feature values")
    return FeatureTable(tuple(scans), tuple(patients), tuple(header[2:]), X)
