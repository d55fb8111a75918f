from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..volgrid import EmptyMaskError
from .discretize import DiscretizedVolume
from .glcm import _crop

_CONNECTIVITY_26 = np.ones((3, 3, 3), dtype=bool)


@dataclass(frozen=True, eq=False)
class GlszmMatrix:
    """Zone counts, shape ``(Ng, Smax)``; entry ``[i-1, s-1]`` counts zones of level i and size s."""

    counts: np.ndarray

    @property
    def num_zones(self) -> int:
        return int(self.counts.sum())

    @property
    def num_voxels(self) -> int:
        sizes = np.arange(1, self.counts.shape[1] + 1)
        return int((self.counts * sizes).sum())


def glszm_matrix(d: DiscretizedVolume) -> GlszmMatrix:
    levels = d.levels
    if not np.any(levels > 0):
        raise EmptyMaskError("GLSZM needs a non-empty mask")
    levels = _crop(levels)
    zones = []
    for g in np.unique(levels[levels > 0]):
        lab, n = ndimage.label(levels == g, structure=_CONNECTIVITY_26)
        sizes = np.bincount(lab.ravel())[1:]
        zones.append((int(g), np.bincount(sizes)))
    smax = max(len(c) - 1 for _, c in zones)
    counts = np.zeros((d.num_levels, smax), dtype=np.int64)
    for g, c in zones:
        counts[g - 1, :len(c) - 1] = c[1:]
    return GlszmMatrix(counts)


def glszm_features(d: DiscretizedVolume, matrix: GlszmMatrix | None = None) -> dict:
    """16 size-zone features over 26-connected zones."""
    if matrix is None:
        matrix = glszm_matrix(d)
    P = matrix.counts.astype(np.float64)
    ng, smax = P.shape
    nz = P.sum()
    n_vox = matrix.num_voxels
    p = P / nz
    i = np.arange(1, ng + 1, dtype=np.float64)[:, None]
    s = np.arange(1, smax + 1, dtype=np.float64)[None, :]

    row = P.sum(axis=1)
    col = P.sum(axis=0)
    mu_i = float(np.sum(p * i))
    mu_s = float(np.sum(p * s))
    nzp = p[p > 0]
    return {
        "gray_level_non_uniformity": float(np.sum(row ** 2) / nz),
        "gray_level_non_uniformity_normalized": float(np.sum(row ** 2) / nz ** 2),
        "gray_level_variance": float(np.sum(p * (i - mu_i) ** 2)),
        "high_gray_level_zone_emphasis": float(np.sum(p * i ** 2)),
        "large_area_emphasis": float(np.sum(p * s ** 2)),
        "large_area_high_gray_level_emphasis": float(np.sum(p * i ** 2 * s ** 2)),
        "large_area_low_gray_level_emphasis": float(np.sum(p * s ** 2 / i ** 2)),
        "low_gray_level_zone_emphasis": float(np.sum(p / i ** 2)),
        "size_zone_non_uniformity": float(np.sum(col ** 2) / nz),
        "size_zone_non_uniformity_normalized": float(np.sum(col ** 2) / nz ** 2),
        "small_area_emphasis": float(np.sum(p / s ** 2)),
        "small_area_high_gray_level_emphasis": float(np.sum(p * i ** 2 / s ** 2)),
        "small_area_low_gray_level_emphasis": float(np.sum(p / (i ** 2 * s ** 2))),
        "zone_entropy": float(-np.sum(nzp * np.log2(nzp))) if nzp.size > 1 else 0.0,
        "zone_percentage": float(nz / n_vox),
        "zone_variance": float(np.sum(p * (s - mu_s) ** 2)),
    }


FEATURE_NAMES = tuple(sorted([
    "gray_level_non_uniformity", "gray_level_non_uniformity_normalized", "gray_level_variance",
    "high_gray_level_zone_emphasis", "large_area_emphasis", "large_area_high_gray_level_emphasis",
    "large_area_low_gray_level_emphasis", "low_gray_level_zone_emphasis", "size_zone_non_uniformity",
    "size_zone_non_uniformity_normalized", "small_area_emphasis", "small_area_high_gray_level_emphasis",
    "small_area_low_gray_level_emphasis", "zone_entropy", "zone_percentage", "zone_variance",
]))
