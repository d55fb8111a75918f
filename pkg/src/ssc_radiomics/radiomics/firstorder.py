from __future__ import annotations

import numpy as np

from ..volgrid import EmptyMaskError, MaskGrid, VolumeGrid, check_pair
from .discretize import DiscretizedVolume

FEATURE_NAMES = (
    "energy", "entropy", "interquartile_range", "kurtosis", "maximum", "mean",
    "mean_absolute_deviation", "median", "minimum", "percentile_10", "percentile_90", "range",
    "robust_mean_absolute_deviation", "root_mean_squared", "skewness", "total_energy",
    "uniformity", "variance",
)


def first_order_features(v: VolumeGrid, m: MaskGrid, d: DiscretizedVolume) -> dict:
    """Intensity statistics over in-mask voxels.

    ``entropy`` and ``uniformity`` use the discretized histogram (log base 2).
    ``variance`` uses divisor N and ``kurtosis`` is the plain fourth
    standardized moment (no -3). Skewness and kurtosis are 0 for a flat
    region.
    """
    check_pair(v, m)
    inside = m.as_bool()
    if not inside.any():
        raise EmptyMaskError("first-order features need a non-empty mask")
    x = v.data[inside].astype(np.float64)
    n = x.size

    mean = x.mean()
    dev = x - mean
    m2 = np.mean(dev ** 2)
    m3 = np.mean(dev ** 3)
    m4 = np.mean(dev ** 4)
    if m2 > 0:
        skewness = m3 / m2 ** 1.5
        kurtosis = m4 / m2 ** 2
    else:
        skewness = 0.0
        kurtosis = 0.0

    p10, p25, p50, p75, p90 = np.percentile(x, [10, 25, 50, 75, 90])
    robust = x[(x >= p10) & (x <= p90)]
    # tiny regions can leave the 10-90 band empty
    robust_mad = float(np.mean(np.abs(robust - robust.mean()))) if robust.size else 0.0

    counts = np.bincount(d.levels[inside], minlength=d.num_levels + 1)[1:]
    p = counts[counts > 0] / n
    entropy = float(-np.sum(p * np.log2(p))) if p.size > 1 else 0.0

    energy = float(np.sum(x ** 2))
    return {
        "energy": energy,
        "entropy": entropy,
        "interquartile_range": float(p75 - p25),
        "kurtosis": float(kurtosis),
        "maximum": float(x.max()),
        "mean": float(mean),
        "mean_absolute_deviation": float(np.mean(np.abs(dev))),
        "median": float(p50),
        "minimum": float(x.min()),
        "percentile_10": float(p10),
        "percentile_90": float(p90),
        "range": float(x.max() - x.min()),
        "robust_mean_absolute_deviation": robust_mad,
        "root_mean_squared": float(np.sqrt(energy / n)),
        "skewness": float(skewness),
        "total_energy": energy * v.voxel_volume,
        "uniformity": float(np.sum(p ** 2)),
        "variance": float(m2),
    }
