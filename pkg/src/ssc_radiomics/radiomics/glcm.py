r"""
Gray-level co-occurrence matrix (GLCM) features.

For every one of the 13 unique 3D offsets at Chebyshev distance 1 a
symmetric co-occurrence matrix is accumulated over pairs of in-mask voxels.
Each feature is computed on every direction's normalized matrix
:math:`p(i, j)` and then averaged over the directions that contain at least
one pair.

Notation used below: :math:`p_x(i) = \sum_j p(i,j)`, :math:`\mu = \sum_i i\,p_x(i)`,
:math:`p_{x+y}(k) = \sum_{i+j=k} p(i,j)`, :math:`p_{x-y}(k) = \sum_{|i-j|=k} p(i,j)`.
Entropies use :math:`\log_2` with :math:`0 \log 0 = 0`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .discretize import DiscretizedVolume


class DegenerateTextureError(ValueError):
    """No co-occurring voxel pair exists in any direction."""


def _unique_offsets():
    out = []
    for off in itertools.product((-1, 0, 1), repeat=3):
        if off == (0, 0, 0):
            continue
        if tuple(-o for o in off) not in out:
            out.append(off)
    return tuple(out)


DIRECTIONS = _unique_offsets()


@dataclass(frozen=True, eq=False)
class GlcmMatrix:
    """Symmetric pair counts, shape ``(13, Ng, Ng)``, index ``[direction, i-1, j-1]``."""

    counts: np.ndarray
    directions: tuple = DIRECTIONS

    @property
    def num_levels(self) -> int:
        return self.counts.shape[1]

    def normalized(self) -> np.ndarray:
        totals = self.counts.sum(axis=(1, 2), keepdims=True).astype(np.float64)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(totals > 0, self.counts / np.where(totals > 0, totals, 1), 0.0)


def _crop(levels):
    nz = np.argwhere(levels > 0)
    lo, hi = nz.min(axis=0), nz.max(axis=0) + 1
    return levels[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]


def _shifted_pair(levels, offset):
    src, dst = [], []
    for o, n in zip(offset, levels.shape):
        if o >= 0:
            src.append(slice(0, n - o))
            dst.append(slice(o, n))
        else:
            src.append(slice(-o, n))
            dst.append(slice(0, n + o))
    return levels[tuple(src)], levels[tuple(dst)]


def glcm_matrices(d: DiscretizedVolume) -> GlcmMatrix:
    ng = d.num_levels
    levels = _crop(d.levels).astype(np.int64)
    counts = np.zeros((len(DIRECTIONS), ng, ng), dtype=np.int64)
    for k, off in enumerate(DIRECTIONS):
        a, b = _shifted_pair(levels, off)
        valid = (a > 0) & (b > 0)
        flat = (a[valid] - 1) * ng + (b[valid] - 1)
        c = np.bincount(flat, minlength=ng * ng).reshape(ng, ng)
        counts[k] = c + c.T
    return GlcmMatrix(counts)


def _entropy(p):
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)))


def _direction_features(p: np.ndarray, ng: int) -> dict:
    lv = np.arange(1, ng + 1, dtype=np.float64)
    i, j = np.meshgrid(lv, lv, indexing="ij")
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    ux = float(np.sum(lv * px))
    uy = float(np.sum(lv * py))
    varx = float(np.sum((lv - ux) ** 2 * px))
    vary = float(np.sum((lv - uy) ** 2 * py))

    diff = np.abs(i - j).astype(np.int64)
    total = (i + j).astype(np.int64)
    p_diff = np.bincount(diff.ravel(), weights=p.ravel(), minlength=ng)
    p_sum = np.bincount(total.ravel(), weights=p.ravel(), minlength=2 * ng + 1)
    k_diff = np.arange(p_diff.size, dtype=np.float64)
    k_sum = np.arange(p_sum.size, dtype=np.float64)

    hxy = _entropy(p)
    hx = _entropy(px)
    hy = _entropy(py)
    pxy = np.outer(px, py)
    with np.errstate(divide="ignore"):
        log_pxy = np.where(pxy > 0, np.log2(np.where(pxy > 0, pxy, 1.0)), 0.0)
    hxy1 = float(-np.sum(p * log_pxy))
    hxy2 = float(-np.sum(pxy * log_pxy))

    sd = np.sqrt(varx * vary)
    correlation = float((np.sum(p * i * j) - ux * uy) / sd) if sd > 0 else 0.0
    hmax = max(hx, hy)
    imc1 = (hxy - hxy1) / hmax if hmax > 0 else 0.0
    imc2 = float(np.sqrt(1.0 - np.exp(-2.0 * max(hxy2 - hxy, 0.0))))

    diff_avg = float(np.sum(k_diff * p_diff))
    sum_avg = float(np.sum(k_sum * p_sum))
    centred = i + j - ux - uy
    off_diag = diff > 0
    sq = (i - j) ** 2
    return {
        "autocorrelation": float(np.sum(p * i * j)),
        "cluster_prominence": float(np.sum(centred ** 4 * p)),
        "cluster_shade": float(np.sum(centred ** 3 * p)),
        "cluster_tendency": float(np.sum(centred ** 2 * p)),
        "contrast": float(np.sum(sq * p)),
        "correlation": correlation,
        "difference_average": diff_avg,
        "difference_entropy": _entropy(p_diff),
        "difference_variance": float(np.sum((k_diff - diff_avg) ** 2 * p_diff)),
        "imc1": float(imc1),
        "imc2": imc2,
        "inverse_difference": float(np.sum(p / (1 + diff))),
        "inverse_difference_moment": float(np.sum(p / (1 + sq))),
        "inverse_difference_moment_normalized": float(np.sum(p / (1 + sq / ng ** 2))),
        "inverse_difference_normalized": float(np.sum(p / (1 + diff / ng))),
        "inverse_variance": float(np.sum(p[off_diag] / sq[off_diag])),
        "joint_average": ux,
        "joint_energy": float(np.sum(p ** 2)),
        "joint_entropy": hxy,
        "maximum_probability": float(p.max()),
        "sum_average": sum_avg,
        "sum_entropy": _entropy(p_sum),
        "sum_of_squares": varx,
        "sum_variance": float(np.sum((k_sum - sum_avg) ** 2 * p_sum)),
    }


FEATURE_NAMES = tuple(sorted(_direction_features(np.ones((1, 1)), 1)))


def glcm_features(d: DiscretizedVolume, matrix: GlcmMatrix | None = None) -> dict:
    """24 co-occurrence features averaged over directions with pairs.

    Flat regions resolve to entropies 0, energies 1 and correlation 0.
    """
    if matrix is None:
        matrix = glcm_matrices(d)
    totals = matrix.counts.sum(axis=(1, 2))
    used = np.flatnonzero(totals > 0)
    if used.size == 0:
        raise DegenerateTextureError("no co-occurring voxel pairs; GLCM is undefined")
    probs = matrix.normalized()
    per_dir = [_direction_features(probs[k], matrix.num_levels) for k in used]
    return {name: float(np.mean([f[name] for f in per_dir])) for name in FEATURE_NAMES}
