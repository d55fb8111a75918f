"""Brute-force reference implementations used only by the tests.

These loop over voxels, pairs and matrix cells in plain Python.  They share
no code with the package beyond the input arrays.
"""

import itertools
import math
from collections import deque


def canonical_offsets():
    """The 13 offsets whose first non-zero component is positive."""
    out = []
    for off in itertools.product((-1, 0, 1), repeat=3):
        nz = [o for o in off if o != 0]
        if nz and nz[0] > 0:
            out.append(off)
    return out


def canonical(off):
    nz = [o for o in off if o != 0]
    return tuple(off) if nz[0] > 0 else tuple(-o for o in off)


def glcm_counts(levels, ng):
    """{offset: {(i, j): count}} with symmetric counting, levels 1..ng, 0 = outside."""
    nx, ny, nz = levels.shape
    out = {}
    for off in canonical_offsets():
        c = {}
        for x in range(nx):
            for y in range(ny):
                for z in range(nz):
                    a = int(levels[x, y, z])
                    if a == 0:
                        continue
                    x2, y2, z2 = x + off[0], y + off[1], z + off[2]
                    if not (0 <= x2 < nx and 0 <= y2 < ny and 0 <= z2 < nz):
                        continue
                    b = int(levels[x2, y2, z2])
                    if b == 0:
                        continue
                    c[(a, b)] = c.get((a, b), 0) + 1
                    c[(b, a)] = c.get((b, a), 0) + 1
        out[off] = c
    return out


def _h(values):
    return -sum(v * math.log2(v) for v in values if v > 0)


def glcm_direction_features(counts, ng):
    total = sum(counts.values())
    p = {(i, j): counts.get((i, j), 0) / total for i in range(1, ng + 1) for j in range(1, ng + 1)}
    px = {i: sum(p[i, j] for j in range(1, ng + 1)) for i in range(1, ng + 1)}
    py = {j: sum(p[i, j] for i in range(1, ng + 1)) for j in range(1, ng + 1)}
    ux = sum(i * px[i] for i in px)
    uy = sum(j * py[j] for j in py)
    varx = sum((i - ux) ** 2 * px[i] for i in px)
    vary = sum((j - uy) ** 2 * py[j] for j in py)
    pdiff = [0.0] * ng
    psum = [0.0] * (2 * ng + 1)
    for (i, j), v in p.items():
        pdiff[abs(i - j)] += v
        psum[i + j] += v
    hxy = _h(p.values())
    hx, hy = _h(px.values()), _h(py.values())
    hxy1 = -sum(v * math.log2(px[i] * py[j]) for (i, j), v in p.items() if px[i] * py[j] > 0)
    hxy2 = -sum(px[i] * py[j] * math.log2(px[i] * py[j]) for i in px for j in py if px[i] * py[j] > 0)
    auto = sum(i * j * v for (i, j), v in p.items())
    sd = math.sqrt(varx * vary)
    davg = sum(k * v for k, v in enumerate(pdiff))
    savg = sum(k * v for k, v in enumerate(psum))
    f = {
        "autocorrelation": auto,
        "cluster_prominence": sum((i + j - ux - uy) ** 4 * v for (i, j), v in p.items()),
        "cluster_shade": sum((i + j - ux - uy) ** 3 * v for (i, j), v in p.items()),
        "cluster_tendency": sum((i + j - ux - uy) ** 2 * v for (i, j), v in p.items()),
        "contrast": sum((i - j) ** 2 * v for (i, j), v in p.items()),
        "correlation": (auto - ux * uy) / sd if sd > 0 else 0.0,
        "difference_average": davg,
        "difference_entropy": _h(pdiff),
        "difference_variance": sum((k - davg) ** 2 * v for k, v in enumerate(pdiff)),
        "imc1": (hxy - hxy1) / max(hx, hy) if max(hx, hy) > 0 else 0.0,
        "imc2": math.sqrt(1 - math.exp(-2 * max(hxy2 - hxy, 0.0))),
        "inverse_difference": sum(v / (1 + abs(i - j)) for (i, j), v in p.items()),
        "inverse_difference_moment": sum(v / (1 + (i - j) ** 2) for (i, j), v in p.items()),
        "inverse_difference_moment_normalized": sum(v / (1 + (i - j) ** 2 / ng ** 2) for (i, j), v in p.items()),
        "inverse_difference_normalized": sum(v / (1 + abs(i - j) / ng) for (i, j), v in p.items()),
        "inverse_variance": sum(v / (i - j) ** 2 for (i, j), v in p.items() if i != j),
        "joint_average": ux,
        "joint_energy": sum(v * v for v in p.values()),
        "joint_entropy": hxy,
        "maximum_probability": max(p.values()),
        "sum_average": savg,
        "sum_entropy": _h(psum),
        "sum_of_squares": varx,
        "sum_variance": sum((k - savg) ** 2 * v for k, v in enumerate(psum)),
    }
    return f


def glcm_features(levels, ng):
    per_dir = [glcm_direction_features(c, ng) for c in glcm_counts(levels, ng).values() if c]
    return {k: sum(f[k] for f in per_dir) / len(per_dir) for k in per_dir[0]}


def zones(levels):
    """List of (level, size) for every 26-connected same-level zone, by flood fill."""
    nx, ny, nz = levels.shape
    seen = set()
    out = []
    steps = [o for o in itertools.product((-1, 0, 1), repeat=3) if o != (0, 0, 0)]
    for start in itertools.product(range(nx), range(ny), range(nz)):
        g = int(levels[start])
        if g == 0 or start in seen:
            continue
        seen.add(start)
        queue, size = deque([start]), 0
        while queue:
            x, y, z = queue.popleft()
            size += 1
            for dx, dy, dz in steps:
                q = (x + dx, y + dy, z + dz)
                if q in seen or not (0 <= q[0] < nx and 0 <= q[1] < ny and 0 <= q[2] < nz):
                    continue
                if int(levels[q]) == g:
                    seen.add(q)
                    queue.append(q)
        out.append((g, size))
    return out


def glszm_counts(levels):
    c = {}
    for g, s in zones(levels):
        c[(g, s)] = c.get((g, s), 0) + 1
    return c


def glszm_features(levels, ng):
    c = glszm_counts(levels)
    nz = sum(c.values())
    nvox = sum(s * n for (g, s), n in c.items())
    p = {k: n / nz for k, n in c.items()}
    row, col = {}, {}
    for (g, s), n in c.items():
        row[g] = row.get(g, 0) + n
        col[s] = col.get(s, 0) + n
    mu_i = sum(g * v for (g, s), v in p.items())
    mu_s = sum(s * v for (g, s), v in p.items())
    return {
        "gray_level_non_uniformity": sum(r * r for r in row.values()) / nz,
        "gray_level_non_uniformity_normalized": sum(r * r for r in row.values()) / nz ** 2,
        "gray_level_variance": sum(v * (g - mu_i) ** 2 for (g, s), v in p.items()),
        "high_gray_level_zone_emphasis": sum(v * g * g for (g, s), v in p.items()),
        "large_area_emphasis": sum(v * s * s for (g, s), v in p.items()),
        "large_area_high_gray_level_emphasis": sum(v * g * g * s * s for (g, s), v in p.items()),
        "large_area_low_gray_level_emphasis": sum(v * s * s / (g * g) for (g, s), v in p.items()),
        "low_gray_level_zone_emphasis": sum(v / (g * g) for (g, s), v in p.items()),
        "size_zone_non_uniformity": sum(x * x for x in col.values()) / nz,
        "size_zone_non_uniformity_normalized": sum(x * x for x in col.values()) / nz ** 2,
        "small_area_emphasis": sum(v / (s * s) for (g, s), v in p.items()),
        "small_area_high_gray_level_emphasis": sum(v * g * g / (s * s) for (g, s), v in p.items()),
        "small_area_low_gray_level_emphasis": sum(v / (g * g * s * s) for (g, s), v in p.items()),
        "zone_entropy": _h(p.values()),
        "zone_percentage": nz / nvox,
        "zone_variance": sum(v * (s - mu_s) ** 2 for (g, s), v in p.items()),
    }


def pair_wins(scores, labels):
    """O(n^2) count of (positive, negative) pairs ordered correctly, ties worth one half."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = 0.0
    for a in pos:
        for b in neg:
            wins += 1.0 if a > b else 0.5 if a == b else 0.0
    return wins, len(pos) * len(neg)


def auroc_pairs(scores, labels):
    wins, n_pairs = pair_wins(scores, labels)
    return wins / n_pairs


def pair_wins_broadcast(scores, labels):
    """Same pair count as ``pair_wins`` via an n_pos x n_neg comparison table.

    Returns twice the win count as an exact integer, plus the pair count.
    """
    import numpy as np

    s, y = np.asarray(scores, float), np.asarray(labels)
    pos, neg = s[y == 1][:, None], s[y == 0][None, :]
    twice = 2 * int(np.count_nonzero(pos > neg)) + int(np.count_nonzero(pos == neg))
    return twice, pos.size * neg.size
