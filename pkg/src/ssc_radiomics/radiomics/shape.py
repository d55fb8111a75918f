from __future__ import annotations

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError
from skimage import measure

from ..volgrid import EmptyMaskError, MaskGrid

_BRUTE_FORCE_LIMIT = 1500

FEATURE_NAMES = (
    "elongation", "flatness", "least_axis_length", "major_axis_length",
    "maximum_2d_diameter_column", "maximum_2d_diameter_row", "maximum_2d_diameter_slice",
    "maximum_3d_diameter", "mesh_volume", "minor_axis_length", "sphericity", "surface_area",
    "surface_volume_ratio", "voxel_volume",
)


def _max_pairwise_distance(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    if len(points) > _BRUTE_FORCE_LIMIT:
        try:
            points = points[ConvexHull(points).vertices]
        except (QhullError, ValueError):
            pass  # degenerate (flat) point sets: fall back to the full set
    best = 0.0
    for start in range(0, len(points), 512):
        block = points[start:start + 512]
        d2 = ((block[:, None, :] - points[None, :, :]) ** 2).sum(-1)
        best = max(best, float(d2.max()))
    return float(np.sqrt(best))


def _boundary_voxels(inside: np.ndarray) -> np.ndarray:
    eroded = ndimage.binary_erosion(inside, structure=ndimage.generate_binary_structure(3, 1),
                                    border_value=0)
    return inside & ~eroded


def _mesh(inside: np.ndarray, spacing):
    padded = np.pad(inside.astype(np.float32), 1)
    verts, faces, _, _ = measure.marching_cubes(padded, level=0.5, spacing=spacing)
    verts = verts.astype(np.float64)
    area = float(measure.mesh_surface_area(verts, faces))
    tri = verts[faces]
    volume = abs(float(np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])).sum()) / 6.0)
    return volume, area


def shape_features(m: MaskGrid) -> dict:
    """Geometry of the mask region.

    Surface area and mesh volume come from a marching-cubes triangulation of
    the mask boundary; diameters are taken between boundary voxel centres.
    Axis lengths are ``4 * sqrt(eigenvalue)`` of the population covariance of
    in-mask voxel coordinates (mm).
    """
    inside = m.as_bool()
    n = int(inside.sum())
    if n == 0:
        raise EmptyMaskError("shape features need a non-empty mask")
    spacing = np.asarray(m.spacing_mm)

    voxel_volume = n * m.voxel_volume
    mesh_volume, area = _mesh(inside, tuple(spacing))

    coords = np.argwhere(inside) * spacing
    centred = coords - coords.mean(axis=0)
    cov = centred.T @ centred / n
    lam = np.clip(np.sort(np.linalg.eigvalsh(cov))[::-1], 0.0, None)
    if lam[0] > 0:
        elongation = float(np.sqrt(lam[1] / lam[0]))
        flatness = float(np.sqrt(lam[2] / lam[0]))
    else:
        elongation = flatness = 1.0

    bidx = np.argwhere(_boundary_voxels(inside))
    bpts = bidx * spacing
    diam_3d = _max_pairwise_distance(bpts)

    def max_2d(axis):
        keep = [a for a in range(3) if a != axis]
        best = 0.0
        for k in np.unique(bidx[:, axis]):
            sel = bidx[:, axis] == k
            best = max(best, _max_pairwise_distance(bpts[sel][:, keep]))
        return best

    return {
        "elongation": elongation,
        "flatness": flatness,
        "least_axis_length": float(4 * np.sqrt(lam[2])),
        "major_axis_length": float(4 * np.sqrt(lam[0])),
        "maximum_2d_diameter_column": max_2d(1),
        "maximum_2d_diameter_row": max_2d(0),
        "maximum_2d_diameter_slice": max_2d(2),
        "maximum_3d_diameter": diam_3d,
        "mesh_volume": mesh_volume,
        "minor_axis_length": float(4 * np.sqrt(lam[1])),
        "sphericity": float((36 * np.pi * mesh_volume ** 2) ** (1 / 3) / area),
        "surface_area": area,
        "surface_volume_ratio": area / mesh_volume,
        "voxel_volume": voxel_volume,
    }
