"""
Volume data model and CT preprocessing.

Voxel arrays are held as numpy arrays indexed ``[x, y, z]`` with shape
``dims``.  On disk the payload is x-fastest (``index = x + nx*y + nx*ny*z``),
which is the C-order layout of the ``[z, y, x]`` transpose.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np
from scipy import ndimage

UNITS = ("HU", "normalized", "arbitrary")
DTYPES = {"i16": "<i2", "f32": "<f4", "u8": "u1"}


class VolumeFormatError(ValueError):
    """Raised when a ``.vgrid`` header or payload is malformed."""


class ShapeMismatchError(ValueError):
    pass


class EmptyMaskError(ValueError):
    pass


def _as_triple(values, name, cast):
    t = tuple(cast(v) for v in values)
    if len(t) != 3:
        raise ValueError(f"{name} must have 3 components, got {len(t)}")
    return t


@dataclass(frozen=True, eq=False)
class VolumeGrid:
    """3D scalar field with physical voxel spacing (mm).

    Attributes:
        data: array of shape ``dims`` indexed ``[x, y, z]``. Stored read-only.
        spacing_mm: voxel edge lengths ``(sx, sy, sz)``.
        intensity_unit: one of ``"HU"``, ``"normalized"``, ``"arbitrary"``.
    """

    data: np.ndarray
    spacing_mm: Tuple[float, float, float]
    intensity_unit: str = "HU"

    def __post_init__(self):
        data = np.array(self.data, copy=True)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ValueError(f"volume data must be a non-empty 3D array, got shape {data.shape}")
        if not np.issubdtype(data.dtype, np.number):
            raise TypeError(f"volume data must be numeric, got {data.dtype}")
        spacing = _as_triple(self.spacing_mm, "spacing_mm", float)
        if not all(np.isfinite(s) and s > 0 for s in spacing):
            raise ValueError(f"spacing must be positive and finite, got {spacing}")
        if self.intensity_unit not in UNITS:
            raise ValueError(f"unknown intensity unit {self.intensity_unit!r}")
        if not np.all(np.isfinite(data)):
            raise ValueError("volume contains non-finite voxels")
        if self.intensity_unit == "normalized" and data.size and (data.min() < 0 or data.max() > 1):
            raise ValueError("normalized volume has voxels outside [0, 1]")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing_mm", spacing)

    @property
    def dims(self) -> Tuple[int, int, int]:
        return tuple(int(n) for n in self.data.shape)

    @property
    def voxel_volume(self) -> float:
        sx, sy, sz = self.spacing_mm
        return sx * sy * sz

    def flat(self) -> np.ndarray:
        """Voxels in x-fastest order."""
        return self.data.transpose(2, 1, 0).ravel()


@dataclass(frozen=True, eq=False)
class MaskGrid:
    """Binary lung mask (1 = lung) on the same lattice as a VolumeGrid."""

    labels: np.ndarray
    spacing_mm: Tuple[float, float, float]

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 3 or min(labels.shape) < 1:
            raise ValueError(f"mask must be a non-empty 3D array, got shape {labels.shape}")
        if not np.all((labels == 0) | (labels == 1)):
            raise ValueError("mask labels must be 0 or 1")
        labels = labels.astype(np.uint8)
        spacing = _as_triple(self.spacing_mm, "spacing_mm", float)
        if not all(np.isfinite(s) and s > 0 for s in spacing):
            raise ValueError(f"spacing must be positive and finite, got {spacing}")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "spacing_mm", spacing)

    @property
    def dims(self) -> Tuple[int, int, int]:
        return tuple(int(n) for n in self.labels.shape)

    @property
    def voxel_volume(self) -> float:
        sx, sy, sz = self.spacing_mm
        return sx * sy * sz

    @property
    def count(self) -> int:
        return int(self.labels.sum())

    def as_bool(self) -> np.ndarray:
        return self.labels.astype(bool)


def check_pair(v: VolumeGrid, m: MaskGrid) -> None:
    if v.dims != m.dims:
        raise ShapeMismatchError(f"volume dims {v.dims} != mask dims {m.dims}")
    if not np.allclose(v.spacing_mm, m.spacing_mm, rtol=1e-9, atol=0):
        raise ShapeMismatchError(f"volume spacing {v.spacing_mm} != mask spacing {m.spacing_mm}")


# ---------------------------------------------------------------------------
# .vgrid I/O
# ---------------------------------------------------------------------------

def _payload_path(path: Path) -> Path:
    return path.with_suffix(".raw")


def _read_grid(path) -> Tuple[dict, np.ndarray]:
    path = Path(path)
    try:
        header = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise VolumeFormatError(f"{path}: cannot parse header ({exc})") from exc
    try:
        dims = _as_triple(header["dims"], "dims", int)
        spacing = _as_triple(header["spacing_mm"], "spacing_mm", float)
        dtype = header["dtype"]
        unit = header.get("unit", "arbitrary")
    except (KeyError, TypeError, ValueError) as exc:
        raise VolumeFormatError(f"{path}: malformed header ({exc})") from exc
    if min(dims) < 1:
        raise VolumeFormatError(f"{path}: dims must be positive, got {dims}")
    if dtype not in DTYPES:
        raise VolumeFormatError(f"{path}: unsupported dtype {dtype!r}")
    raw_path = _payload_path(path)
    try:
        payload = raw_path.read_bytes()
    except OSError as exc:
        raise VolumeFormatError(f"{raw_path}: cannot read payload ({exc})") from exc
    np_dtype = np.dtype(DTYPES[dtype])
    expected = dims[0] * dims[1] * dims[2]
    if len(payload) % np_dtype.itemsize or len(payload) // np_dtype.itemsize != expected:
        got = len(payload) / np_dtype.itemsize
        raise VolumeFormatError(
            f"{raw_path}: dimension mismatch, header declares {expected} voxels, payload has {got:g}"
        )
    flat = np.frombuffer(payload, dtype=np_dtype)
    data = flat.reshape(dims[2], dims[1], dims[0]).transpose(2, 1, 0)
    return {"dims": dims, "spacing_mm": spacing, "dtype": dtype, "unit": unit}, data


def _write_grid(path, data: np.ndarray, spacing, dtype: str, unit: str) -> Path:
    path = Path(path)
    if path.suffix != ".vgrid":
        path = path.with_suffix(".vgrid")
    header = {
        "dims": [int(n) for n in data.shape],
        "spacing_mm": [float(s) for s in spacing],
        "dtype": dtype,
        "unit": unit,
    }
    payload = np.ascontiguousarray(data.transpose(2, 1, 0)).astype(DTYPES[dtype]).tobytes()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(header) + "\n", encoding="utf-8")
    _payload_path(path).write_bytes(payload)
    return path


def load_volume(path) -> VolumeGrid:
    header, data = _read_grid(path)
    if header["dtype"] == "u8":
        raise VolumeFormatError(f"{path}: u8 payloads are masks, use load_mask")
    data = data.astype(np.float64)
    if not np.all(np.isfinite(data)):
        raise VolumeFormatError(f"{path}: payload contains non-finite voxels")
    unit = header["unit"] if header["unit"] in UNITS else "arbitrary"
    return VolumeGrid(data, header["spacing_mm"], unit)


def save_volume(v: VolumeGrid, path, dtype: str | None = None) -> Path:
    """Write ``v`` as a ``.vgrid`` header plus ``.raw`` payload.

    ``dtype`` defaults to ``"i16"`` when every voxel is an integer in the
    int16 range, otherwise ``"f32"``.
    """
    if dtype is None:
        d = v.data
        integral = np.all(d == np.round(d)) and d.min() >= -32768 and d.max() <= 32767
        dtype = "i16" if integral else "f32"
    if dtype not in ("i16", "f32"):
        raise ValueError(f"volume dtype must be i16 or f32, got {dtype!r}")
    return _write_grid(path, v.data, v.spacing_mm, dtype, v.intensity_unit)


def load_mask(path) -> MaskGrid:
    header, data = _read_grid(path)
    if header["dtype"] != "u8":
        raise VolumeFormatError(f"{path}: mask payload must be u8, got {header['dtype']}")
    if np.any(data > 1):
        raise VolumeFormatError(f"{path}: mask contains values other than 0/1")
    return MaskGrid(data, header["spacing_mm"])


def save_mask(m: MaskGrid, path) -> Path:
    return _write_grid(path, m.labels, m.spacing_mm, "u8", "arbitrary")


# ---------------------------------------------------------------------------
# Resampling
# ---------------------------------------------------------------------------

def _target_dims(dims, spacing, target_mm):
    return tuple(max(1, int(round(n * s / target_mm))) for n, s in zip(dims, spacing))


def _source_coords(n_out, spacing, target_mm, n_in):
    # voxel centres: output i sits at (i + 0.5) * target in physical space
    c = (np.arange(n_out) + 0.5) * (target_mm / spacing) - 0.5
    return np.clip(c, 0.0, n_in - 1)


def _linear_axis(data, coords, axis):
    n_in = data.shape[axis]
    lo = np.floor(coords).astype(np.intp)
    lo = np.minimum(lo, n_in - 1)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = coords - lo
    shape = [1, 1, 1]
    shape[axis] = -1
    frac = frac.reshape(shape)
    a = np.take(data, lo, axis=axis)
    b = np.take(data, hi, axis=axis)
    out = a + (b - a) * frac
    # rounding must not step outside the bracketing samples
    return np.clip(out, np.minimum(a, b), np.maximum(a, b))


def resample_isotropic(v: VolumeGrid, target_mm: float = 1.0) -> VolumeGrid:
    """Trilinear resampling to cubic voxels of edge ``target_mm``.

    Sample positions outside the source voxel centres are clamped to the
    border. Output dims are ``round(dim * spacing / target_mm)``, at least 1.
    """
    if not target_mm > 0:
        raise ValueError(f"target_mm must be positive, got {target_mm}")
    out_dims = _target_dims(v.dims, v.spacing_mm, target_mm)
    data = v.data.astype(np.float64)
    for axis in range(3):
        coords = _source_coords(out_dims[axis], v.spacing_mm[axis], target_mm, v.dims[axis])
        data = _linear_axis(data, coords, axis)
    return VolumeGrid(data, (target_mm,) * 3, v.intensity_unit)


def resample_mask(m: MaskGrid, target_mm: float = 1.0) -> MaskGrid:
    """Nearest-neighbour resampling; the result stays binary."""
    if not target_mm > 0:
        raise ValueError(f"target_mm must be positive, got {target_mm}")
    out_dims = _target_dims(m.dims, m.spacing_mm, target_mm)
    labels = m.labels
    for axis in range(3):
        coords = _source_coords(out_dims[axis], m.spacing_mm[axis], target_mm, m.dims[axis])
        idx = np.minimum(np.floor(coords + 0.5).astype(np.intp), m.dims[axis] - 1)
        labels = np.take(labels, idx, axis=axis)
    return MaskGrid(labels, (target_mm,) * 3)


# ---------------------------------------------------------------------------
# Intensity operations
# ---------------------------------------------------------------------------

def clip_normalize_hu(v: VolumeGrid, lo: float = -1200.0, hi: float = 600.0) -> VolumeGrid:
    """Clip HU to ``[lo, hi]`` and map that window linearly onto ``[0, 1]``."""
    if not lo < hi:
        raise ValueError(f"window requires lo < hi, got [{lo}, {hi}]")
    if v.intensity_unit != "HU":
        raise ValueError(f"expected an HU volume, got unit {v.intensity_unit!r}")
    out = (np.clip(v.data, lo, hi) - lo) / (hi - lo)
    return VolumeGrid(np.clip(out, 0.0, 1.0), v.spacing_mm, "normalized")


def apply_mask(v: VolumeGrid, m: MaskGrid) -> VolumeGrid:
    check_pair(v, m)
    # where() rather than multiply so background is +0.0, never -0.0
    out = np.where(m.labels.astype(bool), v.data, 0).astype(v.data.dtype)
    return VolumeGrid(out, v.spacing_mm, v.intensity_unit)


def threshold_segment_lungs(v: VolumeGrid, air_hu: float = -320.0) -> MaskGrid:
    """Fallback lung segmentation by air thresholding.

    Voxels below ``air_hu`` are labelled into 6-connected components; any
    component touching the volume border (outside air) is discarded and the
    two largest remaining components are kept.
    """
    if v.intensity_unit != "HU":
        raise ValueError(f"expected an HU volume, got unit {v.intensity_unit!r}")
    air = v.data < air_hu
    labelled, n = ndimage.label(air)
    if n:
        border = np.zeros_like(air)
        border[[0, -1], :, :] = True
        border[:, [0, -1], :] = True
        border[:, :, [0, -1]] = True
        touching = np.unique(labelled[border & air])
        sizes = np.bincount(labelled.ravel(), minlength=n + 1)
        sizes[0] = 0
        sizes[touching] = 0
        # stable ordering: larger first, then lower label id
        order = sorted(range(1, n + 1), key=lambda k: (-sizes[k], k))
        keep = [k for k in order[:2] if sizes[k] > 0]
    else:
        keep = []
    if not keep:
        raise EmptyMaskError("no interior air component found below threshold")
    return MaskGrid(np.isin(labelled, keep).astype(np.uint8), v.spacing_mm)


def preprocess(v: VolumeGrid, m: MaskGrid, target_mm: float = 1.0,
               window: Tuple[float, float] = (-1200.0, 600.0)) -> Tuple[VolumeGrid, MaskGrid]:
    """Resample, mask, then normalize, in that order."""
    rv = resample_isotropic(v, target_mm)
    rm = resample_mask(m, target_mm)
    masked = apply_mask(rv, rm)
    return clip_normalize_hu(masked, *window), rm
