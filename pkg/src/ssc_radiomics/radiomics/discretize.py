from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..volgrid import EmptyMaskError, MaskGrid, VolumeGrid, check_pair


@dataclass(frozen=True, eq=False)
class DiscretizedVolume:
    """Gray levels ``1..num_levels`` on in-mask voxels, 0 elsewhere.

    Binning is anchored at the in-mask minimum, so a constant offset applied
    to the region leaves the levels unchanged.
    """

    levels: np.ndarray
    num_levels: int
    bin_width: float
    mask: MaskGrid

    @property
    def in_mask(self) -> np.ndarray:
        return self.levels > 0


def discretize(v: VolumeGrid, m: MaskGrid, bin_width: float = 25.0) -> DiscretizedVolume:
    """Fixed-bin-width discretization: ``floor((x - min) / bin_width) + 1``."""
    check_pair(v, m)
    if not bin_width > 0:
        raise ValueError(f"bin_width must be positive, got {bin_width}")
    inside = m.as_bool()
    if not inside.any():
        raise EmptyMaskError("cannot discretize an empty mask")
    values = v.data[inside].astype(np.float64)
    lo = values.min()
    idx = np.floor((values - lo) / bin_width).astype(np.int64) + 1
    num_levels = int(idx.max())
    levels = np.zeros(v.dims, dtype=np.int32)
    levels[inside] = idx
    levels.setflags(write=False)
    return DiscretizedVolume(levels, num_levels, float(bin_width), m)
