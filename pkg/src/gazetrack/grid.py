"""Grid types, bilinear resizing, normalization and the Dice metric.

Maps are plain ``numpy`` arrays of shape ``(height, width)`` in float64,
row-major, with pixel ``(x, y)`` stored at ``values[y, x]``.  Pixel centers
sit at integer coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import AmbiguousOrder, InvalidParameter, InvalidShape


class GridShape(NamedTuple):
    width: int
    height: int

    @property
    def dims(self) -> tuple[int, int]:
        """Array shape ``(height, width)``."""
        return (self.height, self.width)

    @property
    def size(self) -> int:
        return self.width * self.height

    @classmethod
    def of(cls, array) -> "GridShape":
        h, w = np.shape(array)[:2]
        return cls(int(w), int(h))

    def validate(self) -> "GridShape":
        if int(self.width) != self.width or int(self.height) != self.height:
            raise InvalidShape(f"non-integer grid shape {self}")
        if self.width < 1 or self.height < 1:
            raise InvalidShape(f"grid dims must be >= 1, got {self.width}x{self.height}")
        return self


@dataclass(frozen=True)
class FixationPoint:
    x: float
    y: float
    duration: float  # ms
    start_ts: float  # ms

    def __post_init__(self):
        vals = (self.x, self.y, self.duration, self.start_ts)
        if not all(np.isfinite(v) for v in vals):
            raise InvalidParameter(f"non-finite fixation field in {self}")
        if self.duration <= 0:
            raise InvalidParameter(f"fixation duration must be > 0, got {self.duration}")
        if self.start_ts < 0:
            raise InvalidParameter(f"start timestamp must be >= 0, got {self.start_ts}")


@dataclass(frozen=True)
class GazeRecord:
    """All fixations recorded for one image, in arbitrary order."""

    image_id: str
    shape: GridShape
    fixations: tuple[FixationPoint, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "shape", GridShape(*self.shape).validate())
        object.__setattr__(self, "fixations", tuple(self.fixations))
        if not self.fixations:
            raise InvalidParameter(f"gaze record {self.image_id!r} has no fixations")
        w, h = self.shape
        seen = set()
        for f in self.fixations:
            if not (0 <= f.x < w and 0 <= f.y < h):
                raise InvalidParameter(
                    f"fixation ({f.x}, {f.y}) outside {w}x{h} grid in {self.image_id!r}"
                )
            if f.start_ts in seen:
                raise AmbiguousOrder(
                    f"duplicate start_ts {f.start_ts} in record {self.image_id!r}"
                )
            seen.add(f.start_ts)

    def __len__(self):
        return len(self.fixations)


def check_map(values, value_range=None, name="map") -> np.ndarray:
    """Return ``values`` as a finite 2-D float64 array, optionally range-checked."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise InvalidShape(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameter(f"{name} contains non-finite values")
    if value_range is not None:
        lo, hi = value_range
        if arr.min() < lo or arr.max() > hi:
            raise InvalidParameter(
                f"{name} values [{arr.min()}, {arr.max()}] outside [{lo}, {hi}]"
            )
    return arr


def _resize_axis(src: np.ndarray, n_out: int, axis: int) -> np.ndarray:
    n_in = src.shape[axis]
    pos = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0.0, n_in - 1)
    i0 = np.floor(pos).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    w = pos - i0
    a = np.take(src, i0, axis=axis)
    b = np.take(src, i1, axis=axis)
    shape = [1, 1]
    shape[axis] = n_out
    w = w.reshape(shape)
    return (1.0 - w) * a + w * b


def bilinear_resize(src, target: GridShape) -> np.ndarray:
    """Resize a map to ``target`` with half-pixel-center bilinear sampling.

    Source sample position for output index ``i`` is
    ``(i + 0.5) * src_dim / target_dim - 0.5``, clamped to the borders.
    """
    arr = check_map(src, name="src")
    target = GridShape(*target).validate()
    if GridShape.of(arr) == target:
        return arr.copy()
    out = _resize_axis(arr, target.height, axis=0)
    out = _resize_axis(out, target.width, axis=1)
    # rounding in (1-w)a + wb can leave the convex hull by an ulp
    return np.clip(out, arr.min(), arr.max())


def resize_channels(src: np.ndarray, target: GridShape) -> np.ndarray:
    """Bilinear resize applied per channel of an ``(H, W, C)`` array."""
    return np.stack(
        [bilinear_resize(src[..., c], target) for c in range(src.shape[-1])], axis=-1
    )


def minmax_normalize(src) -> np.ndarray:
    """Affinely map values onto [0, 1]; a constant map becomes all zeros."""
    arr = check_map(src, name="src")
    lo, hi = arr.min(), arr.max()
    if hi == lo:
        return np.zeros_like(arr)
    return np.clip((arr - lo) / (hi - lo), 0.0, 1.0)


def check_mask(mask, name="mask") -> np.ndarray:
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise InvalidShape(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.dtype != bool:
        if not np.all((arr == 0) | (arr == 1)):
            raise InvalidParameter(f"{name} must contain only 0/1")
        arr = arr.astype(bool)
    return arr


def dice_score(pred, gt) -> float:
    """Dice overlap ``2|A∩B| / (|A| + |B|)``; two empty masks score 1."""
    a = check_mask(pred, "pred")
    b = check_mask(gt, "gt")
    if a.shape != b.shape:
        raise InvalidShape(f"mask shapes differ: {a.shape} vs {b.shape}")
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(a, b).sum()) / total
