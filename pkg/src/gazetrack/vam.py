"""Duration-weighted visual attention maps and their hard pseudo-labels."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter
from .grid import GazeRecord, check_map, minmax_normalize

DEFAULT_SIGMA = 15.0
UNDER_ACTIVATION_THRESHOLD = 0.7


@dataclass(frozen=True)
class VamParams:
    sigma: float = DEFAULT_SIGMA
    kernel_radius: int | None = None  # defaults to ceil(3 * sigma)

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidParameter(f"sigma must be > 0, got {self.sigma}")
        if self.kernel_radius is None:
            object.__setattr__(self, "kernel_radius", max(1, math.ceil(3 * self.sigma)))
        elif int(self.kernel_radius) != self.kernel_radius or self.kernel_radius < 1:
            raise InvalidParameter(f"kernel_radius must be a positive integer, got {self.kernel_radius}")


def accumulate_vam(record: GazeRecord, params: VamParams = VamParams()) -> np.ndarray:
    """Un-normalized sum of duration-weighted Gaussian splats.

    Each fixation adds ``duration * exp(-d^2 / (2 sigma^2))`` to every pixel
    within ``kernel_radius`` (per axis) of the fixation.  Fixations are
    accumulated in start-time order so the result does not depend on the
    order they were listed in.
    """
    w, h = record.shape
    out = np.zeros((h, w), dtype=np.float64)
    r = params.kernel_radius
    inv = 1.0 / (2.0 * params.sigma ** 2)
    for f in sorted(record.fixations, key=lambda f: (f.start_ts, f.x, f.y, f.duration)):
        x0, x1 = max(0, math.ceil(f.x - r)), min(w - 1, math.floor(f.x + r))
        y0, y1 = max(0, math.ceil(f.y - r)), min(h - 1, math.floor(f.y + r))
        if x0 > x1 or y0 > y1:
            continue
        dx = np.arange(x0, x1 + 1, dtype=np.float64) - f.x
        dy = np.arange(y0, y1 + 1, dtype=np.float64) - f.y
        patch = np.exp(-(dy[:, None] ** 2 + dx[None, :] ** 2) * inv)
        out[y0:y1 + 1, x0:x1 + 1] += f.duration * patch
    return out


def build_vam(record: GazeRecord, params: VamParams = VamParams()) -> np.ndarray:
    """Visual attention map in [0, 1] for one gaze record."""
    return minmax_normalize(accumulate_vam(record, params))


def threshold_mask(vam, threshold: float = UNDER_ACTIVATION_THRESHOLD) -> np.ndarray:
    """Boolean mask of pixels strictly above ``threshold``."""
    if not 0.0 < threshold < 1.0:
        raise InvalidParameter(f"threshold must lie in (0, 1), got {threshold}")
    arr = check_map(vam, value_range=(0.0, 1.0), name="vam")
    return arr > threshold
