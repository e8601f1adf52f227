"""Gaze track maps: time-ordered tracks, reverse truncation, distance maps
and thresholded exponential-decay attention maps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AmbiguousOrder, InvalidParameter
from .grid import GazeRecord, GridShape, check_map

CANONICAL_RATIOS = (0.5, 0.75, 1.0)


@dataclass(frozen=True)
class DecayParams:
    beta: float = 10.0  # px
    tau: float = 0.25

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidParameter(f"beta must be > 0, got {self.beta}")
        if not 0.0 < self.tau < 1.0:
            raise InvalidParameter(f"tau must lie in (0, 1), got {self.tau}")

    @property
    def radius(self) -> float:
        """Distance below which the attention map is nonzero."""
        return -self.beta * math.log(self.tau)


DEFAULT_DECAY = DecayParams(beta=10.0, tau=0.25)
WIDE_DECAY = DecayParams(beta=15.0, tau=0.25)  # slower decay for larger, smoother targets


@dataclass(frozen=True, eq=False)
class GazeTrack:
    """Polyline through fixation positions in start-time order.

    ``vertices`` is an ``(n, 2)`` float64 array of ``(x, y)`` rows.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64).reshape(-1, 2)
        if len(v) == 0:
            raise InvalidParameter("a gaze track needs at least one vertex")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def __len__(self):
        return len(self.vertices)

    def __eq__(self, other):
        return isinstance(other, GazeTrack) and np.array_equal(self.vertices, other.vertices)


@dataclass(frozen=True, eq=False)
class TrackAttentionMap:
    values: np.ndarray
    ratio: float


def build_track(record: GazeRecord) -> GazeTrack:
    order = sorted(record.fixations, key=lambda f: f.start_ts)
    for a, b in zip(order, order[1:]):
        if a.start_ts == b.start_ts:
            raise AmbiguousOrder(f"fixations share start_ts {a.start_ts} in {record.image_id!r}")
    return GazeTrack(np.array([(f.x, f.y) for f in order]))


def check_ratio(ratio: float) -> float:
    if not 0.0 < ratio <= 1.0:
        raise InvalidParameter(f"truncation ratio must lie in (0, 1], got {ratio}")
    return float(ratio)


def truncate_track(track: GazeTrack, ratio: float) -> GazeTrack:
    """Keep the last ``ceil(ratio * n)`` vertices of the track."""
    ratio = check_ratio(ratio)
    n = len(track)
    # round first so 0.3 * 10 does not ceil to 4
    k = max(1, math.ceil(round(ratio * n, 9)))
    return GazeTrack(track.vertices[n - k:])


def _pixel_grid(shape: GridShape):
    w, h = shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    return xs, ys


def _segment_sqdist(xs, ys, a, b):
    dx, dy = b[0] - a[0], b[1] - a[1]
    px, py = xs - a[0], ys - a[1]
    l2 = dx * dx + dy * dy
    if l2 == 0.0:
        return px * px + py * py
    t = np.clip((px * dx + py * dy) / l2, 0.0, 1.0)
    ex = px - t * dx
    ey = py - t * dy
    return ex * ex + ey * ey


def distance_map_exact(track: GazeTrack, shape: GridShape, points_only: bool = False) -> np.ndarray:
    """Euclidean distance from every pixel center to the nearest track point.

    By default the track is the polyline through its vertices; with
    ``points_only`` only the vertices themselves count.
    """
    shape = GridShape(*shape).validate()
    xs, ys = _pixel_grid(shape)
    v = track.vertices
    best = np.full(shape.dims, np.inf)
    if points_only or len(v) == 1:
        pairs = [(p, p) for p in v]
    else:
        pairs = zip(v[:-1], v[1:])
    for a, b in pairs:
        np.minimum(best, _segment_sqdist(xs, ys, a, b), out=best)
    return np.sqrt(best)


def supercover_cells(a, b) -> np.ndarray:
    """Integer pixel cells ``(x, y)`` touched by segment ``a -> b``.

    Pixel ``(i, j)`` owns the cell ``[i - 0.5, i + 0.5) x [j - 0.5, j + 0.5)``.
    The segment is split at every cell-boundary crossing and the cell of
    each piece's midpoint is marked, along with both endpoint cells.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d = b - a
    ts = [np.array([0.0, 1.0])]
    for axis in range(2):
        if d[axis] == 0.0:
            continue
        lo, hi = sorted((a[axis], b[axis]))
        bounds = np.arange(math.floor(lo - 0.5), math.ceil(hi - 0.5) + 1) + 0.5
        bounds = bounds[(bounds > lo) & (bounds < hi)]
        ts.append((bounds - a[axis]) / d[axis])
    t = np.unique(np.concatenate(ts))
    mids = np.concatenate([[0.0], (t[:-1] + t[1:]) / 2.0, [1.0]])
    pts = a[None, :] + mids[:, None] * d[None, :]
    return np.unique(np.floor(pts + 0.5).astype(np.int64), axis=0)


def rasterize_track(track: GazeTrack, shape: GridShape, pad: int = 0, points_only: bool = False) -> np.ndarray:
    """Boolean site image of the supercover of the track on a padded grid."""
    shape = GridShape(*shape).validate()
    w, h = shape.width + 2 * pad, shape.height + 2 * pad
    sites = np.zeros((h, w), dtype=bool)
    v = track.vertices
    if points_only or len(v) == 1:
        cells = np.floor(v + 0.5).astype(np.int64)
    else:
        cells = np.concatenate([supercover_cells(p, q) for p, q in zip(v[:-1], v[1:])])
    cx = np.clip(cells[:, 0] + pad, 0, w - 1)
    cy = np.clip(cells[:, 1] + pad, 0, h - 1)
    sites[cy, cx] = True
    return sites


def squared_edt(sites: np.ndarray, row_chunk: int = 32) -> np.ndarray:
    """Exact squared Euclidean distance to the nearest ``True`` site.

    First pass: per column, distance to the nearest site along y by a
    forward and a backward scan.  Second pass: per row, minimize
    ``(x - x')^2 + g(x')^2`` over all ``x'``.
    """
    h, w = sites.shape
    g = np.full((h, w), np.inf)
    run = np.full(w, np.inf)
    for y in range(h):
        run = np.where(sites[y], 0.0, run + 1.0)
        g[y] = run
    run = np.full(w, np.inf)
    for y in range(h - 1, -1, -1):
        run = np.where(sites[y], 0.0, run + 1.0)
        np.minimum(g[y], run, out=g[y])
    g2 = g * g
    xs = np.arange(w, dtype=np.float64)
    dx2 = (xs[:, None] - xs[None, :]) ** 2  # [x, x']
    out = np.empty((h, w))
    for y0 in range(0, h, row_chunk):
        block = g2[y0:y0 + row_chunk]
        out[y0:y0 + row_chunk] = (block[:, None, :] + dx2[None, :, :]).min(axis=2)
    return out


def distance_map_fast(track: GazeTrack, shape: GridShape, points_only: bool = False) -> np.ndarray:
    """Distance to the rasterized track via an exact EDT.

    Off-grid pieces of the track are kept by rasterizing onto a grid padded
    by one pixel; agreement with :func:`distance_map_exact` is within
    ``sqrt(2) / 2`` px.
    """
    shape = GridShape(*shape).validate()
    sites = rasterize_track(track, shape, pad=1, points_only=points_only)
    d2 = squared_edt(sites)[1:-1, 1:-1]
    return np.sqrt(d2)


def decay_map(distance, params: DecayParams = DEFAULT_DECAY) -> np.ndarray:
    """``exp(-D / beta)`` where it exceeds ``tau``, zero elsewhere.

    The support test is ``D < radius`` rather than ``g > tau`` so the cut-off
    does not wobble with the rounding of ``exp`` near the boundary.
    """
    d = check_map(distance, name="distance")
    if d.min() < 0:
        raise InvalidParameter("distances must be >= 0")
    return np.where(d < params.radius, np.exp(-d / params.beta), 0.0)


def distance_map(track, shape, points_only=False, fast=False):
    fn = distance_map_fast if fast else distance_map_exact
    return fn(track, shape, points_only=points_only)


def gtmg_bundle(record: GazeRecord, shape: GridShape | None = None, ratios=CANONICAL_RATIOS,
                params: DecayParams = DEFAULT_DECAY, points_only: bool = False,
                fast: bool = False) -> list[TrackAttentionMap]:
    """One track attention map per truncation ratio, in the order given."""
    ratios = [check_ratio(r) for r in ratios]
    if not ratios:
        raise InvalidParameter("at least one truncation ratio is required")
    shape = record.shape if shape is None else GridShape(*shape).validate()
    track = build_track(record)
    out = []
    for r in ratios:
        d = distance_map(truncate_track(track, r), shape, points_only=points_only, fast=fast)
        out.append(TrackAttentionMap(decay_map(d, params), r))
    return out
