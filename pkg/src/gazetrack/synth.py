"""Seeded synthetic scenes (one elliptical lesion) and lesion-biased gaze."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, InvalidShape
from .grid import FixationPoint, GazeRecord, GridShape

MIN_SIDE = 16
LESION_BIAS = 0.85
DILATION = 1.5


@dataclass(frozen=True)
class Ellipse:
    cx: float
    cy: float
    a: float  # semi-axis along the rotated x direction
    b: float
    angle: float  # radians

    def contains(self, x, y, scale: float = 1.0):
        """Boolean test of points against the ellipse with semi-axes times ``scale``."""
        c, s = math.cos(self.angle), math.sin(self.angle)
        dx = np.asarray(x, dtype=np.float64) - self.cx
        dy = np.asarray(y, dtype=np.float64) - self.cy
        u = (c * dx + s * dy) / (self.a * scale)
        v = (-s * dx + c * dy) / (self.b * scale)
        return u * u + v * v <= 1.0

    def sample_inside(self, rng, n: int = 1) -> np.ndarray:
        r = np.sqrt(rng.random(n))
        t = rng.uniform(0.0, 2 * math.pi, n)
        u, v = r * np.cos(t) * self.a, r * np.sin(t) * self.b
        c, s = math.cos(self.angle), math.sin(self.angle)
        return np.stack([self.cx + c * u - s * v, self.cy + s * u + c * v], axis=1)


@dataclass(frozen=True, eq=False)
class SynthScene:
    shape: GridShape
    lesion: Ellipse
    gt_mask: np.ndarray  # bool (H, W)
    intensity: np.ndarray  # float64 (H, W) in [0, 1]
    seed: int

    @property
    def image_id(self) -> str:
        return f"synth_{self.seed:06d}"


def synth_scene(shape=GridShape(224, 224), seed: int = 0) -> SynthScene:
    shape = GridShape(*shape).validate()
    if shape.width < MIN_SIDE or shape.height < MIN_SIDE:
        raise InvalidShape(f"synthetic scenes need at least {MIN_SIDE}x{MIN_SIDE}, got {shape.width}x{shape.height}")
    rng = np.random.default_rng([seed, 0])
    w, h = shape
    frac = rng.uniform(0.08, 0.22)
    aspect = rng.uniform(0.55, 1.0)
    area = frac * w * h
    b = math.sqrt(area * aspect / math.pi)
    a = b / aspect
    # the lesion has to fit, so cap the long axis at 45% of the short side
    cap = 0.45 * min(w, h)
    if a > cap:
        a, b = cap, area / (math.pi * cap)
    angle = rng.uniform(0.0, math.pi)
    c, s = math.cos(angle), math.sin(angle)
    ext_x = math.hypot(a * c, b * s)
    ext_y = math.hypot(a * s, b * c)
    cx = rng.uniform(ext_x, w - 1 - ext_x)
    cy = rng.uniform(ext_y, h - 1 - ext_y)
    lesion = Ellipse(cx, cy, a, b, angle)

    ys, xs = np.mgrid[0:h, 0:w]
    gt = lesion.contains(xs, ys)
    shading = 0.08 * np.sin(xs / w * math.pi) * np.cos(ys / h * math.pi)
    base = np.where(gt, 0.72, 0.35) + shading
    intensity = np.clip(base + rng.normal(0.0, 0.04, size=(h, w)), 0.0, 1.0)
    return SynthScene(shape, lesion, gt, intensity, int(seed))


def synth_gaze(scene: SynthScene, n_fix: int = 20, seed: int = 0, image_id: str | None = None) -> GazeRecord:
    """Random walk of fixations pulled toward the lesion.

    Each step moves part of the way toward a target drawn inside the lesion
    (or, with probability ``1 - LESION_BIAS``, anywhere in the image) plus
    isotropic jitter.  Durations are log-normal around 250 ms.
    """
    if int(n_fix) != n_fix or n_fix < 1:
        raise InvalidParameter(f"n_fix must be a positive integer, got {n_fix}")
    rng = np.random.default_rng([seed, 1, scene.seed])
    w, h = scene.shape
    jitter = 0.08 * min(scene.lesion.a, scene.lesion.b)
    hi_x, hi_y = np.nextafter(w, 0.0), np.nextafter(h, 0.0)

    pos = scene.lesion.sample_inside(rng)[0]
    points = []
    for k in range(n_fix):
        if k > 0:
            if rng.random() < LESION_BIAS:
                target = scene.lesion.sample_inside(rng)[0]
            else:
                target = rng.uniform([0.0, 0.0], [w, h])
            pos = pos + 0.7 * (target - pos) + rng.normal(0.0, jitter, 2)
        pos = np.array([min(max(pos[0], 0.0), hi_x), min(max(pos[1], 0.0), hi_y)])
        points.append(pos)

    durations = np.exp(rng.normal(math.log(250.0), 0.45, n_fix))
    gaps = rng.uniform(20.0, 60.0, n_fix)
    starts = np.concatenate([[0.0], np.cumsum(durations[:-1] + gaps[:-1])])
    # timestamps are whole ms, like most tracker exports
    durations = np.maximum(np.round(durations), 1.0)
    starts = np.round(starts)
    for i in range(1, n_fix):
        starts[i] = max(starts[i], starts[i - 1] + 1.0)
    fixes = tuple(
        FixationPoint(float(p[0]), float(p[1]), float(d), float(t))
        for p, d, t in zip(points, durations, starts)
    )
    return GazeRecord(image_id or scene.image_id, scene.shape, fixes)
