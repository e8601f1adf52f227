"""Loss terms, TA fusion arithmetic and the learning-rate schedule.

Predictions are two-channel logits of shape ``(H, W, 2)`` with channel 0
background and channel 1 foreground.  Every loss returns ``(loss, grad)``
where ``grad`` is the analytic gradient with respect to the logits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, InvalidShape
from .grid import GridShape, bilinear_resize, check_map, check_mask

LOG_FLOOR = math.log(1e-7)
DICE_SMOOTH = 1.0
SUPERVISION_LEVELS = (2, 4, 6)


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 0.5
    lambda2: float = 0.5

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise InvalidParameter("loss weights must be >= 0")


@dataclass(frozen=True)
class LrSchedule:
    l0: float = 0.01
    max_epoch: int = 100
    exponent: float = 0.9

    def __post_init__(self):
        if not self.l0 > 0:
            raise InvalidParameter(f"l0 must be > 0, got {self.l0}")
        if int(self.max_epoch) != self.max_epoch or self.max_epoch < 1:
            raise InvalidParameter(f"max_epoch must be a positive integer, got {self.max_epoch}")


def check_logits(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 3 or z.shape[-1] != 2 or z.shape[0] == 0 or z.shape[1] == 0:
        raise InvalidShape(f"logits must have shape (H, W, 2), got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise InvalidParameter("logits must be finite")
    return z


def log_softmax2(logits) -> np.ndarray:
    """Per-pixel log-probabilities ``z_k - logsumexp(z)``."""
    z = check_logits(logits)
    m = z.max(axis=-1, keepdims=True)
    gap = np.abs(z[..., :1] - z[..., 1:])
    return (z - m) - np.log1p(np.exp(-gap))


def _weighted_nll(logits, weights):
    """``-sum_k w_k * max(log p_k, LOG_FLOOR)`` per pixel, and its gradient.

    Clamped log-probabilities contribute no gradient.
    """
    logp = log_softmax2(logits)
    p = np.exp(logp)
    live = logp > LOG_FLOOR
    w = np.where(live, weights, 0.0)
    terms = -(weights * np.maximum(logp, LOG_FLOOR)).sum(axis=-1)
    # d log p_k / d z_j = [k == j] - p_j
    grad = -(w - w.sum(axis=-1, keepdims=True) * p)
    return terms, grad


def gtmg_loss(logits, track_map, reduction: str = "mean"):
    """Track-map supervision of a two-channel prediction.

    Pixels with positive attention ``G`` are pushed to foreground with
    weight ``1 + G``; pixels with ``G == 0`` are pushed to background with
    weight 1.  ``track_map`` is bilinearly resized to the prediction grid
    first.  ``reduction`` is ``"mean"`` (scalar loss) or ``"none"``
    (per-pixel terms).
    """
    z = check_logits(logits)
    shape = GridShape(z.shape[1], z.shape[0])
    g = check_map(getattr(track_map, "values", track_map), value_range=(0.0, 1.0), name="track map")
    g = bilinear_resize(g, shape)
    if g.shape != z.shape[:2]:
        raise InvalidShape(f"resized track map {g.shape} does not match prediction {z.shape[:2]}")
    weights = np.stack([(g == 0).astype(np.float64), np.where(g > 0, 1.0 + g, 0.0)], axis=-1)
    terms, grad = _weighted_nll(z, weights)
    return _reduce(terms, grad, reduction)


def _reduce(terms, grad, reduction):
    if reduction == "none":
        return terms, grad
    if reduction == "mean":
        n = terms.size
        return float(terms.sum() / n), grad / n
    raise InvalidParameter(f"unknown reduction {reduction!r}")


def soft_dice_loss(logits, hard, smooth: float = DICE_SMOOTH):
    """``1 - (2 sum(P y) + s) / (sum(P) + sum(y) + s)`` on the foreground channel."""
    z = check_logits(logits)
    y = check_mask(hard, "hard").astype(np.float64)
    if y.shape != z.shape[:2]:
        raise InvalidShape(f"mask {y.shape} does not match prediction {z.shape[:2]}")
    p = np.exp(log_softmax2(z))[..., 1]
    num = 2.0 * (p * y).sum() + smooth
    den = p.sum() + y.sum() + smooth
    dp = -(2.0 * y * den - num) / (den * den)
    dz_fg = dp * p * (1.0 - p)
    return float(1.0 - num / den), np.stack([-dz_fg, dz_fg], axis=-1)


def cross_entropy_loss(logits, hard):
    z = check_logits(logits)
    y = check_mask(hard, "hard")
    if y.shape != z.shape[:2]:
        raise InvalidShape(f"mask {y.shape} does not match prediction {z.shape[:2]}")
    y = y.astype(np.float64)
    terms, grad = _weighted_nll(z, np.stack([1.0 - y, y], axis=-1))
    return _reduce(terms, grad, "mean")


def dice_ce_loss(logits, hard):
    """Cross-entropy plus soft Dice against a hard mask."""
    ce, g_ce = cross_entropy_loss(logits, hard)
    dice, g_dice = soft_dice_loss(logits, hard)
    return ce + dice, g_ce + g_dice


def total_loss(l100_h6: float, l50_h2: float, l75_h4: float, l_vam: float,
               weights: LossWeights = LossWeights()) -> float:
    return (l100_h6 + weights.lambda1 * l50_h2 + weights.lambda1 * l75_h4
            + weights.lambda2 * l_vam)


def ta_fuse(features, p_fg) -> np.ndarray:
    """Add a foreground map onto every channel of ``(C, H, W)`` features."""
    f = np.asarray(features, dtype=np.float64)
    p = np.asarray(p_fg, dtype=np.float64)
    if f.ndim != 3 or p.shape != f.shape[1:]:
        raise InvalidShape(f"features {f.shape} and attention {p.shape} are incompatible")
    return f + p[None, :, :]


def ta_fuse_vjp(grad_out, p_fg):
    """Backward pass of :func:`ta_fuse`: ``(d/d features, d/d p_fg)``.

    The attention input sits behind a stop-gradient, so its gradient is
    identically zero.
    """
    g = np.asarray(grad_out, dtype=np.float64)
    p = np.asarray(p_fg, dtype=np.float64)
    if g.ndim != 3 or p.shape != g.shape[1:]:
        raise InvalidShape(f"gradient {g.shape} and attention {p.shape} are incompatible")
    return g.copy(), np.zeros_like(p)


def poly_lr(t: float, sched: LrSchedule = LrSchedule()) -> float:
    """Polynomial decay ``l0 * (1 - t / T) ** exponent``."""
    if t < 0 or t > sched.max_epoch:
        raise InvalidParameter(f"epoch {t} outside [0, {sched.max_epoch}]")
    return sched.l0 * (1.0 - t / sched.max_epoch) ** sched.exponent
