"""Two-label dense CRF mean-field refinement of a visual attention map.

The pairwise kernel is the usual appearance (bilateral) plus smoothness
Gaussian pair with Potts compatibility, and all pixels are updated in
parallel at every iteration.  Two inference paths are provided:

* :func:`meanfield_bruteforce` evaluates every kernel entry explicitly, row by
  row.  It is slow and exists as the reference.
* :func:`meanfield_refine` builds the appearance kernel once as a dense
  matrix and applies the smoothness kernel separably.  The pipeline uses it.

:func:`refine_vam` adds the downsampling contract on top: inputs larger than
``max_side`` are refined at reduced resolution and upsampled back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, InvalidShape, NumericalError
from .grid import GridShape, bilinear_resize, check_map, resize_channels

MAX_REFINE_SIDE = 64
NORMALIZATIONS = ("row", "symmetric", "none")


@dataclass(frozen=True)
class CrfParams:
    w_appearance: float = 10.0
    theta_alpha: float = 80.0  # px
    theta_beta: float = 13.0  # intensity units, see intensity_scale
    w_smooth: float = 3.0
    theta_gamma: float = 3.0  # px
    iterations: int = 5
    epsilon: float = 1e-3
    # [0, 1] intensities are multiplied by this before entering the bilateral term
    intensity_scale: float = 255.0
    # per-kernel normalization of messages: "row" divides by the kernel's row
    # sum, "symmetric" uses D^-1/2 K D^-1/2, "none" keeps raw weighted sums
    normalization: str = "row"

    def __post_init__(self):
        if self.w_appearance < 0 or self.w_smooth < 0:
            raise InvalidParameter("CRF kernel weights must be >= 0")
        for name in ("theta_alpha", "theta_beta", "theta_gamma", "intensity_scale"):
            if not getattr(self, name) > 0:
                raise InvalidParameter(f"{name} must be > 0")
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise InvalidParameter(f"iterations must be a positive integer, got {self.iterations}")
        if self.normalization not in NORMALIZATIONS:
            raise InvalidParameter(f"unknown kernel normalization {self.normalization!r}")
        if not 0.0 < self.epsilon < 0.5:
            raise InvalidParameter(f"epsilon must lie in (0, 0.5), got {self.epsilon}")

    def scaled(self, factor: float) -> "CrfParams":
        """Copy with spatial bandwidths multiplied by ``factor``."""
        return CrfParams(
            w_appearance=self.w_appearance,
            theta_alpha=self.theta_alpha * factor,
            theta_beta=self.theta_beta,
            w_smooth=self.w_smooth,
            theta_gamma=self.theta_gamma * factor,
            iterations=self.iterations,
            epsilon=self.epsilon,
            intensity_scale=self.intensity_scale,
            normalization=self.normalization,
        )


def as_intensity_image(image) -> np.ndarray:
    """Validate an intensity image and return it as ``(H, W, C)`` float64."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[..., None]
    if arr.ndim != 3 or arr.shape[-1] not in (1, 3):
        raise InvalidShape(f"intensity image must be (H, W), (H, W, 1) or (H, W, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise InvalidParameter("intensity values must lie in [0, 1]")
    return arr


def unary_from_vam(vam, epsilon: float = 1e-3) -> np.ndarray:
    """Negative log-probabilities ``(bg, fg)`` per pixel, shape ``(H, W, 2)``."""
    p_fg = np.clip(check_map(vam, value_range=(0.0, 1.0), name="vam"), epsilon, 1.0 - epsilon)
    return np.stack([-np.log1p(-p_fg), -np.log(p_fg)], axis=-1)


def softmax_neg(energy: np.ndarray) -> np.ndarray:
    """Softmax of ``-energy`` over the last axis."""
    z = -energy
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_inputs(unary, image):
    unary = np.asarray(unary, dtype=np.float64)
    if unary.ndim != 3 or unary.shape[-1] != 2:
        raise InvalidShape(f"unary must have shape (H, W, 2), got {unary.shape}")
    img = as_intensity_image(image)
    if img.shape[:2] != unary.shape[:2]:
        raise InvalidShape(f"unary {unary.shape[:2]} and image {img.shape[:2]} disagree")
    return unary, img


def _update(unary, message, it):
    # Potts: each label is penalized by the message carried by the other label
    q = softmax_neg(unary + message[..., ::-1])
    if not np.all(np.isfinite(q)):
        raise NumericalError(f"non-finite marginals at iteration {it}", iteration=it)
    return q


def _degree_scales(degree, normalization):
    """Left and right per-pixel factors that normalize a kernel with these row sums."""
    if normalization == "none":
        return 1.0, 1.0
    safe = np.where(degree > 0, degree, 1.0)
    if normalization == "row":
        return np.where(degree > 0, 1.0 / safe, 0.0), 1.0
    s = np.where(degree > 0, 1.0 / np.sqrt(safe), 0.0)
    return s, s


def meanfield_refine(unary, image, params: CrfParams = CrfParams()) -> np.ndarray:
    """Foreground marginal after ``params.iterations`` parallel mean-field steps.

    The appearance kernel is assembled once as a dense ``N x N`` matrix with
    the intensity distances expanded into a Gram product; the smoothness
    kernel is applied separably along each axis.  Memory is ``O(N^2)``, so
    callers should keep inputs at or below ``MAX_REFINE_SIDE`` per side.
    """
    unary, img = _check_inputs(unary, image)
    h, w = unary.shape[:2]
    q = softmax_neg(unary)
    if params.w_appearance == 0 and params.w_smooth == 0:
        return q[..., 1].copy()

    ys = np.arange(h, dtype=np.float64)
    xs = np.arange(w, dtype=np.float64)

    def axis_gauss(c, theta):
        return np.exp(-((c[:, None] - c[None, :]) ** 2) / (2.0 * theta ** 2))

    kernel = None
    if params.w_appearance > 0:
        feat = img.reshape(h * w, -1) * params.intensity_scale
        sq = (feat * feat).sum(axis=1)
        # log of the bilateral kernel: -(|f_i - f_j|^2) / 2b^2 - (|p_i - p_j|^2) / 2a^2
        kernel = feat @ feat.T
        kernel *= 2.0
        kernel -= sq[:, None]
        kernel -= sq[None, :]
        np.minimum(kernel, 0.0, out=kernel)
        kernel /= 2.0 * params.theta_beta ** 2
        ay = -((ys[:, None] - ys[None, :]) ** 2) / (2.0 * params.theta_alpha ** 2)
        ax = -((xs[:, None] - xs[None, :]) ** 2) / (2.0 * params.theta_alpha ** 2)
        k4 = kernel.reshape(h, w, h, w)
        k4 += ay[:, None, :, None]
        k4 += ax[None, :, None, :]
        np.exp(kernel, out=kernel)
        np.fill_diagonal(kernel, 0.0)
        left, right = _degree_scales(kernel.sum(axis=1), params.normalization)
        if params.normalization != "none":
            kernel *= left[:, None]
        if params.normalization == "symmetric":
            kernel *= right[None, :]
        kernel *= params.w_appearance
    gy = axis_gauss(ys, params.theta_gamma)
    gx = axis_gauss(xs, params.theta_gamma)
    # self-pair of the smoothness kernel is exactly 1
    sm_left, sm_right = _degree_scales(
        gy.sum(axis=1)[:, None] * gx.sum(axis=1)[None, :] - 1.0, params.normalization)

    # overflow is caught by the finiteness check in _update
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(1, params.iterations + 1):
            message = np.zeros_like(q)
            if kernel is not None:
                message += (kernel @ q.reshape(h * w, 2)).reshape(h, w, 2)
            if params.w_smooth > 0:
                for lab in range(2):
                    ql = q[..., lab] * sm_right
                    message[..., lab] += params.w_smooth * sm_left * (gy @ ql @ gx.T - ql)
            q = _update(unary, message, it)
    return q[..., 1].copy()


def meanfield_bruteforce(unary, image, params: CrfParams = CrfParams()) -> np.ndarray:
    """Reference mean-field: every pairwise kernel value computed explicitly."""
    unary, img = _check_inputs(unary, image)
    h, w = unary.shape[:2]
    n = h * w
    yy, xx = np.divmod(np.arange(n), w)
    pos = np.stack([xx, yy], axis=1).astype(np.float64)
    feat = img.reshape(n, -1) * params.intensity_scale

    def kernel_rows(i):
        d2 = ((pos - pos[i]) ** 2).sum(axis=1)
        f2 = ((feat - feat[i]) ** 2).sum(axis=1)
        app = np.exp(-d2 / (2 * params.theta_alpha ** 2) - f2 / (2 * params.theta_beta ** 2))
        sm = np.exp(-d2 / (2 * params.theta_gamma ** 2))
        app[i] = 0.0
        sm[i] = 0.0
        return app, sm

    deg_app = np.ones(n)
    deg_sm = np.ones(n)
    if params.normalization != "none":
        for i in range(n):
            app, sm = kernel_rows(i)
            deg_app[i], deg_sm[i] = app.sum(), sm.sum()

    u = unary.reshape(n, 2)
    q = softmax_neg(u)
    for it in range(1, params.iterations + 1):
        message = np.zeros((n, 2))
        for i in range(n):
            app, sm = kernel_rows(i)
            if params.normalization == "row":
                app = app / deg_app[i] if deg_app[i] > 0 else app
                sm = sm / deg_sm[i] if deg_sm[i] > 0 else sm
            elif params.normalization == "symmetric":
                app = np.divide(app, np.sqrt(deg_app[i] * deg_app), out=np.zeros(n), where=app > 0)
                sm = np.divide(sm, np.sqrt(deg_sm[i] * deg_sm), out=np.zeros(n), where=sm > 0)
            k = params.w_appearance * app + params.w_smooth * sm
            message[i] = k @ q
        q = _update(u, message, it)
    return q[:, 1].reshape(h, w)


def refine_shape(shape: GridShape, max_side: int = MAX_REFINE_SIDE) -> GridShape:
    """Working resolution for refinement: longest side capped at ``max_side``."""
    longest = max(shape.width, shape.height)
    if longest <= max_side:
        return shape
    f = max_side / longest
    return GridShape(max(1, math.floor(shape.width * f + 0.5)), max(1, math.floor(shape.height * f + 0.5)))


def refine_vam(vam, image, params: CrfParams = CrfParams(), max_side: int | None = MAX_REFINE_SIDE) -> np.ndarray:
    """Refine a [0, 1] VAM against ``image``; returns the foreground marginal.

    When the grid is larger than ``max_side`` the VAM and image are
    bilinearly downsampled, spatial bandwidths are scaled by the same
    factor, and the marginal is upsampled back.  ``max_side=None`` forces
    full-resolution inference.
    """
    vam = check_map(vam, value_range=(0.0, 1.0), name="vam")
    img = as_intensity_image(image)
    shape = GridShape.of(vam)
    if img.shape[:2] != vam.shape:
        raise InvalidShape(f"vam {vam.shape} and image {img.shape[:2]} disagree")
    work = shape if max_side is None else refine_shape(shape, max_side)
    if work == shape:
        return meanfield_refine(unary_from_vam(vam, params.epsilon), img, params)
    factor = max(work.width, work.height) / max(shape.width, shape.height)
    small_vam = bilinear_resize(vam, work)
    small_img = resize_channels(img, work)
    q = meanfield_refine(unary_from_vam(small_vam, params.epsilon), small_img, params.scaled(factor))
    return np.clip(bilinear_resize(q, shape), 0.0, 1.0)
