"""2-D parametric frame warping and incremental motion estimation.

A warp maps output pixel coordinates to source coordinates; frames are
resampled by bilinear interpolation and pixels whose source coordinate falls
outside the image are flagged invalid. Motion parameters are refined by
damped Gauss-Newton steps on the masked photometric residual, and sequences
are pre-aligned to their middle frame on a 3-level box-filter pyramid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix

log = logging.getLogger(__name__)

MODEL_PARAMS = {"translation": 2, "affine": 6, "projective": 8}

_IDENTITY = {
    "translation": np.zeros(2),
    "affine": np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
    "projective": np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]),
}


class InvalidWarpError(ValueError):
    """Warp parameters describe a degenerate (non-invertible) mapping."""


class DegenerateMotionError(RuntimeError):
    """The normal equations are singular; no reliable parameter update exists."""


@dataclass(frozen=True)
class Warp:
    """Parametric 2-D warp. ``params`` layout:

    - translation: (tx, ty), source = (x + tx, y + ty)
    - affine: (a1..a6), source = (a1 x + a2 y + a3, a4 x + a5 y + a6)
    - projective: (h1..h8) with the homography's (3,3) entry fixed at 1
    """

    model: str
    params: np.ndarray

    def __post_init__(self):
        if self.model not in MODEL_PARAMS:
            raise ValueError(f"unknown motion model {self.model!r}")
        p = np.asarray(self.params, dtype=np.float64).ravel()
        if p.size != MODEL_PARAMS[self.model]:
            raise ValueError(
                f"{self.model} warp needs {MODEL_PARAMS[self.model]} parameters, "
                f"got {p.size}")
        if not np.isfinite(p).all():
            raise InvalidWarpError("warp parameters must be finite")
        if self.model == "affine":
            det = p[0] * p[4] - p[1] * p[3]
            if abs(det) <= 1e-8:
                raise InvalidWarpError("affine linear part is singular")
        elif self.model == "projective":
            mat = np.array([[p[0], p[1], p[2]], [p[3], p[4], p[5]],
                            [p[6], p[7], 1.0]])
            if abs(np.linalg.det(mat)) <= 1e-8:
                raise InvalidWarpError("homography is singular")
        p.flags.writeable = False
        object.__setattr__(self, "params", p)

    @staticmethod
    def identity(model: str) -> "Warp":
        return Warp(model, _IDENTITY[model].copy())

    def is_identity(self, tol: float = 0.0) -> bool:
        return bool(np.abs(self.params - _IDENTITY[self.model]).max() <= tol)

    def with_params(self, params) -> "Warp":
        return Warp(self.model, params)


@dataclass(frozen=True)
class WarpedFrame:
    pixels: np.ndarray      # (h, w), invalid pixels carry 0
    validity: np.ndarray    # (h, w) bool, 1 where the source sample was in-bounds


def _source_coords(warp: Warp, shape: tuple[int, int]):
    h, w = shape
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    p = warp.params
    if warp.model == "translation":
        return x + p[0], y + p[1]
    if warp.model == "affine":
        return p[0] * x + p[1] * y + p[2], p[3] * x + p[4] * y + p[5]
    denom = p[6] * x + p[7] * y + 1.0
    near_zero = np.abs(denom) < 1e-12
    denom = np.where(near_zero, np.inf, denom)
    xs = (p[0] * x + p[1] * y + p[2]) / denom
    ys = (p[3] * x + p[4] * y + p[5]) / denom
    return xs, ys


def _bilinear(image: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    h, w = image.shape
    valid = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)
    x = np.clip(xs, 0, w - 1)
    y = np.clip(ys, 0, h - 1)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    out = ((1 - fy) * ((1 - fx) * image[y0, x0] + fx * image[y0, x1])
           + fy * ((1 - fx) * image[y1, x0] + fx * image[y1, x1]))
    return np.where(valid, out, 0.0), valid


def warp_frame(image, warp: Warp) -> WarpedFrame:
    """Resample *image* at the warp's source coordinates."""
    img = as_matrix(image, "image")
    xs, ys = _source_coords(warp, img.shape)
    pixels, valid = _bilinear(img, xs, ys)
    return WarpedFrame(pixels=pixels, validity=valid)


def _gradients(image: np.ndarray):
    """Central differences with replicated borders."""
    pad = np.pad(image, 1, mode="edge")
    gx = 0.5 * (pad[1:-1, 2:] - pad[1:-1, :-2])
    gy = 0.5 * (pad[2:, 1:-1] - pad[:-2, 1:-1])
    return gx, gy


def warp_jacobian(image, warp: Warp) -> np.ndarray:
    """Derivative of the warped pixel values with respect to the parameters.

    Chain rule: the source-image gradient sampled at the warped coordinates
    times the coordinate map's parameter derivatives. Shape (h*w, p), with
    zero rows at invalid pixels.
    """
    img = as_matrix(image, "image")
    h, w = img.shape
    xs, ys = _source_coords(warp, img.shape)
    gx_img, gy_img = _gradients(img)
    gx, valid = _bilinear(gx_img, xs, ys)
    gy, _ = _bilinear(gy_img, xs, ys)
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    p = warp.params

    if warp.model == "translation":
        cols = [gx, gy]
    elif warp.model == "affine":
        cols = [gx * x, gx * y, gx, gy * x, gy * y, gy]
    else:
        denom = p[6] * x + p[7] * y + 1.0
        denom = np.where(np.abs(denom) < 1e-12, np.inf, denom)
        inv = 1.0 / denom
        cols = [gx * x * inv, gx * y * inv, gx * inv,
                gy * x * inv, gy * y * inv, gy * inv,
                -(gx * xs + gy * ys) * x * inv,
                -(gx * xs + gy * ys) * y * inv]
    jac = np.stack([np.where(valid, c, 0.0).ravel() for c in cols], axis=1)
    return jac


def _masked_msr(warped: WarpedFrame, target: np.ndarray, exclude: np.ndarray):
    active = warped.validity & ~exclude
    count = int(active.sum())
    if count == 0:
        return np.inf, active
    r = warped.pixels[active] - target[active]
    return float(r @ r) / count, active


def update_tau(d_j, b_j, s_j, warp: Warp, iters: int = 1,
               max_halvings: int = 5) -> Warp:
    """Refine one frame's warp by damped Gauss-Newton.

    Minimizes the squared residual between the warped frame and *b_j* over
    valid pixels not excluded by *s_j*. A step that increases the mean
    squared residual is halved up to *max_halvings* times, then iteration
    stops; the masked residual is nonincreasing over accepted steps.
    """
    img = as_matrix(d_j, "d_j")
    target = as_matrix(b_j, "b_j")
    exclude = np.asarray(s_j, dtype=bool)
    if target.shape != img.shape or exclude.shape != img.shape:
        raise ValueError("d_j, b_j and s_j must share one shape")

    current = warp
    warped = warp_frame(img, current)
    err, active = _masked_msr(warped, target, exclude)
    if not np.isfinite(err):
        raise DegenerateMotionError("no valid pixels to align on")

    for _ in range(iters):
        jac = warp_jacobian(img, current)
        a = active.ravel()
        ja = jac[a]
        ra = (warped.pixels - target)[active]
        hess = ja.T @ ja
        grad = ja.T @ ra
        if not np.isfinite(hess).all() or not np.linalg.cond(hess) <= 1e12:
            raise DegenerateMotionError(
                "normal equations are singular (textureless or empty region)")
        step = np.linalg.solve(hess, -grad)

        accepted = False
        for _ in range(max_halvings + 1):
            try:
                candidate = current.with_params(current.params + step)
            except InvalidWarpError:
                step = 0.5 * step
                continue
            warped_new = warp_frame(img, candidate)
            err_new, active_new = _masked_msr(warped_new, target, exclude)
            if err_new <= err * (1 + 1e-12):
                current, warped = candidate, warped_new
                err, active = err_new, active_new
                accepted = True
                break
            step = 0.5 * step
        if not accepted:
            break
    return current


def box_downsample(image: np.ndarray) -> np.ndarray:
    """Average 2x2 blocks (axes of odd size are trimmed, but never below 1)."""
    h, w = image.shape
    out = image
    if h >= 2:
        out = 0.5 * (out[: h // 2 * 2 : 2, :] + out[1 : h // 2 * 2 : 2, :])
    if w >= 2:
        out = 0.5 * (out[:, : w // 2 * 2 : 2] + out[:, 1 : w // 2 * 2 : 2])
    return out


def _scale_up(warp: Warp) -> Warp:
    """Map a warp from a half-resolution level to the next finer level."""
    p = warp.params.copy()
    if warp.model == "translation":
        p *= 2.0
    elif warp.model == "affine":
        p[2] *= 2.0
        p[5] *= 2.0
    else:
        p[2] *= 2.0
        p[5] *= 2.0
        p[6] *= 0.5
        p[7] *= 0.5
    return warp.with_params(p)


def prealign(frames: np.ndarray, model: str, levels: int = 3,
             iters_per_level: int = 10) -> list[Warp]:
    """Roughly align every frame to the middle one, coarse to fine.

    *frames* is an (n, h, w) stack. Frames whose estimation turns out
    degenerate fall back to the identity warp with a logged warning.
    """
    stack = np.asarray(frames, dtype=np.float64)
    if stack.ndim != 3:
        raise ValueError("frames must be a (n, h, w) stack")
    n = stack.shape[0]
    mid = n // 2
    if n == 1:
        return [Warp.identity(model)]

    pyramids = [stack]
    for _ in range(levels - 1):
        smaller = np.stack([box_downsample(f) for f in pyramids[-1]])
        if min(smaller.shape[1:]) < 4:
            break
        pyramids.append(smaller)

    warps = []
    empty = [np.zeros(level.shape[1:], dtype=bool) for level in pyramids]
    for j in range(n):
        if j == mid:
            warps.append(Warp.identity(model))
            continue
        warp = Warp.identity(model)
        try:
            for lvl in range(len(pyramids) - 1, -1, -1):
                if lvl < len(pyramids) - 1:
                    warp = _scale_up(warp)
                warp = update_tau(pyramids[lvl][j], pyramids[lvl][mid],
                                  empty[lvl], warp, iters=iters_per_level)
        except DegenerateMotionError as exc:
            log.warning("pre-alignment of frame %d degenerate (%s); "
                        "keeping identity", j, exc)
            warp = Warp.identity(model)
        warps.append(warp)
    return warps
