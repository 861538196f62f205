"""Comparison methods: a convex low-rank + sparse solver and the temporal
median filter, plus the max-F thresholding protocol used to turn residuals
into masks when ground truth is available."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frames import FrameSequence
from .linalg import as_mask, as_matrix, rank_from_sigma, svd, svt


@dataclass
class PcpResult:
    b: np.ndarray
    e: np.ndarray
    objective_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = True


def soft_threshold(x, t: float) -> np.ndarray:
    """Entrywise shrinkage toward zero by *t*."""
    a = np.asarray(x, dtype=np.float64)
    return np.sign(a) * np.maximum(np.abs(a) - t, 0.0)


def spcp(d, alpha: float, beta: float, tol: float = 1e-6,
         max_iter: int = 500, b0=None, e0=None) -> PcpResult:
    """Alternating proximal minimization of
    ``0.5 * ||D - B - E||_F^2 + alpha * ||B||_* + beta * ||E||_1``.

    Each half-step solves its subproblem exactly (singular-value shrinkage
    for B, entrywise shrinkage for E), so the objective is nonincreasing.
    """
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    if tol <= 0:
        raise ValueError("tol must be positive")
    dm = as_matrix(d, "d")
    b = np.zeros_like(dm) if b0 is None else as_matrix(b0, "b0")
    e = np.zeros_like(dm) if e0 is None else as_matrix(e0, "e0")

    trace: list[float] = []
    prev = None
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        u, s, v = svd(dm - e)
        shrunk = np.maximum(s - alpha, 0.0)
        b = (u * shrunk) @ v.T
        e = soft_threshold(dm - b, beta)
        resid = dm - b - e
        f = (0.5 * float((resid * resid).sum()) + alpha * shrunk.sum()
             + beta * float(np.abs(e).sum()))
        trace.append(f)
        if prev is not None and abs(f - prev) / max(1.0, prev) < tol:
            converged = True
            break
        prev = f
    return PcpResult(b=b, e=e, objective_trace=trace, iterations=iterations,
                     converged=converged)


def spcp_with_rank_cap(d, beta: float, alpha_init: float | None = None,
                       k_cap: int | None = None,
                       eta1: float = 1.0 / np.sqrt(2.0), tol: float = 1e-6,
                       max_iter: int = 500) -> tuple[PcpResult, float]:
    """Continuation over alpha mirroring the background step: start at the
    second singular value of D and shrink alpha until rank(B) exceeds the
    cap, keeping the last solution inside it."""
    dm = as_matrix(d, "d")
    sig = svd(dm).sigma
    if alpha_init is None:
        alpha_init = float(sig[1]) if len(sig) > 1 else float(sig[0])
        alpha_init = max(alpha_init, 1e-12)
    if k_cap is None:
        k_cap = int(np.ceil(np.sqrt(dm.shape[1])))

    def rank_of(res: PcpResult) -> int:
        return rank_from_sigma(svd(res.b).sigma)

    alpha = alpha_init
    result = spcp(dm, alpha, beta, tol=tol, max_iter=max_iter)
    if k_cap >= min(dm.shape) or rank_of(result) > k_cap:
        return result, alpha
    accepted, accepted_alpha = result, alpha
    floor = 1e-8 * alpha_init
    while alpha * eta1 >= floor:
        alpha = alpha * eta1
        result = spcp(dm, alpha, beta, tol=tol, max_iter=max_iter,
                      b0=accepted.b, e0=accepted.e)
        if rank_of(result) > k_cap:
            break
        accepted, accepted_alpha = result, alpha
    return accepted, accepted_alpha


@dataclass(frozen=True)
class ThresholdSweep:
    thresholds: np.ndarray    # ascending candidate thresholds
    f_measures: np.ndarray    # F at each threshold
    best_threshold: float
    best_f: float
    best_mask: np.ndarray     # residual >= best_threshold


def max_f_threshold(residual_abs, truth) -> ThresholdSweep:
    """Sweep every distinct residual value as a threshold (mask = residual
    >= t) and keep the one maximizing the F-measure against *truth*."""
    r = as_matrix(residual_abs, "residual_abs")
    t = as_mask(truth, "truth")
    if t.shape != r.shape:
        raise ValueError("shape mismatch")
    positives = int(t.sum())
    if positives == 0:
        raise ValueError("truth has no positive entry; F-measure undefined")

    flat = r.ravel()
    labels = t.ravel()
    order = np.argsort(-flat, kind="stable")
    sorted_r = flat[order]
    cum_tp = np.cumsum(labels[order])
    # cut only at distinct-value boundaries so ties flip together
    boundary = np.flatnonzero(
        np.concatenate([sorted_r[:-1] > sorted_r[1:], [True]]))
    k = boundary + 1                      # number of included entries
    tp = cum_tp[boundary]
    f = 2.0 * tp / (k + positives)        # == 2TP / (2TP + FP + FN)

    best = int(np.argmax(f))              # ties: fewer positives wins
    best_threshold = float(sorted_r[boundary[best]])
    return ThresholdSweep(
        thresholds=sorted_r[boundary][::-1].copy(),
        f_measures=f[::-1].copy(),
        best_threshold=best_threshold,
        best_f=float(f[best]),
        best_mask=r >= best_threshold)


def median_background(frames) -> np.ndarray:
    """Per-pixel temporal median: (h, w) for a FrameSequence, or a length-m
    vector for an (m, n) matrix of vectorized frames."""
    if isinstance(frames, FrameSequence):
        return np.median(frames.frames, axis=0)
    d = as_matrix(frames, "frames")
    return np.median(d, axis=1)


def median_masks(d, truth=None, threshold: float | None = None
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Median-filter baseline on an (m, n) matrix.

    Returns (masks, background_matrix). When *truth* is given the threshold
    on |D - background| maximizes F; otherwise *threshold* must be supplied.
    """
    dm = as_matrix(d, "d")
    bg = np.median(dm, axis=1)
    b = np.tile(bg[:, None], (1, dm.shape[1]))
    residual = np.abs(dm - b)
    if truth is not None:
        sweep = max_f_threshold(residual, truth)
        return sweep.best_mask, b
    if threshold is None:
        raise ValueError("need ground truth or an explicit threshold")
    return residual >= threshold, b
