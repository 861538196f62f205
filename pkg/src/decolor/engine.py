"""Joint estimation of background, outlier support and camera motion.

Alternates three steps until the energy settles:

1. motion step: per-frame damped Gauss-Newton refinement of the warp,
   fitting warped frames to the current background on non-outlier pixels;
2. background step: nuclear-norm regularized completion of the warped data
   with outlier and invalid entries hidden, under a rank cap enforced by
   continuation in the shrinkage weight;
3. support step: exact per-frame graph-cut labeling of outliers with a
   sparsity penalty beta and a contiguity penalty gamma.

beta decays geometrically toward an adaptive floor tied to the estimated
noise level; gamma is a fixed multiple of beta. The shrinkage weight alpha
starts at the second singular value of the warped data and only ever
decreases, so the traced energy is nonincreasing whenever the penalty
coefficients hold still.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import motion as motion_mod
from .completion import IllPosedProblemError, soft_impute_with_rank_cap
from .frames import FrameSequence
from .graphcut import batch_support
from .linalg import as_mask, as_matrix, norm, svd

log = logging.getLogger(__name__)

MOTION_MODELS = ("none", "translation", "affine", "projective")


class SigmaEstimationError(RuntimeError):
    """Too few eligible residuals to estimate the noise level."""


@dataclass(frozen=True)
class DecolorConfig:
    """Tunables for one run. ``k_cap=None`` means ceil(sqrt(n_frames))."""

    k_cap: int | None = None
    gamma_factor: float = 1.0        # gamma = gamma_factor * beta
    eta1: float = 1.0 / np.sqrt(2.0)  # alpha continuation factor
    eta2: float = 0.5                # beta decay factor
    beta_floor_mult: float = 4.5     # beta floor = mult * sigma_hat^2
    tol: float = 1e-5
    max_outer_iter: int = 50
    motion: str = "none"
    alpha_floor: float | None = None
    beta_floor: float | None = None
    inner_max_iter: int = 100
    tau_iters: int = 1
    threads: int | None = None       # None: honor DECOLOR_THREADS, default 1

    def __post_init__(self):
        if not 0 < self.eta1 < 1:
            raise ValueError("eta1 must lie in (0, 1)")
        if not 0 < self.eta2 < 1:
            raise ValueError("eta2 must lie in (0, 1)")
        if self.k_cap is not None and self.k_cap < 1:
            raise ValueError("k_cap must be at least 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.motion not in MOTION_MODELS:
            raise ValueError(f"motion must be one of {MOTION_MODELS}")

    def resolved_threads(self) -> int:
        if self.threads is not None:
            return max(1, self.threads)
        env = os.environ.get("DECOLOR_THREADS", "")
        try:
            return max(1, int(env)) if env else 1
        except ValueError:
            return 1


@dataclass
class RunReport:
    b_hat: np.ndarray                 # (m, n) background estimate
    s_hat: np.ndarray                 # (m, n) bool support estimate
    tau_hat: list | None              # per-frame warps, None when motion="none"
    valid: np.ndarray                 # (m, n) bool, 0 on warped-in border pixels
    frame_shape: tuple[int, int]
    energy_trace: list[float] = field(default_factory=list)
    alpha_trace: list[float] = field(default_factory=list)
    beta_trace: list[float] = field(default_factory=list)
    sigma_trace: list[float] = field(default_factory=list)
    rank_trace: list[int] = field(default_factory=list)
    outer_iterations: int = 0
    converged: bool = False
    notes: list[str] = field(default_factory=list)
    error: str | None = None
    config: DecolorConfig | None = None


# MAD of a Gaussian sample is 0.6745 standard deviations.
_MAD_TO_SIGMA = 1.0 / 0.6745


def estimate_sigma(d_warped, b_hat, s_hat, missing=None) -> float:
    """Noise-level estimate: standard deviation of residuals over background
    (s_hat = 0) entries, skipping invalid (missing) ones.

    Uses the median-absolute-deviation scale rather than the raw sample
    standard deviation: early iterations evaluate this before the support has
    caught the outliers, and a contaminated estimate would push the adaptive
    threshold above every residual and deadlock the detection. For Gaussian
    residuals both estimators agree. Needs at least 10 eligible entries.
    """
    d = as_matrix(d_warped, "d_warped")
    b = as_matrix(b_hat, "b_hat")
    s = as_mask(s_hat, "s_hat")
    if b.shape != d.shape or s.shape != d.shape:
        raise ValueError("d_warped, b_hat and s_hat must share one shape")
    eligible = ~s
    if missing is not None:
        miss = as_mask(missing, "missing")
        if miss.shape != d.shape:
            raise ValueError("missing shape mismatch")
        eligible &= ~miss
    count = int(eligible.sum())
    if count < 10:
        raise SigmaEstimationError(
            f"only {count} eligible residuals; need at least 10")
    resid = d[eligible] - b[eligible]
    return float(np.median(np.abs(resid - np.median(resid))) * _MAD_TO_SIGMA)


def global_energy(d_warped, b_hat, s_hat, alpha: float, beta: float,
                  gamma: float, missing=None,
                  frame_shape: tuple[int, int] | None = None) -> float:
    """Total objective: masked data fit + alpha * nuclear + beta * |S| +
    gamma * (4-neighbor disagreements, per frame)."""
    d = as_matrix(d_warped, "d_warped")
    b = as_matrix(b_hat, "b_hat")
    s = as_mask(s_hat, "s_hat")
    if b.shape != d.shape or s.shape != d.shape:
        raise ValueError("shape mismatch")
    m, n = d.shape
    h, w = (m, 1) if frame_shape is None else frame_shape
    if h * w != m:
        raise ValueError("frame_shape does not match pixel count")
    fit_mask = ~s
    if missing is not None:
        miss = as_mask(missing, "missing")
        fit_mask &= ~miss
    resid = (d - b)[fit_mask]
    data = 0.5 * float(resid @ resid)

    stack = s.T.reshape(n, h, w)
    cuts = (np.count_nonzero(stack[:, :, 1:] != stack[:, :, :-1])
            + np.count_nonzero(stack[:, 1:, :] != stack[:, :-1, :]))
    return data + alpha * norm(b, "nuclear") + beta * float(s.sum()) + gamma * cuts


def _warp_all(frames: np.ndarray, warps, threads: int):
    """Warp every frame; returns the (m, n) matrix view and validity mask."""
    def one(args):
        img, warp = args
        wf = motion_mod.warp_frame(img, warp)
        return wf.pixels, wf.validity

    items = list(zip(frames, warps))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, items))
    else:
        results = [one(it) for it in items]
    n = len(results)
    pixels = np.stack([r[0] for r in results]).reshape(n, -1).T
    valid = np.stack([r[1] for r in results]).reshape(n, -1).T
    return pixels, valid


def _as_sequence(data) -> FrameSequence:
    if isinstance(data, FrameSequence):
        return data
    return FrameSequence.from_matrix(as_matrix(data, "data"))


def run(frames, config: DecolorConfig = DecolorConfig()) -> RunReport:
    """Segment *frames* (a :class:`FrameSequence`, or an (m, n) matrix whose
    columns are single-pixel-wide frames) into background and foreground."""
    seq = _as_sequence(frames)
    n = seq.n_frames
    h, w = seq.frame_shape
    m = h * w
    if n < 2 and config.motion != "none":
        raise ValueError("motion compensation needs at least 2 frames")
    threads = config.resolved_threads()
    k_cap = config.k_cap if config.k_cap is not None else int(np.ceil(np.sqrt(n)))

    notes: list[str] = []
    if config.motion == "none":
        taus = None
        warped = seq.to_matrix()
        valid = np.ones((m, n), dtype=bool)
    else:
        taus = motion_mod.prealign(seq.frames, config.motion)
        warped, valid = _warp_all(seq.frames, taus, threads)

    s_hat = np.zeros((m, n), dtype=bool)
    b_hat = warped.copy()
    sigma_all = svd(warped).sigma
    alpha = float(sigma_all[1]) if len(sigma_all) > 1 else float(sigma_all[0])
    if alpha <= 0:
        alpha = max(float(sigma_all[0]), 1e-12)
    # Anchor the continuation floor to the initial weight so noise-free data
    # (whose rank never exceeds the cap) cannot drive alpha to zero.
    alpha_floor = (config.alpha_floor if config.alpha_floor is not None
                   else 1e-8 * alpha)
    # Start with every pixel tolerated (threshold at the full intensity
    # range); the decay declares progressively weaker outliers.
    intensity_range = float(warped[valid].max() - warped[valid].min()) if valid.any() else 0.0
    beta = 0.5 * intensity_range ** 2
    if config.beta_floor is not None:
        beta = max(beta, config.beta_floor)

    report = RunReport(b_hat=b_hat, s_hat=s_hat, tau_hat=taus, valid=valid,
                       frame_shape=(h, w), config=config)

    prev_energy = None
    prev_alpha = None
    prev_beta = None
    for outer in range(1, config.max_outer_iter + 1):
        report.outer_iterations = outer

        if config.motion != "none":
            taus = _motion_step(seq, b_hat, s_hat, taus, config, threads, notes)
            warped, valid = _warp_all(seq.frames, taus, threads)
            report.tau_hat = taus
            report.valid = valid

        try:
            result, alpha = _background_step(
                warped, s_hat, ~valid, alpha, k_cap, config, b_hat, alpha_floor)
        except IllPosedProblemError as exc:
            report.error = f"background step became ill-posed: {exc}"
            notes.append(report.error)
            break
        b_hat = result.b
        report.b_hat = b_hat
        report.rank_trace.append(result.rank)

        try:
            sigma = estimate_sigma(warped, b_hat, s_hat, ~valid)
        except SigmaEstimationError as exc:
            report.error = f"noise estimation failed: {exc}"
            notes.append(report.error)
            break
        # The noise floor is meaningful only once the background residuals
        # are plausibly Gaussian; while undetected outliers still contaminate
        # them (heavy-tailed residuals), keep decaying beta instead of
        # letting a grossly inflated floor freeze the detection.
        floor = config.beta_floor_mult * sigma ** 2
        if _residuals_gaussian(warped, b_hat, s_hat, ~valid, sigma):
            beta = max(config.eta2 * beta, min(beta, floor))
        else:
            beta = config.eta2 * beta
        if config.beta_floor is not None:
            beta = max(beta, config.beta_floor)
        gamma = config.gamma_factor * beta

        s_hat = batch_support((warped - b_hat) ** 2, beta, gamma,
                              clamp_mask=~valid, frame_shape=(h, w))
        report.s_hat = s_hat

        energy = global_energy(warped, b_hat, s_hat, alpha, beta, gamma,
                               missing=~valid, frame_shape=(h, w))
        report.energy_trace.append(energy)
        report.alpha_trace.append(alpha)
        report.beta_trace.append(beta)
        report.sigma_trace.append(sigma)

        if prev_energy is not None:
            frozen = (alpha == prev_alpha
                      and abs(beta - prev_beta) <= 0.01 * prev_beta)
            rel = abs(energy - prev_energy) / max(1.0, abs(prev_energy))
            if frozen and rel < config.tol:
                report.converged = True
                break
        prev_energy, prev_alpha, prev_beta = energy, alpha, beta

    report.notes = notes
    return report


# Gaussian residuals put ~0.27% of their mass beyond 3 sigma; much more than
# that means undetected outliers still contaminate the noise estimate.
_TAIL_TRUST_BOUND = 0.01


def _residuals_gaussian(d_warped, b_hat, s_hat, missing, sigma: float) -> bool:
    eligible = ~s_hat & ~missing
    r = (d_warped - b_hat)[eligible]
    if r.size < 10 or sigma <= 0:
        return True
    tail = np.abs(r - np.median(r)) > 3.0 * sigma
    return float(tail.mean()) <= _TAIL_TRUST_BOUND


# Background-step continuation style: "backtrack" returns the last iterate
# whose rank stayed within the cap, "overshoot" keeps the first iterate past
# it (the literal reduce-until-rank-exceeds loop). Module-level switch for
# experimentation; run() uses _BACKGROUND_STEP_STYLE.
_BACKGROUND_STEP_STYLE = "backtrack"


def _background_step(warped, s_hat, missing, alpha, k_cap, config, warm,
                     alpha_floor):
    if _BACKGROUND_STEP_STYLE == "backtrack":
        return soft_impute_with_rank_cap(
            warped, s_hat, missing, alpha_init=alpha, k_cap=k_cap,
            eta1=config.eta1, warm_start=warm, tol=config.tol,
            max_iter=config.inner_max_iter, alpha_floor=alpha_floor)
    from .completion import CompletionProblem, soft_impute
    result = soft_impute(CompletionProblem(warped, s_hat, missing, alpha),
                         warm_start=warm, tol=config.tol,
                         max_iter=config.inner_max_iter)
    while result.rank <= k_cap and alpha * config.eta1 >= alpha_floor \
            and k_cap < min(warped.shape):
        alpha = alpha * config.eta1
        result = soft_impute(CompletionProblem(warped, s_hat, missing, alpha),
                             warm_start=result.b, tol=config.tol,
                             max_iter=config.inner_max_iter)
    return result, alpha


def _motion_step(seq: FrameSequence, b_hat, s_hat, taus, config, threads, notes):
    h, w = seq.frame_shape

    def one(j):
        b_j = b_hat[:, j].reshape(h, w)
        s_j = s_hat[:, j].reshape(h, w)
        try:
            return motion_mod.update_tau(seq.frame(j), b_j, s_j, taus[j],
                                         iters=config.tau_iters)
        except motion_mod.DegenerateMotionError as exc:
            msg = f"motion update for frame {j} degenerate ({exc}); keeping warp"
            log.warning(msg)
            notes.append(msg)
            return taus[j]

    indices = range(seq.n_frames)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, indices))
    return [one(j) for j in indices]
