"""Nuclear-norm regularized matrix completion via iterative imputation.

Solves ``min_B 0.5 * ||P_obs(D - B)||_F^2 + alpha * ||B||_*`` where the
observed set excludes both outlier entries and entries invalidated by
warping. The fixed-point iteration alternates imputing the unobserved
entries from the current estimate with singular-value shrinkage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import as_mask, as_matrix, rank_from_sigma, svd

RANK_SIGMA_TOL = 1e-10


class IllPosedProblemError(ValueError):
    """A frame (column) has no observed entry left to fit."""


@dataclass(frozen=True)
class CompletionProblem:
    """Masked completion instance.

    ``outlier_mask`` and ``missing_mask`` are both excluded from the data-fit
    term; they are kept separate because downstream steps treat detected
    outliers and warped-in border pixels differently.
    """

    d: np.ndarray
    outlier_mask: np.ndarray
    missing_mask: np.ndarray
    alpha: float

    def __post_init__(self):
        d = as_matrix(self.d, "d")
        outlier = as_mask(self.outlier_mask, "outlier_mask")
        missing = as_mask(self.missing_mask, "missing_mask")
        if outlier.shape != d.shape or missing.shape != d.shape:
            raise ValueError("d, outlier_mask and missing_mask must share one shape")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        hidden = outlier | missing
        if hidden.all(axis=0).any():
            bad = int(np.flatnonzero(hidden.all(axis=0))[0])
            raise IllPosedProblemError(
                f"column {bad} is fully masked; every frame needs at least "
                "one observed entry")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "outlier_mask", outlier)
        object.__setattr__(self, "missing_mask", missing)

    @property
    def hidden(self) -> np.ndarray:
        return self.outlier_mask | self.missing_mask


@dataclass
class CompletionResult:
    b: np.ndarray
    objective_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    rank: int = 0
    converged: bool = True


def _objective(d, obs, b, alpha, nuclear):
    resid = (d - b)[obs]
    return 0.5 * float(resid @ resid) + alpha * nuclear


def soft_impute(problem: CompletionProblem, warm_start: np.ndarray | None = None,
                tol: float = 1e-5, max_iter: int = 100) -> CompletionResult:
    """Run the imputation / shrinkage fixed-point iteration to convergence.

    Stops once both the relative objective change and the relative iterate
    change fall below *tol*; the iterate condition guarantees the returned
    matrix is within a small multiple of *tol* of an exact fixed point.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    d = problem.d
    obs = ~problem.hidden
    d_obs = np.where(obs, d, 0.0)
    b = np.zeros_like(d) if warm_start is None else as_matrix(warm_start, "warm_start")
    if b.shape != d.shape:
        raise ValueError("warm_start shape mismatch")

    trace: list[float] = []
    prev_f = None
    rank = 0
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        z = d_obs + np.where(obs, 0.0, b)
        u, s, v = svd(z)
        shrunk = np.maximum(s - problem.alpha, 0.0)
        b_new = (u * shrunk) @ v.T
        f = _objective(d, obs, b_new, problem.alpha, shrunk.sum())
        trace.append(f)
        step = np.linalg.norm(b_new - b) / max(np.linalg.norm(b), 1e-12)
        b = b_new
        rank = rank_from_sigma(shrunk, RANK_SIGMA_TOL)
        if prev_f is not None:
            rel_obj = abs(f - prev_f) / max(1.0, prev_f)
            if rel_obj < tol and step < tol:
                converged = True
                break
        prev_f = f
    return CompletionResult(b=b, objective_trace=trace, iterations=iterations,
                            rank=rank, converged=converged)


def soft_impute_with_rank_cap(d, outlier_mask, missing_mask, alpha_init: float,
                              k_cap: int, eta1: float = 1.0 / np.sqrt(2.0),
                              warm_start: np.ndarray | None = None,
                              tol: float = 1e-5, max_iter: int = 100,
                              alpha_floor: float | None = None,
                              ) -> tuple[CompletionResult, float]:
    """Continuation over the shrinkage weight, capped by a target rank.

    Solves at ``alpha_init`` and, while the solution rank stays at or below
    *k_cap*, multiplies alpha by *eta1* and re-solves warm-started. The first
    alpha whose solution exceeds the cap is rejected and the previous accepted
    solution (with its alpha) is returned.

    When *k_cap* can never bind (``k_cap >= min(m, n)``) the first solve is
    returned directly. Noise-free data may never exceed the cap, so the
    descent additionally stops at *alpha_floor* (default ``1e-8 * alpha_init``).
    """
    if alpha_init <= 0:
        raise ValueError("alpha_init must be positive")
    if k_cap < 1:
        raise ValueError("k_cap must be at least 1")
    if not 0.0 < eta1 < 1.0:
        raise ValueError("eta1 must lie in (0, 1)")
    if alpha_floor is None:
        alpha_floor = 1e-8 * alpha_init

    alpha = alpha_init
    result = soft_impute(CompletionProblem(d, outlier_mask, missing_mask, alpha),
                         warm_start=warm_start, tol=tol, max_iter=max_iter)
    if k_cap >= min(d.shape) or result.rank > k_cap:
        # Cap can never bind, or the very first solve already violates it:
        # nothing to backtrack to, so hand the caller what we have.
        return result, alpha

    accepted, accepted_alpha = result, alpha
    while alpha * eta1 >= alpha_floor:
        alpha = alpha * eta1
        result = soft_impute(CompletionProblem(d, outlier_mask, missing_mask, alpha),
                             warm_start=accepted.b, tol=tol, max_iter=max_iter)
        if result.rank > k_cap:
            break
        accepted, accepted_alpha = result, alpha
    return accepted, accepted_alpha
