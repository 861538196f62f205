"""Exact binary labeling of per-frame pixel grids by min-cut.

The energy being minimized for one frame, with ``r2 = (D - B)^2`` per pixel,
is ``sum((beta - 0.5 * r2) * label) + gamma * (# of 4-neighbor disagreements)``.
With nonnegative *gamma* the pairwise terms are submodular, so the global
optimum is a minimum s-t cut. Frames carry no edges between each other, so a
whole sequence is solved as one disconnected flow problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, maximum_flow

from .linalg import as_mask, as_matrix

# Capacities are scaled to integers for the flow solver, which truncates any
# single edge capacity to int32 range. The clamp capacity only has to beat
# the 4 gamma-edges of a single pixel, so 2**30 >> 4 * 2**24 keeps
# forced-background pixels out of every minimum cut while staying in range.
_SCALE_TARGET = float(2**24)
_CLAMP_CAP = np.int64(2**30)


@dataclass(frozen=True)
class GridGraph:
    """One frame's labeling problem: per-pixel cost of label 1 plus a
    uniform 4-neighbor disagreement weight."""

    unary_cost_1: np.ndarray      # (h, w) cost of label 1 relative to label 0
    pairwise_weight: float        # gamma >= 0
    clamp: np.ndarray | None = None   # pixels forced to label 0

    def __post_init__(self):
        u = as_matrix(self.unary_cost_1, "unary_cost_1")
        if self.pairwise_weight < 0:
            raise ValueError("pairwise_weight must be nonnegative for an exact cut")
        clamp = self.clamp
        if clamp is not None:
            clamp = as_mask(clamp, "clamp")
            if clamp.shape != u.shape:
                raise ValueError("clamp shape mismatch")
        object.__setattr__(self, "unary_cost_1", u)
        object.__setattr__(self, "clamp", clamp)


@dataclass(frozen=True)
class LabelingResult:
    labels: np.ndarray        # (h, w) bool
    energy: float             # direct evaluation of the labeling
    maxflow_value: float      # cut value mapped back to the energy scale


def _neighbor_diff_count(labels: np.ndarray) -> int:
    h = np.count_nonzero(labels[:, 1:] != labels[:, :-1])
    v = np.count_nonzero(labels[1:, :] != labels[:-1, :])
    return h + v


def support_energy(residual_sq, labels, beta: float, gamma: float,
                   clamp_mask=None) -> float:
    """Evaluate the labeling energy for one frame.

    Raises if *labels* marks a clamped pixel as foreground.
    """
    r2 = as_matrix(residual_sq, "residual_sq")
    if (r2 < 0).any():
        raise ValueError("residual_sq must be nonnegative")
    lab = as_mask(labels, "labels")
    if lab.shape != r2.shape:
        raise ValueError("labels shape mismatch")
    if clamp_mask is not None:
        clamp = as_mask(clamp_mask, "clamp_mask")
        if clamp.shape != r2.shape:
            raise ValueError("clamp_mask shape mismatch")
        if (lab & clamp).any():
            raise ValueError("labeling violates clamp (foreground on clamped pixel)")
    unary = float(((beta - 0.5 * r2) * lab).sum())
    return unary + gamma * _neighbor_diff_count(lab)


def _solve_stack(unary1: np.ndarray, gamma: float,
                 clamp: np.ndarray) -> tuple[np.ndarray, float]:
    """Min-cut over a (k, h, w) stack of independent frames.

    Returns the label stack and the cut value on the energy scale. Ties are
    resolved toward label 0 by taking the minimal sink side among all minimum
    cuts (the pixels that can still reach the sink in the residual network).
    """
    k, h, w = unary1.shape
    n_pix = k * h * w
    source, sink = n_pix, n_pix + 1

    u1 = np.where(clamp, 0.0, unary1).ravel()
    pos = np.maximum(u1, 0.0)
    neg = np.maximum(-u1, 0.0)
    cmax = max(pos.max(initial=0.0), neg.max(initial=0.0), gamma)
    scale = _SCALE_TARGET / cmax if cmax > 0 else 1.0

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    caps: list[np.ndarray] = []

    def add(r, c, cap_int):
        rows.append(r.astype(np.int64, copy=False))
        cols.append(c.astype(np.int64, copy=False))
        caps.append(cap_int)

    flat_clamp = clamp.ravel()
    src_nodes = np.flatnonzero((pos > 0) & ~flat_clamp)
    add(np.full(src_nodes.size, source), src_nodes,
        np.round(pos[src_nodes] * scale).astype(np.int64))
    clamp_nodes = np.flatnonzero(flat_clamp)
    add(np.full(clamp_nodes.size, source), clamp_nodes,
        np.full(clamp_nodes.size, _CLAMP_CAP))
    snk_nodes = np.flatnonzero((neg > 0) & ~flat_clamp)
    add(snk_nodes, np.full(snk_nodes.size, sink),
        np.round(neg[snk_nodes] * scale).astype(np.int64))

    if gamma > 0:
        gcap = np.int64(round(gamma * scale))
        idx = np.arange(n_pix).reshape(k, h, w)
        if w > 1:
            a = idx[:, :, :-1].ravel()
            b = idx[:, :, 1:].ravel()
            add(a, b, np.full(a.size, gcap))
            add(b, a, np.full(a.size, gcap))
        if h > 1:
            a = idx[:, :-1, :].ravel()
            b = idx[:, 1:, :].ravel()
            add(a, b, np.full(a.size, gcap))
            add(b, a, np.full(a.size, gcap))

    n_nodes = n_pix + 2
    graph = coo_matrix(
        (np.concatenate(caps), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_nodes, n_nodes), dtype=np.int64).tocsr()
    result = maximum_flow(graph, source, sink)

    residual = graph - result.flow
    reach = breadth_first_order((residual > 0).T.tocsr().astype(np.int8),
                                sink, directed=True, return_predecessors=False)
    labels = np.zeros(n_pix, dtype=bool)
    labels[reach[reach < n_pix]] = True

    shift = float(np.minimum(u1[~flat_clamp], 0.0).sum())
    return labels.reshape(k, h, w), result.flow_value / scale + shift


def min_cut_support(residual_sq, beta: float, gamma: float,
                    clamp_mask=None) -> LabelingResult:
    """Globally optimal foreground labeling of a single frame."""
    r2 = as_matrix(residual_sq, "residual_sq")
    if (r2 < 0).any():
        raise ValueError("residual_sq must be nonnegative")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    clamp = (np.zeros(r2.shape, dtype=bool) if clamp_mask is None
             else as_mask(clamp_mask, "clamp_mask"))
    if clamp.shape != r2.shape:
        raise ValueError("clamp_mask shape mismatch")
    unary1 = beta - 0.5 * r2
    labels, flow = _solve_stack(unary1[None], gamma, clamp[None])
    lab = labels[0]
    return LabelingResult(labels=lab,
                          energy=support_energy(r2, lab, beta, gamma, clamp),
                          maxflow_value=flow)


def batch_support(residual_sq, beta: float, gamma: float, clamp_mask=None,
                  frame_shape: tuple[int, int] | None = None) -> np.ndarray:
    """Optimal support over a whole sequence.

    *residual_sq* is the (m, n) matrix of squared residuals with one frame
    per column; *frame_shape* gives the (height, width) a column reshapes to
    (default single-pixel-wide frames). Frames are independent, so the whole
    stack is solved as one disconnected min-cut.
    """
    r2 = as_matrix(residual_sq, "residual_sq")
    if (r2 < 0).any():
        raise ValueError("residual_sq must be nonnegative")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    m, n = r2.shape
    h, w = (m, 1) if frame_shape is None else frame_shape
    if h * w != m:
        raise ValueError(f"frame_shape {frame_shape} does not match {m} pixels")
    clamp = (np.zeros(r2.shape, dtype=bool) if clamp_mask is None
             else as_mask(clamp_mask, "clamp_mask"))
    if clamp.shape != r2.shape:
        raise ValueError("clamp_mask shape mismatch")

    stack_r2 = r2.T.reshape(n, h, w)
    stack_clamp = clamp.T.reshape(n, h, w)
    labels, _ = _solve_stack(beta - 0.5 * stack_r2, gamma, stack_clamp)
    return labels.reshape(n, m).T
