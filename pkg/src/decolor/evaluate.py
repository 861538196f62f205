"""Mask and recovery metrics, plus the simulation sweep harness.

The harness regenerates the benchmark studies on 1-D synthetic scenes:
detection accuracy and background recovery as functions of object width,
noise level, rank cap, contiguity weight, or foreground stop duration, for
any subset of {decolor, decolor_gamma0, spcp, median}. Results aggregate to
CSV rows of per-grid-point means and standard deviations.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace

import numpy as np

from .baselines import max_f_threshold, median_masks, spcp_with_rank_cap
from .engine import DecolorConfig, run
from .linalg import as_mask, as_matrix
from .synth import SynthConfig, SyntheticScene, generate

log = logging.getLogger(__name__)

SWEEP_VARIABLES = ("object_width", "snr", "k_cap", "gamma_mult", "stop_frames")
METHODS = ("decolor", "decolor_gamma0", "spcp", "median")

# relative multiples of the scene noise level swept for the sparse penalty
SPCP_BETA_GRID = (0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f_measure: float
    tp: int
    fp: int
    tn: int
    fn: int
    precision_defined: bool = True


def score_mask(predicted, truth) -> Metrics:
    """Entrywise classification counts of a predicted support mask."""
    p = as_mask(predicted, "predicted")
    t = as_mask(truth, "truth")
    if p.shape != t.shape:
        raise ValueError("shape mismatch")
    tp = int((p & t).sum())
    fp = int((p & ~t).sum())
    fn = int((~p & t).sum())
    tn = int((~p & ~t).sum())
    defined = (tp + fp) > 0
    precision = tp / (tp + fp) if defined else 0.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    f = (2 * precision * recall / (precision + recall)
         if precision + recall > 0 else 0.0)
    return Metrics(precision=precision, recall=recall, f_measure=f,
                   tp=tp, fp=fp, tn=tn, fn=fn, precision_defined=defined)


def score_recovery(b_hat, b0) -> float:
    """Relative Frobenius error ||b_hat - b0||_F / ||b0||_F."""
    bh = as_matrix(b_hat, "b_hat")
    bt = as_matrix(b0, "b0")
    if bh.shape != bt.shape:
        raise ValueError("shape mismatch")
    denom = np.linalg.norm(bt)
    if denom == 0:
        raise ValueError("b0 has zero norm")
    return float(np.linalg.norm(bh - bt) / denom)


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    grid: tuple
    trials: int = 20
    methods: tuple[str, ...] = ("decolor", "spcp", "median")
    base: SynthConfig = SynthConfig(w=25)
    k_cap: int | None = None
    gamma_factor: float = 1.0
    tol: float = 1e-5
    max_outer_iter: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"variable must be one of {SWEEP_VARIABLES}")
        if not self.grid:
            raise ValueError("grid must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")


@dataclass(frozen=True)
class SweepRow:
    value: float
    method: str
    f_mean: float
    f_std: float
    rmse_mean: float
    rmse_std: float
    trials: int
    failures: int


def _scene_for(spec: SweepSpec, value, seed: int) -> tuple[SyntheticScene, dict]:
    """Scene for one grid point; returns it with engine overrides."""
    cfg = replace(spec.base, seed=seed)
    overrides = {"k_cap": spec.k_cap, "gamma_factor": spec.gamma_factor}
    if spec.variable == "object_width":
        cfg = replace(cfg, w=int(value))
    elif spec.variable == "snr":
        cfg = replace(cfg, snr=float(value))
    elif spec.variable == "stop_frames":
        cfg = replace(cfg, stop_frames=int(value))
    elif spec.variable == "k_cap":
        overrides["k_cap"] = int(value)
    elif spec.variable == "gamma_mult":
        overrides["gamma_factor"] = float(value)
    return generate(cfg), overrides


def _run_method(method: str, scene: SyntheticScene, spec: SweepSpec,
                overrides: dict) -> tuple[float, float]:
    """(F, RMSE) of one method on one scene."""
    if method in ("decolor", "decolor_gamma0"):
        gamma_factor = 0.0 if method == "decolor_gamma0" else overrides["gamma_factor"]
        config = DecolorConfig(k_cap=overrides["k_cap"],
                               gamma_factor=gamma_factor,
                               tol=spec.tol,
                               max_outer_iter=spec.max_outer_iter)
        report = run(scene.d, config)
        if report.error:
            raise RuntimeError(report.error)
        return (score_mask(report.s_hat, scene.s0).f_measure,
                score_recovery(report.b_hat, scene.b0))
    if method == "spcp":
        mask, b = spcp_masks(scene.d, scene.s0, k_cap=overrides["k_cap"],
                             sigma_hint=scene.noise_sigma)
        return (score_mask(mask, scene.s0).f_measure,
                score_recovery(b, scene.b0))
    if method == "median":
        mask, b = median_masks(scene.d, truth=scene.s0)
        return (score_mask(mask, scene.s0).f_measure,
                score_recovery(b, scene.b0))
    raise ValueError(f"unknown method {method!r}")


def spcp_masks(d, truth, k_cap: int | None = None,
               sigma_hint: float | None = None
               ) -> tuple[np.ndarray, np.ndarray]:
    """Evaluation protocol for the convex baseline: sweep the sparse penalty
    over a noise-scaled grid, threshold |D - B| at maximal F for each, and
    keep the best. Requires ground truth, like the thresholding itself."""
    dm = as_matrix(d, "d")
    if sigma_hint is None or sigma_hint <= 0:
        # robust scale of first differences along time; crude but adequate
        diffs = np.diff(dm, axis=1)
        sigma_hint = float(np.median(np.abs(diffs)) / 0.6745 / np.sqrt(2))
        sigma_hint = max(sigma_hint, 1e-6 * max(np.abs(dm).max(), 1.0))
    best = None
    for mult in SPCP_BETA_GRID:
        result, _ = spcp_with_rank_cap(dm, beta=mult * sigma_hint, k_cap=k_cap)
        sweep = max_f_threshold(np.abs(dm - result.b), truth)
        if best is None or sweep.best_f > best[0]:
            best = (sweep.best_f, sweep.best_mask, result.b)
    return best[1], best[2]


def run_sweep(spec: SweepSpec) -> list[SweepRow]:
    """All grid points x methods, averaged over seeded trials.

    Methods share the scene within a trial. Individual failures are counted
    and excluded from the averages rather than aborting the sweep.
    """
    rows: list[SweepRow] = []
    for gi, value in enumerate(spec.grid):
        scores: dict[str, list[tuple[float, float]]] = {m: [] for m in spec.methods}
        failures: dict[str, int] = {m: 0 for m in spec.methods}
        for trial in range(spec.trials):
            seed = int(np.random.SeedSequence(
                [spec.seed, gi, trial]).generate_state(1)[0])
            scene, overrides = _scene_for(spec, value, seed)
            for method in spec.methods:
                try:
                    scores[method].append(
                        _run_method(method, scene, spec, overrides))
                except Exception as exc:
                    failures[method] += 1
                    log.warning("trial %d of %s at %s=%r failed: %s", trial,
                                method, spec.variable, value, exc)
        for method in spec.methods:
            got = np.array(scores[method]) if scores[method] else np.empty((0, 2))
            rows.append(SweepRow(
                value=float(value), method=method,
                f_mean=float(got[:, 0].mean()) if got.size else float("nan"),
                f_std=float(got[:, 0].std()) if got.size else float("nan"),
                rmse_mean=float(got[:, 1].mean()) if got.size else float("nan"),
                rmse_std=float(got[:, 1].std()) if got.size else float("nan"),
                trials=spec.trials, failures=failures[method]))
    return rows


CSV_HEADER = ("value", "method", "f_mean", "f_std", "rmse_mean", "rmse_std",
              "trials", "failures")


def write_csv(rows: list[SweepRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow([r.value, r.method, r.f_mean, r.f_std,
                             r.rmse_mean, r.rmse_std, r.trials, r.failures])


@dataclass(frozen=True)
class PhaseSpec:
    """Fraction of accurate detections (F > threshold) over a grid of
    foreground variability and object width."""

    sigma_f_grid: tuple = (0.2, 0.6, 1.0, 1.4, 1.8)
    width_grid: tuple = (10, 25, 40, 55, 70)
    trials: int = 20
    f_threshold: float = 0.95
    base: SynthConfig = SynthConfig()
    seed: int = 0


@dataclass(frozen=True)
class PhaseRow:
    sigma_f: float
    width: float
    fraction: float
    trials: int


def run_phase_diagram(spec: PhaseSpec) -> list[PhaseRow]:
    rows = []
    for si, sigma_f in enumerate(spec.sigma_f_grid):
        for wi, width in enumerate(spec.width_grid):
            hits = 0
            for trial in range(spec.trials):
                ss = np.random.SeedSequence([spec.seed, si, wi, trial])
                seed = int(ss.generate_state(1)[0])
                rng = np.random.default_rng(seed)
                mean_f = float(rng.uniform(-2.0, 2.0))
                cfg = replace(spec.base, w=int(width), sigma_f=float(sigma_f),
                              mean_f=mean_f, seed=seed)
                scene = generate(cfg)
                report = run(scene.d, DecolorConfig())
                f = score_mask(report.s_hat, scene.s0).f_measure
                hits += f > spec.f_threshold
            rows.append(PhaseRow(sigma_f=float(sigma_f), width=float(width),
                                 fraction=hits / spec.trials,
                                 trials=spec.trials))
    return rows


def write_phase_csv(rows: list[PhaseRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("sigma_f", "width", "fraction", "trials"))
        for r in rows:
            writer.writerow([r.sigma_f, r.width, r.fraction, r.trials])
