"""Moving-object segmentation by detecting contiguous outliers in a
low-rank background model (DECOLOR), with convex and median-filter
baselines, a synthetic-scene generator, and an evaluation harness."""

from .baselines import (PcpResult, ThresholdSweep, max_f_threshold,
                        median_background, median_masks, spcp,
                        spcp_with_rank_cap)
from .completion import (CompletionProblem, CompletionResult,
                         IllPosedProblemError, soft_impute,
                         soft_impute_with_rank_cap)
from .engine import (DecolorConfig, RunReport, SigmaEstimationError,
                     estimate_sigma, global_energy, run)
from .frames import FrameSequence, load_frames
from .graphcut import (GridGraph, LabelingResult, batch_support,
                       min_cut_support, support_energy)
from .linalg import (SvdConvergenceError, SvdFactors, norm, project_off,
                     project_on, svd, svt)
from .motion import (DegenerateMotionError, InvalidWarpError, Warp,
                     WarpedFrame, prealign, update_tau, warp_frame,
                     warp_jacobian)
from .evaluate import (Metrics, PhaseSpec, SweepRow, SweepSpec,
                       run_phase_diagram, run_sweep, score_mask,
                       score_recovery, write_csv)
from .synth import (SynthConfig, SyntheticScene, SyntheticVideo, VideoConfig,
                    generate, generate_video, snr_of)

__version__ = "0.1.0"

__all__ = [
    "CompletionProblem", "CompletionResult", "DecolorConfig",
    "DegenerateMotionError", "FrameSequence", "GridGraph",
    "IllPosedProblemError", "InvalidWarpError", "LabelingResult", "Metrics",
    "PcpResult", "PhaseSpec", "RunReport", "SigmaEstimationError",
    "SvdConvergenceError", "SvdFactors", "SweepRow", "SweepSpec",
    "SynthConfig", "SyntheticScene", "SyntheticVideo", "ThresholdSweep",
    "VideoConfig", "Warp", "WarpedFrame", "batch_support", "estimate_sigma",
    "generate", "generate_video", "global_energy", "load_frames",
    "max_f_threshold", "median_background", "median_masks", "min_cut_support",
    "norm", "prealign", "project_off", "project_on", "run",
    "run_phase_diagram", "run_sweep", "score_mask", "score_recovery",
    "snr_of", "soft_impute", "soft_impute_with_rank_cap", "spcp",
    "spcp_with_rank_cap", "support_energy", "svd", "svt", "update_tau",
    "warp_frame", "warp_jacobian", "write_csv",
]
