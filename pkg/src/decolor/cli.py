"""Command-line front end: segment image sequences, run synthetic benches,
score masks against ground truth, and export synthetic scenes.

Exit codes: 0 success, 2 bad input (unreadable frames, invalid spec or
config), 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import evaluate, plots, synth
from .engine import MOTION_MODELS, DecolorConfig, run
from .frames import (FrameLoadError, FrameSequence, load_frames, load_mask,
                     save_gray, save_mask)
from .motion import MODEL_PARAMS

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3

# keys accepted in segment config files (mirrors DecolorConfig plus seed)
_SEGMENT_KEYS = {
    "motion": str, "gamma_mult": float, "k": int, "tol": float,
    "max_iter": int, "eta1": float, "eta2": float, "beta_floor_mult": float,
    "alpha_floor": float, "beta_floor": float, "tau_iters": int,
    "threads": int, "seed": int,
}

_BENCH_KEYS = {
    "mode": str, "variable": str, "grid": str, "trials": int, "methods": str,
    "m": int, "n": int, "rank": int, "width": int, "snr": float,
    "stop_frames": int, "seed": int, "k": int, "gamma_mult": float,
    "tol": float, "max_iter": int,
    "sigma_f_grid": str, "width_grid": str, "f_threshold": float,
}


class InputError(Exception):
    pass


def _parse_kv_file(path: Path) -> dict[str, str]:
    if not path.is_file():
        raise InputError(f"config file not found: {path}")
    out: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected KEY=VALUE, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _coerce(kv: dict[str, str], schema: dict) -> dict:
    out = {}
    for key, raw in kv.items():
        if key not in schema:
            raise InputError(f"unknown config key {key!r}")
        try:
            out[key] = schema[key](raw)
        except ValueError as exc:
            raise InputError(f"bad value for {key!r}: {raw!r} ({exc})") from exc
    return out


def _segment_settings(args) -> dict:
    """Merge config file and flags (flags win) over segment defaults."""
    settings = {"motion": "affine", "gamma_mult": 5.0, "tol": 1e-4,
                "max_iter": 50, "eta1": float(1.0 / np.sqrt(2.0)),
                "eta2": 0.5, "beta_floor_mult": 4.5, "tau_iters": 1,
                "seed": 0}
    if args.config:
        settings.update(_coerce(_parse_kv_file(Path(args.config)), _SEGMENT_KEYS))
    for key, flag in (("motion", "motion"), ("gamma_mult", "gamma_mult"),
                      ("k", "k"), ("tol", "tol"), ("max_iter", "max_iter"),
                      ("seed", "seed")):
        value = getattr(args, flag)
        if value is not None:
            settings[key] = value
    if settings["motion"] not in MOTION_MODELS:
        raise InputError(f"motion must be one of {MOTION_MODELS}")
    return settings


def _config_from_settings(settings: dict) -> DecolorConfig:
    return DecolorConfig(
        k_cap=settings.get("k"),
        gamma_factor=settings["gamma_mult"],
        eta1=settings["eta1"],
        eta2=settings["eta2"],
        beta_floor_mult=settings["beta_floor_mult"],
        tol=settings["tol"],
        max_outer_iter=settings["max_iter"],
        motion=settings["motion"],
        alpha_floor=settings.get("alpha_floor"),
        beta_floor=settings.get("beta_floor"),
        tau_iters=settings["tau_iters"],
        threads=settings.get("threads"),
    )


def _echo_settings(settings: dict, config: DecolorConfig, path: Path) -> None:
    lines = [f"motion={config.motion}",
             f"gamma_mult={config.gamma_factor!r}",
             f"tol={config.tol!r}",
             f"max_iter={config.max_outer_iter}",
             f"eta1={config.eta1!r}",
             f"eta2={config.eta2!r}",
             f"beta_floor_mult={config.beta_floor_mult!r}",
             f"tau_iters={config.tau_iters}",
             f"seed={settings['seed']}"]
    if config.k_cap is not None:
        lines.append(f"k={config.k_cap}")
    if config.alpha_floor is not None:
        lines.append(f"alpha_floor={config.alpha_floor!r}")
    if config.beta_floor is not None:
        lines.append(f"beta_floor={config.beta_floor!r}")
    if config.threads is not None:
        lines.append(f"threads={config.threads}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_segment(args) -> int:
    try:
        settings = _segment_settings(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    try:
        seq = load_frames(args.input_dir)
    except FrameLoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if seq.n_frames < 2:
        print("error: need >= 2 frames", file=sys.stderr)
        return EXIT_INPUT

    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = _config_from_settings(settings)
    _echo_settings(settings, config, out / "resolved.cfg")

    try:
        report = run(seq, config)
    except Exception as exc:
        print(f"error: solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if report.error is not None and report.outer_iterations <= 1:
        print(f"error: solver failed: {report.error}", file=sys.stderr)
        return EXIT_SOLVER

    h, w = report.frame_shape
    for j in range(seq.n_frames):
        save_gray(out / f"background_{j:04d}.png",
                  report.b_hat[:, j].reshape(h, w))
        save_mask(out / f"mask_{j:04d}.png", report.s_hat[:, j].reshape(h, w))

    with open(out / "transforms.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        n_params = MODEL_PARAMS.get(config.motion, 0)
        writer.writerow(["frame"] + [f"p{i}" for i in range(n_params)])
        for j in range(seq.n_frames):
            params = ([] if report.tau_hat is None
                      else [repr(v) for v in report.tau_hat[j].params])
            writer.writerow([j] + params)

    summary = {
        "frames": seq.n_frames,
        "frame_height": h,
        "frame_width": w,
        "converged": report.converged,
        "outer_iterations": report.outer_iterations,
        "energy_trace": report.energy_trace,
        "alpha_trace": report.alpha_trace,
        "beta_trace": report.beta_trace,
        "sigma_trace": report.sigma_trace,
        "rank_trace": report.rank_trace,
        "foreground_fraction": float(report.s_hat.mean()),
        "notes": report.notes,
        "error": report.error,
    }
    (out / "report.json").write_text(json.dumps(summary, indent=2, sort_keys=True)
                                     + "\n", encoding="utf-8")
    plots.plot_energy_trace(report, out / "energy_trace.png")
    print(f"segmented {seq.n_frames} frames -> {out} "
          f"(converged={report.converged}, "
          f"iterations={report.outer_iterations})")
    return EXIT_OK


def _bench_sweep_spec(kv: dict) -> evaluate.SweepSpec:
    if "variable" not in kv or "grid" not in kv:
        raise InputError("bench spec needs variable= and grid=")
    grid_raw = [g for g in str(kv["grid"]).replace(",", " ").split() if g]
    if not grid_raw:
        raise InputError("empty grid")
    grid = tuple(float(g) for g in grid_raw)
    methods = tuple(m for m in str(kv.get("methods", "decolor,spcp,median"))
                    .replace(",", " ").split() if m)
    base = synth.SynthConfig(
        m=kv.get("m", 100), n=kv.get("n", 50), r=kv.get("rank", 3),
        w=kv.get("width", 25), snr=kv.get("snr", 10.0),
        stop_frames=kv.get("stop_frames", 0))
    return evaluate.SweepSpec(
        variable=kv["variable"], grid=grid, trials=kv.get("trials", 20),
        methods=methods, base=base, k_cap=kv.get("k"),
        gamma_factor=kv.get("gamma_mult", 1.0), tol=kv.get("tol", 1e-5),
        max_outer_iter=kv.get("max_iter", 50), seed=kv.get("seed", 0))


def _bench_phase_spec(kv: dict) -> evaluate.PhaseSpec:
    def grid_of(key, default):
        raw = str(kv.get(key, default)).replace(",", " ").split()
        return tuple(float(v) for v in raw)

    base = synth.SynthConfig(
        m=kv.get("m", 100), n=kv.get("n", 50), r=kv.get("rank", 3),
        snr=kv.get("snr", 10.0))
    return evaluate.PhaseSpec(
        sigma_f_grid=grid_of("sigma_f_grid", "0.2 0.6 1.0 1.4 1.8"),
        width_grid=grid_of("width_grid", "10 25 40 55 70"),
        trials=kv.get("trials", 20),
        f_threshold=kv.get("f_threshold", 0.95),
        base=base, seed=kv.get("seed", 0))


def cmd_bench(args) -> int:
    try:
        kv = _coerce(_parse_kv_file(Path(args.spec_file)), _BENCH_KEYS)
        mode = kv.get("mode", "sweep")
        if mode not in ("sweep", "phase"):
            raise InputError(f"mode must be sweep or phase, got {mode!r}")
        if args.seed is not None:
            kv["seed"] = args.seed
        spec = _bench_phase_spec(kv) if mode == "phase" else _bench_sweep_spec(kv)
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    out_csv = Path(args.output_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    fig_path = out_csv.with_suffix(".png")
    if isinstance(spec, evaluate.PhaseSpec):
        rows = evaluate.run_phase_diagram(spec)
        evaluate.write_phase_csv(rows, out_csv)
        plots.plot_phase(rows, fig_path)
        print(f"{'sigma_f':>8} {'width':>6} {'fraction':>9}")
        for r in rows:
            print(f"{r.sigma_f:8.2f} {r.width:6.0f} {r.fraction:9.2f}")
    else:
        rows = evaluate.run_sweep(spec)
        evaluate.write_csv(rows, out_csv)
        plots.plot_sweep(rows, fig_path, variable=spec.variable)
        print(f"{spec.variable:>12} {'method':>16} {'F':>7} {'rmse':>7} {'fail':>5}")
        for r in rows:
            print(f"{r.value:12.3g} {r.method:>16} {r.f_mean:7.3f} "
                  f"{r.rmse_mean:7.3f} {r.failures:5d}")
    print(f"wrote {out_csv} and {fig_path}")
    return EXIT_OK


def _load_mask_dir(directory: Path) -> list[np.ndarray]:
    if not directory.is_dir():
        raise InputError(f"{directory} is not a directory")
    paths = sorted(p for p in directory.iterdir()
                   if p.suffix.lower() in (".png", ".pgm"))
    if not paths:
        raise InputError(f"no mask images in {directory}")
    return [load_mask(p) for p in paths]


def cmd_score(args) -> int:
    try:
        predicted = _load_mask_dir(Path(args.mask_dir))
        truth = _load_mask_dir(Path(args.truth_dir))
        if len(predicted) != len(truth):
            raise InputError(f"mask count {len(predicted)} != truth count "
                             f"{len(truth)}")
        for j, (p, t) in enumerate(zip(predicted, truth)):
            if p.shape != t.shape:
                raise InputError(f"frame {j}: shape {p.shape} != {t.shape}")
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    print(f"{'frame':>6} {'precision':>10} {'recall':>8} {'F':>7}")
    for j, (p, t) in enumerate(zip(predicted, truth)):
        m = evaluate.score_mask(p, t)
        print(f"{j:6d} {m.precision:10.4f} {m.recall:8.4f} {m.f_measure:7.4f}")
    all_p = np.concatenate([p.ravel() for p in predicted])[None, :]
    all_t = np.concatenate([t.ravel() for t in truth])[None, :]
    m = evaluate.score_mask(all_p, all_t)
    print(f"{'all':>6} {m.precision:10.4f} {m.recall:8.4f} {m.f_measure:7.4f}")
    return EXIT_OK


def cmd_synth(args) -> int:
    out = Path(args.output_dir)
    frames_dir = out / "frames"
    truth_dir = out / "truth"
    frames_dir.mkdir(parents=True, exist_ok=True)
    truth_dir.mkdir(parents=True, exist_ok=True)

    if args.video:
        try:
            width, height = (int(v) for v in args.frame_size.lower().split("x"))
        except ValueError:
            print(f"error: bad --frame-size {args.frame_size!r}, want WxH",
                  file=sys.stderr)
            return EXIT_INPUT
        cfg = synth.VideoConfig(width=width, height=height, n=args.n,
                                r=args.rank, snr=args.snr,
                                max_shift=args.shift_max, seed=args.seed)
        video = synth.generate_video(cfg)
        stack = video.frames.frames
        dmin, dmax = float(stack.min()), float(stack.max())
        span = max(dmax - dmin, 1e-12)
        for j in range(cfg.n):
            save_gray(frames_dir / f"frame_{j:04d}.png",
                      (stack[j] - dmin) / span)
            save_mask(truth_dir / f"truth_{j:04d}.png", video.truth[j])
        echo = [f"video=1", f"frame_size={width}x{height}", f"n={cfg.n}",
                f"rank={cfg.r}", f"snr={cfg.snr!r}",
                f"shift_max={cfg.max_shift!r}", f"seed={cfg.seed}",
                f"dmin={dmin!r}", f"dmax={dmax!r}"]
    else:
        try:
            cfg = synth.SynthConfig(m=args.m, n=args.n, r=args.rank,
                                    w=args.width, snr=args.snr,
                                    stop_frames=args.stop_frames,
                                    seed=args.seed)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        scene = synth.generate(cfg)
        scaled, dmin, dmax = synth.scene_to_unit_range(scene)
        seq = FrameSequence.from_matrix(scaled)
        for j in range(cfg.n):
            save_gray(frames_dir / f"frame_{j:04d}.png", seq.frame(j))
            save_mask(truth_dir / f"truth_{j:04d}.png",
                      scene.s0[:, j].reshape(cfg.m, 1))
        echo = [f"m={cfg.m}", f"n={cfg.n}", f"rank={cfg.r}",
                f"width={cfg.w}", f"snr={cfg.snr!r}",
                f"stop_frames={cfg.stop_frames}", f"seed={cfg.seed}",
                f"dmin={dmin!r}", f"dmax={dmax!r}"]
    (out / "scene.cfg").write_text("\n".join(echo) + "\n", encoding="utf-8")
    print(f"wrote {args.n} frames to {frames_dir} (truth in {truth_dir})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decolor",
        description="Moving-object segmentation via low-rank background "
                    "modeling with contiguous outlier detection.")
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="segment a directory of frames")
    seg.add_argument("input_dir")
    seg.add_argument("output_dir")
    seg.add_argument("--config", help="key=value config file")
    seg.add_argument("--seed", type=int, default=None)
    seg.add_argument("--motion", choices=MOTION_MODELS, default=None,
                     help="camera-motion model (default affine)")
    seg.add_argument("--gamma-mult", dest="gamma_mult", type=float,
                     default=None, help="contiguity weight as a multiple of "
                     "the sparsity weight (default 5)")
    seg.add_argument("--k", type=int, default=None,
                     help="background rank cap (default ceil(sqrt(n)))")
    seg.add_argument("--tol", type=float, default=None,
                     help="convergence tolerance (default 1e-4)")
    seg.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    seg.set_defaults(func=cmd_segment)

    ben = sub.add_parser("bench", help="run a synthetic benchmark sweep")
    ben.add_argument("spec_file", help="key=value sweep specification")
    ben.add_argument("output_csv")
    ben.add_argument("--seed", type=int, default=None)
    ben.set_defaults(func=cmd_bench)

    sco = sub.add_parser("score", help="score masks against ground truth")
    sco.add_argument("mask_dir")
    sco.add_argument("truth_dir")
    sco.set_defaults(func=cmd_score)

    syn = sub.add_parser("synth", help="export a synthetic scene as frames")
    syn.add_argument("output_dir")
    syn.add_argument("--m", type=int, default=100,
                     help="pixels per 1-D frame (default 100)")
    syn.add_argument("--n", type=int, default=50, help="frames (default 50)")
    syn.add_argument("--rank", type=int, default=3)
    syn.add_argument("--width", type=int, default=40,
                     help="object width in pixels")
    syn.add_argument("--snr", type=float, default=10.0)
    syn.add_argument("--stop-frames", dest="stop_frames", type=int, default=0)
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--video", action="store_true",
                     help="2-D sequence with camera shifts instead of the "
                     "1-D benchmark scene")
    syn.add_argument("--frame-size", dest="frame_size", default="48x36",
                     help="WxH for --video (default 48x36)")
    syn.add_argument("--shift-max", dest="shift_max", type=float, default=2.0,
                     help="max |camera shift| in px for --video")
    syn.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
