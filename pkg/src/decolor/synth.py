"""Synthetic scenes with known background, support and noise.

Two generators:

- :func:`generate` builds the 1-D benchmark scene: a rank-r background
  matrix ``B0 = U @ V.T``, a contiguous object of width w sliding down one
  pixel per frame (wrapping at the bottom), foreground intensities drawn
  uniformly, and i.i.d. Gaussian noise at a prescribed SNR.
- :func:`generate_video` builds small 2-D sequences with a smooth analytic
  low-rank background, a moving rectangle, and optional per-frame global
  camera shifts; used to exercise motion compensation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .frames import FrameSequence


@dataclass(frozen=True)
class SynthConfig:
    m: int = 100                  # pixels per (1-D) frame
    n: int = 50                   # frames
    r: int = 3                    # background rank
    w: int = 40                   # object width in pixels
    snr: float = 10.0             # sqrt(var(B0) / var(noise)); inf disables noise
    stop_frames: int = 0          # frames the object pauses after each 1-px step
    sigma_f: float | None = None  # foreground st.dev. override (uniform law)
    mean_f: float | None = None   # foreground mean when sigma_f is set
    camera_shift: tuple[int, ...] | None = None  # per-frame cyclic row shift
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.w <= self.m:
            raise ValueError("need 1 <= w <= m")
        if self.r > min(self.m, self.n) or self.r < 1:
            raise ValueError("need 1 <= r <= min(m, n)")
        if not self.snr > 0:
            raise ValueError("snr must be positive")
        if self.stop_frames < 0 or self.stop_frames >= self.n:
            raise ValueError("stop_frames must lie in [0, n)")
        if self.camera_shift is not None and len(self.camera_shift) != self.n:
            raise ValueError("camera_shift needs one entry per frame")


@dataclass(frozen=True)
class SyntheticScene:
    d: np.ndarray            # (m, n) observations
    b0: np.ndarray           # (m, n) true background
    s0: np.ndarray           # (m, n) bool true support
    noise: np.ndarray        # (m, n) realized noise
    noise_sigma: float
    config: SynthConfig


def _object_starts(n: int, stop_frames: int) -> np.ndarray:
    """Top row of the object per frame.

    With ``stop_frames == 0`` the object advances 1 px every frame. A
    positive value makes it pause that many frames after every step, so each
    position repeats ``stop_frames + 1`` times; longer pauses make the
    occluded pattern ever friendlier to a low-rank background model.
    """
    return np.arange(n) // (stop_frames + 1)


def generate(config: SynthConfig) -> SyntheticScene:
    """Build one scene; deterministic under ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    m, n, r = config.m, config.n, config.r
    u = rng.standard_normal((m, r))
    v = rng.standard_normal((n, r))
    b0 = u @ v.T

    s0 = np.zeros((m, n), dtype=bool)
    starts = _object_starts(n, config.stop_frames)
    rows = (starts[None, :] + np.arange(config.w)[:, None]) % m
    s0[rows, np.arange(n)[None, :]] = True

    if config.sigma_f is None:
        c = float(np.abs(b0).max())
        lo, hi = -c, c
    else:
        half = np.sqrt(3.0) * config.sigma_f
        mean = 0.0 if config.mean_f is None else config.mean_f
        lo, hi = mean - half, mean + half
    # One texture travels with the object: during a stop window the occluded
    # values repeat exactly, which is what lets a too-permissive rank cap
    # absorb a halted object into the background.
    texture = rng.uniform(lo, hi, size=config.w)
    d = b0.copy()
    d[rows, np.arange(n)[None, :]] = texture[:, None]

    if np.isinf(config.snr):
        sigma = 0.0
        noise = np.zeros((m, n))
    else:
        sigma = float(np.sqrt(b0.var()) / config.snr)
        noise = rng.normal(0.0, sigma, size=(m, n))
    d = d + noise

    if config.camera_shift is not None:
        for j, shift in enumerate(config.camera_shift):
            d[:, j] = np.roll(d[:, j], shift)
            s0[:, j] = np.roll(s0[:, j], shift)

    return SyntheticScene(d=d, b0=b0, s0=s0, noise=noise, noise_sigma=sigma,
                          config=config)


def snr_of(scene: SyntheticScene) -> float:
    """Empirical SNR of the realized noise; +inf for a noise-free scene."""
    nv = scene.noise.var()
    if nv == 0:
        return np.inf
    return float(np.sqrt(scene.b0.var() / nv))


@dataclass(frozen=True)
class VideoConfig:
    width: int = 48
    height: int = 36
    n: int = 24
    r: int = 3
    object_size: tuple[int, int] = (8, 8)   # (height, width)
    snr: float = 20.0
    shifts: tuple[tuple[float, float], ...] | None = None  # per-frame (sx, sy)
    max_shift: float = 2.0   # used when shifts is None
    seed: int = 0


@dataclass(frozen=True)
class SyntheticVideo:
    frames: FrameSequence
    truth: np.ndarray                 # (n, h, w) bool
    background: np.ndarray            # (n, h, w) clean shifted background
    shifts: np.ndarray                # (n, 2) applied (sx, sy) per frame
    config: VideoConfig


def _smooth_basis(rng, h: int, w: int, count: int):
    """Random smooth analytic fields, returned as callables on (x, y) grids."""
    funcs = []
    for _ in range(count):
        n_waves = 3
        amp = rng.uniform(0.5, 1.0, n_waves)
        fx = rng.uniform(0.2, 1.5, n_waves) / w
        fy = rng.uniform(0.2, 1.5, n_waves) / h
        phase = rng.uniform(0, 2 * np.pi, n_waves)
        lin = rng.uniform(-0.5, 0.5, 2)

        def f(x, y, amp=amp, fx=fx, fy=fy, phase=phase, lin=lin):
            out = lin[0] * x / w + lin[1] * y / h
            for a, u_, v_, ph in zip(amp, fx, fy, phase):
                out = out + a * np.cos(2 * np.pi * (u_ * x + v_ * y) + ph)
            return out

        funcs.append(f)
    return funcs


def generate_video(config: VideoConfig) -> SyntheticVideo:
    """2-D sequence: analytic low-rank background sampled under per-frame
    global shifts, plus an independently moving rectangle."""
    rng = np.random.default_rng(config.seed)
    h, w, n, r = config.height, config.width, config.n, config.r

    if config.shifts is None:
        shifts = rng.uniform(-config.max_shift, config.max_shift, size=(n, 2))
        shifts[n // 2] = 0.0
    else:
        shifts = np.asarray(config.shifts, dtype=np.float64)
        if shifts.shape != (n, 2):
            raise ValueError("shifts must be (n, 2)")

    basis = _smooth_basis(rng, h, w, r)
    coef = rng.standard_normal((r, n)) * 0.3
    coef[0] += 1.0  # dominant static component keeps the scene persistent
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)

    background = np.empty((n, h, w))
    for j in range(n):
        sx, sy = shifts[j]
        background[j] = sum(coef[k, j] * basis[k](x + sx, y + sy)
                            for k in range(r))

    scale = background.std()
    background /= max(scale, 1e-12)
    c = float(np.abs(background).max())

    oh, ow = config.object_size
    truth = np.zeros((n, h, w), dtype=bool)
    frames = background.copy()
    top_range = max(h - oh, 1)
    left_range = max(w - ow, 1)
    top0 = rng.integers(0, top_range)
    left0 = rng.integers(0, left_range)
    for j in range(n):
        top = (top0 + j) % top_range
        left = (left0 + j) % left_range
        truth[j, top:top + oh, left:left + ow] = True
        frames[j, top:top + oh, left:left + ow] = rng.uniform(-c, c, (oh, ow))

    if np.isinf(config.snr):
        sigma = 0.0
    else:
        sigma = float(np.sqrt(background.var()) / config.snr)
        frames = frames + rng.normal(0.0, sigma, size=frames.shape)

    return SyntheticVideo(frames=FrameSequence(frames), truth=truth,
                          background=background, shifts=shifts, config=config)


def scene_to_unit_range(scene: SyntheticScene
                        ) -> tuple[np.ndarray, float, float]:
    """Affine map of the scene's observations into [0, 1] for image export.

    Returns the rescaled matrix together with (dmin, dmax) so the mapping
    can be recorded and inverted.
    """
    dmin = float(scene.d.min())
    dmax = float(scene.d.max())
    span = dmax - dmin
    if span == 0:
        return np.zeros_like(scene.d), dmin, dmax
    return (scene.d - dmin) / span, dmin, dmax


def with_seed(config: SynthConfig, seed: int) -> SynthConfig:
    return replace(config, seed=seed)
