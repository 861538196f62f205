"""Frame stacks and grayscale image I/O.

A sequence is an (n, h, w) float64 stack with intensities nominally in
[0, 1] for image data. The matrix view places one vectorized frame per
column (C-order flattening), which is the layout every solver works on.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


class FrameLoadError(RuntimeError):
    """Input directory does not yield a usable frame sequence."""


@dataclass(frozen=True)
class FrameSequence:
    frames: np.ndarray  # (n, h, w) float64

    def __post_init__(self):
        a = np.asarray(self.frames, dtype=np.float64)
        if a.ndim != 3 or a.shape[0] < 1:
            raise ValueError("frames must be a nonempty (n, h, w) stack")
        if not np.isfinite(a).all():
            raise ValueError("frames contain non-finite values")
        object.__setattr__(self, "frames", a)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    @property
    def frame_shape(self) -> tuple[int, int]:
        return self.frames.shape[1], self.frames.shape[2]

    @property
    def pixels_per_frame(self) -> int:
        return self.height * self.width

    def frame(self, j: int) -> np.ndarray:
        return self.frames[j]

    def to_matrix(self) -> np.ndarray:
        """(m, n) matrix with frame j vectorized into column j."""
        n = self.n_frames
        return self.frames.reshape(n, -1).T.copy()

    @staticmethod
    def from_matrix(d: np.ndarray, frame_shape: tuple[int, int] | None = None
                    ) -> "FrameSequence":
        """Inverse of :meth:`to_matrix`; columns default to (m, 1) frames."""
        d = np.asarray(d, dtype=np.float64)
        if d.ndim != 2:
            raise ValueError("matrix must be 2-D")
        m, n = d.shape
        h, w = (m, 1) if frame_shape is None else frame_shape
        if h * w != m:
            raise ValueError(f"frame_shape {frame_shape} does not match {m} pixels")
        return FrameSequence(d.T.reshape(n, h, w))


FRAME_EXTENSIONS = (".png", ".pgm")


def load_frames(directory) -> FrameSequence:
    """Load all PNG/PGM frames in *directory*, lexicographic name order.

    Color images are converted to luma (0.299 R + 0.587 G + 0.114 B);
    intensities are normalized to [0, 1].
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FrameLoadError(f"{directory} is not a directory")
    paths = sorted(p for p in directory.iterdir()
                   if p.suffix.lower() in FRAME_EXTENSIONS)
    if not paths:
        raise FrameLoadError(f"no {'/'.join(FRAME_EXTENSIONS)} frames in {directory}")
    frames = []
    shape = None
    for p in paths:
        try:
            with Image.open(p) as img:
                gray = img.convert("L")
                arr = np.asarray(gray, dtype=np.float64) / 255.0
        except Exception as exc:
            raise FrameLoadError(f"cannot read frame {p}: {exc}") from exc
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise FrameLoadError(
                f"frame {p.name} has shape {arr.shape}, expected {shape}")
        frames.append(arr)
    return FrameSequence(np.stack(frames))


def save_gray(path, image: np.ndarray) -> None:
    """Write a [0, 1] float image as 8-bit grayscale PNG (values clipped)."""
    arr = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    Image.fromarray(np.round(arr * 255.0).astype(np.uint8), mode="L").save(path)


def save_mask(path, mask: np.ndarray) -> None:
    """Write a boolean mask as 0/255 grayscale PNG."""
    arr = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def load_mask(path) -> np.ndarray:
    """Read a 0/255 mask PNG back to boolean (threshold at mid-gray)."""
    with Image.open(path) as img:
        return np.asarray(img.convert("L")) > 127
