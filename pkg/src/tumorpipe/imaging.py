"""Grayscale image I/O and the preprocessing chain (blur, edges, segmentation).

Images are plain 2-D ``float64`` numpy arrays indexed ``[row, col]``; region
masks are boolean arrays of the same shape.
"""

from __future__ import annotations

import math
from fractions import Fraction
from pathlib import Path

import numpy as np

__all__ = [
    "PgmError",
    "load_pgm",
    "parse_pgm",
    "write_pgm",
    "minmax_normalize",
    "gaussian_kernel",
    "gaussian_blur",
    "sobel_edges",
    "otsu_threshold",
    "threshold_segment",
    "preprocess",
]

OTSU_BINS = 256


class PgmError(ValueError):
    """Malformed or unsupported PGM data; ``offset`` is the byte position."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class _HeaderReader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def _skip_space(self):
        data = self.data
        while self.pos < len(data):
            ch = data[self.pos]
            if ch == ord("#"):
                while self.pos < len(data) and data[self.pos] not in (10, 13):
                    self.pos += 1
            elif chr(ch).isspace():
                self.pos += 1
            else:
                return

    def token(self, what):
        self._skip_space()
        start = self.pos
        while self.pos < len(self.data):
            ch = self.data[self.pos]
            if chr(ch).isspace() or ch == ord("#"):
                break
            self.pos += 1
        if start == self.pos:
            raise PgmError(f"malformed header: missing {what}", start)
        return self.data[start:self.pos], start

    def integer(self, what):
        tok, start = self.token(what)
        if not tok.isdigit():
            raise PgmError(f"malformed header: {what} is not an integer", start)
        return int(tok), start


def parse_pgm(data: bytes) -> np.ndarray:
    """Decode P2 (ASCII) or P5 (binary) graymap bytes into a [0, 1] image."""
    if len(data) < 2:
        raise PgmError("truncated header", len(data))
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise PgmError(f"unsupported magic number {magic!r}", 0)
    reader = _HeaderReader(data)
    reader.pos = 2
    width, off = reader.integer("width")
    if width == 0:
        raise PgmError("invalid width", off)
    height, off = reader.integer("height")
    if height == 0:
        raise PgmError("invalid height", off)
    maxval, off = reader.integer("maxval")
    if maxval == 0 or maxval > 65535:
        raise PgmError("invalid maxval", off)
    count = width * height

    if magic == b"P5":
        if reader.pos >= len(data) or not chr(data[reader.pos]).isspace():
            raise PgmError("malformed header: expected whitespace after maxval", reader.pos)
        start = reader.pos + 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = count * dtype.itemsize
        if len(data) - start < need:
            raise PgmError(
                f"truncated payload: expected {need} bytes, found {len(data) - start}",
                len(data),
            )
        raw = np.frombuffer(data, dtype=dtype, count=count, offset=start)
    else:
        values = []
        for _ in range(count):
            try:
                v, off = reader.integer("pixel value")
            except PgmError as exc:
                if reader.pos >= len(data):
                    raise PgmError(
                        f"truncated payload: expected {count} values, found {len(values)}",
                        len(data),
                    ) from None
                raise exc
            values.append(v)
        raw = np.asarray(values, dtype=np.int64)
    if raw.max() > maxval:
        raise PgmError("pixel value exceeds maxval", reader.pos)
    return raw.astype(np.float64).reshape(height, width) / maxval


def load_pgm(path) -> np.ndarray:
    return parse_pgm(Path(path).read_bytes())


def write_pgm(path, img: np.ndarray, maxval: int = 255) -> None:
    """Write a [0, 1] image as binary P5, rounding to ``maxval`` levels."""
    arr = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    q = np.rint(arr * maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    h, w = arr.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + q.astype(dtype).tobytes())


def minmax_normalize(img: np.ndarray) -> np.ndarray:
    """Affinely map ``img`` onto [0, 1]; a constant image maps to all zeros."""
    img = np.asarray(img, dtype=np.float64)
    if img.size == 0:
        raise ValueError("cannot normalize an empty image")
    lo, hi = img.min(), img.max()
    if hi == lo:
        return np.zeros_like(img)
    out = (img - lo) / (hi - lo)
    # guard the endpoints against rounding
    out[img == lo] = 0.0
    out[img == hi] = 1.0
    return out


def gaussian_kernel(sigma: float) -> np.ndarray:
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = math.ceil(3 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _convolve_axis(img, kernel, axis):
    radius = len(kernel) // 2
    n = img.shape[axis]
    out = np.zeros_like(img)
    idx = np.arange(n)
    for t, weight in enumerate(kernel):
        src = np.clip(idx + t - radius, 0, n - 1)
        out += weight * np.take(img, src, axis=axis)
    return out


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur, radius ``ceil(3 sigma)``, clamped borders."""
    kernel = gaussian_kernel(sigma)
    img = np.asarray(img, dtype=np.float64)
    out = _convolve_axis(_convolve_axis(img, kernel, 0), kernel, 1)
    # convex combinations cannot leave the input range; clip the rounding
    return np.clip(out, img.min(), img.max())


def sobel_edges(img: np.ndarray) -> np.ndarray:
    """Normalized Sobel gradient magnitude; border pixels are zero."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    if h < 3 or w < 3:
        raise ValueError(f"Sobel needs at least 3x3 pixels, got {h}x{w}")
    p = img
    gx = (
        (p[:-2, 2:] + 2 * p[1:-1, 2:] + p[2:, 2:])
        - (p[:-2, :-2] + 2 * p[1:-1, :-2] + p[2:, :-2])
    )
    gy = (
        (p[2:, :-2] + 2 * p[2:, 1:-1] + p[2:, 2:])
        - (p[:-2, :-2] + 2 * p[:-2, 1:-1] + p[:-2, 2:])
    )
    mag = np.zeros_like(img)
    mag[1:-1, 1:-1] = np.hypot(gx, gy)
    return minmax_normalize(mag)


def _histogram(img):
    bins = np.minimum((np.clip(img, 0.0, 1.0) * OTSU_BINS).astype(np.int64), OTSU_BINS - 1)
    return bins, np.bincount(bins.ravel(), minlength=OTSU_BINS)


def otsu_threshold(img: np.ndarray) -> int | None:
    """Return the Otsu bin index ``t`` (foreground = bins above ``t``).

    Only thresholds leaving both classes non-empty are considered; ``None``
    means the image occupies a single histogram bin.
    """
    _, hist = _histogram(np.asarray(img, dtype=np.float64))
    total = int(hist.sum())
    n0 = np.cumsum(hist)
    n1 = total - n0
    s0 = np.cumsum(hist * np.arange(OTSU_BINS, dtype=np.int64))
    # N^2 * between-class variance * N0 * N1 = (S_total*N0 - S0*N)^2, exact in int64
    d = s0[-1] * n0 - s0 * total
    diff = d.astype(np.float64)
    valid = (n0 > 0) & (n1 > 0)
    if not valid.any():
        return None
    score = np.full(OTSU_BINS, -np.inf)
    score[valid] = diff[valid] ** 2 / (n0[valid].astype(np.float64) * n1[valid])
    # float rounding can reorder near-ties; settle them with exact rationals
    near = np.flatnonzero(score >= score.max() * (1 - 1e-9))
    exact = [Fraction(int(d[t]) ** 2, int(n0[t]) * int(n1[t])) for t in near]
    return int(near[exact.index(max(exact))])


def threshold_segment(img: np.ndarray) -> np.ndarray:
    """Otsu segmentation; never returns an empty mask."""
    img = np.asarray(img, dtype=np.float64)
    bins, _ = _histogram(img)
    t = otsu_threshold(img)
    mask = bins > t if t is not None else np.zeros(img.shape, dtype=bool)
    if not mask.any():
        mask = np.zeros(img.shape, dtype=bool)
        mask.flat[int(np.argmax(img))] = True
    return mask


def preprocess(img: np.ndarray, sigma: float = 1.0) -> dict[str, np.ndarray]:
    """Run normalize -> blur -> edges -> segment and return every stage."""
    original = np.asarray(img, dtype=np.float64)
    normalized = minmax_normalize(original)
    blurred = gaussian_blur(normalized, sigma)
    edges = sobel_edges(blurred) if min(blurred.shape) >= 3 else np.zeros_like(blurred)
    mask = threshold_segment(minmax_normalize(blurred))
    return {
        "original": original,
        "normalized": normalized,
        "blurred": blurred,
        "edges": edges,
        "mask": mask,
    }
