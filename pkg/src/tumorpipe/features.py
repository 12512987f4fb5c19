"""Intensity, shape, and co-occurrence texture descriptors of a masked region."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FeatureVector",
    "GlcmMatrix",
    "ExtractionConfig",
    "INTENSITY_NAMES",
    "SHAPE_NAMES",
    "TEXTURE_NAMES",
    "intensity_features",
    "quantize",
    "glcm",
    "texture_features",
    "shape_features",
    "extract_all",
    "feature_names",
]

INTENSITY_NAMES = ("mean", "variance", "std", "median", "skewness", "kurtosis")
SHAPE_NAMES = ("area", "perimeter", "circularity", "irregularity", "shape_index")
TEXTURE_NAMES = (
    "contrast",
    "correlation",
    "entropy",
    "energy",
    "homogeneity",
    "cluster_shade",
    "sum_sq_variance",
)


@dataclass(frozen=True)
class FeatureVector:
    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", values)
        if len(self.names) != len(values):
            raise ValueError("names and values differ in length")
        if len(set(self.names)) != len(self.names):
            raise ValueError("feature names must be unique")
        if not np.all(np.isfinite(values)):
            bad = [n for n, v in zip(self.names, values) if not math.isfinite(v)]
            raise ValueError(f"non-finite feature values: {bad}")

    def __len__(self):
        return len(self.names)

    def as_dict(self):
        return dict(zip(self.names, self.values.tolist()))

    def prefixed(self, prefix):
        return FeatureVector(tuple(prefix + n for n in self.names), self.values)

    @staticmethod
    def concat(parts):
        names = tuple(n for p in parts for n in p.names)
        values = np.concatenate([p.values for p in parts]) if parts else np.zeros(0)
        return FeatureVector(names, values)


@dataclass(frozen=True)
class GlcmMatrix:
    levels: int
    probs: np.ndarray
    offset: tuple[int, int]


@dataclass(frozen=True)
class ExtractionConfig:
    """GLCM settings; one texture block of 7 features per (levels, distance)."""

    levels: tuple[int, ...] = (8,)
    distances: tuple[int, ...] = (1,)
    blur_sigma: float = 1.0

    def __post_init__(self):
        if not self.levels or not self.distances:
            raise ValueError("need at least one level count and one distance")
        for lv in self.levels:
            if not 2 <= lv <= 256:
                raise ValueError(f"levels must lie in [2, 256], got {lv}")
        for d in self.distances:
            if d < 1:
                raise ValueError(f"distance must be >= 1, got {d}")


def _region(img, mask):
    img = np.asarray(img, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if img.shape != mask.shape:
        raise ValueError(f"image {img.shape} and mask {mask.shape} differ in shape")
    if not mask.any():
        raise ValueError("empty region mask")
    return img, mask


def intensity_features(img: np.ndarray, mask: np.ndarray) -> FeatureVector:
    """Moments of the masked pixels.

    Variance is the population variance; kurtosis is non-excess.  Skewness and
    kurtosis are 0 for a constant region, and the median of an even count is
    the lower-middle element.
    """
    img, mask = _region(img, mask)
    x = img[mask]
    n = x.size
    mean = x.sum() / n
    d = x - mean
    m2 = np.dot(d, d) / n
    if m2 > 0:
        m3 = np.sum(d**3) / n
        m4 = np.sum(d**4) / n
        skew = m3 / m2**1.5
        kurt = m4 / m2**2
    else:
        skew = kurt = 0.0
    median = np.sort(x)[(n - 1) // 2]
    return FeatureVector(
        INTENSITY_NAMES, np.array([mean, m2, math.sqrt(m2), median, skew, kurt])
    )


def quantize(img: np.ndarray, levels: int) -> np.ndarray:
    """Uniform bins over [0, 1]; values outside are clipped first."""
    q = np.floor(np.clip(img, 0.0, 1.0) * levels).astype(np.int64)
    return np.minimum(q, levels - 1)


def _shifted_pairs(arr, dy, dx):
    """Views (a, b) such that b[k] sits at offset (dy, dx) from a[k]."""
    h, w = arr.shape
    r0, r1 = max(0, -dy), min(h, h - dy)
    c0, c1 = max(0, -dx), min(w, w - dx)
    if r0 >= r1 or c0 >= c1:
        empty = arr[0:0, 0:0]
        return empty, empty
    return arr[r0:r1, c0:c1], arr[r0 + dy:r1 + dy, c0 + dx:c1 + dx]


def glcm(img: np.ndarray, mask: np.ndarray, levels: int = 8, offset=(0, 1)) -> GlcmMatrix:
    """Symmetric, normalized co-occurrence matrix over in-mask pixel pairs."""
    if not 2 <= levels <= 256:
        raise ValueError(f"levels must lie in [2, 256], got {levels}")
    dy, dx = (int(v) for v in offset)
    if dy == 0 and dx == 0:
        raise ValueError("GLCM offset must be nonzero")
    img, mask = _region(img, mask)
    q = quantize(img, levels)
    qa, qb = _shifted_pairs(q, dy, dx)
    ma, mb = _shifted_pairs(mask, dy, dx)
    both = ma & mb
    if not both.any():
        raise ValueError("empty GLCM: no pixel pair inside the mask")
    codes = qa[both] * levels + qb[both]
    counts = np.bincount(codes, minlength=levels * levels).reshape(levels, levels)
    counts = counts + counts.T
    return GlcmMatrix(levels, counts / counts.sum(), (dy, dx))


def texture_features(g: GlcmMatrix) -> FeatureVector:
    p = np.asarray(g.probs, dtype=np.float64)
    n = p.shape[0]
    i, j = np.indices((n, n), dtype=np.float64)
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    levels = np.arange(n, dtype=np.float64)
    mu_x = np.dot(levels, px)
    mu_y = np.dot(levels, py)
    var_x = np.dot((levels - mu_x) ** 2, px)
    var_y = np.dot((levels - mu_y) ** 2, py)
    sig = math.sqrt(var_x) * math.sqrt(var_y)

    contrast = np.sum((i - j) ** 2 * p)
    correlation = np.sum((i - mu_x) * (j - mu_y) * p) / sig if sig > 0 else 0.0
    nz = p[p > 0]
    entropy = -np.sum(nz * np.log2(nz)) + 0.0
    energy = np.sum(p * p)
    homogeneity = np.sum(p / (1.0 + np.abs(i - j)))
    shade = np.sum((i + j - mu_x - mu_y) ** 3 * p)
    ssv = np.sum((i - mu_x) ** 2 * p)
    return FeatureVector(
        TEXTURE_NAMES,
        np.array([contrast, correlation, entropy, energy, homogeneity, shade, ssv]),
    )


def shape_features(mask: np.ndarray) -> FeatureVector:
    """Area, exposed-edge perimeter, and the ratios derived from them.

    The perimeter counts every side of a region pixel that touches a
    non-region pixel or the image border.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("empty region mask")
    area = float(mask.sum())
    padded = np.pad(mask, 1, constant_values=False)
    core = padded[1:-1, 1:-1]
    perimeter = 0
    for sl in (
        padded[:-2, 1:-1],
        padded[2:, 1:-1],
        padded[1:-1, :-2],
        padded[1:-1, 2:],
    ):
        perimeter += int(np.count_nonzero(core & ~sl))
    perimeter = float(perimeter)
    circularity = 4.0 * math.pi * area / perimeter**2
    return FeatureVector(
        SHAPE_NAMES,
        np.array(
            [
                area,
                perimeter,
                circularity,
                1.0 / circularity,
                perimeter / (4.0 * math.sqrt(area)),
            ]
        ),
    )


def _angle_offsets(distance):
    # 0, 45, 90, 135 degrees as (dy, dx) with rows growing downward
    d = distance
    return ((0, d), (-d, d), (-d, 0), (-d, -d))


def texture_block(img, mask, levels, distance) -> FeatureVector:
    """Texture features averaged over the four standard angles.

    Angles without any in-mask pair are skipped; if none has a pair the
    empty-GLCM error propagates.
    """
    rows = []
    last_err = None
    for off in _angle_offsets(distance):
        try:
            rows.append(texture_features(glcm(img, mask, levels, off)).values)
        except ValueError as exc:
            if "empty GLCM" not in str(exc):
                raise
            last_err = exc
    if not rows:
        raise last_err
    names = tuple(f"glcm{levels}_d{distance}_{n}" for n in TEXTURE_NAMES)
    return FeatureVector(names, np.mean(rows, axis=0))


def feature_names(cfg: ExtractionConfig | None = None) -> tuple[str, ...]:
    cfg = cfg or ExtractionConfig()
    names = [f"intensity_{n}" for n in INTENSITY_NAMES]
    names += [f"shape_{n}" for n in SHAPE_NAMES]
    for lv in cfg.levels:
        for d in cfg.distances:
            names += [f"glcm{lv}_d{d}_{n}" for n in TEXTURE_NAMES]
    return tuple(names)


def extract_all(img: np.ndarray, mask: np.ndarray, cfg: ExtractionConfig | None = None) -> FeatureVector:
    """Intensity (6) + shape (5) + 7 texture features per GLCM setting."""
    cfg = cfg or ExtractionConfig()
    parts = [
        intensity_features(img, mask).prefixed("intensity_"),
        shape_features(mask).prefixed("shape_"),
    ]
    for lv in cfg.levels:
        for d in cfg.distances:
            parts.append(texture_block(img, mask, lv, d))
    return FeatureVector.concat(parts)
