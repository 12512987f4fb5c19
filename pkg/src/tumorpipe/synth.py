"""Seeded synthetic data: textured blob images and planted-feature matrices."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import LabeledDataset
from .imaging import write_pgm

__all__ = ["BlobParams", "class_params", "render_blob", "write_synthetic_set", "planted_dataset"]


@dataclass(frozen=True)
class BlobParams:
    mean: float
    period: float
    aspect: float


def class_params(cls: int, n_classes: int, separation: float) -> BlobParams:
    """Per-class blob statistics; ``separation = 0`` makes every class identical."""
    centred = cls - (n_classes - 1) / 2.0
    return BlobParams(
        mean=0.55 + 0.12 * separation * centred,
        period=4.0 + 3.0 * separation * cls,
        aspect=1.0 + 0.5 * separation * cls,
    )


def render_blob(params: BlobParams, rng: np.random.Generator, size: int = 64, noise: float = 0.04):
    """Return ``(image, mask)`` for one elliptical striped blob on a dark background."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    cy = size / 2 + rng.uniform(-size / 16, size / 16)
    cx = size / 2 + rng.uniform(-size / 16, size / 16)
    r0 = rng.uniform(0.18, 0.24) * size
    theta = rng.uniform(0, math.pi)
    ry = r0 / math.sqrt(params.aspect)
    rx = r0 * math.sqrt(params.aspect)
    u = (xx - cx) * math.cos(theta) + (yy - cy) * math.sin(theta)
    v = -(xx - cx) * math.sin(theta) + (yy - cy) * math.cos(theta)
    mask = (u / rx) ** 2 + (v / ry) ** 2 <= 1.0

    phi = rng.uniform(0, math.pi)
    phase = rng.uniform(0, 2 * math.pi)
    stripes = np.sin(2 * math.pi * (xx * math.cos(phi) + yy * math.sin(phi)) / params.period + phase)
    img = np.full((size, size), 0.15)
    img[mask] = params.mean + 0.12 * stripes[mask]
    img += rng.normal(0.0, noise, img.shape)
    return np.clip(img, 0.0, 1.0), mask


def write_synthetic_set(
    out_dir,
    n_classes: int = 3,
    per_class: int = 40,
    separation: float = 1.0,
    seed: int = 0,
    size: int = 64,
) -> Path:
    """Write PGM images, masks, and ``manifest.csv``; returns the manifest path."""
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    if per_class < 1:
        raise ValueError("need at least one image per class")
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    rows = []
    for cls in range(n_classes):
        params = class_params(cls, n_classes, separation)
        for i in range(per_class):
            rng = np.random.default_rng([seed, cls, i])
            img, mask = render_blob(params, rng, size)
            stem = f"class{cls}_{i:04d}.pgm"
            write_pgm(out / "images" / stem, img)
            write_pgm(out / "masks" / stem, mask.astype(np.float64))
            rows.append((f"images/{stem}", f"masks/{stem}", f"class{cls}"))
    manifest = out / "manifest.csv"
    with open(manifest, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["image", "mask", "label"])
        w.writerows(rows)
    return manifest


def planted_dataset(
    seed: int,
    n_features: int = 60,
    n_informative: int = 6,
    n_classes: int = 3,
    per_class: int = 30,
    shift: float = 4.0,
) -> tuple[LabeledDataset, np.ndarray]:
    """Gaussian noise columns plus informative ones at random positions.

    Informative column ``j`` is shifted by ``shift`` for class ``j mod c``.
    Returns the dataset and the sorted informative column indices.
    """
    rng = np.random.default_rng(seed)
    cols = rng.permutation(n_features)[:n_informative]
    labels = np.repeat(np.arange(n_classes), per_class)
    X = rng.normal(size=(labels.size, n_features))
    for j, col in enumerate(cols):
        X[labels == j % n_classes, col] += shift
    names = tuple(f"f{i:02d}" for i in range(n_features))
    return LabeledDataset(X, labels, names), np.sort(cols)
