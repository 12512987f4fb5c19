"""Image manifests and batch feature extraction."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import ExtractionConfig, extract_all, feature_names
from .imaging import load_pgm, minmax_normalize, preprocess

__all__ = ["ManifestRow", "Manifest", "ManifestError", "load_manifest", "extract_rows"]


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestRow:
    image: Path
    mask: Path | None
    label: str


@dataclass(frozen=True)
class Manifest:
    rows: tuple[ManifestRow, ...]

    @property
    def label_names(self) -> tuple[str, ...]:
        return tuple(sorted({r.label for r in self.rows if r.label}))

    def label_ids(self) -> np.ndarray:
        index = {name: i for i, name in enumerate(self.label_names)}
        return np.array([index[r.label] for r in self.rows], dtype=np.int64)


def load_manifest(path, check_files: bool = True) -> Manifest:
    """Read ``image,mask,label`` rows; relative paths resolve against the manifest."""
    path = Path(path)
    base = path.parent
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ManifestError(f"{path}: empty manifest")
    header = [h.strip().lower() for h in rows[0]]
    if "image" not in header:
        raise ManifestError(f"{path}: header must contain an 'image' column")
    col = {name: header.index(name) for name in ("image", "mask", "label") if name in header}
    out, missing = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or not any(c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ManifestError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
        image = base / row[col["image"]].strip()
        mask_raw = row[col["mask"]].strip() if "mask" in col else ""
        mask = base / mask_raw if mask_raw else None
        label = row[col["label"]].strip() if "label" in col else ""
        for p in (image, mask):
            if check_files and p is not None and not p.is_file():
                missing.append(str(p))
        out.append(ManifestRow(image, mask, label))
    if missing:
        raise FileNotFoundError("missing file(s): " + ", ".join(missing))
    return Manifest(tuple(out))


def extract_one(row: ManifestRow, cfg: ExtractionConfig) -> np.ndarray:
    img = load_pgm(row.image)
    if row.mask is not None:
        mask = load_pgm(row.mask) > 0.5
    else:
        mask = preprocess(img, cfg.blur_sigma)["mask"]
    return extract_all(minmax_normalize(img), mask, cfg).values


def extract_rows(manifest: Manifest, cfg: ExtractionConfig | None = None, jobs: int = 1):
    """Feature matrix for every row, in manifest order.

    Returns ``(names, matrix, failures)`` where ``failures`` maps row index to
    an error message; failed rows are left as NaN in ``matrix``.
    """
    cfg = cfg or ExtractionConfig()
    names = feature_names(cfg)
    matrix = np.full((len(manifest.rows), len(names)), np.nan)
    failures: dict[int, str] = {}

    def work(i):
        try:
            return i, extract_one(manifest.rows[i], cfg), None
        except Exception as exc:  # collected and reported per file
            return i, None, f"{manifest.rows[i].image}: {exc}"

    indices = range(len(manifest.rows))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, indices))
    else:
        results = [work(i) for i in indices]
    for i, values, err in results:
        if err is None:
            matrix[i] = values
        else:
            failures[i] = err
    return names, matrix, failures
