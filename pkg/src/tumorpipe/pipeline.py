"""Pipeline configuration and the fitted scaling -> selection -> reduction -> SVM chain."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import LabeledDataset
from .features import ExtractionConfig
from .reduce import LdaModel, PcaModel, lda_fit, lda_transform, pca_fit, pca_transform
from .selection import (
    ColumnScaling,
    SelectionReport,
    forward_select,
    make_cv_evaluator,
    normalize_columns,
    svm_rfe,
)
from .svm import KernelSpec, SvmMulticlassModel, train_multiclass

__all__ = [
    "ConfigError",
    "PipelineConfig",
    "FittedPipeline",
    "fit_pipeline",
    "parse_config",
    "load_config",
    "PIPELINES",
    "SELECTIONS",
]

PIPELINES = ("svm-only", "pca+svm", "lda+svm", "pca+lda+svm")
SELECTIONS = ("none", "forward", "rfe")


class ConfigError(ValueError):
    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


@dataclass(frozen=True)
class PipelineConfig:
    pipeline: str = "pca+lda+svm"
    selection: str = "none"
    kernel: str = "linear"
    gamma: float = 1.0
    degree: int = 3
    coef: float = 1.0
    C: float = 10.0
    tol: float = 1e-3
    levels: tuple[int, ...] = (8,)
    distances: tuple[int, ...] = (1,)
    d: int = 0  # LDA output dims; 0 means classes - 1
    variance_fraction: float = 0.9999
    p_cutoff: float = 0.1
    rfe_target: int = 10
    k: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"pipeline must be one of {', '.join(PIPELINES)}; got {self.pipeline!r}", "pipeline")
        if self.selection not in SELECTIONS:
            raise ConfigError(f"selection must be one of {', '.join(SELECTIONS)}; got {self.selection!r}", "selection")
        try:
            self.kernel_spec()
        except ValueError as exc:
            raise ConfigError(str(exc), "kernel") from None
        try:
            self.extraction()
        except ValueError as exc:
            raise ConfigError(str(exc), "levels") from None
        checks = [
            ("C", self.C > 0),
            ("tol", self.tol > 0),
            ("d", self.d >= 0),
            ("variance_fraction", 0 < self.variance_fraction <= 1),
            ("p_cutoff", 0 < self.p_cutoff <= 1),
            ("rfe_target", self.rfe_target >= 1),
            ("k", self.k >= 2),
        ]
        for key, ok in checks:
            if not ok:
                raise ConfigError(f"invalid value for {key}: {getattr(self, key)!r}", key)

    @property
    def uses_pca(self):
        return self.pipeline in ("pca+svm", "pca+lda+svm")

    @property
    def uses_lda(self):
        return self.pipeline in ("lda+svm", "pca+lda+svm")

    def kernel_spec(self) -> KernelSpec:
        return KernelSpec(self.kernel, int(self.degree), float(self.coef), float(self.gamma))

    def extraction(self) -> ExtractionConfig:
        return ExtractionConfig(tuple(self.levels), tuple(self.distances))

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_FIELD_TYPES = {f.name: f for f in dataclasses.fields(PipelineConfig)}


def _coerce(key, raw):
    default = getattr(PipelineConfig(), key)
    try:
        if isinstance(default, tuple):
            return tuple(int(x) for x in raw.replace(" ", "").split(",") if x)
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"invalid value for {key}: {raw!r}", key) from None


def parse_config(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r} (line {lineno})", key)
        values[key] = _coerce(key, raw)
    return dataclasses.replace(base or PipelineConfig(), **values)


def load_config(path) -> PipelineConfig:
    return parse_config(Path(path).read_text())


@dataclass(frozen=True)
class FittedPipeline:
    config: PipelineConfig
    feature_names: tuple[str, ...]
    label_names: tuple[str, ...]
    scaling: ColumnScaling
    svm: SvmMulticlassModel
    selected: np.ndarray | None = None
    pca: PcaModel | None = None
    lda: LdaModel | None = None
    selection_report: SelectionReport | None = field(default=None, compare=False)

    @property
    def n_features(self):
        return len(self.feature_names)

    def project(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        Z = self.scaling.apply(X)
        if self.selected is not None:
            Z = Z[:, self.selected]
        if self.pca is not None:
            Z = pca_transform(self.pca, Z)
        if self.lda is not None:
            Z = lda_transform(self.lda, Z)
        return Z

    def decision_function(self, X) -> np.ndarray:
        return self.svm.decision_function(self.project(X))

    def predict(self, X) -> np.ndarray:
        return self.svm.predict(self.project(X))


def select_features(ds: LabeledDataset, config: PipelineConfig) -> SelectionReport | None:
    """Run the configured selection on an already scaled dataset."""
    if config.selection == "forward":
        evaluator = make_cv_evaluator(
            k=config.k, seed=config.seed, kernel=config.kernel_spec(), C=config.C, tol=config.tol
        )
        return forward_select(ds, evaluator, p_cutoff=config.p_cutoff)
    if config.selection == "rfe":
        target = min(config.rfe_target, ds.n_features)
        return svm_rfe(ds, target, C=config.C, tol=config.tol, seed=config.seed)
    return None


def fit_pipeline(ds: LabeledDataset, config: PipelineConfig | None = None) -> FittedPipeline:
    """Fit every configured stage on ``ds`` alone."""
    config = config or PipelineConfig()
    if ds.classes.size < 2:
        raise ValueError("training needs at least two classes")
    scaled, scaling = normalize_columns(ds)
    report = select_features(scaled, config)
    selected = None
    if report is not None:
        selected = np.asarray(report.kept, dtype=np.int64)
        if selected.size == 0:
            # nothing passed the filter; fall back to every column
            selected = np.arange(ds.n_features, dtype=np.int64)
    elif config.pipeline != "svm-only":
        selected = np.arange(ds.n_features, dtype=np.int64)

    Z = scaled.matrix if selected is None else scaled.matrix[:, selected]
    pca = lda = None
    if config.uses_pca:
        pca = pca_fit(Z, float(config.variance_fraction))
        Z = pca_transform(pca, Z)
    if config.uses_lda:
        lda = lda_fit(Z, ds.labels, config.d or None)
        Z = lda_transform(lda, Z)
    svm = train_multiclass(Z, ds.labels, config.kernel_spec(), config.C, config.tol, config.seed)
    return FittedPipeline(
        config=config,
        feature_names=ds.feature_names,
        label_names=ds.label_names or tuple(str(c) for c in range(ds.n_classes)),
        scaling=scaling,
        svm=svm,
        selected=selected,
        pca=pca,
        lda=lda,
        selection_report=report,
    )
