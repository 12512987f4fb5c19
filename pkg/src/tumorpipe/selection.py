"""Feature ranking and subset selection.

Two routes are offered: a t-test filter followed by a greedy forward
wrapper, and SVM recursive feature elimination (backward, one feature per
step).
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dataset import LabeledDataset, format_real, stratified_folds
from .stats import pooled_ttest
from .svm import ConvergenceError, KernelSpec, train_binary, train_multiclass

__all__ = [
    "ColumnScaling",
    "normalize_columns",
    "SelectionStep",
    "SelectionReport",
    "SelectionError",
    "ttest_rank",
    "pairwise_min_pvalues",
    "forward_select",
    "make_cv_evaluator",
    "svm_rfe",
]

Evaluator = Callable[[LabeledDataset, list], float]


@dataclass(frozen=True)
class ColumnScaling:
    """Per-column min-max map fitted on training data; extrapolates freely."""

    mins: np.ndarray
    maxs: np.ndarray

    def apply(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.mins.size:
            raise ValueError(f"expected {self.mins.size} features, got {X.shape[1]}")
        span = self.maxs - self.mins
        out = np.zeros_like(X)
        ok = span > 0
        out[:, ok] = (X[:, ok] - self.mins[ok]) / span[ok]
        return out


def normalize_columns(ds: LabeledDataset) -> tuple[LabeledDataset, ColumnScaling]:
    mins = ds.matrix.min(axis=0) if ds.n_samples else np.zeros(ds.n_features)
    maxs = ds.matrix.max(axis=0) if ds.n_samples else np.zeros(ds.n_features)
    scaling = ColumnScaling(mins.copy(), maxs.copy())
    scaled = LabeledDataset(scaling.apply(ds.matrix), ds.labels, ds.feature_names, ds.label_names)
    return scaled, scaling


@dataclass(frozen=True)
class SelectionStep:
    step: int
    feature: int
    score: float
    p: float
    error: float


@dataclass
class SelectionReport:
    """Outcome of a selection run.

    ``kept`` lists the retained column indices.  For elimination runs,
    ``eliminated`` holds the removal order, so ``ranking`` puts the last
    removed feature right after the survivors.
    """

    method: str
    kept: list[int]
    scores: np.ndarray
    p_values: np.ndarray | None = None
    history: list[SelectionStep] = field(default_factory=list)
    feature_names: tuple[str, ...] = ()
    eliminated: list[int] = field(default_factory=list)
    baseline_error: float | None = None
    diagnostic: str | None = None

    @property
    def ranking(self) -> list[int]:
        return list(self.kept) + list(reversed(self.eliminated))

    def _name(self, idx):
        if 0 <= idx < len(self.feature_names):
            return self.feature_names[idx]
        return str(idx)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "feature", "score", "p", "error"])
        for s in self.history:
            w.writerow([s.step, self._name(s.feature), format_real(s.score),
                        format_real(s.p), format_real(s.error)])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [f"selection method: {self.method}"]
        if self.diagnostic:
            lines.append(f"note: {self.diagnostic}")
        if self.baseline_error is not None:
            lines.append(f"baseline error: {format_real(self.baseline_error)}")
        lines.append(f"kept {len(self.kept)} feature(s):")
        for idx in self.kept:
            p = "" if self.p_values is None else f"  p={format_real(self.p_values[idx])}"
            lines.append(f"  [{idx:3d}] {self._name(idx)}  score={format_real(self.scores[idx])}{p}")
        if self.history:
            width = max(len(self._name(s.feature)) for s in self.history)
            width = max(width, len("feature"))
            lines.append(f"{'step':>4}  {'feature':<{width}}  {'score':>15}  {'p':>15}  {'error':>15}")
            for s in self.history:
                lines.append(
                    f"{s.step:>4}  {self._name(s.feature):<{width}}  {format_real(s.score):>15}"
                    f"  {format_real(s.p):>15}  {format_real(s.error):>15}"
                )
        return "\n".join(lines) + "\n"


class SelectionError(RuntimeError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


def _class_rows(ds, cls):
    rows = ds.matrix[ds.labels == cls]
    if rows.shape[0] < 2:
        raise ValueError(f"class {cls} has {rows.shape[0]} sample(s); the t-test needs >= 2")
    return rows


def ttest_rank(ds: LabeledDataset, class_a: int, class_b: int) -> SelectionReport:
    """Rank every feature by the pooled-variance t-test between two classes."""
    a = _class_rows(ds, class_a)
    b = _class_rows(ds, class_b)
    t = np.empty(ds.n_features)
    p = np.empty(ds.n_features)
    for f in range(ds.n_features):
        t[f], p[f], _ = pooled_ttest(a[:, f], b[:, f])
    order = np.argsort(p, kind="stable")
    return SelectionReport(
        method=f"t-test (class {class_a} vs {class_b})",
        kept=order.tolist(),
        scores=t,
        p_values=p,
        feature_names=ds.feature_names,
    )


def pairwise_min_pvalues(ds: LabeledDataset) -> tuple[np.ndarray, np.ndarray]:
    """Smallest p (and its t) over every class pair, per feature."""
    classes = ds.classes
    if classes.size < 2:
        raise ValueError("need at least two classes")
    best_p = np.ones(ds.n_features)
    best_t = np.zeros(ds.n_features)
    for ca, cb in itertools.combinations(classes.tolist(), 2):
        rep = ttest_rank(ds, ca, cb)
        better = rep.p_values < best_p
        best_p[better] = rep.p_values[better]
        best_t[better] = rep.scores[better]
    return best_t, best_p


def make_cv_evaluator(
    k: int = 5,
    seed: int = 0,
    kernel: KernelSpec | None = None,
    C: float = 10.0,
    tol: float = 1e-3,
) -> Evaluator:
    """Stratified k-fold misclassification rate of a one-vs-rest SVM.

    The returned callable takes ``(dataset, columns)``.  With no columns it
    scores a majority-class predictor.  ``k`` shrinks to the smallest class
    size when needed so every training fold sees every class.
    """
    kernel = kernel or KernelSpec()

    def evaluate(ds: LabeledDataset, columns) -> float:
        columns = list(columns)
        counts = np.bincount(ds.labels)
        k_eff = int(min(k, counts[counts > 0].min()))
        folds = stratified_folds(ds.labels, k_eff, seed)
        wrong = 0
        for f in range(k_eff):
            test = folds == f
            train = ~test
            y_train = ds.labels[train]
            if not columns:
                majority = np.bincount(y_train).argmax()
                wrong += int(np.sum(ds.labels[test] != majority))
                continue
            X = ds.matrix[:, columns]
            model = train_multiclass(X[train], y_train, kernel, C, tol, seed)
            wrong += int(np.sum(model.predict(X[test]) != ds.labels[test]))
        return wrong / ds.n_samples

    return evaluate


def forward_select(
    ds: LabeledDataset,
    evaluator: Evaluator | None = None,
    p_cutoff: float = 0.1,
    tol: float = 1e-6,
) -> SelectionReport:
    """t-test filter, then greedy forward addition by validation error.

    A feature is a candidate when some class pair separates it with
    ``p < p_cutoff``.  Each step adds the candidate with the lowest error;
    equal errors go to the smaller p, then the lower index.  The search stops
    once no candidate improves the error by more than ``tol``.
    """
    evaluator = evaluator or make_cv_evaluator()
    t, p = pairwise_min_pvalues(ds)
    candidates = [f for f in range(ds.n_features) if p[f] < p_cutoff]
    report = SelectionReport(
        method=f"forward (t-test p < {p_cutoff:g})",
        kept=[],
        scores=t,
        p_values=p,
        feature_names=ds.feature_names,
    )
    if not candidates:
        report.diagnostic = f"empty candidate pool: no feature has p < {p_cutoff:g}"
        return report

    current = evaluator(ds, [])
    report.baseline_error = current
    kept: list[int] = []
    step = 0
    while candidates and current > tol:
        best_f, best_key = None, None
        for f in candidates:
            key = (evaluator(ds, kept + [f]), p[f], f)
            if best_key is None or key < best_key:
                best_f, best_key = f, key
        best_err = best_key[0]
        if not best_err < current - tol:
            break
        step += 1
        kept.append(best_f)
        candidates.remove(best_f)
        current = best_err
        report.history.append(SelectionStep(step, best_f, float(t[best_f]), float(p[best_f]), best_err))
    report.kept = kept
    return report


def _ovr_fit(X, labels, classes, kernel, C, tol, seed, warm):
    """One machine per class (one for two classes) with optional warm starts."""
    targets = classes[1:] if len(classes) == 2 else classes
    machines, alphas = [], []
    for k, cls in enumerate(targets):
        y = np.where(labels == cls, 1.0, -1.0)
        alpha0 = None if warm is None else warm[k]
        m = train_binary(X, y, kernel, C, tol, seed, alpha0=alpha0)
        full = np.zeros(len(y))
        full[m.support_indices] = m.alphas
        machines.append(m)
        alphas.append(full)
    return machines, alphas


def _loo_bound(machines, X, labels, classes):
    # Jaakkola-Haussler style count of samples whose removal may flip them
    targets = classes[1:] if len(classes) == 2 else classes
    total = 0
    for m, cls in zip(machines, targets):
        y = np.where(labels == cls, 1.0, -1.0)
        alpha = np.zeros(len(y))
        alpha[m.support_indices] = m.alphas
        kdiag = np.einsum("ij,ij->i", X, X)
        total += int(np.sum(-y * m.decision_function(X) + alpha * kdiag >= 0))
    return total / (len(labels) * len(machines))


def svm_rfe(
    ds: LabeledDataset,
    target_count: int,
    C: float = 10.0,
    tol: float = 1e-3,
    seed: int = 0,
    criterion: str = "weight",
) -> SelectionReport:
    """Backward elimination driven by a linear SVM.

    Every step retrains on the surviving columns and drops the feature with
    the smallest squared weight (summed over one-vs-rest machines); ties drop
    the higher index.  ``criterion="loo_bound"`` instead retrains once per
    candidate and drops the feature whose removal gives the smallest
    leave-one-out error bound, which costs O(f^2) trainings.
    """
    if criterion not in ("weight", "loo_bound"):
        raise ValueError(f"unknown RFE criterion {criterion!r}")
    f = ds.n_features
    if not 1 <= target_count <= f:
        raise ValueError(f"target_count must lie in [1, {f}], got {target_count}")
    classes = ds.classes.tolist()
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    kernel = KernelSpec("linear")
    surviving = list(range(f))
    scores = np.full(f, np.nan)
    history: list[SelectionStep] = []
    eliminated: list[int] = []
    warm = None
    step = 0

    def fit(columns, warm_start):
        try:
            return _ovr_fit(ds.matrix[:, columns], ds.labels, classes, kernel, C, tol, seed, warm_start)
        except ConvergenceError as exc:
            raise SelectionError(f"SVM training failed at elimination step {step}: {exc}", step) from exc

    while len(surviving) > target_count:
        step += 1
        machines, warm = fit(surviving, warm)
        weight = np.sum([m.weights() ** 2 for m in machines], axis=0)
        if criterion == "weight":
            key = [(weight[pos], -surviving[pos]) for pos in range(len(surviving))]
            error = np.nan
        else:
            key = []
            for pos in range(len(surviving)):
                cols = surviving[:pos] + surviving[pos + 1:]
                m2, _ = fit(cols, warm)
                bound = _loo_bound(m2, ds.matrix[:, cols], ds.labels, classes)
                key.append((bound, weight[pos], -surviving[pos]))
        pos = min(range(len(surviving)), key=lambda i: key[i])
        feat = surviving.pop(pos)
        scores[feat] = weight[pos]
        error = key[pos][0] if criterion == "loo_bound" else np.nan
        eliminated.append(feat)
        history.append(SelectionStep(step, feat, float(weight[pos]), np.nan, float(error)))

    if eliminated:
        machines, _ = fit(surviving, warm)
        weight = np.sum([m.weights() ** 2 for m in machines], axis=0)
        scores[surviving] = weight
    return SelectionReport(
        method=f"svm-rfe ({criterion})",
        kept=sorted(surviving),
        scores=scores,
        history=history,
        feature_names=ds.feature_names,
        eliminated=eliminated,
    )
