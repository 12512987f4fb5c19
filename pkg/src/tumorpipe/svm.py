"""Kernel SVM trained on the dual problem with an SMO solver.

The dual solved here is

    max  sum_i a_i - 1/2 sum_ij y_i y_j a_i a_j K(x_i, x_j)
    s.t. sum_i a_i y_i = 0,  0 <= a_i <= C

and the decision function is ``f(x) = sum_i a_i y_i K(x_i, x) + b``.
Working pairs are the maximal KKT-violating pair; iteration stops once the
violation gap drops below ``tol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np

__all__ = [
    "KernelSpec",
    "SvmBinaryModel",
    "SvmMulticlassModel",
    "ConvergenceError",
    "kernel_eval",
    "train_binary",
    "decision_value",
    "kkt_violations",
    "dual_objective",
    "train_multiclass",
    "retrain_incremental",
]

_TAU = 1e-12


class ConvergenceError(ArithmeticError):
    def __init__(self, message, max_violation=math.nan, iterations=0):
        super().__init__(message)
        self.max_violation = max_violation
        self.iterations = iterations


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"
    degree: int = 3
    coef: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "poly", "rbf"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and not self.gamma > 0:
            raise ValueError("rbf gamma must be > 0")
        if self.kind == "poly" and self.degree < 1:
            raise ValueError("polynomial degree must be >= 1")

    def matrix(self, a, b):
        """Gram matrix ``K[i, j] = K(a[i], b[j])``."""
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        b = np.atleast_2d(np.asarray(b, dtype=np.float64))
        if a.shape[1] != b.shape[1]:
            raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
        dot = a @ b.T
        if self.kind == "linear":
            return dot
        if self.kind == "poly":
            return (dot + self.coef) ** self.degree
        sq = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * dot
        return np.exp(-self.gamma * np.maximum(sq, 0.0))

    def describe(self):
        if self.kind == "linear":
            return "linear"
        if self.kind == "poly":
            return f"poly(degree={self.degree}, coef={self.coef:g})"
        return f"rbf(gamma={self.gamma:g})"


def kernel_eval(spec: KernelSpec, x, z) -> float:
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.shape != z.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {z.shape}")
    if spec.kind == "linear":
        return float(np.dot(x, z))
    if spec.kind == "poly":
        return float((np.dot(x, z) + spec.coef) ** spec.degree)
    d = x - z
    return float(math.exp(-spec.gamma * np.dot(d, d)))


@dataclass(frozen=True)
class SvmBinaryModel:
    """A trained two-class machine; only samples with ``a_i > 0`` are kept.

    ``support_indices`` point back into the training set the model was fit on.
    """

    support_vectors: np.ndarray
    alphas: np.ndarray
    sv_labels: np.ndarray
    bias: float
    kernel: KernelSpec
    C: float
    support_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    iterations: int = 0
    max_violation: float = 0.0

    @property
    def dim(self):
        return self.support_vectors.shape[1]

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim} features, got {X.shape[1]}")
        k = self.kernel.matrix(X, self.support_vectors)
        return k @ (self.alphas * self.sv_labels) + self.bias

    def weights(self) -> np.ndarray:
        """Primal weight vector ``w = sum a_i y_i x_i`` (linear kernel only)."""
        if self.kernel.kind != "linear":
            raise ValueError("explicit weights exist only for the linear kernel")
        return (self.alphas * self.sv_labels) @ self.support_vectors

    def negated(self):
        """The same machine with the two labels swapped."""
        return replace(self, sv_labels=-self.sv_labels, bias=-self.bias)


def decision_value(model: SvmBinaryModel, x) -> float:
    return float(model.decision_function(np.asarray(x, dtype=np.float64)[None, :])[0])


@numba.njit(cache=True)
def _select_pair(G, y, alpha, C, order):
    n = y.shape[0]
    gmax = -np.inf
    gmin = np.inf
    i = -1
    j = -1
    for k in range(n):
        t = order[k]
        v = -y[t] * G[t]
        if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
            if v > gmax:
                gmax = v
                i = t
        if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < C):
            if v < gmin:
                gmin = v
                j = t
    return i, j, gmax, gmin


@numba.njit(cache=True)
def _smo(Q, y, C, tol, max_iter, alpha, order, debug):
    n = y.shape[0]
    G = -np.ones(n)
    for t in range(n):
        if alpha[t] != 0.0:
            for k in range(n):
                G[k] += Q[t, k] * alpha[t]
    it = 0
    monotone = True
    prev = 0.0
    if debug:
        for k in range(n):
            prev += 0.5 * alpha[k] * (G[k] - 1.0)
    while True:
        i, j, gmax, gmin = _select_pair(G, y, alpha, C, order)
        gap = gmax - gmin
        if i < 0 or j < 0 or gap < tol:
            return G, it, max(gap, 0.0), 0, monotone
        if it >= max_iter:
            return G, it, gap, 1, monotone
        ai = alpha[i]
        aj = alpha[j]
        if y[i] != y[j]:
            quad = Q[i, i] + Q[j, j] + 2.0 * Q[i, j]
            if quad <= 0.0:
                quad = _TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            alpha[i] = ai + delta
            alpha[j] = aj + delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
            if quad <= 0.0:
                quad = _TAU
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            alpha[i] = ai - delta
            alpha[j] = aj + delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        di = alpha[i] - ai
        dj = alpha[j] - aj
        for k in range(n):
            G[k] += Q[i, k] * di + Q[j, k] * dj
        it += 1
        if debug:
            cur = 0.0
            for k in range(n):
                cur += 0.5 * alpha[k] * (G[k] - 1.0)
            # minimization form: the dual objective is -cur
            if cur > prev + 1e-12 * (1.0 + abs(prev)):
                monotone = False
            prev = cur


def _bias(G, y, alpha, C):
    score = -y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(score[free].mean())
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    hi = score[up].max() if up.any() else 0.0
    lo = score[low].min() if low.any() else 0.0
    return float(0.5 * (hi + lo))


def train_binary(
    X,
    y,
    kernel: KernelSpec | None = None,
    C: float = 10.0,
    tol: float = 1e-3,
    seed: int | None = 0,
    max_iter: int = 1_000_000,
    alpha0=None,
    debug: bool = False,
) -> SvmBinaryModel:
    """Fit a two-class SVM on labels in {-1, +1}.

    Parameters
    ----------
    alpha0 : array, optional
        Warm-start dual coefficients.  They must be feasible (inside the box
        and summing to zero against ``y``).
    seed : int or None
        Fixes the scan order that breaks ties in working-pair selection;
        ``None`` scans in index order.
    debug : bool
        Verify after every pair update that the dual objective did not
        decrease; a decrease raises ``AssertionError``.
    """
    kernel = kernel or KernelSpec()
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"{X.shape[0]} samples but {y.shape[0]} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("binary labels must be -1 or +1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("training needs both labels present")
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}")

    if alpha0 is None:
        alpha = np.zeros(len(y))
    else:
        alpha = np.clip(np.asarray(alpha0, dtype=np.float64).copy(), 0.0, C)
        if alpha.shape != y.shape:
            raise ValueError("warm-start coefficients do not match the sample count")
        if abs(np.dot(alpha, y)) > 1e-8 * max(1.0, C):
            raise ValueError("warm-start coefficients violate sum(a_i y_i) = 0")

    K = kernel.matrix(X, X)
    Q = (y[:, None] * y[None, :]) * K
    order = (
        np.arange(len(y)) if seed is None
        else np.random.default_rng(seed).permutation(len(y))
    ).astype(np.int64)
    G, iterations, gap, status, monotone = _smo(
        Q, y, float(C), float(tol), int(max_iter), alpha, order, bool(debug)
    )
    if debug and not monotone:
        raise AssertionError("dual objective decreased during SMO")
    if status != 0:
        raise ConvergenceError(
            f"SMO did not converge in {iterations} pair updates "
            f"(max KKT violation {gap:.3g})",
            max_violation=gap,
            iterations=iterations,
        )
    b = _bias(G, y, alpha, C)
    sv = np.flatnonzero(alpha > 0)
    return SvmBinaryModel(
        support_vectors=X[sv].copy(),
        alphas=alpha[sv].copy(),
        sv_labels=y[sv].copy(),
        bias=b,
        kernel=kernel,
        C=float(C),
        support_indices=sv,
        iterations=int(iterations),
        max_violation=float(gap),
    )


def full_alphas(model: SvmBinaryModel, n: int) -> np.ndarray:
    alpha = np.zeros(n)
    alpha[model.support_indices] = model.alphas
    return alpha


def kkt_violations(model: SvmBinaryModel, X, y) -> np.ndarray:
    """Per-sample KKT violation of ``model`` on its own training set.

    Zero means the sample satisfies its condition exactly: ``y f >= 1`` when
    ``a = 0``, ``y f == 1`` when ``0 < a < C`` and ``y f <= 1`` when ``a = C``.
    """
    y = np.asarray(y, dtype=np.float64)
    alpha = full_alphas(model, len(y))
    margin = y * model.decision_function(X)
    viol = np.zeros(len(y))
    at0 = alpha == 0
    atc = alpha == model.C
    free = ~at0 & ~atc
    viol[at0] = np.maximum(0.0, 1.0 - margin[at0])
    viol[atc] = np.maximum(0.0, margin[atc] - 1.0)
    viol[free] = np.abs(margin[free] - 1.0)
    return viol


def dual_objective(model: SvmBinaryModel) -> float:
    ay = model.alphas * model.sv_labels
    K = model.kernel.matrix(model.support_vectors, model.support_vectors)
    return float(model.alphas.sum() - 0.5 * ay @ K @ ay)


@dataclass(frozen=True)
class SvmMulticlassModel:
    """One-vs-rest machines; machine ``k`` separates ``classes[k]`` from the rest."""

    machines: tuple[SvmBinaryModel, ...]
    classes: tuple[int, ...]

    @property
    def dim(self):
        return self.machines[0].dim

    def decision_function(self, X) -> np.ndarray:
        return np.column_stack([m.decision_function(X) for m in self.machines])

    def predict(self, X) -> np.ndarray:
        # np.argmax returns the first maximum, so ties go to the lower class id
        scores = self.decision_function(X)
        return np.asarray(self.classes)[np.argmax(scores, axis=1)]


def _binary_labels(labels, cls):
    return np.where(np.asarray(labels) == cls, 1.0, -1.0)


def train_multiclass(
    X,
    labels,
    kernel: KernelSpec | None = None,
    C: float = 10.0,
    tol: float = 1e-3,
    seed: int | None = 0,
    max_iter: int = 1_000_000,
) -> SvmMulticlassModel:
    """One-vs-rest training.

    With exactly two classes the second machine is the first with its labels
    swapped, which is what the solver would produce on the mirrored problem.
    """
    labels = np.asarray(labels)
    classes = tuple(int(c) for c in np.unique(labels))
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    machines = []
    for cls in classes:
        if len(classes) == 2 and machines:
            machines.append(machines[0].negated())
            break
        try:
            machines.append(
                train_binary(X, _binary_labels(labels, cls), kernel, C, tol, seed, max_iter)
            )
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"class {cls}: {exc}", exc.max_violation, exc.iterations
            ) from exc
    return SvmMulticlassModel(tuple(machines), classes)


def retrain_incremental(
    model: SvmMulticlassModel,
    X_new,
    labels_new,
    tol: float = 1e-3,
    seed: int | None = 0,
    max_iter: int = 1_000_000,
) -> SvmMulticlassModel:
    """Warm-started re-solve over each machine's support vectors plus new data.

    The previous dual coefficients seed the solver (new samples start at 0),
    so with no new data the result is the old model.
    """
    X_new = np.asarray(X_new, dtype=np.float64).reshape(-1, model.dim)
    labels_new = np.asarray(labels_new).ravel()
    if X_new.shape[0] != labels_new.shape[0]:
        raise ValueError("sample and label counts differ")
    unknown = set(labels_new.tolist()) - set(model.classes)
    if unknown:
        raise ValueError(f"labels not seen in training: {sorted(unknown)}")
    machines = []
    for k, (cls, old) in enumerate(zip(model.classes, model.machines)):
        if len(model.classes) == 2 and k == 1:
            machines.append(machines[0].negated())
            break
        X = np.vstack([old.support_vectors, X_new])
        y = np.concatenate([old.sv_labels, _binary_labels(labels_new, cls)])
        alpha0 = np.concatenate([old.alphas, np.zeros(len(labels_new))])
        try:
            machines.append(
                train_binary(X, y, old.kernel, old.C, tol, seed, max_iter, alpha0=alpha0)
            )
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"class {cls}: {exc}", exc.max_violation, exc.iterations
            ) from exc
    return SvmMulticlassModel(tuple(machines), model.classes)
