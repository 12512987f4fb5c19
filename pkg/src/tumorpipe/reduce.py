"""PCA on the total scatter matrix, Fisher LDA, and their composition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import cholesky, fix_signs, jacobi_eigh, solve_lower, solve_upper

__all__ = [
    "PcaModel",
    "LdaModel",
    "PcaLdaModel",
    "scatter_matrix",
    "within_between_scatter",
    "pca_fit",
    "pca_transform",
    "pca_reconstruct",
    "lda_fit",
    "lda_transform",
    "lda_predict",
    "fisher_ratio",
    "pca_lda_fit",
]


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    basis: np.ndarray  # features x m, orthonormal columns
    eigenvalues: np.ndarray  # the m retained, descending
    spectrum: np.ndarray  # every eigenvalue of the scatter matrix

    @property
    def n_components(self):
        return self.basis.shape[1]

    def transform(self, X):
        return pca_transform(self, X)


@dataclass(frozen=True)
class LdaModel:
    """Projection ``y = basis.T @ (x - mean)``; ``class_means`` are in that space."""

    mean: np.ndarray
    basis: np.ndarray  # features x d
    eigenvalues: np.ndarray
    class_means: np.ndarray  # c x d
    classes: tuple[int, ...]

    def transform(self, X):
        return lda_transform(self, X)


@dataclass(frozen=True)
class PcaLdaModel:
    pca: PcaModel
    lda: LdaModel

    def transform(self, X):
        return lda_transform(self.lda, pca_transform(self.pca, X))


def _matrix(X, n_features=None):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} features, got {X.shape[1]}")
    return X


def scatter_matrix(X) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized total scatter ``sum (x - mu)(x - mu)^T`` and the mean ``mu``."""
    X = _matrix(X)
    mu = X.mean(axis=0)
    D = X - mu
    return D.T @ D, mu


def pca_fit(X, m: int | float | None = None) -> PcaModel:
    """Fit PCA keeping ``m`` components.

    An ``int`` gives the count directly (at most ``min(samples - 1, features)``).
    A ``float`` in (0, 1] is a variance fraction: the smallest count whose
    leading eigenvalues reach that share of the total; 1.0 keeps every axis,
    which makes the transform a pure rotation.  ``None`` keeps every axis.
    """
    X = _matrix(X)
    n, f = X.shape
    if n < 2:
        raise ValueError("PCA needs at least 2 samples")
    S, mu = scatter_matrix(X)
    w, V = jacobi_eigh(S)
    w = np.where(w < 0, np.where(w >= -1e-9 * max(1.0, abs(w[0])), 0.0, w), w)
    if np.any(w < 0):
        raise ArithmeticError("scatter matrix has a clearly negative eigenvalue")

    if m is None:
        k = f
    elif isinstance(m, (float, np.floating)):
        if not 0.0 < m <= 1.0:
            raise ValueError(f"variance fraction must lie in (0, 1], got {m}")
        total = w.sum()
        if m >= 1.0 or total == 0.0:
            k = f
        else:
            ratio = np.cumsum(w) / total
            k = int(np.searchsorted(ratio, m, side="left")) + 1
            k = min(k, f)
    else:
        k = int(m)
        if not 1 <= k <= min(n - 1, f):
            raise ValueError(f"component count must lie in [1, {min(n - 1, f)}], got {k}")
    return PcaModel(mu, V[:, :k].copy(), w[:k].copy(), w.copy())


def pca_transform(model: PcaModel, X) -> np.ndarray:
    X = _matrix(X, model.mean.size)
    return (X - model.mean) @ model.basis


def pca_reconstruct(model: PcaModel, Y) -> np.ndarray:
    return model.mean + np.atleast_2d(Y) @ model.basis.T


def within_between_scatter(X, labels):
    """Within-class scatter, and between-class scatter of class means about their average."""
    X = _matrix(X)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    f = X.shape[1]
    Sw = np.zeros((f, f))
    means = []
    for cls in classes:
        Xc = X[labels == cls]
        mu_c = Xc.mean(axis=0)
        D = Xc - mu_c
        Sw += D.T @ D
        means.append(mu_c)
    means = np.array(means)
    mu = means.mean(axis=0)
    Dm = means - mu
    Sb = Dm.T @ Dm
    return Sw, Sb, classes, means


def lda_fit(X, labels, d: int | None = None) -> LdaModel:
    """Solve ``Sb v = lambda Sw v`` by whitening with a Cholesky factor of ``Sw``.

    ``Sw`` gets a ridge of ``1e-8 * trace(Sw) / features`` before factoring.
    Columns of ``basis`` are the leading generalized eigenvectors, scaled so
    that ``v^T (Sw + ridge) v = 1``.
    """
    X = _matrix(X)
    labels = np.asarray(labels)
    Sw, Sb, classes, means = within_between_scatter(X, labels)
    c = classes.size
    if c < 2:
        raise ValueError("LDA needs at least 2 classes")
    counts = np.array([np.sum(labels == k) for k in classes])
    if counts.min() < 2:
        raise ValueError("LDA needs at least 2 samples per class")
    if d is None:
        d = c - 1
    if not 1 <= d <= c - 1:
        raise ValueError(f"LDA dimension must lie in [1, {c - 1}] for {c} classes, got {d}")

    f = X.shape[1]
    eps = 1e-8 * np.trace(Sw) / f
    L = cholesky(Sw + eps * np.eye(f))
    # M = L^-1 Sb L^-T
    A = solve_lower(L, Sb)
    M = solve_lower(L, A.T).T
    w, U = jacobi_eigh(M)
    V = solve_upper(L.T, U[:, :d])
    V = fix_signs(V)
    mu = means.mean(axis=0)
    class_means = (means - mu) @ V
    return LdaModel(mu, V, np.maximum(w[:d], 0.0), class_means, tuple(int(k) for k in classes))


def lda_transform(model: LdaModel, X) -> np.ndarray:
    X = _matrix(X, model.mean.size)
    return (X - model.mean) @ model.basis


def lda_predict(model: LdaModel, X) -> np.ndarray:
    """Nearest projected class mean (ties go to the lower class id)."""
    Y = lda_transform(model, X)
    d2 = np.sum((Y[:, None, :] - model.class_means[None, :, :]) ** 2, axis=2)
    return np.asarray(model.classes)[np.argmin(d2, axis=1)]


def fisher_ratio(X, labels, direction) -> float:
    """Between/within scatter ratio of the data projected on ``direction``."""
    Sw, Sb, _, _ = within_between_scatter(X, labels)
    v = np.asarray(direction, dtype=np.float64)
    return float(v @ Sb @ v) / float(v @ Sw @ v)


def pca_lda_fit(X, labels, variance_fraction: float = 0.9999, d: int | None = None) -> PcaLdaModel:
    """PCA keeping ``variance_fraction`` of the scatter, then LDA to ``d`` dims."""
    pca = pca_fit(X, float(variance_fraction))
    lda = lda_fit(pca_transform(pca, X), labels, d)
    return PcaLdaModel(pca, lda)
