"""Small dense symmetric linear algebra: cyclic Jacobi and Cholesky.

Kept in-repo so the reduction stage has no external eigensolver dependency.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "NotPositiveDefiniteError",
    "jacobi_eigh",
    "cholesky",
    "solve_lower",
    "solve_upper",
    "fix_signs",
]


class NotPositiveDefiniteError(ArithmeticError):
    pass


def jacobi_eigh(a: np.ndarray, tol: float = 1e-15, max_sweeps: int = 60):
    """Eigen-decompose a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, v)`` with eigenvalues ``w`` in descending order and the
    matching orthonormal eigenvectors as the columns of ``v``.
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    scale = math.sqrt(np.sum(a * a))
    if n < 2 or scale == 0.0:
        return _sorted(np.diag(a).copy(), v)
    floor = tol * 1e-3 * scale

    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                # negligible relative to both diagonals (or to the whole matrix)
                if abs(apq) <= max(tol * math.sqrt(abs(a[p, p] * a[q, q])), floor):
                    a[p, q] = a[q, p] = 0.0
                    continue
                rotated = True
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.hypot(1.0, tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q]
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :]
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        if not rotated:
            return _sorted(np.diag(a).copy(), v)
    raise ArithmeticError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")


def _sorted(w, v):
    order = np.argsort(-w, kind="stable")
    return w[order], fix_signs(v[:, order])


def fix_signs(v: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    v = np.array(v, dtype=np.float64)
    if v.size == 0:
        return v
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def cholesky(a: np.ndarray) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == a``."""
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    low = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - np.dot(low[j, :j], low[j, :j])
        if not d > 0.0:
            raise NotPositiveDefiniteError(f"non-positive pivot {d:.3g} at column {j}")
        low[j, j] = math.sqrt(d)
        if j + 1 < n:
            low[j + 1:, j] = (a[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / low[j, j]
    return low


def solve_lower(low: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Forward substitution for ``low @ x = b`` (``b`` may be a matrix)."""
    b = np.array(b, dtype=np.float64)
    x = np.zeros_like(b)
    for i in range(low.shape[0]):
        x[i] = (b[i] - low[i, :i] @ x[:i]) / low[i, i]
    return x


def solve_upper(up: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Back substitution for ``up @ x = b``."""
    b = np.array(b, dtype=np.float64)
    x = np.zeros_like(b)
    for i in range(up.shape[0] - 1, -1, -1):
        x[i] = (b[i] - up[i, i + 1:] @ x[i + 1:]) / up[i, i]
    return x
