import math

import numpy as np
import pytest

from tumorpipe.svm import (
    ConvergenceError,
    KernelSpec,
    SvmBinaryModel,
    SvmMulticlassModel,
    decision_value,
    dual_objective,
    full_alphas,
    kernel_eval,
    kkt_violations,
    retrain_incremental,
    train_binary,
    train_multiclass,
)

from oracles import primal_objective, separable_2d


def test_kernel_examples():
    assert kernel_eval(KernelSpec("rbf", gamma=0.7), [1.0, 2.0], [1.0, 2.0]) == 1.0
    assert kernel_eval(KernelSpec("linear"), [1.0, 2.0], [3.0, 4.0]) == 11.0
    assert kernel_eval(KernelSpec("rbf", gamma=0.5), [0.0, 0.0], [2.0, 0.0]) == pytest.approx(math.exp(-2))
    assert kernel_eval(KernelSpec("poly", degree=2, coef=1.0, gamma=1.0), [1.0], [2.0]) == 9.0
    with pytest.raises(ValueError):
        KernelSpec("sigmoid")


def test_kernel_matrix_matches_pointwise():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(4, 3)), rng.normal(size=(5, 3))
    for spec in (KernelSpec("linear"), KernelSpec("poly", 3, 0.5, 0.2), KernelSpec("rbf", gamma=0.3)):
        K = spec.matrix(a, b)
        ref = np.array([[kernel_eval(spec, x, z) for z in b] for x in a])
        assert np.allclose(K, ref, atol=1e-12)


def test_two_point_analytic_solution():
    X = np.array([[-1.0], [1.0]])
    y = np.array([-1.0, 1.0])
    m = train_binary(X, y, C=1e6, tol=1e-9)
    assert np.allclose(full_alphas(m, 2), [0.5, 0.5], atol=1e-6)
    assert m.weights()[0] == pytest.approx(1.0, abs=1e-6)
    assert m.bias == pytest.approx(0.0, abs=1e-6)
    assert decision_value(m, [0.0]) == pytest.approx(0.0, abs=1e-6)
    assert 2 / np.linalg.norm(m.weights()) == pytest.approx(2.0, abs=1e-6)


def test_single_label_and_bad_inputs_rejected():
    X = np.zeros((3, 2))
    with pytest.raises(ValueError, match="both labels"):
        train_binary(X, [1, 1, 1])
    with pytest.raises(ValueError):
        train_binary(X, [1, 0, -1])
    with pytest.raises(ValueError):
        train_binary(X, [1, -1, 1], C=0)


def test_xor_with_rbf():
    X = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
    y = np.array([1, 1, -1, -1], dtype=float)
    m = train_binary(X, y, KernelSpec("rbf", gamma=1.0), C=10)
    f = m.decision_function(X)
    assert np.all(np.sign(f) == y)
    k = KernelSpec("rbf", gamma=1.0)
    direct = [sum(a * ys * kernel_eval(k, sv, x) for a, ys, sv in zip(m.alphas, m.sv_labels, m.support_vectors))
              + m.bias for x in X]
    assert np.allclose(f, direct, atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_kkt_and_feasibility_on_separable_data(seed):
    X, y = separable_2d(seed)
    m = train_binary(X, y, C=100.0, tol=1e-3, seed=seed)
    assert kkt_violations(m, X, y).max() <= 1e-3
    alpha = full_alphas(m, len(y))
    assert abs(alpha @ y) <= 1e-8
    assert alpha.min() >= 0 and alpha.max() <= m.C
    free = (alpha > 0) & (alpha < m.C)
    assert np.all(np.abs(y[free] * m.decision_function(X[free]) - 1) <= 10 * 1e-3)
    assert m.support_vectors.shape[0] >= 2


@pytest.mark.parametrize("seed", range(10))
def test_duality_gap_linear(seed):
    X, y = separable_2d(seed)
    m = train_binary(X, y, C=100.0, tol=1e-10, seed=seed)
    primal = primal_objective(m, X, y)
    dual = dual_objective(m)
    assert primal - dual >= -1e-9 * abs(primal)
    assert (primal - dual) <= 1e-6 * abs(primal)


def test_soft_margin_kkt_with_overlap():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(60, 3))
    y = np.where(X[:, 0] + 0.8 * rng.normal(size=60) > 0, 1.0, -1.0)
    m = train_binary(X, y, C=1.0, tol=1e-4)
    assert kkt_violations(m, X, y).max() <= 1e-4
    assert np.any(m.alphas == m.C)


def test_debug_mode_checks_monotone_ascent():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 4))
    y = np.where(X @ [1, -1, 0.5, 0] + 0.3 * rng.normal(size=50) > 0, 1.0, -1.0)
    for kernel in (KernelSpec("linear"), KernelSpec("rbf", gamma=0.5), KernelSpec("poly", 2, 1.0, 0.5)):
        train_binary(X, y, kernel, C=5.0, debug=True)


def test_non_convergence_is_reported():
    X, y = separable_2d(1)
    with pytest.raises(ConvergenceError) as info:
        train_binary(X, y, C=100.0, tol=1e-12, max_iter=2)
    assert info.value.iterations == 2
    assert info.value.max_violation > 0


def test_seeded_training_is_reproducible():
    X, y = separable_2d(7)
    a = train_binary(X, y, seed=3)
    b = train_binary(X, y, seed=3)
    assert np.array_equal(a.alphas, b.alphas) and a.bias == b.bias


# -- multiclass ------------------------------------------------------------------------


def _blobs(seed, per=30):
    rng = np.random.default_rng(seed)
    centers = np.array([[0, 0], [6, 0], [0, 6]], dtype=float)
    labels = np.repeat(np.arange(3), per)
    return centers[labels] + rng.normal(size=(3 * per, 2)), labels


def test_three_blobs_held_out():
    X, y = _blobs(0)
    Xt, yt = _blobs(1)
    model = train_multiclass(X, y)
    assert np.array_equal(model.predict(Xt), yt)


def test_two_class_reduces_to_binary_sign():
    X, y = separable_2d(3)
    labels = (y > 0).astype(int)
    model = train_multiclass(X, labels)
    binary = train_binary(X, np.where(labels == 0, 1.0, -1.0))
    pred = model.predict(X)
    assert np.array_equal(pred, np.where(binary.decision_function(X) >= 0, 0, 1))


def test_ties_go_to_lower_class():
    m = SvmBinaryModel(np.zeros((1, 1)), np.ones(1), np.ones(1), 0.5, KernelSpec(), 1.0)
    model = SvmMulticlassModel((m, m, m), (0, 1, 2))
    assert model.predict(np.zeros((2, 1))).tolist() == [0, 0]


def test_scaling_decisions_keeps_argmax():
    X, y = _blobs(3)
    model = train_multiclass(X, y)
    s = model.decision_function(X)
    assert np.array_equal(np.argmax(s, 1), np.argmax(3.7 * s, 1))


# -- incremental retraining -----------------------------------------------------------


def _probe_grid():
    g = np.linspace(-3, 9, 15)
    return np.array([[a, b] for a in g for b in g])


def test_incremental_with_no_new_data_is_unchanged():
    X, y = _blobs(0)
    model = train_multiclass(X, y, tol=1e-6)
    same = retrain_incremental(model, np.zeros((0, 2)), np.zeros(0, dtype=int), tol=1e-6)
    grid = _probe_grid()
    assert np.allclose(same.decision_function(grid), model.decision_function(grid), atol=1e-5)


def test_incremental_equals_batch_on_support_vectors_plus_new():
    X, y = _blobs(0)
    Xn, yn = _blobs(5, per=10)
    tol = 1e-4
    model = train_multiclass(X, y, tol=tol)
    inc = retrain_incremental(model, Xn, yn, tol=tol)
    grid = _probe_grid()
    for k, cls in enumerate(model.classes):
        old = model.machines[k]
        Xb = np.vstack([old.support_vectors, Xn])
        yb = np.concatenate([old.sv_labels, np.where(yn == cls, 1.0, -1.0)])
        batch = train_binary(Xb, yb, old.kernel, old.C, tol)
        scale = max(1.0, np.abs(batch.decision_function(grid)).max())
        assert np.allclose(inc.machines[k].decision_function(grid), batch.decision_function(grid),
                           atol=10 * tol * scale)


def test_incremental_duplicate_interior_point():
    X, y = _blobs(2)
    tol = 1e-5
    model = train_multiclass(X, y, tol=tol)
    margins = [m.decision_function(X) * np.where(y == c, 1, -1) for c, m in zip(model.classes, model.machines)]
    interior = int(np.argmax(np.min(margins, axis=0)))
    inc = retrain_incremental(model, X[interior:interior + 1], y[interior:interior + 1], tol=tol)
    grid = _probe_grid()
    ref = model.decision_function(grid)
    scale = max(1.0, np.abs(ref).max())
    assert np.allclose(inc.decision_function(grid), ref, atol=10 * tol * scale)


def test_incremental_rejects_unknown_labels():
    X, y = _blobs(0)
    model = train_multiclass(X, y)
    with pytest.raises(ValueError, match="not seen"):
        retrain_incremental(model, X[:1], [7])
