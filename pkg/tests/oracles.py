"""Independent reference implementations and fixtures used by the tests.

Everything here is written with plain Python loops (or scipy) so that it
shares no code path with the package under test.
"""

import math
from fractions import Fraction

import numpy as np


def brute_glcm(img, mask, levels, offset):
    """Count every ordered in-mask pair at ``offset`` and its reverse."""
    h, w = img.shape
    dy, dx = offset
    counts = [[0] * levels for _ in range(levels)]
    total = 0
    for r in range(h):
        for c in range(w):
            r2, c2 = r + dy, c + dx
            if not (0 <= r2 < h and 0 <= c2 < w):
                continue
            if not (mask[r, c] and mask[r2, c2]):
                continue
            a = min(int(math.floor(min(max(img[r, c], 0.0), 1.0) * levels)), levels - 1)
            b = min(int(math.floor(min(max(img[r2, c2], 0.0), 1.0) * levels)), levels - 1)
            counts[a][b] += 1
            counts[b][a] += 1
            total += 2
    if total == 0:
        return None
    return np.array([[counts[i][j] / total for j in range(levels)] for i in range(levels)])


def brute_texture(p):
    """The seven texture statistics by explicit double sums.

    Polynomial statistics are evaluated exactly on the (float) probabilities
    with rational arithmetic and rounded once at the end, so the oracle adds
    no summation error of its own.
    """
    n = len(p)
    q = [[Fraction(float(p[i][j])) for j in range(n)] for i in range(n)]
    px = [sum(q[i]) for i in range(n)]
    py = [sum(q[i][j] for i in range(n)) for j in range(n)]
    mx = sum(i * px[i] for i in range(n))
    my = sum(j * py[j] for j in range(n))
    vx = sum((i - mx) ** 2 * px[i] for i in range(n))
    vy = sum((j - my) ** 2 * py[j] for j in range(n))
    contrast = cov = energy = homog = shade = ssv = Fraction(0)
    ent = 0.0
    for i in range(n):
        for j in range(n):
            v = q[i][j]
            contrast += (i - j) ** 2 * v
            cov += (i - mx) * (j - my) * v
            if v > 0:
                ent -= float(v) * math.log2(float(v))
            energy += v * v
            homog += v / (1 + abs(i - j))
            shade += (i + j - mx - my) ** 3 * v
            ssv += (i - mx) ** 2 * v
    sig = math.sqrt(float(vx)) * math.sqrt(float(vy))
    corr = float(cov) / sig if sig > 0 else 0.0
    return np.array([float(v) for v in (contrast, corr, ent, energy, homog, shade, ssv)])


def brute_otsu(img):
    """Threshold bin maximizing between-class variance by a full sweep."""
    flat = np.asarray(img, dtype=np.float64).ravel()
    bins = [min(int(math.floor(min(max(v, 0.0), 1.0) * 256)), 255) for v in flat]
    hist = [0] * 256
    for b in bins:
        hist[b] += 1
    n = len(bins)
    best, best_t = Fraction(-1), None
    for t in range(256):
        n0 = sum(hist[: t + 1])
        n1 = n - n0
        if n0 == 0 or n1 == 0:
            continue
        m0 = Fraction(sum(i * hist[i] for i in range(t + 1)), n0)
        m1 = Fraction(sum(i * hist[i] for i in range(t + 1, 256)), n1)
        score = n0 * n1 * (m0 - m1) ** 2
        if score > best:
            best, best_t = score, t
    return best_t


def fisher_fixture(seed, n=200, dim=5):
    """Two Gaussian classes with a shared random covariance and shifted means."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(dim, dim))
    cov_root = a / math.sqrt(dim) + np.eye(dim)
    shift = rng.normal(size=dim)
    X0 = rng.normal(size=(n, dim)) @ cov_root
    X1 = rng.normal(size=(n, dim)) @ cov_root + shift
    X = np.vstack([X0, X1])
    y = np.repeat([0, 1], n)
    return X, y


def fisher_ratio_oracle(X, y, v):
    """Between/within variance ratio of the 1-D projection ``X @ v``."""
    z = X @ v
    classes = np.unique(y)
    means = [z[y == c].mean() for c in classes]
    grand = float(np.mean(means))
    between = sum((m - grand) ** 2 for m in means)
    within = sum(float(np.sum((z[y == c] - m) ** 2)) for c, m in zip(classes, means))
    return between / within


def separable_2d(seed, n=40, margin=0.5):
    """Linearly separable 2-D points on either side of a random line."""
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0, 2 * math.pi)
    normal = np.array([math.cos(theta), math.sin(theta)])
    offset = rng.uniform(-1, 1)
    X = []
    y = []
    while len(X) < n:
        p = rng.uniform(-3, 3, size=2)
        s = p @ normal - offset
        if abs(s) < margin:
            continue
        X.append(p)
        y.append(1.0 if s > 0 else -1.0)
    y = np.array(y)
    if abs(y.sum()) == n:  # keep both classes present
        y[0] = -y[0]
        X[0] = X[0] - 2 * ((X[0] @ normal - offset)) * normal
    return np.array(X), y


def primal_objective(model, X, y):
    """0.5 |w|^2 + C * sum of hinge losses for a linear machine."""
    w = model.weights()
    f = X @ w + model.bias
    hinge = np.maximum(0.0, 1.0 - y * f).sum()
    return 0.5 * float(w @ w) + model.C * hinge
