"""Soft assignment, target sharpening, K-means, label matching and partition metrics."""
from __future__ import annotations

from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment


def _as_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def _as_labels(a, name: str) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 1:
        raise ValueError(f"{name} must be 1-D")
    if a.size and (not np.issubdtype(a.dtype, np.integer)):
        if not np.all(a == np.round(a)):
            raise ValueError(f"{name} must hold integer ids")
        a = a.astype(np.int64)
    if a.size and a.min() < 0:
        raise ValueError(f"{name} holds negative ids")
    return a.astype(np.int64)


def squared_distances(z: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """(N, K) matrix of ||z_i - c_j||^2, computed from explicit differences."""
    diff = z[:, None, :] - centroids[None, :, :]
    return np.einsum("ikd,ikd->ik", diff, diff)


def soft_assign(z, centroids) -> np.ndarray:
    """Student-t (one degree of freedom) soft labels.

    ``y_ij`` is proportional to ``1 / (1 + ||z_i - mu_j||^2)``; rows sum to one.
    """
    z = _as_matrix(z, "z")
    centroids = _as_matrix(centroids, "centroids")
    if centroids.shape[0] < 2:
        raise ValueError("need at least two centroids")
    if z.shape[1] != centroids.shape[1]:
        raise ValueError(
            f"dimension mismatch: z has {z.shape[1]} columns, centroids {centroids.shape[1]}")
    q = 1.0 / (1.0 + squared_distances(z, centroids))
    return q / q.sum(axis=1, keepdims=True)


def soft_assign_backward(z: np.ndarray, centroids: np.ndarray,
                         grad_y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Gradients of a scalar loss w.r.t. ``z`` and ``centroids`` given dL/dY."""
    diff = z[:, None, :] - centroids[None, :, :]  # (N, K, d)
    q = 1.0 / (1.0 + np.einsum("ikd,ikd->ik", diff, diff))
    s = q.sum(axis=1, keepdims=True)
    y = q / s
    # y = q / s  =>  dL/dq_k = (g_k - sum_j g_j y_j) / s
    grad_q = (grad_y - np.sum(grad_y * y, axis=1, keepdims=True)) / s
    # q = 1/(1+d)  =>  dq/dd = -q^2 ;  dd/dz = 2 (z - mu)
    grad_d = -grad_q * q * q
    coef = 2.0 * grad_d[:, :, None] * diff
    return coef.sum(axis=1), -coef.sum(axis=0)


def sharpen_target(y) -> np.ndarray:
    """Square-and-renormalise target: t_ij ~ y_ij^2 / f_j with f_j = sum_i y_ij."""
    y = _as_matrix(y, "y")
    f = y.sum(axis=0)
    if np.any(f <= 0.0):
        raise ValueError("a cluster has zero total soft-label mass")
    w = y * y / f
    return w / w.sum(axis=1, keepdims=True)


def harden(y: np.ndarray) -> np.ndarray:
    """Row argmax; ties go to the lowest cluster index."""
    return np.argmax(y, axis=1)


def one_hot(labels, k: int) -> np.ndarray:
    labels = _as_labels(labels, "labels")
    if labels.size and labels.max() >= k:
        raise ValueError("label id out of range")
    out = np.zeros((labels.size, k))
    out[np.arange(labels.size), labels] = 1.0
    return out


# --------------------------------------------------------------------------
# K-means

def _kmeanspp(z: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = z.shape[0]
    idx = [int(rng.integers(n))]
    d2 = np.sum((z - z[idx[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0.0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            nxt = int(rng.integers(n))
        idx.append(nxt)
        d2 = np.minimum(d2, np.sum((z - z[nxt]) ** 2, axis=1))
    return z[idx].copy()


def _repair_empty(z, centroids, labels, d2):
    """Give each empty cluster the point farthest from its current centroid."""
    k = centroids.shape[0]
    counts = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(counts == 0):
        own = d2[np.arange(z.shape[0]), labels].copy()
        # never strip the last member of a cluster
        own[counts[labels] <= 1] = -1.0
        i = int(np.argmax(own))
        if own[i] < 0.0:
            break
        counts[labels[i]] -= 1
        labels[i] = j
        counts[j] += 1
        centroids[j] = z[i]
    return labels


def _lloyd(z, centroids, max_iter, tol, trace):
    labels = None
    for _ in range(max_iter):
        d2 = squared_distances(z, centroids)
        labels = np.argmin(d2, axis=1)
        labels = _repair_empty(z, centroids, labels, d2)
        if trace is not None:
            trace.append(float(np.sum(np.sum((z - centroids[labels]) ** 2, axis=1))))
        new = np.array([z[labels == j].mean(axis=0) for j in range(centroids.shape[0])])
        shift = np.max(np.sqrt(np.sum((new - centroids) ** 2, axis=1)))
        centroids = new
        if shift < tol:
            break
    d2 = squared_distances(z, centroids)
    labels = np.argmin(d2, axis=1)
    objective = float(np.sum(d2[np.arange(z.shape[0]), labels]))
    return centroids, labels, objective


def kmeans(z, k: int, seed: int = 0, n_init: int = 20, max_iter: int = 300,
           tol: float = 1e-6, trace: Optional[List[List[float]]] = None
           ) -> Tuple[np.ndarray, np.ndarray, float]:
    """Lloyd's algorithm from k-means++ seeds; best of ``n_init`` restarts.

    Returns ``(centroids, labels, objective)`` where the objective is the sum
    of squared distances to the nearest centroid.  When ``trace`` is a list,
    each restart appends its per-iteration objective sequence.
    """
    z = _as_matrix(z, "z")
    n = z.shape[0]
    if n == 0:
        raise ValueError("empty input")
    if k < 1 or n < k:
        raise ValueError(f"need N >= K >= 1, got N={n}, K={k}")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, n_init)):
        history = [] if trace is not None else None
        init = _kmeanspp(z, k, rng)
        result = _lloyd(z, init, max_iter, tol, history)
        if trace is not None:
            trace.append(history)
        if best is None or result[2] < best[2]:
            best = result
    return best


# --------------------------------------------------------------------------
# matching and metrics

def match_labels(t, y) -> np.ndarray:
    """Permutation matrix A minimising ||T A - Y||_F^2 (Hungarian)."""
    t = _as_matrix(t, "t")
    y = _as_matrix(y, "y")
    if t.shape != y.shape:
        raise ValueError(f"shape mismatch {t.shape} vs {y.shape}")
    diff = t[:, :, None] - y[:, None, :]
    cost = np.einsum("ijk,ijk->jk", diff, diff)
    rows, cols = linear_sum_assignment(cost)
    a = np.zeros_like(cost)
    a[rows, cols] = 1.0
    return a


def contingency(a, b) -> np.ndarray:
    a = _as_labels(a, "a")
    b = _as_labels(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"length mismatch {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("empty input")
    m = np.zeros((a.max() + 1, b.max() + 1), dtype=np.int64)
    np.add.at(m, (a, b), 1)
    return m


def accuracy(pred, truth) -> float:
    """Best-permutation fraction of agreeing labels."""
    m = contingency(pred, truth)
    rows, cols = linear_sum_assignment(m, maximize=True)
    return float(m[rows, cols].sum()) / float(m.sum())


def frobenius_accuracy(y_check, t) -> float:
    """1 - ||Y_check - T||_F^2 / (2N) for one-hot matrices."""
    y_check = _as_matrix(y_check, "y_check")
    t = _as_matrix(t, "t")
    if y_check.shape != t.shape:
        raise ValueError(f"shape mismatch {y_check.shape} vs {t.shape}")
    for name, m in (("y_check", y_check), ("t", t)):
        if not (np.all((m == 0.0) | (m == 1.0)) and np.all(m.sum(axis=1) == 1.0)):
            raise ValueError(f"{name} is not one-hot per row")
    return 1.0 - float(np.sum((y_check - t) ** 2)) / (2.0 * t.shape[0])


def entropy(a) -> float:
    a = _as_labels(a, "a")
    if a.size == 0:
        raise ValueError("empty input")
    p = np.bincount(a) / a.size
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def mutual_information(a, b) -> float:
    m = contingency(a, b).astype(np.float64)
    n = m.sum()
    pab = m / n
    pa = pab.sum(axis=1, keepdims=True)
    pb = pab.sum(axis=0, keepdims=True)
    nz = pab > 0
    mi = float(np.sum(pab[nz] * np.log(pab[nz] / (pa @ pb)[nz])))
    return max(mi, 0.0)


def nmi(a, b) -> float:
    """2 I(a;b) / (H(a) + H(b)), natural log."""
    mi = mutual_information(a, b)
    ha, hb = entropy(a), entropy(b)
    if ha == 0.0 and hb == 0.0:
        return 1.0
    if ha == 0.0 or hb == 0.0:
        return 0.0
    return min(1.0, 2.0 * mi / (ha + hb))


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1.0) / 2.0


def ari(a, b) -> float:
    """Adjusted Rand index from pair counts."""
    m = contingency(a, b)
    n = m.sum()
    index = _comb2(m).sum()
    sa = _comb2(m.sum(axis=1)).sum()
    sb = _comb2(m.sum(axis=0)).sum()
    total = _comb2(n)
    expected = sa * sb / total if total > 0 else 0.0
    max_index = 0.5 * (sa + sb)
    if max_index == expected:
        return 1.0
    return float((index - expected) / (max_index - expected))
