"""Independent reference implementations used as test oracles."""
import itertools

import numpy as np


def numeric_grad(f, arrays, h=1e-5):
    """Central differences of scalar f() w.r.t. every entry of every array (in place)."""
    out = []
    for a in arrays:
        g = np.zeros_like(a)
        it = np.nditer(a, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = a[i]
            a[i] = old + h
            fp = f()
            a[i] = old - h
            fm = f()
            a[i] = old
            g[i] = (fp - fm) / (2 * h)
        out.append(g)
    return out


def rel_error(analytic, numeric):
    a = np.concatenate([x.ravel() for x in analytic])
    n = np.concatenate([x.ravel() for x in numeric])
    scale = max(np.linalg.norm(a), np.linalg.norm(n), 1e-12)
    return np.linalg.norm(a - n) / scale


def brute_force_match(t, y):
    k = t.shape[1]
    best = None
    for perm in itertools.permutations(range(k)):
        a = np.zeros((k, k))
        a[list(range(k)), list(perm)] = 1.0
        obj = float(np.sum((t @ a - y) ** 2))
        if best is None or obj < best:
            best = obj
    return best


def brute_force_accuracy(pred, truth):
    k = max(pred.max(), truth.max()) + 1
    best = 0
    for perm in itertools.permutations(range(k)):
        best = max(best, int(np.sum(np.array(perm)[pred] == truth)))
    return best / len(pred)


def pair_count_ari(a, b):
    n = len(a)
    pairs = list(itertools.combinations(range(n), 2))
    both = sum(1 for i, j in pairs if a[i] == a[j] and b[i] == b[j])
    in_a = sum(1 for i, j in pairs if a[i] == a[j])
    in_b = sum(1 for i, j in pairs if b[i] == b[j])
    expected = in_a * in_b / len(pairs)
    return (both - expected) / (0.5 * (in_a + in_b) - expected)
