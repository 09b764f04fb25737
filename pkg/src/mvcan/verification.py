"""Randomised campaigns checking the fused-label guarantees.

Each campaign draws independent witnesses from ``default_rng([seed, tag, trial])``
so any trial can be replayed on its own.  Fused centroids are the ideal
construction ``c_j = [w^1 mu^1_j, ..., w^V mu^V_j]``, never re-estimated.

Informative views have every pairwise gap ``|D(z, mu_a) - D(z, mu_b)|`` at
least ``margin``; noisy views have every gap below ``eps``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import clustering as cl

MARGIN = 1.0
EPS = 1e-6
MAX_RETRIES = 200
MAX_COUNTEREXAMPLES = 20
# cases whose statement is exact; "mixed" (noise leakage under finite eps) is empirical
EXACT_CASES = {"identity", "bound", "decomposition", "consistency", "equal-gaps",
               "threshold", "all-noisy"}


class WitnessError(RuntimeError):
    """A witness could not be built or violates its preconditions."""


@dataclass
class TheoremReport:
    theorem: str
    title: str
    trials: int = 0
    satisfied: int = 0
    cases: Dict[str, List[int]] = field(default_factory=dict)
    counterexamples: List[dict] = field(default_factory=list)
    notes: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        """True when every exact-statement case is satisfied in every trial."""
        return all(sat == run for name, (run, sat) in self.cases.items()
                   if name in EXACT_CASES)

    def case_passed(self, case: str) -> bool:
        run, sat = self.cases[case]
        return run == sat

    def record(self, case: str, ok: bool, payload: Optional[dict] = None) -> None:
        run, sat = self.cases.get(case, [0, 0])
        self.cases[case] = [run + 1, sat + int(ok)]
        self.trials += 1
        self.satisfied += int(ok)
        if not ok and payload is not None and len(self.counterexamples) < MAX_COUNTEREXAMPLES:
            self.counterexamples.append({"case": case, **payload})

    def to_text(self) -> str:
        lines = [f"theorem: {self.theorem} ({self.title})",
                 f"trials: {self.trials}",
                 f"satisfied: {self.satisfied}"]
        for name, (run, sat) in self.cases.items():
            lines.append(f"case {name}: {sat}/{run}")
        for key, value in self.notes.items():
            lines.append(f"{key}: {value}")
        lines.append(f"status: {'PASS' if self.passed else 'FAIL'}")
        lines.append(f"counterexamples: {self.trials - self.satisfied}")
        for ce in self.counterexamples:
            lines.append("  " + json.dumps(ce, sort_keys=True))
        return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (list, tuple)):
        return [_jsonable(o) for o in obj]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# --------------------------------------------------------------------------
# fused labels and witness construction

def distances(z: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """D(z, mu_j) for a single representation ``z``."""
    diff = mu - z[None, :]
    return np.einsum("kd,kd->k", diff, diff)


def fused_soft_labels(zs: Sequence[np.ndarray], mus: Sequence[np.ndarray],
                      weights: Sequence[float]) -> np.ndarray:
    """Soft label of one sample against the ideal scaled centroids."""
    z = np.concatenate([w * z for w, z in zip(weights, zs)])
    c = np.hstack([w * mu for w, mu in zip(weights, mus)])
    return cl.soft_assign(z[None, :], c)[0]


FuseFn = Callable[[Sequence[np.ndarray], Sequence[np.ndarray], Sequence[float]], np.ndarray]


def _fuse_fn(fuse: Optional[FuseFn]) -> FuseFn:
    # resolved per call so a patched module attribute takes effect
    return fuse if fuse is not None else fused_soft_labels


def min_gap(d: np.ndarray) -> float:
    s = np.sort(d)
    return float(np.min(np.diff(s))) if s.size > 1 else np.inf


def max_gap(d: np.ndarray) -> float:
    return float(d.max() - d.min())


def is_informative(z, mu, margin: float = MARGIN) -> bool:
    return min_gap(distances(z, mu)) >= margin


def is_noisy(z, mu, eps: float = EPS) -> bool:
    return max_gap(distances(z, mu)) < eps


def validate_noisy(z, mu, eps: float = EPS) -> None:
    gap = max_gap(distances(z, mu))
    if not gap < eps:
        raise WitnessError(f"view is not noisy: largest distance gap {gap:g} >= eps {eps:g}")


def informative_view(rng, k: int, d: int, nearest: int, margin: float = MARGIN):
    """(z, mu) with ``mu[nearest]`` strictly closest and all gaps >= margin."""
    for _ in range(MAX_RETRIES):
        mu = rng.normal(scale=4.0, size=(k, d))
        z = mu[nearest] + rng.normal(scale=1.0, size=d)
        dist = distances(z, mu)
        if int(np.argmin(dist)) == nearest and min_gap(dist) >= margin:
            return z, mu
    raise WitnessError(f"no informative witness after {MAX_RETRIES} draws (k={k}, d={d})")


def radial_view(rng, target_distances: np.ndarray, d: int):
    """(z, mu) with D(z, mu_j) equal to ``target_distances`` up to rounding."""
    z = rng.normal(scale=3.0, size=d)
    u = rng.normal(size=(len(target_distances), d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return z, z[None, :] + np.sqrt(target_distances)[:, None] * u


def noisy_view(rng, k: int, d: int, eps: float = EPS):
    for _ in range(MAX_RETRIES):
        base = rng.uniform(1.0, 25.0)
        z, mu = radial_view(rng, base + rng.uniform(0.0, eps / 4, size=k), d)
        if is_noisy(z, mu, eps):
            return z, mu
    raise WitnessError(f"no noisy witness after {MAX_RETRIES} draws (eps={eps:g})")


def _rng(seed: int, tag: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, tag, trial])


# --------------------------------------------------------------------------
# campaigns

def verify_accuracy_identity(trials: int = 1000, seed: int = 0) -> TheoremReport:
    """ACC = 1 - ||Y_check - T||^2 / 2N, and the per-view accuracy bound.

    The bound ``ACC <= 1 - (||Y_check - Y^v||^2 - ||T - Y^v||^2) / 2N`` is
    checked for every view ``v`` (in particular the worst view), with a
    one-hot target and random row-stochastic view labels.
    """
    rep = TheoremReport("1", "accuracy identity and bound")
    slack = 1e-9
    worst = -np.inf
    soft_violations = 0
    for trial in range(trials):
        rng = _rng(seed, 1, trial)
        n = int(rng.integers(1, 51))
        k = int(rng.integers(2, 7))
        truth = rng.integers(0, k, size=n)
        pred = rng.integers(0, k, size=n)
        t = cl.one_hot(pred, k)
        l_mat = cl.one_hot(truth, k)
        y_check = l_mat @ cl.match_labels(l_mat, t)
        f_acc = cl.frobenius_accuracy(y_check, t)
        acc = cl.accuracy(pred, truth)
        rep.record("identity", abs(f_acc - acc) <= 1e-12,
                   _jsonable({"trial": trial, "pred": pred, "truth": truth,
                              "frobenius": f_acc, "direct": acc}))

        n_views = int(rng.integers(1, 5))
        conc = rng.uniform(0.1, 5.0, size=n_views)
        ys = [rng.dirichlet(np.full(k, c), size=n) for c in conc]
        bounds = [1.0 - (np.sum((y_check - y) ** 2) - np.sum((t - y) ** 2)) / (2 * n)
                  for y in ys]
        m_star = int(np.argmax([np.sum((y_check - y) ** 2) for y in ys]))
        excess = max(f_acc - b for b in bounds)
        worst = max(worst, excess)
        rep.record("bound", excess <= slack,
                   _jsonable({"trial": trial, "acc": f_acc, "bounds": bounds,
                              "worst_view": m_star}))
        # informational: the same bound with a soft target is not guaranteed
        t_soft = cl.sharpen_target(rng.dirichlet(np.ones(k), size=n))
        y_soft = l_mat @ cl.match_labels(l_mat, t_soft)
        acc_soft = cl.accuracy(cl.harden(t_soft), truth)
        soft_bounds = [1.0 - (np.sum((y_soft - y) ** 2) - np.sum((t_soft - y) ** 2)) / (2 * n)
                       for y in ys]
        soft_violations += int(acc_soft > min(soft_bounds) + slack)
    rep.notes["max_acc_minus_bound"] = float(worst)
    rep.notes["soft_target_violations"] = soft_violations
    return rep


def verify_kmeans_decomposition(trials: int = 500, seed: int = 0) -> TheoremReport:
    """Fused K-means objective = sum_v w_v^2 * per-view objective, shared assignment."""
    rep = TheoremReport("2", "scaled K-means decomposition")
    worst = 0.0
    for trial in range(trials):
        rng = _rng(seed, 2, trial)
        v = int(rng.integers(1, 5))
        k = int(rng.integers(2, 6))
        n = int(rng.integers(k, 41))
        assign = rng.permutation(np.arange(n) % k)
        zs = [rng.normal(scale=rng.uniform(0.5, 5), size=(n, int(rng.integers(1, 6))))
              for _ in range(v)]
        w = np.exp(rng.uniform(-2.0, 2.0, size=v))
        fused = np.hstack([wv * z for wv, z in zip(w, zs)])
        c = np.array([fused[assign == j].mean(axis=0) for j in range(k)])
        lhs = float(np.sum((fused - c[assign]) ** 2))
        mus = [np.array([z[assign == j].mean(axis=0) for j in range(k)]) for z in zs]
        rhs = float(sum(wv ** 2 * np.sum((z - mu[assign]) ** 2)
                        for wv, z, mu in zip(w, zs, mus)))
        c_from_views = np.hstack([wv * mu for wv, mu in zip(w, mus)])
        scale = max(1.0, abs(rhs))
        err = abs(lhs - rhs) / scale
        cerr = float(np.max(np.abs(c - c_from_views))) / max(1.0, float(np.max(np.abs(c))))
        worst = max(worst, err, cerr)
        rep.record("decomposition", err <= 1e-9 and cerr <= 1e-9,
                   _jsonable({"trial": trial, "lhs": lhs, "rhs": rhs, "weights": w,
                              "centroid_error": cerr}))
    rep.notes["max_relative_error"] = worst
    return rep


def verify_consistency(trials: int = 1000, seed: int = 0,
                       fuse: Optional[FuseFn] = None) -> TheoremReport:
    """Views that are informative and agree keep their shared assignment."""
    fuse = _fuse_fn(fuse)
    rep = TheoremReport("3", "consistency")
    for trial in range(trials):
        rng = _rng(seed, 3, trial)
        v = int(rng.integers(2, 5))
        k = int(rng.integers(2, 6))
        shared = int(rng.integers(k))
        views = [informative_view(rng, k, int(rng.integers(1, 6)), shared) for _ in range(v)]
        # log-uniform weights span roughly 1:1000
        w = np.exp(rng.uniform(-3.5, 3.5, size=v))
        got = int(np.argmax(fuse([z for z, _ in views], [mu for _, mu in views], w)))
        rep.record("consistency", got == shared,
                   _jsonable({"trial": trial, "shared": shared, "fused": got, "weights": w,
                              "z": [z for z, _ in views], "mu": [mu for _, mu in views]}))
    return rep


def mirrored_view(rng, z: np.ndarray, mu: np.ndarray):
    """Sign-flipped copy with the two centroids swapped: equal gaps, opposite winner."""
    s = rng.choice([-1.0, 1.0], size=z.shape[0])
    return s * z, (s * mu)[::-1].copy()


def threshold_delta(view1, view2) -> float:
    """delta = (D2(mu_2) - D2(mu_1)) / (D1(mu_1) - D1(mu_2)) for two-cluster views."""
    d1 = distances(*view1)
    d2 = distances(*view2)
    return float((d2[1] - d2[0]) / (d1[0] - d1[1]))


def verify_complementarity(trials: int = 1000, seed: int = 0,
                           fuse: Optional[FuseFn] = None) -> TheoremReport:
    """Two informative, conflicting views.

    Equal gaps: the larger factor wins.  Unequal gaps: view 1 wins exactly when
    ``(w1 / w2)^2 > delta``.
    """
    fuse = _fuse_fn(fuse)
    rep = TheoremReport("4", "complementarity")
    for trial in range(trials):
        rng = _rng(seed, 4, trial)
        d = int(rng.integers(1, 6))
        # case 1: equal gaps
        first = int(rng.integers(2))
        z1, mu1 = informative_view(rng, 2, d, first)
        z2, mu2 = mirrored_view(rng, z1, mu1)
        while True:
            w = rng.uniform(1.0, np.e, size=2)
            if abs(w[0] ** 2 - w[1] ** 2) >= 1e-3:
                break
        gaps = np.abs(np.diff(distances(z1, mu1))), np.abs(np.diff(distances(z2, mu2)))
        expected = first if w[0] > w[1] else 1 - first
        got = int(np.argmax(fuse([z1, z2], [mu1, mu2], w)))
        rep.record("equal-gaps", got == expected and gaps[0][0] == gaps[1][0],
                   _jsonable({"trial": trial, "expected": expected, "fused": got,
                              "weights": w, "z": [z1, z2], "mu": [mu1, mu2]}))

        # case 2: unequal gaps, view 1 prefers cluster 1 and view 2 cluster 0
        for _ in range(MAX_RETRIES):
            va = informative_view(rng, 2, int(rng.integers(1, 6)), 1)
            vb = informative_view(rng, 2, int(rng.integers(1, 6)), 0)
            delta = threshold_delta(va, vb)
            if abs(delta - 1.0) > 1e-3:
                break
        else:
            raise WitnessError("could not draw unequal gaps")
        zs, mus = [va[0], vb[0]], [va[1], vb[1]]
        above = int(np.argmax(fuse(zs, mus, [np.sqrt(delta * (1 + 1e-3)), 1.0])))
        below = int(np.argmax(fuse(zs, mus, [np.sqrt(delta * (1 - 1e-3)), 1.0])))
        while True:
            w = rng.uniform(1.0, np.e, size=2)
            ratio = (w[0] / w[1]) ** 2
            if abs(ratio / delta - 1.0) > 1e-6:
                break
        rand = int(np.argmax(fuse(zs, mus, w)))
        ok = above == 1 and below == 0 and rand == (1 if ratio > delta else 0)
        rep.record("threshold", ok,
                   _jsonable({"trial": trial, "delta": delta, "above": above, "below": below,
                              "weights": w, "random_weight_label": rand,
                              "z": zs, "mu": mus}))
    return rep


def verify_noise_robustness(trials: int = 1000, seed: int = 0, eps: float = EPS,
                            margin: float = MARGIN,
                            fuse: Optional[FuseFn] = None) -> TheoremReport:
    """Noisy views do not move the fused assignment away from the informative one;
    with every view noisy the common cluster wins."""
    fuse = _fuse_fn(fuse)
    if not (0 < eps < margin):
        raise WitnessError(f"eps={eps:g} must lie in (0, margin={margin:g}) for noisy "
                           f"views to be distinguishable from informative ones")
    rep = TheoremReport("5", "noise robustness")
    bound_ok = 0
    for trial in range(trials):
        rng = _rng(seed, 5, trial)
        # case 1: some informative views, the rest noisy
        v = int(rng.integers(2, 5))
        n_inf = int(rng.integers(1, v))
        k = int(rng.integers(2, 6))
        shared = int(rng.integers(k))
        kinds = rng.permutation([True] * n_inf + [False] * (v - n_inf))
        views = [informative_view(rng, k, int(rng.integers(1, 6)), shared, margin) if inf
                 else noisy_view(rng, k, int(rng.integers(1, 6)), eps) for inf in kinds]
        for (z, mu), inf in zip(views, kinds):
            if not inf:
                validate_noisy(z, mu, eps)
        w = rng.uniform(1.0, np.e, size=v)
        bound_ok += int(margin * np.sum(w[kinds] ** 2) > eps * np.sum(w[~kinds] ** 2))
        got = int(np.argmax(fuse([z for z, _ in views], [mu for _, mu in views], w)))
        rep.record("mixed", got == shared,
                   _jsonable({"trial": trial, "shared": shared, "fused": got,
                              "informative": kinds, "weights": w,
                              "z": [z for z, _ in views], "mu": [mu for _, mu in views]}))

        # case 2: all noisy, three clusters.  Each view puts the common cluster
        # in a near-tie (gap < eps) with one other cluster and keeps the third
        # at least ``margin`` farther away; the tied partner differs per view.
        common, a, b = (int(i) for i in rng.permutation(3))
        views = []
        for partner, far in ((a, b), (b, a)):
            base = rng.uniform(1.0, 25.0)
            tie = rng.uniform(0.0, eps / 4, size=2)
            dist = np.empty(3)
            dist[common], dist[partner] = base + tie[0], base + tie[1]
            dist[far] = base + tie.max() + margin + rng.uniform(0.0, 5.0)
            views.append(radial_view(rng, dist, int(rng.integers(1, 6))))
        w = rng.uniform(1.0, np.e, size=2)
        got = int(np.argmax(fuse([z for z, _ in views], [mu for _, mu in views], w)))
        rep.record("all-noisy", got == common,
                   _jsonable({"trial": trial, "common": common, "fused": got, "weights": w,
                              "z": [z for z, _ in views], "mu": [mu for _, mu in views]}))
    rep.notes["eps"] = eps
    rep.notes["margin"] = margin
    rep.notes["leakage_bound_holds"] = bound_ok
    rep.notes["mixed_failure_rate"] = 1.0 - rep.cases["mixed"][1] / rep.cases["mixed"][0]
    return rep


CAMPAIGNS = {
    "1": verify_accuracy_identity,
    "2": verify_kmeans_decomposition,
    "3": verify_consistency,
    "4": verify_complementarity,
    "5": verify_noise_robustness,
}


def merge_reports(reports: Sequence[TheoremReport]) -> TheoremReport:
    """Sum shard reports of one campaign."""
    out = TheoremReport(reports[0].theorem, reports[0].title)
    for rep in reports:
        if rep.theorem != out.theorem:
            raise ValueError("cannot merge reports of different theorems")
        out.trials += rep.trials
        out.satisfied += rep.satisfied
        for name, (run, sat) in rep.cases.items():
            cur = out.cases.setdefault(name, [0, 0])
            cur[0] += run
            cur[1] += sat
        out.counterexamples += rep.counterexamples[:MAX_COUNTEREXAMPLES - len(out.counterexamples)]
    return out


def run_campaigns(theorems: Sequence[str], trials: int, seed: int = 0) -> List[TheoremReport]:
    return [CAMPAIGNS[str(t)](trials=trials, seed=seed) for t in theorems]
