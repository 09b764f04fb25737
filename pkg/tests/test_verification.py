import numpy as np
import pytest

from mvcan import clustering as cl
from mvcan import verification as vf


def sign_bug(zs, mus, weights):
    # flips the fused distance so the farthest centroid wins
    z = np.concatenate([w * z for w, z in zip(weights, zs)])
    c = np.hstack([w * mu for w, mu in zip(weights, mus)])
    q = 1.0 + np.sum((c - z) ** 2, axis=1)
    return q / q.sum()


def test_identity_exact_when_target_equals_truth():
    labels = np.array([0, 2, 1, 1, 0])
    t = cl.one_hot(labels, 3)
    y_check = t @ cl.match_labels(t, t)
    assert cl.frobenius_accuracy(y_check, t) == 1.0
    y = np.random.default_rng(0).dirichlet(np.ones(3), size=5)
    bound = 1.0 - (np.sum((y_check - y) ** 2) - np.sum((t - y) ** 2)) / 10
    assert bound == 1.0


def test_campaigns_pass_small():
    for rep in vf.run_campaigns(["1", "2", "3", "4", "5"], trials=50, seed=3):
        assert rep.passed, rep.to_text()
        assert rep.satisfied == rep.trials


def test_reports_reproducible_from_seed():
    a = vf.verify_complementarity(trials=30, seed=9).to_text()
    b = vf.verify_complementarity(trials=30, seed=9).to_text()
    assert a == b


def test_decomposition_with_unit_weights_and_single_view():
    rng = np.random.default_rng(0)
    z = rng.normal(size=(12, 3))
    assign = np.arange(12) % 4
    mu = np.array([z[assign == j].mean(0) for j in range(4)])
    per_view = np.sum((z - mu[assign]) ** 2)
    fused = np.hstack([z, z])
    c = np.array([fused[assign == j].mean(0) for j in range(4)])
    assert np.sum((fused - c[assign]) ** 2) == pytest.approx(2 * per_view, rel=1e-12)


def test_consistency_identical_views_and_extreme_ratio():
    rng = np.random.default_rng(4)
    z, mu = vf.informative_view(rng, 4, 3, nearest=2)
    for w in ([1.0, 1.0], [1.0, 1000.0], [1000.0, 1.0]):
        assert int(np.argmax(vf.fused_soft_labels([z, z], [mu, mu], w))) == 2
    z2, mu2 = vf.informative_view(rng, 4, 5, nearest=2)
    assert int(np.argmax(vf.fused_soft_labels([z, z2], [mu, mu2], [1.0, 1000.0]))) == 2


def test_equal_gaps_larger_factor_wins():
    rng = np.random.default_rng(1)
    z1, mu1 = vf.informative_view(rng, 2, 3, nearest=0)
    z2, mu2 = vf.mirrored_view(rng, z1, mu1)
    assert int(np.argmin(vf.distances(z2, mu2))) == 1
    assert int(np.argmax(vf.fused_soft_labels([z1, z2], [mu1, mu2], [2.0, 1.0]))) == 0
    assert int(np.argmax(vf.fused_soft_labels([z1, z2], [mu1, mu2], [1.0, 2.0]))) == 1
    # equal factors tie exactly: the construction excludes this case
    y = vf.fused_soft_labels([z1, z2], [mu1, mu2], [1.5, 1.5])
    assert y[0] == y[1]


def test_threshold_straddle_flips_assignment():
    rng = np.random.default_rng(2)
    va = vf.informative_view(rng, 2, 2, nearest=1)
    vb = vf.informative_view(rng, 2, 2, nearest=0)
    delta = vf.threshold_delta(va, vb)
    zs, mus = [va[0], vb[0]], [va[1], vb[1]]
    up = vf.fused_soft_labels(zs, mus, [np.sqrt(delta * 1.001), 1.0])
    down = vf.fused_soft_labels(zs, mus, [np.sqrt(delta * 0.999), 1.0])
    assert int(np.argmax(up)) == 1 and int(np.argmax(down)) == 0


def test_noisy_witness_guard():
    rng = np.random.default_rng(0)
    z, mu = vf.noisy_view(rng, 3, 2, eps=1e-6)
    vf.validate_noisy(z, mu, 1e-6)
    z, mu = vf.informative_view(rng, 3, 2, nearest=0)
    with pytest.raises(vf.WitnessError, match="not noisy"):
        vf.validate_noisy(z, mu, 1e-6)
    with pytest.raises(vf.WitnessError):
        vf.verify_noise_robustness(trials=1, eps=5.0)


def test_informative_witness_failure_is_reported():
    class Stuck:
        def normal(self, scale=1.0, size=None):
            return np.zeros(size)
    with pytest.raises(vf.WitnessError, match="no informative witness"):
        vf.informative_view(Stuck(), 3, 2, nearest=0)


def test_sign_bug_is_caught():
    rep = vf.verify_consistency(trials=20, seed=0, fuse=sign_bug)
    assert not rep.passed
    assert rep.counterexamples
    ce = rep.counterexamples[0]
    # the payload replays the failure
    got = int(np.argmax(sign_bug([np.array(z) for z in ce["z"]],
                                 [np.array(m) for m in ce["mu"]], ce["weights"])))
    assert got == ce["fused"] != ce["shared"]


def test_noise_case_one_is_empirical():
    rep = vf.TheoremReport("5", "x")
    rep.record("mixed", False, {})
    rep.record("all-noisy", True)
    assert rep.passed and not rep.case_passed("mixed")
    rep.record("all-noisy", False, {})
    assert not rep.passed


def test_merge_reports_sums_shards():
    a = vf.verify_consistency(trials=10, seed=0)
    b = vf.verify_consistency(trials=15, seed=1)
    m = vf.merge_reports([a, b])
    assert m.trials == 25 and m.cases["consistency"] == [25, 25]
    with pytest.raises(ValueError):
        vf.merge_reports([a, vf.verify_kmeans_decomposition(trials=2)])


def test_text_report_fields():
    text = vf.verify_kmeans_decomposition(trials=5).to_text()
    for field in ("theorem: 2", "trials: 5", "satisfied: 5", "status: PASS", "counterexamples: 0"):
        assert field in text
