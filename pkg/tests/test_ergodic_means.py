import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from weakmix.ergodic_means import (
    HypothesisRefused,
    corollary72_chain,
    ergodicity_test,
    prefix_mean_norms,
    shifted_combo_sup,
    shifted_sups,
    theorem71_discrepancy_check,
    theorem71_threshold_check,
    windowed_mean_norm,
)
from weakmix.integer_sets import InvalidInput
from weakmix.mixing_analysis import geometric_grid
from weakmix.sequence_models import (
    CoordinateSequence,
    alternating,
    constant,
    make_example_3_1,
    make_example_3_3,
    make_operator_orbit,
    orthonormal,
    zero,
)


def random_orbit(rng, d=4, h=200):
    A = rng.standard_normal((d, d))
    U = A / np.linalg.norm(A, 2) * rng.uniform(0.8, 1.05)
    return make_operator_orbit(U, rng.standard_normal(d), h).normalized()


# --- windowed means -----------------------------------------------------------

def test_windowed_mean_examples():
    c = constant(40)
    assert all(windowed_mean_norm(c, m, n) == pytest.approx(1.0) for m, n in [(0, 1), (3, 17), (0, 40)])
    o = orthonormal(40)
    for m, n in [(0, 1), (5, 9), (10, 40)]:
        assert windowed_mean_norm(o, m, n) == pytest.approx(1 / math.sqrt(n - m))
    a = alternating(40)
    assert windowed_mean_norm(a, 3, 13) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(InvalidInput):
        windowed_mean_norm(o, 5, 5)
    with pytest.raises(InvalidInput):
        windowed_mean_norm(o, 0, 41)


def test_windowed_mean_reproduces_combo_norm():
    seq = make_example_3_3(60)
    for m, n in [(0, 7), (12, 50), (59, 60)]:
        L = n - m
        assert windowed_mean_norm(seq, m, n) == seq.combo_norm(np.full(L, 1 / L), np.arange(m + 1, n + 1))


# --- ergodicity test ----------------------------------------------------------

def test_ergodicity_verdicts():
    r = ergodicity_test(orthonormal(4096), tolerance=0.05)
    assert r.verdict == "decaying"
    ns, vals = zip(*r.per_n)
    assert np.allclose(vals, 1 / np.sqrt(ns))
    z = ergodicity_test(zero(100))
    assert z.verdict == "decaying" and max(z.values()) == 0


def test_ergodicity_example_3_1_stalls():
    seq = make_example_3_1(horizon=2048)
    n = seq.schedule.block_starts
    vals = prefix_mean_norms(seq, [n[j] - 1 for j in range(1, 11)])
    assert np.all(vals >= 0.5)
    assert ergodicity_test(seq).verdict in ("stalled", "failed")


# --- shifted combinations -----------------------------------------------------

def test_shifted_sup_examples():
    o = orthonormal(200)
    for p in (1, 4, 25):
        assert shifted_combo_sup(o, np.full(p, 1 / p), 50) == pytest.approx(1 / math.sqrt(p))
    rng = np.random.default_rng(0)
    X = rng.standard_normal((60, 3))
    seq = CoordinateSequence("random", X)
    lam = np.zeros(5)
    lam[0] = 1
    assert shifted_combo_sup(seq, lam, 30) == pytest.approx(np.linalg.norm(X[1:31], axis=1).max())
    with pytest.raises(InvalidInput):
        shifted_combo_sup(o, np.full(10, 0.1), 191)


def test_example_3_3_attained_at_first_shift():
    seq = make_example_3_3(80)
    rng = np.random.default_rng(2)
    for _ in range(30):
        p = int(rng.integers(1, 10))
        lam = rng.dirichlet(np.ones(p))
        s = shifted_sups(seq, lam, 60)
        assert int(np.argmax(s)) == 0


@given(st.integers(1, 60))
def test_k_max_zero_is_prefix_mean(p):
    seq = make_example_3_3(60)
    assert shifted_combo_sup(seq, np.full(p, 1 / p), 0) == pytest.approx(windowed_mean_norm(seq, 0, p), rel=1e-14)


# --- discrepancy bound --------------------------------------------------------

def test_discrepancy_single_weight_closed_form():
    rng = np.random.default_rng(1)
    seq = random_orbit(rng)
    for m, n in [(0, 5), (10, 11), (40, 120)]:
        disc, bound = theorem71_discrepancy_check(seq, [1.0], m, n)
        direct = seq.combo_norm([1, -1], [m + 1, n + 1]) / (n - m)
        assert disc == pytest.approx(direct, rel=1e-12, abs=1e-15)
        assert bound == 2 / (n - m)


def test_discrepancy_constant_is_zero():
    disc, _ = theorem71_discrepancy_check(constant(100), np.full(7, 1 / 7), 3, 50)
    assert disc == pytest.approx(0.0, abs=1e-15)


def test_discrepancy_random_orbits():
    rng = np.random.default_rng(11)
    for _ in range(100):
        seq = random_orbit(rng)
        p = int(rng.integers(1, 12))
        lam = rng.dirichlet(np.ones(p))
        m = int(rng.integers(0, 80))
        n = int(rng.integers(m + p, 200 - p + 1))
        disc, bound = theorem71_discrepancy_check(seq, lam, m, n)
        assert disc <= bound


def test_discrepancy_requires_normalization():
    big = orthonormal(30).scaled(2.0)
    with pytest.raises(InvalidInput):
        theorem71_discrepancy_check(big, [1.0], 0, 5)


# --- threshold check ----------------------------------------------------------

def test_threshold_orthonormal():
    seq = orthonormal(4096)
    r = theorem71_threshold_check(seq, np.full(64, 1 / 64), 0.25, seed=3)
    assert r.passed
    assert r.shifted_sup == pytest.approx(0.125)
    assert r.threshold_checks == [(64, 0.25, 1024)]
    assert all(n - m >= 1024 for m, n, _ in r.entries)
    for m, n, v in r.entries:
        assert v == pytest.approx(1 / math.sqrt(n - m))


def test_threshold_zero_passes():
    r = theorem71_threshold_check(zero(500), np.full(5, 0.2), 0.1, seed=0)
    assert r.passed and len(r.entries) > 0


def test_threshold_constant_refused():
    with pytest.raises(HypothesisRefused) as exc:
        theorem71_threshold_check(constant(300), np.full(3, 1 / 3), 0.5)
    assert exc.value.k == 1 and exc.value.value == pytest.approx(1.0)


@given(st.integers(0, 10**6))
@settings(max_examples=15, deadline=None)
def test_threshold_never_violated_when_hypothesis_holds(seed):
    rng = np.random.default_rng(seed)
    h = 1500
    seq = CoordinateSequence("random", rng.standard_normal((h, 40))).normalized()
    p = int(rng.integers(4, 20))
    lam = rng.dirichlet(np.ones(p))
    eps = 2 * shifted_combo_sup(seq, lam, h - p) * 1.01
    assume(math.ceil(4 * p / eps) <= h)
    r = theorem71_threshold_check(seq, lam, eps, seed=seed)
    assert r.passed and r.entries


def test_prefix_means_dominated_by_windowed():
    # every prefix mean is itself a windowed mean with m = 0
    seq = make_example_3_3(120)
    ns = geometric_grid(120)
    for n, v in zip(ns, prefix_mean_norms(seq, ns)):
        assert v == windowed_mean_norm(seq, 0, n)
        windows = [windowed_mean_norm(seq, m, n) for m in range(0, n)]
        assert v <= max(windows)


# --- chained corollary --------------------------------------------------------

def test_chain_orthonormal():
    r = corollary72_chain(orthonormal(4096), 1.0, 64, 0.2, seed=1)
    assert r.hull_norm == pytest.approx(1 / 8, abs=1e-6)
    assert r.verdict == "consistent"
    for m, n, v in r.threshold.entries:
        assert v <= 2 / 8 + 2 * 64 / (n - m) + 1e-9


def test_chain_example_3_3_head():
    r = corollary72_chain(make_example_3_3(200), 1.0, 8, 0.5, seed=2)
    assert r.hull_norm <= 0.5
    assert r.shifted_sup <= r.hull_norm + 1e-9  # c = 1 and the sup is taken at k = 1
    assert r.verdict == "consistent"


def test_chain_constant_non_ergodic():
    r = corollary72_chain(constant(100), 1.0, 16, 0.5)
    assert r.verdict == "non-ergodic"
    assert r.hull_norm == pytest.approx(1.0)
