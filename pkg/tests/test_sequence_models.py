import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from weakmix.integer_sets import InvalidInput
from weakmix.sequence_models import (
    BlockSchedule,
    CoordFunctional,
    DiracFunctional,
    ExplicitGramSequence,
    MonomialSchedule,
    UnsupportedModel,
    constant,
    example_3_3_exponents,
    example_6_2_theta,
    make_example_3_1,
    make_example_3_2,
    make_example_3_3,
    make_example_6_2,
    make_operator_orbit,
    orthonormal,
    power_gap_norm_sq,
    rotation,
    sequence_from_spec,
)
from weakmix.shift_bounds import block_family_norms


def tent_combo_on_grid(seq, w, idx, grid):
    """Dense evaluation of sum_i w_i f_{k_i} straight from the tent formula."""
    vals = seq.values(idx, grid)
    return np.asarray(w) @ vals


# --- block schedules ----------------------------------------------------------

def test_default_schedule():
    s = BlockSchedule.default(600)
    assert s.block_starts[:6] == (1, 2, 3, 5, 9, 17)
    assert s.knots[0] == 1 / 2


def test_schedule_ratio_violation_names_pair():
    with pytest.raises(InvalidInput, match=r"\(5, 8\)"):
        BlockSchedule((1, 2, 3, 5, 8), (0.5, 0.4, 0.3, 0.2, 0.1, 0.05))


@given(st.lists(st.integers(0, 40), min_size=1, max_size=10))
def test_schedule_ratio_exact(extra):
    n = [1, 2]
    for e in extra:
        n.append(2 * n[-1] - 1 + e)
    s = BlockSchedule(tuple(n))
    for a, b in zip(s.block_starts, s.block_starts[1:]):
        assert Fraction(a - 1, b - 1) <= Fraction(1, 2)


# --- tent model -------------------------------------------------------------

def test_example_3_1_first_tent():
    seq = make_example_3_1(horizon=64)
    assert seq.left[0] == pytest.approx(1 / 3) and seq.right[0] == 0.5
    assert seq.values([1], [5 / 12])[0, 0] == pytest.approx(1.0)


def test_example_3_1_vanishes_at_zero_and_is_unit():
    seq = make_example_3_1(horizon=300)
    ks = np.arange(1, 301)
    assert np.all(seq.values(ks, [0.0]) == 0)
    grid = np.union1d(np.linspace(0, 1, 20001), seq.breakpoints())
    vals = seq.values(ks[::17], grid)
    assert np.all((vals >= 0) & (vals <= 1))
    assert np.allclose(vals.max(axis=1), 1.0)
    assert np.all(seq.norms() == 1)


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=12), st.integers(0, 10**6))
@settings(max_examples=60)
def test_tent_combo_norm_matches_breakpoint_evaluation(w, seed):
    seq = make_example_3_1(horizon=200)
    rng = np.random.default_rng(seed)
    idx = rng.integers(1, 201, size=len(w))
    # piecewise linear: the sup of |.| is attained at a breakpoint
    oracle = np.abs(tent_combo_on_grid(seq, w, idx, seq.breakpoints())).max()
    assert seq.combo_norm(w, idx) == pytest.approx(oracle, abs=1e-12)


def test_example_3_1_block_means_at_least_half():
    seq = make_example_3_1(horizon=2048)
    n = seq.schedule.block_starts
    for j in range(1, 11):
        N = n[j] - 1
        assert seq.combo_norm(np.full(N, 1 / N), np.arange(1, N + 1)) >= 0.5


def test_tent_rejects_coordinate_functionals():
    with pytest.raises(UnsupportedModel):
        make_example_3_1(horizon=8).pairings(CoordFunctional([1.0]), [1])


def test_dirac_pairing_is_point_value():
    seq = make_example_3_1(horizon=50)
    t = 0.41
    assert np.allclose(seq.pairings(DiracFunctional(t), range(1, 51)), seq.values(range(1, 51), [t])[:, 0])


# --- block basis model ------------------------------------------------------

def test_example_3_2_gram():
    seq = make_example_3_2(horizon=64)
    n2 = seq.schedule.block_starts[1]
    assert seq.gram(1, 1) == 1 and seq.gram(n2, 1) == 0


def test_example_3_2_block_sum():
    seq = make_example_3_2(horizon=64)
    n = seq.schedule.block_starts
    for j in range(1, 6):
        L = n[j] - n[j - 1]
        assert seq.combo_norm(np.ones(L), np.arange(n[j - 1], n[j])) == pytest.approx(L, abs=0)


def test_example_3_2_quarter_bound():
    seq = make_example_3_2(horizon=2048)
    n = seq.schedule.block_starts
    for j in range(1, 11):
        N = n[j] - 1
        assert seq.combo_norm(np.full(N, 1 / N), np.arange(1, N + 1)) ** 2 >= 0.25


# --- monomial model ---------------------------------------------------------

def test_example_3_3_exponent_rule():
    ex = example_3_3_exponents(8)
    assert ex[:4] == [1, 1 + Fraction(1, 12), 2, Fraction(5, 2)]
    assert ex[4:] == [5, 5 + Fraction(1, 28), 6, Fraction(13, 2)]


def test_monomial_gram_examples():
    seq = make_example_3_3(8)
    assert seq.gram_exact(1, 3) == Fraction(1, 4)
    assert power_gap_norm_sq(2, Fraction(1, 2)) == Fraction(1, 330)
    assert quad(lambda t: (t**2 - t**2.5) ** 2, 0, 1, epsabs=1e-14)[0] == pytest.approx(1 / 330, abs=1e-13)
    assert seq.combo_norm_sq_exact([1, -1], [3, 4]) == Fraction(1, 330)


def test_monomial_gram_against_quadrature():
    seq = make_example_3_3(120)
    rng = np.random.default_rng(7)
    for _ in range(100):
        j, k = rng.integers(1, 121, size=2)
        a, b = seq.alpha[j - 1], seq.alpha[k - 1]
        q = quad(lambda t: t ** a * t ** b, 0, 1, epsabs=1e-13, epsrel=1e-13)[0]
        assert abs(q - seq.gram(j, k)) <= 1e-9


@given(st.integers(0, 50), st.integers(1, 30))
def test_power_gap_closed_form(a_num, e_den):
    a, e = Fraction(a_num, 4) + 1, Fraction(1, e_den)
    direct = 1 / (2 * a + 1) - 2 / (2 * a + e + 1) + 1 / (2 * a + 2 * e + 1)
    assert power_gap_norm_sq(a, e) == direct


def test_monomial_schedule_must_increase():
    with pytest.raises(InvalidInput):
        MonomialSchedule((1, 1))


def test_example_3_3_monotone_shift():
    seq = make_example_3_3(64)
    rng = np.random.default_rng(3)
    for _ in range(200):
        p = int(rng.integers(1, 9))
        lam = rng.dirichlet(np.ones(p))
        vals = [seq.combo_norm(lam, np.arange(1 + k, p + k + 1)) for k in range(0, 64 - p + 1)]
        assert np.all(np.diff(vals) <= 1e-15)


# --- three-vector block model -----------------------------------------------

def test_example_6_2_structure():
    seq = make_example_6_2(303)
    assert np.all(seq.norms(np.arange(1, 303, 3)) == 2)
    for k in range(101):
        th = example_6_2_theta(k)
        d = 2 * math.sin(th / 2)
        assert 0 < d < 1 / (k + 3)
    k = 4
    assert seq.combo_norm([1, 1], [3 * (k + 1) + 1, 3 * (k + 1) + 2]) == pytest.approx(math.sqrt(5))
    # 2u_{k+1} + 2w_{k+1}
    assert seq.combo_norm([1, 2], [3 * k + 4, 3 * k + 5]) == pytest.approx(2 * math.sqrt(2), abs=1e-14)


def test_example_6_2_cross_block_orthogonal_and_norm_range():
    seq = make_example_6_2(90)
    G = seq.gram_matrix(np.arange(1, 91))
    blocks = (np.arange(90)) // 3
    assert np.all(G[blocks[:, None] != blocks[None, :]] == 0)
    for k in range(30):
        nr = block_family_norms(seq, k)
        assert np.all(nr >= 2 / 3) and np.all(nr <= math.sqrt(5) + 1e-15)


# --- orbits and generic invariants --------------------------------------------

def test_orbit_examples():
    z = make_operator_orbit(np.zeros((2, 2)), [1.0, 2.0], 10)
    assert np.all(z.norms() == 0)
    c = make_operator_orbit(np.eye(2), [1.0, 0.0], 10)
    assert c.combo_norm(np.full(10, 0.1), np.arange(1, 11)) == pytest.approx(1.0)
    r = make_operator_orbit(rotation(1.0, 0.999), [1.0, 0.0], 50)
    assert np.allclose(r.norms(), 0.999 ** np.arange(1, 51), rtol=1e-12)
    with pytest.raises(InvalidInput):
        make_operator_orbit(np.eye(3), [1.0, 0.0], 5)


def test_combo_norm_basics():
    seq = orthonormal(10)
    assert seq.combo_norm([1], [4]) == seq.norms([4])[0]
    assert seq.combo_norm([1, -1], [3, 3]) == 0
    with pytest.raises(InvalidInput):
        seq.combo_norm([1], [11])


models = st.sampled_from(["orthonormal", "example_3_2", "example_3_3", "example_6_2", "orbit"])


def _build(name, h):
    if name == "orbit":
        return make_operator_orbit(rotation(0.7, 0.99), [1.0, 0.5], h)
    return sequence_from_spec({"model": name}, h)


@given(models, st.integers(0, 10**6))
@settings(max_examples=40, deadline=None)
def test_gram_invariants(name, seed):
    seq = _build(name, 40)
    rng = np.random.default_rng(seed)
    idx = rng.integers(1, 41, size=8)
    G = seq.gram_matrix(idx)
    assert np.array_equal(G, G.T)
    assert np.linalg.eigvalsh(G).min() >= -1e-9
    w = rng.standard_normal(8)
    assert abs(seq.combo_norm(w, idx) ** 2 - w @ G @ w) <= 1e-10
    assert np.all(seq.norms() <= seq.bound + 1e-9)


def test_explicit_gram_validation():
    ExplicitGramSequence([[1, 0.5], [0.5, 1]])
    with pytest.raises(InvalidInput):
        ExplicitGramSequence([[1, 2], [2, 1]])
    with pytest.raises(InvalidInput):
        ExplicitGramSequence([[1, 0.5], [0.4, 1]])


def test_scaled_and_normalized():
    seq = constant(5).scaled(3.0)
    assert seq.bound == 3 and seq.combo_norm([1], [1]) == 3
    assert seq.normalized().bound == 1


def test_functional_dual_norm_enforced():
    with pytest.raises(InvalidInput):
        CoordFunctional([1.0, 1.0])
    with pytest.raises(InvalidInput):
        DiracFunctional(1.5)
