import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weakmix.integer_sets import FiniteIndexSet, InvalidInput, factorial_blocks, multiples
from weakmix.symbolic_structure import (
    BinaryWord,
    StructureSearchFailure,
    char_word,
    detect_periodicity,
    empirical_measure,
    positive_density_translates,
    shift_window,
    smallest_period,
    structure_search,
)

FACT10 = math.factorial(10)


@pytest.fixture(scope="module")
def fblocks():
    return factorial_blocks(10)  # horizon 10! + 10 closes the last block


def brute_period(bits):
    n = len(bits)
    for p in range(1, n + 1):
        if all(bits[k + p] == bits[k] for k in range(n - p)):
            return p
    return n


# --- words --------------------------------------------------------------------

def test_char_word_examples():
    assert str(char_word(FiniteIndexSet([0, 2], 4))) == "10100"
    assert str(char_word(FiniteIndexSet([], 4))) == "00000"


@given(st.integers(1, 80).flatmap(lambda h: st.tuples(st.just(h), st.sets(st.integers(0, h)))))
def test_word_round_trip(hs):
    h, s = hs
    B = FiniteIndexSet(sorted(s), h)
    w = char_word(B)
    assert w.decode() == B
    for k in range(h + 1):
        assert (w.bits[k] == 1) == (k in B)


def test_shift_window_examples():
    w = BinaryWord.from_string("10100")
    assert str(shift_window(w, 1, 3)) == "010"
    assert str(shift_window(w, 0, 5)) == "10100"
    with pytest.raises(InvalidInput):
        shift_window(w, 3, 3)


@given(st.text("01", min_size=12, max_size=40), st.integers(0, 4), st.integers(0, 4), st.integers(1, 4))
def test_shift_composition(s, a, b, L):
    w = BinaryWord.from_string(s)
    if a + b + L > len(w):
        return
    assert shift_window(w, a + b, L) == shift_window(shift_window(w, a, L + b), b, L)


# --- empirical measures -------------------------------------------------------

def test_empirical_measure_periodic():
    B = multiples(3, 400, include_zero=True)
    em = empirical_measure(B, [(0, 299)], 2)
    assert em.one_frequency() == Fraction(1, 3)
    assert em.cylinder_estimates[""] == [1]
    assert em.cylinder_estimates["11"] == [0]


def test_empirical_measure_factorial_block(fblocks):
    em = empirical_measure(fblocks, [(FACT10, FACT10 + 9)], 1)
    assert em.one_frequency() == 1
    assert fblocks.count_between(FACT10, FACT10 + 9) == 10


def test_empirical_measure_window_overflow():
    with pytest.raises(InvalidInput):
        empirical_measure(multiples(3, 30), [(0, 30)], 2)


@given(st.integers(0, 10**6))
@settings(max_examples=30)
def test_one_frequency_matches_window_counts(seed):
    rng = np.random.default_rng(seed)
    h = 300
    B = FiniteIndexSet(np.flatnonzero(rng.random(h + 1) < rng.random()), h)
    wins = []
    for j in range(1, 6):
        a = int(rng.integers(0, 200))
        wins.append((a, a + j + int(rng.integers(0, 90))))
    em = empirical_measure(B, wins, 3)
    for j, (a, b) in enumerate(wins):
        assert em.cylinder_estimates["1"][j] == Fraction(B.count_between(a, b), b - a + 1)
        for ell in (1, 2, 3):
            total = sum(v[j] for p, v in em.cylinder_estimates.items() if len(p) == ell)
            assert total == 1


# --- periodicity --------------------------------------------------------------

def test_periodicity_examples():
    p = detect_periodicity(multiples(3, 300, include_zero=True))
    assert p.period == 3 and p.density == Fraction(1, 3)
    ones = FiniteIndexSet(range(0, 51), 50)
    assert detect_periodicity(ones).period == 1
    rng = np.random.default_rng(0)
    rand = FiniteIndexSet(np.flatnonzero(rng.random(2001) < 0.5), 2000)
    assert detect_periodicity(rand) is None


@given(st.text("01", min_size=1, max_size=60))
def test_smallest_period_is_minimal(s):
    bits = np.frombuffer(s.encode(), dtype=np.uint8) - ord("0")
    assert smallest_period(bits) == brute_period(bits.tolist())


# --- structure search ---------------------------------------------------------

def nested_coherent(B, w):
    bits = B.bitmap
    for i in range(len(w.m_list)):
        for j in range(i + 1, len(w.m_list)):
            mi, ni, nj = w.m_list[i], w.n_list[i], w.n_list[j]
            if not np.array_equal(bits[ni: ni + mi + 1], bits[nj: nj + mi + 1]):
                return False
    return True


def test_structure_factorial_blocks(fblocks):
    w = structure_search(fblocks, [3, 6, 9])
    assert w.verify(fblocks) == []
    assert w.A.to_list() == list(range(10))
    assert w.density >= 0.9
    assert nested_coherent(fblocks, w)
    assert w.metadata["recurrences"][-1] >= 3


def test_structure_periodic_path():
    B = multiples(4, 400, include_zero=True)
    w = structure_search(B, [1, 3, 7])
    assert w.periodic == 4 and w.A == B
    assert w.n_list == [4, 8, 12]
    assert w.verify(B) == []


def test_structure_empty_set():
    B = FiniteIndexSet([], 100)
    w = structure_search(B, [1, 2, 5])
    assert len(w.A) == 0 and w.verify(B) == []


def test_structure_failure_reports_chain():
    # an aperiodic word whose only long recurring windows run out quickly
    rng = np.random.default_rng(5)
    B = FiniteIndexSet(np.flatnonzero(rng.random(201) < 0.5), 200)
    with pytest.raises(StructureSearchFailure) as exc:
        structure_search(B, [2, 20, 40], min_recurrence=3)
    assert len(exc.value.longest_chain) >= 1


def test_structure_precondition():
    with pytest.raises(InvalidInput):
        structure_search(multiples(3, 40), [5, 20])


@given(st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_structure_witness_verifies_on_random_block_sets(seed):
    rng = np.random.default_rng(seed)
    h = 2000
    starts = np.sort(rng.choice(h - 20, size=25, replace=False))
    bits = np.zeros(h + 1, dtype=bool)
    for s in starts:
        bits[s: s + int(rng.integers(3, 12))] = True
    B = FiniteIndexSet.from_bitmap(bits)
    try:
        w = structure_search(B, [1, 3, 6])
    except StructureSearchFailure:
        return
    assert w.verify(B) == []
    assert all(b > a for a, b in zip(w.n_list, w.n_list[1:]))
    if w.periodic is None:
        assert nested_coherent(B, w)


# --- translates ---------------------------------------------------------------

def test_translates_factorial_blocks(fblocks):
    Ao = FiniteIndexSet(range(1, fblocks.horizon + 1), fblocks.horizon)
    I, rep = positive_density_translates(Ao, fblocks, [3, 6, 9])
    assert I.to_list() == list(range(1, 10))
    assert rep.all_passed and rep.inclusion_exclusion_holds
    for m, n, size, ks, ok in rep.checks:
        assert all(k >= n for k in ks)


def test_translates_periodic_evens():
    B = multiples(3, 600, include_zero=True)
    Ao = multiples(2, 600, include_zero=True)
    I, rep = positive_density_translates(Ao, B, [2, 5, 11])
    assert I.to_list() == [k for k in range(12) if k % 6 == 0]
    assert rep.all_passed
    for m, n, size, ks, ok in rep.checks:
        assert all(k % 3 == 0 for k in ks)
