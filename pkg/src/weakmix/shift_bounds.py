"""Sampled certification of shift-boundedness constants.

A scan evaluates ratios::

    ||sum_j lam_j x_{j+k}|| / ||sum_j lam_j x_j||

over sampled weights and all shifts ``k <= shift_max``. The maximum is a
certified *lower* bound on the best constant; analytic upper bounds exist only for
the models that have them (monotone monomial Gram: 1; block counting in the
three-vector construction: sqrt(45/2)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .integer_sets import InvalidInput
from .sequence_models import (
    InnerProductSequence,
    MonomialSequence,
    VectorSequence,
    power_gap_norm_sq,
)

NEAR_SINGULAR = 1e-12
SQRT_45_2 = math.sqrt(45 / 2)


@dataclass
class ShiftBoundReport:
    scheme: str
    constant_estimate: float
    worst_case: dict
    samples_evaluated: int
    near_singular: int
    analytic_upper: float | None = None
    samples: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"scheme": self.scheme, "constant_estimate": self.constant_estimate,
                "worst_case": self.worst_case, "samples_evaluated": self.samples_evaluated,
                "near_singular": self.near_singular, "analytic_upper": self.analytic_upper}


def sample_weights(scheme: str, p: int, rng: np.random.Generator) -> np.ndarray:
    """Dirichlet-uniform simplex weights (convex) or a size-stratified 0/1 subset."""
    if scheme == "convex":
        return rng.dirichlet(np.ones(p))
    if scheme == "zero_one":
        size = int(rng.integers(1, p + 1))
        lam = np.zeros(p)
        lam[rng.choice(p, size=size, replace=False)] = 1.0
        return lam
    raise InvalidInput(f"unknown scheme {scheme!r}")


def _quad_forms(G: np.ndarray, L: np.ndarray) -> np.ndarray:
    return np.einsum("sp,pq,sq->s", L, G, L)


def shift_bound_scan(seq: VectorSequence, scheme: str = "convex", p_max: int = 8,
                     shift_max: int = 8, weight_samples: int = 10_000, seed: int = 0,
                     keep_samples: bool = False) -> ShiftBoundReport:
    """Max observed shifted/unshifted combination-norm ratio.

    Denominators below 1e-12 are counted as near-singular and excluded.
    """
    if p_max < 1 or shift_max < 1:
        raise InvalidInput("p_max and shift_max must be positive")
    if p_max + shift_max > seq.horizon:
        raise InvalidInput("p_max + shift_max exceeds the horizon")
    rng = np.random.default_rng(seed)
    ps = rng.integers(1, p_max + 1, size=weight_samples)
    lams = [sample_weights(scheme, int(p), rng) for p in ps]

    best = -np.inf
    worst = {}
    singular = 0
    kept = []
    gram = isinstance(seq, InnerProductSequence)
    if gram:
        G_all = seq.gram_matrix(np.arange(1, p_max + shift_max + 1))
    for p in np.unique(ps):
        p = int(p)
        sel = np.flatnonzero(ps == p)
        L = np.array([lams[i] for i in sel])
        if gram:
            den2 = _quad_forms(G_all[:p, :p], L)
            dens = np.sqrt(np.maximum(den2, 0.0))
        else:
            dens = np.array([seq.combo_norm(l, np.arange(1, p + 1)) for l in L])
        ok = dens >= NEAR_SINGULAR
        singular += int((~ok).sum()) * shift_max
        for k in range(1, shift_max + 1):
            if gram:
                nums = np.sqrt(np.maximum(_quad_forms(G_all[k:k + p, k:k + p], L), 0.0))
            else:
                nums = np.array([seq.combo_norm(l, np.arange(1 + k, p + k + 1)) for l in L])
            ratios = np.where(ok, nums / np.where(ok, dens, 1.0), -np.inf)
            i = int(np.argmax(ratios))
            if ratios[i] > best:
                best = float(ratios[i])
                worst = {"p": p, "weights": L[i].tolist(), "shift": k,
                         "numerator": float(nums[i]), "denominator": float(dens[i]),
                         "sample": int(sel[i])}
            if keep_samples:
                for r in range(len(sel)):
                    if ok[r]:
                        kept.append((p, L[r], k, float(nums[r]), float(dens[r])))
    analytic = None
    if seq.model == "example_3_3" and scheme == "convex":
        analytic = 1.0
    elif seq.model == "example_6_2" and scheme == "zero_one":
        analytic = SQRT_45_2
    return ShiftBoundReport(scheme, best if best > -np.inf else 0.0, worst,
                            int(weight_samples) * shift_max - singular, singular, analytic, kept)


def blocks_touched(indices: Sequence[int]) -> int:
    """Number of three-vector blocks V_k (indices 3k+1..3k+3) met by ``indices``."""
    return len({(int(i) - 1) // 3 for i in indices})


def block_family_norms(seq_6_2: VectorSequence, k: int) -> np.ndarray:
    """Norms of the seven nonempty 0/1 sums of x_{3k+1}, x_{3k+2}, x_{3k+3}."""
    idx = [3 * k + 1, 3 * k + 2, 3 * k + 3]
    if idx[-1] > seq_6_2.horizon:
        raise InvalidInput(f"block {k} exceeds the horizon")
    out = []
    for mask in range(1, 8):
        w = [float(mask >> i & 1) for i in range(3)]
        out.append(seq_6_2.combo_norm(w, idx))
    return np.array(out)


def convex_unboundedness_witness(seq_6_2: VectorSequence, k_even: int) -> tuple[float, float, float]:
    """Weights lam_{3k+1} = 1, lam_{3k+2} = 2 shifted by 3.

    Returns:
        (ratio, numerator, denominator) with numerator = ||2u_{k+1} + 2w_{k+1}||
        and denominator = ||2u_k - 2v_k||.
    """
    k = int(k_even)
    if k % 2 or k < 0:
        raise InvalidInput(f"k must be an even natural number, got {k_even}")
    if 3 * k + 5 > seq_6_2.horizon:
        raise InvalidInput("3k + 5 exceeds the horizon")
    den = seq_6_2.combo_norm([1.0, 2.0], [3 * k + 1, 3 * k + 2])
    num = seq_6_2.combo_norm([1.0, 2.0], [3 * k + 4, 3 * k + 5])
    return num / den, num, den


@dataclass
class NonOrbitRow:
    k: int
    lhs: float
    rhs: float
    lhs_sq: Fraction
    rhs_sq: Fraction
    upper_bound_sq: Fraction  # 1 / (32 k^2 (k+2)^2 (2k+1)) for ||f_k - f_{k+1}||^2
    lower_bound_sq: Fraction  # 1 / (16 (k+2)^2 (2k+3)) for ||f_{k+2} - f_{k+3}||^2
    implied_operator_norm: float

    @property
    def holds(self) -> bool:
        return (self.lhs_sq >= self.rhs_sq
                and self.rhs_sq / self.k ** 2 <= self.upper_bound_sq
                and self.lhs_sq >= self.lower_bound_sq)


def power_gap_bounds(alpha, eps) -> tuple[Fraction, Fraction]:
    """(upper, lower) bounds on ||t^a - t^(a+e)||^2 from the difference estimates.

    upper = (e/(a+e))^2 / (2(2a+1)) valid for e <= 1; lower = (e/(a+e))^2 / (4(2a+1))
    valid for e <= 1, a >= 2.
    """
    a, e = Fraction(alpha), Fraction(eps)
    r = (e / (a + e)) ** 2
    return r / (2 * (2 * a + 1)), r / (4 * (2 * a + 1))


def non_orbit_certificate(seq_3_3: MonomialSequence, k_list: Sequence[int]) -> list[NonOrbitRow]:
    """Exact check of ||f_{k+2} - f_{k+3}|| >= k ||f_k - f_{k+1}|| for k ≡ 1 (mod 4)."""
    if not isinstance(seq_3_3, MonomialSequence):
        raise InvalidInput("needs the monomial model")
    rows = []
    ex = seq_3_3.schedule.exponents
    s2 = Fraction(seq_3_3.scale) ** 2
    for k in k_list:
        k = int(k)
        if k % 4 != 1:
            raise InvalidInput(f"k = {k} is not 1 mod 4")
        if k + 3 > seq_3_3.horizon:
            raise InvalidInput(f"k + 3 = {k + 3} exceeds the horizon")
        near = s2 * power_gap_norm_sq(ex[k - 1], ex[k] - ex[k - 1])
        far = s2 * power_gap_norm_sq(ex[k + 1], ex[k + 2] - ex[k + 1])
        rhs_sq = k * k * near
        rows.append(NonOrbitRow(
            k=k, lhs=math.sqrt(far), rhs=math.sqrt(rhs_sq), lhs_sq=far, rhs_sq=rhs_sq,
            upper_bound_sq=s2 * Fraction(1, 32 * k * k * (k + 2) ** 2 * (2 * k + 1)),
            lower_bound_sq=s2 * Fraction(1, 16 * (k + 2) ** 2 * (2 * k + 3)),
            implied_operator_norm=math.sqrt(k)))
    return rows
