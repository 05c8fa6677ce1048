"""Windowed Cesàro means, shifted convex combinations and the quantitative ergodic bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .hull_geometry import min_norm_in_hull
from .integer_sets import InvalidInput
from .mixing_analysis import MixingReport, decay_verdict, geometric_grid
from .sequence_models import InnerProductSequence, UnsupportedModel, VectorSequence

BOUND_SLACK = 1e-12
RANDOM_WINDOWS = 100


class HypothesisRefused(ValueError):
    """The shifted-sup hypothesis fails; ``k`` is the first offending shift."""

    def __init__(self, message: str, k: int, value: float):
        super().__init__(message)
        self.k = k
        self.value = value


def windowed_mean_norm(seq: VectorSequence, m: int, n: int) -> float:
    """||(1/(n-m)) sum_{k=m+1}^{n} x_k||."""
    if not 0 <= m < n <= seq.horizon:
        raise InvalidInput(f"bad window (m={m}, n={n}) for horizon {seq.horizon}")
    L = n - m
    return seq.combo_norm(np.full(L, 1.0 / L), np.arange(m + 1, n + 1))


def prefix_mean_norms(seq: VectorSequence, ns: Sequence[int]) -> np.ndarray:
    return np.array([windowed_mean_norm(seq, 0, int(n)) for n in ns])


def ergodicity_test(seq: VectorSequence, tolerance: float = 1e-2, ratio: float = 1.2) -> MixingReport:
    """Prefix means ||(1/n) sum_{k<=n} x_k|| on a geometric grid, with a decay verdict."""
    ns = geometric_grid(seq.horizon, ratio)
    vals = prefix_mean_norms(seq, ns)
    return MixingReport("prefix_mean_norm", [(n, float(v)) for n, v in zip(ns, vals)],
                        decay_verdict(vals, tolerance), tolerance, "exact")


def _check_weights(weights) -> np.ndarray:
    lam = np.asarray(weights, dtype=float).ravel()
    if lam.size == 0 or np.any(lam < 0) or not math.isclose(lam.sum(), 1.0, abs_tol=1e-12):
        raise InvalidInput("weights must be a nonempty convex combination")
    return lam


def shifted_sups(seq: VectorSequence, weights, k_max: int) -> np.ndarray:
    """combo_norm(weights, [1+k, ..., p+k]) for k = 1..k_max (k = 0 alone when k_max = 0)."""
    lam = np.asarray(weights, dtype=float).ravel()
    p = lam.size
    if p + k_max > seq.horizon:
        raise InvalidInput(f"p + k_max = {p + k_max} exceeds the horizon {seq.horizon}")
    ks = range(1, k_max + 1) if k_max > 0 else [0]
    base = np.arange(1, p + 1)
    return np.array([seq.combo_norm(lam, base + k) for k in ks])


def shifted_combo_sup(seq: VectorSequence, weights, k_max: int) -> float:
    """max over k in [1, k_max] of ||sum_j lam_j x_{j+k}||; k_max = 0 gives the unshifted norm."""
    return float(shifted_sups(seq, weights, k_max).max())


def _require_normalized(seq: VectorSequence):
    if seq.bound > 1.0 + BOUND_SLACK:
        raise InvalidInput(f"sequence bound {seq.bound} exceeds 1; rescale with .normalized()")


def discrepancy_weights(lam: np.ndarray, m: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients over indices m+1..n+p of window mean minus shifted window mean."""
    p = lam.size
    L = n - m
    idx = np.arange(m + 1, n + p + 1)
    c = np.zeros(idx.size)
    c[: L] += 1.0 / L
    for j in range(1, p + 1):
        # sum_{k=m+1}^{n} x_{k+j}: positions j..j+L-1 in idx
        c[j: j + L] -= lam[j - 1] / L
    return c, idx


def theorem71_discrepancy_check(seq: VectorSequence, weights, m: int, n: int) -> tuple[float, float]:
    """Distance between a window mean and its shifted convex average, against 2p/(n-m).

    Returns:
        (discrepancy, bound). Raises AssertionError if the bound is exceeded.
    """
    _require_normalized(seq)
    lam = _check_weights(weights)
    p = lam.size
    if n - m < p or m < 0:
        raise InvalidInput("window must satisfy n - m >= p")
    if n + p > seq.horizon:
        raise InvalidInput(f"n + p = {n + p} exceeds the horizon {seq.horizon}")
    c, idx = discrepancy_weights(lam, m, n)
    disc = seq.combo_norm(c, idx)
    bound = 2 * p / (n - m)
    if not disc <= bound:
        raise AssertionError(f"discrepancy {disc} > {bound} at m={m}, n={n}")
    return disc, bound


@dataclass
class WindowedMeanReport:
    entries: list  # (m, n, mean norm)
    threshold_checks: list  # (p, epsilon, verified span)
    violations: list = field(default_factory=list)
    shifted_sup: float = 0.0
    sup_shift: int = 0

    @property
    def passed(self) -> bool:
        return not self.violations


def _threshold_windows(h: int, span: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    grid = [0] + geometric_grid(h, 1.2)
    wins = {(m, n) for m in grid for n in grid if n - m >= span}
    for _ in range(RANDOM_WINDOWS):
        L = int(rng.integers(span, h + 1))
        m = int(rng.integers(0, h - L + 1))
        wins.add((m, m + L))
    return sorted(wins)


def theorem71_threshold_check(seq: VectorSequence, weights, epsilon: float, seed: int = 0,
                              k_max: int | None = None) -> WindowedMeanReport:
    """Check windowed means <= epsilon over windows of length >= 4p/epsilon.

    The hypothesis ``sup_k ||sum_j lam_j x_{j+k}|| <= epsilon/2`` is verified over
    k = 1..k_max (default horizon - p) first; failure raises HypothesisRefused.
    """
    _require_normalized(seq)
    lam = _check_weights(weights)
    if epsilon <= 0:
        raise InvalidInput("epsilon must be positive")
    p = lam.size
    h = seq.horizon
    k_max = h - p if k_max is None else int(k_max)
    sups = shifted_sups(seq, lam, k_max)
    bad = np.flatnonzero(sups > epsilon / 2)
    if bad.size:
        k = int(bad[0]) + (1 if k_max > 0 else 0)
        raise HypothesisRefused(
            f"shifted combination norm {sups[bad[0]]} > epsilon/2 = {epsilon / 2} at k = {k}",
            k, float(sups[bad[0]]))
    span = math.ceil(4 * p / epsilon)
    if span > h:
        raise InvalidInput(f"required span {span} exceeds the horizon {h}")
    rng = np.random.default_rng(seed)
    entries, violations = [], []
    for m, n in _threshold_windows(h, span, rng):
        v = windowed_mean_norm(seq, m, n)
        entries.append((m, n, v))
        if v > epsilon:
            violations.append((m, n, v))
    top = int(np.argmax(sups))
    return WindowedMeanReport(entries, [(p, float(epsilon), span)], violations,
                              float(sups[top]), top + (1 if k_max > 0 else 0))


@dataclass
class ChainReport:
    p_max: int
    hull_norm: float
    hull_gap: float
    weights: list
    shift_bound_c: float
    shifted_sup: float
    slack: float
    epsilon: float
    verdict: str  # "consistent" | "non-ergodic" | "inconsistent"
    threshold: WindowedMeanReport | None = None
    note: str = ""


def corollary72_chain(seq: VectorSequence, shift_bound_c: float, p_max: int, epsilon: float,
                      hull_tol: float = 1e-10, seed: int = 0) -> ChainReport:
    """Hull weights from [1, p_max] pushed through the shift bound into the threshold check.

    If the min-norm point has norm a <= epsilon, its weights satisfy
    ``sup_k ||sum lam_j x_{j+k}|| <= c a`` for a true convex shift constant c. The
    measured sup minus c a is reported as slack (c is only sampled). The threshold
    check then runs with 2c·epsilon in place of epsilon/2.
    """
    if not isinstance(seq, InnerProductSequence):
        raise UnsupportedModel("the chain needs an inner-product model")
    seq = seq.normalized()
    cert = min_norm_in_hull(seq, np.arange(1, p_max + 1), tol=hull_tol)
    a = cert.achieved_norm
    c = float(shift_bound_c)
    lam = np.clip(cert.weights, 0.0, None)
    lam = lam / lam.sum()
    base = dict(p_max=p_max, hull_norm=a, hull_gap=cert.gap, weights=lam.tolist(),
                shift_bound_c=c, epsilon=float(epsilon))
    if a > epsilon:
        return ChainReport(**base, shifted_sup=float("nan"), slack=0.0, verdict="non-ergodic",
                           note="hull over the head segment stays away from 0")
    sup = shifted_combo_sup(seq, lam, seq.horizon - p_max)
    slack = max(0.0, sup - c * a)
    eps_eff = 4 * c * epsilon
    try:
        thr = theorem71_threshold_check(seq, lam, max(eps_eff, 2 * sup), seed=seed)
    except (HypothesisRefused, InvalidInput) as exc:
        return ChainReport(**base, shifted_sup=sup, slack=slack, verdict="inconsistent",
                           note=str(exc))
    verdict = "consistent" if thr.passed else "inconsistent"
    return ChainReport(**base, shifted_sup=sup, slack=slack, verdict=verdict, threshold=thr)
