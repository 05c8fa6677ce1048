"""Finite subsets of the natural numbers and the density statistics defined on them.

Every set carries an explicit horizon; all counts are taken inside ``[0, horizon]``
and every density statement is an estimate at that horizon, never a limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

BITMAP_LIMIT = 2**26


class InvalidInput(ValueError):
    """Raised when an operation receives arguments outside its domain."""


@dataclass(frozen=True, eq=False)
class FiniteIndexSet:
    """A finite, strictly increasing set of nonnegative integers ``<= horizon``.

    Modules working over N* simply never put 0 in the set; the symbolic module
    works over N and may.
    """

    elements: np.ndarray
    horizon: int
    _bitmap: np.ndarray | None = field(default=None, repr=False)
    _prefix: np.ndarray | None = field(default=None, repr=False)

    def __init__(self, elements: Iterable[int], horizon: int):
        horizon = int(horizon)
        if horizon < 1:
            raise InvalidInput(f"horizon must be >= 1, got {horizon}")
        arr = np.asarray(list(elements) if not isinstance(elements, np.ndarray) else elements,
                         dtype=np.int64).ravel()
        if arr.size:
            if np.any(np.diff(arr) <= 0):
                arr = np.unique(arr)
            if arr[0] < 0:
                raise InvalidInput("elements must be nonnegative")
            if arr[-1] > horizon:
                raise InvalidInput(f"element {int(arr[-1])} exceeds horizon {horizon}")
        arr.setflags(write=False)
        object.__setattr__(self, "elements", arr)
        object.__setattr__(self, "horizon", horizon)
        object.__setattr__(self, "_bitmap", None)
        object.__setattr__(self, "_prefix", None)

    @classmethod
    def from_bitmap(cls, bits: np.ndarray) -> "FiniteIndexSet":
        bits = np.asarray(bits).astype(bool)
        return cls(np.flatnonzero(bits), len(bits) - 1)

    def __len__(self) -> int:
        return int(self.elements.size)

    def __iter__(self):
        return (int(x) for x in self.elements)

    def __contains__(self, k) -> bool:
        k = int(k)
        if k < 0 or k > self.horizon:
            return False
        if self.horizon <= BITMAP_LIMIT:
            return bool(self.bitmap[k])
        i = np.searchsorted(self.elements, k)
        return i < self.elements.size and self.elements[i] == k

    def __eq__(self, other) -> bool:
        if not isinstance(other, FiniteIndexSet):
            return NotImplemented
        return self.horizon == other.horizon and np.array_equal(self.elements, other.elements)

    def __repr__(self) -> str:
        head = ", ".join(str(int(x)) for x in self.elements[:8])
        more = ", ..." if self.elements.size > 8 else ""
        return f"FiniteIndexSet({{{head}{more}}}, horizon={self.horizon})"

    @property
    def bitmap(self) -> np.ndarray:
        """Boolean membership array indexed by ``0..horizon``."""
        if self._bitmap is None:
            if self.horizon > BITMAP_LIMIT:
                raise InvalidInput("horizon too large for a bitmap")
            bits = np.zeros(self.horizon + 1, dtype=bool)
            bits[self.elements] = True
            bits.setflags(write=False)
            object.__setattr__(self, "_bitmap", bits)
        return self._bitmap

    @property
    def prefix_counts(self) -> np.ndarray:
        """``prefix_counts[n] = card(A ∩ [1, n])`` for ``n = 0..horizon``."""
        if self._prefix is None:
            bits = self.bitmap.astype(np.int64)
            bits[0] = 0
            pc = np.cumsum(bits)
            pc.setflags(write=False)
            object.__setattr__(self, "_prefix", pc)
        return self._prefix

    def count_between(self, a: int, b: int) -> int:
        """card(A ∩ [a, b]) for 0 <= a <= b <= horizon."""
        lo = np.searchsorted(self.elements, a, side="left")
        hi = np.searchsorted(self.elements, b, side="right")
        return int(hi - lo)

    def kth(self, j: int) -> int:
        """The j-th element, 1-based."""
        return int(self.elements[j - 1])

    def union(self, other: "FiniteIndexSet") -> "FiniteIndexSet":
        return FiniteIndexSet(np.union1d(self.elements, other.elements),
                              max(self.horizon, other.horizon))

    def intersection(self, other: "FiniteIndexSet") -> "FiniteIndexSet":
        return FiniteIndexSet(np.intersect1d(self.elements, other.elements),
                              min(self.horizon, other.horizon))

    def restrict(self, a: int, b: int) -> "FiniteIndexSet":
        """Elements in ``[a, b]``, keeping the horizon at ``b``."""
        mask = (self.elements >= a) & (self.elements <= b)
        return FiniteIndexSet(self.elements[mask], b)

    def positive(self) -> "FiniteIndexSet":
        """Drop 0: the view of this set as a subset of N*."""
        return FiniteIndexSet(self.elements[self.elements > 0], self.horizon)

    def to_list(self) -> list[int]:
        return [int(x) for x in self.elements]


@dataclass
class DensityProfile:
    ns: np.ndarray
    ratios: np.ndarray
    upper_estimate: float
    lower_estimate: float
    banach_estimate: float
    window_schedule: int
    tail_start: int

    def pairs(self):
        return zip(self.ns.tolist(), self.ratios.tolist())


def _require_horizon(A: FiniteIndexSet):
    if A.horizon < 1:
        raise InvalidInput("empty horizon")


def density_profile(A: FiniteIndexSet, tail_start: int,
                    min_window: int | None = None) -> DensityProfile:
    """Ratios card(A ∩ [1, n]) / n for every n up to the horizon.

    The upper/lower estimates are the max/min over ``n in [tail_start, horizon]``.
    The Banach estimate uses windows no shorter than ``min_window`` (default
    ``min(floor(sqrt(horizon)), tail_start)``, so that the prefix windows counted by
    the upper estimate are among those the Banach maximum ranges over).
    """
    _require_horizon(A)
    if not 1 <= tail_start <= A.horizon:
        raise InvalidInput(f"tail_start must lie in [1, {A.horizon}], got {tail_start}")
    ns = np.arange(1, A.horizon + 1, dtype=np.int64)
    ratios = A.prefix_counts[1:] / ns
    tail = ratios[tail_start - 1:]
    if min_window is None:
        min_window = max(1, min(math.isqrt(A.horizon), tail_start))
    banach = banach_upper_density(A, min_window)
    return DensityProfile(ns=ns, ratios=ratios, upper_estimate=float(tail.max()),
                          lower_estimate=float(tail.min()), banach_estimate=float(banach),
                          window_schedule=int(min_window), tail_start=int(tail_start))


def densest_window(A: FiniteIndexSet, min_window: int) -> tuple[Fraction, int, int]:
    """Exact maximum of card(A ∩ [a, b]) / (b - a + 1) over windows in [1, horizon].

    Dinkelbach iteration on integer prefix sums: with the current ratio c/l, the
    window maximizing ``l*count - c*length`` either certifies optimality (value 0)
    or has a strictly larger ratio. Every step is exact integer arithmetic.

    Returns:
        (density, a, b) for an optimal window.
    """
    h = A.horizon
    if not 1 <= min_window <= h:
        raise InvalidInput(f"min_window must lie in [1, {h}], got {min_window}")
    P = A.prefix_counts  # P[i] = card(A ∩ [1, i])
    if P[-1] == 0:
        return Fraction(0), 1, min_window
    L = min_window
    idx = np.arange(h + 1, dtype=np.int64)
    best = Fraction(int(P[L]), L)
    best_ab = (1, L)
    while True:
        c, l = best.numerator, best.denominator
        Q = l * P - c * idx  # window (i, b] scores Q[b] - Q[i]
        run_min = np.minimum.accumulate(Q[: h - L + 1])
        gains = Q[L:] - run_min  # for b = L..h, best start i <= b - L
        b_off = int(np.argmax(gains))
        if gains[b_off] <= 0:
            return best, best_ab[0], best_ab[1]
        b = b_off + L
        i = int(np.argmin(Q[: b - L + 1]))
        best = Fraction(int(P[b] - P[i]), b - i)
        best_ab = (i + 1, b)


def banach_upper_density(A: FiniteIndexSet, min_window: int) -> float:
    """Max window density over all windows of length >= ``min_window``; 0 for A = ∅."""
    if min_window > A.horizon:
        raise InvalidInput(f"min_window {min_window} exceeds horizon {A.horizon}")
    if min_window < 1:
        raise InvalidInput("min_window must be positive")
    return float(densest_window(A, min_window)[0])


def relative_density_gap(A: FiniteIndexSet) -> int | None:
    """Largest gap L such that every run of L consecutive integers in [1, last] meets A.

    Computed as ``max(first element, largest consecutive difference)``. ``None``
    signals that an empty set is not relatively dense.
    """
    pos = A.elements[A.elements > 0]
    if pos.size == 0:
        return None
    gaps = np.diff(pos)
    return int(max(int(pos[0]), int(gaps.max()) if gaps.size else 0))


def augment_with_multiples(N: FiniteIndexSet, p: int) -> FiniteIndexSet:
    """N ∪ {p, 2p, 3p, ...} cut at the horizon."""
    if p < 1:
        raise InvalidInput(f"p must be >= 1, got {p}")
    mult = np.arange(p, N.horizon + 1, p, dtype=np.int64)
    return FiniteIndexSet(np.union1d(N.elements, mult), N.horizon)


def subsequence_growth_ratio(K: FiniteIndexSet) -> float:
    """max_j k_j / j; bounded values indicate positive lower density."""
    if len(K) == 0:
        raise InvalidInput("K must be nonempty")
    j = np.arange(1, len(K) + 1)
    return float(np.max(K.elements / j))


@dataclass
class KvnReport:
    status: str  # "ok" | "truncated" | "refused"
    cut_points: list[int]
    thresholds: list[float]
    cesaro_means: np.ndarray
    cesaro_verdict: str
    off_set_maxima: list[float]
    profile: DensityProfile | None
    note: str = ""


def kvn_extract(a: Sequence[float], threshold_schedule: Sequence[float],
                tolerance: float = 1e-2, tail_start: int | None = None
                ) -> tuple[FiniteIndexSet | None, KvnReport]:
    """Split off a sparse exceptional set E outside of which ``|a_k|`` is small.

    ``a`` is indexed from 1 (``a[0]`` is a_1). Cut points start at c_1 = 0; c_{m+1}
    is the smallest n > c_m with card{k <= n : |a_k| >= tau_{m+1}} / n <= tau_{m+1}.
    On (c_m, c_{m+1}] the set E collects the k with |a_k| >= tau_m, and the last
    segment runs to the horizon with the last threshold reached. Extraction is
    refused when the Cesàro means of |a_k| do not decay.
    """
    from .mixing_analysis import decay_verdict

    vals = np.abs(np.asarray(a, dtype=float))
    h = vals.size
    if h < 1:
        raise InvalidInput("empty horizon")
    taus = [float(t) for t in threshold_schedule]
    if not taus or any(t <= 0 for t in taus) or any(t2 >= t1 for t1, t2 in zip(taus, taus[1:])):
        raise InvalidInput("threshold schedule must be positive and strictly decreasing")
    means = np.cumsum(vals) / np.arange(1, h + 1)
    verdict = decay_verdict(means, tolerance)
    if verdict != "decaying":
        return None, KvnReport("refused", [], taus, means, verdict, [], None,
                               "Cesàro means of |a_k| do not decay; extraction refused")

    ns = np.arange(1, h + 1)
    cuts = [0]
    status = "ok"
    for tau in taus[1:]:
        big = np.cumsum(vals >= tau) / ns
        start = cuts[-1]  # candidate n > start, i.e. index >= start
        ok = np.flatnonzero(big[start:] <= tau)
        if ok.size == 0:
            status = "truncated"
            break
        cuts.append(int(start + ok[0] + 1))
    used = taus[: len(cuts)]
    in_E = np.zeros(h + 1, dtype=bool)
    bounds = cuts + [h]
    for m, tau in enumerate(used):
        lo, hi = bounds[m], bounds[m + 1]
        seg = vals[lo:hi]
        in_E[lo + 1: hi + 1] = seg >= tau
    E = FiniteIndexSet(np.flatnonzero(in_E), h)
    off = []
    for m, c in enumerate(cuts):
        mask = ~in_E[c + 1:]
        tail = vals[c:][mask]
        off.append(float(tail.max()) if tail.size else 0.0)
    ts = tail_start if tail_start is not None else max(1, h // 100)
    profile = density_profile(E, ts)
    note = ("cut points follow the smallest-admissible-n rule; no rate for D(E) -> 0 is implied"
            if status == "ok" else
            f"schedule truncated after {len(cuts)} thresholds: no admissible cut point before the horizon")
    return E, KvnReport(status, cuts, used, means, verdict, off, profile, note)


def translate_check(F: FiniteIndexSet, B: FiniteIndexSet) -> list[int]:
    """All k >= 0 with F + k ⊆ B, for k up to ``B.horizon - max(F)``."""
    h = B.horizon
    if len(F) == 0:
        return list(range(h + 1))
    top = int(F.elements[-1])
    if top > h:
        raise InvalidInput("max(F) exceeds the horizon of B")
    span = h - top + 1
    bits = B.bitmap
    ok = np.ones(span, dtype=bool)
    for f in F.elements:
        f = int(f)
        ok &= bits[f: f + span]
    return np.flatnonzero(ok).tolist()


# ---------------------------------------------------------------------------
# generators for set specs

def multiples(p: int, horizon: int, include_zero: bool = False) -> FiniteIndexSet:
    start = 0 if include_zero else p
    return FiniteIndexSet(np.arange(start, horizon + 1, p, dtype=np.int64), horizon)


def blocks(starts: Sequence[int], lengths: Sequence[int], horizon: int) -> FiniteIndexSet:
    """Union of the integer intervals [s, s + length - 1]."""
    if len(starts) != len(lengths):
        raise InvalidInput("starts and lengths differ in length")
    bits = np.zeros(horizon + 1, dtype=bool)
    for s, ln in zip(starts, lengths):
        bits[max(s, 0): min(s + ln, horizon + 1)] = True
    return FiniteIndexSet.from_bitmap(bits)


def factorial_blocks(jmax: int, horizon: int | None = None) -> FiniteIndexSet:
    """∪_{1 <= j <= jmax} [j!, j! + j]; the default horizon closes the last block."""
    if horizon is None:
        horizon = math.factorial(jmax) + jmax
    starts = [math.factorial(j) for j in range(1, jmax + 1)]
    return blocks(starts, [j + 1 for j in range(1, jmax + 1)], horizon)


def perfect_squares(horizon: int) -> FiniteIndexSet:
    r = math.isqrt(horizon)
    return FiniteIndexSet(np.arange(1, r + 1, dtype=np.int64) ** 2, horizon)


def set_from_spec(spec: dict, horizon: int | None = None) -> FiniteIndexSet:
    """Build a set from a JSON-style spec (see the README for the accepted kinds)."""
    kind = spec.get("kind")
    h = spec.get("horizon", horizon)
    if kind == "factorial_blocks":
        return factorial_blocks(int(spec["jmax"]), h)
    if h is None:
        raise InvalidInput(f"set spec of kind {kind!r} needs a horizon")
    h = int(h)
    if kind == "multiples":
        return multiples(int(spec["p"]), h, bool(spec.get("include_zero", False)))
    if kind == "blocks":
        return blocks(spec["starts"], spec["lengths"], h)
    if kind == "explicit":
        return FiniteIndexSet(spec["elements"], h)
    if kind == "squares":
        return perfect_squares(h)
    if kind == "interval":
        lo = int(spec.get("start", 1))
        return FiniteIndexSet(np.arange(lo, h + 1, dtype=np.int64), h)
    raise InvalidInput(f"unknown set kind {kind!r}")
