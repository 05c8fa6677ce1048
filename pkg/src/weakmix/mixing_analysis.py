"""Mixing diagnostics over finite horizons.

For real inner-product models the sup over the dual unit ball reduces to sign
vectors::

    sup_{||y|| <= 1} sum_k |<y, x_k>| = max_{eps in {±1}^n} ||sum_k eps_k x_k||

which is enumerated exactly up to ``exact_cutoff`` terms and bracketed beyond it
(randomized greedy sign search from below, spectral bound from above).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .integer_sets import FiniteIndexSet, InvalidInput
from .sequence_models import (
    DiracFunctional,
    InnerProductSequence,
    SpanFunctional,
    TentSequence,
    UnsupportedModel,
    VectorSequence,
)

EXACT_CUTOFF = 20
RESTARTS = 4096


def decay_verdict(values: Sequence[float], tolerance: float = 1e-2) -> str:
    """Classify a per-n series as ``decaying``, ``stalled`` or ``failed``.

    With head = first quarter and tail = last quarter of the series:

    * decaying: tail max <= tolerance and (tail max <= head max / 2, or tail is 0);
    * failed: tail min > tolerance and tail min >= head max / 2 (no real decrease);
    * stalled: anything else.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise InvalidInput("empty series")
    q = max(1, v.size // 4)
    head, tail = v[:q], v[-q:]
    hmax, tmax, tmin = head.max(), tail.max(), tail.min()
    if not np.all(np.isfinite(v)):
        return "failed"
    if tmax <= tolerance and (tmax <= hmax / 2 or tmax == 0):
        return "decaying"
    if tmin > tolerance and tmin >= hmax / 2:
        return "failed"
    return "stalled"


@dataclass
class MixingReport:
    quantity: str
    per_n: list  # (n, value) or (n, lower, upper)
    verdict: str
    tolerance: float
    method: str
    tail_window: str = "last quarter of the sampled n"
    bounds: list | None = None

    def values(self) -> np.ndarray:
        return np.array([row[1] for row in self.per_n], dtype=float)

    def as_rows(self):
        """Rows ``(n, value_or_lower, upper, method)`` for CSV output."""
        rows = []
        for i, row in enumerate(self.per_n):
            n, v = row[0], row[1]
            up = self.bounds[i][1] if self.bounds else v
            rows.append((n, v, up, self.method))
        return rows


def geometric_grid(top: int, ratio: float = 1.2, start: int = 1) -> list[int]:
    """Integers start, ..., top spaced roughly geometrically, always including top."""
    out = []
    x = float(start)
    while x < top:
        n = int(round(x))
        if not out or n > out[-1]:
            out.append(n)
        x = max(x * ratio, x + 1)
    if not out or out[-1] != top:
        out.append(top)
    return out


# ---------------------------------------------------------------------------
# Cesàro averages

def cesaro_abs_average(seq: VectorSequence, f, n: int) -> float:
    """(1/n) sum_{k <= n} |<f, x_k>|."""
    if not 1 <= n <= seq.horizon:
        raise InvalidInput(f"n must lie in [1, {seq.horizon}]")
    return float(np.mean(np.abs(seq.pairings(f, np.arange(1, n + 1)))))


def cesaro_abs_series(seq: VectorSequence, f, ns: Sequence[int] | None = None) -> np.ndarray:
    """cesaro_abs_average for every n in ``ns`` (default 1..horizon) in one pass."""
    top = max(ns) if ns is not None else seq.horizon
    p = np.abs(seq.pairings(f, np.arange(1, top + 1)))
    means = np.cumsum(p) / np.arange(1, top + 1)
    if ns is None:
        return means
    return means[np.asarray(ns) - 1]


# ---------------------------------------------------------------------------
# sup over the dual unit ball

@dataclass
class SupResult:
    lower: float
    upper: float
    method: str  # "exact" | "bounded"
    functional: object | None = None  # attains ``lower`` (up to scaling) when not None


def _sign_matrix(n: int, start: int, stop: int) -> np.ndarray:
    """Rows eps with eps_1 = +1 for codes in [start, stop) of the remaining n-1 bits."""
    codes = np.arange(start, stop, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(n - 1, dtype=np.int64)[None, :]) & 1
    S = np.ones((codes.size, n))
    S[:, 1:] = 1.0 - 2.0 * bits
    return S


def max_sign_form_exact(G: np.ndarray, chunk: int = 1 << 15) -> tuple[float, np.ndarray]:
    """max over eps in {±1}^n of eps^T G eps by full enumeration (eps_1 fixed to +1)."""
    n = G.shape[0]
    if n == 1:
        return float(G[0, 0]), np.ones(1)
    total = 1 << (n - 1)
    best, best_eps = -np.inf, None
    for start in range(0, total, chunk):
        S = _sign_matrix(n, start, min(total, start + chunk))
        vals = np.einsum("ij,ij->i", S @ G, S)
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, best_eps = float(vals[i]), S[i].copy()
    return best, best_eps


def max_sign_form_search(G: np.ndarray, restarts: int = RESTARTS, seed: int = 0,
                         batch: int = 512) -> tuple[float, np.ndarray]:
    """Randomized restarts with greedy single-flip ascent for max eps^T G eps.

    Flipping eps_i changes the form by ``-4 eps_i ((G eps)_i - G_ii eps_i)``; each
    round applies the best improving flip in every row until none improves.
    """
    rng = np.random.default_rng(seed)
    n = G.shape[0]
    diag = np.diag(G)
    best, best_eps = -np.inf, None
    # deterministic seeds: all-ones and the top eigenvector's sign pattern
    w, V = np.linalg.eigh(G)
    seeds = [np.ones(n), np.where(V[:, -1] >= 0, 1.0, -1.0)]
    done = 0
    while done < restarts:
        m = min(batch, restarts - done)
        E = rng.choice([-1.0, 1.0], size=(m, n))
        if done == 0:
            E[: len(seeds)] = np.array(seeds)[:m]
        H = E @ G
        for _ in range(10 * n + 10):
            gain = -4.0 * E * (H - diag * E)
            j = np.argmax(gain, axis=1)
            g = gain[np.arange(m), j]
            active = g > 1e-12
            if not active.any():
                break
            rows = np.flatnonzero(active)
            cols = j[rows]
            old = E[rows, cols].copy()
            E[rows, cols] = -old
            H[rows] -= 2.0 * old[:, None] * G[cols]
        vals = np.einsum("ij,ij->i", E @ G, E)
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, best_eps = float(vals[i]), E[i].copy()
        done += m
    return best, best_eps


def dual_ball_sup(seq: VectorSequence, indices: Sequence[int], exact_cutoff: int = EXACT_CUTOFF,
                  seed: int = 0, restarts: int = RESTARTS) -> SupResult:
    """Bounds for sup_{||y|| <= 1} (1/m) sum_{k in indices} |<y, x_k>|, m = len(indices)."""
    idx = np.asarray(indices, dtype=np.int64)
    m = idx.size
    if m == 0:
        raise InvalidInput("empty index list")
    if isinstance(seq, TentSequence):
        # f_k >= 0, so the sup over measures is attained by a Dirac at the sup point
        w = np.full(m, 1.0 / m)
        t, val = seq.sup_point(w, idx)
        v = abs(val)
        return SupResult(v, v, "exact", DiracFunctional(t, 1.0 if val >= 0 else -1.0))
    if not isinstance(seq, InnerProductSequence):
        raise UnsupportedModel(f"no dual-ball oracle for model {seq.model}")
    G = seq.gram_matrix(idx)
    if not np.any(G):
        return SupResult(0.0, 0.0, "exact", None)
    if m <= exact_cutoff:
        val, eps = max_sign_form_exact(G)
        v = math.sqrt(max(val, 0.0)) / m
        f = seq.span_functional(eps, idx) if v > 0 else None
        return SupResult(v, v, "exact", f)
    val, eps = max_sign_form_search(G, restarts=restarts, seed=seed)
    lower = math.sqrt(max(val, 0.0)) / m
    lam = float(np.linalg.eigvalsh(G)[-1])
    upper = math.sqrt(max(m * lam, 0.0)) / m
    # the spectral value is a true upper bound; a lower value above it is rounding
    upper = max(upper, lower)
    f = seq.span_functional(eps, idx) if lower > 0 else None
    return SupResult(lower, upper, "bounded", f)


def uniform_mixing_value(seq: VectorSequence, n: int, exact_cutoff: int = EXACT_CUTOFF,
                         seed: int = 0, restarts: int = RESTARTS) -> tuple[float, float]:
    """(lower, upper) for sup_{||y||<=1} (1/n) sum_{k<=n} |<y, x_k>|."""
    if not 1 <= n <= seq.horizon:
        raise InvalidInput(f"n must lie in [1, {seq.horizon}]")
    r = dual_ball_sup(seq, np.arange(1, n + 1), exact_cutoff, seed, restarts)
    return r.lower, r.upper


def windowed_uniform_mixing(seq: VectorSequence, a: int, b: int,
                            exact_cutoff: int = EXACT_CUTOFF, seed: int = 0,
                            restarts: int = RESTARTS) -> tuple[float, float]:
    """Same as uniform_mixing_value over the window [a, b]."""
    if not 1 <= a <= b <= seq.horizon:
        raise InvalidInput(f"bad window [{a}, {b}]")
    r = dual_ball_sup(seq, np.arange(a, b + 1), exact_cutoff, seed, restarts)
    return r.lower, r.upper


def uniform_mixing_report(seq: VectorSequence, ns: Sequence[int], tolerance: float = 1e-2,
                          exact_cutoff: int = EXACT_CUTOFF, seed: int = 0,
                          restarts: int = RESTARTS) -> MixingReport:
    rows, bounds, methods = [], [], set()
    for n in ns:
        r = dual_ball_sup(seq, np.arange(1, n + 1), exact_cutoff, seed, restarts)
        rows.append((int(n), r.lower, r.upper))
        bounds.append((r.lower, r.upper))
        methods.add(r.method)
    verdict = decay_verdict([u for _, _, u in rows], tolerance)
    method = "exact" if methods == {"exact"} else "bounded"
    return MixingReport("uniform", rows, verdict, tolerance, method, bounds=bounds)


def cesaro_report(seq: VectorSequence, f, ns: Sequence[int], tolerance: float = 1e-2) -> MixingReport:
    vals = cesaro_abs_series(seq, f, ns)
    rows = [(int(n), float(v)) for n, v in zip(ns, vals)]
    return MixingReport("cesaro_abs", rows, decay_verdict(vals, tolerance), tolerance, "exact")


# ---------------------------------------------------------------------------
# subsequences

def subsequence_mean_norm(seq: VectorSequence, K: FiniteIndexSet, n: int) -> float:
    """||(1/n) sum_{j<=n} x_{k_j}||."""
    if n < 1 or len(K) < n:
        raise InvalidInput(f"K has {len(K)} elements, need {n}")
    return seq.combo_norm(np.full(n, 1.0 / n), K.elements[:n])


def lemma_2_1_identity(seq: VectorSequence, K: FiniteIndexSet, n: int) -> tuple[float, float]:
    """Check (1/n) sum_{k in K, k<=n} x_k = (j(n)/n) (1/j(n)) sum_{j<=j(n)} x_{k_j}.

    Returns:
        (norm of the difference of the two sides, j(n)/n).
    """
    if len(K) == 0 or n < int(K.elements[0]):
        raise InvalidInput("n must be at least the first element of K")
    jn = int(np.searchsorted(K.elements, n, side="right"))
    idx = K.elements[:jn]
    left = np.full(jn, 1.0 / n)
    right = np.full(jn, (jn / n) * (1.0 / jn))
    diff = seq.combo_norm(left - right, idx)
    return diff, jn / n


# ---------------------------------------------------------------------------
# failure witnesses

@dataclass
class FailureWitness:
    epsilon_o: float
    B: FiniteIndexSet
    anchor_indices: list  # k_j (prefix form) or b_{j_n} (window form)
    functionals: list
    windows: list  # (a, b) for each anchor
    block_cards: list  # card(B_j) for each anchor window
    positive_averages: list
    sup_values: list
    anchor_positions: list = field(default_factory=list)  # positions j_n in the window list

    def verify(self, seq: VectorSequence) -> list[str]:
        """Exact re-check of the witness invariants; returns a list of violations."""
        problems = []
        eps = self.epsilon_o
        anchors = self.anchor_indices
        for (a, b), card in zip(self.windows, self.block_cards):
            if card < 2 * (b - a + 1) * eps:
                problems.append(f"card(B) = {card} < 2 * {b - a + 1} * eps for window ({a}, {b})")
        for j in range(1, len(anchors)):
            n = j + 1  # 1-based position of this anchor
            prev = anchors[j - 1]
            gap = range(prev + 1, prev + n + 1)
            if any(k in self.B for k in gap):
                problems.append(f"B meets ({prev}, {prev + n}]")
            if anchors[j] - prev <= n:
                problems.append(f"anchor gap {anchors[j] - prev} <= {n}")
            ks = self.B.restrict(prev + n + 1, anchors[j]).elements
            if ks.size:
                vals = seq.pairings(self.functionals[j], ks)
                if not np.all(vals > 2 * eps):
                    problems.append(f"pairing <= 2 eps on B ∩ ({prev + n}, {anchors[j]}]")
        return problems


def _positive_part_witness(seq, lo, hi, sup: SupResult):
    """Pick ±y so that the positive-part average is largest; return (f, avg, pairings)."""
    idx = np.arange(lo, hi + 1)
    f = sup.functional
    vals = seq.pairings(f, idx)
    pos, neg = np.maximum(vals, 0).mean(), np.maximum(-vals, 0).mean()
    if neg > pos:
        f = _negate(f)
        vals = -vals
        pos = neg
    return f, float(pos), vals


def _negate(f):
    if isinstance(f, SpanFunctional):
        return SpanFunctional(f.indices, -f.coeffs)
    if isinstance(f, DiracFunctional):
        return DiracFunctional(f.t, -f.sign)
    from .sequence_models import CoordFunctional
    return CoordFunctional(-f.coeffs)


def extract_failure_witness(seq: VectorSequence, sample_ns: Sequence[int] | None = None,
                            epsilon_grid: Sequence[float] = (1 / 8, 1 / 16, 1 / 32, 1 / 64, 1 / 128),
                            windows: Sequence[tuple[int, int]] | None = None,
                            exact_cutoff: int = EXACT_CUTOFF, seed: int = 0,
                            restarts: int = 256, min_hits: int = 3) -> FailureWitness | None:
    """Build the combinatorial witness of non-uniform mixing, largest ε_o first.

    Prefix form uses windows (1, n) for n in ``sample_ns``; the windowed form takes
    explicit windows (a_j, b_j) with b_j - a_j >= j. For a grid value ε_o the
    windows where the dual-ball average exceeds 16 ε_o are collected (real scalars,
    so the absolute value passes straight to the positive/negative split with a
    margin of 8 ε_o > 4 ε_o). Anchors are chosen greedily: the next one is the first
    qualifying window after the previous whose length exceeds
    (previous anchor + position) / ε_o.
    """
    if seq.bound > 1 + 1e-9:
        raise InvalidInput(f"sequence bound {seq.bound} > 1; rescale first")
    if windows is None:
        if sample_ns is None:
            raise InvalidInput("need sample_ns or windows")
        windows = [(1, int(n)) for n in sample_ns]
    else:
        for j, (a, b) in enumerate(windows, start=1):
            if b - a < j:
                raise InvalidInput(f"window {j} = ({a}, {b}) violates b - a >= {j}")
    windows = [(int(a), int(b)) for a, b in windows]
    for a, b in windows:
        if not 1 <= a <= b <= seq.horizon:
            raise InvalidInput(f"bad window ({a}, {b})")

    cache: dict = {}

    def sup_of(w):
        if w not in cache:
            cache[w] = dual_ball_sup(seq, np.arange(w[0], w[1] + 1), exact_cutoff, seed, restarts)
        return cache[w]

    for eps in sorted(epsilon_grid, reverse=True):
        if not 0 < eps <= 1:
            raise InvalidInput("grid values must lie in (0, 1]")
        hits = [i for i, w in enumerate(windows)
                if sup_of(w).lower > 16 * eps and sup_of(w).functional is not None]
        if len(hits) < min_hits:
            continue
        chosen = []  # (position, functional, pos_avg, pairings)
        for i in hits:
            a, b = windows[i]
            if chosen:
                n = len(chosen) + 1
                prev_b = windows[chosen[-1][0]][1]
                if not (b - a + 1 > (prev_b + n) / eps and b - prev_b > n):
                    continue
            f, pos, vals = _positive_part_witness(seq, a, b, sup_of(windows[i]))
            if pos <= 4 * eps:
                continue
            chosen.append((i, f, pos, vals))
        if len(chosen) < min_hits:
            continue
        anchors = [windows[i][1] for i, *_ in chosen]
        in_B = []
        cards = []
        for pos_n, (i, f, pos, vals) in enumerate(chosen, start=1):
            a, b = windows[i]
            big = vals > 2 * eps
            cards.append(int(big.sum()))
            if pos_n == 1:
                continue
            cut = anchors[pos_n - 2] + pos_n
            ks = np.arange(a, b + 1)[big]
            in_B.append(ks[ks > cut])
        elems = np.unique(np.concatenate(in_B)) if in_B else np.array([], dtype=np.int64)
        B = FiniteIndexSet(elems, seq.horizon)
        return FailureWitness(
            epsilon_o=float(eps), B=B, anchor_indices=anchors,
            functionals=[c[1] for c in chosen], windows=[windows[c[0]] for c in chosen],
            block_cards=cards, positive_averages=[c[2] for c in chosen],
            sup_values=[sup_of(windows[c[0]]).lower for c in chosen],
            anchor_positions=[c[0] for c in chosen])
    return None
