"""Characteristic words of integer sets and the recurring-window structure search.

This module indexes from 0: a set B ⊂ N is encoded by the 0/1 word with bit k
equal to 1 iff k ∈ B. Sets coming from the 1-based modules embed unchanged (their
bit 0 is simply 0); ``FiniteIndexSet.positive`` maps back.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .integer_sets import FiniteIndexSet, InvalidInput, banach_upper_density, translate_check

CHUNK = 62
MAX_REVISIONS = 32


@dataclass(frozen=True, eq=False)
class BinaryWord:
    bits: np.ndarray
    origin: FiniteIndexSet | None = None  # set the word was built from, if any

    def __len__(self) -> int:
        return int(self.bits.size)

    def __str__(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    def __eq__(self, other) -> bool:
        return isinstance(other, BinaryWord) and np.array_equal(self.bits, other.bits)

    def decode(self) -> FiniteIndexSet:
        return FiniteIndexSet.from_bitmap(self.bits)

    @classmethod
    def from_string(cls, s: str) -> "BinaryWord":
        bits = np.frombuffer(s.encode(), dtype=np.uint8) - ord("0")
        if bits.size and bits.max() > 1:
            raise InvalidInput("word must be a 0/1 string")
        return cls(bits.astype(np.uint8))


def char_word(B: FiniteIndexSet) -> BinaryWord:
    """Bits 0..horizon of the characteristic function of B."""
    return BinaryWord(B.bitmap.astype(np.uint8), B)


def shift_window(w: BinaryWord, n: int, length: int) -> BinaryWord:
    """Bits n..n+length-1 of w, i.e. the first ``length`` bits of the n-fold shift."""
    if n < 0 or length < 1 or n + length > len(w):
        raise InvalidInput(f"window [{n}, {n + length}) exceeds word length {len(w)}")
    return BinaryWord(w.bits[n: n + length].copy())


# ---------------------------------------------------------------------------
# window codes

def _chunk_codes(bits: np.ndarray, offsets: np.ndarray, start: int, length: int) -> np.ndarray:
    """Exact integer keys for bits[o+start : o+start+length], one row per offset."""
    n_chunks = max(1, -(-length // CHUNK))
    out = np.zeros((offsets.size, n_chunks), dtype=np.int64)
    b = bits.astype(np.int64)
    for c in range(n_chunks):
        lo = c * CHUNK
        hi = min(length, lo + CHUNK)
        code = np.zeros(offsets.size, dtype=np.int64)
        for i in range(lo, hi):
            code = (code << 1) | b[offsets + start + i]
        out[:, c] = code
    return out


def _group(keys: np.ndarray):
    """(unique keys, inverse, counts) for 1- or multi-column keys."""
    if keys.shape[1] == 1:
        u, inv, cnt = np.unique(keys[:, 0], return_inverse=True, return_counts=True)
        return u[:, None], inv, cnt
    u, inv, cnt = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    return u, inv.ravel(), cnt


# ---------------------------------------------------------------------------
# empirical measures

@dataclass
class EmpiricalMeasure:
    windows: list
    cylinder_estimates: dict  # pattern string -> list of Fraction, one per window
    banach_estimate: float
    slack: float

    def one_frequency(self, j: int = 0) -> Fraction:
        return self.cylinder_estimates["1"][j]

    def best_one_frequency(self) -> Fraction:
        return max(self.cylinder_estimates["1"])


def empirical_measure(B: FiniteIndexSet, windows: Sequence[tuple[int, int]],
                      max_cylinder_length: int = 1) -> EmpiricalMeasure:
    """Frequencies of every cylinder pattern of length <= L along each window.

    For a window (a, b) and pattern P the estimate is the fraction of offsets
    n in [a, b] with bits[n : n + len(P)] == P.
    """
    L = int(max_cylinder_length)
    if L < 0 or L > 20:
        raise InvalidInput("max_cylinder_length must lie in [0, 20]")
    bits = B.bitmap.astype(np.uint8)
    h = B.horizon
    wins = [(int(a), int(b)) for a, b in windows]
    for j, (a, b) in enumerate(wins, start=1):
        if a < 0 or b < a:
            raise InvalidInput(f"bad window ({a}, {b})")
        if b + max(L, 1) - 1 > h:
            raise InvalidInput(f"window ({a}, {b}) overflows the horizon for length-{L} cylinders")
    est: dict[str, list] = {"": [Fraction(1)] * len(wins)}
    for ell in range(1, L + 1):
        tables = []
        for a, b in wins:
            offs = np.arange(a, b + 1, dtype=np.int64)
            codes = _chunk_codes(bits, offs, 0, ell)[:, 0]
            tables.append(np.bincount(codes, minlength=1 << ell))
        for code in range(1 << ell):
            pat = format(code, f"0{ell}b")
            est[pat] = [Fraction(int(t[code]), b - a + 1) for t, (a, b) in zip(tables, wins)]
    shortest = min(b - a + 1 for a, b in wins)
    banach = banach_upper_density(B, min(shortest, h)) if h >= 1 else 0.0
    best = float(max(est["1"])) if L >= 1 else 0.0
    return EmpiricalMeasure(wins, est, banach, max(0.0, banach - best))


# ---------------------------------------------------------------------------
# periodicity

def smallest_period(bits: np.ndarray) -> int:
    """Smallest p >= 1 with bits[k + p] == bits[k] for all valid k (prefix function)."""
    s = bits.tolist()
    n = len(s)
    pi = [0] * n
    k = 0
    for i in range(1, n):
        c = s[i]
        while k and s[k] != c:
            k = pi[k - 1]
        if s[k] == c:
            k += 1
        pi[i] = k
    return n - pi[-1] if n else 1


@dataclass
class Periodicity:
    period: int
    density: Fraction  # card(B ∩ [0, n_o - 1]) / n_o


def detect_periodicity(B: FiniteIndexSet) -> Periodicity | None:
    """Smallest n_o <= horizon/2 with the word invariant under the n_o-fold shift."""
    bits = B.bitmap
    p = smallest_period(bits.astype(np.uint8))
    if p > (B.horizon + 1) // 2:
        return None
    return Periodicity(p, Fraction(int(bits[:p].sum()), p))


# ---------------------------------------------------------------------------
# structure witnesses

@dataclass
class StructureWitness:
    A: FiniteIndexSet
    m_list: list
    n_list: list
    periodic: int | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def density(self) -> Fraction:
        m = self.A.horizon
        return Fraction(len(self.A), m + 1)

    def verify(self, B: FiniteIndexSet) -> list[str]:
        """Re-check A ∩ [0, m_j] = {k in [0, m_j] : k + n_j in B} by direct set comparison."""
        problems = []
        Bset = set(B.to_list())
        Aset = set(self.A.to_list())
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            problems.append("n_list not strictly increasing")
        for m, n in zip(self.m_list, self.n_list):
            if m + n > B.horizon:
                problems.append(f"window m={m}, n={n} exceeds the horizon")
                continue
            lhs = {k for k in Aset if 0 <= k <= m}
            rhs = {k for k in range(m + 1) if k + n in Bset}
            if lhs != rhs:
                problems.append(f"set equality fails at m={m}, n={n}")
        return problems


class StructureSearchFailure(RuntimeError):
    def __init__(self, message, longest_chain):
        super().__init__(message)
        self.longest_chain = longest_chain


def _periodic_witness(B, per: Periodicity, m_targets) -> StructureWitness:
    ms, ns = [], []
    for j, m in enumerate(m_targets, start=1):
        n = j * per.period
        if m + n > B.horizon:
            break
        ms.append(int(m))
        ns.append(int(n))
    return StructureWitness(B, ms, ns, periodic=per.period, metadata={
        "case": "periodic", "density": str(per.density),
        "note": "A = B and n_j = j * n_o"})


def structure_search(B: FiniteIndexSet, m_targets: Sequence[int], min_recurrence: int = 3,
                     max_revisions: int = MAX_REVISIONS) -> StructureWitness:
    """Find nested recurring windows giving A ∩ [0, m_j] = (B - n_j) ∩ [0, m_j].

    Level j picks a pattern W_j of length m_j + 1 that extends W_{j-1}, occurs at
    least ``min_recurrence`` times in the word, and has an occurrence n_j > n_{j-1}
    (the smallest such is taken). Candidates are ranked by density of ones, then
    recurrence count, then earliest admissible offset. Periodic words short-circuit
    to the periodic witness with A = B.
    """
    m_targets = [int(m) for m in m_targets]
    if not m_targets or any(b <= a for a, b in zip(m_targets, m_targets[1:])) or m_targets[0] < 0:
        raise InvalidInput("m_targets must be increasing nonnegative integers")
    h = B.horizon
    if 4 * m_targets[-1] > h:
        raise InvalidInput("max m_target must be <= horizon/4")
    per = detect_periodicity(B)
    if per is not None:
        return _periodic_witness(B, per, m_targets)

    bits = B.bitmap.astype(np.uint8)

    def candidates(level, occ, prev_n):
        m = m_targets[level]
        prev_len = m_targets[level - 1] + 1 if level else 0
        occ = occ[occ + m <= h]
        if occ.size == 0:
            return []
        keys = _chunk_codes(bits, occ, prev_len, m + 1 - prev_len)
        uniq, inv, cnt = _group(keys)
        out = []
        order = np.argsort(inv, kind="stable")
        splits = np.split(occ[order], np.cumsum(np.bincount(inv, minlength=len(cnt)))[:-1])
        for g, offs in enumerate(splits):
            if cnt[g] < min_recurrence:
                continue
            later = offs[offs > prev_n]
            if later.size == 0:
                continue
            ones = int(bits[offs[0]: offs[0] + m + 1].sum())
            out.append((-ones, -int(cnt[g]), int(later[0]), offs))
        out.sort(key=lambda c: c[:3])
        return out

    revisions = 0
    longest: list = []
    # stack of (candidate list, position) per level
    stack = [[candidates(0, np.arange(0, h + 1, dtype=np.int64), -1), 0]]
    chain: list = []  # (n_j, offsets, recurrence)
    while stack:
        level = len(stack) - 1
        cands, pos = stack[-1]
        if pos >= len(cands):
            stack.pop()
            if chain:
                chain.pop()
            revisions += 1
            if revisions > max_revisions or not stack:
                break
            stack[-1][1] += 1
            continue
        _, negcnt, n_j, offs = cands[pos]
        chain.append((n_j, offs, -negcnt))
        if len(chain) > len(longest):
            longest = [(m_targets[i], c[0]) for i, c in enumerate(chain)]
        if len(chain) == len(m_targets):
            m = m_targets[-1]
            A_bits = bits[n_j: n_j + m + 1]
            A = FiniteIndexSet(np.flatnonzero(A_bits), m)
            w = StructureWitness(A, list(m_targets), [c[0] for c in chain], None, {
                "case": "recurrence search",
                "genericity_proxy": f"each window recurs >= {min_recurrence} times",
                "recurrences": [c[2] for c in chain],
                "revisions": revisions})
            w.metadata["banach_estimate"] = banach_upper_density(B, min(m + 1, h))
            w.metadata["A_density"] = float(w.density)
            return w
        stack.append([candidates(level + 1, offs, n_j), 0])
    raise StructureSearchFailure(
        f"no chain of {len(m_targets)} nested windows found (revisions={revisions})", longest)


@dataclass
class TranslateReport:
    I: FiniteIndexSet
    witness: StructureWitness
    checks: list  # (m_j, n_j, |F|, translates >= n_j (first few), passed)
    density_I: Fraction
    density_A: Fraction
    density_Ao: Fraction

    @property
    def all_passed(self) -> bool:
        return all(c[-1] for c in self.checks)

    @property
    def inclusion_exclusion_holds(self) -> bool:
        return self.density_I >= self.density_A + self.density_Ao - 1


def positive_density_translates(A_o: FiniteIndexSet, B: FiniteIndexSet, m_targets: Sequence[int],
                                min_recurrence: int = 3) -> tuple[FiniteIndexSet, TranslateReport]:
    """I = A ∩ A_o from a structure witness, with translate checks for each prefix of I.

    Every F = I ∩ [0, m_j] must have at least two translates F + k ⊆ B with
    k >= n_j (the finite stand-in for infinitely many).
    """
    if A_o.horizon != B.horizon:
        raise InvalidInput("A_o and B must share a horizon")
    w = structure_search(B, m_targets, min_recurrence)
    m_last = w.m_list[-1] if w.m_list else 0
    A = w.A.restrict(0, m_last)
    I = A.intersection(A_o.restrict(0, m_last))
    checks = []
    for m, n in zip(w.m_list, w.n_list):
        F = I.restrict(0, m)
        ks = [k for k in translate_check(F, B) if k >= n]
        checks.append((m, n, len(F), ks[:5], len(ks) >= 2))
    size = m_last + 1
    dA = Fraction(len(A), size)
    dAo = Fraction(A_o.count_between(0, m_last), size)
    dI = Fraction(len(I), size)
    return I, TranslateReport(I, w, checks, dI, dA, dAo)
