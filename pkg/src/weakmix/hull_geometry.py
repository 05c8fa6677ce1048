"""Minimum-norm points of convex hulls in inner-product models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .integer_sets import FiniteIndexSet, InvalidInput
from .sequence_models import InnerProductSequence, SpanFunctional, UnsupportedModel, VectorSequence


@dataclass
class HullCertificate:
    indices: np.ndarray
    weights: np.ndarray
    achieved_norm: float
    gap: float
    iterations: int
    objective_trace: list = field(default_factory=list, repr=False)

    @property
    def interval(self) -> tuple[float, float]:
        """Certified range [max(0, a - gap/a), a] for the distance from 0 to the hull."""
        a = self.achieved_norm
        if a == 0:
            return 0.0, 0.0
        return max(0.0, a - self.gap / a), a

    def to_dict(self) -> dict:
        lo, hi = self.interval
        return {"indices": [int(i) for i in self.indices], "weights": self.weights.tolist(),
                "achieved_norm": self.achieved_norm, "gap": self.gap,
                "iterations": self.iterations, "distance_interval": [lo, hi]}


def _as_indices(indices) -> np.ndarray:
    if isinstance(indices, FiniteIndexSet):
        return indices.elements.copy()
    return np.asarray(indices, dtype=np.int64).ravel()


def min_norm_on_simplex(G: np.ndarray, tol: float = 1e-10, max_iter: int = 100_000,
                        trace: bool = False):
    """Minimize lam^T G lam over the simplex by conditional gradient with away steps.

    The duality gap ``2 (lam^T G lam - min_i (G lam)_i)`` bounds the suboptimality
    of the objective. Line searches are exact on the quadratic.

    Returns:
        (lam, objective, gap, iterations, objective trace)
    """
    m = G.shape[0]
    diag = np.diag(G)
    start = int(np.argmin(diag))
    lam = np.zeros(m)
    lam[start] = 1.0
    Gl = G[:, start].copy()
    obj = float(diag[start])
    hist = [obj] if trace else []
    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        if it % 256 == 0:
            Gl = G @ lam
            obj = float(lam @ Gl)
        s = int(np.argmin(Gl))
        gap = 2.0 * (obj - Gl[s])
        if gap <= tol:
            it -= 1
            break
        support = np.flatnonzero(lam > 0)
        v = int(support[np.argmax(Gl[support])])
        away_gap = 2.0 * (Gl[v] - obj)
        if gap >= away_gap or lam[v] >= 1.0:
            # toward vertex s: d = e_s - lam
            Gd = G[:, s] - Gl
            dGl = Gl[s] - obj
            dGd = G[s, s] - 2 * Gl[s] + obj
            gmax = 1.0
            kind = "fw"
        else:
            # away from vertex v: d = lam - e_v
            Gd = Gl - G[:, v]
            dGl = obj - Gl[v]
            dGd = obj - 2 * Gl[v] + G[v, v]
            gmax = lam[v] / (1.0 - lam[v])
            kind = "away"
        if dGd <= 0:
            gamma = gmax
        else:
            gamma = min(max(-dGl / dGd, 0.0), gmax)
        if gamma == 0.0:
            break
        if kind == "fw":
            lam *= 1.0 - gamma
            lam[s] += gamma
        else:
            lam *= 1.0 + gamma
            lam[v] -= gamma
            if gamma == gmax:
                lam[v] = 0.0
        lam = np.maximum(lam, 0.0)
        Gl = Gl + gamma * Gd
        obj = obj + 2 * gamma * dGl + gamma * gamma * max(dGd, 0.0)
        if trace:
            hist.append(float(lam @ G @ lam))
    lam = lam / lam.sum()
    Gl = G @ lam
    obj = float(lam @ Gl)
    gap = max(2.0 * (obj - float(Gl.min())), 0.0)
    return lam, obj, gap, it, hist


def min_norm_in_hull(seq: VectorSequence, indices, tol: float = 1e-10,
                     max_iter: int = 100_000, trace: bool = False) -> HullCertificate:
    """Minimum-norm point of conv{x_k : k in indices} with a duality-gap certificate."""
    if not isinstance(seq, InnerProductSequence):
        raise UnsupportedModel(f"hull solving needs an inner-product model, got {seq.model}")
    idx = _as_indices(indices)
    if idx.size == 0:
        raise InvalidInput("indices must be nonempty")
    G = seq.gram_matrix(idx)
    lam, obj, gap, it, hist = min_norm_on_simplex(G, tol, max_iter, trace)
    achieved = seq.combo_norm(lam, idx)
    return HullCertificate(idx, lam, achieved, gap, it, hist)


def separation_witness(seq: InnerProductSequence, indices, delta: float,
                       tol: float = 1e-10, max_iter: int = 100_000) -> SpanFunctional | None:
    """Unit functional separating the hull from 0 at level ``delta``, if certified.

    With y the computed min-norm point, every x_k in the family satisfies
    ``<y/||y||, x_k> >= ||y|| - gap/||y||``; this is re-checked per element.
    """
    cert = min_norm_in_hull(seq, indices, tol, max_iter)
    a = cert.achieved_norm
    if a < delta or cert.gap > delta * delta / 4 or a == 0:
        return None
    f = seq.span_functional(cert.weights, cert.indices)
    vals = seq.pairings(f, cert.indices)
    floor = a - cert.gap / a
    if np.any(vals < floor - 1e-12):
        raise AssertionError("separation guarantee violated")
    return f


@dataclass
class BanachSaksSelection:
    indices: list
    stalled: bool
    prefix_norms_sq: list  # ||(1/n) sum_{i<=n} y_i||^2
    prefix_bounds: list  # (M^2 + 2)/n
    bound_M: float

    @property
    def bound_holds(self) -> bool:
        return all(v <= b for v, b in zip(self.prefix_norms_sq, self.prefix_bounds))


def banach_saks_select(seq: InnerProductSequence, candidate_indices, target_count: int
                       ) -> BanachSaksSelection:
    """Greedy near-orthogonal subsequence.

    With S_m the sum of the m chosen vectors, the next pick is the first later
    candidate with ``|<S_m, x_k>| <= 1/(m+1)``. Expanding ||S_n||^2 then gives
    ``||S_n / n||^2 <= (M^2 + 2)/n`` for every prefix.
    """
    if not isinstance(seq, InnerProductSequence):
        raise UnsupportedModel("needs an inner-product model")
    cand = _as_indices(candidate_indices)
    chosen: list[int] = []
    corr = np.zeros(cand.size)  # <S_m, x_c> for every candidate c
    M = seq.bound
    norms_sq, bounds = [], []
    pos = 0
    stalled = False
    while len(chosen) < target_count:
        m = len(chosen)
        ok = np.flatnonzero(np.abs(corr[pos:]) <= 1.0 / (m + 1))
        if ok.size == 0:
            stalled = True
            break
        i = pos + int(ok[0])
        k = int(cand[i])
        corr = corr + seq.gram_block([k], cand)[0]
        chosen.append(k)
        pos = i + 1
        n = len(chosen)
        norms_sq.append(seq.combo_norm(np.full(n, 1.0 / n), chosen) ** 2)
        bounds.append((M * M + 2) / n)
        if pos >= cand.size and len(chosen) < target_count:
            stalled = True
            break
    return BanachSaksSelection(chosen, stalled, norms_sq, bounds, M)
