"""Vector-sequence models with pairing, Gram and combination-norm oracles.

Indices are 1-based throughout (x_1, x_2, ...). Scalars are real.

Models:

* inner-product models expose an exact Gram section and compute
  ``||sum w_i x_{k_i}||`` from the quadratic form (or from coordinates when the
  model has them);
* the continuous-function model (tent functions on [0, 1]) computes sup-norms of
  combinations exactly at breakpoints.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .integer_sets import InvalidInput


class UnsupportedModel(TypeError):
    """Raised when an operation needs a capability the model does not have."""


# ---------------------------------------------------------------------------
# functionals

@dataclass(frozen=True)
class CoordFunctional:
    """A functional given by coordinates in the model's orthonormal basis."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if np.linalg.norm(c) > 1 + 1e-12:
            raise InvalidInput("functional has dual norm > 1")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def unit(cls, v) -> "CoordFunctional":
        v = np.asarray(v, dtype=float)
        return cls(v / np.linalg.norm(v))


@dataclass(frozen=True)
class SpanFunctional:
    """The functional ``<y, .>`` with ``y = sum coeffs_i x_{indices_i}``."""

    indices: tuple
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))


@dataclass(frozen=True)
class DiracFunctional:
    """Signed point evaluation ``f -> sign * f(t)`` on C([0, 1])."""

    t: float
    sign: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise InvalidInput("Dirac point must lie in [0, 1]")
        if self.sign not in (1.0, -1.0, 1, -1):
            raise InvalidInput("Dirac sign must be +1 or -1")


# ---------------------------------------------------------------------------
# base classes

class VectorSequence(abc.ABC):
    """A bounded sequence x_1, ..., x_horizon in a real normed space."""

    model: str
    horizon: int
    bound: float

    def __init__(self, model: str, horizon: int, scale: float = 1.0, metadata=None):
        if horizon < 1:
            raise InvalidInput("horizon must be positive")
        self.model = model
        self.horizon = int(horizon)
        self.scale = float(scale)
        self.metadata = dict(metadata or {})
        self.bound = 0.0

    def _check(self, indices) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.int64).ravel()
        if idx.size and (idx.min() < 1 or idx.max() > self.horizon):
            raise InvalidInput(f"index out of horizon [1, {self.horizon}]")
        return idx

    # raw (unscaled) hooks
    @abc.abstractmethod
    def _pairings(self, f, idx: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def _combo_norm(self, w: np.ndarray, idx: np.ndarray) -> float: ...

    @abc.abstractmethod
    def _norms(self, idx: np.ndarray) -> np.ndarray: ...

    def pairings(self, f, indices) -> np.ndarray:
        return self.scale * self._pairings(f, self._check(indices))

    def pairing(self, f, k: int) -> float:
        return float(self.pairings(f, [k])[0])

    def combo_norm(self, weights, indices) -> float:
        """``||sum_i weights_i x_{indices_i}||``; repeated indices are allowed."""
        idx = self._check(indices)
        w = np.asarray(weights, dtype=float).ravel()
        if w.size != idx.size:
            raise InvalidInput("weights and indices differ in length")
        if not np.all(np.isfinite(w)):
            raise InvalidInput("weights must be finite")
        if idx.size == 0:
            return 0.0
        return abs(self.scale) * self._combo_norm(w, idx)

    def norms(self, indices=None) -> np.ndarray:
        if indices is None:
            indices = np.arange(1, self.horizon + 1)
        return abs(self.scale) * self._norms(self._check(indices))

    def scaled(self, factor: float) -> "VectorSequence":
        """A copy whose vectors are all multiplied by ``factor``."""
        import copy
        other = copy.copy(self)
        other.scale = self.scale * factor
        other.bound = self.bound * abs(factor)
        return other

    def normalized(self) -> "VectorSequence":
        """Rescale so the bound is at most 1 (identity for the zero sequence)."""
        if self.bound <= 1.0 or self.bound == 0:
            return self
        return self.scaled(1.0 / self.bound)

    def describe(self) -> dict:
        return {"model": self.model, "horizon": self.horizon, "bound": self.bound,
                "scale": self.scale, **self.metadata}


class InnerProductSequence(VectorSequence):
    """Models whose geometry is fully determined by the Gram matrix."""

    @abc.abstractmethod
    def _gram_block(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray: ...

    def gram_block(self, rows, cols) -> np.ndarray:
        return self.scale ** 2 * self._gram_block(self._check(rows), self._check(cols))

    def gram_matrix(self, indices) -> np.ndarray:
        idx = self._check(indices)
        return self.scale ** 2 * self._gram_block(idx, idx)

    def gram(self, j: int, k: int) -> float:
        return float(self.gram_block([j], [k])[0, 0])

    def _norms(self, idx):
        return np.sqrt(np.maximum(np.array([self._gram_block(idx[i:i + 1], idx[i:i + 1])[0, 0]
                                            for i in range(idx.size)]), 0.0))

    def _combo_norm(self, w, idx):
        G = self._gram_block(idx, idx)
        return math.sqrt(max(float(w @ G @ w), 0.0))

    def _pairings(self, f, idx):
        if isinstance(f, SpanFunctional):
            G = self._gram_block(np.asarray(f.indices, dtype=np.int64), idx)
            return f.coeffs @ G
        raise UnsupportedModel(f"{type(f).__name__} is not supported by model {self.model}")

    def span_functional(self, weights, indices, normalize: bool = True) -> SpanFunctional:
        """The functional ``<y/||y||, .>`` for ``y = sum w_i x_{k_i}``.

        The coefficients refer to the *scaled* sequence, so pairings computed on
        this object are exact for it.
        """
        idx = self._check(indices)
        w = np.asarray(weights, dtype=float) * self.scale
        if normalize:
            nrm = self.combo_norm(weights, idx)
            if nrm == 0:
                raise InvalidInput("cannot normalize the zero vector")
            w = w / nrm
        return SpanFunctional(tuple(idx.tolist()), w)

    def dual_norm(self, f) -> float:
        if isinstance(f, SpanFunctional):
            return self.combo_norm(np.asarray(f.coeffs) / self.scale, f.indices) if self.scale else 0.0
        if isinstance(f, CoordFunctional):
            return float(np.linalg.norm(f.coeffs))
        raise UnsupportedModel(type(f).__name__)


# ---------------------------------------------------------------------------
# concrete inner-product models

class BasisSequence(InnerProductSequence):
    """x_k = amplitude_k * e_{slot_k} for an orthonormal basis (e_i)."""

    def __init__(self, model, slots, amplitudes=None, metadata=None):
        slots = np.asarray(slots, dtype=np.int64)
        super().__init__(model, slots.size, metadata=metadata)
        self.slots = slots
        self.amplitudes = (np.ones(slots.size) if amplitudes is None
                           else np.asarray(amplitudes, dtype=float))
        self.dimension = int(slots.max()) + 1 if slots.size else 0
        self.bound = float(np.abs(self.amplitudes).max())

    def _gram_block(self, rows, cols):
        r, c = rows - 1, cols - 1
        same = self.slots[r][:, None] == self.slots[c][None, :]
        return same * np.outer(self.amplitudes[r], self.amplitudes[c])

    def _norms(self, idx):
        return np.abs(self.amplitudes[idx - 1])

    def _combo_norm(self, w, idx):
        v = np.bincount(self.slots[idx - 1], weights=w * self.amplitudes[idx - 1],
                        minlength=self.dimension)
        return float(np.linalg.norm(v))

    def _pairings(self, f, idx):
        if isinstance(f, CoordFunctional):
            s = self.slots[idx - 1]
            c = np.zeros(idx.size)
            inside = s < f.coeffs.size
            c[inside] = f.coeffs[s[inside]]
            return c * self.amplitudes[idx - 1]
        return super()._pairings(f, idx)


class CoordinateSequence(InnerProductSequence):
    """x_k given by explicit real coordinates (row k-1 of ``coords``)."""

    def __init__(self, model, coords, metadata=None):
        coords = np.asarray(coords, dtype=float)
        if coords.ndim != 2:
            raise InvalidInput("coords must be a 2-D array")
        super().__init__(model, coords.shape[0], metadata=metadata)
        self.coords = coords
        self.dimension = coords.shape[1]
        self.bound = float(np.linalg.norm(coords, axis=1).max()) if coords.size else 0.0

    def _gram_block(self, rows, cols):
        return self.coords[rows - 1] @ self.coords[cols - 1].T

    def _norms(self, idx):
        return np.linalg.norm(self.coords[idx - 1], axis=1)

    def _combo_norm(self, w, idx):
        return float(np.linalg.norm(w @ self.coords[idx - 1]))

    def vector(self, k: int) -> np.ndarray:
        return self.scale * self.coords[self._check([k])[0] - 1]

    def _pairings(self, f, idx):
        if isinstance(f, CoordFunctional):
            if f.coeffs.size != self.dimension:
                raise InvalidInput("functional dimension mismatch")
            return self.coords[idx - 1] @ f.coeffs
        return super()._pairings(f, idx)


class ExplicitGramSequence(InnerProductSequence):
    """Sequence known only through a finite Gram section."""

    def __init__(self, gram, model="gram_explicit", metadata=None):
        G = np.asarray(gram, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise InvalidInput("Gram section must be square")
        if not np.allclose(G, G.T, atol=1e-12):
            raise InvalidInput("Gram section must be symmetric")
        if np.linalg.eigvalsh(G).min() < -1e-9:
            raise InvalidInput("Gram section must be positive semidefinite")
        super().__init__(model, G.shape[0], metadata=metadata)
        self.G = G
        self.bound = float(np.sqrt(np.max(np.diag(G))))

    def _gram_block(self, rows, cols):
        return self.G[np.ix_(rows - 1, cols - 1)]

    def _norms(self, idx):
        return np.sqrt(np.maximum(np.diag(self.G)[idx - 1], 0.0))


@dataclass(frozen=True)
class MonomialSchedule:
    """Strictly increasing positive exponents alpha_1 < alpha_2 < ..."""

    exponents: tuple

    def __post_init__(self):
        ex = tuple(Fraction(e) for e in self.exponents)
        if not ex or ex[0] <= 0:
            raise InvalidInput("exponents must be positive")
        for a, b in zip(ex, ex[1:]):
            if b <= a:
                raise InvalidInput(f"exponents not strictly increasing at {a} >= {b}")
        object.__setattr__(self, "exponents", ex)


def example_3_3_exponents(horizon: int) -> list[Fraction]:
    """Exponents of f_k(t) = t^{alpha_k}: four per block starting at k = 1 (mod 4)."""
    out = []
    k = 1
    while len(out) < horizon:
        out += [Fraction(k), k + Fraction(1, 4 * (k + 2)), Fraction(k + 1), k + 1 + Fraction(1, 2)]
        k += 4
    return out[:horizon]


def power_gap_norm_sq(alpha, eps) -> Fraction:
    """Exact ``||t^alpha - t^(alpha+eps)||_2^2`` on [0, 1] for rational alpha, eps."""
    a, e = Fraction(alpha), Fraction(eps)
    return 2 * e * e / ((2 * a + 1) * (2 * a + e + 1) * (2 * a + 2 * e + 1))


class MonomialSequence(InnerProductSequence):
    """g_k(t) = t^{alpha_k} in L^2([0, 1]); Gram(j, k) = 1 / (alpha_j + alpha_k + 1)."""

    def __init__(self, schedule: MonomialSchedule, model="monomial", metadata=None):
        super().__init__(model, len(schedule.exponents), metadata=metadata)
        self.schedule = schedule
        self.alpha = np.array([float(a) for a in schedule.exponents])
        self.bound = float(1.0 / math.sqrt(2 * self.alpha[0] + 1))

    def _gram_block(self, rows, cols):
        return 1.0 / (self.alpha[rows - 1][:, None] + self.alpha[cols - 1][None, :] + 1.0)

    def _norms(self, idx):
        return 1.0 / np.sqrt(2 * self.alpha[idx - 1] + 1)

    def gram_exact(self, j: int, k: int) -> Fraction:
        ex = self.schedule.exponents
        return Fraction(self.scale) ** 2 / (ex[j - 1] + ex[k - 1] + 1)

    def combo_norm_sq_exact(self, weights, indices) -> Fraction:
        """Exact squared norm of a combination with rational weights."""
        idx = [int(i) for i in self._check(indices)]
        w = [Fraction(x) for x in weights]
        total = Fraction(0)
        for a, wa in zip(idx, w):
            for b, wb in zip(idx, w):
                total += wa * wb * self.gram_exact(a, b)
        return total


# ---------------------------------------------------------------------------
# continuous-function model

@dataclass(frozen=True)
class BlockSchedule:
    """Block starts 1 = n_1 < n_2 < ... and knots 1 > t_1 > t_2 > ... > 0."""

    block_starts: tuple
    knots: tuple = ()

    def __post_init__(self):
        n = tuple(int(x) for x in self.block_starts)
        object.__setattr__(self, "block_starts", n)
        object.__setattr__(self, "knots", tuple(float(t) for t in self.knots))
        if not n or n[0] != 1:
            raise InvalidInput("block starts must begin with n_1 = 1")
        for j in range(len(n) - 1):
            if n[j + 1] <= n[j]:
                raise InvalidInput(f"block starts not increasing at n_{j + 1}={n[j]}, n_{j + 2}={n[j + 1]}")
            # exact: (n_j - 1) / (n_{j+1} - 1) <= 1/2
            if 2 * (n[j] - 1) > n[j + 1] - 1:
                raise InvalidInput(
                    f"ratio condition violated for (n_{j + 1}, n_{j + 2}) = ({n[j]}, {n[j + 1]}):"
                    f" ({n[j]} - 1)/({n[j + 1]} - 1) > 1/2")
        t = self.knots
        if t:
            if len(t) < len(n) + 1:
                raise InvalidInput("need one more knot than blocks")
            if not (t[0] < 1 and t[-1] > 0 and all(b < a for a, b in zip(t, t[1:]))):
                raise InvalidInput("knots must satisfy 1 > t_1 > t_2 > ... > 0")

    @classmethod
    def default(cls, horizon: int) -> "BlockSchedule":
        """n_1 = 1, n_2 = 2, n_{j+1} = 2 n_j - 1 and t_j = 1/(j+1), covering the horizon."""
        n = [1, 2]
        while n[-1] <= horizon:
            n.append(2 * n[-1] - 1)
        t = [1.0 / (j + 1) for j in range(1, len(n) + 2)]
        return cls(tuple(n), tuple(t))

    def block_of(self, k) -> np.ndarray:
        """1-based block index j with n_j <= k < n_{j+1}."""
        return np.searchsorted(np.asarray(self.block_starts), np.asarray(k), side="right")


def _default_block_schedule(horizon: int, schedule) -> BlockSchedule:
    if schedule is None:
        return BlockSchedule.default(horizon)
    if schedule.block_starts[-1] <= horizon:
        raise InvalidInput("block schedule must extend past the horizon")
    return schedule


class TentSequence(VectorSequence):
    """f_k = g_j for n_j <= k < n_{j+1}; g_j is the unit tent on [t_{j+1}, t_j]."""

    def __init__(self, schedule: BlockSchedule, horizon: int, model="example_3_1", metadata=None):
        super().__init__(model, horizon, metadata=metadata)
        if not schedule.knots:
            raise InvalidInput("tent model needs knots")
        self.schedule = schedule
        ks = np.arange(1, horizon + 1)
        self.block = schedule.block_of(ks)  # 1-based
        self.n_blocks = int(self.block.max())
        t = np.asarray(schedule.knots)
        self.left = t[1: self.n_blocks + 1]  # t_{j+1}
        self.right = t[: self.n_blocks]  # t_j
        self.apex = 0.5 * (self.left + self.right)
        self.bound = 1.0

    def g(self, j: int, t) -> np.ndarray:
        """Tent j (1-based) evaluated at t."""
        lo, hi, mid = self.left[j - 1], self.right[j - 1], self.apex[j - 1]
        t = np.asarray(t, dtype=float)
        up = (t - lo) / (mid - lo)
        down = (hi - t) / (hi - mid)
        return np.clip(np.minimum(up, down), 0.0, None)

    def values(self, k, t) -> np.ndarray:
        k = self._check(k)
        return self.scale * np.array([self.g(int(self.block[i - 1]), t) for i in k])

    def _pairings(self, f, idx):
        if not isinstance(f, DiracFunctional):
            raise UnsupportedModel("continuous model pairs only with Dirac functionals")
        blocks = self.block[idx - 1]
        t = f.t
        lo, hi, mid = self.left[blocks - 1], self.right[blocks - 1], self.apex[blocks - 1]
        val = np.clip(np.minimum((t - lo) / (mid - lo), (hi - t) / (hi - mid)), 0.0, None)
        return f.sign * val

    def _norms(self, idx):
        return np.ones(idx.size)

    def block_weights(self, w, idx) -> np.ndarray:
        """Weights aggregated per tent (index j-1 holds the coefficient of g_j)."""
        return np.bincount(self.block[idx - 1] - 1, weights=w, minlength=self.n_blocks)

    def _combo_norm(self, w, idx):
        # A combination of tents is piecewise linear with breakpoints at the knots
        # and apexes; knots are zeros of every tent, so the sup sits at an apex.
        agg = self.block_weights(w, idx)
        return float(np.abs(agg).max())

    def sup_point(self, w, indices) -> tuple[float, float]:
        """(t, value) where ``sum w_i f_{k_i}`` attains its sup-norm."""
        idx = self._check(indices)
        agg = self.block_weights(np.asarray(w, dtype=float), idx)
        j = int(np.argmax(np.abs(agg)))
        return float(self.apex[j]), float(self.scale * agg[j])

    def breakpoints(self) -> np.ndarray:
        return np.unique(np.concatenate([[0.0, 1.0], self.left, self.right, self.apex]))


# ---------------------------------------------------------------------------
# generators

def make_example_3_1(schedule: BlockSchedule | None = None, horizon: int = 1024) -> TentSequence:
    schedule = _default_block_schedule(horizon, schedule)
    return TentSequence(schedule, horizon, metadata={
        "tent_shape": "piecewise-linear, apex 1 at support midpoint",
        "knots": "t_j = 1/(j+1)" if schedule == BlockSchedule.default(horizon) else "custom",
        "choice_flag": "g_j and t_j are modelling choices"})


def make_example_3_2(schedule: BlockSchedule | None = None, horizon: int = 1024) -> BasisSequence:
    schedule = _default_block_schedule(horizon, schedule)
    blocks = schedule.block_of(np.arange(1, horizon + 1)) - 1
    seq = BasisSequence("example_3_2", blocks, metadata={
        "g_j": "abstract orthonormal coordinates", "choice_flag": "only the Gram matters"})
    seq.schedule = schedule
    return seq


def make_example_3_3(horizon: int) -> MonomialSequence:
    if horizon < 4:
        raise InvalidInput("horizon must be >= 4")
    return MonomialSequence(MonomialSchedule(tuple(example_3_3_exponents(horizon))),
                            model="example_3_3",
                            metadata={"gram": "exact rational 1/(a+b+1)"})


def example_6_2_theta(k) -> np.ndarray:
    return 1.0 / (np.asarray(k, dtype=float) + 4.0)


def make_example_6_2(horizon: int) -> CoordinateSequence:
    """u_k = e_{3k}, v_k = cos θ_k e_{3k} + sin θ_k e_{3k+1}, w_k = e_{3k+2}, θ_k = 1/(k+4).

    x_{3k+1} = 2u_k; for even k: x_{3k+2} = -v_k, x_{3k+3} = w_k; for odd k the last
    two are swapped.
    """
    if horizon < 6:
        raise InvalidInput("horizon must be >= 6")
    K = (horizon + 2) // 3
    X = np.zeros((3 * K, 3 * K))
    for k in range(K):
        th = float(example_6_2_theta(k))
        u = np.zeros(3 * K); u[3 * k] = 1.0
        v = np.zeros(3 * K); v[3 * k] = math.cos(th); v[3 * k + 1] = math.sin(th)
        w = np.zeros(3 * K); w[3 * k + 2] = 1.0
        X[3 * k] = 2 * u
        if k % 2 == 0:
            X[3 * k + 1], X[3 * k + 2] = -v, w
        else:
            X[3 * k + 1], X[3 * k + 2] = w, -v
    seq = CoordinateSequence("example_6_2", X[:horizon], metadata={
        "theta_k": "1/(k+4)", "choice_flag": "two-coordinate rotation concretization"})
    return seq


def example_6_2_block(k: int) -> tuple[int, int, int]:
    """Indices of x_{3k+1}, x_{3k+2}, x_{3k+3} (block V_k, k >= 0)."""
    return 3 * k + 1, 3 * k + 2, 3 * k + 3


def make_operator_orbit(U, x, horizon: int) -> CoordinateSequence:
    """x_k = U^k x for k = 1..horizon by iterated application."""
    U = np.asarray(U, dtype=float)
    x = np.asarray(x, dtype=float).ravel()
    if U.ndim != 2 or U.shape[0] != U.shape[1] or U.shape[1] != x.size:
        raise InvalidInput(f"dimension mismatch: U {U.shape}, x {x.shape}")
    rows = np.empty((horizon, x.size))
    cur = x
    for k in range(horizon):
        cur = U @ cur
        rows[k] = cur
    return CoordinateSequence("operator_orbit", rows)


def orthonormal(horizon: int) -> BasisSequence:
    return BasisSequence("orthonormal", np.arange(horizon))


def constant(horizon: int, dim: int = 1) -> BasisSequence:
    return BasisSequence("constant", np.zeros(horizon, dtype=np.int64))


def alternating(horizon: int) -> BasisSequence:
    amps = np.where(np.arange(1, horizon + 1) % 2 == 1, 1.0, -1.0)
    return BasisSequence("alternating", np.zeros(horizon, dtype=np.int64), amps)


def zero(horizon: int) -> BasisSequence:
    return BasisSequence("zero", np.zeros(horizon, dtype=np.int64), np.zeros(horizon))


def rotation(angle: float, scale: float = 1.0) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return scale * np.array([[c, -s], [s, c]])


def sequence_from_spec(spec: dict, horizon: int | None = None) -> VectorSequence:
    """Build a sequence from a JSON-style spec dict."""
    model = spec.get("model")
    h = int(spec.get("horizon", horizon or 0)) or None
    if h is None and model != "gram_explicit":
        raise InvalidInput("sequence spec needs a horizon")
    sched = None
    if "block_starts" in spec:
        sched = BlockSchedule(tuple(spec["block_starts"]), tuple(spec.get("knots", ())))
    if model == "example_3_1":
        return make_example_3_1(sched, h)
    if model == "example_3_2":
        return make_example_3_2(sched, h)
    if model == "example_3_3":
        return make_example_3_3(h)
    if model == "example_6_2":
        return make_example_6_2(h)
    if model == "operator_orbit":
        return make_operator_orbit(spec["U"], spec["x"], h)
    if model == "gram_explicit":
        return ExplicitGramSequence(spec["gram"])
    if model in ("orthonormal", "constant", "alternating", "zero"):
        return {"orthonormal": orthonormal, "constant": constant,
                "alternating": alternating, "zero": zero}[model](h)
    raise InvalidInput(f"unknown sequence model {model!r}")
