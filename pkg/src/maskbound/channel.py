"""Discrete memoryless channels and the two-state compound channel."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import (
    DimensionMismatch,
    InvalidDistribution,
    MaskingError,
    MuOutOfRange,
    NoOffSymbol,
    NonBinaryInput,
    OffSymbolMassNonzero,
)
from .probdist import ZERO_TOL, Distribution, as_probs, kl_divergence

OFF_TOL = 1e-12
FEASIBLE_TOL = 1e-8


class Dmc:
    """Row-stochastic matrix; row ``x`` is the output law given input ``x``."""

    __slots__ = ("_w",)

    def __init__(self, rows):
        if isinstance(rows, Dmc):
            rows = rows.matrix
        try:
            w = np.array(rows, dtype=float)
        except ValueError as exc:
            raise DimensionMismatch("channel rows have unequal lengths") from exc
        if w.ndim != 2 or w.shape[0] == 0 or w.shape[1] == 0:
            raise DimensionMismatch(f"channel must be a non-empty matrix, got shape {w.shape}")
        w = np.vstack([Distribution.normalize(r).probs for r in w])
        w.setflags(write=False)
        self._w = w

    @property
    def matrix(self) -> np.ndarray:
        return self._w

    @property
    def n_inputs(self) -> int:
        return self._w.shape[0]

    @property
    def n_outputs(self) -> int:
        return self._w.shape[1]

    def row(self, x: int) -> Distribution:
        return Distribution(self._w[x])

    def permute_inputs(self, order) -> "Dmc":
        return Dmc(self._w[list(order)])

    def tolist(self):
        return self._w.tolist()

    def __eq__(self, other):
        if not isinstance(other, Dmc):
            return NotImplemented
        return self._w.shape == other._w.shape and bool(np.all(self._w == other._w))

    def __repr__(self):
        return f"Dmc({self._w.tolist()})"


@dataclass(frozen=True)
class CompoundChannel:
    w1: Dmc
    w2: Dmc
    off1: int
    off2: int
    tol: float = OFF_TOL

    def __post_init__(self):
        if self.w1.matrix.shape != self.w2.matrix.shape:
            raise DimensionMismatch(
                f"state channels differ in shape: {self.w1.matrix.shape} vs {self.w2.matrix.shape}")
        k = self.w1.n_inputs
        if not (0 <= self.off1 < k and 0 <= self.off2 < k):
            raise NoOffSymbol(f"off symbols ({self.off1}, {self.off2}) outside the input alphabet")
        diff = np.max(np.abs(self.w1.matrix[self.off1] - self.w2.matrix[self.off2]))
        if diff > self.tol:
            raise NoOffSymbol(
                f"rows w1[{self.off1}] and w2[{self.off2}] differ by {diff:.3g}")

    @property
    def q0(self) -> Distribution:
        return Distribution(self.w1.matrix[self.off1])

    @property
    def is_binary(self) -> bool:
        return self.w1.n_inputs == 2

    def active_rows(self):
        """Output laws of the single non-off input in each state (binary inputs only)."""
        if not self.is_binary:
            raise NonBinaryInput(f"closed forms need two inputs, channel has {self.w1.n_inputs}")
        return self.w1.row(1 - self.off1), self.w2.row(1 - self.off2)

    def state(self, s: int) -> Dmc:
        return self.w1 if s == 1 else self.w2

    def off(self, s: int) -> int:
        return self.off1 if s == 1 else self.off2

    def to_dict(self) -> dict:
        return {"w1": self.w1.tolist(), "w2": self.w2.tolist(), "off1": self.off1, "off2": self.off2}


@dataclass(frozen=True)
class SparseInput:
    """Input law that puts weight ``mu`` on the active letters (spread by ``pbar``)."""

    mu: float
    pbar: Distribution
    off: int

    def __post_init__(self):
        if not (0.0 <= self.mu < 1.0):
            raise MuOutOfRange(f"activity weight must lie in [0, 1), got {self.mu!r}")
        if self.pbar[self.off] > ZERO_TOL:
            raise OffSymbolMassNonzero(f"pbar puts mass {self.pbar[self.off]} on the off symbol")

    def distribution(self) -> Distribution:
        p = self.mu * self.pbar.probs.copy()
        p[self.off] = 1.0 - self.mu
        return Distribution.normalize(p)


def validate_compound(w1: Dmc, w2: Dmc, tol: float = OFF_TOL) -> CompoundChannel:
    """Attach the lexicographically smallest pair of matching rows as off symbols."""
    w1, w2 = Dmc(w1), Dmc(w2)
    if w1.matrix.shape != w2.matrix.shape:
        raise DimensionMismatch(f"state channels differ in shape: {w1.matrix.shape} vs {w2.matrix.shape}")
    for x in range(w1.n_inputs):
        for xp in range(w2.n_inputs):
            if np.max(np.abs(w1.matrix[x] - w2.matrix[xp])) <= tol:
                return CompoundChannel(w1, w2, x, xp, tol)
    raise NoOffSymbol("no input pair has the same output law in both states")


def channel_from_dict(data: dict, tol: float = OFF_TOL) -> CompoundChannel:
    for key in ("w1", "w2"):
        if key not in data:
            raise InvalidDistribution(f"missing field '{key}'")
        if not isinstance(data[key], list) or not data[key] or not all(
                isinstance(r, list) for r in data[key]):
            raise InvalidDistribution(f"field '{key}' must be a list of rows")
    try:
        w1, w2 = Dmc(data["w1"]), Dmc(data["w2"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, MaskingError):
            raise
        raise InvalidDistribution(f"field 'w1'/'w2' holds non-numeric entries: {exc}") from exc
    if "off1" in data or "off2" in data:
        if "off1" not in data or "off2" not in data:
            raise InvalidDistribution("fields 'off1' and 'off2' must be given together")
        return CompoundChannel(w1, w2, int(data["off1"]), int(data["off2"]), tol)
    return validate_compound(w1, w2, tol)


def load_channel(text: str, tol: float = OFF_TOL) -> CompoundChannel:
    return channel_from_dict(json.loads(text), tol)


def output_distribution(w: Dmc, p) -> Distribution:
    if isinstance(p, SparseInput):
        p = p.distribution()
    pv = as_probs(p)
    mat = Dmc(w).matrix
    if pv.size != mat.shape[0]:
        raise DimensionMismatch(f"input law has {pv.size} entries, channel has {mat.shape[0]} inputs")
    return Distribution.normalize(pv @ mat)


def mutual_information(p, w: Dmc) -> float:
    if isinstance(p, SparseInput):
        p = p.distribution()
    pv = as_probs(p)
    mat = Dmc(w).matrix
    out = output_distribution(w, pv).probs
    return max(0.0, math.fsum(pv[x] * kl_divergence(mat[x], out)
                              for x in range(pv.size) if pv[x] > ZERO_TOL))


def absolute_continuity_check(ch: CompoundChannel) -> bool:
    zero = ch.q0.probs <= ZERO_TOL
    for w in (ch.w1, ch.w2):
        if np.any(w.matrix[:, zero] > ZERO_TOL):
            return False
    return True


@dataclass(frozen=True)
class FeasibilityResult:
    """Smallest L1 distance between the two output hulls and a pair attaining it."""

    gap: float
    p1: Distribution
    p2: Distribution
    feasible: bool
    surrogate: float = 0.0
    iterations: int = 0
    verdict: str = field(default="")

    def __iter__(self):
        return iter((self.gap, self.p1, self.p2))


def _pairwise_frank_wolfe(a1: np.ndarray, a2: np.ndarray, max_iter: int, tol: float):
    """Minimise 0.5*|a1^T p1 - a2^T p2|^2 over two simplices.

    Pairwise steps move mass from the worst active vertex to the best one in a
    single block with exact line search; plain Frank-Wolfe stalls at a
    sublinear rate when the optimum lies on a face, pairwise steps do not.
    """
    p1 = np.full(a1.shape[0], 1.0 / a1.shape[0])
    p2 = np.full(a2.shape[0], 1.0 / a2.shape[0])
    it = 0
    for it in range(1, max_iter + 1):
        r = a1.T @ p1 - a2.T @ p2
        g1, g2 = a1 @ r, -(a2 @ r)
        gap = (g1 @ p1 - g1.min()) + (g2 @ p2 - g2.min())
        if gap <= tol:
            break
        best = None
        for blk, (p, g, a, sign) in enumerate(((p1, g1, a1, 1.0), (p2, g2, a2, -1.0))):
            active = np.flatnonzero(p > 0)
            away = active[np.argmax(g[active])]
            toward = int(np.argmin(g))
            drop = g[away] - g[toward]
            if best is None or drop > best[0]:
                best = (drop, blk, away, toward, p, a, sign)
        _, blk, away, toward, p, a, sign = best
        u = sign * (a[toward] - a[away])
        uu = u @ u
        if uu <= 0:
            break
        step = min(max(-(r @ u) / uu, 0.0), p[away])
        if step <= 0:
            break
        p[toward] += step
        p[away] -= step
        if p[away] < 1e-18:
            p[toward] += p[away]
            p[away] = 0.0
    r = a1.T @ p1 - a2.T @ p2
    return p1, p2, 0.5 * float(r @ r), it


def _l1_program(a1: np.ndarray, a2: np.ndarray):
    k1, k2, ny = a1.shape[0], a2.shape[0], a1.shape[1]
    c = np.concatenate([np.zeros(k1 + k2), np.ones(ny)])
    diff = np.hstack([a1.T, -a2.T])
    eye = np.eye(ny)
    a_ub = np.vstack([np.hstack([diff, -eye]), np.hstack([-diff, -eye])])
    b_ub = np.zeros(2 * ny)
    a_eq = np.zeros((2, k1 + k2 + ny))
    a_eq[0, :k1] = 1.0
    a_eq[1, k1:k1 + k2] = 1.0
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0, 1.0],
                  bounds=[(0, None)] * (k1 + k2 + ny), method="highs")
    if not res.success:
        return None
    x = np.clip(res.x, 0.0, None)
    return x[:k1] / x[:k1].sum(), x[k1:k1 + k2] / x[k1:k1 + k2].sum()


def feasibility_gap(w1: Dmc, w2: Dmc, max_iter: int = 100_000, tol: float = 1e-12) -> FeasibilityResult:
    """Check whether the two output hulls intersect.

    The squared-L2 surrogate is minimised by Frank-Wolfe; the reported L1 gap
    is the smaller of the L1 distance at that iterate and the exact L1 optimum
    from a linear program, since the two norms have different minimisers once
    there are three or more outputs.
    """
    a1, a2 = Dmc(w1).matrix, Dmc(w2).matrix
    if a1.shape[1] != a2.shape[1]:
        raise DimensionMismatch(f"output alphabets differ: {a1.shape[1]} vs {a2.shape[1]}")
    p1, p2, surrogate, iters = _pairwise_frank_wolfe(a1, a2, max_iter, tol)
    best = (float(np.abs(a1.T @ p1 - a2.T @ p2).sum()), p1, p2)
    lp = _l1_program(a1, a2)
    if lp is not None:
        l1 = float(np.abs(a1.T @ lp[0] - a2.T @ lp[1]).sum())
        if l1 < best[0]:
            best = (l1, lp[0], lp[1])
    gap, q1, q2 = best
    feasible = gap <= FEASIBLE_TOL
    verdict = "necessary-condition feasible" if feasible else "necessary-condition infeasible"
    return FeasibilityResult(gap=gap, p1=Distribution.normalize(q1), p2=Distribution.normalize(q2),
                             feasible=feasible, surrogate=surrogate, iterations=iters, verdict=verdict)
