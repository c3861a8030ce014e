"""Finite distributions and the divergence functionals built on them.

All logarithms are natural, so every divergence is in nats.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    AbsoluteContinuityViolation,
    DimensionMismatch,
    InvalidDistribution,
    NonPositiveGamma,
    PhiOutOfRange,
)

SUM_TOL = 1e-12
NORMALIZE_TOL = 1e-9
ZERO_TOL = 1e-15


class Distribution:
    """Immutable probability vector over a finite alphabet."""

    __slots__ = ("_p",)

    def __init__(self, probs: Sequence[float]):
        p = np.array(probs, dtype=float).ravel()
        if p.size == 0:
            raise InvalidDistribution("distribution must have at least one entry")
        if not np.all(np.isfinite(p)):
            raise InvalidDistribution("distribution entries must be finite")
        if np.any(p < 0):
            raise InvalidDistribution(f"negative probability in {p.tolist()}")
        s = math.fsum(p)
        if abs(s - 1.0) > SUM_TOL:
            raise InvalidDistribution(f"probabilities sum to {s!r}, not 1")
        p.setflags(write=False)
        self._p = p

    @classmethod
    def normalize(cls, probs: Sequence[float]) -> "Distribution":
        """Rescale ``probs`` to sum to one if it is already within 1e-9 of that."""
        p = np.array(probs, dtype=float).ravel()
        if p.size == 0 or not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InvalidDistribution(f"not a probability vector: {p.tolist()}")
        s = math.fsum(p)
        if abs(s - 1.0) > NORMALIZE_TOL:
            raise InvalidDistribution(f"probabilities sum to {s!r}; too far from 1 to rescale")
        return cls(p / s)

    @classmethod
    def point_mass(cls, size: int, index: int) -> "Distribution":
        p = np.zeros(size)
        p[index] = 1.0
        return cls(p)

    @classmethod
    def from_json(cls, text: str) -> "Distribution":
        return cls.normalize(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(self._p.tolist())

    @property
    def probs(self) -> np.ndarray:
        return self._p

    @property
    def support(self) -> np.ndarray:
        return self._p > ZERO_TOL

    def __len__(self) -> int:
        return self._p.size

    def __getitem__(self, i):
        return self._p[i]

    def __iter__(self):
        return iter(self._p.tolist())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Distribution):
            return NotImplemented
        return self._p.shape == other._p.shape and bool(np.all(self._p == other._p))

    def __hash__(self) -> int:
        return hash(self._p.tobytes())

    def __repr__(self) -> str:
        return f"Distribution({self._p.tolist()})"


def as_probs(p) -> np.ndarray:
    if isinstance(p, Distribution):
        return p.probs
    return np.asarray(p, dtype=float)


@dataclass(frozen=True)
class DivergenceProfile:
    """Single-letter quantities of two active output laws against the quiet law."""

    kl_1: float
    kl_2: float
    chi2_1: float
    chi2_2: float
    rho: float
    psi: float


@dataclass(frozen=True)
class AdversaryMoments:
    """Per-symbol mean, variance and third-order terms of the adversary's statistic."""

    phi: float
    d1: float
    d2: float
    delta: float
    gamma1: float
    gamma2: float


def _same_length(*ps: np.ndarray) -> None:
    n = ps[0].size
    if any(p.size != n for p in ps):
        raise DimensionMismatch(f"alphabet sizes differ: {[p.size for p in ps]}")


def _check_continuity(p: np.ndarray, q: np.ndarray) -> None:
    bad = (p > ZERO_TOL) & (q <= ZERO_TOL)
    if np.any(bad):
        idx = np.flatnonzero(bad)
        shown = ", ".join(map(str, idx[:8])) + (", ..." if idx.size > 8 else "")
        raise AbsoluteContinuityViolation(f"mass at symbols [{shown}] where the reference is zero")


def kl_divergence(p, q) -> float:
    p, q = as_probs(p), as_probs(q)
    _same_length(p, q)
    _check_continuity(p, q)
    m = p > ZERO_TOL
    return max(0.0, math.fsum(p[m] * np.log(p[m] / q[m])))


def chi_squared(p, q) -> float:
    p, q = as_probs(p), as_probs(q)
    _same_length(p, q)
    _check_continuity(p, q)
    m = q > ZERO_TOL
    return math.fsum((p[m] - q[m]) ** 2 / q[m])


def total_variation(p, q) -> float:
    p, q = as_probs(p), as_probs(q)
    _same_length(p, q)
    return 0.5 * math.fsum(np.abs(p - q))


def bhattacharyya(p, q) -> float:
    p, q = as_probs(p), as_probs(q)
    _same_length(p, q)
    return math.fsum(np.sqrt(p * q))


def _centered_ratios(q0: np.ndarray, *qs: np.ndarray):
    _same_length(q0, *qs)
    for q in qs:
        _check_continuity(q, q0)
    m = q0 > ZERO_TOL
    return m, [q[m] / q0[m] - 1.0 for q in qs]


def rho_correlation(q1, q2, q0) -> float:
    """E_{q0}[(q1/q0 - 1)(q2/q0 - 1)]."""
    q1, q2, q0 = as_probs(q1), as_probs(q2), as_probs(q0)
    m, (a, b) = _centered_ratios(q0, q1, q2)
    return math.fsum(q0[m] * a * b)


def psi_direct(q1, q2, q0) -> float:
    """E_{q0}[((q1 - q2)/q0)^2], computed without going through chi2 and rho."""
    q1, q2, q0 = as_probs(q1), as_probs(q2), as_probs(q0)
    _same_length(q0, q1, q2)
    _check_continuity(q1, q0)
    _check_continuity(q2, q0)
    m = q0 > ZERO_TOL
    return math.fsum((q1[m] - q2[m]) ** 2 / q0[m])


def _rows(w) -> np.ndarray:
    return np.asarray(getattr(w, "matrix", w), dtype=float)


def conditional_kl(w, q0, pbar) -> float:
    """Sum over inputs x of pbar(x) * D(w(.|x) || q0)."""
    mat = _rows(w)
    pb = as_probs(pbar)
    q0 = as_probs(q0)
    if mat.ndim != 2 or mat.shape[0] != pb.size or mat.shape[1] != q0.size:
        raise DimensionMismatch(f"channel shape {mat.shape} vs pbar {pb.size}, q0 {q0.size}")
    return math.fsum(pb[x] * kl_divergence(mat[x], q0) for x in range(pb.size) if pb[x] > ZERO_TOL)


def omega(g1: float, g2: float, q0, q1b, q2b) -> float:
    if not (g1 > 0 and g2 > 0):
        raise NonPositiveGamma(f"weights must be positive, got {g1!r}, {g2!r}")
    q0, q1b, q2b = as_probs(q0), as_probs(q1b), as_probs(q2b)
    return omega_from_terms(g1, g2, chi_squared(q1b, q0), chi_squared(q2b, q0),
                            rho_correlation(q1b, q2b, q0))


def omega_from_terms(g1: float, g2: float, chi2_1: float, chi2_2: float, rho: float) -> float:
    return g1 * g1 * chi2_1 + g2 * g2 * chi2_2 - 2.0 * g1 * g2 * rho


def divergence_profile(q1t, q2t, q0) -> DivergenceProfile:
    q1t, q2t, q0 = as_probs(q1t), as_probs(q2t), as_probs(q0)
    c1, c2 = chi_squared(q1t, q0), chi_squared(q2t, q0)
    rho = rho_correlation(q1t, q2t, q0)
    return DivergenceProfile(
        kl_1=kl_divergence(q1t, q0),
        kl_2=kl_divergence(q2t, q0),
        chi2_1=c1,
        chi2_2=c2,
        rho=rho,
        psi=psi_direct(q1t, q2t, q0),
    )


def moment_terms(phi: float, chi2_1: float, chi2_2: float, rho: float):
    """(D1, D2, Delta) at weight phi from the three second-order quantities."""
    d1 = phi * chi2_1 - (1.0 - phi) * rho
    d2 = -(1.0 - phi) * chi2_2 + phi * rho
    delta = phi * phi * chi2_1 + (1.0 - phi) ** 2 * chi2_2 - 2.0 * phi * (1.0 - phi) * rho
    return d1, d2, delta


def statistic(phi: float, q1t, q2t, q0) -> np.ndarray:
    """Per-symbol statistic [phi(q1-q0) - (1-phi)(q2-q0)]/q0 evaluated on each output."""
    q1t, q2t, q0 = as_probs(q1t), as_probs(q2t), as_probs(q0)
    num = phi * (q1t - q0) - (1.0 - phi) * (q2t - q0)
    out = np.zeros_like(q0)
    m = q0 > ZERO_TOL
    out[m] = num[m] / q0[m]
    return out


def adversary_moments(phi: float, q1t, q2t, q0) -> AdversaryMoments:
    if not (0.0 <= phi <= 1.0):
        raise PhiOutOfRange(f"phi must lie in [0, 1], got {phi!r}")
    q1t, q2t, q0 = as_probs(q1t), as_probs(q2t), as_probs(q0)
    m, (a, b) = _centered_ratios(q0, q1t, q2t)
    w = q0[m]
    t = phi * a - (1.0 - phi) * b
    d1 = math.fsum(w * a * t)
    d2 = math.fsum(w * b * t)
    delta = math.fsum(w * t * t)
    g1 = math.fsum(w * a * t * t)
    g2 = math.fsum(w * b * t * t)
    c1, c2 = math.fsum(w * a * a), math.fsum(w * b * b)
    rho = math.fsum(w * a * b)
    e1, e2, e3 = moment_terms(phi, c1, c2, rho)
    scale = 1.0 + abs(c1) + abs(c2)
    assert abs(d1 - e1) <= 1e-10 * scale and abs(d2 - e2) <= 1e-10 * scale
    assert abs(delta - e3) <= 1e-10 * scale
    return AdversaryMoments(phi=phi, d1=d1, d2=d2, delta=max(delta, 0.0), gamma1=g1, gamma2=g2)
