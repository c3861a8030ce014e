"""Inner and outer bounds on the square-root-law throughput and their oracles.

Throughputs are in nats per square root of the blocklength.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .channel import CompoundChannel, output_distribution
from .errors import (
    AbsoluteContinuityViolation,
    DomainError,
    NonPositiveGamma,
    OffSymbolMassNonzero,
    PhiOutOfRange,
)
from .normal import norm_ppf
from .probdist import (
    ZERO_TOL,
    Distribution,
    DivergenceProfile,
    as_probs,
    conditional_kl,
    divergence_profile,
    moment_terms,
    omega,
    omega_from_terms,
)

KL_SYMMETRY_TOL = 1e-9
EQUALITY_TOL = 1e-9
INF = math.inf


def phi_inv(p: float) -> float:
    return norm_ppf(p)


def radius(delta: float) -> float:
    """2 * Phi^{-1}((1 + delta) / 2); the constraint on Omega is radius**2."""
    return 2.0 * phi_inv((1.0 + delta) / 2.0)


@dataclass(frozen=True)
class MaskingProblem:
    ch: CompoundChannel
    delta: float
    epsilon: float = 0.1

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0):
            raise DomainError(f"delta out of range: {self.delta!r} is not in (0, 1)")
        if not (0.0 < self.epsilon < 1.0):
            raise DomainError(f"epsilon out of range: {self.epsilon!r} is not in (0, 1)")

    def profile(self) -> DivergenceProfile:
        q1t, q2t = self.ch.active_rows()
        return divergence_profile(q1t, q2t, self.ch.q0)


@dataclass(frozen=True)
class InnerBoundPoint:
    gamma1: float
    gamma2: float
    pbar1: Distribution
    pbar2: Distribution
    L: float
    S: float
    omega_value: float
    constraint_slack: float
    admissible: bool


class BoundValue(NamedTuple):
    value: float
    branch: str
    degenerate: bool = False


@dataclass
class BoundReport:
    inner_L: float
    inner_branch: str
    outer_U: float
    outer_branch: str
    optimal: Optional[float]
    conditions: dict = field(default_factory=dict)
    delta: float = 0.0
    optimal_branch: Optional[str] = None
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "BoundReport":
        return cls(**data)


def inner_bound_point(prob: MaskingProblem, gamma1: float, gamma2: float,
                      pbar1: Distribution, pbar2: Distribution) -> InnerBoundPoint:
    if not (gamma1 > 0 and gamma2 > 0):
        raise NonPositiveGamma(f"weights must be positive, got {gamma1!r}, {gamma2!r}")
    ch = prob.ch
    for s, pb in ((1, pbar1), (2, pbar2)):
        if as_probs(pb)[ch.off(s)] > ZERO_TOL:
            raise OffSymbolMassNonzero(f"pbar{s} puts mass on the off symbol {ch.off(s)}")
    q0 = ch.q0
    q1b = output_distribution(ch.w1, pbar1)
    q2b = output_distribution(ch.w2, pbar2)
    om = omega(gamma1, gamma2, q0, q1b, q2b)
    k1 = gamma1 * conditional_kl(ch.w1, q0, pbar1)
    k2 = gamma2 * conditional_kl(ch.w2, q0, pbar2)
    bound = radius(prob.delta) ** 2
    return InnerBoundPoint(
        gamma1=gamma1, gamma2=gamma2, pbar1=Distribution(as_probs(pbar1)),
        pbar2=Distribution(as_probs(pbar2)), L=min(k1, k2), S=max(k1, k2) - min(k1, k2),
        omega_value=om, constraint_slack=bound - om, admissible=om <= bound + 1e-12)


def boundary_weights(prob: MaskingProblem, pbar1, pbar2, n_points: int = 64):
    """Points (gamma1, gamma2) on the positive arc of the constraint ellipse."""
    ch = prob.ch
    q0 = ch.q0
    q1b = output_distribution(ch.w1, pbar1)
    q2b = output_distribution(ch.w2, pbar2)
    bound = radius(prob.delta) ** 2
    out = []
    for theta in np.linspace(0.0, 0.5 * math.pi, n_points + 2)[1:-1]:
        c, s = math.cos(theta), math.sin(theta)
        form = omega(c, s, q0, q1b, q2b)
        if form <= 0:
            continue
        r = math.sqrt(bound / form)
        out.append(inner_bound_point(prob, r * c, r * s, pbar1, pbar2))
    return out


def _radical_degenerate(den: float, x1: float, x2: float) -> bool:
    # chi2_1*chi2_2 - rho^2 vanishes exactly when the two centred active laws
    # are collinear (always the case with two outputs); rounding leaves dust.
    return den <= 1e-12 * x1 * x2


# Closed forms on a divergence profile.  The gaussian module feeds these directly.

def inner_from_profile(pr: DivergenceProfile, delta: float) -> BoundValue:
    c = radius(delta)
    d1, d2 = pr.kl_1, pr.kl_2
    x1, x2, rho = pr.chi2_1, pr.chi2_2, pr.rho
    if d1 <= 0.0 or d2 <= 0.0:
        # A state whose active letter looks like the off letter carries nothing.
        return BoundValue(0.0, "L1", True)
    if rho < min(x1 * d2 / d1, x2 * d1 / d2):
        den = x1 * d2 * d2 - 2.0 * rho * d1 * d2 + x2 * d1 * d1
        if den <= 1e-12 * (x1 * d2 * d2 + x2 * d1 * d1):
            return BoundValue(INF, "L1", True)
        return BoundValue(c * d1 * d2 / math.sqrt(den), "L1")
    den = x1 * x2 - rho * rho
    if _radical_degenerate(den, x1, x2):
        return BoundValue(INF, "L2", True)
    return BoundValue(c * math.sqrt(min(x1 * d2 * d2, x2 * d1 * d1) / den), "L2")


def outer_at_phi_from_profile(pr: DivergenceProfile, delta: float, phi: float):
    if not (0.0 <= phi <= 1.0):
        raise PhiOutOfRange(f"phi must lie in [0, 1], got {phi!r}")
    x1, x2, rho = pr.chi2_1, pr.chi2_2, pr.rho
    lim1 = INF if phi == 1.0 else phi / (1.0 - phi) * x1
    lim2 = INF if phi == 0.0 else (1.0 - phi) / phi * x2
    holds = rho <= min(lim1, lim2)
    d1, d2, var = moment_terms(phi, x1, x2, rho)
    if d1 - d2 <= 0.0:
        return INF, holds
    return radius(delta) * math.sqrt(max(var, 0.0)) / (d1 - d2) * max(pr.kl_1, pr.kl_2), holds


def outer_from_profile(pr: DivergenceProfile, delta: float) -> BoundValue:
    c = radius(delta) * max(pr.kl_1, pr.kl_2)
    x1, x2, rho = pr.chi2_1, pr.chi2_2, pr.rho
    if rho <= min(x1, x2):
        if pr.psi <= 0.0:
            return BoundValue(INF, "U1", True)
        return BoundValue(c / math.sqrt(pr.psi), "U1")
    den = x1 * x2 - rho * rho
    if _radical_degenerate(den, x1, x2):
        return BoundValue(INF, "U2", True)
    return BoundValue(c * math.sqrt(min(x1, x2) / den), "U2")


def verdict_from_profile(pr: DivergenceProfile, delta: float,
                         kl_tol: float = KL_SYMMETRY_TOL) -> BoundReport:
    inner = inner_from_profile(pr, delta)
    outer = outer_from_profile(pr, delta)
    d1, d2 = pr.kl_1, pr.kl_2
    conditions = {
        "rho": pr.rho,
        "chi2_1": pr.chi2_1,
        "chi2_2": pr.chi2_2,
        "kl_1": d1,
        "kl_2": d2,
        "psi": pr.psi,
        "kl_symmetry_gap": abs(d1 - d2),
        "inner_threshold": min(pr.chi2_1 * d2 / d1, pr.chi2_2 * d1 / d2) if d1 > 0 and d2 > 0 else None,
        "outer_threshold": min(pr.chi2_1, pr.chi2_2),
        "kl_symmetric": abs(d1 - d2) <= kl_tol,
    }
    optimal = None
    optimal_branch = None
    if conditions["kl_symmetric"]:
        common = max(d1, d2)
        c = radius(delta)
        if pr.rho <= min(pr.chi2_1, pr.chi2_2):
            optimal_branch = "psi"
            value = c * common / math.sqrt(pr.psi) if pr.psi > 0 else INF
        else:
            optimal_branch = "min-chi2"
            den = pr.chi2_1 * pr.chi2_2 - pr.rho ** 2
            if _radical_degenerate(den, pr.chi2_1, pr.chi2_2):
                value = INF
            else:
                value = c * math.sqrt(min(pr.chi2_1, pr.chi2_2) / den) * common
        agree = (inner.value == outer.value) or abs(inner.value - outer.value) <= EQUALITY_TOL
        conditions["inner_outer_agree"] = agree
        if agree:
            optimal = value
        else:
            optimal_branch = None
    return BoundReport(
        inner_L=inner.value, inner_branch=inner.branch, outer_U=outer.value,
        outer_branch=outer.branch, optimal=optimal, conditions=conditions, delta=delta,
        optimal_branch=optimal_branch, degenerate=inner.degenerate or outer.degenerate)


# Channel-level entry points.

def _binary_profile(prob: MaskingProblem) -> DivergenceProfile:
    q1t, q2t = prob.ch.active_rows()
    q0 = prob.ch.q0
    for q in (q1t, q2t):
        if np.any((q.probs > ZERO_TOL) & (q0.probs <= ZERO_TOL)):
            raise AbsoluteContinuityViolation(
                "an active row puts mass where the off-symbol law is zero")
    return divergence_profile(q1t, q2t, q0)


def inner_bound_infinite_key(prob: MaskingProblem) -> BoundValue:
    return inner_from_profile(_binary_profile(prob), prob.delta)


def outer_bound_at_phi(prob: MaskingProblem, phi: float):
    if not (0.0 <= phi <= 1.0):
        raise PhiOutOfRange(f"phi must lie in [0, 1], got {phi!r}")
    return outer_at_phi_from_profile(_binary_profile(prob), prob.delta, phi)


def outer_bound_min(prob: MaskingProblem) -> BoundValue:
    return outer_from_profile(_binary_profile(prob), prob.delta)


def optimality_verdict(prob: MaskingProblem, kl_tol: float = KL_SYMMETRY_TOL) -> BoundReport:
    return verdict_from_profile(_binary_profile(prob), prob.delta, kl_tol)


def inner_bound_numeric_oracle(prob: MaskingProblem, grid_resolution: int = 10_000) -> float:
    """Brute-force max of min(g1*D1, g2*D2) over the constraint ellipse.

    The objective grows along every ray from the origin, so the search walks
    the positive arc of the boundary by angle, then re-grids the best cell.
    """
    pr = _binary_profile(prob)
    bound = radius(prob.delta) ** 2

    def best_on(thetas):
        c, s = np.cos(thetas), np.sin(thetas)
        form = omega_from_terms(c, s, pr.chi2_1, pr.chi2_2, pr.rho)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(form > 0, np.sqrt(bound / np.where(form > 0, form, 1.0)), np.inf)
            vals = np.minimum(r * c * pr.kl_1, r * s * pr.kl_2)
        vals = np.where(np.isnan(vals), 0.0, vals)
        i = int(np.argmax(vals))
        return float(vals[i]), i

    step = 0.5 * math.pi / (grid_resolution + 1)
    thetas = step * np.arange(1, grid_resolution + 1)
    val, i = best_on(thetas)
    lo, hi = thetas[i] - step, thetas[i] + step
    fine = np.linspace(max(lo, 1e-15), min(hi, 0.5 * math.pi - 1e-15), grid_resolution)
    val2, _ = best_on(fine)
    return max(val, val2)


def outer_bound_grid_oracle(prob: MaskingProblem, points: int = 100_000) -> tuple[float, float]:
    """Brute-force min over phi of the outer bound among phi meeting its condition.

    Returns (U, argmin phi); the best cell is re-gridded twice at the same size.
    """
    pr = _binary_profile(prob)
    return grid_outer_from_profile(pr, prob.delta, points)


def grid_outer_from_profile(pr: DivergenceProfile, delta: float, points: int = 100_000):
    c = radius(delta) * max(pr.kl_1, pr.kl_2)

    def evaluate(phi):
        d1, d2, var = moment_terms(phi, pr.chi2_1, pr.chi2_2, pr.rho)
        with np.errstate(divide="ignore", invalid="ignore"):
            lim1 = np.where(phi < 1.0, phi / (1.0 - phi) * pr.chi2_1, np.inf)
            lim2 = np.where(phi > 0.0, (1.0 - phi) / phi * pr.chi2_2, np.inf)
            ok = (pr.rho <= np.minimum(lim1, lim2)) & (d1 - d2 > 0)
            g = np.where(ok, np.sqrt(np.maximum(var, 0.0)) / (d1 - d2), np.inf)
        return g

    lo, hi = 0.0, 1.0
    best_g, best_phi = np.inf, 0.5
    for _ in range(3):
        phis = np.linspace(lo, hi, points)
        g = evaluate(phis)
        i = int(np.argmin(g))
        if g[i] < best_g:
            best_g, best_phi = float(g[i]), float(phis[i])
        h = phis[1] - phis[0]
        lo, hi = max(phis[i] - h, 0.0), min(phis[i] + h, 1.0)
    return c * best_g, best_phi
