"""Antipodal signalling in Gaussian noise: inputs +1 / -1 against a silent 0."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .bounds import phi_inv
from .errors import DomainError, QuadratureNonConvergence
from .probdist import DivergenceProfile

QUAD_TOL = 1e-10


@dataclass(frozen=True)
class GaussianSetup:
    sigma2: float

    def __post_init__(self):
        if not (self.sigma2 > 0) or math.isinf(self.sigma2):
            raise DomainError(f"noise variance must be positive and finite, got {self.sigma2!r}")


@dataclass(frozen=True)
class GaussianQuantities:
    chi2: float
    rho: float
    kl: float
    psi: float


def gaussian_closed_form(setup: GaussianSetup) -> GaussianQuantities:
    a = 1.0 / setup.sigma2
    chi2 = math.expm1(a)
    rho = math.expm1(-a)
    return GaussianQuantities(chi2=chi2, rho=rho, kl=0.5 * a, psi=2.0 * (chi2 - rho))


def adaptive_simpson(f, a: float, b: float, tol: float = QUAD_TOL, max_depth: int = 60) -> float:
    """Integrate ``f`` on [a, b] by bisection until each piece meets its share of ``tol``."""

    def simpson(fa, fm, fb, h):
        return h / 6.0 * (fa + 4.0 * fm + fb)

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    whole = simpson(fa, fm, fb, b - a)
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    total = 0.0
    while stack:
        lo, hi, flo, fmid, fhi, est, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        fl, fr = f(0.5 * (lo + mid)), f(0.5 * (mid + hi))
        left = simpson(flo, fl, fmid, mid - lo)
        right = simpson(fmid, fr, fhi, hi - mid)
        diff = left + right - est
        if abs(diff) <= 15.0 * eps:
            total += left + right + diff / 15.0
        elif depth >= max_depth:
            raise QuadratureNonConvergence(
                f"refinement stalled on [{lo:.6g}, {hi:.6g}] with error {abs(diff):.3g}")
        else:
            stack.append((lo, mid, flo, fl, fmid, left, 0.5 * eps, depth + 1))
            stack.append((mid, hi, fmid, fr, fhi, right, 0.5 * eps, depth + 1))
    return total


def _log_density(y: float, mean: float, sigma2: float) -> float:
    return -0.5 * (y - mean) ** 2 / sigma2 - 0.5 * math.log(2.0 * math.pi * sigma2)


def _integrate(setup: GaussianSetup, integrand) -> float:
    sigma = math.sqrt(setup.sigma2)
    half = 10.0 * sigma + 10.0
    # Split at the three means so no panel straddles a peak on a coarse first pass.
    knots = [-half, -1.0, 0.0, 1.0, half]
    return math.fsum(adaptive_simpson(integrand, lo, hi, QUAD_TOL / 4.0)
                     for lo, hi in zip(knots, knots[1:]))


def quadrature_kl(setup: GaussianSetup, mean: float) -> float:
    s2 = setup.sigma2

    def integrand(y):
        lp = _log_density(y, mean, s2)
        return math.exp(lp) * (lp - _log_density(y, 0.0, s2))

    return _integrate(setup, integrand)


def quadrature_chi2(setup: GaussianSetup, mean: float) -> float:
    s2 = setup.sigma2

    def integrand(y):
        l0 = _log_density(y, 0.0, s2)
        return math.exp(l0) * math.expm1(_log_density(y, mean, s2) - l0) ** 2

    return _integrate(setup, integrand)


def quadrature_rho(setup: GaussianSetup) -> float:
    s2 = setup.sigma2

    def integrand(y):
        l0 = _log_density(y, 0.0, s2)
        return (math.exp(l0) * math.expm1(_log_density(y, 1.0, s2) - l0)
                * math.expm1(_log_density(y, -1.0, s2) - l0))

    return _integrate(setup, integrand)


def gaussian_quadrature_oracle(setup: GaussianSetup) -> GaussianQuantities:
    chi2 = quadrature_chi2(setup, 1.0)
    rho = quadrature_rho(setup)
    return GaussianQuantities(chi2=chi2, rho=rho, kl=quadrature_kl(setup, 1.0),
                              psi=chi2 + quadrature_chi2(setup, -1.0) - 2.0 * rho)


def gaussian_profile(q: GaussianQuantities) -> DivergenceProfile:
    return DivergenceProfile(kl_1=q.kl, kl_2=q.kl, chi2_1=q.chi2, chi2_2=q.chi2, rho=q.rho, psi=q.psi)


def gaussian_optimal_throughput(setup: GaussianSetup, delta: float) -> float:
    if not (0.0 < delta < 1.0):
        raise DomainError(f"delta out of range: {delta!r} is not in (0, 1)")
    a = 1.0 / setup.sigma2
    return phi_inv((1.0 + delta) / 2.0) / math.sqrt(2.0 * (math.exp(a) - math.exp(-a))) * a
