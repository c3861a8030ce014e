"""Normal-approximation formulas for the masking scheme and its adversary."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import MaskingProblem
from .channel import Dmc, SparseInput, mutual_information, output_distribution, validate_compound
from .errors import DegenerateMoments, DomainError, NonPositiveGamma
from .normal import norm_cdf
from .probdist import AdversaryMoments, Distribution, as_probs, bhattacharyya, conditional_kl, omega


@dataclass(frozen=True)
class BeParams:
    n: int
    sigma2_bar: float
    t_bar: float


@dataclass(frozen=True)
class AdversaryDesign:
    phi: float
    tau: float
    mu_low: float
    mu_high: float
    n: int


def berry_esseen_gap(p: BeParams) -> float:
    """Uniform bound 6*T/(sigma^3 sqrt(n)) on the CDF error of a normalised sum."""
    if not (p.sigma2_bar > 0):
        raise DomainError(f"variance must be positive, got {p.sigma2_bar!r}")
    if p.t_bar < 0 or p.n < 1:
        raise DomainError("third moment must be non-negative and n at least 1")
    return 6.0 * p.t_bar / (p.sigma2_bar ** 1.5 * math.sqrt(p.n))


def tv_product_mixture_estimate(gamma1: float, gamma2: float, q0, q1b, q2b, n: int) -> float:
    """Leading-order value 2*Phi(sqrt(Omega)/2) - 1 of the TV between the n-fold outputs.

    ``n`` only enters through the vanishing remainder, which is not modelled.
    """
    if n < 1:
        raise DomainError(f"n must be at least 1, got {n!r}")
    om = max(omega(gamma1, gamma2, q0, q1b, q2b), 0.0)
    return 2.0 * norm_cdf(0.5 * math.sqrt(om)) - 1.0


def key_length_threshold(prob: MaskingProblem, gamma1: float, gamma2: float,
                         pbar1, pbar2, kappa: float, n: int) -> float:
    """Smallest log|M| + log|K| (nats) that the covering step asks for."""
    if not (gamma1 > 0 and gamma2 > 0):
        raise NonPositiveGamma(f"weights must be positive, got {gamma1!r}, {gamma2!r}")
    if kappa < 0:
        raise DomainError(f"kappa must be non-negative, got {kappa!r}")
    q0 = prob.ch.q0
    worst = max(gamma1 * conditional_kl(prob.ch.w1, q0, pbar1),
                gamma2 * conditional_kl(prob.ch.w2, q0, pbar2))
    return (1.0 + kappa) * math.sqrt(n) * worst


def rate_threshold(n: int, sparse: SparseInput, w: Dmc) -> float:
    """n*I(P, W) - n^(1/3), clamped at zero, for one state."""
    return max(0.0, n * mutual_information(sparse, w) - n ** (1.0 / 3.0))


def adversary_design(moments: AdversaryMoments, mu_low: float, mu_high: float, n: int) -> AdversaryDesign:
    if not (0.0 <= mu_low <= mu_high <= 1.0):
        raise DomainError(f"need 0 <= mu_low <= mu_high <= 1, got {mu_low!r}, {mu_high!r}")
    tau = 0.5 * n * mu_low * (moments.d1 + moments.d2)
    return AdversaryDesign(phi=moments.phi, tau=tau, mu_low=mu_low, mu_high=mu_high, n=n)


def adversary_error_bounds(design: AdversaryDesign, moments: AdversaryMoments) -> tuple[float, float]:
    """Upper bounds on the false-alarm and missed-detection probabilities of the threshold test."""
    spread = moments.d1 - moments.d2
    if spread <= 0 or moments.delta <= 0:
        raise DegenerateMoments(
            f"need D1 > D2 and Delta > 0, got D1-D2={spread!r}, Delta={moments.delta!r}")
    rn = math.sqrt(design.n)
    lead = 1.0 - norm_cdf(0.5 * design.mu_low * rn * spread / math.sqrt(moments.delta))
    scale = rn * design.mu_low * design.mu_high * spread / (4.0 * math.sqrt(2.0 * math.pi * moments.delta ** 3))
    alpha = lead + scale * abs(moments.gamma1)
    beta = lead + scale * abs(moments.gamma2)
    return min(max(alpha, 0.0), 1.0), min(max(beta, 0.0), 1.0)


def tv_lower_from_test(alpha: float, beta: float) -> float:
    for v in (alpha, beta):
        if not (0.0 <= v <= 1.0):
            raise DomainError(f"error probabilities must lie in [0, 1], got {v!r}")
    return max(0.0, math.fsum((1.0, -alpha, -beta)))


def bhattacharyya_tv_bound(q1, q2, n: int) -> float:
    """sqrt(1 - F^(2n)) with F the per-letter Bhattacharyya coefficient."""
    f = min(bhattacharyya(q1, q2), 1.0)
    return math.sqrt(max(0.0, -math.expm1(2 * n * math.log(f)))) if f > 0 else 1.0


def nonac_throughput_bound(delta: float, n: int) -> float:
    """(sqrt(ln(1/(1-delta)))/2) * sqrt(n) * ln(n) nats."""
    if not (0.0 < delta < 1.0):
        raise DomainError(f"delta out of range: {delta!r} is not in (0, 1)")
    if n < 2:
        raise DomainError(f"n must be at least 2, got {n!r}")
    return 0.5 * math.sqrt(-math.log1p(-delta)) * math.sqrt(n) * math.log(n)


# The non-absolutely-continuous ternary example: the active letter puts mass on
# an output the off letter never produces.

def erasure_pair_channel():
    return validate_compound([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5]],
                             [[0.5, 0.5, 0.0], [0.5, 0.0, 0.5]])


def erasure_pair_outputs(mu: float):
    q1 = np.array([(1.0 - mu) / 2.0, 0.5, mu / 2.0])
    q2 = np.array([0.5, (1.0 - mu) / 2.0, mu / 2.0])
    return q1, q2


def erasure_pair_gamma(delta: float) -> float:
    """Largest weight constant the Bhattacharyya route allows at budget delta."""
    if not (0.0 < delta < 1.0):
        raise DomainError(f"delta out of range: {delta!r} is not in (0, 1)")
    return 2.0 * math.sqrt(-math.log1p(-delta))


def erasure_pair_tv_limit(gamma: float) -> float:
    """Large-n limit sqrt(1 - exp(-gamma^2/4)) of the Bhattacharyya TV bound."""
    return math.sqrt(-math.expm1(-gamma * gamma / 4.0))


def erasure_pair_budget_check(delta: float) -> dict:
    """Both readings of the budget at the largest allowed weight constant.

    The bound's limit at that weight is sqrt(delta), which exceeds delta;
    the weight that keeps the limit at delta itself is also reported.
    """
    g = erasure_pair_gamma(delta)
    g_strict = 2.0 * math.sqrt(-math.log1p(-delta * delta))
    return {
        "delta": delta,
        "gamma": g,
        "tv_limit": erasure_pair_tv_limit(g),
        "sqrt_delta": math.sqrt(delta),
        "gamma_for_limit_delta": g_strict,
        "tv_limit_at_that_gamma": erasure_pair_tv_limit(g_strict),
    }


def sparse_input_for(prob: MaskingProblem, state: int, gamma: float, n: int, pbar) -> SparseInput:
    return SparseInput(mu=gamma / math.sqrt(n), pbar=Distribution(as_probs(pbar)), off=prob.ch.off(state))


def product_output(prob: MaskingProblem, state: int, gamma: float, n: int, pbar) -> np.ndarray:
    sp = sparse_input_for(prob, state, gamma, n, pbar)
    return output_distribution(prob.ch.state(state), sp).probs
