import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maskbound.errors import (
    AbsoluteContinuityViolation,
    DimensionMismatch,
    InvalidDistribution,
    NonPositiveGamma,
    PhiOutOfRange,
)
from maskbound.probdist import (
    Distribution,
    adversary_moments,
    bhattacharyya,
    chi_squared,
    conditional_kl,
    divergence_profile,
    kl_divergence,
    omega,
    psi_direct,
    rho_correlation,
    statistic,
    total_variation,
)

from helpers import UNIFORM3


def bern(p):
    return [1 - p, p]


def simplex(size):
    return st.lists(st.floats(0.01, 1.0), min_size=size, max_size=size).map(
        lambda v: (np.array(v) / sum(v)).tolist())


three_laws = st.integers(2, 6).flatmap(lambda k: st.tuples(simplex(k), simplex(k), simplex(k)))


class TestDistribution:
    def test_rejects_negative_and_bad_sums(self):
        with pytest.raises(InvalidDistribution):
            Distribution([1.2, -0.2])
        with pytest.raises(InvalidDistribution):
            Distribution([0.5, 0.6])
        with pytest.raises(InvalidDistribution):
            Distribution([])

    def test_normalize_rescales_small_drift_only(self):
        d = Distribution.normalize([0.5 + 4e-10, 0.5])
        assert math.fsum(d.probs) == pytest.approx(1.0, abs=1e-15)
        with pytest.raises(InvalidDistribution):
            Distribution.normalize([0.5 + 1e-6, 0.5])

    def test_json_round_trip_and_immutability(self):
        d = Distribution([0.25, 0.5, 0.25])
        assert Distribution.from_json(d.to_json()) == d
        with pytest.raises(ValueError):
            d.probs[0] = 1.0

    def test_point_mass(self):
        assert Distribution.point_mass(3, 2).probs.tolist() == [0.0, 0.0, 1.0]


class TestDivergences:
    def test_kl_examples(self):
        assert kl_divergence(bern(0.5), bern(0.5)) == 0.0
        assert kl_divergence(bern(0.5), bern(0.25)) == pytest.approx(0.1438410362258904, abs=1e-12)
        with pytest.raises(DimensionMismatch):
            kl_divergence([0.5, 0.5], [0.5, 0.0, 0.5])

    def test_chi_squared_examples(self):
        assert chi_squared(bern(0.25), bern(0.25)) == 0.0
        assert chi_squared(bern(0.5), bern(0.25)) == pytest.approx(1 / 3, abs=1e-15)
        with pytest.raises(AbsoluteContinuityViolation):
            chi_squared(bern(1.0), bern(0.0))

    def test_total_variation_examples(self):
        assert total_variation(bern(0.3), bern(0.3)) == 0.0
        assert total_variation(bern(0.5), bern(0.25)) == pytest.approx(0.25, abs=1e-15)
        assert total_variation([1, 0], [0, 1]) == 1.0

    def test_bhattacharyya_examples(self):
        assert bhattacharyya(bern(0.3), bern(0.3)) == pytest.approx(1.0, abs=1e-15)
        assert bhattacharyya([1, 0], [0, 1]) == 0.0
        assert bhattacharyya(bern(0.5), bern(0.25)) == pytest.approx(0.9659258262890683, abs=1e-12)

    def test_rho_identities(self):
        q, q0 = [0.2, 0.5, 0.3], [0.3, 0.3, 0.4]
        assert rho_correlation(q, q, q0) == pytest.approx(chi_squared(q, q0), abs=1e-15)
        assert rho_correlation(q0, q, q0) == pytest.approx(0.0, abs=1e-15)

    def test_rho_gaussian_discretised(self):
        y = np.linspace(-6, 6, 1201)

        def dens(m):
            d = np.exp(-0.5 * (y - m) ** 2)
            return d / d.sum()

        assert rho_correlation(dens(1), dens(-1), dens(0)) == pytest.approx(math.exp(-1) - 1, abs=1e-6)

    def test_conditional_kl(self):
        w = [bern(0.5), bern(0.25)]
        assert conditional_kl(w, bern(0.25), [0, 1]) == 0.0
        assert conditional_kl(w, bern(0.25), [0.5, 0.5]) == pytest.approx(0.0719205181129452, abs=1e-12)

    def test_ternary_profile(self):
        pr = divergence_profile([0.5, 0.25, 0.25], [0.25, 0.5, 0.25], UNIFORM3)
        assert pr.chi2_1 == pytest.approx(0.125, abs=1e-15)
        assert pr.rho == pytest.approx(-0.0625, abs=1e-15)
        assert pr.psi == pytest.approx(0.375, abs=1e-15)
        assert pr.kl_1 == pytest.approx(0.05889151782819173, abs=1e-15)

    def test_omega(self):
        q = [0.5, 0.25, 0.25]
        assert omega(1.3, 1.3, UNIFORM3, q, q) == pytest.approx(0.0, abs=1e-15)
        assert omega(1, 1, UNIFORM3, q, [0.25, 0.5, 0.25]) == pytest.approx(0.375, abs=1e-15)
        assert omega(1, 1e-12, UNIFORM3, q, [0.25, 0.5, 0.25]) == pytest.approx(0.125, abs=1e-12)
        with pytest.raises(NonPositiveGamma):
            omega(0, 1, UNIFORM3, q, q)


class TestAdversaryMoments:
    def test_ternary_half(self):
        m = adversary_moments(0.5, [0.5, 0.25, 0.25], [0.25, 0.5, 0.25], UNIFORM3)
        assert m.d1 == pytest.approx(0.09375, abs=1e-15)
        assert m.d2 == pytest.approx(-0.09375, abs=1e-15)
        assert m.delta == pytest.approx(0.09375, abs=1e-15)

    def test_identical_alternatives_vanish(self):
        q = [0.5, 0.25, 0.25]
        m = adversary_moments(0.5, q, q, UNIFORM3)
        assert m.d1 == pytest.approx(0.0, abs=1e-15)
        assert m.delta == pytest.approx(0.0, abs=1e-15)

    def test_phi_one(self):
        q1, q2 = [0.5, 0.25, 0.25], [0.25, 0.5, 0.25]
        m = adversary_moments(1.0, q1, q2, UNIFORM3)
        assert m.d1 == pytest.approx(chi_squared(q1, UNIFORM3), abs=1e-15)
        assert m.d2 == pytest.approx(rho_correlation(q1, q2, UNIFORM3), abs=1e-15)
        assert m.delta == pytest.approx(chi_squared(q1, UNIFORM3), abs=1e-15)

    def test_phi_range(self):
        with pytest.raises(PhiOutOfRange):
            adversary_moments(1.5, UNIFORM3, UNIFORM3, UNIFORM3)

    def test_d1_is_mean_of_statistic_under_active_law(self):
        q1, q2 = [0.5, 0.25, 0.25], [0.25, 0.5, 0.25]
        for phi in np.linspace(0, 1, 11):
            t = statistic(phi, q1, q2, UNIFORM3)
            m = adversary_moments(phi, q1, q2, UNIFORM3)
            # E_{q1}[T] - E_{q0}[T] = D1, and E_{q0}[T] = 0.
            assert math.fsum(np.array(q1) * t) == pytest.approx(m.d1, abs=1e-14)
            assert math.fsum(np.array(UNIFORM3) * t) == pytest.approx(0.0, abs=1e-14)


@settings(max_examples=200, deadline=None)
@given(three_laws)
def test_divergence_invariants(laws):
    p, q, q0 = laws
    kl = kl_divergence(p, q)
    tv = total_variation(p, q)
    f = bhattacharyya(p, q)
    assert kl >= 0 and chi_squared(p, q) >= 0
    assert 0 <= tv <= 1 and 0 <= f <= 1 + 1e-12
    assert tv <= math.sqrt(max(0.0, 1 - f * f)) + 1e-12
    assert tv <= math.sqrt(kl / 2) + 1e-12
    assert kl_divergence(p, p) == pytest.approx(0.0, abs=1e-10)
    c1, c2, rho = chi_squared(p, q0), chi_squared(q, q0), rho_correlation(p, q, q0)
    assert psi_direct(p, q, q0) == pytest.approx(c1 + c2 - 2 * rho, abs=1e-10 * (1 + c1 + c2))
    assert abs(rho) <= math.sqrt(c1 * c2) * (1 + 1e-12) + 1e-15
    assert omega(0.7, 1.9, q0, p, q) >= -1e-12


@settings(max_examples=100, deadline=None)
@given(three_laws, st.floats(0.0, 1.0))
def test_delta_equals_omega_at_phi_weights(laws, phi):
    q1, q2, q0 = laws
    m = adversary_moments(phi, q1, q2, q0)
    assert m.delta >= 0
    if 0 < phi < 1:
        ref = omega(phi, 1 - phi, q0, q1, q2)
        assert m.delta == pytest.approx(ref, abs=1e-12 * (1 + ref))
