import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maskbound.channel import (
    CompoundChannel,
    Dmc,
    SparseInput,
    absolute_continuity_check,
    channel_from_dict,
    feasibility_gap,
    load_channel,
    mutual_information,
    output_distribution,
    validate_compound,
)
from maskbound.errors import (
    DimensionMismatch,
    InvalidDistribution,
    MuOutOfRange,
    NoOffSymbol,
    OffSymbolMassNonzero,
)
from maskbound.probdist import Distribution, conditional_kl

from helpers import FEASIBILITY_FIXTURES, bern, grid_feasibility_gap, random_binary_channels

ERASURE_W1 = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5]]
ERASURE_W2 = [[0.5, 0.5, 0.0], [0.5, 0.0, 0.5]]


class TestStructure:
    def test_dmc_rows_validated(self):
        with pytest.raises(InvalidDistribution):
            Dmc([[0.5, 0.6]])
        with pytest.raises(DimensionMismatch):
            Dmc([[0.5, 0.5], [1.0]])
        assert Dmc([[0.2, 0.8]]).n_outputs == 2

    def test_identical_bsc_picks_smallest_pair(self):
        bsc = [bern(0.1), bern(0.9)]
        ch = validate_compound(bsc, bsc)
        assert (ch.off1, ch.off2) == (0, 0)

    def test_erasure_pair_off_symbols(self):
        ch = validate_compound(ERASURE_W1, ERASURE_W2)
        assert (ch.off1, ch.off2) == (0, 0)
        assert ch.q0.probs.tolist() == [0.5, 0.5, 0.0]

    def test_swapped_off_symbol(self):
        ch = validate_compound([bern(0.3), bern(0.6)], [bern(0.8), bern(0.3)])
        assert (ch.off1, ch.off2) == (0, 1)

    def test_no_off_symbol(self):
        with pytest.raises(NoOffSymbol):
            validate_compound([bern(0.1), bern(0.2)], [bern(0.3), bern(0.4)])

    def test_explicit_off_symbols_checked(self):
        with pytest.raises(NoOffSymbol):
            CompoundChannel(Dmc([bern(0.1), bern(0.2)]), Dmc([bern(0.1), bern(0.2)]), 0, 1)

    def test_off_tolerance_relaxes_matching(self):
        w1, w2 = [bern(0.3), bern(0.6)], [bern(0.3 + 1e-9), bern(0.9)]
        with pytest.raises(NoOffSymbol):
            validate_compound(w1, w2)
        assert validate_compound(w1, w2, tol=1e-8).off2 == 0

    def test_channel_json(self):
        ch = load_channel(json.dumps({"w1": [bern(0.2), bern(0.5)], "w2": [bern(0.2), bern(0.7)]}))
        assert channel_from_dict(ch.to_dict()).to_dict() == ch.to_dict()
        with pytest.raises(InvalidDistribution, match="'w1'"):
            channel_from_dict({"w2": [bern(0.2)]})


class TestOutputs:
    def test_point_mass_selects_row(self):
        w = Dmc([bern(0.2), bern(0.7)])
        assert output_distribution(w, [0, 1]).probs.tolist() == pytest.approx(bern(0.7))

    def test_sparse_input(self):
        w = Dmc([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5]])
        zero = SparseInput(0.0, Distribution([0, 1]), 0)
        assert output_distribution(w, zero).probs.tolist() == [0.5, 0.5, 0.0]
        sp = SparseInput(0.2, Distribution([0, 1]), 0)
        assert output_distribution(w, sp).probs == pytest.approx([0.4, 0.5, 0.1], abs=1e-15)
        with pytest.raises(MuOutOfRange):
            SparseInput(1.0, Distribution([0, 1]), 0)
        with pytest.raises(OffSymbolMassNonzero):
            SparseInput(0.1, Distribution([0.5, 0.5]), 0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            output_distribution(Dmc([bern(0.2), bern(0.7)]), [1, 0, 0])

    def test_mutual_information(self):
        assert mutual_information([1, 0], Dmc([bern(0.2), bern(0.7)])) == 0.0
        assert mutual_information([0.5, 0.5], Dmc([bern(0.3), bern(0.3)])) == pytest.approx(0.0, abs=1e-15)
        assert mutual_information([0.5, 0.5], Dmc([[1, 0], [0, 1]])) == pytest.approx(math.log(2), abs=1e-15)

    def test_sparse_mutual_information_scaling(self):
        n, gamma = 10**6, 1.0
        for ch in random_binary_channels(10, seed=3):
            pbar = Distribution([0, 1])
            sp = SparseInput(gamma / math.sqrt(n), pbar, ch.off1)
            ratio = n * mutual_information(sp, ch.w1) / (gamma * math.sqrt(n))
            ref = conditional_kl(ch.w1, ch.q0, pbar)
            assert abs(ratio / ref - 1) <= 0.05

    def test_absolute_continuity(self):
        assert absolute_continuity_check(validate_compound([bern(0.1), bern(0.9)], [bern(0.1), bern(0.8)]))
        assert not absolute_continuity_check(validate_compound(ERASURE_W1, ERASURE_W2))


class TestFeasibility:
    def test_disjoint_intervals(self):
        res = feasibility_gap([bern(0.1), bern(0.2)], [bern(0.6), bern(0.9)])
        assert res.gap == pytest.approx(0.8, abs=1e-9)
        assert not res.feasible
        assert res.verdict == "necessary-condition infeasible"

    def test_identical_and_shared_rows(self):
        w = [bern(0.1), bern(0.6)]
        assert feasibility_gap(w, w).gap <= 1e-12
        res = feasibility_gap([bern(0.3), bern(0.9)], [bern(0.7), bern(0.3)])
        assert res.feasible and res.verdict == "necessary-condition feasible"

    def test_output_alphabets_must_match(self):
        with pytest.raises(DimensionMismatch):
            feasibility_gap([bern(0.1)], [[0.2, 0.3, 0.5]])

    def test_returned_pair_attains_gap(self):
        w1, w2 = FEASIBILITY_FIXTURES["vertex_pair3"]
        res = feasibility_gap(w1, w2)
        l1 = np.abs(res.p1.probs @ np.array(w1) - res.p2.probs @ np.array(w2)).sum()
        assert l1 == pytest.approx(res.gap, abs=1e-12)

    @pytest.mark.parametrize("name", [k for k, v in FEASIBILITY_FIXTURES.items() if len(v[0]) == 2])
    def test_matches_grid_on_two_input_fixtures(self, name):
        w1, w2 = FEASIBILITY_FIXTURES[name]
        assert feasibility_gap(w1, w2).gap == pytest.approx(grid_feasibility_gap(w1, w2), abs=1e-6)


channel_2x3 = st.lists(st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3), min_size=2, max_size=2).map(
    lambda rows: (np.array(rows) / np.array(rows).sum(axis=1, keepdims=True)).tolist())


@settings(max_examples=25, deadline=None)
@given(channel_2x3, channel_2x3)
def test_gap_never_exceeds_grid_and_is_close(w1, w2):
    gap = feasibility_gap(w1, w2).gap
    grid = grid_feasibility_gap(w1, w2)
    # The optimum is a minimum over the simplices, which contain the grid.
    assert gap <= grid + 1e-9
    # Moving each weight vector to the nearest grid point costs at most 1e-3 in L1 per simplex.
    assert grid - gap <= 2 * 1e-3 + 1e-9


@settings(max_examples=40, deadline=None)
@given(channel_2x3, channel_2x3, st.permutations([0, 1]))
def test_gap_symmetric_and_permutation_invariant(w1, w2, order):
    base = feasibility_gap(w1, w2).gap
    assert feasibility_gap(w2, w1).gap == pytest.approx(base, abs=1e-9)
    assert feasibility_gap(Dmc(w1).permute_inputs(order), w2).gap == pytest.approx(base, abs=1e-9)
