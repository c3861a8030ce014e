"""Fixtures and brute-force oracles shared by the test modules."""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.spatial import cKDTree

from maskbound.bounds import MaskingProblem
from maskbound.channel import validate_compound

THIRD = 1.0 / 3.0
UNIFORM3 = [THIRD, THIRD, THIRD]
TERNARY_W1 = [UNIFORM3, [0.5, 0.25, 0.25]]
TERNARY_W2 = [UNIFORM3, [0.25, 0.5, 0.25]]

# Frozen with mpmath at 40 digits (bisection on erf for the quantile).
PHI_INV_06 = 0.2533471031357997987981961814
TERNARY_KL = 0.05889151782819172726939705473
TERNARY_GAMMA = 0.8274281739932980567193764606
TERNARY_L = 0.04872850106027443900422884016
GAUSS_L_1_02 = 0.1168503009228049850199807220
KEY_THRESHOLD_TERNARY = 5.360135116630188290465172417
NONAC_02_1E4 = 217.5393640772398829951635436
GAUSS_MPMATH = {  # sigma2 -> (chi2, rho, kl) by mpmath.quad on the density-ratio integrands
    0.25: (53.598150033144239, -0.98168436111126582, 2.0),
    0.5: (6.3890560989306502, -0.86466471676338731, 1.0),
    1.0: (1.7182818284590452, -0.63212055882855768, 0.5),
    2.0: (0.64872127070012815, -0.39346934028736658, 0.25),
    4.0: (0.28402541668774148, -0.22119921692859513, 0.125),
}


def ternary_channel():
    return validate_compound(TERNARY_W1, TERNARY_W2)


def ternary_problem(delta: float = 0.2) -> MaskingProblem:
    return MaskingProblem(ternary_channel(), delta)


def random_binary_channels(count: int = 50, seed: int = 1):
    """Binary-input channels with full-support rows and 3 to 5 outputs.

    Every third channel pulls the second active row towards the first, which
    pushes the correlation above the smaller chi-squared and so exercises the
    second branch of both closed forms.
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        ny = int(rng.integers(3, 6))
        q0, a, b = (rng.dirichlet(np.full(ny, 2.0)) for _ in range(3))
        if i % 3 == 2:
            b = 0.6 * a + 0.2 * q0 + 0.2 * rng.dirichlet(np.full(ny, 2.0))
        out.append(validate_compound([q0, a], [q0, b]))
    return out


def symmetric_channels(count: int = 30, seed: int = 7):
    """Uniform off law with the second active row a permutation of the first, so the KLs agree."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        ny = int(rng.integers(3, 6))
        q0 = np.full(ny, 1.0 / ny)
        a = rng.dirichlet(np.full(ny, 2.0))
        b = a[rng.permutation(ny)]
        while np.array_equal(a, b):
            b = a[rng.permutation(ny)]
        out.append(validate_compound([q0, a], [q0, b]))
    return out


def bern(p: float):
    return [1.0 - p, p]


# Channels whose feasibility optimum sits on the 1e-3 simplex grid, so an
# exhaustive grid search recovers it exactly.
FEASIBILITY_FIXTURES = {
    "disjoint": ([bern(0.1), bern(0.2)], [bern(0.6), bern(0.9)]),
    "overlap": ([bern(0.1), bern(0.5)], [bern(0.3), bern(0.9)]),
    "nested": ([bern(0.0), bern(1.0)], [bern(0.4), bern(0.7)]),
    "touching": ([bern(0.2), bern(0.4)], [bern(0.4), bern(0.7)]),
    "separated": ([bern(0.0), bern(0.3)], [bern(0.5), bern(1.0)]),
    "identical": ([bern(0.25), bern(0.75)], [bern(0.25), bern(0.75)]),
    "shared_row3": ([[.2, .3, .5], [.6, .2, .2], [0, 0, 1]], [[.1, .1, .8], [.2, .3, .5], [.5, .5, 0]]),
    "full_hull3": ([[1, 0, 0], [0, 1, 0], [0, 0, 1]], [[.3, .3, .4], [.1, .6, .3], [.7, .2, .1]]),
    "vertex_pair3": ([[.8, .1, .1], [.7, .2, .1], [.7, .1, .2]], [[.1, .8, .1], [.2, .7, .1], [.1, .7, .2]]),
    "far_corners3": ([[.9, .05, .05], [.8, .1, .1], [.85, .1, .05]],
                     [[.05, .05, .9], [.1, .1, .8], [.1, .05, .85]]),
    "crossing3": ([[.6, .2, .2], [.2, .6, .2], [.2, .2, .6]], [[.5, .3, .2], [.3, .5, .2], [.4, .1, .5]]),
}


def simplex_grid(k: int, steps: int) -> np.ndarray:
    if k == 2:
        i = np.arange(steps + 1)
        return np.stack([i, steps - i], axis=1) / steps
    if k == 3:
        i, j = np.meshgrid(np.arange(steps + 1), np.arange(steps + 1), indexing="ij")
        keep = i + j <= steps
        i, j = i[keep], j[keep]
        return np.stack([i, j, steps - i - j], axis=1) / steps
    raise ValueError("grid oracle supports 2 or 3 inputs")


def grid_feasibility_gap(w1, w2, steps: int = 1000, resolution: float = 1e-10) -> float:
    """Smallest L1 distance between output images of two simplex grids.

    Exhaustive over all grid pairs: the dual-tree neighbour count decides
    whether any pair lies within a radius, and the radius is bisected between
    zero and the exact minimum over a coarse sub-grid.
    """
    w1, w2 = np.asarray(w1, float), np.asarray(w2, float)
    c1, c2 = simplex_grid(len(w1), 100) @ w1, simplex_grid(len(w2), 100) @ w2
    hi = min(np.abs(c1[i:i + 200, None, :] - c2[None]).sum(-1).min() for i in range(0, len(c1), 200))
    ta = cKDTree(simplex_grid(len(w1), steps) @ w1)
    tb = cKDTree(simplex_grid(len(w2), steps) @ w2)
    if ta.count_neighbors(tb, resolution, p=1) > 0:
        return 0.0
    lo, hi = resolution, hi + resolution
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if ta.count_neighbors(tb, mid, p=1) > 0:
            hi = mid
        else:
            lo = mid
    return hi


def product_law(q, n: int) -> np.ndarray:
    out = np.ones(1)
    q = np.asarray(q, float)
    for _ in range(n):
        out = np.multiply.outer(out, q).ravel()
    return out


def exact_product_tv(q1, q2, n: int) -> float:
    return 0.5 * math.fsum(np.abs(product_law(q1, n) - product_law(q2, n)))


def binomial_product_tv(a: float, b: float, n: int) -> float:
    """TV between n-fold products of Bern(a) and Bern(b), grouped by the number of ones."""
    return 0.5 * math.fsum(abs(math.comb(n, k) * (a ** k * (1 - a) ** (n - k) - b ** k * (1 - b) ** (n - k)))
                           for k in range(n + 1))


# Binary-output triples (off law, active law in state 1, active law in state 2)
# and weight pairs used for the product-mixture convergence check.  The
# "design" weights put equal weights on the delta = 0.2 masking boundary.
MIXTURE_TRIPLES = [
    ((0.5, 0.5), (0.2, 0.8), (0.7, 0.3)),
    ((0.6, 0.4), (0.3, 0.7), (0.9, 0.1)),
    ((0.5, 0.5), (0.1, 0.9), (0.1, 0.9)),
    ((0.4, 0.6), (0.2, 0.8), (0.5, 0.5)),
]
MIXTURE_WEIGHTS = [(1.0, 1.0), (0.8, 1.2), (1.5, 0.5)]
MIXTURE_DESIGN_TRIPLES = [
    ((0.5, 0.5), (0.2, 0.8), (0.7, 0.3)),
    ((0.6, 0.4), (0.3, 0.7), (0.9, 0.1)),
    ((0.4, 0.6), (0.2, 0.8), (0.5, 0.5)),
    ((0.5, 0.5), (0.3, 0.7), (0.6, 0.4)),
    ((0.7, 0.3), (0.5, 0.5), (0.9, 0.1)),
]


def all_sequences(size: int, n: int):
    return itertools.product(range(size), repeat=n)
