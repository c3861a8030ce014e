"""Random sparse codebooks, ML decoding and the threshold adversary at finite n.

Exact mode enumerates every output sequence; Monte Carlo mode samples.  All
randomness comes from Philox streams keyed by the indices of the object being
drawn, so a report depends only on its configuration.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .channel import CompoundChannel, Dmc, absolute_continuity_check, output_distribution
from .errors import BudgetExceeded, DomainError, InsufficientTrials, MuOutOfRange, OffSymbolMassNonzero
from .probdist import ZERO_TOL, Distribution, adversary_moments, as_probs, statistic

DEFAULT_BUDGET = 10_000_000
MC_MIXTURE_LIMIT = 4096
Z95 = 1.959963984540054

_CODEBOOK_STREAM = 0
_DECODE_STREAM = 1
_TEST_STREAM = 2
_TV_STREAM = 3


def _stream(seed: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence([seed, *keys])
    return np.random.Generator(np.random.Philox(key=ss.generate_state(2, np.uint64)))


def exact_budget() -> int:
    raw = os.environ.get("MASKBOUND_BUDGET")
    return int(float(raw)) if raw else DEFAULT_BUDGET


@dataclass(frozen=True)
class Codebook:
    """Codewords indexed as ``words[m, k]`` (message, key), each of length ``n``."""

    state: int
    words: np.ndarray
    n: int
    off: int

    @property
    def m_count(self) -> int:
        return self.words.shape[0]

    @property
    def k_count(self) -> int:
        return self.words.shape[1]

    def weights(self) -> np.ndarray:
        return (self.words != self.off).sum(axis=-1)

    def flat(self) -> np.ndarray:
        return self.words.reshape(-1, self.n)


@dataclass(frozen=True)
class SimConfig:
    ch: CompoundChannel
    gamma1: float
    gamma2: float
    pbar1: Sequence[float]
    pbar2: Sequence[float]
    n: int
    m_count: int = 2
    k_count: int = 1
    trials: int = 10_000
    seed: int = 0
    mode: str = "exact"
    phi: float = 0.5
    budget: Optional[int] = None
    max_ci: Optional[float] = None

    def __post_init__(self):
        if self.mode not in ("exact", "monte_carlo"):
            raise DomainError(f"mode must be 'exact' or 'monte_carlo', got {self.mode!r}")
        if self.n < 1 or self.m_count < 1 or self.k_count < 1 or self.trials < 1:
            raise DomainError("n, message count, key count and trials must all be positive")
        if not (0.0 <= self.phi <= 1.0):
            raise DomainError(f"phi must lie in [0, 1], got {self.phi!r}")

    def gamma(self, s: int) -> float:
        return self.gamma1 if s == 1 else self.gamma2

    def pbar(self, s: int) -> np.ndarray:
        return as_probs(self.pbar1 if s == 1 else self.pbar2)


@dataclass
class SimReport:
    n: int
    m_count: int
    k_count: int
    mode: str
    seed: int
    pe_max: float
    pe_avg: float
    pe_by_state: list
    tv_induced: Optional[float]
    tv_ci: float
    tv_exact: bool
    alpha: Optional[float]
    alpha_ci: float
    beta: Optional[float]
    beta_ci: float
    test_lower: Optional[float]
    bound_holds: Optional[bool]
    mu_low: float
    mu_high: float
    tau: Optional[float]
    phi: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SimReport":
        return cls(**data)


def generate_codebook(ch: CompoundChannel, state: int, gamma: float, pbar, n: int,
                      m_count: int, k_count: int, seed: int) -> Codebook:
    """Draw each letter i.i.d. from the sparse input law with weight gamma/sqrt(n)."""
    mu = gamma / math.sqrt(n)
    if gamma < 0 or mu >= 1.0:
        raise MuOutOfRange(f"activity weight gamma/sqrt(n) = {mu!r} must lie in [0, 1)")
    off = ch.off(state)
    pb = as_probs(pbar)
    if pb[off] > ZERO_TOL:
        raise OffSymbolMassNonzero(f"pbar puts mass {pb[off]} on the off symbol {off}")
    p = mu * pb
    p[off] = 1.0 - mu
    p = p / p.sum()
    words = np.empty((m_count, k_count, n), dtype=np.int16)
    for m in range(m_count):
        for k in range(k_count):
            words[m, k] = _stream(seed, _CODEBOOK_STREAM, state, m, k).choice(p.size, size=n, p=p)
    words.setflags(write=False)
    return Codebook(state=state, words=words, n=n, off=off)


# Exact enumeration ----------------------------------------------------------

def _check_budget(n_outputs: int, n: int, codewords: int, budget: int) -> int:
    size = n_outputs ** n
    if size * codewords > budget:
        raise BudgetExceeded(
            f"{codewords} codewords over {size} output sequences exceeds the budget {budget}")
    return size


def _sequence_law(mat: np.ndarray, word: np.ndarray) -> np.ndarray:
    """Product law of the output sequence given one codeword, in lexicographic order."""
    out = np.ones(1)
    for x in word:
        out = np.multiply.outer(out, mat[x]).ravel()
    return out


def _induced_probs(cb: Codebook, w: Dmc, budget: Optional[int] = None) -> np.ndarray:
    mat = Dmc(w).matrix
    _check_budget(mat.shape[1], cb.n, cb.m_count * cb.k_count, budget or exact_budget())
    total = None
    for word in cb.flat():
        law = _sequence_law(mat, word)
        total = law if total is None else total + law
    return total / (cb.m_count * cb.k_count)


def induced_output_distribution(cb: Codebook, w: Dmc, budget: Optional[int] = None) -> Distribution:
    return Distribution.normalize(_induced_probs(cb, w, budget))


def _exact_sum(values: np.ndarray) -> Fraction:
    """Sum of doubles with no rounding at all, as a rational."""
    v = np.asarray(values, dtype=float).ravel()
    v = v[v != 0.0]
    if v.size == 0:
        return Fraction(0)
    mant, expo = np.frexp(v)
    ints = (mant * 2.0 ** 53).astype(np.int64)
    total = Fraction(0)
    for e in np.unique(expo):
        s = int(ints[expo == e].astype(object).sum())
        total += Fraction(s) * (Fraction(2) ** (int(e) - 53))
    return total


def _exact_tv(q1: np.ndarray, q2: np.ndarray, s1: Fraction, s2: Fraction) -> Fraction:
    """Exact TV between q1/s1 and q2/s2, the arrays taken as exact rationals."""
    # Sign of q1*s2 - q2*s1 decides membership of the maximising event.  Floats
    # settle it unless the two entries agree to within the normalisation error.
    slack = 4.0 * max(abs(float(s1) - 1.0), abs(float(s2) - 1.0)) + 1e-300
    diff = q1 - q2
    clear = np.abs(diff) > slack * np.maximum(q1, q2)
    pos = clear & (diff > 0)
    equal = (~clear) & (q1 == q2)
    if s2 > s1:
        pos |= equal
    for i in np.flatnonzero((~clear) & (q1 != q2)):
        if Fraction(float(q1[i])) * s2 > Fraction(float(q2[i])) * s1:
            pos[i] = True
    return _exact_sum(q1[pos]) / s1 - _exact_sum(q2[pos]) / s2


def exact_tv_induced(cb1: Codebook, cb2: Codebook, ch: CompoundChannel,
                     budget: Optional[int] = None) -> float:
    q1 = _induced_probs(cb1, ch.w1, budget)
    q2 = _induced_probs(cb2, ch.w2, budget)
    return float(_exact_tv(q1, q2, _exact_sum(q1), _exact_sum(q2)))


def _all_sequences(n_outputs: int, n: int) -> np.ndarray:
    grids = np.indices((n_outputs,) * n, dtype=np.int8)
    return grids.reshape(n, -1).T


# Decoding -------------------------------------------------------------------

def _scores(y: np.ndarray, words: np.ndarray, logw: np.ndarray) -> np.ndarray:
    """Log-likelihood of each output row of ``y`` under each codeword.

    Accumulated through joint letter counts in a fixed order, so codewords with
    the same joint type against ``y`` get bit-identical scores and ties are real.
    """
    nx, ny = logw.shape
    codes = words[None, :, :].astype(np.int32) * ny + y[:, None, :]
    score = np.zeros(codes.shape[:2])
    dead = np.zeros(codes.shape[:2], dtype=bool)
    flat = logw.ravel()
    for c in range(nx * ny):
        cnt = (codes == c).sum(axis=-1)
        if np.isfinite(flat[c]):
            score += cnt * flat[c]
        else:
            dead |= cnt > 0
    score[dead] = -np.inf
    return score


def _decode_batch(y: np.ndarray, words: np.ndarray, logw: np.ndarray, chunk: int = 4096) -> np.ndarray:
    out = np.empty(y.shape[0], dtype=np.int64)
    for lo in range(0, y.shape[0], chunk):
        out[lo:lo + chunk] = np.argmax(_scores(y[lo:lo + chunk], words, logw), axis=1)
    return out


def _log_matrix(w: Dmc) -> np.ndarray:
    mat = Dmc(w).matrix
    with np.errstate(divide="ignore"):
        return np.where(mat > ZERO_TOL, np.log(np.where(mat > ZERO_TOL, mat, 1.0)), -np.inf)


def ml_decode(yn, cb: Codebook, key: int, w: Dmc) -> int:
    """Most likely message for ``yn`` under key ``key``; ties go to the smallest index."""
    y = np.asarray(yn, dtype=np.int64).reshape(1, -1)
    return int(_decode_batch(y, cb.words[:, key, :], _log_matrix(w))[0])


# Experiment -----------------------------------------------------------------

def _codebooks(cfg: SimConfig):
    return [generate_codebook(cfg.ch, s, cfg.gamma(s), cfg.pbar(s), cfg.n,
                              cfg.m_count, cfg.k_count, cfg.seed) for s in (1, 2)]


def _weight_range(cbs) -> tuple[float, float]:
    fr = np.concatenate([cb.weights().ravel() for cb in cbs]) / cbs[0].n
    return float(fr.min()), float(fr.max())


def _test_setup(cfg: SimConfig, mu_low: float):
    """Per-letter statistic and threshold of the adversary, or None when undefined."""
    ch = cfg.ch
    if not absolute_continuity_check(ch):
        return None
    q0 = ch.q0.probs
    q1b = output_distribution(ch.w1, cfg.pbar(1)).probs
    q2b = output_distribution(ch.w2, cfg.pbar(2)).probs
    mom = adversary_moments(cfg.phi, q1b, q2b, q0)
    tau = 0.5 * cfg.n * mu_low * (mom.d1 + mom.d2)
    return statistic(cfg.phi, q1b, q2b, q0), tau


def _exact_errors(cb: Codebook, w: Dmc, ys: np.ndarray) -> np.ndarray:
    mat = Dmc(w).matrix
    logw = _log_matrix(w)
    pe = np.empty((cb.m_count, cb.k_count))
    for k in range(cb.k_count):
        words = cb.words[:, k, :]
        dec = _decode_batch(ys, words, logw)
        for m in range(cb.m_count):
            law = _sequence_law(mat, words[m])
            pe[m, k] = max(0.0, 1.0 - math.fsum(law[dec == m]))
    return pe


def _run_exact(cfg: SimConfig, cbs, with_tv: bool = True) -> dict:
    ch = cfg.ch
    ny = ch.w1.n_outputs
    budget = cfg.budget or exact_budget()
    _check_budget(ny, cfg.n, 2 * cfg.m_count * cfg.k_count, budget)
    ys = _all_sequences(ny, cfg.n)
    pes = [_exact_errors(cb, ch.state(cb.state), ys) for cb in cbs]
    res = {"pes": pes}
    if not with_tv:
        return res
    q1 = _induced_probs(cbs[0], ch.w1, budget)
    q2 = _induced_probs(cbs[1], ch.w2, budget)
    s1, s2 = _exact_sum(q1), _exact_sum(q2)
    tv = _exact_tv(q1, q2, s1, s2)
    res.update(tv=float(tv), tv_ci=0.0, tv_exact=True)
    mu_low, _ = _weight_range(cbs)
    setup = _test_setup(cfg, mu_low)
    if setup is None:
        res.update(alpha=None, beta=None, test_lower=None, bound_holds=None, tau=None)
        return res
    t_letter, tau = setup
    total = t_letter[ys].sum(axis=1)
    fire = total > tau
    alpha = _exact_sum(q1[~fire]) / s1
    beta = _exact_sum(q2[fire]) / s2
    lower = 1 - alpha - beta
    res.update(alpha=float(alpha), beta=float(beta), alpha_ci=0.0, beta_ci=0.0,
               test_lower=float(max(lower, Fraction(0))), bound_holds=bool(lower <= tv), tau=tau)
    return res


def _sample_outputs(rng: np.random.Generator, cum: np.ndarray, words: np.ndarray) -> np.ndarray:
    """One output sequence per row of ``words`` through the channel with row CDFs ``cum``."""
    u = rng.random(words.shape)
    y = (u[..., None] > cum[words]).sum(axis=-1)
    return np.minimum(y, cum.shape[1] - 1)


def _mc_errors(cfg: SimConfig, cb: Codebook, w: Dmc, chunk: int = 2000) -> np.ndarray:
    mat = Dmc(w).matrix
    cum = np.cumsum(mat, axis=1)
    logw = _log_matrix(w)
    pe = np.empty((cb.m_count, cb.k_count))
    for k in range(cb.k_count):
        words = cb.words[:, k, :]
        # Letters where every codeword of this key is off add the same term to all scores.
        used = np.flatnonzero((words != cb.off).any(axis=0))
        sub = words[:, used]
        for m in range(cb.m_count):
            if used.size == 0:
                pe[m, k] = 0.0 if m == 0 else 1.0
                continue
            rng = _stream(cfg.seed, _DECODE_STREAM, cb.state, m, k)
            wrong = 0
            for lo in range(0, cfg.trials, chunk):
                t = min(chunk, cfg.trials - lo)
                y = _sample_outputs(rng, cum, np.broadcast_to(sub[m], (t, used.size)))
                wrong += int((_decode_batch(y, sub, logw) != m).sum())
            pe[m, k] = wrong / cfg.trials
    return pe


def _mixture_sampler(cfg: SimConfig, cb: Codebook, mat: np.ndarray, stream: int, chunk: int):
    rng = _stream(cfg.seed, stream, cb.state)
    cum = np.cumsum(mat, axis=1)
    flat = cb.flat()
    done = 0
    while done < cfg.trials:
        t = min(chunk, cfg.trials - done)
        pick = rng.integers(0, flat.shape[0], size=t)
        yield _sample_outputs(rng, cum, flat[pick])
        done += t


def _sparse_layout(cb: Codebook):
    flat = cb.flat()
    weights = (flat != cb.off).sum(axis=1)
    width = max(int(weights.max()), 1)
    pos = np.zeros((flat.shape[0], width), dtype=np.int64)
    sym = np.full((flat.shape[0], width), cb.off, dtype=np.int64)
    for c, word in enumerate(flat):
        idx = np.flatnonzero(word != cb.off)
        pos[c, :idx.size] = idx
        sym[c, :idx.size] = word[idx]
    return pos, sym


def _mixture_log_ratio(y: np.ndarray, layout, llr: np.ndarray) -> np.ndarray:
    """log of (mixture law / off-letter product law) at each row of ``y``."""
    pos, sym = layout
    contrib = llr[sym[None, :, :], y[:, pos]]
    per_word = contrib.sum(axis=-1)
    top = per_word.max(axis=1, keepdims=True)
    safe = np.where(np.isfinite(top), top, 0.0)
    return (safe[:, 0] + np.log(np.exp(per_word - safe).sum(axis=1))) - math.log(pos.shape[0])


def _mc_tv(cfg: SimConfig, cbs) -> tuple[float, float]:
    ch = cfg.ch
    q0 = ch.q0.probs
    live = q0 > ZERO_TOL
    layouts, llrs = [], []
    for cb in cbs:
        mat = ch.state(cb.state).matrix
        llr = np.zeros_like(mat)
        with np.errstate(divide="ignore"):
            llr[:, live] = np.log(mat[:, live]) - np.log(q0[live])
        layouts.append(_sparse_layout(cb))
        llrs.append(llr)
    chunk = max(1, min(2000, 2_000_000 // max(1, layouts[0][0].size)))
    vals = []
    for y in _mixture_sampler(cfg, cbs[0], ch.w1.matrix, _TV_STREAM, chunk):
        l1 = _mixture_log_ratio(y, layouts[0], llrs[0])
        l2 = _mixture_log_ratio(y, layouts[1], llrs[1])
        vals.append(np.maximum(0.0, -np.expm1(l2 - l1)))
    v = np.concatenate(vals)
    return float(v.mean()), Z95 * float(v.std(ddof=1)) / math.sqrt(v.size) if v.size > 1 else 1.0


def _run_mc(cfg: SimConfig, cbs, with_tv: bool = True) -> dict:
    ch = cfg.ch
    pes = [_mc_errors(cfg, cb, ch.state(cb.state)) for cb in cbs]
    res = {"pes": pes}
    if not with_tv:
        return res
    ac = absolute_continuity_check(ch)
    if ac and cfg.m_count * cfg.k_count <= MC_MIXTURE_LIMIT:
        tv, tv_ci = _mc_tv(cfg, cbs)
        res.update(tv=tv, tv_ci=tv_ci, tv_exact=False)
    else:
        res.update(tv=None, tv_ci=0.0, tv_exact=False)
    mu_low, _ = _weight_range(cbs)
    setup = _test_setup(cfg, mu_low)
    if setup is None:
        res.update(alpha=None, beta=None, alpha_ci=0.0, beta_ci=0.0, test_lower=None,
                   bound_holds=None, tau=None)
        return res
    t_letter, tau = setup
    rates = []
    for cb, fire_is_error in ((cbs[0], False), (cbs[1], True)):
        hits = 0
        for y in _mixture_sampler(cfg, cb, ch.state(cb.state).matrix, _TEST_STREAM, 1000):
            fire = t_letter[y].sum(axis=1) > tau
            hits += int((fire if fire_is_error else ~fire).sum())
        rates.append(hits / cfg.trials)
    alpha, beta = rates
    a_ci = Z95 * math.sqrt(alpha * (1 - alpha) / cfg.trials)
    b_ci = Z95 * math.sqrt(beta * (1 - beta) / cfg.trials)
    lower = max(0.0, math.fsum((1.0, -alpha, -beta)))
    holds = None
    if res["tv"] is not None:
        holds = lower <= res["tv"] + 2.0 * (res["tv_ci"] + a_ci + b_ci)
    res.update(alpha=alpha, beta=beta, alpha_ci=a_ci, beta_ci=b_ci, test_lower=lower,
               bound_holds=holds, tau=tau)
    return res


def run_experiment(cfg: SimConfig, with_tv: bool = True) -> SimReport:
    cbs = _codebooks(cfg)
    res = (_run_exact if cfg.mode == "exact" else _run_mc)(cfg, cbs, with_tv)
    pes = res["pes"]
    mu_low, mu_high = _weight_range(cbs)
    report = SimReport(
        n=cfg.n, m_count=cfg.m_count, k_count=cfg.k_count, mode=cfg.mode, seed=cfg.seed,
        pe_max=float(max(p.max() for p in pes)),
        pe_avg=float(np.mean([p.mean() for p in pes])),
        pe_by_state=[float(p.max()) for p in pes],
        tv_induced=res.get("tv"), tv_ci=res.get("tv_ci", 0.0), tv_exact=res.get("tv_exact", False),
        alpha=res.get("alpha"), alpha_ci=res.get("alpha_ci", 0.0),
        beta=res.get("beta"), beta_ci=res.get("beta_ci", 0.0),
        test_lower=res.get("test_lower"), bound_holds=res.get("bound_holds"),
        mu_low=mu_low, mu_high=mu_high, tau=res.get("tau"), phi=cfg.phi)
    if cfg.max_ci is not None and cfg.mode == "monte_carlo":
        widest = max(report.tv_ci, report.alpha_ci, report.beta_ci)
        if widest > cfg.max_ci:
            raise InsufficientTrials(
                f"confidence half-width {widest:.3g} exceeds the requested {cfg.max_ci:.3g}")
    return report


def _largest_message_count(cfg: SimConfig, target_pe: float, cap: int) -> int:
    """Largest |M| with pe_max <= target_pe, by doubling then bisection."""

    def ok(m: int) -> bool:
        return run_experiment(dataclasses.replace(cfg, m_count=m), with_tv=False).pe_max <= target_pe

    good, bad = 1, None
    m = 2
    while m <= cap:
        if ok(m):
            good, m = m, 2 * m
        else:
            bad = m
            break
    if bad is None:
        return good
    while bad - good > 1:
        mid = (good + bad) // 2
        if ok(mid):
            good = mid
        else:
            bad = mid
    return good


def sqrt_law_sweep(cfg: SimConfig, n_list: Sequence[int], target_pe: float,
                   delta: float = 0.2, m_cap: int = 4096) -> list[dict]:
    """Per blocklength, the largest message set meeting ``target_pe`` and its TV to the budget."""
    if list(n_list) != sorted(n_list):
        raise DomainError("blocklengths must be listed in ascending order")
    rows = []
    for n in n_list:
        base = dataclasses.replace(cfg, n=n)
        m = _largest_message_count(base, target_pe, m_cap)
        rep = run_experiment(dataclasses.replace(base, m_count=m))
        log_m = math.log(m)
        tv = rep.tv_induced
        rows.append({
            "n": n,
            "messages": m,
            "log_m": log_m,
            "ratio": log_m / math.sqrt(n),
            "pe_max": rep.pe_max,
            "tv_induced": tv,
            "tv_ci": rep.tv_ci,
            "slack": None if tv is None else max(0.0, tv - delta),
        })
    return rows
