"""Desk-scale Monte Carlo for the semantic source and channel coding theorems.

Source coding indexes semantically typical sequences most-probable-first,
working on type classes so that n in the hundreds stays cheap. Channel
coding uses random codes with jointly typical decoding on the pair alphabet
under the product partition; large codebooks are simulated through the
exact law of the number of impostor matches instead of being materialised.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .baselines import SolverConfig
from .measures import entropy, semantic_entropy
from .model import Distribution, SemanticVariable, joint_cell_mass, pair_variable
from .semlimits import SemanticChannelProblem, semantic_capacity
from .typicality import TooLargeToEnumerate, count_log_probs, sample_counts, wilson_interval

TYPE_LIMIT = 2_000_000
CODEBOOK_LIMIT = 4096
WORK_LIMIT = 2 * 10**8
R_SYN_SLACK = 0.1


class BudgetExceeded(RuntimeError):
    pass


def compositions(n: int, k: int) -> np.ndarray:
    """All length-k nonnegative integer vectors summing to n (lexicographic)."""
    if k == 1:
        return np.array([[n]])
    bars = np.array(list(itertools.combinations(range(n + k - 1), k - 1)), dtype=int)
    edges = np.hstack([np.full((len(bars), 1), -1), bars, np.full((len(bars), 1), n + k - 1)])
    return np.diff(edges, axis=1) - 1


def log2_multinomial(n: int, types: np.ndarray) -> np.ndarray:
    lg = np.vectorize(math.lgamma, otypes=[float])
    return (math.lgamma(n + 1) - lg(types + 1).sum(axis=1)) / math.log(2)


# -- source coding -------------------------------------------------------------

@dataclass(frozen=True)
class SourceCodeExperiment:
    sv: SemanticVariable
    n: int
    R: float
    R_syn: float = 0.0
    trials: int = 2000
    seed: int = 42
    epsilon: float = 0.1

    def __post_init__(self):
        if self.R <= 0:
            raise ValueError("R must be positive")
        gap = entropy(self.sv.dist) - semantic_entropy(self.sv)
        if not 0 <= self.R_syn <= gap + R_SYN_SLACK:
            raise ValueError(f"R_syn must lie in [0, {gap + R_SYN_SLACK:.4f}]")
        if self.n < 1 or self.trials < 1:
            raise ValueError("n and trials must be >= 1")


@dataclass
class SourceCodingResult:
    P_e: float
    ci95: tuple[float, float]
    log2_codebook_size: float  # semantic indices actually assigned
    coverage: float  # fraction of trials whose syntactic sequence is also reproduced
    trials: int


def _semantic_codebook(sv: SemanticVariable, n: int, R: float, eps: float):
    """Coverage fraction for every semantic type, filled most-probable-first."""
    q = sv.dist.probs @ sv.partition.indicator()
    C = q.size
    count = math.comb(n + C - 1, C - 1)
    if count > TYPE_LIMIT:
        raise TooLargeToEnumerate(f"{count} semantic types exceed {TYPE_LIMIT}")
    types = compositions(n, C)
    with np.errstate(divide="ignore", invalid="ignore"):
        lq = np.log2(q)
        logp = np.where(types > 0, types * lq, 0.0).sum(axis=1)
    hs = semantic_entropy(sv)
    typical = np.isfinite(logp) & (np.abs(-logp / n - hs) < eps)
    idx = np.flatnonzero(typical)
    # most probable first; ties resolved by type order, which is lexicographic
    idx = idx[np.argsort(-logp[idx], kind="stable")]
    sizes = log2_multinomial(n, types[idx])

    budget = n * R
    fraction = {}
    log_used = -math.inf
    for i, ls in zip(idx, sizes):
        key = tuple(int(v) for v in types[i])
        total = np.logaddexp2(log_used, ls)
        if total <= budget:
            fraction[key] = 1.0
            log_used = total
            continue
        # partial type: remaining indices over type size
        rem = 2.0 ** (budget - ls) - 2.0 ** (log_used - ls) if log_used > -math.inf else 2.0 ** (budget - ls)
        if rem > 0:
            fraction[key] = float(min(rem, 1.0))
            log_used = budget
        break
    return fraction, log_used


def simulate_source_coding(exp: SourceCodeExperiment) -> SourceCodingResult:
    sv = exp.sv
    fraction, log_used = _semantic_codebook(sv, exp.n, exp.R, exp.epsilon)
    rng = np.random.default_rng(exp.seed)
    counts = sample_counts(sv, exp.n, exp.trials, rng)
    u = rng.random(exp.trials)
    cell_counts = counts @ sv.partition.indicator().astype(int)
    ok = np.array([
        u[k] < fraction.get(tuple(int(v) for v in cell_counts[k]), 0.0)
        for k in range(exp.trials)
    ])
    syn_lp, sem_lp = count_log_probs(counts, sv)
    # within a class, index every member with p(ũ^n -> u^n) >= 2^{-n R_syn}; at most 2^{n R_syn} of them
    member = (syn_lp - sem_lp) >= -exp.n * exp.R_syn - 1e-9
    errors = int((~ok).sum())
    return SourceCodingResult(
        P_e=errors / exp.trials,
        ci95=wilson_interval(errors, exp.trials),
        log2_codebook_size=float(log_used),
        coverage=float((ok & member).mean()),
        trials=exp.trials,
    )


# -- channel coding ------------------------------------------------------------

@dataclass(frozen=True)
class ChannelCodeExperiment:
    prob: SemanticChannelProblem
    n: int
    R: float
    trials: int = 500
    seed: int = 42
    R_syn: float = 0.0
    epsilon: float = 0.1
    p_x: Distribution | None = None
    method: str = "auto"  # "auto", "codebook" or "ensemble"

    def __post_init__(self):
        if self.n < 1 or self.trials < 1:
            raise ValueError("n and trials must be >= 1")
        if self.R <= 0 or self.R_syn < 0:
            raise ValueError("R must be positive and R_syn nonnegative")
        if self.method not in ("auto", "codebook", "ensemble"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class ChannelCodingResult:
    P_e: float
    ci95: tuple[float, float]
    decoded_semantic_accuracy: float
    decoded_syntactic_accuracy: float
    method: str
    p_x: Distribution
    trials: int
    extra: dict = field(default_factory=dict)


class _PairTypicality:
    """Joint typicality of (x^n, y^n) on the pair alphabet under the product partition."""

    def __init__(self, prob: SemanticChannelProblem, p_x: Distribution, eps: float):
        jm = prob.channel.joint(p_x, prob.input_partition, prob.output_partition)
        pv = pair_variable(jm)
        self.H = entropy(pv.dist)
        self.Hs = semantic_entropy(pv)
        self.eps = eps
        cells = joint_cell_mass(jm)
        rl, cl = prob.input_partition.labels, prob.output_partition.labels
        with np.errstate(divide="ignore"):
            self.lJ = np.log2(jm.probs)
            self.lM = np.log2(cells[np.ix_(rl, cl)])

    def check(self, sJ, sM, n):
        sJ = np.asarray(sJ, dtype=float)
        sM = np.asarray(sM, dtype=float)
        fin = np.isfinite(sJ) & np.isfinite(sM)
        with np.errstate(invalid="ignore"):
            a = np.abs(-sJ / n - self.H) < self.eps
            b = np.abs(-sM / n - self.Hs) < self.eps
            c = np.abs(-(sJ - sM) / n - (self.H - self.Hs)) < self.eps
        return fin & a & b & c


def impostor_match_probability(pt: _PairTypicality, p_x: np.ndarray, y_counts, n: int) -> float:
    """P[(X'^n, y^n) jointly typical] for X'^n i.i.d. p_x independent of y^n.

    Exact: enumerate, per output symbol b, the composition of the inputs
    sitting at the n_b positions where y = b, and merge equal statistics.
    """
    nx = p_x.size
    with np.errstate(divide="ignore"):
        lpx = np.log2(p_x)
    # state: arrays of (log2 prob, sJ, sM)
    lp = np.zeros(1)
    sj = np.zeros(1)
    sm = np.zeros(1)
    for b, nb in enumerate(y_counts):
        if nb == 0:
            continue
        if math.comb(nb + nx - 1, nx - 1) * lp.size > TYPE_LIMIT:
            raise BudgetExceeded("impostor type enumeration exceeds budget")
        t = compositions(int(nb), nx)
        with np.errstate(invalid="ignore"):
            tl = log2_multinomial(int(nb), t) + np.where(t > 0, t * lpx, 0.0).sum(axis=1)
            tj = np.where(t > 0, t * pt.lJ[:, b], 0.0).sum(axis=1)
            tm = np.where(t > 0, t * pt.lM[:, b], 0.0).sum(axis=1)
        keep = np.isfinite(tl) & np.isfinite(tj) & np.isfinite(tm)
        tl, tj, tm = tl[keep], tj[keep], tm[keep]
        lp = (lp[:, None] + tl[None, :]).ravel()
        sj = (sj[:, None] + tj[None, :]).ravel()
        sm = (sm[:, None] + tm[None, :]).ravel()
        # merge equal statistics to keep the state small
        key = np.round(np.stack([sj, sm], axis=1), 9)
        uniq, inv = np.unique(key, axis=0, return_inverse=True)
        inv = inv.ravel()
        mx = np.full(len(uniq), -np.inf)
        np.maximum.at(mx, inv, lp)
        acc = np.zeros(len(uniq))
        np.add.at(acc, inv, 2.0 ** (lp - mx[inv]))
        lp = mx + np.log2(acc)
        sj, sm = uniq[:, 0], uniq[:, 1]
    hit = pt.check(sj, sm, n)
    return float(np.sum(2.0 ** lp[hit]))


def _p_none(pi: float, count: float) -> float:
    """P[no match among ``count`` independent impostors]."""
    if count <= 0 or pi <= 0:
        return 1.0
    if pi >= 1:
        return 0.0
    return math.exp(count * math.log1p(-pi))


def simulate_channel_coding(exp: ChannelCodeExperiment, cfg: SolverConfig = SolverConfig()) -> ChannelCodingResult:
    prob = exp.prob
    if exp.p_x is None:
        p_x = semantic_capacity(prob, cfg).p_x
    else:
        p_x = exp.p_x
    pt = _PairTypicality(prob, p_x, exp.epsilon)
    w = prob.channel.matrix
    n = exp.n
    log2_m = n * exp.R
    L = max(1, math.floor(2.0 ** (n * exp.R_syn) + 1e-9))
    M = math.ceil(2.0 ** log2_m - 1e-9)

    method = exp.method
    if method == "auto":
        small = M * L <= CODEBOOK_LIMIT and M * L * n * exp.trials <= WORK_LIMIT
        method = "codebook" if small else "ensemble"
    if method == "codebook" and (M * L > CODEBOOK_LIMIT or M * L * n * exp.trials > WORK_LIMIT):
        raise BudgetExceeded(f"codebook with {M}x{L} codewords of length {n} exceeds budget")

    rng = np.random.default_rng(exp.seed)
    if method == "codebook":
        sem_ok, syn_ok = _run_codebook(pt, p_x.probs, w, n, M, L, exp.trials, rng)
    else:
        sem_ok, syn_ok = _run_ensemble(pt, p_x.probs, w, n, M, L, exp.trials, rng)
    errors = int((~sem_ok).sum())
    return ChannelCodingResult(
        P_e=errors / exp.trials,
        ci95=wilson_interval(errors, exp.trials),
        decoded_semantic_accuracy=float(sem_ok.mean()),
        decoded_syntactic_accuracy=float(syn_ok.mean()),
        method=method,
        p_x=p_x,
        trials=exp.trials,
        extra={"log2_messages": log2_m, "codewords_per_set": L},
    )


def _send(x: np.ndarray, w: np.ndarray, rng) -> np.ndarray:
    cdf = np.cumsum(w, axis=1)
    u = rng.random(x.shape)
    y = (u[..., None] > cdf[x]).sum(axis=-1)
    return np.minimum(y, w.shape[1] - 1)


def _distinct_codebook(p: np.ndarray, count: int, n: int, rng) -> np.ndarray:
    """``count`` distinct i.i.d. codewords; duplicates are redrawn."""
    support = int((p > 0).sum())
    if count > support**n:
        raise BudgetExceeded("more codewords requested than distinct sequences exist")
    book = rng.choice(p.size, size=(count, n), p=p)
    while True:
        _, first = np.unique(book, axis=0, return_index=True)
        dup = np.setdiff1d(np.arange(count), first)
        if dup.size == 0:
            return book
        book[dup] = rng.choice(p.size, size=(dup.size, n), p=p)


def _run_codebook(pt, p, w, n, M, L, trials, rng):
    sem_ok = np.zeros(trials, dtype=bool)
    syn_ok = np.zeros(trials, dtype=bool)
    for k in range(trials):
        book = _distinct_codebook(p, M * L, n, rng)
        msg = int(rng.integers(M))
        sent = msg * L + int(rng.integers(L))
        y = _send(book[sent], w, rng)
        sJ = pt.lJ[book, y[None, :]].sum(axis=1)
        sM = pt.lM[book, y[None, :]].sum(axis=1)
        hit = pt.check(sJ, sM, n)
        msgs = np.unique(np.flatnonzero(hit) // L)
        sem_ok[k] = msgs.size == 1 and msgs[0] == msg
        syn_ok[k] = hit.sum() == 1 and hit[sent]
    return sem_ok, syn_ok


def _run_ensemble(pt, p, w, n, M, L, trials, rng):
    """Random-coding ensemble without a materialised codebook.

    Given y^n, each impostor codeword matches independently with the exact
    probability from ``impostor_match_probability``; only whether any
    sibling or any other-message codeword matches is sampled.
    """
    x = rng.choice(p.size, size=(trials, n), p=p)
    y = _send(x, w, rng)
    u_other = rng.random(trials)
    u_sib = rng.random(trials)
    sJ = pt.lJ[x, y].sum(axis=1)
    sM = pt.lM[x, y].sum(axis=1)
    true_hit = pt.check(sJ, sM, n)
    cache: dict[tuple[int, ...], float] = {}
    sem_ok = np.zeros(trials, dtype=bool)
    syn_ok = np.zeros(trials, dtype=bool)
    for k in range(trials):
        key = tuple(np.bincount(y[k], minlength=w.shape[1]).tolist())
        if key not in cache:
            cache[key] = impostor_match_probability(pt, p, key, n)
        pi = cache[key]
        other_clear = u_other[k] < _p_none(pi, (M - 1) * L)
        sib_clear = u_sib[k] < _p_none(pi, L - 1)
        sem_ok[k] = other_clear and (true_hit[k] or not sib_clear)
        syn_ok[k] = other_clear and sib_clear and true_hit[k]
    return sem_ok, syn_ok
