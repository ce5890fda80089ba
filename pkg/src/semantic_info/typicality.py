"""Syntactic, semantic and synonymous typicality of i.i.d. sequences."""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .measures import entropy, semantic_entropy
from .model import SemanticVariable, semantic_marginal

ENUMERATION_LIMIT = 10**7
NEG_INF = -math.inf


class TooLargeToEnumerate(ValueError):
    pass


class ZeroProbabilitySymbol(ValueError):
    pass


@dataclass(frozen=True)
class SequenceModel:
    sv: SemanticVariable
    n: int
    epsilon: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @property
    def H(self) -> float:
        return entropy(self.sv.dist)

    @property
    def Hs(self) -> float:
        return semantic_entropy(self.sv)


@dataclass(frozen=True)
class TypicalityVerdict:
    syn_typical: bool
    sem_typical: bool
    synonymous_typical: bool
    empirical_H: float
    empirical_Hs: float
    empirical_cond: float


def _log2_tables(sv: SemanticVariable):
    p = sv.dist.probs
    q = semantic_marginal(sv)
    with np.errstate(divide="ignore"):
        return np.log2(p), np.log2(q)[sv.partition.labels]


def sequence_log_probs(u_seq, sv: SemanticVariable, strict: bool = False) -> dict[str, float]:
    """log2 p(u^n), log2 p(ũ^n) and log2 p(ũ^n -> u^n).

    Symbols of probability zero give ``-inf`` (or raise with ``strict=True``).
    """
    u = np.asarray(u_seq, dtype=int)
    if u.size and (u.min() < 0 or u.max() >= sv.dist.size):
        raise IndexError("sequence index out of range")
    lp, lq = _log2_tables(sv)
    syn = float(lp[u].sum())
    sem = float(lq[u].sum())
    if syn == NEG_INF:
        if strict:
            raise ZeroProbabilitySymbol("sequence contains a zero-probability symbol")
        return {"logp_syn": NEG_INF, "logp_sem": sem, "logp_map": NEG_INF}
    return {"logp_syn": syn, "logp_sem": sem, "logp_map": syn - sem}


def _verdicts(logp_syn, logp_sem, n, H, Hs, eps):
    """Vectorised three-way typicality test on arrays of log-probabilities."""
    logp_syn = np.asarray(logp_syn, dtype=float)
    logp_sem = np.asarray(logp_sem, dtype=float)
    finite = np.isfinite(logp_syn)
    with np.errstate(invalid="ignore"):
        e_h = -logp_syn / n
        e_hs = -logp_sem / n
        e_cond = -(logp_syn - logp_sem) / n
        syn = finite & (np.abs(e_h - H) < eps)
        sem = np.isfinite(logp_sem) & (np.abs(e_hs - Hs) < eps)
        cond = finite & (np.abs(e_cond - (H - Hs)) < eps)
    return syn, sem, syn & sem & cond, e_h, e_hs, e_cond


def classify(u_seq, model: SequenceModel) -> TypicalityVerdict:
    lp = sequence_log_probs(u_seq, model.sv)
    syn, sem, both, e_h, e_hs, e_c = _verdicts(
        lp["logp_syn"], lp["logp_sem"], model.n, model.H, model.Hs, model.epsilon
    )
    return TypicalityVerdict(bool(syn), bool(sem), bool(both), float(e_h), float(e_hs), float(e_c))


@dataclass
class Enumeration:
    sequences: np.ndarray  # every sequence in U^n, one per row
    syn_typical: np.ndarray  # boolean masks over rows
    sem_typical: np.ndarray
    synonymous_typical: np.ndarray
    classes: dict[tuple[int, ...], np.ndarray]  # semantic sequence -> rows of its class
    sizes: dict[tuple[int, ...], int]

    @property
    def A_eps(self) -> np.ndarray:
        return self.sequences[self.syn_typical]


def enumerate_typical(model: SequenceModel) -> Enumeration:
    """Exhaustive enumeration of U^n with the synonymous-class quotient.

    ``classes`` has one entry per semantically typical ũ^n (possibly with an
    empty class) holding the synonymous-typical members mapping to it.
    """
    sv, n = model.sv, model.n
    N = sv.dist.size
    if N**n > ENUMERATION_LIMIT:
        raise TooLargeToEnumerate(f"{N}^{n} sequences exceed {ENUMERATION_LIMIT}")
    seqs = np.indices((N,) * n).reshape(n, -1).T
    lp, lq = _log2_tables(sv)
    with np.errstate(invalid="ignore"):
        logp_syn = lp[seqs].sum(axis=1)
        logp_sem = lq[seqs].sum(axis=1)
    syn, sem, both, *_ = _verdicts(logp_syn, logp_sem, n, model.H, model.Hs, model.epsilon)

    labels = sv.partition.labels
    sem_seqs = labels[seqs]
    C = sv.partition.cell_count
    keys = (sem_seqs * (C ** np.arange(n - 1, -1, -1))).sum(axis=1)
    both_rows = np.flatnonzero(both)
    order = np.argsort(keys[both_rows], kind="stable")
    both_rows = both_rows[order]
    uniq, starts = np.unique(keys[both_rows], return_index=True)
    groups = dict(zip(uniq.tolist(), np.split(both_rows, starts[1:]) if len(uniq) else []))
    empty = np.zeros(0, dtype=int)
    classes: dict[tuple[int, ...], np.ndarray] = {}
    for key in np.unique(keys[sem]).tolist():
        digits = tuple(int(key // C**(n - 1 - k) % C) for k in range(n))
        classes[digits] = groups.get(key, empty)
    sizes = {k: int(len(v)) for k, v in classes.items()}
    return Enumeration(seqs, syn, sem, both, classes, sizes)


def class_size_bounds(model: SequenceModel) -> tuple[float, float]:
    gap = model.H - model.Hs
    return 2.0 ** (model.n * (gap - model.epsilon)), 2.0 ** (model.n * (gap + model.epsilon))


def class_size_violations(model: SequenceModel) -> list[tuple[tuple[int, ...], int]]:
    """Classes whose size falls outside the 2^{n(H-Hs±eps)} window."""
    lo, hi = class_size_bounds(model)
    enum = enumerate_typical(model)
    return [(k, s) for k, s in enum.sizes.items() if not lo <= s <= hi]


def class_size_threshold(sv: SemanticVariable, epsilon: float, n_max: int) -> int | None:
    """Smallest n0 <= n_max such that every n in [n0, n_max] has no violating class.

    Returns ``None`` when even ``n_max`` has violations.
    """
    threshold = None
    for n in range(n_max, 0, -1):
        if class_size_violations(SequenceModel(sv, n, epsilon)):
            break
        threshold = n
    return threshold


def wilson_interval(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    z = NormalDist().inv_cdf(0.5 + level / 2)
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class AepEstimate:
    prob_typical: float
    ci95: tuple[float, float]
    trials: int
    prob_syn_typical: float
    prob_sem_typical: float


def sample_counts(sv: SemanticVariable, n: int, trials: int, rng: np.random.Generator) -> np.ndarray:
    """Symbol counts of ``trials`` i.i.d. length-n sequences.

    Every typicality statistic depends on a sequence only through its
    counts, so drawing the multinomial counts is equivalent to drawing the
    sequences and costs O(N) per trial instead of O(n).
    """
    return rng.multinomial(n, sv.dist.probs, size=trials)


def count_log_probs(counts: np.ndarray, sv: SemanticVariable) -> tuple[np.ndarray, np.ndarray]:
    lp, lq = _log2_tables(sv)
    with np.errstate(invalid="ignore"):
        # 0 * -inf must count as 0: an unused zero-probability symbol is harmless
        syn = np.where(counts > 0, counts * lp, 0.0).sum(axis=1)
        sem = np.where(counts > 0, counts * lq, 0.0).sum(axis=1)
    return syn, sem


def monte_carlo_aep(model: SequenceModel, trials: int, seed: int = 42) -> AepEstimate:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    counts = sample_counts(model.sv, model.n, trials, rng)
    syn_lp, sem_lp = count_log_probs(counts, model.sv)
    syn, sem, both, *_ = _verdicts(syn_lp, sem_lp, model.n, model.H, model.Hs, model.epsilon)
    k = int(both.sum())
    return AepEstimate(
        prob_typical=k / trials,
        ci95=wilson_interval(k, trials),
        trials=trials,
        prob_syn_typical=float(syn.mean()),
        prob_sem_typical=float(sem.mean()),
    )
