"""Blahut-Arimoto solvers for classical channel capacity and R(D)."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import Alphabet, Channel, Distribution

LN2 = math.log(2.0)


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-9
    max_iterations: int = 10000

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


class NonConvergence(RuntimeWarning):
    pass


class InfeasibleDistortion(ValueError):
    pass


def mutual_information(p_x: np.ndarray, w: np.ndarray) -> float:
    """I(X;Y) in bits for input law ``p_x`` and channel matrix ``w``."""
    joint = p_x[:, None] * w
    q = joint.sum(axis=0)
    mask = joint > 0
    ratio = w[mask] / np.broadcast_to(q, w.shape)[mask]
    return float((joint[mask] * np.log2(ratio)).sum())


def _kl_rows(w: np.ndarray, q: np.ndarray) -> np.ndarray:
    """D(w[x] || q) in nats for every input row."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(w > 0, w * np.log(w / q), 0.0)
    return terms.sum(axis=1)


@dataclass
class CapacityResult:
    C: float
    p_x: Distribution
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list, repr=False)


def ba_capacity(ch: Channel, cfg: SolverConfig = SolverConfig()) -> CapacityResult:
    """Channel capacity by Blahut-Arimoto with the standard upper/lower gap stop."""
    w = ch.matrix
    p = np.full(w.shape[0], 1.0 / w.shape[0])
    history = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        q = p @ w
        d = _kl_rows(w, q)
        lower = float(p @ d) / LN2
        upper = float(d.max()) / LN2
        history.append(lower)
        if upper - lower < cfg.tolerance:
            converged = True
            break
        p = p * np.exp(d - d.max())
        p /= p.sum()
    if not converged:
        warnings.warn(f"ba_capacity: no convergence after {it} iterations", NonConvergence)
    c = mutual_information(p, w)
    return CapacityResult(c, Distribution(ch.input_alphabet, p), it, converged, history)


@dataclass
class RateDistortionResult:
    R: float
    D: float
    test_channel: Channel
    slope: float
    converged: bool


def _ba_rd_fixed_slope(p: np.ndarray, d: np.ndarray, beta: float, cfg: SolverConfig):
    """Inner Blahut-Arimoto for slope ``beta``; returns the test channel."""
    r = np.full(d.shape[1], 1.0 / d.shape[1])
    logk = -beta * d
    converged = False
    for _ in range(cfg.max_iterations):
        with np.errstate(divide="ignore"):
            logq = np.log(r)[None, :] + logk
        logq -= logq.max(axis=1, keepdims=True)
        q = np.exp(logq)
        q /= q.sum(axis=1, keepdims=True)
        r_new = p @ q
        if np.abs(r_new - r).max() < cfg.tolerance * 1e-3:
            r = r_new
            converged = True
            break
        r = r_new
    return q, converged


def ba_rate_distortion(
    src: Distribution,
    d_syntactic,
    D: float,
    cfg: SolverConfig = SolverConfig(),
    recon_alphabet: Alphabet | None = None,
) -> RateDistortionResult:
    """Classical R(D) via Blahut-Arimoto and bisection on the slope parameter.

    The returned test channel always meets the distortion budget; R is the
    mutual information of that channel.
    """
    p = src.probs
    d = np.asarray(d_syntactic, dtype=float)
    if d.ndim != 2 or d.shape[0] != p.size:
        raise ValueError(f"distortion matrix must have {p.size} rows")
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        raise ValueError("distortion matrix must be finite and nonnegative")
    if D < 0:
        raise InfeasibleDistortion(f"D={D} is negative")
    out_alpha = recon_alphabet or Alphabet.indexed(d.shape[1], "xh")

    def pack(q, beta, ok):
        ch = Channel(src.alphabet, out_alpha, q)
        return RateDistortionResult(
            mutual_information(p, ch.matrix), float(p @ (q * d).sum(axis=1)), ch, beta, ok
        )

    d_min = float(p @ d.min(axis=1))
    if D < d_min - 1e-12:
        raise InfeasibleDistortion(f"D={D} below minimum achievable distortion {d_min:.6g}")
    col_avg = p @ d
    if D >= col_avg.min():
        q = np.zeros_like(d)
        q[:, int(np.argmin(col_avg))] = 1.0
        return pack(q, 0.0, True)

    def dist_at(beta):
        q, ok = _ba_rd_fixed_slope(p, d, beta, cfg)
        return float(p @ (q * d).sum(axis=1)), q, ok

    lo, hi = 0.0, 1.0
    dh, qh, okh = dist_at(hi)
    while dh > D and hi < 1e4:
        lo, hi = hi, hi * 2
        dh, qh, okh = dist_at(hi)
    if dh > D:
        # D sits at the minimum-distortion point; restrict to argmin entries
        mask = d <= d.min(axis=1, keepdims=True) + 1e-12
        q = _min_info_on_support(p, mask, cfg)
        return pack(q, math.inf, True)
    for _ in range(200):
        if hi - lo < 1e-10 * max(hi, 1.0):
            break
        mid = 0.5 * (lo + hi)
        dm, qm, okm = dist_at(mid)
        if dm > D:
            lo = mid
        else:
            hi, dh, qh, okh = mid, dm, qm, okm
    if not okh:
        warnings.warn("ba_rate_distortion: inner iteration did not converge", NonConvergence)
    return pack(qh, hi, okh)


def _min_info_on_support(p: np.ndarray, mask: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    """Minimise I(X;X̂) over test channels supported on ``mask`` (zero-distortion limit)."""
    r = mask.astype(float).sum(axis=0)
    r /= r.sum()
    for _ in range(cfg.max_iterations):
        q = np.where(mask, r[None, :], 0.0)
        s = q.sum(axis=1, keepdims=True)
        q = np.where(s > 0, q / np.where(s > 0, s, 1.0), mask / mask.sum(axis=1, keepdims=True))
        r_new = p @ q
        if np.abs(r_new - r).max() < cfg.tolerance * 1e-3:
            break
        r = r_new
    return q
