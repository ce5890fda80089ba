"""Semantic channel capacity C_s and semantic rate-distortion R_s(D).

Neither objective comes with a concavity/convexity guarantee, so both
solvers run a batch of projected-gradient starts (uniform, vertices, the
classical Blahut-Arimoto optimum, Dirichlet draws) and, on small
instances, cross-check against an exhaustive simplex grid.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .baselines import (
    InfeasibleDistortion,
    NonConvergence,
    SolverConfig,
    ba_capacity,
    ba_rate_distortion,
)
from .measures import down_semantic_mi, semantic_entropy, up_semantic_mi
from .model import (
    Alphabet,
    Channel,
    Distribution,
    JointModel,
    ModelError,
    SemanticVariable,
    SynonymousPartition,
)

LOG_FLOOR = 1e-300
# gradients are taken at max(x, GRAD_FLOOR) so log-ratios keep their one-sided limits at 0
GRAD_FLOOR = 1e-30
DEFAULT_STARTS = 32
CAPACITY_GRID_STEP = 0.01
RD_GRID_STEP = 0.05
GRID_POINT_BUDGET = 2_000_000


# -- simplex helpers ---------------------------------------------------------

def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of every row of ``v`` onto the probability simplex."""
    v = np.atleast_2d(v)
    n = v.shape[1]
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    idx = np.arange(1, n + 1)
    cond = u - css / idx > 0
    rho = n - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(v.shape[0]), rho] / (rho + 1)
    return np.maximum(v - theta[:, None], 0.0)


def simplex_grid(n: int, step: float) -> np.ndarray:
    """All points of the n-simplex whose coordinates are multiples of ``step``."""
    m = int(round(1.0 / step))
    if n == 1:
        return np.ones((1, 1))
    count = math.comb(m + n - 1, n - 1)
    if count > GRID_POINT_BUDGET:
        raise ValueError(f"simplex grid with {count} points exceeds budget")
    bars = np.array(list(itertools.combinations(range(m + n - 1), n - 1)), dtype=int)
    edges = np.hstack([np.full((len(bars), 1), -1), bars, np.full((len(bars), 1), m + n - 1)])
    return (np.diff(edges, axis=1) - 1) / m


def _xlogx_rows(p: np.ndarray) -> np.ndarray:
    """Row-wise entropy in bits over all trailing axes."""
    p = p.reshape(p.shape[0], -1)
    return -(p * np.log2(np.maximum(p, LOG_FLOOR))).sum(axis=1)


def fd_gradient(fun, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


@dataclass
class _PgdState:
    x: np.ndarray
    f: np.ndarray
    converged: np.ndarray
    iterations: int


def _batch_pgd(x0, fun, grad, project, cfg: SolverConfig, sign: float) -> _PgdState:
    """Projected gradient on a batch of starts with per-start backtracking.

    ``sign=+1`` maximises, ``-1`` minimises. ``fun``/``grad``/``project``
    act on the whole batch (leading axis). A start is done once its
    projected-gradient residual drops below ``sqrt(cfg.tolerance)``; near a
    smooth optimum the value error scales with the squared residual.
    """
    res_tol = math.sqrt(cfg.tolerance)
    x = project(x0.copy())
    f = fun(x)
    k = x.shape[0]
    axes = tuple(range(1, x.ndim))
    t = np.ones(k)
    done = np.zeros(k, dtype=bool)
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        active = np.flatnonzero(~done)
        if active.size == 0:
            break
        xa = x[active]
        g = grad(xa)
        residual = np.abs(project(xa + sign * g) - xa).max(axis=axes)
        stationary = residual < res_tol
        done[active[stationary]] = True
        active, xa, g = active[~stationary], xa[~stationary], g[~stationary]
        if active.size == 0:
            break
        ta = t[active].reshape((-1,) + (1,) * (x.ndim - 1))
        cand = project(xa + sign * ta * g)
        fc = fun(cand)
        gain = sign * (fc - f[active])
        decrease = sign * (g * (cand - xa)).sum(axis=axes)
        ok = (gain >= 1e-4 * np.maximum(decrease, 0.0)) & (gain >= 0.0)
        acc, rej = active[ok], active[~ok]
        x[acc] = cand[ok]
        f[acc] = fc[ok]
        t[acc] = np.minimum(t[acc] * 2.0, 1e3)
        t[rej] *= 0.5
        # step collapsed without progress: numerically stuck, treat as done
        done[rej[t[rej] < 1e-20]] = True
    return _PgdState(x, f, done, it)


def _pick_best(xs: np.ndarray, fs: np.ndarray, sign: float, tie: float = 1e-12) -> int:
    """Index of the best value; ties broken by lowest lexicographic point."""
    best = fs.max() if sign > 0 else fs.min()
    near = np.flatnonzero(np.abs(fs - best) <= tie)
    flat = [tuple(np.round(xs[i].ravel(), 12)) for i in near]
    return int(near[min(range(len(near)), key=lambda j: flat[j])])


# -- semantic capacity -------------------------------------------------------

@dataclass(frozen=True)
class SemanticChannelProblem:
    channel: Channel
    input_partition: SynonymousPartition
    output_partition: SynonymousPartition

    def __post_init__(self):
        if self.input_partition.alphabet != self.channel.input_alphabet:
            raise ModelError("input partition does not match channel input alphabet")
        if self.output_partition.alphabet != self.channel.output_alphabet:
            raise ModelError("output partition does not match channel output alphabet")

    @classmethod
    def plain(cls, channel: Channel) -> "SemanticChannelProblem":
        return cls(
            channel,
            SynonymousPartition.singletons(channel.input_alphabet),
            SynonymousPartition.singletons(channel.output_alphabet),
        )

    def cell_channel(self) -> np.ndarray:
        """N_x x (Ñ_x*Ñ_y) matrix A with (p @ A) = flattened joint cell masses."""
        w_cells = self.channel.matrix @ self.output_partition.indicator()
        nx_cells, ny_cells = self.input_partition.cell_count, self.output_partition.cell_count
        a = np.zeros((self.channel.input_alphabet.size, nx_cells, ny_cells))
        a[np.arange(a.shape[0]), self.input_partition.labels, :] = w_cells
        return a.reshape(a.shape[0], -1)


def up_mi_for_input(p_x: Distribution, prob: SemanticChannelProblem) -> float:
    jm = prob.channel.joint(p_x, prob.input_partition, prob.output_partition)
    return up_semantic_mi(jm)


class _UpObjective:
    def __init__(self, prob: SemanticChannelProblem):
        self.w = prob.channel.matrix
        self.a = prob.cell_channel()

    def value(self, p: np.ndarray) -> np.ndarray:
        return _xlogx_rows(p) + _xlogx_rows(p @ self.w) - _xlogx_rows(p @ self.a)

    def gradient(self, p: np.ndarray) -> np.ndarray:
        p = np.maximum(p, GRAD_FLOOR)
        lp = np.log2(p)
        lq = np.log2(np.maximum(p @ self.w, LOG_FLOOR))
        lm = np.log2(np.maximum(p @ self.a, LOG_FLOOR))
        # additive constants cancel under simplex projection
        return -lp - lq @ self.w.T + lm @ self.a.T


@dataclass
class CapacityCertificate:
    solver_value: float
    oracle_value: float | None
    gap: float | None  # oracle minus solver; positive means the grid found more


@dataclass
class SemanticCapacityResult:
    C_s: float
    p_x: Distribution
    certificate: CapacityCertificate
    baseline_C: float
    converged: bool
    iterations: int


def capacity_grid_oracle(prob: SemanticChannelProblem, step: float = CAPACITY_GRID_STEP):
    """Exhaustive maximisation of the up semantic MI over a simplex grid."""
    obj = _UpObjective(prob)
    grid = simplex_grid(prob.channel.input_alphabet.size, step)
    vals = obj.value(grid)
    i = _pick_best(grid, vals, +1.0)
    return float(vals[i]), grid[i]


def semantic_capacity(
    prob: SemanticChannelProblem,
    cfg: SolverConfig = SolverConfig(),
    starts: int = DEFAULT_STARTS,
    seed: int = 0,
    oracle: bool | None = None,
) -> SemanticCapacityResult:
    n = prob.channel.input_alphabet.size
    obj = _UpObjective(prob)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergence)
        base = ba_capacity(prob.channel, cfg)
    rng = np.random.default_rng(seed)
    x0 = [np.full(n, 1.0 / n), base.p_x.probs.copy()]
    x0.extend(np.eye(n))
    while len(x0) < max(starts, 2):
        x0.append(rng.dirichlet(np.ones(n)))
    x0 = np.array(x0)

    state = _batch_pgd(x0, obj.value, obj.gradient, project_simplex, cfg, +1.0)
    xs, fs = state.x, state.f
    # unoptimised starts stay in the pool so the BA optimum is never lost
    xs = np.vstack([xs, x0])
    fs = np.concatenate([fs, obj.value(x0)])
    i = _pick_best(xs, fs, +1.0)
    best_x, best_f = xs[i], float(fs[i])
    converged = bool(state.converged[i]) if i < len(state.converged) else True
    solver_value = best_f

    oracle_value = gap = None
    if oracle is None:
        oracle = n <= 4
    if oracle:
        oracle_value, grid_x = capacity_grid_oracle(prob)
        gap = oracle_value - solver_value
        if oracle_value > best_f:
            polished = _batch_pgd(grid_x[None, :], obj.value, obj.gradient, project_simplex, cfg, +1.0)
            if polished.f[0] >= oracle_value:
                best_x, best_f = polished.x[0], float(polished.f[0])
            else:
                best_x, best_f = grid_x, oracle_value

    if not converged:
        warnings.warn("semantic_capacity: best start did not converge", NonConvergence)
    p_best = Distribution(prob.channel.input_alphabet, best_x)
    # recompute from the stored distribution so the reported value cannot go stale
    c_s = up_mi_for_input(p_best, prob)
    return SemanticCapacityResult(
        C_s=c_s,
        p_x=p_best,
        certificate=CapacityCertificate(solver_value, oracle_value, gap),
        baseline_C=base.C,
        converged=converged,
        iterations=state.iterations,
    )


# -- semantic rate-distortion ------------------------------------------------

@dataclass(frozen=True, eq=False)
class DistortionSpec:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2:
            raise ModelError("distortion matrix must be two-dimensional")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ModelError("distortion entries must be finite and nonnegative")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def hamming(cls, n: int) -> "DistortionSpec":
        return cls(1.0 - np.eye(n))

    def __eq__(self, other):
        return isinstance(other, DistortionSpec) and np.array_equal(self.matrix, other.matrix)

    __hash__ = None


@dataclass(frozen=True)
class SemanticRdProblem:
    source: SemanticVariable
    recon_partition: SynonymousPartition
    d_s: DistortionSpec

    def __post_init__(self):
        want = (self.source.partition.cell_count, self.recon_partition.cell_count)
        if self.d_s.matrix.shape != want:
            raise ModelError(f"distortion matrix must have shape {want}, got {self.d_s.matrix.shape}")

    @property
    def recon_alphabet(self) -> Alphabet:
        return self.recon_partition.alphabet

    def lifted_distortion(self) -> np.ndarray:
        """Syntactic distortion d(x, x̂) = d_s(cell(x), cell(x̂))."""
        return self.d_s.matrix[np.ix_(self.source.partition.labels, self.recon_partition.labels)]


def down_mi_for_test_channel(p_x: Distribution, test: Channel, prob: SemanticRdProblem) -> dict:
    if p_x.alphabet != test.input_alphabet:
        raise ModelError("source and test channel input alphabets differ")
    jm = JointModel(
        test.input_alphabet, test.output_alphabet,
        p_x.probs[:, None] * test.matrix,
        prob.source.partition, prob.recon_partition,
    )
    raw = down_semantic_mi(jm)["raw"]
    dist = float((jm.probs * prob.lifted_distortion()).sum())
    return {"raw": raw, "expected_distortion": dist}


class _DownObjective:
    def __init__(self, prob: SemanticRdProblem):
        self.p = prob.source.dist.probs
        self.hs_x = semantic_entropy(prob.source)
        self.b = prob.recon_partition.indicator()
        self.d = prob.lifted_distortion()
        self.pd = self.p[:, None] * self.d

    def raw(self, q: np.ndarray) -> np.ndarray:
        j = self.p[None, :, None] * q
        r = j.sum(axis=1) @ self.b
        return self.hs_x + _xlogx_rows(r) - _xlogx_rows(j)

    def distortion(self, q: np.ndarray) -> np.ndarray:
        return (q * self.pd[None]).sum(axis=(1, 2))

    def raw_gradient(self, q: np.ndarray) -> np.ndarray:
        j = np.maximum(self.p, GRAD_FLOOR)[None, :, None] * np.maximum(q, GRAD_FLOOR)
        r = j.sum(axis=1) @ self.b
        lj = np.log2(np.maximum(j, LOG_FLOOR))
        lr = np.log2(np.maximum(r, LOG_FLOOR)) @ self.b.T
        return self.p[None, :, None] * (lj - lr[:, None, :])


def _project_rows(q: np.ndarray) -> np.ndarray:
    k, nx, nxh = q.shape
    return project_simplex(q.reshape(k * nx, nxh)).reshape(k, nx, nxh)


def project_budget(q: np.ndarray, pd: np.ndarray, D: float, iters: int = 100) -> np.ndarray:
    """Euclidean projection onto {row-stochastic q : sum(pd * q) <= D}, batched.

    By the KKT conditions the projection is ``_project_rows(q - lam * pd)``
    for the smallest ``lam >= 0`` meeting the budget. The distortion is
    piecewise linear and nonincreasing in ``lam``; secant steps (exact once
    the bracket sits on one linear piece) alternate with bisection. The
    feasible end of the bracket is returned (budget met to within 1e-13).
    """
    def dist_at(qo, lam):
        y = _project_rows(qo - lam[:, None, None] * pd[None])
        return y, (y * pd[None]).sum(axis=(1, 2))

    y = _project_rows(q)
    dist = (y * pd[None]).sum(axis=(1, 2))
    over = np.flatnonzero(dist > D)
    if over.size == 0:
        return y
    qo = q[over]
    lo, g_lo = np.zeros(over.size), dist[over]
    hi = np.ones(over.size)
    y_hi, g_hi = dist_at(qo, hi)
    tight = 1e-13 * max(1.0, abs(D))
    for _ in range(200):
        # at D = minimum distortion the budget is met only up to rounding
        bad = g_hi > D + tight
        if not bad.any():
            break
        lo[bad], g_lo[bad] = hi[bad], g_hi[bad]
        hi[bad] *= 2.0
        y_hi, g_hi = dist_at(qo, hi)
    for k in range(iters):
        todo = np.flatnonzero((g_hi < D - tight) & (hi - lo > 1e-15 * np.maximum(hi, 1.0)))
        if todo.size == 0:
            break
        l, h, gl, gh = lo[todo], hi[todo], g_lo[todo], g_hi[todo]
        if k % 2 == 0:
            # aim just inside the budget so rounding lands on the feasible side
            mid = l + (gl - (D - 0.5 * tight)) * (h - l) / np.maximum(gl - gh, 1e-300)
            mid = np.clip(mid, l, h)
        else:
            mid = 0.5 * (l + h)
        ym, gm = dist_at(qo[todo], mid)
        bad = gm > D
        lo[todo[bad]], g_lo[todo[bad]] = mid[bad], gm[bad]
        ok = todo[~bad]
        hi[ok], g_hi[ok], y_hi[ok] = mid[~bad], gm[~bad], ym[~bad]
    y[over] = y_hi
    return y


@dataclass
class SemanticRdResult:
    R_s: float
    raw: float
    D: float
    expected_distortion: float
    test_channel: Channel
    baseline_R: float
    oracle_value: float | None
    gap: float | None  # clamped oracle minus clamped solver
    converged: bool


def _repair(q: np.ndarray, q_min: np.ndarray, obj: _DownObjective, D: float) -> np.ndarray:
    """Mix infeasible channels with the min-distortion channel until d̄ = D."""
    dist = obj.distortion(q)
    d_lo = float(obj.distortion(q_min[None])[0])
    over = dist > D
    if over.any():
        t = np.clip((dist[over] - D) / np.maximum(dist[over] - d_lo, 1e-300), 0.0, 1.0)
        q = q.copy()
        q[over] = (1 - t)[:, None, None] * q[over] + t[:, None, None] * q_min[None]
        # guard against rounding just above the budget
        still = obj.distortion(q) > D
        q[still] = q_min
    return q


def rd_grid_oracle(prob: SemanticRdProblem, D: float, step: float = RD_GRID_STEP):
    """Exhaustive minimum of the raw down semantic MI over a per-row simplex grid.

    Returns ``(raw_min, channel)``; only grid channels meeting the budget count.
    """
    obj = _DownObjective(prob)
    nx, nxh = obj.d.shape
    rows = simplex_grid(nxh, step)
    total = len(rows) ** nx
    if total > GRID_POINT_BUDGET:
        raise ValueError(f"rd grid with {total} points exceeds budget")
    best_v, best_q = math.inf, None
    combos = np.array(list(itertools.product(range(len(rows)), repeat=nx)), dtype=int)
    for chunk in np.array_split(combos, max(1, len(combos) // 50_000)):
        q = rows[chunk]
        ok = obj.distortion(q) <= D + 1e-12
        if not ok.any():
            continue
        vals = obj.raw(q[ok])
        i = int(np.argmin(vals))
        if vals[i] < best_v - 1e-12:
            best_v, best_q = float(vals[i]), q[ok][i]
    return best_v, best_q


def semantic_rd(
    prob: SemanticRdProblem,
    D: float,
    cfg: SolverConfig = SolverConfig(),
    starts: int = DEFAULT_STARTS,
    seed: int = 0,
    oracle: bool | None = None,
) -> SemanticRdResult:
    obj = _DownObjective(prob)
    nx, nxh = obj.d.shape
    d_min = float(obj.p @ obj.d.min(axis=1))
    if D < 0 or D < d_min - 1e-12:
        raise InfeasibleDistortion(f"D={D} below minimum achievable semantic distortion {d_min:.6g}")
    q_min = np.zeros((nx, nxh))
    q_min[np.arange(nx), obj.d.argmin(axis=1)] = 1.0

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergence)
        base = ba_rate_distortion(prob.source.dist, obj.d, D, cfg, prob.recon_alphabet)

    rng = np.random.default_rng(seed)
    x0 = [q_min, base.test_channel.matrix.copy(), np.full((nx, nxh), 1.0 / nxh)]
    for col in range(nxh):
        c = np.zeros((nx, nxh))
        c[:, col] = 1.0
        x0.append(c)
    while len(x0) < max(starts, 3):
        x0.append(rng.dirichlet(np.ones(nxh), size=nx))
    x0 = _repair(np.array(x0), q_min, obj, D)

    pool_x = [x0]
    pool_f = [obj.raw(x0)]
    if nxh ** nx <= 256:
        det = np.zeros((nxh ** nx, nx, nxh))
        for k, cols in enumerate(itertools.product(range(nxh), repeat=nx)):
            det[k, np.arange(nx), cols] = 1.0
        det = det[obj.distortion(det) <= D + 1e-12]
        if len(det):
            pool_x.append(det)
            pool_f.append(obj.raw(det))

    project = lambda q: project_budget(q, obj.pd, D)  # noqa: E731
    state = _batch_pgd(x0, obj.raw, obj.raw_gradient, project, cfg, -1.0)
    fixed = _repair(state.x, q_min, obj, D)
    pool_x.append(fixed)
    pool_f.append(obj.raw(fixed))
    converged = bool(state.converged[int(np.argmin(state.f))])

    xs = np.concatenate(pool_x)
    fs = np.concatenate(pool_f)
    i = _pick_best(xs, fs, -1.0)
    best_q = xs[i]

    oracle_value = gap = None
    if oracle is None:
        oracle = nx * nxh <= 6
    if oracle:
        oracle_value, grid_q = rd_grid_oracle(prob, D)
        solver_raw = float(fs[i])
        gap = max(oracle_value, 0.0) - max(solver_raw, 0.0)
        if oracle_value < solver_raw:
            best_q = grid_q

    test = Channel(prob.source.dist.alphabet, prob.recon_alphabet, best_q)
    ev = down_mi_for_test_channel(prob.source.dist, test, prob)
    if not converged:
        warnings.warn("semantic_rd: best start hit max_iterations", NonConvergence)
    return SemanticRdResult(
        R_s=max(ev["raw"], 0.0),
        raw=ev["raw"],
        D=D,
        expected_distortion=ev["expected_distortion"],
        test_channel=test,
        baseline_R=base.R,
        oracle_value=oracle_value,
        gap=gap,
        converged=converged,
    )


@dataclass
class RdCurve:
    points: list[tuple[float, float]]
    repaired: bool
    results: list[SemanticRdResult] = field(repr=False, default_factory=list)


def rd_curve(prob: SemanticRdProblem, D_grid, cfg: SolverConfig = SolverConfig(), **kw) -> RdCurve:
    grid = [float(d) for d in D_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("D_grid must be sorted ascending")
    results = [semantic_rd(prob, d, cfg, **kw) for d in grid]
    values = [r.R_s for r in results]
    repaired = False
    # a larger budget can only enlarge the feasible set
    for k in range(1, len(values)):
        if values[k] > values[k - 1] + 1e-6:
            repaired = True
        if values[k] > values[k - 1]:
            values[k] = values[k - 1]
    if repaired:
        warnings.warn("rd_curve: solver noise repaired by running minimum", NonConvergence)
    return RdCurve(list(zip(grid, values)), repaired, results)
