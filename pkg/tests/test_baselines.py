import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semantic_info.baselines import (
    InfeasibleDistortion,
    NonConvergence,
    SolverConfig,
    ba_capacity,
    ba_rate_distortion,
    mutual_information,
)
from semantic_info.model import Channel, Distribution, bsc


def h2(x):
    return 0.0 if x in (0.0, 1.0) else -x * math.log2(x) - (1 - x) * math.log2(1 - x)


@pytest.mark.parametrize("e", [0.0, 0.05, 0.1, 0.3, 0.5])
def test_bsc_closed_form(e):
    assert ba_capacity(bsc(e)).C == pytest.approx(1 - h2(e), abs=1e-8)


@pytest.mark.parametrize("a", [0.0, 0.2, 0.7])
def test_erasure_channel_closed_form(a):
    ch = Channel.from_matrix([[1 - a, a, 0], [0, a, 1 - a]])
    assert ba_capacity(ch).C == pytest.approx(1 - a, abs=1e-8)


def test_z_channel_closed_form():
    # Z channel with P(0|1)=s: C = log2(1 + (1-s) s^{s/(1-s)})
    s = 0.5
    ch = Channel.from_matrix([[1, 0], [s, 1 - s]])
    want = math.log2(1 + (1 - s) * s ** (s / (1 - s)))
    assert ba_capacity(ch).C == pytest.approx(want, abs=1e-8)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tolerance=0)
    with pytest.raises(ValueError):
        SolverConfig(max_iterations=0)


def test_nonconvergence_warns():
    ch = Channel.from_matrix([[0.7, 0.2, 0.1], [0.1, 0.3, 0.6], [0.3, 0.4, 0.3]])
    with pytest.warns(NonConvergence):
        res = ba_capacity(ch, SolverConfig(tolerance=1e-14, max_iterations=2))
    assert not res.converged


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(2, 4), st.integers(0, 2**32 - 1))
def test_capacity_beats_grid_on_binary_inputs(nx, ny, seed):
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(ny), size=2)
    res = ba_capacity(Channel.from_matrix(w))
    grid = max(mutual_information(np.array([t, 1 - t]), w) for t in np.linspace(0, 1, 2001))
    assert res.C >= grid - 1e-9
    assert res.C <= grid + 1e-4  # grid is fine enough to come close
    assert res.C <= math.log2(min(2, ny)) + 1e-12


@pytest.mark.parametrize("D", [0.0, 0.05, 0.1, 0.25, 0.4, 0.5, 0.7])
def test_binary_hamming_rate_distortion(D):
    src = Distribution.from_probs([0.5, 0.5])
    res = ba_rate_distortion(src, 1 - np.eye(2), D)
    assert res.R == pytest.approx(max(1 - h2(min(D, 0.5)), 0.0), abs=1e-6)
    assert res.D <= D + 1e-12


def test_biased_binary_rate_distortion():
    p = 0.2
    src = Distribution.from_probs([1 - p, p])
    for D in (0.05, 0.1, 0.15):
        assert ba_rate_distortion(src, 1 - np.eye(2), D).R == pytest.approx(h2(p) - h2(D), abs=1e-6)


def test_infeasible_distortion():
    src = Distribution.from_probs([0.5, 0.5])
    with pytest.raises(InfeasibleDistortion):
        ba_rate_distortion(src, np.array([[0.1, 1.0], [1.0, 0.1]]), 0.05)
    with pytest.raises(InfeasibleDistortion):
        ba_rate_distortion(src, 1 - np.eye(2), -0.1)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 4), st.integers(2, 4), st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_rate_distortion_feasible_and_bounded(nx, nxh, frac, seed):
    rng = np.random.default_rng(seed)
    src = Distribution.from_probs(rng.dirichlet(np.ones(nx)))
    d = rng.uniform(0, 1, size=(nx, nxh))
    d_min = src.probs @ d.min(axis=1)
    d_max = (src.probs @ d).min()
    D = d_min + frac * (d_max - d_min)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergence)
        res = ba_rate_distortion(src, d, D)
    assert res.D <= D + 1e-9
    assert -1e-12 <= res.R <= math.log2(nx) + 1e-9
    assert np.allclose(res.test_channel.matrix.sum(axis=1), 1.0)
