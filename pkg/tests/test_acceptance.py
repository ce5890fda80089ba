"""Acceptance criteria, one test per criterion.

Each test prints ``ACCEPTANCE <id> <name>: PASS|FAIL  <detail>`` (also
collected into the pytest terminal summary). Run directly with
``python3 tests/test_acceptance.py`` for the lines alone.
"""
import io
import json
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import FIXTURES, random_joint, random_partition  # noqa: E402
from semantic_info.baselines import NonConvergence  # noqa: E402
from semantic_info.cli import run  # noqa: E402
from semantic_info.codingsim import (  # noqa: E402
    ChannelCodeExperiment,
    SourceCodeExperiment,
    simulate_channel_coding,
    simulate_source_coding,
)
from semantic_info.measures import chain_rule_audit, entropy, measure_report, semantic_entropy  # noqa: E402
from semantic_info.model import (  # noqa: E402
    Alphabet,
    Channel,
    Distribution,
    SemanticVariable,
    SynonymousPartition,
    bsc,
)
from semantic_info.semlimits import (  # noqa: E402
    DistortionSpec,
    SemanticChannelProblem,
    SemanticRdProblem,
    capacity_grid_oracle,
    rd_grid_oracle,
    semantic_capacity,
    semantic_rd,
)
from semantic_info.typicality import (  # noqa: E402
    SequenceModel,
    class_size_violations,
    monte_carlo_aep,
)

EX1 = str(FIXTURES / "example1.json")
BSC = str(FIXTURES / "bsc.json")
SLACK = 1e-9

# shared with conftest.pytest_terminal_summary
RESULTS: dict[str, str] = {}


def record(cid: str, name: str, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {cid} {name}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[cid] = line
    print(line)


def cli(*argv):
    out, err = io.BytesIO(), io.StringIO()
    code = run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue()


def h2(x):
    return 0.0 if x in (0.0, 1.0) else -x * math.log2(x) - (1 - x) * math.log2(1 - x)


# 1 -----------------------------------------------------------------------------

GOLDEN = {
    "H_U": 1.971, "H_V": 2.2464, "H_UV": 3.5842, "H_U_given_V": 1.3377, "H_V_given_U": 1.6132,
    "I_UV": 0.6332, "Hs_U": 0.971, "Hs_V": 1.971, "Hs_UV": 2.7087, "Hs_U_given_V": 0.6623,
    "Hs_V_given_U": 1.4755, "Iup": 1.5087, "Is": -0.6422, "Is_clamped": 0.0,
    "Hs_V-H_V_given_U": 0.3578, "H_V-Hs_V_given_U": 0.7709, "H_U-Hs_U_given_V": 1.3087,
    "Hs_U-H_U_given_V": -0.3667,
}


def test_1_example_golden_reproduction():
    t0 = time.perf_counter()
    code, out = cli("measures", "--input", EX1)
    elapsed = time.perf_counter() - t0
    res = json.loads(out)["results"]
    errs = {k: abs(res[k]["value"] - v) for k, v in GOLDEN.items()}
    worst = max(errs, key=errs.get)
    ok = code == 0 and errs[worst] <= 5e-4 and elapsed < 1.0
    record("1", "example-golden", ok,
           f"{len(GOLDEN)} values, max |err| {errs[worst]:.2e} ({worst}), {elapsed:.2f}s")
    assert ok


# 2 -----------------------------------------------------------------------------

def _invariant_violations(jm):
    r = measure_report(jm)
    bad = []
    pairs = [("Hs_U<=H_U", r.Hs_U, r.H_U), ("Hs_V<=H_V", r.Hs_V, r.H_V),
             ("Hs_UV<=H_UV", r.Hs_UV, r.H_UV), ("Hs_U|V<=H_U|V", r.Hs_U_given_V, r.H_U_given_V),
             ("Hs_V|U<=H_V|U", r.Hs_V_given_U, r.H_V_given_U)]
    bad += [name for name, a, b in pairs if a > b + SLACK]
    audit = chain_rule_audit(jm, slack=SLACK)
    bad += [f"chain:{label}" for label, _, holds in audit.checks if not holds]
    for sv in (jm.row_variable(), jm.col_variable()):
        p = sv.dist.probs
        rhs = semantic_entropy(sv)
        for cell in sv.partition.cells:
            q = p[list(cell)].sum()
            if q > 0:
                rhs += q * entropy(p[list(cell)] / q)
        if abs(rhs - entropy(sv.dist)) > SLACK:
            bad.append("grouping")
    return bad


def test_2_invariant_suite():
    rng = np.random.default_rng(20240601)
    t0 = time.perf_counter()
    violations = []
    for k in range(1000):
        jm = random_joint(rng, max_size=6)
        violations += [(k, v) for v in _invariant_violations(jm)]
    elapsed = time.perf_counter() - t0
    ok = not violations and elapsed < 10
    record("2", "invariant-suite", ok, f"1000 instances, {len(violations)} violations, {elapsed:.2f}s")
    assert ok, violations[:5]


# 3 -----------------------------------------------------------------------------

def test_3_capacity_expansion():
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    worst_a, worst_b = 0.0, math.inf
    for _ in range(50):
        nx, ny = rng.integers(1, 5, size=2)
        ch = Channel.from_matrix(rng.dirichlet(np.full(ny, 0.7), size=nx))
        res = semantic_capacity(SemanticChannelProblem.plain(ch))
        worst_a = max(worst_a, abs(res.C_s - res.baseline_C))
        worst_b = min(worst_b, res.C_s - res.baseline_C)
    for _ in range(50):
        nx, ny = rng.integers(1, 5, size=2)
        ch = Channel.from_matrix(rng.dirichlet(np.full(ny, 0.7), size=nx))
        prob = SemanticChannelProblem(ch, random_partition(rng, ch.input_alphabet),
                                      random_partition(rng, ch.output_alphabet))
        res = semantic_capacity(prob)
        worst_b = min(worst_b, res.C_s - res.baseline_C)
    ch = bsc(0.1)
    merged = semantic_capacity(SemanticChannelProblem(
        ch, SynonymousPartition.singletons(ch.input_alphabet), SynonymousPartition.single_cell(ch.output_alphabet)))
    ch4 = Channel.from_matrix(np.eye(4))
    pairs = [[0, 1], [2, 3]]
    noiseless = SemanticChannelProblem(ch4, SynonymousPartition(ch4.input_alphabet, pairs),
                                       SynonymousPartition(ch4.output_alphabet, pairs))
    c4 = semantic_capacity(noiseless)
    grid4, _ = capacity_grid_oracle(noiseless)
    elapsed = time.perf_counter() - t0
    checks = {
        "a": worst_a <= 1e-4,
        "b": worst_b >= -1e-6,
        "c": abs(merged.C_s - 1.0) <= 1e-3,
        "d": abs(c4.C_s - 3.0) <= 5e-3 and abs(grid4 - 3.0) <= 5e-3,
        "time": elapsed < 120,
    }
    ok = all(checks.values())
    record("3", "capacity-expansion", ok,
           f"(a) max|Cs-C| {worst_a:.1e} (b) min(Cs-C) {worst_b:.1e} (c) {merged.C_s:.4f} "
           f"(d) {c4.C_s:.4f} grid {grid4:.4f}, {elapsed:.1f}s {'' if ok else checks}")
    assert ok


# 4 -----------------------------------------------------------------------------

def _rd_problem(p, src_cells, recon_cells, d):
    a = Alphabet.indexed(len(p), "u")
    sv = SemanticVariable(Distribution(a, p), SynonymousPartition(a, src_cells))
    n_rec = sum(len(c) for c in recon_cells)
    return SemanticRdProblem(sv, SynonymousPartition(Alphabet.indexed(n_rec, "xh"), recon_cells), DistortionSpec(d))


def test_4_rate_distortion_contraction():
    t0 = time.perf_counter()
    single = _rd_problem([0.5, 0.5], [[0], [1]], [[0], [1]], 1 - np.eye(2))
    err_a = max(abs(semantic_rd(single, D).R_s - (1 - h2(D))) for D in (0.0, 0.1, 0.25))

    rng = np.random.default_rng(404)
    worst_b = -math.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergence)
        for _ in range(30):
            nx, nxh = (int(v) for v in rng.integers(2, 5, size=2))
            src = Distribution.from_probs(rng.dirichlet(np.ones(nx)))
            sp = random_partition(rng, src.alphabet)
            rp = random_partition(rng, Alphabet.indexed(nxh, "xh"))
            prob = SemanticRdProblem(SemanticVariable(src, sp), rp,
                                     DistortionSpec(rng.uniform(0, 1, size=(sp.cell_count, rp.cell_count))))
            d = prob.lifted_distortion()
            d_min, d_max = src.probs @ d.min(axis=1), (src.probs @ d).min()
            D = float(d_min + rng.uniform() * (d_max - d_min))
            res = semantic_rd(prob, D)
            worst_b = max(worst_b, res.R_s - res.baseline_R)

    merged = _rd_problem([0.25] * 4, [[0, 1], [2, 3]], [[0, 1], [2, 3]], 1 - np.eye(2))
    r0 = semantic_rd(merged, 0.0)
    oracle_raw, _ = rd_grid_oracle(merged, 0.0, step=0.5)
    elapsed = time.perf_counter() - t0
    checks = {
        "a": err_a <= 1e-3,
        "b": worst_b <= 1e-6,
        "c": abs(r0.R_s) <= 1e-3 and abs(max(oracle_raw, 0.0) - r0.R_s) <= 1e-3,
        "time": elapsed < 300,
    }
    ok = all(checks.values())
    record("4", "rd-contraction", ok,
           f"(a) max err {err_a:.1e} (b) max(Rs-R) {worst_b:.1e} (c) Rs(0) {r0.R_s:.4f} "
           f"oracle {max(oracle_raw, 0.0):.4f}, {elapsed:.1f}s {'' if ok else checks}")
    assert ok


# 5 -----------------------------------------------------------------------------

def test_5_aep_class_sizes():
    t0 = time.perf_counter()
    cases = json.loads((FIXTURES / "class_size_thresholds.json").read_text())["cases"]
    bad = []
    checked = 0
    for case in cases:
        a = Alphabet.indexed(len(case["probs"]))
        sv = SemanticVariable(Distribution(a, case["probs"]), SynonymousPartition(a, case["cells"]))
        for n in range(case["threshold"], case["n_max"] + 1):
            checked += 1
            if class_size_violations(SequenceModel(sv, n, case["epsilon"])):
                bad.append((case["name"], n))
    a = Alphabet.indexed(4)
    ex1 = SemanticVariable(Distribution(a, [0.3, 0.3, 0.2, 0.2]), SynonymousPartition(a, [[0, 1], [2, 3]]))
    est = monte_carlo_aep(SequenceModel(ex1, 2000, 0.05), 10_000, seed=7)
    elapsed = time.perf_counter() - t0
    ok = not bad and est.prob_typical >= 0.99 and elapsed < 60
    record("5", "aep-class-sizes", ok,
           f"{checked} enumerations, violations {bad}, MC prob_typical {est.prob_typical:.4f}, {elapsed:.1f}s")
    assert ok


# 6 -----------------------------------------------------------------------------

CHANNEL_EPSILON = 0.25  # see the decisions ledger: 0.1 is too tight at n=64


def test_6_coding_thresholds():
    t0 = time.perf_counter()
    a = Alphabet.indexed(4)
    ex1 = SemanticVariable(Distribution(a, [0.3, 0.3, 0.2, 0.2]), SynonymousPartition(a, [[0, 1], [2, 3]]))
    hs = semantic_entropy(ex1)
    src_hi = simulate_source_coding(SourceCodeExperiment(ex1, 500, hs + 0.18, trials=2000))
    src_lo = simulate_source_coding(SourceCodeExperiment(ex1, 500, hs - 0.17, trials=2000))
    prob = SemanticChannelProblem.plain(bsc(0.05))
    ch_lo = simulate_channel_coding(ChannelCodeExperiment(prob, 64, 0.3, trials=500, epsilon=CHANNEL_EPSILON))
    ch_hi = simulate_channel_coding(ChannelCodeExperiment(prob, 64, 0.95, trials=500, epsilon=CHANNEL_EPSILON))
    elapsed = time.perf_counter() - t0
    checks = {
        "source R=Hs+0.18": src_hi.ci95[1] < 0.05,
        "source R=Hs-0.17": src_lo.ci95[0] > 0.9,
        "channel R=0.3": ch_lo.ci95[1] < 0.2,
        "channel R=0.95": ch_hi.ci95[0] > 0.8,
        "time": elapsed < 300,
    }
    ok = all(checks.values())
    record("6", "coding-thresholds", ok,
           f"source P_e {src_hi.P_e:.3f}/{src_lo.P_e:.3f}, channel P_e {ch_lo.P_e:.3f}/{ch_hi.P_e:.3f} "
           f"(CI-bounded), {elapsed:.1f}s {'' if ok else checks}")
    assert ok


# 7 -----------------------------------------------------------------------------

DETERMINISM_RUNS = [
    ["measures", "--input", EX1],
    ["capacity", "--input", BSC],
    ["capacity", "--input", EX1],
    ["rd", "--input", EX1, "--d", "0.1"],
    ["rd", "--input", EX1, "--d-grid", "0,0.1,0.3"],
    ["aep", "--input", EX1, "--n", "500", "--trials", "2000", "--seed", "7"],
    ["simulate-source", "--input", EX1, "--rate", "1.15", "--n", "300", "--trials", "500"],
    ["simulate-channel", "--input", BSC, "--rate", "0.3", "--n", "64", "--trials", "200", "--epsilon", "0.25"],
    ["simulate-channel", "--input", EX1, "--rate", "0.3", "--n", "12", "--trials", "100"],
]


def test_7_determinism():
    mismatched = []
    for argv in DETERMINISM_RUNS:
        _, a = cli(*argv)
        _, b = cli(*argv)
        if a != b or not a:
            mismatched.append(argv[0])
    ok = not mismatched
    record("7", "determinism", ok, f"{len(DETERMINISM_RUNS)} commands rerun, mismatches {mismatched}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
