"""Command-line front end: problem files in, canonical reports out.

Exit codes: 0 success, 1 invalid input or usage, 2 solver did not converge
(the report is still written, with ``converged: false`` in diagnostics).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .baselines import NonConvergence, SolverConfig
from .codingsim import (
    BudgetExceeded,
    ChannelCodeExperiment,
    SourceCodeExperiment,
    simulate_channel_coding,
    simulate_source_coding,
)
from .measures import chain_rule_audit, entropy, measure_report, semantic_entropy
from .model import (
    Alphabet,
    Channel,
    Distribution,
    JointModel,
    ModelError,
    SemanticVariable,
    SynonymousPartition,
    validate_partition,
)
from .semlimits import (
    DistortionSpec,
    SemanticChannelProblem,
    SemanticRdProblem,
    rd_curve,
    semantic_capacity,
    semantic_rd,
)
from .typicality import SequenceModel, TooLargeToEnumerate, monte_carlo_aep

SCHEMA_VERSION = "1.0"
SECTIONS = ("source", "partition_u", "joint", "partition_v", "channel", "distortion", "recon_partition", "meta")
COMMANDS = ("measures", "capacity", "rd", "aep", "simulate-source", "simulate-channel")


class ParseError(ValueError):
    """The file is not readable UTF-8 JSON."""


class ValidationError(ValueError):
    """The file parsed but violates a model invariant; ``path`` names the field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# -- problem files -------------------------------------------------------------

@dataclass
class ProblemFile:
    source: Distribution | None = None
    partition_u: SynonymousPartition | None = None
    joint: JointModel | None = None
    partition_v: SynonymousPartition | None = None
    channel: Channel | None = None
    distortion: DistortionSpec | None = None
    recon_partition: SynonymousPartition | None = None
    meta: dict = field(default_factory=dict)

    # derived views used by the subcommands
    def source_variable(self) -> SemanticVariable:
        if self.source is not None:
            part = self.partition_u or SynonymousPartition.singletons(self.source.alphabet)
            return SemanticVariable(self.source, part)
        if self.joint is not None:
            return self.joint.row_variable()
        raise ValidationError("source", "missing (a source or joint section is required)")

    def channel_problem(self) -> SemanticChannelProblem:
        if self.channel is not None:
            ch = self.channel
        elif self.joint is not None:
            p = self.joint.probs
            rows = p.sum(axis=1, keepdims=True)
            if np.any(rows <= 0):
                raise ValidationError("joint.probs", "a zero row leaves the channel undefined")
            ch = Channel(self.joint.row_alphabet, self.joint.col_alphabet, p / rows)
        else:
            raise ValidationError("channel", "missing (a channel or joint section is required)")
        pu = self.partition_u or SynonymousPartition.singletons(ch.input_alphabet)
        pv = self.partition_v or SynonymousPartition.singletons(ch.output_alphabet)
        return SemanticChannelProblem(ch, pu, pv)

    def rd_problem(self) -> SemanticRdProblem:
        sv = self.source_variable()
        recon = self.recon_partition
        if recon is None:
            alpha = Alphabet.indexed(sv.dist.size, "xh")
            recon = SynonymousPartition(alpha, sv.partition.cells)
        d = self.distortion or DistortionSpec.hamming(sv.partition.cell_count)
        if d.matrix.shape != (sv.partition.cell_count, recon.cell_count):
            raise ValidationError(
                "distortion.matrix",
                f"shape {d.matrix.shape} does not match cells {(sv.partition.cell_count, recon.cell_count)}",
            )
        return SemanticRdProblem(sv, recon, d)


def _matrix(raw, path: str) -> np.ndarray:
    try:
        m = np.array(raw, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(path, "not a numeric matrix") from None
    if m.ndim != 2 or m.size == 0:
        raise ValidationError(path, "expected a nonempty two-dimensional array")
    return m


def _probs(raw, path: str, n: int | None = None) -> np.ndarray:
    try:
        p = np.array(raw, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(path, "not a numeric array") from None
    if n is not None and p.shape != (n,):
        raise ValidationError(path, f"expected {n} entries, got {p.size}")
    if not np.all(np.isfinite(p)):
        raise ValidationError(path, "non-finite entry")
    if np.any(p < 0):
        raise ValidationError(path, "negative entry")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValidationError(path, f"sum {p.sum():g}")
    return p


def _alphabet(labels, n: int, prefix: str, path: str) -> Alphabet:
    if labels is None:
        return Alphabet.indexed(n, prefix)
    if not isinstance(labels, list) or len(labels) != n:
        raise ValidationError(path, f"expected {n} labels")
    try:
        return Alphabet(tuple(labels))
    except ModelError as e:
        raise ValidationError(path, str(e)) from None


def _partition(raw, alphabet: Alphabet, path: str) -> SynonymousPartition:
    if isinstance(raw, dict):
        raw = raw.get("cells")
    if not isinstance(raw, list) or not all(isinstance(c, list) for c in raw):
        raise ValidationError(path, "expected a list of index lists")
    cells = []
    for cell in raw:
        if not all(isinstance(i, int) and not isinstance(i, bool) for i in cell):
            raise ValidationError(path, "cell entries must be integers")
        cells.append(tuple(cell))
    seen: set[int] = set()
    for cell in cells:
        if seen.intersection(cell) or len(set(cell)) != len(cell):
            raise ValidationError(path, "overlapping cells")
        seen.update(cell)
    bad = [i for i in seen if not 0 <= i < alphabet.size]
    if bad:
        raise ValidationError(path, f"index {bad[0]} out of range for {alphabet.size} symbols")
    try:
        validate_partition(cells, alphabet.size)
        return SynonymousPartition(alphabet, tuple(cells))
    except ModelError as e:
        raise ValidationError(path, str(e)) from None


def _section(data: dict, name: str, kind=dict):
    val = data.get(name)
    if val is not None and not isinstance(val, kind):
        raise ValidationError(name, f"expected {'an object' if kind is dict else 'a list'}")
    return val


def problem_from_dict(data: Any) -> ProblemFile:
    if not isinstance(data, dict):
        raise ValidationError("<root>", "expected a JSON object")
    unknown = sorted(set(data) - set(SECTIONS))
    if unknown:
        raise ValidationError(unknown[0], "unknown section")
    pf = ProblemFile(meta=dict(data.get("meta") or {}))

    u_alpha = v_alpha = None
    src = _section(data, "source")
    if src is not None:
        p = _probs(src.get("probs"), "source.probs")
        u_alpha = _alphabet(src.get("symbols"), p.size, "u", "source.symbols")
        pf.source = Distribution(u_alpha, p)

    jt = _section(data, "joint")
    if jt is not None:
        m = _matrix(jt.get("probs"), "joint.probs")
        _probs(m.ravel(), "joint.probs")
        ra = _alphabet(jt.get("row_symbols"), m.shape[0], "u", "joint.row_symbols")
        ca = _alphabet(jt.get("col_symbols"), m.shape[1], "v", "joint.col_symbols")
        if u_alpha is not None and ra != u_alpha:
            raise ValidationError("joint.row_symbols", "does not match source.symbols")
        u_alpha, v_alpha = ra, ca

    ch = _section(data, "channel")
    if ch is not None:
        w = _matrix(ch.get("matrix"), "channel.matrix")
        for i, row in enumerate(w):
            _probs(row, f"channel.matrix[{i}]")
        ia = _alphabet(ch.get("input_symbols"), w.shape[0], "x", "channel.input_symbols")
        oa = _alphabet(ch.get("output_symbols"), w.shape[1], "y", "channel.output_symbols")
        if u_alpha is not None and ia.size != u_alpha.size:
            raise ValidationError("channel.matrix", f"expected {u_alpha.size} rows to match partition_u alphabet")
        if ch.get("input_symbols") is None and u_alpha is not None:
            ia = u_alpha
        if v_alpha is not None and ch.get("output_symbols") is None and oa.size == v_alpha.size:
            oa = v_alpha
        if v_alpha is not None and oa != v_alpha:
            raise ValidationError("channel.output_symbols", "does not match joint.col_symbols")
        u_alpha, v_alpha = ia, oa
        pf.channel = Channel(ia, oa, w)

    if data.get("partition_u") is not None:
        if u_alpha is None:
            raise ValidationError("partition_u", "needs a source, joint or channel section")
        pf.partition_u = _partition(data["partition_u"], u_alpha, "partition_u")
    if data.get("partition_v") is not None:
        if v_alpha is None:
            raise ValidationError("partition_v", "needs a joint or channel section")
        pf.partition_v = _partition(data["partition_v"], v_alpha, "partition_v")

    if jt is not None:
        row = pf.partition_u or SynonymousPartition.singletons(u_alpha)
        col = pf.partition_v or SynonymousPartition.singletons(v_alpha)
        pf.joint = JointModel(u_alpha, v_alpha, _matrix(jt["probs"], "joint.probs"), row, col)

    rp = data.get("recon_partition")
    if rp is not None:
        cells = rp.get("cells") if isinstance(rp, dict) else rp
        if not isinstance(cells, list) or not all(isinstance(c, list) for c in cells):
            raise ValidationError("recon_partition", "expected a list of index lists")
        size = sum(len(c) for c in cells)
        labels = rp.get("symbols") if isinstance(rp, dict) else None
        pf.recon_partition = _partition(cells, _alphabet(labels, size, "xh", "recon_partition.symbols"), "recon_partition")

    ds = _section(data, "distortion")
    if ds is not None:
        domain = ds.get("domain", "semantic")
        if domain != "semantic":
            raise ValidationError("distortion.domain", f"unsupported domain {domain!r}")
        m = _matrix(ds.get("matrix"), "distortion.matrix")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ValidationError("distortion.matrix", "entries must be finite and nonnegative")
        pf.distortion = DistortionSpec(m)
    return pf


def parse_problem_file(path) -> ProblemFile:
    try:
        text = Path(path).read_bytes().decode("utf-8")
    except OSError as e:
        raise ParseError(f"{path}: {e.strerror or e}") from None
    except UnicodeDecodeError:
        raise ParseError(f"{path}: not UTF-8") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: malformed JSON ({e.msg} at line {e.lineno})") from None
    return problem_from_dict(data)


def serialize_problem(pf: ProblemFile) -> dict:
    """Inverse of ``problem_from_dict`` (full-precision floats)."""
    out: dict[str, Any] = {}
    cells = lambda part: [list(c) for c in part.cells]  # noqa: E731
    if pf.source is not None:
        out["source"] = {"symbols": list(pf.source.alphabet.labels), "probs": pf.source.probs.tolist()}
    if pf.joint is not None:
        out["joint"] = {
            "row_symbols": list(pf.joint.row_alphabet.labels),
            "col_symbols": list(pf.joint.col_alphabet.labels),
            "probs": pf.joint.probs.tolist(),
        }
    if pf.channel is not None:
        out["channel"] = {
            "input_symbols": list(pf.channel.input_alphabet.labels),
            "output_symbols": list(pf.channel.output_alphabet.labels),
            "matrix": pf.channel.matrix.tolist(),
        }
    if pf.partition_u is not None:
        out["partition_u"] = cells(pf.partition_u)
    if pf.partition_v is not None:
        out["partition_v"] = cells(pf.partition_v)
    if pf.recon_partition is not None:
        out["recon_partition"] = {
            "symbols": list(pf.recon_partition.alphabet.labels),
            "cells": cells(pf.recon_partition),
        }
    if pf.distortion is not None:
        out["distortion"] = {"matrix": pf.distortion.matrix.tolist(), "domain": "semantic"}
    if pf.meta:
        out["meta"] = pf.meta
    return out


# -- reports -------------------------------------------------------------------

@dataclass
class Report:
    command: str
    inputs_digest: str
    results: dict[str, dict[str, Any]] = field(default_factory=dict)
    diagnostics: dict[str, Any] = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    def add(self, name: str, value: float, unit: str) -> None:
        self.results[name] = {"value": float(value), "unit": unit}

    @property
    def converged(self) -> bool:
        return bool(self.diagnostics.get("converged", True))


def _fmt_float(v: float) -> str:
    if math.isnan(v):
        return '"nan"'
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    s = "%.6f" % v
    return "0.000000" if s == "-0.000000" else s


def _canonical(obj) -> str:
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ",".join(json.dumps(k) + ":" + _canonical(v) for k, v in items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(_canonical(v) for v in list(obj)) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    return json.dumps(str(obj))


def emit_report(report: Report, fmt: str = "json") -> bytes:
    if fmt == "json":
        body = {
            "command": report.command,
            "inputs_digest": report.inputs_digest,
            "results": report.results,
            "diagnostics": report.diagnostics,
            "schema_version": report.schema_version,
        }
        return (_canonical(body) + "\n").encode("utf-8")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value", "unit"])
        for k, r in report.results.items():
            w.writerow([k, _fmt_float(r["value"]).strip('"'), r["unit"]])
        return buf.getvalue().encode("utf-8")
    if fmt == "table":
        rows = [(k, _fmt_float(r["value"]).strip('"'), r["unit"]) for k, r in report.results.items()]
        kw = max([len("key")] + [len(r[0]) for r in rows])
        vw = max([len("value")] + [len(r[1]) for r in rows])
        lines = [f"{report.command}  (schema {report.schema_version})", f"{'key':<{kw}}  {'value':>{vw}}  unit"]
        lines.append("-" * len(lines[-1]))
        lines += [f"{k:<{kw}}  {v:>{vw}}  {u}" for k, v, u in rows]
        if report.diagnostics:
            lines.append("")
            lines.append("diagnostics")
            for k in sorted(report.diagnostics):
                lines.append(f"  {k}: {_canonical(report.diagnostics[k])}")
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise ValueError(f"unknown format {fmt!r}")


def inputs_digest(pf: ProblemFile, command: str, params: dict) -> str:
    blob = _canonical({"command": command, "problem": serialize_problem(pf), "params": params})
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# -- subcommands ---------------------------------------------------------------

def _require(value, flag: str):
    if value is None:
        raise ValidationError(flag, "required for this command")
    return value


def cmd_measures(pf: ProblemFile, args, rep: Report) -> None:
    if pf.joint is None:
        raise ValidationError("joint", "missing (required for measures)")
    r = measure_report(pf.joint)
    for name, val in r.as_dict().items():
        rep.add(name, val, r.unit(name))
    audit = chain_rule_audit(pf.joint)
    for label, val, _ in audit.checks:
        if label not in rep.results:
            rep.add(label, val, "sebits" if label != "H_UV" else "bits")
    rep.diagnostics["chain_rules_hold"] = audit.passed


def cmd_capacity(pf: ProblemFile, args, rep: Report) -> None:
    prob = pf.channel_problem()
    res = semantic_capacity(prob, _cfg(args), seed=args.seed)
    rep.add("C_s", res.C_s, "sebits")
    rep.add("C", res.baseline_C, "bits")
    rep.diagnostics.update(
        converged=res.converged,
        iterations=res.iterations,
        p_x=res.p_x.probs.tolist(),
        oracle_value=res.certificate.oracle_value,
        oracle_gap=res.certificate.gap,
    )


def cmd_rd(pf: ProblemFile, args, rep: Report) -> None:
    prob = pf.rd_problem()
    cfg = _cfg(args)
    if args.d_grid:
        grid = _d_grid(args.d_grid)
        curve = rd_curve(prob, grid, cfg, seed=args.seed)
        for (D, R), res in zip(curve.points, curve.results):
            rep.add(f"R_s[D={D:.6f}]", R, "sebits")
            rep.add(f"R[D={D:.6f}]", res.baseline_R, "bits")
        rep.diagnostics.update(
            repaired=curve.repaired,
            converged=all(r.converged for r in curve.results),
        )
        return
    D = _require(args.d, "--d")
    res = semantic_rd(prob, D, cfg, seed=args.seed)
    rep.add("R_s", res.R_s, "sebits")
    rep.add("R_s_raw", res.raw, "sebits")
    rep.add("R", res.baseline_R, "bits")
    rep.add("expected_distortion", res.expected_distortion, "distortion")
    rep.diagnostics.update(
        D=D,
        converged=res.converged,
        oracle_value=res.oracle_value,
        oracle_gap=res.gap,
        test_channel=res.test_channel.matrix.tolist(),
    )


def cmd_aep(pf: ProblemFile, args, rep: Report) -> None:
    sv = pf.source_variable()
    model = SequenceModel(sv, args.n or 100, args.epsilon)
    est = monte_carlo_aep(model, args.trials or 1000, seed=args.seed)
    rep.add("prob_typical", est.prob_typical, "probability")
    rep.add("prob_syn_typical", est.prob_syn_typical, "probability")
    rep.add("prob_sem_typical", est.prob_sem_typical, "probability")
    rep.add("H", model.H, "bits")
    rep.add("Hs", model.Hs, "sebits")
    rep.diagnostics.update(ci95=list(est.ci95), n=model.n, epsilon=model.epsilon, trials=est.trials)


def cmd_simulate_source(pf: ProblemFile, args, rep: Report) -> None:
    sv = pf.source_variable()
    R = _require(args.rate, "--rate")
    exp = SourceCodeExperiment(
        sv, args.n or 500, R, R_syn=args.rate_syn, trials=args.trials or 2000, seed=args.seed, epsilon=args.epsilon
    )
    res = simulate_source_coding(exp)
    rep.add("P_e", res.P_e, "probability")
    rep.add("coverage", res.coverage, "probability")
    rep.add("log2_codebook_size", res.log2_codebook_size, "sebits")
    rep.add("Hs", semantic_entropy(sv), "sebits")
    rep.add("H", entropy(sv.dist), "bits")
    rep.diagnostics.update(ci95=list(res.ci95), n=exp.n, rate=R, rate_syn=exp.R_syn, trials=res.trials, epsilon=exp.epsilon)


def cmd_simulate_channel(pf: ProblemFile, args, rep: Report) -> None:
    prob = pf.channel_problem()
    R = _require(args.rate, "--rate")
    exp = ChannelCodeExperiment(
        prob, args.n or 64, R, trials=args.trials or 500, seed=args.seed,
        R_syn=args.rate_syn, epsilon=args.epsilon, method=args.method,
    )
    res = simulate_channel_coding(exp, _cfg(args))
    rep.add("P_e", res.P_e, "probability")
    rep.add("decoded_semantic_accuracy", res.decoded_semantic_accuracy, "probability")
    rep.add("decoded_syntactic_accuracy", res.decoded_syntactic_accuracy, "probability")
    rep.diagnostics.update(
        ci95=list(res.ci95), n=exp.n, rate=R, trials=res.trials, epsilon=exp.epsilon,
        method=res.method, p_x=res.p_x.probs.tolist(),
    )


HANDLERS = {
    "measures": cmd_measures,
    "capacity": cmd_capacity,
    "rd": cmd_rd,
    "aep": cmd_aep,
    "simulate-source": cmd_simulate_source,
    "simulate-channel": cmd_simulate_channel,
}


def _cfg(args) -> SolverConfig:
    try:
        return SolverConfig(tolerance=args.tol, max_iterations=args.max_iter)
    except ValueError as e:
        raise ValidationError("--tol/--max-iter", str(e)) from None


def _d_grid(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ValidationError("--d-grid", "expected comma-separated numbers") from None
    if not vals:
        raise ValidationError("--d-grid", "empty grid")
    return vals


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are input errors (exit 1), not solver failures
        raise _UsageError(message)


def _uint64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--input", required=True, metavar="PATH", help="problem file (JSON)")
    common.add_argument("--output", default="json", choices=("json", "csv", "table"))
    common.add_argument("--seed", type=_uint64, default=42)
    common.add_argument("--epsilon", type=float, default=0.1)
    common.add_argument("--n", type=int, default=None, help="block length")
    common.add_argument("--trials", type=int, default=None)
    common.add_argument("--tol", type=float, default=1e-9)
    common.add_argument("--max-iter", type=int, default=10000)
    common.add_argument("--d", type=float, default=None, help="distortion target")
    common.add_argument("--d-grid", default=None, help="comma-separated distortion targets")
    common.add_argument("--rate", type=float, default=None, help="code rate R (sebits/symbol)")
    common.add_argument("--rate-syn", type=float, default=0.0, help="synonymous-set rate")
    common.add_argument("--method", default="auto", choices=("auto", "codebook", "ensemble"))
    parser = _Parser(prog="semantic-info", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout if stdout is not None else sys.stdout.buffer
    stderr = stderr if stderr is not None else sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as e:
        print(f"usage error: {e}", file=stderr)
        return 1
    try:
        pf = parse_problem_file(args.input)
        params = {
            k: v for k, v in sorted(vars(args).items()) if k not in ("input", "output", "command")
        }
        rep = Report(args.command, inputs_digest(pf, args.command, params))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", NonConvergence)
            HANDLERS[args.command](pf, args, rep)
        if any(issubclass(w.category, NonConvergence) for w in caught):
            rep.diagnostics["converged"] = False
    except (ParseError, ValidationError, ModelError, ValueError, TooLargeToEnumerate, BudgetExceeded) as e:
        print(f"error: {e}", file=stderr)
        return 1
    stdout.write(emit_report(rep, args.output))
    stdout.flush()
    return 0 if rep.converged else 2


def main() -> None:
    sys.exit(run())
