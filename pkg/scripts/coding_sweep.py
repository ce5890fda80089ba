"""Error probability versus rate for source coding and channel coding.

    python3 scripts/coding_sweep.py source tests/fixtures/example1.json --n 500
    python3 scripts/coding_sweep.py channel tests/fixtures/bsc.json --n 64 --epsilon 0.25
"""
import argparse
import csv
import sys

import numpy as np

from semantic_info.cli import parse_problem_file
from semantic_info.codingsim import (
    ChannelCodeExperiment,
    SourceCodeExperiment,
    simulate_channel_coding,
    simulate_source_coding,
)
from semantic_info.measures import semantic_entropy
from semantic_info.semlimits import semantic_capacity


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("kind", choices=("source", "channel"))
    ap.add_argument("problem")
    ap.add_argument("--n", type=int, default=None)
    ap.add_argument("--trials", type=int, default=None)
    ap.add_argument("--epsilon", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--offsets", type=float, nargs="+", default=list(np.round(np.arange(-0.3, 0.31, 0.1), 2)),
                    help="rates relative to H_s (source) or C_s (channel)")
    args = ap.parse_args()
    pf = parse_problem_file(args.problem)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["rate", "offset", "P_e", "ci_low", "ci_high"])

    if args.kind == "source":
        sv = pf.source_variable()
        ref = semantic_entropy(sv)
        for off in args.offsets:
            R = ref + off
            if R <= 0:
                continue
            res = simulate_source_coding(SourceCodeExperiment(
                sv, args.n or 500, R, trials=args.trials or 2000, seed=args.seed, epsilon=args.epsilon))
            w.writerow([f"{R:.4f}", off, f"{res.P_e:.4f}", f"{res.ci95[0]:.4f}", f"{res.ci95[1]:.4f}"])
    else:
        prob = pf.channel_problem()
        cap = semantic_capacity(prob)
        print(f"# C_s = {cap.C_s:.4f} sebits, C = {cap.baseline_C:.4f} bits", file=sys.stderr)
        for off in args.offsets:
            R = cap.C_s + off
            if R <= 0:
                continue
            res = simulate_channel_coding(ChannelCodeExperiment(
                prob, args.n or 64, R, trials=args.trials or 500, seed=args.seed,
                epsilon=args.epsilon, p_x=cap.p_x))
            w.writerow([f"{R:.4f}", off, f"{res.P_e:.4f}", f"{res.ci95[0]:.4f}", f"{res.ci95[1]:.4f}"])


if __name__ == "__main__":
    main()
