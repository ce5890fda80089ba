"""Probability of synonymous typicality versus block length.

    python3 scripts/aep_sweep.py tests/fixtures/example1.json --epsilon 0.05
"""
import argparse
import csv
import sys

from semantic_info.cli import parse_problem_file
from semantic_info.typicality import SequenceModel, monte_carlo_aep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("problem")
    ap.add_argument("--epsilon", type=float, default=0.05)
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--n", type=int, nargs="+", default=[10, 50, 100, 200, 500, 1000, 2000])
    args = ap.parse_args()

    sv = parse_problem_file(args.problem).source_variable()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["n", "prob_typical", "ci_low", "ci_high", "prob_syn_typical", "prob_sem_typical"])
    for n in args.n:
        est = monte_carlo_aep(SequenceModel(sv, n, args.epsilon), args.trials, seed=args.seed)
        w.writerow([n, f"{est.prob_typical:.4f}", f"{est.ci95[0]:.4f}", f"{est.ci95[1]:.4f}",
                    f"{est.prob_syn_typical:.4f}", f"{est.prob_sem_typical:.4f}"])


if __name__ == "__main__":
    main()
