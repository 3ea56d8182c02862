"""Reproduce the bias / coverage / power tables for the three missingness mechanisms.

Example (full scale is slow; the defaults are desk scale):
    python scripts/run_study.py --mechanism MNAR --prop 0.2 --reps 200 --out mnar.json
"""
import argparse
import json
import sys

from medboot import report
from medboot.bootstrap import default_workers
from medboot.simlab import StudyConfig, run_study


def main(argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("--mechanism", default="all", help="MCAR, MAR, MNAR or all")
    p.add_argument("--prop", type=float, nargs="+", default=[0.1, 0.2, 0.4])
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--nboot", type=int, default=400)
    p.add_argument("--nimpute", type=int, default=30)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--workers", type=int, default=default_workers())
    p.add_argument("--out", default=None, help="write all tables as one JSON document")
    args = p.parse_args(argv)

    mechs = ["MCAR", "MAR", "MNAR"] if args.mechanism.lower() == "all" else [args.mechanism.upper()]
    results = []
    for mech in mechs:
        for q in args.prop:
            for use_aux in (False, True):
                cfg = StudyConfig(N=args.n, mechanism=mech, proportion=q, use_aux=use_aux,
                                  R=args.reps, B=args.nboot, K=args.nimpute, seed=args.seed)
                rep = run_study(cfg, workers=args.workers,
                                progress=lambda i, n: print(f"\r{mech} q={q} aux={use_aux} {i}/{n}",
                                                            end="", file=sys.stderr))
                print(file=sys.stderr)
                table = report.study_table(rep, include_timing=True)
                table.title = f"{mech}, {q:.0%} missing, {'with' if use_aux else 'without'} auxiliaries"
                print(report.to_text(table))
                results.append(table.to_dict())
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(results, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
