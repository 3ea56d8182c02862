"""Relative deviance of the ab estimate and SE as the number of imputations grows.

Writes one CSV per missing proportion with columns K, estimate, se, dev_estimate, dev_se,
ready for plotting deviance against K.
"""
import argparse
from pathlib import Path

from medboot import report
from medboot.bootstrap import default_workers
from medboot.simlab import StudyConfig, imputation_sensitivity


def main(argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("--prop", type=float, nargs="+", default=[0.1, 0.2, 0.4])
    p.add_argument("--mechanism", default="MNAR")
    p.add_argument("--k-grid", type=int, nargs="+", default=list(range(10, 101, 10)))
    p.add_argument("--k-ref", type=int, default=100)
    p.add_argument("--nboot", type=int, default=1000)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--workers", type=int, default=default_workers())
    p.add_argument("--outdir", default="sensitivity")
    args = p.parse_args(argv)

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for q in args.prop:
        cfg = StudyConfig(N=100, mechanism=args.mechanism, proportion=q, use_aux=True,
                          B=args.nboot, K=args.k_ref, seed=args.seed)
        rows = imputation_sensitivity(cfg, args.k_grid, args.k_ref, workers=args.workers)
        table = report.sensitivity_table(rows, {"prop": q})
        print(f"{q:.0%} missing")
        print(report.to_text(table))
        (out / f"deviance_q{int(round(q * 100)):02d}.csv").write_text(report.to_csv(table))


if __name__ == "__main__":
    main()
