"""Command-line front end: ``medboot analyze | simulate | sensitivity``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

from . import report
from .bootstrap import analyze, default_workers
from .dataset import AUX, M, X, Y, load_dataset
from .errors import MedbootError, TooFewReplicates
from .imputer import ImputationConfig
from .simlab import GenParams, StudyConfig, imputation_sensitivity, run_study

log = logging.getLogger("medboot")


def parse_int_list(text: str) -> list:
    """'10,20,30' or '10,20,...,100' (arithmetic continuation)."""
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if "..." in parts:
        i = parts.index("...")
        if i < 2 or i != len(parts) - 2:
            raise argparse.ArgumentTypeError("use 'a,b,...,z' for a stepped range")
        head = [int(p) for p in parts[:i]]
        step, last = head[1] - head[0], int(parts[-1])
        if step <= 0:
            raise argparse.ArgumentTypeError("range step must be positive")
        return list(range(head[0], last + 1, step))
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from None


def _missing_code(text: str):
    if text.lower() in ("blank", ""):
        return "blank"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"missing code must be numeric or 'blank': {text!r}") from None


def _seed_default():
    env = os.environ.get("MEDBOOT_SEED")
    return int(env) if env not in (None, "") else 0


def _common(p: argparse.ArgumentParser, nimpute: int, nboot: int) -> None:
    p.add_argument("--nimpute", type=int, default=nimpute, help="imputations per dataset (K)")
    p.add_argument("--nboot", type=int, default=nboot, help="bootstrap samples (B)")
    p.add_argument("--level", type=float, default=0.95, help="confidence level")
    p.add_argument("--seed", type=int, default=None, help="master seed (falls back to $MEDBOOT_SEED, then 0)")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: available CPUs)")
    p.add_argument("--burn-in", type=int, default=200)
    p.add_argument("--thin", type=int, default=100)
    p.add_argument("--format", choices=("table", "csv", "json"), default="table")
    p.add_argument("--output", default=None, help="write here instead of stdout")


def _study_flags(p: argparse.ArgumentParser, mechanism: str, use_aux: bool) -> None:
    p.add_argument("--mechanism", type=str.upper, choices=("MCAR", "MAR", "MNAR"), default=mechanism)
    p.add_argument("--prop", type=float, default=0.1, help="missing proportion in M and in Y")
    p.add_argument("--use-aux", action=argparse.BooleanOptionalAction, default=use_aux)
    p.add_argument("--n", type=int, default=100, help="sample size per replication")
    p.add_argument("-a", type=float, default=0.39, dest="path_a")
    p.add_argument("-b", type=float, default=0.39, dest="path_b")
    p.add_argument("--c-prime", type=float, default=0.0)
    p.add_argument("--aux-corr", type=float, default=0.5)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="medboot", description="Mediation analysis with missing data "
                                     "via multiple imputation nested in the bootstrap.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="analyze a CSV file")
    pa.add_argument("--data", required=True)
    pa.add_argument("--x", required=True)
    pa.add_argument("--m", required=True)
    pa.add_argument("--y", required=True)
    pa.add_argument("--aux", default="", help="comma-separated auxiliary columns")
    pa.add_argument("--missing-code", type=_missing_code, default="blank")
    _common(pa, nimpute=100, nboot=1000)

    ps = sub.add_parser("simulate", help="run a Monte Carlo study")
    _study_flags(ps, "MCAR", False)
    ps.add_argument("--reps", type=int, default=1000)
    ps.add_argument("--timing", action="store_true", help="include wall time in the report")
    _common(ps, nimpute=100, nboot=1000)

    pn = sub.add_parser("sensitivity", help="effect of the number of imputations")
    _study_flags(pn, "MNAR", True)
    pn.add_argument("--k-grid", type=parse_int_list, default=list(range(10, 101, 10)))
    pn.add_argument("--k-ref", type=int, default=100)
    pn.add_argument("--replication", type=int, default=0, help="which simulated dataset to use")
    _common(pn, nimpute=100, nboot=1000)
    return parser


def _validate(args) -> None:
    if not 0 < args.level < 1:
        raise ValueError(f"--level must lie in (0, 1), got {args.level}")
    if args.nimpute < 1:
        raise ValueError("--nimpute must be >= 1")
    if args.nboot < 2:
        raise TooFewReplicates(f"--nboot must be at least 2, got {args.nboot}")
    if args.workers is not None and args.workers < 1:
        raise ValueError("--workers must be >= 1")
    if hasattr(args, "prop") and not 0 <= args.prop < 1:
        raise ValueError(f"--prop must lie in [0, 1), got {args.prop}")


def _imputation_cfg(args) -> ImputationConfig:
    return ImputationConfig(n_imputations=args.nimpute, burn_in=args.burn_in, thin=args.thin)


def _study_cfg(args, R: int) -> StudyConfig:
    gen = GenParams(a=args.path_a, b=args.path_b, c_prime=args.c_prime, aux_corr=args.aux_corr)
    return StudyConfig(gen=gen, N=args.n, mechanism=args.mechanism, proportion=args.prop,
                       use_aux=args.use_aux, R=R, B=args.nboot, K=args.nimpute, level=args.level,
                       seed=args.seed, imputation=_imputation_cfg(args))


def run_analyze(args) -> report.Table:
    roles = {args.x: X, args.m: M, args.y: Y}
    for name in filter(None, (s.strip() for s in args.aux.split(","))):
        if name in roles:
            raise ValueError(f"column {name!r} given two roles")
        roles[name] = AUX
    if len({args.x, args.m, args.y}) < 3:
        raise ValueError("--x, --m and --y must name different columns")
    ds = load_dataset(args.data, roles, args.missing_code)
    rep = analyze(ds, args.nboot, args.nimpute, args.level, args.seed,
                  cfg=_imputation_cfg(args), workers=args.workers)
    if rep.dropped:
        log.warning("%d of %d bootstrap replicates dropped after retries", rep.dropped, rep.b_requested)
    meta = report.dataset_meta(ds)
    meta.update(seed=args.seed, burn_in=args.burn_in, thin=args.thin)
    return report.analysis_table(rep, meta)


def run_simulate(args) -> report.Table:
    if args.reps < 1:
        raise ValueError("--reps must be >= 1")
    cfg = _study_cfg(args, args.reps)
    rep = run_study(cfg, workers=args.workers)
    if rep.n_failed:
        log.warning("%d of %d replications failed", rep.n_failed, cfg.R)
    return report.study_table(rep, include_timing=args.timing)


def run_sensitivity(args) -> report.Table:
    if args.k_ref < 1 or not args.k_grid or min(args.k_grid) < 1:
        raise ValueError("--k-ref and every --k-grid entry must be >= 1")
    cfg = replace(_study_cfg(args, 1), K=args.k_ref)
    rows = imputation_sensitivity(cfg, args.k_grid, args.k_ref, replication=args.replication,
                                  workers=args.workers)
    meta = {"k_ref": args.k_ref, "mechanism": cfg.mechanism, "prop": cfg.proportion,
            "use_aux": cfg.use_aux, "n": cfg.N, "nboot": cfg.B, "seed": cfg.seed,
            "replication": args.replication}
    return report.sensitivity_table(rows, meta)


COMMANDS = {"analyze": run_analyze, "simulate": run_simulate, "sensitivity": run_sensitivity}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="medboot: %(levelname)s: %(message)s")
    if args.seed is None:
        args.seed = _seed_default()
    if args.workers is None:
        args.workers = default_workers()
    try:
        _validate(args)
        table = COMMANDS[args.command](args)
    except (MedbootError, ValueError) as exc:
        print(f"medboot: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    text = report.emit(table, args.format)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
