"""Command line entry point.

    malliavin-sgd run --config recipes/d10_basket.ini --seed 1 --out out/d10
    malliavin-sgd oracle bs --x0 100 --k 100 --sigma 0.2 --t 2
    malliavin-sgd oracle maxcall --x0 100 --k 100 --sigma 0.2 --t 1 --d 100
    malliavin-sgd estimate --method wa-mc --d 1 --K 100 --n 4 --paths 1000000
    malliavin-sgd recipes
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import UsageError
from .estimate import (
    estimate_em_mc,
    estimate_exact_gbm_mc,
    estimate_wa_mc,
    estimate_wa_sgd,
)
from .experiment.config import load_config, parse_rates
from .experiment.report import emit
from .experiment.study import run_study
from .model import black_scholes_model, make_payoff
from .optimize import TrainConfig, d10_schedule
from .oracle import bs_call, max_call_iid


def _order(s):
    try:
        return int(s)
    except ValueError:
        return s


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="malliavin-sgd", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a convergence study from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, help="root seed (overrides the config)")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--trials", type=int, help="trials per cell (overrides the config)")
    run.add_argument("--methods", help="comma-separated subset of the config's methods")
    run.add_argument("--no-plot", action="store_true", help="skip the SVG figure")
    run.add_argument("--workers", type=int, default=1, help="process pool size for study cells")

    orc = sub.add_parser("oracle", help="closed-form / quadrature reference prices")
    osub = orc.add_subparsers(dest="kind", required=True)
    bs = osub.add_parser("bs", help="single-asset call")
    mx = osub.add_parser("maxcall", help="call on the maximum of d i.i.d. assets")
    for q in (bs, mx):
        q.add_argument("--x0", type=float, required=True)
        q.add_argument("--k", type=float, required=True)
        q.add_argument("--sigma", type=float, required=True)
        q.add_argument("--t", type=float, required=True)
    mx.add_argument("--d", type=int, required=True)

    est = sub.add_parser("estimate", help="one estimate of E[f(X_T)]")
    est.add_argument("--method", required=True, choices=["wa-sgd", "wa-mc", "em-mc", "exact-mc"])
    est.add_argument("--d", type=int, default=1)
    est.add_argument("--sigma", type=float, default=0.2)
    est.add_argument("--T", type=float, default=2.0)
    est.add_argument("--x0", type=float, default=100.0)
    est.add_argument("--payoff", default="basket_call")
    est.add_argument("--K", type=float, default=100.0)
    est.add_argument("--n", type=int, default=4)
    est.add_argument("--m", type=_order, default=2)
    est.add_argument("--paths", type=int, default=1_000_000)
    est.add_argument("--M", type=int, default=1024)
    est.add_argument("--J", type=int, default=4000)
    est.add_argument("--optimizer", default="adam", choices=["adam", "sgd"])
    est.add_argument("--schedule", help="e.g. '600:0.1,1200:0.01,4000:0.001' "
                     "(default: the d=10 band for --K)")
    est.add_argument("--theta0", type=float, default=0.0)
    est.add_argument("--warm-start", action="store_true")
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--trial", type=int, default=0)
    est.add_argument("--trace", help="write the per-iteration theta trace to this CSV (wa-sgd)")

    sub.add_parser("recipes", help="validate the reproduction recipes")
    return p


def _print_rows(header, rows):
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


def cmd_run(args):
    cfg = load_config(args.config)
    names = [s.strip() for s in args.methods.split(",")] if args.methods else None
    cfg = cfg.select(names, trials=args.trials, seed=args.seed)
    report = run_study(cfg, workers=args.workers)
    out = Path(args.out)
    written = emit(report, "csv", out)
    written += emit(report, "json", out / "run.json")
    if not args.no_plot:
        written += emit(report, "svg", out / "convergence.svg")
    with open(out / "fits.csv") as fh:
        sys.stdout.write(fh.read())
    for f in report.failures:
        print(f"FAILED {f}", file=sys.stderr)
    return 0 if report.complete else 3


def cmd_oracle(args):
    if args.kind == "bs":
        o = bs_call(args.x0, args.k, args.sigma, args.t)
    else:
        o = max_call_iid(args.x0, args.k, args.sigma, args.t, args.d)
    bound = "" if o.error_bound is None else repr(o.error_bound)
    _print_rows(["method", "value", "error_bound"], [[o.method, repr(o.value), bound]])
    return 0


def cmd_estimate(args):
    model = black_scholes_model(args.d, args.sigma)
    x0 = np.full(args.d, args.x0)
    payoff = make_payoff(args.payoff, args.K)
    if args.method == "wa-mc":
        r = estimate_wa_mc(model, x0, payoff, args.T, args.n, args.m, args.paths, args.seed, args.trial)
    elif args.method == "em-mc":
        r = estimate_em_mc(model, x0, payoff, args.T, args.n, args.paths, args.seed, args.trial)
    elif args.method == "exact-mc":
        r = estimate_exact_gbm_mc(model, x0, payoff, args.T, args.paths, args.seed, args.trial)
    else:
        schedule = parse_rates(args.schedule) if args.schedule else d10_schedule(args.K)
        train = TrainConfig(
            M=args.M, J=args.J, n=args.n, m=args.m, optimizer=args.optimizer, schedule=schedule,
            theta0=args.theta0, warm_start=args.warm_start, record_trace=bool(args.trace),
        )
        r = estimate_wa_sgd(model, x0, payoff, args.T, args.n, args.m, train, args.seed, args.trial)
        if args.trace:
            with open(args.trace, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["iteration", "theta"])
                w.writerows([j + 1, repr(float(t))] for j, t in enumerate(r.settings["trace"]))
    se = "" if r.std_err is None else repr(r.std_err)
    _print_rows(["method", "value", "std_err", "seed"], [[r.method, repr(r.value), se, args.seed]])
    return 0


def cmd_recipes(args):
    from .recipes import validate_recipes

    rep = validate_recipes()
    for r in rep.recipes:
        print(f"{r.name}: acceptance {','.join(r.acceptance)} ({r.runtime})")
    for p in rep.problems:
        print(f"PROBLEM {p}", file=sys.stderr)
    return 0 if rep.ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": cmd_run, "oracle": cmd_oracle, "estimate": cmd_estimate, "recipes": cmd_recipes}
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
