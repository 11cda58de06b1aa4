"""Command line entry point ``gqr``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .additive import build_basis, empirical_domains, fit_additive
from .design import GroupedDesign, GroupPartition
from .diagnostics import ConeSampleConfig, cone_constant_c1, estimate_restricted_eigs, omega0_check
from .io import read_groups, read_table, with_intercept, write_json
from .objective import PenaltySpec
from .simulation import ESTIMATORS, Model1Config, Model2Config, run_experiment
from .solver import SolverOptions, fit, fit_l1, fit_unpenalized
from .tuning import PivotConfig, select_lambda


def _load(args):
    names, Z, y = read_table(args.data, args.response)
    X = with_intercept(Z)
    part = read_groups(args.groups, Z.shape[1]) if args.groups else GroupPartition.singletons(X.shape[1])
    return names, X, y, part


def _solver_opts(args) -> SolverOptions:
    return SolverOptions(max_iter=args.max_iter, rel_tol=args.rel_tol)


def cmd_fit(args):
    names, X, y, part = _load(args)
    design = GroupedDesign(X, part)
    opts = _solver_opts(args)
    if args.unpenalized:
        qf = fit_unpenalized(design, y, args.tau, opts)
    elif args.lam is None:
        raise SystemExit("--lambda is required unless --unpenalized is given")
    elif args.l1:
        qf = fit_l1(design, y, args.tau, args.lam, opts)
    else:
        qf = fit(design, y, args.tau, PenaltySpec(args.lam), opts)
    out = qf.summary()
    out["columns"] = ["(intercept)"] + names
    out["options"] = dataclasses.asdict(opts)
    write_json(args.out, out)
    return out


def cmd_tune(args):
    _, X, _, part = _load(args)
    cfg = PivotConfig(tau=args.tau, theta=args.theta, c=args.c, n_sim=args.nsim, seed=args.seed)
    tr = select_lambda(GroupedDesign(X, part), cfg)
    out = tr.summary()
    if args.save_draws:
        out["draws"] = tr.draws.tolist()
    write_json(args.out, out)
    return out


def cmd_additive(args):
    names, Z, y = read_table(args.data, args.response)
    family = "cubic_bspline" if args.basis in ("bspline", "cubic_bspline") else "fourier"
    size = args.knots if family == "cubic_bspline" else args.m
    basis = build_basis(family, size, empirical_domains(Z))
    cfg = PivotConfig(tau=args.tau, theta=args.theta, c=args.c, n_sim=args.nsim, seed=args.seed)
    model = fit_additive(Z, y, args.tau, basis, cfg, _solver_opts(args))
    out = model.to_dict()
    out["covariates"] = names
    out["selected_names"] = [names[k] for k in model.selected_covariates]
    write_json(args.out, out)
    return out


def cmd_simulate(args):
    if args.model == 1:
        cfg = Model1Config(n=args.n or 200, tau=args.tau, case=args.case, n_reps=args.reps,
                           seed=args.seed, n_sim=args.nsim)
    else:
        cfg = Model2Config(n=args.n or 400, d=args.d, tau=args.tau, n_reps=args.reps,
                           seed=args.seed, n_sim=args.nsim, n_mc=args.nmc)
    report = run_experiment(cfg, args.estimators.split(","), args.out, _solver_opts(args))
    for row in report.table_rows():
        print(",".join(f"{v:.4g}" if isinstance(v, float) else str(v) for v in row.values()))
    return report


def cmd_diag(args):
    _, X, _, part = _load(args)
    design = GroupedDesign(X, part)
    active = [int(s) for s in args.active.split(",") if s.strip()] if args.active else [1]
    if 1 not in active:
        active = [1] + active
    holds, dev = omega0_check(design)
    cfg = ConeSampleConfig(partition=part, S_bar=active, c0=args.c0, n_samples=args.samples, seed=args.seed)
    phi_min, phi_max = estimate_restricted_eigs(X.T @ X / X.shape[0], cfg)
    out = {"omega0_holds": holds, "omega0_deviation": dev, "c0": args.c0, "c1": cone_constant_c1(args.c0),
           "active_groups": list(cfg.S_bar), "phi_min_estimate": phi_min, "phi_max_estimate": phi_max,
           "n_samples": args.samples, "note": "sampled cone estimates: phi_min is an upper and "
                                               "phi_max a lower estimate"}
    write_json(args.out, out)
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gqr", description="Group-Lasso quantile regression.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def data_args(p, groups=True):
        p.add_argument("--data", required=True, help="CSV file with a header row")
        p.add_argument("--response", default="y", help="name of the response column")
        if groups:
            p.add_argument("--groups", help="group label per covariate column (default: singletons)")

    def solver_args(p):
        p.add_argument("--max-iter", type=int, default=20000)
        p.add_argument("--rel-tol", type=float, default=1e-6)

    p = sub.add_parser("fit", help="fit at a given lambda")
    data_args(p)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--l1", action="store_true", help="l1 penalty (singleton groups)")
    p.add_argument("--unpenalized", action="store_true", help="lambda = 0")
    p.add_argument("--out", required=True)
    solver_args(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("tune", help="simulate the pivot and choose lambda")
    data_args(p)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--theta", type=float, default=0.1)
    p.add_argument("--c", type=float, default=1.1)
    p.add_argument("--nsim", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--save-draws", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("additive", help="sparse additive quantile regression")
    data_args(p, groups=False)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--basis", choices=("bspline", "cubic_bspline", "fourier"), default="bspline")
    p.add_argument("--knots", type=int, default=4)
    p.add_argument("--m", type=int, default=6, help="Fourier basis size")
    p.add_argument("--theta", type=float, default=0.2)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--nsim", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    solver_args(p)
    p.set_defaults(func=cmd_additive)

    p = sub.add_parser("simulate", help="run a simulation study")
    p.add_argument("--model", type=int, choices=(1, 2), default=1)
    p.add_argument("--case", type=int, choices=(1, 2), default=1)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int, default=100)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--nsim", type=int, default=2000)
    p.add_argument("--nmc", type=int, default=10000)
    p.add_argument("--estimators", default=",".join(ESTIMATORS))
    p.add_argument("--out", required=True, help="output directory")
    solver_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("diag", help="heuristic design diagnostics")
    data_args(p)
    p.add_argument("--c0", type=float, default=4.0)
    p.add_argument("--active", help="comma-separated 1-based active groups (1 is always added)")
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diag)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
