"""Command line entry point: ``robmiss run|calibrate|truth|diagnostics``."""

import argparse
import sys
from dataclasses import replace

import numpy as np

from ..simulation import GAMMA_LEVELS, XI_LEVELS, ScenarioConfig, generate_replicate, true_beta, write_dataset
from .config import ConfigError, load_config
from .diagnostics import emit_weight_diagnostics, read_dataset
from .roster import default_tuning, parse_label


def _scenario_args(p):
    p.add_argument("--xi", default="moderate", choices=sorted(XI_LEVELS))
    p.add_argument("--gamma", default="moderate", choices=sorted(GAMMA_LEVELS))
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)


def _grid(spec):
    """'lo:hi:step' or comma separated values."""
    if ":" in spec:
        lo, hi, step = (float(v) for v in spec.split(":"))
        return [round(v, 10) for v in np.arange(lo, hi + step / 2, step)]
    return [float(v) for v in spec.split(",")]


def cmd_run(args):
    from .runner import run_experiment

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, scenario=replace(cfg.scenario, seed=args.seed))
    rows = run_experiment(cfg, out_dir=args.out, reps=args.reps, threads=args.threads)
    print(f"{'estimator':16s} {'bias_mu':>8s} {'sd_mu':>8s} {'bias_sd':>8s} {'sd_sd':>8s}  (x10)  n")
    for r in rows:
        s = r.scaled()
        print(f"{r.label:16s} {s['bias_mu']:8.3f} {s['sd_mu']:8.3f} "
              f"{s['bias_sigma']:8.3f} {s['sd_sigma']:8.3f}  {r.n_converged}")
    return 0


def cmd_calibrate(args):
    from .calibrate import calibrate_tuning

    sc = ScenarioConfig(xi_level=args.xi, gamma_level=args.gamma, n=args.n, seed=args.seed)
    grid = {"mu": _grid(args.grid_mu), "sigma": _grid(args.grid_sigma or args.grid_mu)}
    res = calibrate_tuning(sc, args.family, grid, args.reps, threads=args.threads)
    for name, curve in (("c_mu", res.curve_mu), ("c_sigma", res.curve_sigma)):
        print(name, " ".join(f"{c:g}:{e:.3f}" for c, e in curve.items()))
    print(f"{args.family}: c_mu={res.c_mu:g} (efficiency {res.efficiency_mu:.3f}) "
          f"c_sigma={res.c_sigma:g} (efficiency {res.efficiency_sigma:.3f})")
    for w in res.warnings:
        print("warning:", w, file=sys.stderr)
    return 0


def cmd_truth(args):
    xis = [args.xi] if args.xi else list(XI_LEVELS)
    gammas = [args.gamma] if args.gamma else list(GAMMA_LEVELS)
    print("gamma     xi        mu0        sigma0")
    for g in gammas:
        for x in xis:
            mu, sd = true_beta(ScenarioConfig(xi_level=x, gamma_level=g))
            print(f"{g:9s} {x:9s} {mu:.6f}  {sd:.6f}")
    return 0


def cmd_diagnostics(args):
    entry = parse_label(args.estimator)
    if args.data:
        X, y = read_dataset(args.data)
    else:
        sc = ScenarioConfig(xi_level=args.xi, gamma_level=args.gamma, n=args.n, seed=args.seed,
                            contamination=args.contamination, replicate_index=args.replicate)
        d = generate_replicate(sc)
        if args.dump:
            write_dataset(d, args.dump)
        X, y = d.covariates(), d.observed
    est = entry.spec.estimator(default_tuning(args.gamma, args.xi)).fit(X, y)
    emit_weight_diagnostics(est.estimate_, args.out)
    print(f"{entry.label}: mu={est.mu_:.6f} sigma={est.sigma_:.6f}; weights written to {args.out}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="robmiss", description="Robust location-scale estimation with missing outcomes.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a simulation study from a YAML config")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--reps", type=int)
    r.add_argument("--out")
    r.add_argument("--threads", type=int)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("calibrate", help="calibrate tuning constants to 95%% efficiency")
    _scenario_args(c)
    c.add_argument("--family", choices=("raipw", "ror"), default="raipw")
    c.add_argument("--grid-mu", default="3.5:4.3:0.1", help="lo:hi:step or comma list")
    c.add_argument("--grid-sigma", help="defaults to --grid-mu")
    c.add_argument("--reps", type=int, default=1000)
    c.add_argument("--threads", type=int, default=1)
    c.set_defaults(func=cmd_calibrate)

    t = sub.add_parser("truth", help="print true (mu0, sigma0) per scenario")
    t.add_argument("--xi", choices=sorted(XI_LEVELS))
    t.add_argument("--gamma", choices=sorted(GAMMA_LEVELS))
    t.set_defaults(func=cmd_truth)

    d = sub.add_parser("diagnostics", help="dump double-weighting diagnostics for one dataset")
    _scenario_args(d)
    d.add_argument("--contamination", default="clean", choices=("clean", "c_asym", "c_sym", "c_hidden"))
    d.add_argument("--replicate", type=int, default=0)
    d.add_argument("--estimator", default="RAIPW(X,XV)")
    d.add_argument("--data", help="read a dataset dump instead of simulating")
    d.add_argument("--dump", help="also write the simulated dataset here")
    d.add_argument("--out", default="weights.csv")
    d.set_defaults(func=cmd_diagnostics)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
