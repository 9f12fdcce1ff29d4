"""Command line entry point: ``obs-thermo {closure,run,check}``.

Exit codes: 0 success, 1 failed checks, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .checks import formula_check, phase_checks
from .errors import NumericalError, RankDeficientError, ValidationError
from .experiment import ExperimentConfig, build_system, run_experiment
from .lie import close_algebra, observability_space
from .models import dim_formula

EXIT_OK, EXIT_CHECKS, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3
RANK_TOL_ENV = "OBS_THERMO_RANK_TOL"


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    env = os.environ.get(RANK_TOL_ENV)
    if env is not None:
        try:
            cfg.rank_tol = float(env)
        except ValueError:
            raise ValidationError(f"{RANK_TOL_ENV}={env!r} is not a number") from None
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    cfg.validate()
    return cfg


def cmd_closure(args) -> int:
    cfg = load_config(args)
    sys_ = build_system(cfg)
    lie, lrep = close_algebra([sys_.drift, *sys_.controls], cfg.rank_tol)
    _, vrep = observability_space(lie, sys_.observable, cfg.rank_tol,
                                  max_depth=cfg.observability_max_depth)
    out = {"lie": lrep.as_dict(), "observability": vrep.as_dict()}
    if cfg.system.kind == "central_spin" and len(set(cfg.system.spec().couplings)) == 1:
        out["dim_formula"] = dim_formula(cfg.system.n_bath)
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args)
    out = Path(args.out) if args.out else cfg.resolve(cfg.outputs.get("dir", "out"))
    res = run_experiment(cfg, out)
    s = res.summary()
    print(f"dim L = {s['dim_L']} (depth {s['depth_L']}), dim V = {s['dim_V']} (depth {s['depth_V']})")
    for p, ph in enumerate(s["phases"]):
        print(f"phase {p} ({ph['kind']}): Q = {ph['Q']:.6f}, W = {ph['W']:.6f}, dS = {ph['dS']}")
    if s["J_terminal"] is not None:
        print(f"J_terminal = {s['J_terminal']:.10f} (seed {s['seed']})")
    print(f"outputs written to {out}")
    return EXIT_OK


def cmd_check(args) -> int:
    cfg = load_config(args)
    res = run_experiment(cfg)
    results = []
    if cfg.system.kind == "central_spin" and len(set(cfg.system.spec().couplings)) == 1:
        results.append(formula_check(cfg.system.n_bath))
    if args.slow:
        results.append(formula_check(4))
    for p, ph in enumerate(res.phases):
        results += phase_checks(f"phase {p}", res.system, res.basis, ph.schedule, ph.states,
                                ph.trajectory)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECKS


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="obs-thermo", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn, hlp in (("closure", cmd_closure, "print closure reports for a config"),
                          ("run", cmd_run, "run the full experiment and write outputs"),
                          ("check", cmd_check, "run the invariant suite on a config")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.set_defaults(func=fn)
        if name == "run":
            p.add_argument("--out", default=None, help="output directory")
        if name == "check":
            p.add_argument("--slow", action="store_true", help="include the N=4 closure check")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, RankDeficientError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
