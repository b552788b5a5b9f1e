"""Command-line front end.

Subcommands: fit, weights, path, synth, reduce-sat, enumerate-invariant,
verify-parsimony, rate-exp.  Reports are versioned JSON; index sets in
reports are 1-based, matching the x1..xd column naming.  Exit codes:
0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from .dataset import load_dataset_dir, read_environment_csv, write_environment_csv
from .exactalg import SingularMatrixError
from .moments import EXACT, EnvMomentSet, moments_from_samples
from .pipeline import GridConfig, igr_fit, rate_experiment
from .scm import EXAMPLE_NAMES, make_example, population_moments, random_scm, sample
from .solver import IndefiniteMatrixError, solution_path, solve
from .weights import SQRT, SQUARED, weight_table
from .lab import (
    LisInstance,
    enumerate_invariant_sets,
    parse_dimacs,
    reduce_3sat,
    sat_brute_force,
)

SCHEMA_VERSION = 1


def _emit(report: dict, out: str | None) -> None:
    report = {"schema_version": SCHEMA_VERSION, **report}
    text = json.dumps(report, indent=2, sort_keys=False)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _float_grid(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; use comma-separated numbers")


def _one_based(sets) -> list[list[int]]:
    return [[j + 1 for j in s] for s in sets]


def _frac_str(x) -> str:
    f = Fraction(x)
    return f"{f.numerator}/{f.denominator}"


def _require(args, *names) -> None:
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise ValueError("missing required option(s): " + ", ".join(f"--{n}" for n in missing))


def cmd_fit(args) -> dict:
    _require(args, "train", "valid")
    train = load_dataset_dir(args.train)
    valid = read_environment_csv(args.valid)
    cfg = GridConfig(
        k=args.k,
        gammas=args.gamma_grid,
        lambdas=args.lambda_grid,
        normalize=args.normalize,
        center=not args.no_center,
        convention=args.convention,
    )
    report = igr_fit(train, valid, cfg)
    cell = report.selected_cell()
    fit = report.fits[cell]
    return {
        "command": "fit",
        "k": report.k,
        "gamma": report.gamma,
        "lambda": report.lam,
        "beta": [float(b) for b in report.beta],
        "support": [int(j) + 1 for j in np.nonzero(np.abs(report.beta) > 1e-10)[0]],
        "index_base": 1,
        "objective": fit.objective,
        "kkt_residual": fit.kkt,
        "converged": fit.converged,
        "validation_losses": report.validation_losses.tolist(),
        "gamma_grid": report.gammas,
        "lambda_grid": report.lambdas,
        "wall_time_s": report.wall_time,
    }


def cmd_weights(args) -> dict:
    _require(args, "train")
    train = load_dataset_dir(args.train)
    m = moments_from_samples(train, normalize=args.normalize, center=not args.no_center)
    wt = weight_table(m, args.k, args.convention)
    return {
        "command": "weights",
        "k": wt.k,
        "convention": wt.convention,
        "weights": [float(v) for v in wt.values],
        "argmin_sets": _one_based(wt.argmin_sets),
        "index_base": 1,
    }


def cmd_path(args) -> dict:
    _require(args, "train")
    train = load_dataset_dir(args.train)
    m = moments_from_samples(train, normalize=args.normalize, center=not args.no_center)
    wt = weight_table(m, args.k, args.convention)
    t0 = time.perf_counter()
    path = solution_path(m, wt, args.gamma_grid, args.lam)
    return {
        "command": "path",
        "k": args.k,
        "lambda": args.lam,
        "gammas": path.gammas.tolist(),
        "betas": path.betas.tolist(),
        "supports": _one_based(path.supports),
        "gamma_support_stable": path.gamma_support_stable,
        "index_base": 1,
        "wall_time_s": time.perf_counter() - t0,
    }


def cmd_synth(args) -> dict:
    if args.example:
        scm = make_example(args.example)
        label = args.example
    else:
        scm = random_scm(args.d, args.regime, seed=args.seed, block_size=args.block_size)
        label = f"random-{args.regime}"
    data = sample(scm, args.n, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for (X, y), env_id in zip(data.environments, data.env_ids):
        write_environment_csv(out / f"{env_id}.csv", X, y)
    oracle = population_moments(scm)
    oracle_json = {
        "schema_version": SCHEMA_VERSION,
        "scm": label,
        "n_per_env": args.n,
        "seed": args.seed,
        "beta_star": [float(b) for b in oracle.beta_star],
        "s_star": [j + 1 for j in oracle.s_star],
        "endogenous": [j + 1 for j in oracle.endogenous],
        "exogenous": [j + 1 for j in oracle.exogenous],
        "index_base": 1,
        "sigma": [np.array(s, dtype=float).tolist() for s in oracle.sigmas],
        "u": [np.array(u, dtype=float).tolist() for u in oracle.us],
        "mean_sq_y": [float(v) for v in oracle.ey2s],
    }
    (out / "oracle.json").write_text(json.dumps(oracle_json, indent=2) + "\n", encoding="utf-8")
    return {
        "command": "synth",
        "out": str(out),
        "environments": data.env_ids,
        "n_per_env": args.n,
        "d": data.d,
    }


def _read_text(path: str | None) -> str:
    if path is None or path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def cmd_reduce_sat(args) -> dict:
    formula = parse_dimacs(_read_text(args.dimacs))
    inst = reduce_3sat(formula)
    m = inst.moments
    return {
        "command": "reduce-sat",
        "kind": "lis-instance",
        "d": inst.d,
        "provenance": inst.provenance,
        "sigma": [
            [[_frac_str(v) for v in row] for row in sigma] for sigma in m.sigmas
        ],
        "u": [[_frac_str(v) for v in u] for u in m.us],
    }


def _instance_from_json(payload: dict) -> LisInstance:
    try:
        d = int(payload["d"])
        sigmas = [
            [[Fraction(v) for v in row] for row in sigma] for sigma in payload["sigma"]
        ]
        us = [[Fraction(v) for v in u] for u in payload["u"]]
    except (KeyError, ValueError, TypeError) as err:
        raise ValueError(f"bad instance JSON: {err}") from None
    if any(len(u) != d for u in us):
        raise ValueError("instance JSON dimension mismatch")
    moments = EnvMomentSet.from_moments(sigmas, us, backend=EXACT)
    return LisInstance(d=d, moments=moments, provenance=str(payload.get("provenance", "hand-built")))


def cmd_enumerate_invariant(args) -> dict:
    payload = json.loads(_read_text(args.instance))
    inst = _instance_from_json(payload)
    result = enumerate_invariant_sets(inst, cap=args.cap)
    return {
        "command": "enumerate-invariant",
        "d": result.d,
        "method": result.method,
        "invariant_sets": _one_based(result.sets),
        "nontrivial_sets": _one_based(result.nontrivial),
        "index_base": 1,
    }


def cmd_verify_parsimony(args) -> dict:
    formula = parse_dimacs(_read_text(args.dimacs))
    sat_count, _ = sat_brute_force(formula, return_assignments=False)
    inst = reduce_3sat(formula)
    result = enumerate_invariant_sets(inst, cap=args.cap)
    inv_count = len(result.nontrivial)
    return {
        "command": "verify-parsimony",
        "n_vars": formula.n_vars,
        "n_clauses": formula.n_clauses,
        "d": inst.d,
        "sat_count": sat_count,
        "invariant_count": inv_count,
        "parsimonious": sat_count == inv_count,
    }


def cmd_rate_exp(args) -> dict:
    scm = make_example(args.example)
    table = rate_experiment(
        scm, k=args.k, gamma=args.gamma, n_grid=args.n_grid,
        seeds=range(args.seeds), lam=args.lam,
    )
    return {
        "command": "rate-exp",
        "example": args.example,
        "k": table.k,
        "gamma": table.gamma,
        "ns": table.ns,
        "median_errors": table.medians,
        "log_log_slope": table.slope,
    }


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="igrlab",
        description="Invariance-guided regularization toolkit and invariant-set lab",
    )
    parser.add_argument("--config", help="JSON file with defaults for any flag (flags win)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common_train(p):
        # not argparse-required so a --config file can supply them
        p.add_argument("--train", help="directory of per-environment CSVs")
        p.add_argument("--k", type=int, default=2)
        p.add_argument("--convention", choices=[SQUARED, SQRT], default=SQUARED)
        p.add_argument("--normalize", action="store_true")
        p.add_argument("--no-center", action="store_true")
        p.add_argument("--out", help="write the JSON report here instead of stdout")

    p = sub.add_parser("fit", help="grid-search fit with validation selection")
    add_common_train(p)
    p.add_argument("--valid", help="validation environment CSV")
    p.add_argument("--gamma-grid", type=_float_grid, default=GridConfig().gammas)
    p.add_argument("--lambda-grid", type=_float_grid, default=GridConfig().lambdas)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("weights", help="invariance weights of the training environments")
    add_common_train(p)
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("path", help="solution path over a gamma grid")
    add_common_train(p)
    p.add_argument("--gamma-grid", type=_float_grid, default=[0.0, 0.5, 1.0, 2.0, 4.0])
    p.add_argument("--lam", type=float, default=0.0)
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("synth", help="sample a synthetic SCM to CSVs plus an oracle JSON")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--example", choices=list(EXAMPLE_NAMES))
    group.add_argument("--d", type=int)
    p.add_argument("--regime", default="general",
                   choices=["general", "block-orthogonal", "no-ancestor-intervention"])
    p.add_argument("--block-size", type=int, default=2)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("reduce-sat", help="compile DIMACS 3-CNF to an instance JSON")
    p.add_argument("dimacs", nargs="?", help="DIMACS file ('-' or omitted: stdin)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_reduce_sat)

    p = sub.add_parser("enumerate-invariant", help="list invariant sets of an instance JSON")
    p.add_argument("instance", nargs="?", help="instance JSON file ('-' or omitted: stdin)")
    p.add_argument("--cap", type=int, default=24)
    p.add_argument("--out")
    p.set_defaults(func=cmd_enumerate_invariant)

    p = sub.add_parser("verify-parsimony", help="check SAT count == invariant-set count")
    p.add_argument("dimacs", nargs="?", help="DIMACS file ('-' or omitted: stdin)")
    p.add_argument("--cap", type=int, default=24)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify_parsimony)

    p = sub.add_parser("rate-exp", help="empirical-vs-population convergence table")
    p.add_argument("--example", choices=list(EXAMPLE_NAMES), default="ex3_1")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--gamma", type=float, default=0.3)
    p.add_argument("--lam", type=float, default=0.0)
    p.add_argument("--n-grid", type=lambda s: [int(v) for v in s.split(",")],
                   default=[250, 1000, 4000])
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rate_exp)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    # config file provides defaults; explicit flags override them
    pre, _ = parser.parse_known_args(argv)
    if pre.config:
        try:
            defaults = json.loads(Path(pre.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as err:
            print(f"error: cannot read config: {err}", file=sys.stderr)
            return 2
        parser.set_defaults(**defaults)
        for action in parser._actions:
            if isinstance(action, argparse._SubParsersAction):
                for sub_parser in action.choices.values():
                    sub_parser.set_defaults(**defaults)
    args = parser.parse_args(argv)
    try:
        report = args.func(args)
    except (SingularMatrixError, IndefiniteMatrixError, np.linalg.LinAlgError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    except (ValueError, OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    # synth's --out is its data directory; its report goes to stdout
    out = None if args.command == "synth" else getattr(args, "out", None)
    _emit(report, out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
