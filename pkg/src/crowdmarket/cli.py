"""Command-line entry point.

Subcommands:

* ``simulate``  — run replicated simulations from a config file, writing one
  trace CSV per replicate plus an aggregate JSON.
* ``dsic-test`` — sweep bid deviations over random frozen instances and report
  the largest utility gain found.
* ``sweep``     — vary one config key over a list of values, running the
  simulate pipeline for each.

Exit codes: 0 success, 2 bad arguments, 3 invalid config, 4 infeasible
instance in every replicate.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .allocation import InfeasibleJob
from .estimator import EstimatorConfig
from .market import InvalidConfig, InvalidRecipe, MarketConfig, PopulationRecipe, load_config
from .mechanism import deviation_sweep, random_frozen_instance
from .simulation import run, summary_to_json, trace_summary, trace_to_csv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_INFEASIBLE = 4

_SWEEPABLE = {
    "epsilon": ("cfg", float),
    "deadline": ("cfg:D", float),
    "delta": ("cfg", float),
    "jobs": ("cfg:T", int),
    "sigma_log": ("cfg", float),
    "seed": ("cfg", int),
    "alpha": ("est", float),
    "u_rho": ("est", float),
    "u_beta": ("est", float),
}


def _build_estimator(cfg: MarketConfig, overrides: dict[str, float]) -> EstimatorConfig:
    est = EstimatorConfig.defaults(cfg)
    if overrides:
        est = replace(est, **{k: float(v) for k, v in overrides.items()})
    return est.validate(cfg)


def _run_replicate(payload) -> dict:
    """Run one replicate and write its trace CSV; returns the summary dict."""
    cfg, recipe, est, mode, out_file = payload
    try:
        trace = run(cfg, recipe, est_cfg=est, mode=mode, record_tables=False)
    except InfeasibleJob as exc:
        return {"seed": cfg.seed, "infeasible": True, "total_cap": exc.total_cap}
    trace_to_csv(trace, out_file)
    summary = trace_summary(trace)
    summary["trace_csv"] = str(out_file)
    return summary


def _simulate(
    cfg: MarketConfig,
    recipe: PopulationRecipe,
    est: EstimatorConfig,
    out_dir: Path,
    replicates: int,
    seed_base: int,
    mode: str,
    parallelism: int,
) -> tuple[int, dict]:
    out_dir.mkdir(parents=True, exist_ok=True)
    payloads = []
    for r in range(replicates):
        cfg_r = replace(cfg, seed=seed_base + r)
        payloads.append((cfg_r, recipe, est, mode, out_dir / f"replicate_{r:03d}.csv"))

    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            summaries = list(pool.map(_run_replicate, payloads))
    else:
        summaries = [_run_replicate(p) for p in payloads]

    ok = [s for s in summaries if not s.get("infeasible")]
    totals = {
        "neg_social_welfare_total": sum(s["neg_social_welfare_total"] for s in ok),
        "payment_total": sum(s["payment_total"] for s in ok),
        "regret_total": sum(s["regret_total"] for s in ok),
        "jobs_completed": sum(s["jobs_completed"] for s in ok),
    }
    aggregate = {
        "mode": mode,
        "replicates": replicates,
        "seed_base": seed_base,
        "succeeded": len(ok),
        "totals": totals,
        "runs": summaries,
    }
    summary_to_json(aggregate, out_dir / "aggregate.json")
    code = EXIT_INFEASIBLE if replicates > 0 and not ok else EXIT_OK
    return code, aggregate


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg, recipe, est_overrides = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    est = _build_estimator(cfg, est_overrides)
    code, aggregate = _simulate(
        cfg,
        recipe,
        est,
        Path(args.out),
        args.replicates,
        cfg.seed,
        args.mode,
        args.parallelism,
    )
    print(
        f"simulate: {aggregate['succeeded']}/{args.replicates} replicates completed, "
        f"outputs in {args.out}"
    )
    if code == EXIT_INFEASIBLE:
        print("simulate: every replicate was infeasible", file=sys.stderr)
    return code


def _cmd_dsic_test(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    worst = -np.inf
    worst_case = None
    sweeps = 0
    for k in range(args.instances):
        inst = random_frozen_instance(rng, n_max=args.max_workers)
        for i in range(len(inst.costs)):
            gain = deviation_sweep(inst, i)
            sweeps += 1
            if gain > worst:
                worst = gain
                worst_case = {"instance": k, "agent": i, "gain": gain}
    report = {
        "instances": args.instances,
        "sweeps": sweeps,
        "max_gain": float(worst),
        "worst_case": worst_case,
        "tolerance": 1e-9,
        "dsic_holds": bool(worst <= 1e-9),
    }
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary_to_json(report, out_dir / "dsic_report.json")
    print(f"dsic-test: max utility gain over {sweeps} deviation sweeps = {worst:.3e}")
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    if args.param not in _SWEEPABLE:
        print(f"sweep: unknown parameter {args.param!r}; choose from "
              f"{', '.join(sorted(_SWEEPABLE))}", file=sys.stderr)
        return EXIT_USAGE
    target, cast = _SWEEPABLE[args.param]
    values = [cast(v) for v in args.values.split(",") if v.strip()]
    if not values:
        print("sweep: --values must contain at least one value", file=sys.stderr)
        return EXIT_USAGE

    cfg, recipe, est_overrides = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)

    out_root = Path(args.out)
    results = []
    any_ok = False
    for v in values:
        cfg_v, overrides_v = cfg, dict(est_overrides)
        if target.startswith("cfg"):
            fieldname = target.split(":")[1] if ":" in target else args.param
            cfg_v = replace(cfg, **{fieldname: v})
        else:
            overrides_v[args.param] = v
        try:
            est_v = _build_estimator(cfg_v, overrides_v)
        except InvalidConfig as exc:
            results.append({"value": v, "error": str(exc)})
            continue
        sub_dir = out_root / f"{args.param}_{v}"
        code, aggregate = _simulate(
            cfg_v, recipe, est_v, sub_dir, args.replicates, cfg_v.seed, args.mode,
            args.parallelism,
        )
        any_ok = any_ok or code == EXIT_OK
        results.append({"value": v, "exit": code, "totals": aggregate["totals"]})

    summary_to_json({"param": args.param, "results": results}, out_root / "sweep.json")
    print(f"sweep: {len(values)} values of {args.param} written to {out_root}")
    return EXIT_OK if any_ok else EXIT_INFEASIBLE


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdmarket",
        description="Truthful online job allocation: simulation and incentive checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run replicated simulations from a config file")
    sim.add_argument("--config", required=True, help="path to key/value config file")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--replicates", type=int, default=1)
    sim.add_argument("--seed", type=int, default=None, help="override the config seed base")
    sim.add_argument("--mode", choices=["learning", "known-means"], default="learning")
    sim.add_argument("--parallelism", type=int, default=1)
    sim.set_defaults(func=_cmd_simulate)

    dsic = sub.add_parser("dsic-test", help="deviation sweeps over random frozen instances")
    dsic.add_argument("--out", required=True, help="output directory")
    dsic.add_argument("--instances", type=int, default=200)
    dsic.add_argument("--max-workers", type=int, default=8)
    dsic.add_argument("--seed", type=int, default=0)
    dsic.set_defaults(func=_cmd_dsic_test)

    swp = sub.add_parser("sweep", help="vary one config key over a list of values")
    swp.add_argument("--config", required=True)
    swp.add_argument("--out", required=True)
    swp.add_argument("--param", required=True, help=f"one of {', '.join(sorted(_SWEEPABLE))}")
    swp.add_argument("--values", required=True, help="comma-separated list")
    swp.add_argument("--replicates", type=int, default=1)
    swp.add_argument("--seed", type=int, default=None)
    swp.add_argument("--mode", choices=["learning", "known-means"], default="learning")
    swp.add_argument("--parallelism", type=int, default=1)
    swp.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidConfig, InvalidRecipe) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleJob as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
