"""Command-line entry point: generate populations, calibrate, run experiments.

All three subcommands start from the same experiment config file; every
random stream derives from the single --seed flag (see seeds.py for the
derivation), so any output can be reproduced from its manifest.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import DEFAULT_EXPERIMENT, AppConfig, dump_risk_model, load_experiment_file
from .engine import Scenario
from .errors import CalibrationError, ConfigurationError
from .montecarlo import (
    ExperimentConfig,
    ExperimentResult,
    run_experiment,
    write_runs_csv,
    write_summary_csv,
    write_summary_json,
)
from .population import Population, assign_risk_factors, build_population, write_population_csv
from .risk import (
    DAYS_PER_FIVE_YEARS,
    calibrate_intercepts,
    expected_stroke_count,
    feature_matrix,
    five_year_matrix,
)
from .seeds import derive_seed

SCENARIO_CHOICES = {
    "baseline": [Scenario.BASELINE],
    "conversations": [Scenario.BASELINE, Scenario.CONVERSATIONS],
    "family": [Scenario.BASELINE, Scenario.CONVERSATIONS_PLUS_FAMILY],
    "all": [Scenario.BASELINE, Scenario.CONVERSATIONS, Scenario.CONVERSATIONS_PLUS_FAMILY],
}


def _build_scored_population(cfg: AppConfig, base_seed: int) -> Population:
    """Synthesize, assign factors, and score the population for one seed."""
    rng = np.random.default_rng(derive_seed(base_seed))
    pop = build_population(cfg.demographics, rng)
    assign_risk_factors(pop, cfg.risk_tables, rng)
    features = feature_matrix(pop.agents)
    ages = np.array([a.age for a in pop.agents])
    five_year = five_year_matrix(cfg.ensemble, features, ages)
    for agent, fy in zip(pop.agents, five_year):
        agent.five_year_risk = float(fy)
        agent.daily_risk = float(fy) / DAYS_PER_FIVE_YEARS
    return pop


def _write_manifest(path: Path, payload: dict) -> None:
    payload = {"tool": "strokesim", "version": __version__, **payload}
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def cmd_generate(args: argparse.Namespace) -> int:
    cfg = load_experiment_file(args.config)
    base_seed = args.seed if args.seed is not None else cfg.base_seed
    pop = _build_scored_population(cfg, base_seed)
    out = Path(args.out)
    write_population_csv(pop, out)
    _write_manifest(out.with_suffix(out.suffix + ".manifest.json"), {
        "command": "generate",
        "config": cfg.source,
        "population": cfg.population_ref,
        "risk_model": cfg.risk_model_ref,
        "seed": base_seed,
        "population_seed": derive_seed(base_seed),
        "agents": len(pop.agents),
        "calibration_offset": cfg.ensemble.calibration_offset,
        "created_utc": _utc_now(),
    })
    print(f"wrote {len(pop.agents)} agents to {out}")
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    cfg = load_experiment_file(args.config)
    target = args.target if args.target is not None else cfg.calibration_target
    if target <= 0:
        raise ConfigurationError(
            "no calibration target: pass --target or set calibration.target_annual_risk"
        )
    base_seed = args.seed if args.seed is not None else cfg.base_seed
    pop = _build_scored_population(cfg, base_seed)
    tol = args.tol if args.tol is not None else cfg.calibration_tol
    calibrated = calibrate_intercepts(
        cfg.ensemble, pop, target,
        horizon_days=cfg.horizon_days, days_per_year=cfg.days_per_year, tol=tol,
    )
    dump_risk_model(calibrated, args.out)
    expected = expected_stroke_count(calibrated, pop, cfg.horizon_days)
    years = cfg.horizon_days / cfg.days_per_year
    achieved = expected / (len(pop.agents) * years)
    print(f"calibration offset: {calibrated.calibration_offset:.12g}")
    print(f"achieved incidence: {achieved:.6e} per agent-year "
          f"(target {target:.6e})")
    print(f"expected strokes over {cfg.horizon_days} days: {expected:.4f}")
    print(f"wrote {args.out}")
    return 0


def format_summary_table(result: ExperimentResult) -> str:
    """Plain-text table: per scenario, mean strokes/DALYs and the change
    against baseline, starred when significant."""
    summary = result.summary
    vs_base = {
        (c.scenario, c.metric): c
        for c in summary.comparisons
        if c.reference == Scenario.BASELINE.value
    }
    lines = [
        f"{'scenario':<28} {'strokes':>10} {'diff':>9} {'dalys':>12} {'diff':>9}"
    ]
    for s in summary.scenarios:
        cells = [f"{s.scenario:<28}", f"{s.strokes_mean:>10.2f}"]
        c = vs_base.get((s.scenario, "strokes"))
        cells.append(f"{'-':>9}" if c is None else
                     f"{c.percent_difference:>8.2f}%" + ("*" if c.significant else " "))
        cells.append(f"{s.dalys_mean:>12.2f}")
        c = vs_base.get((s.scenario, "dalys"))
        cells.append(f"{'-':>9}" if c is None else
                     f"{c.percent_difference:>8.2f}%" + ("*" if c.significant else " "))
        lines.append(" ".join(cells))
    lines.append("(* significant at the "
                 f"{100 * (1 - summary.significance_level):.0f}% level, "
                 f"n={summary.n_runs} runs per scenario)")
    return "\n".join(lines)


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_experiment_file(args.config)
    base_seed = args.seed if args.seed is not None else cfg.base_seed
    n_runs = args.runs if args.runs is not None else cfg.n_runs
    use_skip = cfg.use_skip_sampling if args.use_skip_sampling is None else (
        args.use_skip_sampling == "on"
    )
    pop = _build_scored_population(cfg, base_seed)
    scenarios = [cfg.make_scenario(kind) for kind in SCENARIO_CHOICES[args.scenario]]
    exp_cfg = ExperimentConfig(
        base_seed=base_seed,
        scenarios=scenarios,
        n_runs=n_runs,
        significance_level=cfg.significance_level,
        use_skip_sampling=use_skip,
        workers=args.workers,
        common_random_numbers=cfg.common_random_numbers,
        welch=cfg.welch,
    )
    result = run_experiment(
        exp_cfg, pop, cfg.ensemble, cfg.delay, cfg.severity, cfg.odds_ratios,
        cfg.life_table,
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_runs_csv(result, out / "runs.csv")
    write_summary_json(result.summary, out / "summary.json")
    write_summary_csv(result.summary, out / "summary.csv")
    _write_manifest(out / "manifest.json", {
        "command": "run",
        "config": cfg.source,
        "population": cfg.population_ref,
        "risk_model": cfg.risk_model_ref,
        "life_table": cfg.life_table_ref,
        "scenario_flag": args.scenario,
        "n_runs": n_runs,
        "base_seed": base_seed,
        "population_seed": derive_seed(base_seed),
        "use_skip_sampling": use_skip,
        "workers": args.workers,
        "calibration_offset": cfg.ensemble.calibration_offset,
        "seeds": {
            name: [m.seed for m in metrics] for name, metrics in result.runs.items()
        },
        "created_utc": _utc_now(),
    })
    print(format_summary_table(result))
    print(f"outputs in {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="strokesim",
        description="Agent-based microsimulation of population stroke burden",
    )
    parser.add_argument("--version", action="version", version=f"strokesim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=DEFAULT_EXPERIMENT,
                        help="experiment config (path or strokesim:NAME)")
    common.add_argument("--seed", type=int, default=None,
                        help="base seed (default: from config)")

    p = sub.add_parser("generate", parents=[common],
                       help="synthesize a population and write it as CSV")
    p.add_argument("--out", default="population.csv", help="output CSV path")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("calibrate", parents=[common],
                       help="calibrate the risk model to a target incidence")
    p.add_argument("--target", type=float, default=None,
                   help="target annual stroke risk per agent (default: from config)")
    p.add_argument("--tol", type=float, default=None,
                   help="calibration tolerance on the achieved incidence")
    p.add_argument("--out", default="risk_model_calibrated.json",
                   help="output model JSON path")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("run", parents=[common], help="run a Monte Carlo experiment")
    p.add_argument("--scenario", choices=sorted(SCENARIO_CHOICES), default="all")
    p.add_argument("--runs", type=int, default=None,
                   help="replications per scenario (default: from config)")
    p.add_argument("--out", default="strokesim_out", help="output directory")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: one per core)")
    p.add_argument("--use-skip-sampling", choices=["on", "off"], default=None,
                   help="sampling path (default: from config)")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CalibrationError as exc:
        print(f"error: {exc} (closest achievable: {exc.achieved:.6e})", file=sys.stderr)
        return 2
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
