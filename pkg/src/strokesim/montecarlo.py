"""Monte Carlo experiments: many replications per scenario, then t-tests.

Seeds are derived per (scenario, run) index from one base seed, so every
replication is reproducible in isolation and the result does not depend
on how runs are ordered or spread across worker processes.  Replications
run in a process pool (population arrays are shipped to each worker once)
and are merged by index before any aggregation.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Optional

from .engine import (
    DelayModel,
    LifeTable,
    OddsRatioTable,
    PopulationArrays,
    RunResult,
    Scenario,
    ScenarioConfig,
    SeverityDistribution,
    run_replication,
)
from .errors import ConfigurationError
from .population import Population
from .risk import EnsembleRiskModel
from .seeds import derive_seed
from .stats import mean, sample_variance, t_test

# Seed derivation uses a fixed per-scenario index, not the position in the
# configured list, so running a subset of scenarios reuses the same seeds.
SCENARIO_SEED_INDEX = {
    Scenario.BASELINE: 0,
    Scenario.CONVERSATIONS: 1,
    Scenario.CONVERSATIONS_PLUS_FAMILY: 2,
}

METRICS = ("strokes", "dalys")


@dataclass
class ExperimentConfig:
    base_seed: int
    scenarios: list[ScenarioConfig]
    n_runs: int = 1000
    significance_level: float = 0.05
    use_skip_sampling: bool = True
    workers: Optional[int] = None  # None = one per available core
    common_random_numbers: bool = False
    welch: bool = False

    def validate(self) -> None:
        if self.n_runs < 2:
            raise ConfigurationError(f"n_runs = {self.n_runs}, need at least 2")
        if not self.scenarios:
            raise ConfigurationError("experiment: no scenarios configured")
        kinds = [s.scenario for s in self.scenarios]
        if Scenario.BASELINE not in kinds:
            raise ConfigurationError("experiment: scenario list must include baseline")
        if len(set(kinds)) != len(kinds):
            raise ConfigurationError("experiment: duplicate scenario")
        if not (0.0 < self.significance_level < 1.0):
            raise ConfigurationError("significance_level must be in (0, 1)")
        for s in self.scenarios:
            s.validate()


@dataclass
class RunMetrics:
    """The per-replication numbers that survive into runs.csv."""

    scenario: str
    run: int
    seed: int
    strokes: int
    dalys: float
    no_disability: int
    mild: int
    moderate_severe: int
    death: int
    conversations: int
    risk_reductions: int
    family_reductions: int

    @staticmethod
    def from_result(scenario: str, run: int, seed: int, res: RunResult) -> "RunMetrics":
        by_sev = res.strokes_by_severity
        return RunMetrics(
            scenario=scenario, run=run, seed=seed,
            strokes=res.total_strokes, dalys=res.total_dalys,
            no_disability=by_sev["no_disability"], mild=by_sev["mild"],
            moderate_severe=by_sev["moderate_severe"], death=by_sev["death"],
            conversations=res.conversations,
            risk_reductions=res.risk_reductions,
            family_reductions=res.family_reductions,
        )


@dataclass
class ScenarioResult:
    scenario: str
    n_runs: int
    strokes_mean: float
    strokes_sd: float
    dalys_mean: float
    dalys_sd: float
    deaths_mean: float


@dataclass
class Comparison:
    """One metric of one scenario against a reference scenario."""

    reference: str
    scenario: str
    metric: str
    percent_difference: float
    percent_defined: bool
    t: float
    df: float
    p: float
    significant: bool
    degenerate: bool


@dataclass
class ExperimentSummary:
    n_runs: int
    base_seed: int
    significance_level: float
    use_skip_sampling: bool
    common_random_numbers: bool
    welch: bool
    scenarios: list[ScenarioResult]
    comparisons: list[Comparison]


@dataclass
class ExperimentResult:
    summary: ExperimentSummary
    runs: dict[str, list[RunMetrics]] = field(default_factory=dict)


def percent_difference(scenario_mean: float, baseline_mean: float) -> float:
    """100 x (scenario - baseline) / baseline; 0 when the baseline is 0.

    A zero baseline makes the quantity undefined; callers that care carry
    a separate defined flag (see Comparison.percent_defined).
    """
    if baseline_mean == 0.0:
        return 0.0
    return 100.0 * (scenario_mean - baseline_mean) / baseline_mean


# Worker-process state, installed once per worker by the pool initializer.
_STATE: Optional[dict] = None


def _init_worker(state: dict) -> None:
    global _STATE
    _STATE = state


def _run_task(task: tuple[str, int, int], state: Optional[dict] = None) -> RunMetrics:
    scenario_value, run_idx, seed = task
    st = state if state is not None else _STATE
    assert st is not None
    try:
        res = run_replication(
            st["arrays"], st["ens"], st["scenarios"][scenario_value],
            st["delay"], st["sev"], st["ors"], st["life"],
            seed, use_skip_sampling=st["use_skip"],
        )
    except Exception as exc:
        raise RuntimeError(
            f"replication failed: scenario={scenario_value} run={run_idx} seed={seed}"
        ) from exc
    return RunMetrics.from_result(scenario_value, run_idx, seed, res)


def run_experiment(
    cfg: ExperimentConfig,
    pop: Population | PopulationArrays,
    ens: EnsembleRiskModel,
    delay: Optional[DelayModel] = None,
    sev: Optional[SeverityDistribution] = None,
    ors: Optional[OddsRatioTable] = None,
    life: Optional[LifeTable] = None,
) -> ExperimentResult:
    """Run every configured scenario n_runs times and summarize.

    Results are keyed by (scenario, run index) and merged in index order,
    so the summary is identical however many workers execute the runs.
    Any failing replication aborts the experiment; the error names the
    scenario, run and seed that failed.
    """
    cfg.validate()
    if delay is None:
        delay = DelayModel.default()
    if sev is None:
        sev = SeverityDistribution.default()
    if ors is None:
        ors = OddsRatioTable.default()
    if life is None:
        raise ConfigurationError("run_experiment: a life table is required")

    arrays = pop if isinstance(pop, PopulationArrays) else PopulationArrays.from_population(pop)
    state = {
        "arrays": arrays,
        "ens": ens,
        "scenarios": {s.scenario.value: s for s in cfg.scenarios},
        "delay": delay,
        "sev": sev,
        "ors": ors,
        "life": life,
        "use_skip": cfg.use_skip_sampling,
    }

    tasks: list[tuple[str, int, int]] = []
    for sc in cfg.scenarios:
        s_idx = SCENARIO_SEED_INDEX[sc.scenario]
        for run in range(cfg.n_runs):
            if cfg.common_random_numbers:
                seed = derive_seed(cfg.base_seed, run)
            else:
                seed = derive_seed(cfg.base_seed, s_idx, run)
            tasks.append((sc.scenario.value, run, seed))

    workers = cfg.workers if cfg.workers is not None else (os.cpu_count() or 1)
    collected: dict[tuple[str, int], RunMetrics] = {}
    if workers <= 1 or len(tasks) == 1:
        for task in tasks:
            m = _run_task(task, state)
            collected[(m.scenario, m.run)] = m
    else:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker, initargs=(state,)
        ) as pool:
            futures = [pool.submit(_run_task, task) for task in tasks]
            for fut in as_completed(futures):
                m = fut.result()
                collected[(m.scenario, m.run)] = m

    runs = {
        sc.scenario.value: [collected[(sc.scenario.value, r)] for r in range(cfg.n_runs)]
        for sc in cfg.scenarios
    }
    return ExperimentResult(summary=_summarize(cfg, runs), runs=runs)


def _summarize(cfg: ExperimentConfig, runs: dict[str, list[RunMetrics]]) -> ExperimentSummary:
    scenario_results = []
    samples: dict[tuple[str, str], list[float]] = {}
    for sc in cfg.scenarios:
        name = sc.scenario.value
        strokes = [float(m.strokes) for m in runs[name]]
        dalys = [m.dalys for m in runs[name]]
        deaths = [float(m.death) for m in runs[name]]
        samples[(name, "strokes")] = strokes
        samples[(name, "dalys")] = dalys
        scenario_results.append(ScenarioResult(
            scenario=name, n_runs=len(strokes),
            strokes_mean=mean(strokes), strokes_sd=math.sqrt(sample_variance(strokes)),
            dalys_mean=mean(dalys), dalys_sd=math.sqrt(sample_variance(dalys)),
            deaths_mean=mean(deaths),
        ))

    names = [sc.scenario.value for sc in cfg.scenarios]
    baseline = Scenario.BASELINE.value
    pairs = [(baseline, n) for n in names if n != baseline]
    others = [n for n in names if n != baseline]
    for i in range(len(others)):
        for j in range(i + 1, len(others)):
            pairs.append((others[i], others[j]))

    comparisons = []
    for ref, scen in pairs:
        for metric in METRICS:
            ref_sample = samples[(ref, metric)]
            scen_sample = samples[(scen, metric)]
            ref_mean = mean(ref_sample)
            res = t_test(scen_sample, ref_sample, welch=cfg.welch)
            comparisons.append(Comparison(
                reference=ref, scenario=scen, metric=metric,
                percent_difference=percent_difference(res.mean_a, ref_mean),
                percent_defined=ref_mean != 0.0,
                t=res.t, df=res.df, p=res.p,
                significant=res.p < cfg.significance_level,
                degenerate=res.degenerate,
            ))

    return ExperimentSummary(
        n_runs=cfg.n_runs, base_seed=cfg.base_seed,
        significance_level=cfg.significance_level,
        use_skip_sampling=cfg.use_skip_sampling,
        common_random_numbers=cfg.common_random_numbers,
        welch=cfg.welch,
        scenarios=scenario_results, comparisons=comparisons,
    )


# --- output files ---

RUNS_CSV_COLUMNS = [
    "scenario", "run", "seed", "strokes", "dalys",
    "no_disability", "mild", "moderate_severe", "death",
    "conversations", "risk_reductions", "family_reductions",
]


def write_runs_csv(result: ExperimentResult, path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(RUNS_CSV_COLUMNS)
        for name in result.runs:
            for m in result.runs[name]:
                writer.writerow([
                    m.scenario, m.run, m.seed, m.strokes, repr(m.dalys),
                    m.no_disability, m.mild, m.moderate_severe, m.death,
                    m.conversations, m.risk_reductions, m.family_reductions,
                ])


def summary_to_dict(summary: ExperimentSummary) -> dict:
    return {
        "n_runs": summary.n_runs,
        "base_seed": summary.base_seed,
        "significance_level": summary.significance_level,
        "use_skip_sampling": summary.use_skip_sampling,
        "common_random_numbers": summary.common_random_numbers,
        "welch": summary.welch,
        "scenarios": [vars(s).copy() for s in summary.scenarios],
        "comparisons": [vars(c).copy() for c in summary.comparisons],
    }


def write_summary_json(summary: ExperimentSummary, path) -> None:
    with open(path, "w") as handle:
        json.dump(summary_to_dict(summary), handle, indent=2)
        handle.write("\n")


def write_summary_csv(summary: ExperimentSummary, path) -> None:
    """One row per scenario x metric, with the vs-baseline test inline."""
    vs_baseline = {
        (c.scenario, c.metric): c
        for c in summary.comparisons
        if c.reference == Scenario.BASELINE.value
    }
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([
            "scenario", "metric", "mean", "sd",
            "percent_diff_vs_baseline", "t", "df", "p", "significant",
        ])
        for s in summary.scenarios:
            for metric in METRICS:
                m = (s.strokes_mean, s.strokes_sd) if metric == "strokes" else (s.dalys_mean, s.dalys_sd)
                c = vs_baseline.get((s.scenario, metric))
                if c is None:
                    writer.writerow([s.scenario, metric, repr(m[0]), repr(m[1]), "", "", "", "", ""])
                else:
                    writer.writerow([
                        s.scenario, metric, repr(m[0]), repr(m[1]),
                        repr(c.percent_difference), repr(c.t), repr(c.df), repr(c.p),
                        int(c.significant),
                    ])
