"""Experiment harness: seed derivation, run merging, summaries, output files."""

import csv
import json

import numpy as np
import pytest

from strokesim.engine import (
    DelayModel,
    LifeTable,
    OddsRatioTable,
    PopulationArrays,
    Scenario,
    ScenarioConfig,
    SeverityDistribution,
    run_replication,
)
from strokesim.errors import ConfigurationError
from strokesim.montecarlo import (
    RUNS_CSV_COLUMNS,
    SCENARIO_SEED_INDEX,
    Comparison,
    ExperimentConfig,
    percent_difference,
    run_experiment,
    summary_to_dict,
    write_runs_csv,
    write_summary_csv,
    write_summary_json,
)
from strokesim.population import Agent, Population
from strokesim.risk import EnsembleRiskModel, LogisticModel, WeightRow
from strokesim.seeds import derive_seed
from strokesim.stats import mean, t_test


# --- seed derivation ---


def test_derive_seed_deterministic_and_64bit():
    assert derive_seed(42, 1, 5) == derive_seed(42, 1, 5)
    for s in (derive_seed(0), derive_seed(42), derive_seed(2**64 - 1, 3, 999)):
        assert 0 <= s < 2**64


def test_derive_seed_sensitive_to_every_index():
    base = derive_seed(42, 1, 5)
    assert derive_seed(43, 1, 5) != base
    assert derive_seed(42, 2, 5) != base
    assert derive_seed(42, 1, 6) != base
    assert derive_seed(42, 1) != base
    assert derive_seed(42, 1, 5, 0) != base


def test_derive_seed_no_collisions_on_experiment_grid():
    seeds = {
        derive_seed(42, s_idx, run)
        for s_idx in range(3)
        for run in range(2000)
    }
    assert len(seeds) == 6000


def test_derive_seed_avalanche():
    # neighboring inputs should disagree in many output bits
    for run in range(50):
        a = derive_seed(42, 0, run)
        b = derive_seed(42, 0, run + 1)
        assert bin(a ^ b).count("1") > 10


def test_derive_seed_spreads_uniformly():
    values = [derive_seed(7, i) / 2.0**64 for i in range(4000)]
    assert abs(float(np.mean(values)) - 0.5) < 0.02


# --- percent difference ---


def test_percent_difference():
    assert percent_difference(110.0, 100.0) == pytest.approx(10.0)
    assert percent_difference(90.0, 100.0) == pytest.approx(-10.0)
    assert percent_difference(5.0, 0.0) == 0.0


# --- config validation ---


def scenario_list(horizon=730):
    return [
        ScenarioConfig(scenario=kind, horizon_days=horizon) for kind in Scenario
    ]


def test_experiment_config_validate():
    ExperimentConfig(base_seed=1, scenarios=scenario_list(), n_runs=2).validate()
    with pytest.raises(ConfigurationError, match="n_runs"):
        ExperimentConfig(base_seed=1, scenarios=scenario_list(), n_runs=1).validate()
    with pytest.raises(ConfigurationError, match="no scenarios"):
        ExperimentConfig(base_seed=1, scenarios=[]).validate()
    with pytest.raises(ConfigurationError, match="baseline"):
        ExperimentConfig(base_seed=1, scenarios=[
            ScenarioConfig(scenario=Scenario.CONVERSATIONS)]).validate()
    with pytest.raises(ConfigurationError, match="duplicate"):
        ExperimentConfig(base_seed=1, scenarios=[
            ScenarioConfig(), ScenarioConfig()]).validate()
    with pytest.raises(ConfigurationError, match="significance"):
        ExperimentConfig(base_seed=1, scenarios=scenario_list(),
                         significance_level=1.0).validate()


# --- a small experiment everything below shares ---


def tiny_population(n=50):
    rng = np.random.default_rng(6)
    agents = []
    for i in range(n):
        a = Agent(id=i, age=int(rng.integers(45, 75)),
                  sex="female" if i % 2 else "male", region="r",
                  household_id=i // 2, employment="employed",
                  sbp=float(rng.normal(140, 15)), dbp=float(rng.normal(84, 9)),
                  bmi=float(rng.normal(29, 4)), smoker=bool(i % 3 == 0),
                  cigs_per_day=15 if i % 3 == 0 else 0)
        agents.append(a)
    households = {}
    for a in agents:
        households.setdefault(a.household_id, []).append(a.id)
    return Population(agents=agents, households=households,
                      household_types={h: "couple" for h in households})


def tiny_ens():
    ens = EnsembleRiskModel(
        models=[LogisticModel(age_lo=0, age_hi=200, intercept=-10.0,
                              coefficients={"sbp": 0.055, "smoker": 0.6})],
        weights=[WeightRow(age_lo=0, age_hi=200, weights=[1.0])],
    )
    ens.validate()
    return ens


def tiny_life():
    return LifeTable(ages=[35, 110], female=[47.0, 2.0], male=[44.0, 2.0])


def make_config(**overrides):
    params = dict(base_seed=99, scenarios=scenario_list(), n_runs=6, workers=1)
    params.update(overrides)
    return ExperimentConfig(**params)


@pytest.fixture(scope="module")
def experiment():
    return run_experiment(make_config(), tiny_population(), tiny_ens(), life=tiny_life())


def test_requires_life_table():
    with pytest.raises(ConfigurationError, match="life table"):
        run_experiment(make_config(), tiny_population(), tiny_ens())


def test_runs_shape_and_order(experiment):
    runs = experiment.runs
    assert set(runs) == {"baseline", "conversations", "conversations_plus_family"}
    for name, metrics in runs.items():
        assert [m.run for m in metrics] == list(range(6))
        assert all(m.scenario == name for m in metrics)


def test_every_run_reproducible_in_isolation(experiment):
    """Each row of runs must be replayable from its recorded seed alone."""
    arrays = PopulationArrays.from_population(tiny_population())
    ens = tiny_ens()
    by_kind = {s.scenario.value: s for s in scenario_list()}
    for name, metrics in experiment.runs.items():
        for m in metrics[:3]:
            assert m.seed == derive_seed(99, SCENARIO_SEED_INDEX[Scenario(name)], m.run)
            direct = run_replication(
                arrays, ens, by_kind[name], DelayModel.default(),
                SeverityDistribution.default(), OddsRatioTable.default(),
                tiny_life(), rng=m.seed)
            assert direct.total_strokes == m.strokes
            assert direct.total_dalys == m.dalys
            assert direct.conversations == m.conversations
            assert direct.strokes_by_severity["death"] == m.death


def test_repeat_experiment_identical(experiment):
    again = run_experiment(make_config(), tiny_population(), tiny_ens(), life=tiny_life())
    assert summary_to_dict(again.summary) == summary_to_dict(experiment.summary)
    assert {k: [vars(m) for m in v] for k, v in again.runs.items()} == \
           {k: [vars(m) for m in v] for k, v in experiment.runs.items()}


def test_parallel_equals_serial(experiment):
    parallel = run_experiment(
        make_config(workers=2), tiny_population(), tiny_ens(), life=tiny_life())
    assert summary_to_dict(parallel.summary) == summary_to_dict(experiment.summary)
    assert {k: [vars(m) for m in v] for k, v in parallel.runs.items()} == \
           {k: [vars(m) for m in v] for k, v in experiment.runs.items()}


def test_scenario_subset_reuses_seeds(experiment):
    subset_cfg = make_config(scenarios=[
        ScenarioConfig(scenario=Scenario.BASELINE, horizon_days=730),
        ScenarioConfig(scenario=Scenario.CONVERSATIONS_PLUS_FAMILY, horizon_days=730),
    ])
    subset = run_experiment(subset_cfg, tiny_population(), tiny_ens(), life=tiny_life())
    for name in ("baseline", "conversations_plus_family"):
        assert [vars(m) for m in subset.runs[name]] == \
               [vars(m) for m in experiment.runs[name]]


def test_common_random_numbers_share_seeds():
    crn = run_experiment(
        make_config(common_random_numbers=True),
        tiny_population(), tiny_ens(), life=tiny_life())
    for run in range(6):
        seeds = {name: crn.runs[name][run].seed for name in crn.runs}
        assert len(set(seeds.values())) == 1
        assert seeds["baseline"] == derive_seed(99, run)


def test_summary_statistics_recomputable(experiment):
    summary = experiment.summary
    for s in summary.scenarios:
        strokes = [float(m.strokes) for m in experiment.runs[s.scenario]]
        dalys = [m.dalys for m in experiment.runs[s.scenario]]
        deaths = [float(m.death) for m in experiment.runs[s.scenario]]
        assert s.n_runs == 6
        assert s.strokes_mean == pytest.approx(mean(strokes), rel=1e-12)
        assert s.dalys_mean == pytest.approx(mean(dalys), rel=1e-12)
        assert s.deaths_mean == pytest.approx(mean(deaths), rel=1e-12)
        assert s.strokes_sd == pytest.approx(float(np.std(strokes, ddof=1)), rel=1e-9)


def test_comparison_grid_and_values(experiment):
    summary = experiment.summary
    got_pairs = {(c.reference, c.scenario, c.metric) for c in summary.comparisons}
    want_pairs = set()
    for metric in ("strokes", "dalys"):
        want_pairs.add(("baseline", "conversations", metric))
        want_pairs.add(("baseline", "conversations_plus_family", metric))
        want_pairs.add(("conversations", "conversations_plus_family", metric))
    assert got_pairs == want_pairs

    for c in summary.comparisons:
        ref = [float(getattr(m, "strokes" if c.metric == "strokes" else "dalys"))
               for m in experiment.runs[c.reference]]
        scen = [float(getattr(m, "strokes" if c.metric == "strokes" else "dalys"))
                for m in experiment.runs[c.scenario]]
        check = t_test(scen, ref)
        assert c.t == check.t
        assert c.df == check.df
        assert c.p == check.p
        assert c.significant == (c.p < summary.significance_level)
        assert c.degenerate == check.degenerate
        assert c.percent_defined == (mean(ref) != 0.0)
        assert c.percent_difference == pytest.approx(
            100.0 * (mean(scen) - mean(ref)) / mean(ref), rel=1e-12)


def test_lower_scenario_mean_gives_negative_t():
    # constructed samples, not simulation output: the sign convention is fixed
    cmp_t = t_test([1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
    assert cmp_t.t < 0


def test_welch_flag_changes_degrees_of_freedom(experiment):
    welch = run_experiment(
        make_config(welch=True), tiny_population(), tiny_ens(), life=tiny_life())
    pooled_df = {(c.reference, c.scenario, c.metric): c.df
                 for c in experiment.summary.comparisons}
    for c in welch.summary.comparisons:
        assert pooled_df[(c.reference, c.scenario, c.metric)] == 10.0
        assert c.df <= 10.0
        assert c.df == pytest.approx(
            t_test([float(getattr(m, c.metric if c.metric == "dalys" else "strokes"))
                    for m in welch.runs[c.scenario]],
                   [float(getattr(m, c.metric if c.metric == "dalys" else "strokes"))
                    for m in welch.runs[c.reference]], welch=True).df)


def test_failing_replication_names_the_run():
    bad_life = LifeTable(ages=[110, 35], female=[2.0, 47.0], male=[2.0, 44.0])
    with pytest.raises(RuntimeError, match=r"scenario=baseline run=0 seed=\d+"):
        run_experiment(make_config(), tiny_population(), tiny_ens(), life=bad_life)


# --- output files ---


def test_runs_csv_layout(experiment, tmp_path):
    path = tmp_path / "runs.csv"
    write_runs_csv(experiment, path)
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == RUNS_CSV_COLUMNS
    assert len(rows) == 1 + 3 * 6
    first = dict(zip(rows[0], rows[1]))
    m = experiment.runs["baseline"][0]
    assert first["scenario"] == "baseline"
    assert int(first["run"]) == 0
    assert int(first["seed"]) == m.seed
    assert int(first["strokes"]) == m.strokes
    assert float(first["dalys"]) == m.dalys
    assert int(first["family_reductions"]) == m.family_reductions


def test_runs_csv_bytes_stable(experiment, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_runs_csv(experiment, a)
    write_runs_csv(experiment, b)
    assert a.read_bytes() == b.read_bytes()


def test_summary_json_round_trip(experiment, tmp_path):
    path = tmp_path / "summary.json"
    write_summary_json(experiment.summary, path)
    text = path.read_text()
    assert text.endswith("\n")
    data = json.loads(text)
    assert data == summary_to_dict(experiment.summary)
    assert data["n_runs"] == 6
    assert data["base_seed"] == 99
    assert {s["scenario"] for s in data["scenarios"]} == set(experiment.runs)
    for c in data["comparisons"]:
        assert set(c) == {"reference", "scenario", "metric", "percent_difference",
                          "percent_defined", "t", "df", "p", "significant", "degenerate"}


def test_summary_to_dict_detached_from_dataclasses(experiment):
    data = summary_to_dict(experiment.summary)
    data["scenarios"][0]["strokes_mean"] = -1.0
    assert experiment.summary.scenarios[0].strokes_mean != -1.0


def test_summary_csv_layout(experiment, tmp_path):
    path = tmp_path / "summary.csv"
    write_summary_csv(experiment.summary, path)
    with open(path, newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 3 * 2
    header = list(rows[0])
    assert header == ["scenario", "metric", "mean", "sd",
                      "percent_diff_vs_baseline", "t", "df", "p", "significant"]
    for row in rows:
        if row["scenario"] == "baseline":
            assert row["t"] == "" and row["p"] == "" and row["significant"] == ""
        else:
            float(row["t"]), float(row["p"])
            assert row["significant"] in {"0", "1"}
    by_key = {(r["scenario"], r["metric"]): r for r in rows}
    s0 = experiment.summary.scenarios[0]
    assert float(by_key[(s0.scenario, "strokes")]["mean"]) == s0.strokes_mean
