"""strokesim: agent-based microsimulation of population stroke burden.

A seed-deterministic daily-timestep model: a synthetic household-
structured population is scored with an ensemble logistic risk model,
strokes arrive as Bernoulli events (skip-sampled in production), each
stroke gets an arrival delay, a delay-adjusted severity, and a DALY
contribution, and intervention scenarios (health conversations, family
spillover) are compared against baseline over Monte Carlo replications.
"""

__version__ = "0.1.0"

from .engine import (
    DelayModel,
    LifeTable,
    OddsRatioTable,
    PopulationArrays,
    RunResult,
    Scenario,
    ScenarioConfig,
    Severity,
    SeverityDistribution,
    StrokeOutcome,
    run_replication,
)
from .errors import CalibrationError, ConfigurationError
from .montecarlo import (
    ExperimentConfig,
    ExperimentResult,
    ExperimentSummary,
    percent_difference,
    run_experiment,
)
from .population import (
    Agent,
    DemographicSpec,
    Population,
    RiskFactorTables,
    assign_risk_factors,
    build_population,
    population_stats,
    read_population_csv,
    write_population_csv,
)
from .risk import (
    EnsembleRiskModel,
    LogisticModel,
    RiskScore,
    calibrate_intercepts,
    ensemble_score,
    expected_stroke_count,
    logistic_score,
    refresh_risks,
)
from .seeds import derive_seed
from .stats import TTestResult, regularized_incomplete_beta, t_test

__all__ = [
    "__version__",
    "Agent",
    "CalibrationError",
    "ConfigurationError",
    "DelayModel",
    "DemographicSpec",
    "EnsembleRiskModel",
    "ExperimentConfig",
    "ExperimentResult",
    "ExperimentSummary",
    "LifeTable",
    "LogisticModel",
    "OddsRatioTable",
    "Population",
    "PopulationArrays",
    "RiskFactorTables",
    "RiskScore",
    "RunResult",
    "Scenario",
    "ScenarioConfig",
    "Severity",
    "SeverityDistribution",
    "StrokeOutcome",
    "TTestResult",
    "assign_risk_factors",
    "build_population",
    "calibrate_intercepts",
    "derive_seed",
    "ensemble_score",
    "expected_stroke_count",
    "logistic_score",
    "percent_difference",
    "population_stats",
    "read_population_csv",
    "refresh_risks",
    "regularized_incomplete_beta",
    "run_experiment",
    "run_replication",
    "t_test",
    "write_population_csv",
]
