"""Five-year stroke risk scoring.

The risk engine is an ensemble of logistic models.  Each member model maps
an agent's risk factors to a five-year first-stroke probability; the
ensemble combines member scores with age-banded weights, linearly
crossfaded near band boundaries so the score has no jumps as an agent
ages.  A single additive calibration offset, shared by every member
intercept, is tuned by `calibrate_intercepts` so the population-level
expected stroke count matches a target incidence.

Daily risk is the five-year probability spread uniformly over the 1826
days in five years.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import CalibrationError, ConfigurationError
from .population import Agent, Population

DAYS_PER_FIVE_YEARS = 1826

# Column order of the feature matrix; coefficient dicts use these names.
# Sex is encoded as male=1, female=0.
FEATURE_NAMES = (
    "age", "male", "sbp", "dbp", "bmi",
    "diabetes", "afib", "smoker", "cigs_per_day",
)

_LP_LIMIT = 60.0  # keeps exp() finite; sigmoid(+-60) is still strictly inside (0, 1)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -_LP_LIMIT, _LP_LIMIT)))


def agent_features(agent: Agent) -> tuple[float, ...]:
    """Feature vector for one agent, in `FEATURE_NAMES` order."""
    return (
        float(agent.age),
        1.0 if agent.sex == "male" else 0.0,
        agent.sbp,
        agent.dbp,
        agent.bmi,
        1.0 if agent.diabetes else 0.0,
        1.0 if agent.afib else 0.0,
        1.0 if agent.smoker else 0.0,
        float(agent.cigs_per_day),
    )


def feature_matrix(agents: list[Agent]) -> np.ndarray:
    """(n_agents, n_features) float matrix in agent order."""
    return np.array([agent_features(a) for a in agents], dtype=float)


@dataclass
class LogisticModel:
    """One ensemble member.

    `age_lo`/`age_hi` record the band the model was fitted for; scoring
    itself accepts any age, the band only steers the ensemble weights.
    """

    age_lo: int
    age_hi: int
    intercept: float
    coefficients: dict[str, float]

    def validate(self, prefix: str) -> None:
        if self.age_hi < self.age_lo:
            raise ConfigurationError(f"{prefix}: empty age range")
        for name in self.coefficients:
            if name not in FEATURE_NAMES:
                raise ConfigurationError(f"{prefix}.coefficients: unknown feature {name!r}")


@dataclass
class WeightRow:
    """Ensemble weights that apply within one age band."""

    age_lo: int
    age_hi: int
    weights: list[float]


@dataclass
class RiskScore:
    five_year: float
    daily: float


def risk_score(five_year: float) -> RiskScore:
    return RiskScore(five_year=five_year, daily=five_year / DAYS_PER_FIVE_YEARS)


@dataclass
class EnsembleRiskModel:
    models: list[LogisticModel]
    weights: list[WeightRow]
    crossfade_years: int = 0
    calibration_offset: float = 0.0

    def validate(self) -> None:
        if not self.models:
            raise ConfigurationError("ensemble: at least one model required")
        for i, model in enumerate(self.models):
            model.validate(f"models[{i}]")
        if not self.weights:
            raise ConfigurationError("ensemble: at least one weight row required")
        n = len(self.models)
        prev_hi: int | None = None
        for i, row in enumerate(self.weights):
            if len(row.weights) != n:
                raise ConfigurationError(
                    f"weights[{i}]: {len(row.weights)} weights for {n} models"
                )
            if any(w < 0 for w in row.weights):
                raise ConfigurationError(f"weights[{i}]: negative weight")
            if abs(sum(row.weights) - 1.0) > 1e-9:
                raise ConfigurationError(f"weights[{i}]: weights must sum to 1")
            if row.age_hi < row.age_lo:
                raise ConfigurationError(f"weights[{i}]: empty age range")
            if prev_hi is not None and row.age_lo != prev_hi + 1:
                raise ConfigurationError(
                    f"weights[{i}]: bands must be contiguous and ascending"
                )
            prev_hi = row.age_hi
        if self.crossfade_years < 0:
            raise ConfigurationError("crossfade_years must be >= 0")
        if self.crossfade_years > 0:
            narrowest = min(r.age_hi - r.age_lo + 1 for r in self.weights)
            if 2 * self.crossfade_years > narrowest:
                raise ConfigurationError(
                    "crossfade_years too wide for the narrowest weight band"
                )


def logistic_score(model: LogisticModel, agent: Agent, offset: float = 0.0) -> float:
    """Five-year probability from one member model (plus calibration offset)."""
    lp = model.intercept + offset
    feats = agent_features(agent)
    for i, name in enumerate(FEATURE_NAMES):
        coef = model.coefficients.get(name)
        if coef is not None:
            lp += coef * feats[i]
    lp = min(max(lp, -_LP_LIMIT), _LP_LIMIT)
    return 1.0 / (1.0 + math.exp(-lp))


def weights_for_age(ensemble: EnsembleRiskModel, age: int) -> np.ndarray:
    """Ensemble weight vector at an age, crossfaded near band boundaries.

    Within `crossfade_years` of a boundary B the weights blend linearly
    from the lower row (pure at B - crossfade) to the upper row (pure at
    B + crossfade), meeting halfway at B itself.
    """
    rows = ensemble.weights
    if age < rows[0].age_lo:
        raise ConfigurationError(f"no ensemble weights defined at age {age}")
    # ages beyond the last row keep the oldest band's weights
    idx = len(rows) - 1
    for i, row in enumerate(rows):
        if row.age_lo <= age <= row.age_hi:
            idx = i
            break
    cf = ensemble.crossfade_years
    if cf > 0:
        if idx + 1 < len(rows):
            boundary = rows[idx + 1].age_lo
            if age >= boundary - cf:
                f = (age - (boundary - cf)) / (2.0 * cf)
                lo = np.asarray(rows[idx].weights, dtype=float)
                hi = np.asarray(rows[idx + 1].weights, dtype=float)
                return (1.0 - f) * lo + f * hi
        if idx > 0:
            boundary = rows[idx].age_lo
            if age < boundary + cf:
                f = (age - (boundary - cf)) / (2.0 * cf)
                lo = np.asarray(rows[idx - 1].weights, dtype=float)
                hi = np.asarray(rows[idx].weights, dtype=float)
                return (1.0 - f) * lo + f * hi
    return np.asarray(rows[idx].weights, dtype=float)


def weight_matrix(ensemble: EnsembleRiskModel, ages: np.ndarray) -> np.ndarray:
    """(n_agents, n_models) weight matrix; rows match `weights_for_age`."""
    ages = np.asarray(ages)
    out = np.empty((len(ages), len(ensemble.models)), dtype=float)
    for age in np.unique(ages):
        out[ages == age] = weights_for_age(ensemble, int(age))
    return out


def coefficient_matrix(ensemble: EnsembleRiskModel) -> tuple[np.ndarray, np.ndarray]:
    """Member coefficients as ((n_models, n_features), intercepts) arrays."""
    coefs = np.zeros((len(ensemble.models), len(FEATURE_NAMES)))
    intercepts = np.zeros(len(ensemble.models))
    for j, model in enumerate(ensemble.models):
        intercepts[j] = model.intercept
        for i, name in enumerate(FEATURE_NAMES):
            coefs[j, i] = model.coefficients.get(name, 0.0)
    return coefs, intercepts


def five_year_matrix(
    ensemble: EnsembleRiskModel,
    features: np.ndarray,
    ages: np.ndarray,
    offset: float | None = None,
) -> np.ndarray:
    """Vectorized ensemble score for many agents at once.

    Equivalent to `ensemble_score` per row; the engine uses this path so a
    year's worth of rescoring is a couple of matrix products.
    """
    if offset is None:
        offset = ensemble.calibration_offset
    coefs, intercepts = coefficient_matrix(ensemble)
    lps = features @ coefs.T + intercepts + offset
    return (weight_matrix(ensemble, ages) * _sigmoid(lps)).sum(axis=1)


def ensemble_score(ensemble: EnsembleRiskModel, agent: Agent) -> RiskScore:
    """Five-year and daily risk for one agent."""
    w = weights_for_age(ensemble, agent.age)
    five_year = 0.0
    for j, model in enumerate(ensemble.models):
        if w[j] != 0.0:
            five_year += w[j] * logistic_score(model, agent, ensemble.calibration_offset)
    return risk_score(five_year)


def refresh_risks(pop: Population, ensemble: EnsembleRiskModel) -> Population:
    """Rescore every stroke-free agent in place; agents with a stroke keep
    their last score."""
    for agent in pop.agents:
        if agent.stroke is None:
            score = ensemble_score(ensemble, agent)
            agent.five_year_risk = score.five_year
            agent.daily_risk = score.daily
    return pop


def expected_stroke_count(
    ensemble: EnsembleRiskModel,
    pop: Population,
    horizon_days: int,
    offset: float | None = None,
) -> float:
    """Closed-form expected first strokes over a horizon at frozen risks.

    Per agent the chance of at least one stroke in `horizon_days` draws at
    probability `daily` is 1 - (1 - daily)^horizon; summing over agents
    gives the expected count, with no simulation noise.
    """
    features = feature_matrix(pop.agents)
    ages = np.array([a.age for a in pop.agents])
    five_year = five_year_matrix(ensemble, features, ages, offset=offset)
    daily = five_year / DAYS_PER_FIVE_YEARS
    return float((1.0 - (1.0 - daily) ** horizon_days).sum())


def calibrate_intercepts(
    ensemble: EnsembleRiskModel,
    pop: Population,
    target_annual_risk: float,
    horizon_days: int = 3650,
    days_per_year: int = 365,
    tol: float = 1e-12,
    max_iter: int = 60,
) -> EnsembleRiskModel:
    """Find the calibration offset matching a target annual stroke risk.

    The target is expressed as expected first strokes per agent-year; the
    objective is the closed-form horizon expectation, so a calibrated model
    reproduces the target count exactly in expectation when simulated.  The
    expectation is monotone in the offset, so plain bisection over [-10, 10]
    does it; `tol` is in target units (annual risk per agent).  Raises
    CalibrationError (with the nearest achievable incidence) if the target
    is outside the bracket's reach.
    """
    ensemble.validate()
    if target_annual_risk <= 0 or target_annual_risk > 0.05:
        raise ConfigurationError(
            f"target_annual_risk = {target_annual_risk} outside (0, 0.05]"
        )
    features = feature_matrix(pop.agents)
    ages = np.array([a.age for a in pop.agents])
    coefs, intercepts = coefficient_matrix(ensemble)
    lps = features @ coefs.T + intercepts
    wmat = weight_matrix(ensemble, ages)
    years = horizon_days / days_per_year
    target_count = target_annual_risk * len(pop.agents) * years
    tol_count = tol * len(pop.agents) * years

    def expected(delta: float) -> float:
        five_year = (wmat * _sigmoid(lps + delta)).sum(axis=1)
        daily = five_year / DAYS_PER_FIVE_YEARS
        return float((1.0 - (1.0 - daily) ** horizon_days).sum())

    lo, hi = -10.0, 10.0
    f_lo = expected(lo) - target_count
    f_hi = expected(hi) - target_count
    if f_lo > 0 or f_hi < 0:
        nearest = expected(hi) if f_hi < 0 else expected(lo)
        raise CalibrationError(
            f"target {target_annual_risk} per agent-year is outside the "
            f"achievable range for this model and population",
            achieved=nearest / (len(pop.agents) * years),
        )
    delta = 0.0
    for _ in range(max_iter):
        delta = 0.5 * (lo + hi)
        f_mid = expected(delta) - target_count
        if abs(f_mid) <= tol_count or (hi - lo) < 1e-15:
            break
        if f_mid > 0:
            hi = delta
        else:
            lo = delta
    return replace(ensemble, calibration_offset=delta)
