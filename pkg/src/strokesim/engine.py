"""One replication of the stroke microsimulation.

The run is a 10-year daily loop.  On every year boundary (day 0 included)
agents age a year, lose a year of remaining life expectancy, get rescored,
and the intervention scenario may notify them of high risk and reduce
their factors.  On every day a stroke-free agent may stroke with its daily
risk; a stroke draws an arrival delay, a delay-adjusted severity, and its
DALY contribution, and removes the agent from further dynamics.

Two sampling paths produce the same stroke-day distribution: the naive
path draws one uniform per agent per day, the skip path draws the day of
first success directly from the geometric distribution (one uniform per
agent per year).  The skip path is the production path; the naive path
exists as the oracle it is tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .population import (
    BMI_RANGE,
    DBP_RANGE,
    SBP_RANGE,
    Agent,
    BaselineStats,
    Population,
    population_stats,
)
from .risk import (
    DAYS_PER_FIVE_YEARS,
    FEATURE_NAMES,
    EnsembleRiskModel,
    ensemble_score,
    feature_matrix,
    five_year_matrix,
)


class Severity(Enum):
    NO_DISABILITY = "no_disability"
    MILD = "mild"
    MODERATE_SEVERE = "moderate_severe"
    DEATH = "death"


# Death carries no disability weight; it is accounted as years of life lost.
DISABILITY_WEIGHTS = {
    Severity.NO_DISABILITY: 0.0,
    Severity.MILD: 0.35,
    Severity.MODERATE_SEVERE: 0.7,
}

SEVERITY_ORDER = (
    Severity.NO_DISABILITY, Severity.MILD, Severity.MODERATE_SEVERE, Severity.DEATH,
)


@dataclass
class SeverityDistribution:
    p_no: float
    p_mild: float
    p_modsev: float
    p_death: float

    def validate(self) -> None:
        probs = (self.p_no, self.p_mild, self.p_modsev, self.p_death)
        for p in probs:
            if not (0.0 <= p <= 1.0):
                raise ConfigurationError(f"severity probability {p} outside [0, 1]")
        if abs(sum(probs) - 1.0) > 1e-9:
            raise ConfigurationError(f"severity probabilities sum to {sum(probs)}")

    @staticmethod
    def default() -> "SeverityDistribution":
        return SeverityDistribution(0.19, 0.35, 0.37, 0.09)


@dataclass
class DelayBand:
    cum_threshold: float
    lo: float
    hi: float  # math.inf for the open last band
    mean: float
    sd: float


@dataclass
class DelayModel:
    """Arrival-delay mixture: a band picked by one uniform, hours from the
    band's normal, clamped into the band (the open band caps at mean + 6 sd)."""

    bands: list[DelayBand]

    def validate(self) -> None:
        if not self.bands:
            raise ConfigurationError("delay model: no bands")
        prev = 0.0
        for i, band in enumerate(self.bands):
            if band.cum_threshold <= prev:
                raise ConfigurationError(f"delay band {i}: thresholds must increase")
            if band.sd <= 0:
                raise ConfigurationError(f"delay band {i}: sd must be > 0")
            if band.hi <= band.lo:
                raise ConfigurationError(f"delay band {i}: empty hours range")
            if i > 0 and band.lo != self.bands[i - 1].hi:
                raise ConfigurationError(f"delay band {i}: bands must be contiguous")
            prev = band.cum_threshold
        if self.bands[-1].cum_threshold != 1.0:
            raise ConfigurationError("delay model: last threshold must be exactly 1")

    @staticmethod
    def default() -> "DelayModel":
        return DelayModel([
            DelayBand(0.49, 0.0, 3.0, 1.5, 0.75),
            DelayBand(0.59, 3.0, 4.5, 3.75, 0.375),
            DelayBand(0.79, 4.5, 12.0, 8.25, 1.875),
            DelayBand(1.0, 12.0, math.inf, 15.0, 1.0),
        ])


@dataclass
class OddsRatioRow:
    delay_lo: float
    delay_hi: float  # math.inf for the reference row
    or_mrs_le1: float
    or_mrs_ge2: float


@dataclass
class OddsRatioTable:
    """Delay-banded outcome odds ratios; the open-ended row is the reference."""

    rows: list[OddsRatioRow]

    def validate(self) -> None:
        if not self.rows:
            raise ConfigurationError("odds ratio table: no rows")
        for i, row in enumerate(self.rows):
            if row.or_mrs_le1 <= 0 or row.or_mrs_ge2 <= 0:
                raise ConfigurationError(f"odds ratio row {i}: ratios must be > 0")
            if row.delay_hi <= row.delay_lo:
                raise ConfigurationError(f"odds ratio row {i}: empty delay range")
            if i > 0 and row.delay_lo != self.rows[i - 1].delay_hi:
                raise ConfigurationError(f"odds ratio row {i}: rows must be contiguous")
        last = self.rows[-1]
        if not (math.isinf(last.delay_hi) and last.or_mrs_le1 == 1.0 and last.or_mrs_ge2 == 1.0):
            raise ConfigurationError("odds ratio table: last row must be the (1, 1) reference")

    def row_for_delay(self, delay_hours: float) -> OddsRatioRow:
        for row in self.rows:
            if row.delay_lo <= delay_hours < row.delay_hi:
                return row
        return self.rows[-1]

    @staticmethod
    def default() -> "OddsRatioTable":
        return OddsRatioTable([
            OddsRatioRow(0.0, 3.0, 1.66, 1.73),
            OddsRatioRow(3.0, 8.0, 1.15, 0.98),
            OddsRatioRow(8.0, math.inf, 1.0, 1.0),
        ])


@dataclass
class LifeTable:
    """Residual life expectancy by integer age and sex.

    Lookups clamp outside the tabulated range and interpolate linearly
    between listed ages, so sparse anchor tables work too.
    """

    ages: list[int]
    female: list[float]
    male: list[float]

    def validate(self) -> None:
        if len(self.ages) == 0 or len(self.female) != len(self.ages) or len(self.male) != len(self.ages):
            raise ConfigurationError("life table: ages/female/male lengths must match")
        for i in range(1, len(self.ages)):
            if self.ages[i] <= self.ages[i - 1]:
                raise ConfigurationError("life table: ages must be strictly increasing")
        for values in (self.female, self.male):
            if any(v < 0 for v in values):
                raise ConfigurationError("life table: negative life expectancy")
            for i in range(1, len(self.ages)):
                # age + LE(age) may not decrease: dying earlier by aging is absurd
                if self.ages[i] + values[i] < self.ages[i - 1] + values[i - 1] - 1e-9:
                    raise ConfigurationError("life table: age + LE(age) must be nondecreasing")

    def residual(self, sex: str, age: float) -> float:
        values = self.male if sex == "male" else self.female
        return float(np.interp(age, self.ages, values))

    def residual_array(self, male: np.ndarray, ages: np.ndarray) -> np.ndarray:
        f = np.interp(ages, self.ages, self.female)
        m = np.interp(ages, self.ages, self.male)
        return np.where(male > 0.5, m, f)


@dataclass
class StrokeOutcome:
    agent_id: int
    day: int
    delay_hours: float
    severity: Severity
    disability_weight: float
    yll: float
    yld: float
    daly: float


class Scenario(Enum):
    BASELINE = "baseline"
    CONVERSATIONS = "conversations"
    CONVERSATIONS_PLUS_FAMILY = "conversations_plus_family"


@dataclass
class ScenarioConfig:
    scenario: Scenario = Scenario.BASELINE
    conversation_ages: tuple[int, ...] = (50, 60, 70, 80, 90)
    high_risk_threshold: float = 0.1  # on the five-year score, not the daily one
    bmi_reduction_sd_fraction: float = 0.5
    bp_reduction_sd_fraction: float = 0.1
    horizon_days: int = 3650
    days_per_year: int = 365

    def validate(self) -> None:
        if not (0.0 < self.high_risk_threshold < 1.0):
            raise ConfigurationError(
                f"high_risk_threshold = {self.high_risk_threshold} outside (0, 1)"
            )
        if list(self.conversation_ages) != sorted(self.conversation_ages):
            raise ConfigurationError("conversation_ages must be ascending")
        if self.horizon_days <= 0 or self.days_per_year <= 0:
            raise ConfigurationError("horizon_days and days_per_year must be > 0")
        for name in ("bmi_reduction_sd_fraction", "bp_reduction_sd_fraction"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0")


@dataclass
class RunResult:
    total_strokes: int
    total_dalys: float
    mean_dalys_per_stroke: float
    strokes_by_severity: dict[str, int]
    seed: Optional[int]
    conversations: int
    risk_reductions: int
    family_reductions: int
    outcomes: list[StrokeOutcome] = field(default_factory=list)


# --- scalar operations (the contract; the array engine below must agree) ---


def draw_stroke(agent: Agent, rng: np.random.Generator) -> bool:
    return rng.random() < agent.daily_risk


def first_success_offset(p: float, u: float, window: int) -> Optional[int]:
    """Day offset of the first success of Bernoulli(p) over `window` trials.

    Inverse-transform geometric: floor(log(1-u)/log(1-p)).  Returns None
    when no success falls inside the window; p = 0 can never succeed and
    p = 1 succeeds immediately.
    """
    if p <= 0.0:
        return None
    if p >= 1.0:
        return 0
    offset = int(math.floor(math.log1p(-u) / math.log1p(-p)))
    return offset if offset < window else None


def skip_sample_stroke_day(
    agent: Agent, days_remaining_in_year: int, rng: np.random.Generator
) -> Optional[int]:
    """Skip-sampled stroke-day offset within the year, or None.

    Always consumes exactly one uniform (even at p = 0) so the stream
    layout does not depend on the agent's risk.
    """
    u = rng.random()
    return first_success_offset(agent.daily_risk, u, days_remaining_in_year)


def sample_delay(delay: DelayModel, rng: np.random.Generator) -> float:
    """Hours from stroke onset to hospital arrival.

    One uniform picks the band (u <= cumulative threshold), one normal
    draw gives the hours, clamped into the band.
    """
    u = rng.random()
    band = delay.bands[-1]
    for candidate in delay.bands:
        if u <= candidate.cum_threshold:
            band = candidate
            break
    hours = rng.normal(band.mean, band.sd)
    hi = min(band.hi, band.mean + 6.0 * band.sd)
    return float(min(max(hours, band.lo), hi))


def adjust_severity(
    base: SeverityDistribution, delay_hours: float, ors: OddsRatioTable
) -> SeverityDistribution:
    """Shift the severity distribution for the arrival delay.

    The row's first ratio scales the odds of no disability; the second is
    read as the odds in favor of avoiding mRS >= 2, so the combined
    moderate-severe + death mass has its odds divided by it (the internal
    modsev:death ratio is preserved).  Mild absorbs the remainder; if that
    goes negative it is clamped to 0 and the vector renormalized.  The
    reference row returns the input untouched.
    """
    base.validate()
    row = ors.row_for_delay(delay_hours)
    if row.or_mrs_le1 == 1.0 and row.or_mrs_ge2 == 1.0:
        return base

    if base.p_no >= 1.0:
        return base
    odds_no = row.or_mrs_le1 * base.p_no / (1.0 - base.p_no)
    p_no = odds_no / (1.0 + odds_no)

    bad = base.p_modsev + base.p_death
    if bad >= 1.0:
        return base
    if bad > 0.0:
        odds_bad = (bad / (1.0 - bad)) / row.or_mrs_ge2
        bad_new = odds_bad / (1.0 + odds_bad)
        p_modsev = bad_new * (base.p_modsev / bad)
        p_death = bad_new * (base.p_death / bad)
    else:
        p_modsev = 0.0
        p_death = 0.0

    p_mild = 1.0 - p_no - p_modsev - p_death
    if p_mild < 0.0:
        p_mild = 0.0
        total = p_no + p_modsev + p_death
        p_no, p_modsev, p_death = p_no / total, p_modsev / total, p_death / total
    return SeverityDistribution(p_no, p_mild, p_modsev, p_death)


def sample_severity(dist: SeverityDistribution, rng: np.random.Generator) -> Severity:
    """Categorical draw in the fixed order no / mild / modsev / death."""
    u = rng.random()
    cum = 0.0
    for severity, p in zip(
        SEVERITY_ORDER, (dist.p_no, dist.p_mild, dist.p_modsev, dist.p_death)
    ):
        cum += p
        if u < cum:
            return severity
    return Severity.DEATH


def compute_outcome(
    agent: Agent, day: int, delay_hours: float, severity: Severity, life: LifeTable
) -> StrokeOutcome:
    """DALY contribution of one stroke, fixed at the moment it happens.

    Death costs the agent's residual life expectancy as YLL; survivors
    carry their residual years times the disability weight as YLD.
    """
    residual = max(agent.remaining_life_expectancy, 0.0)
    if severity is Severity.DEATH:
        weight = 0.0
        yll, yld = residual, 0.0
    else:
        weight = DISABILITY_WEIGHTS[severity]
        yll, yld = 0.0, residual * weight
    return StrokeOutcome(
        agent_id=agent.id, day=day, delay_hours=delay_hours, severity=severity,
        disability_weight=weight, yll=yll, yld=yld, daly=yll + yld,
    )


def hold_conversation(agent: Agent, scenario: ScenarioConfig) -> bool:
    """GP conversation at the scheduled ages; notifies if risk is high."""
    notified = (
        agent.age in scenario.conversation_ages
        and agent.five_year_risk > scenario.high_risk_threshold
    )
    if notified:
        agent.notified_high_risk = True
    return notified


def reduce_risk(
    agent: Agent,
    baseline_stats: BaselineStats,
    scenario: Optional[ScenarioConfig] = None,
    ens: Optional[EnsembleRiskModel] = None,
) -> Agent:
    """One-off risk-factor reduction after a high-risk notification.

    Quits smoking outright; BMI drops half a population sd when above the
    population mean; both blood pressures drop a tenth of a sd.  Values
    floor at the physiologic minima.  Passing the ensemble rescores the
    agent immediately; the engine always does.
    """
    cfg = scenario or ScenarioConfig()
    if agent.smoker:
        agent.smoker = False
        agent.cigs_per_day = 0
    if agent.bmi > baseline_stats.bmi_mean:
        agent.bmi = max(
            BMI_RANGE[0], agent.bmi - cfg.bmi_reduction_sd_fraction * baseline_stats.bmi_sd
        )
    agent.sbp = max(
        SBP_RANGE[0], agent.sbp - cfg.bp_reduction_sd_fraction * baseline_stats.sbp_sd
    )
    agent.dbp = max(
        DBP_RANGE[0], agent.dbp - cfg.bp_reduction_sd_fraction * baseline_stats.dbp_sd
    )
    agent.risk_reduced = True
    if ens is not None:
        score = ensemble_score(ens, agent)
        agent.five_year_risk = score.five_year
        agent.daily_risk = score.daily
    return agent


def apply_family_spillover(
    pop: Population,
    scenario: ScenarioConfig,
    ens: Optional[EnsembleRiskModel] = None,
) -> Population:
    """Household members of notified agents reduce their own risk.

    Applies to stroke-free, not-yet-reduced agents who share a household
    with any notified agent.  Safe to reapply; the risk_reduced guard
    makes it idempotent.
    """
    stats = pop.baseline_stats or population_stats(pop)
    notified_households = {
        a.household_id for a in pop.agents if a.notified_high_risk
    }
    for agent in pop.agents:
        if (
            agent.household_id in notified_households
            and not agent.risk_reduced
            and agent.stroke is None
        ):
            reduce_risk(agent, stats, scenario, ens)
    return pop


# --- the array engine ---

_COL = {name: i for i, name in enumerate(FEATURE_NAMES)}


@dataclass
class PopulationArrays:
    """Column-oriented copy of a Population for the replication hot path.

    Row order is agent order; `features` columns follow FEATURE_NAMES.
    Building one is the slow part, so callers that run many replications
    build once and hand out `copy()` per run.
    """

    ids: np.ndarray
    features: np.ndarray
    age: np.ndarray
    male: np.ndarray
    household: np.ndarray  # dense household index per agent
    stats: BaselineStats

    @staticmethod
    def from_population(pop: Population) -> "PopulationArrays":
        if not pop.agents:
            raise ConfigurationError("empty population")
        features = feature_matrix(pop.agents)
        ids = np.array([a.id for a in pop.agents], dtype=np.int64)
        age = features[:, _COL["age"]].astype(np.int64)
        male = features[:, _COL["male"]].copy()
        hh_raw = np.array([a.household_id for a in pop.agents], dtype=np.int64)
        _, household = np.unique(hh_raw, return_inverse=True)
        stats = pop.baseline_stats or population_stats(pop)
        return PopulationArrays(
            ids=ids, features=features, age=age, male=male,
            household=household, stats=stats,
        )

    def copy(self) -> "PopulationArrays":
        return PopulationArrays(
            ids=self.ids, features=self.features.copy(), age=self.age.copy(),
            male=self.male, household=self.household, stats=self.stats,
        )


def _first_success_offsets(p: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vector form of first_success_offset; inf marks no-success-ever."""
    out = np.full(p.shape, np.inf)
    certain = p >= 1.0
    out[certain] = 0.0
    open_ = (p > 0.0) & ~certain
    out[open_] = np.floor(np.log1p(-u[open_]) / np.log1p(-p[open_]))
    return out


def _apply_reduction_rows(
    arrays: PopulationArrays, rows: np.ndarray, cfg: ScenarioConfig
) -> None:
    X, stats = arrays.features, arrays.stats
    X[rows, _COL["smoker"]] = 0.0
    X[rows, _COL["cigs_per_day"]] = 0.0
    bmi = X[rows, _COL["bmi"]]
    above = bmi > stats.bmi_mean
    bmi[above] = np.maximum(
        BMI_RANGE[0], bmi[above] - cfg.bmi_reduction_sd_fraction * stats.bmi_sd
    )
    X[rows, _COL["bmi"]] = bmi
    X[rows, _COL["sbp"]] = np.maximum(
        SBP_RANGE[0], X[rows, _COL["sbp"]] - cfg.bp_reduction_sd_fraction * stats.sbp_sd
    )
    X[rows, _COL["dbp"]] = np.maximum(
        DBP_RANGE[0], X[rows, _COL["dbp"]] - cfg.bp_reduction_sd_fraction * stats.dbp_sd
    )


def run_replication(
    pop: Population | PopulationArrays,
    ens: EnsembleRiskModel,
    scenario: ScenarioConfig,
    delay: DelayModel,
    sev: SeverityDistribution,
    ors: OddsRatioTable,
    life: LifeTable,
    rng: np.random.Generator | int,
    use_skip_sampling: bool = True,
) -> RunResult:
    """Run one full replication and aggregate its outcomes.

    The input population is never mutated; the run works on an array copy.
    Passing an integer seed records it in the result, passing a Generator
    records None.  With identical inputs and seed the result is identical,
    whichever sampling path is selected (each path is deterministic; the
    two paths agree in distribution, not draw for draw).
    """
    scenario.validate()
    delay.validate()
    sev.validate()
    ors.validate()
    life.validate()

    seed: Optional[int] = None
    if isinstance(rng, (int, np.integer)):
        seed = int(rng)
        rng = np.random.default_rng(seed)

    base = pop if isinstance(pop, PopulationArrays) else PopulationArrays.from_population(pop)
    arrays = base.copy()
    n = len(arrays.ids)
    X = arrays.features

    rle = life.residual_array(arrays.male, arrays.age)
    stroke_day = np.full(n, -1, dtype=np.int64)
    notified = np.zeros(n, dtype=bool)
    reduced = np.zeros(n, dtype=bool)
    five_year = np.zeros(n)
    daily = np.zeros(n)

    conv_ages = np.array(scenario.conversation_ages, dtype=np.int64)
    n_households = int(arrays.household.max()) + 1
    interventions_on = scenario.scenario is not Scenario.BASELINE
    spillover_on = scenario.scenario is Scenario.CONVERSATIONS_PLUS_FAMILY

    outcomes: list[StrokeOutcome] = []
    severity_counts = {s.value: 0 for s in SEVERITY_ORDER}
    total_dalys = 0.0
    conversations = 0
    risk_reductions = 0
    family_reductions = 0

    def rescore(mask: np.ndarray) -> None:
        fy = five_year_matrix(ens, X[mask], arrays.age[mask])
        five_year[mask] = fy
        daily[mask] = fy / DAYS_PER_FIVE_YEARS

    def process_stroke(row: int, day: int) -> None:
        nonlocal total_dalys
        hours = sample_delay(delay, rng)
        dist = adjust_severity(sev, hours, ors)
        severity = sample_severity(dist, rng)
        residual = max(float(rle[row]), 0.0)
        if severity is Severity.DEATH:
            weight, yll, yld = 0.0, residual, 0.0
        else:
            weight = DISABILITY_WEIGHTS[severity]
            yll, yld = 0.0, residual * weight
        outcomes.append(StrokeOutcome(
            agent_id=int(arrays.ids[row]), day=day, delay_hours=hours,
            severity=severity, disability_weight=weight,
            yll=yll, yld=yld, daly=yll + yld,
        ))
        severity_counts[severity.value] += 1
        total_dalys += yll + yld
        stroke_day[row] = day

    day = 0
    while day < scenario.horizon_days:
        active = stroke_day < 0

        # year boundary: birthdays first, then rescoring, then interventions
        arrays.age[active] += 1
        rle[active] -= 1.0
        X[:, _COL["age"]] = arrays.age
        rescore(active)

        if interventions_on:
            talk = active & np.isin(arrays.age, conv_ages) & (five_year > scenario.high_risk_threshold)
            conversations += int(talk.sum())
            notified |= talk

            own = active & notified & ~reduced
            if own.any():
                rows = np.flatnonzero(own)
                _apply_reduction_rows(arrays, rows, scenario)
                reduced[own] = True
                risk_reductions += len(rows)
                rescore(own)

            if spillover_on:
                flagged = np.zeros(n_households, dtype=bool)
                flagged[arrays.household[notified]] = True
                spill = active & ~reduced & flagged[arrays.household]
                if spill.any():
                    rows = np.flatnonzero(spill)
                    _apply_reduction_rows(arrays, rows, scenario)
                    reduced[spill] = True
                    family_reductions += len(rows)
                    rescore(spill)

        window = min(scenario.days_per_year, scenario.horizon_days - day)
        act_rows = np.flatnonzero(active)
        if use_skip_sampling:
            u = rng.random(act_rows.size)
            offsets = _first_success_offsets(daily[act_rows], u)
            hit = offsets < window
            hit_rows = act_rows[hit]
            hit_days = day + offsets[hit].astype(np.int64)
            for i in np.lexsort((hit_rows, hit_days)):
                process_stroke(int(hit_rows[i]), int(hit_days[i]))
        else:
            for d in range(day, day + window):
                act_rows = np.flatnonzero(stroke_day < 0)
                u = rng.random(act_rows.size)
                for row in act_rows[u < daily[act_rows]]:
                    process_stroke(int(row), d)

        day += window

    total_strokes = len(outcomes)
    return RunResult(
        total_strokes=total_strokes,
        total_dalys=total_dalys,
        mean_dalys_per_stroke=total_dalys / total_strokes if total_strokes else 0.0,
        strokes_by_severity=severity_counts,
        seed=seed,
        conversations=conversations,
        risk_reductions=risk_reductions,
        family_reductions=family_reductions,
        outcomes=outcomes,
    )
