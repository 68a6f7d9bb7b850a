"""Config file loading.

Everything the simulation consumes is plain JSON: a population file
(demographic marginals plus age-banded risk factor tables), a risk model
file (ensemble members and weights), a life table, and an experiment file
that ties them together with the delay/severity constants and the Monte
Carlo settings.  References of the form "strokesim:NAME" resolve to the
package's bundled data directory; anything else is a filesystem path,
resolved relative to the referencing file.

Loaders validate as they build and raise ConfigurationError with the file
and field that broke.
"""

from __future__ import annotations

import importlib.resources
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from .engine import (
    DelayBand,
    DelayModel,
    LifeTable,
    OddsRatioRow,
    OddsRatioTable,
    Scenario,
    ScenarioConfig,
    SeverityDistribution,
)
from .errors import ConfigurationError
from .population import (
    DemographicSpec,
    RegionSpec,
    RiskFactorBand,
    RiskFactorTables,
    parse_age_range,
)
from .risk import EnsembleRiskModel, LogisticModel, WeightRow

BUNDLED_PREFIX = "strokesim:"
DEFAULT_EXPERIMENT = BUNDLED_PREFIX + "experiment_ie.json"

# Upper age used when a JSON age range leaves the top open (null).
OPEN_AGE = 200

_HARMFUL_FEATURES = ("sbp", "dbp", "bmi", "diabetes", "afib", "smoker", "cigs_per_day")


def _read_ref(ref: str | Path, base_dir: Optional[Path]) -> tuple[str, str]:
    """Fetch a config reference; returns (text, display name)."""
    if isinstance(ref, str) and ref.startswith(BUNDLED_PREFIX):
        name = ref[len(BUNDLED_PREFIX):]
        resource = importlib.resources.files("strokesim").joinpath("data", name)
        try:
            return resource.read_text(), ref
        except (FileNotFoundError, OSError) as exc:
            raise ConfigurationError(f"bundled resource {ref!r} not found") from exc
    path = Path(ref)
    if not path.is_absolute() and base_dir is not None:
        path = base_dir / path
    try:
        return path.read_text(), str(path)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc


def _parse_json(text: str, name: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"{name}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc


def _get(obj: dict, key: str, where: str, expect: Optional[type] = None, default: Any = ...) -> Any:
    if not isinstance(obj, dict):
        raise ConfigurationError(f"{where}: expected an object")
    if key not in obj:
        if default is not ...:
            return default
        raise ConfigurationError(f"{where}: missing required field {key!r}")
    value = obj[key]
    if expect is not None and not isinstance(value, expect):
        # bool is an int subclass; keep the check honest for numerics
        if not (expect is float and isinstance(value, int) and not isinstance(value, bool)):
            raise ConfigurationError(f"{where}.{key}: expected {expect.__name__}")
    return value


def _age_range(value: Any, where: str) -> tuple[int, int]:
    if not isinstance(value, list) or len(value) != 2:
        raise ConfigurationError(f"{where}: age_range must be [lo, hi]")
    lo = value[0]
    hi = OPEN_AGE if value[1] is None else value[1]
    if not isinstance(lo, int) or not isinstance(hi, int):
        raise ConfigurationError(f"{where}: age_range bounds must be integers")
    return lo, hi


def load_population_file(
    ref: str | Path, base_dir: Optional[Path] = None
) -> tuple[DemographicSpec, RiskFactorTables]:
    text, name = _read_ref(ref, base_dir)
    data = _parse_json(text, name)
    demo = _get(data, "demographics", name, dict)

    regions = []
    for i, entry in enumerate(_get(demo, "regions", f"{name}.demographics", list)):
        where = f"{name}.demographics.regions[{i}]"
        regions.append(RegionSpec(
            name=_get(entry, "name", where, str),
            share=float(_get(entry, "share", where, float)),
            sex={k: float(v) for k, v in _get(entry, "sex", where, dict).items()},
            age_bands={k: float(v) for k, v in _get(entry, "age_bands", where, dict).items()},
            employment={k: float(v) for k, v in _get(entry, "employment", where, dict).items()},
            households={k: float(v) for k, v in _get(entry, "households", where, dict).items()},
        ))
    spec = DemographicSpec(
        regions=regions,
        total_agents=_get(demo, "total_agents", f"{name}.demographics", int),
        scale_factor=_get(demo, "scale_factor", f"{name}.demographics", int, default=100),
        min_age=_get(demo, "min_age", f"{name}.demographics", int, default=35),
    )
    spec.validate()

    bands = []
    rf = _get(data, "risk_factors", name, dict)
    for i, entry in enumerate(_get(rf, "bands", f"{name}.risk_factors", list)):
        where = f"{name}.risk_factors.bands[{i}]"
        ages = _get(entry, "ages", where, str)
        lo, hi = parse_age_range(ages)
        bands.append(RiskFactorBand(
            age_lo=lo, age_hi=hi,
            sbp_mean=float(_get(entry, "sbp_mean", where, float)),
            sbp_sd=float(_get(entry, "sbp_sd", where, float)),
            dbp_mean=float(_get(entry, "dbp_mean", where, float)),
            dbp_sd=float(_get(entry, "dbp_sd", where, float)),
            bmi_mean=float(_get(entry, "bmi_mean", where, float)),
            bmi_sd=float(_get(entry, "bmi_sd", where, float)),
            diabetes_prev=float(_get(entry, "diabetes_prev", where, float)),
            afib_prev=float(_get(entry, "afib_prev", where, float)),
            smoker_prev=float(_get(entry, "smoker_prev", where, float)),
            cigs_per_day_mean=float(_get(entry, "cigs_per_day_mean", where, float)),
        ))
    tables = RiskFactorTables(bands=bands)
    tables.validate()
    return spec, tables


def load_risk_model(ref: str | Path, base_dir: Optional[Path] = None) -> EnsembleRiskModel:
    """Load an ensemble model file.

    The bundled model must obey the sign convention (harmful factors have
    nonnegative coefficients); user-supplied models only get a warning,
    because a fitted model may legitimately disagree.
    """
    text, name = _read_ref(ref, base_dir)
    data = _parse_json(text, name)
    bundled = isinstance(ref, str) and ref.startswith(BUNDLED_PREFIX)

    models = []
    for i, entry in enumerate(_get(data, "models", name, list)):
        where = f"{name}.models[{i}]"
        lo, hi = _age_range(_get(entry, "age_range", where), where)
        coefficients = {
            k: float(v) for k, v in _get(entry, "coefficients", where, dict).items()
        }
        for feature in _HARMFUL_FEATURES:
            coef = coefficients.get(feature, 0.0)
            if coef < 0:
                message = (
                    f"{where}.coefficients.{feature} = {coef} is negative; "
                    "harmful factors are expected to be nonprotective"
                )
                if bundled:
                    raise ConfigurationError(message)
                warnings.warn(message, stacklevel=2)
        models.append(LogisticModel(
            age_lo=lo, age_hi=hi,
            intercept=float(_get(entry, "intercept", where, float)),
            coefficients=coefficients,
        ))

    weights = []
    for i, entry in enumerate(_get(data, "weights", name, list)):
        where = f"{name}.weights[{i}]"
        lo, hi = _age_range(_get(entry, "age_range", where), where)
        weights.append(WeightRow(
            age_lo=lo, age_hi=hi,
            weights=[float(w) for w in _get(entry, "weights", where, list)],
        ))

    ens = EnsembleRiskModel(
        models=models,
        weights=weights,
        crossfade_years=_get(data, "crossfade_years", name, int, default=0),
        calibration_offset=float(_get(data, "calibration_offset", name, float, default=0.0)),
    )
    ens.validate()
    return ens


def dump_risk_model(ens: EnsembleRiskModel, path: str | Path) -> None:
    """Inverse of load_risk_model, for writing calibrated models."""
    def open_hi(hi: int) -> Optional[int]:
        return None if hi >= OPEN_AGE else hi

    data = {
        "models": [
            {
                "age_range": [m.age_lo, open_hi(m.age_hi)],
                "intercept": m.intercept,
                "coefficients": dict(m.coefficients),
            }
            for m in ens.models
        ],
        "weights": [
            {"age_range": [w.age_lo, open_hi(w.age_hi)], "weights": list(w.weights)}
            for w in ens.weights
        ],
        "crossfade_years": ens.crossfade_years,
        "calibration_offset": ens.calibration_offset,
    }
    with open(path, "w") as handle:
        json.dump(data, handle, indent=2)
        handle.write("\n")


def load_life_table(ref: str | Path, base_dir: Optional[Path] = None) -> LifeTable:
    text, name = _read_ref(ref, base_dir)
    data = _parse_json(text, name)
    table = LifeTable(
        ages=[int(a) for a in _get(data, "ages", name, list)],
        female=[float(v) for v in _get(data, "female", name, list)],
        male=[float(v) for v in _get(data, "male", name, list)],
    )
    try:
        table.validate()
    except ConfigurationError as exc:
        raise ConfigurationError(f"{name}: {exc}") from exc
    return table


def _load_delay(data: Optional[dict], name: str) -> DelayModel:
    if data is None:
        return DelayModel.default()
    bands = []
    for i, entry in enumerate(_get(data, "bands", name, list)):
        where = f"{name}.bands[{i}]"
        hours = _get(entry, "hours", where, list)
        if len(hours) != 2:
            raise ConfigurationError(f"{where}: hours must be [lo, hi]")
        bands.append(DelayBand(
            cum_threshold=float(_get(entry, "cum_threshold", where, float)),
            lo=float(hours[0]),
            hi=math.inf if hours[1] is None else float(hours[1]),
            mean=float(_get(entry, "mean", where, float)),
            sd=float(_get(entry, "sd", where, float)),
        ))
    model = DelayModel(bands=bands)
    model.validate()
    return model


def _load_severity(data: Optional[dict], name: str) -> tuple[SeverityDistribution, OddsRatioTable]:
    if data is None:
        return SeverityDistribution.default(), OddsRatioTable.default()
    base = _get(data, "base", name, list)
    if len(base) != 4:
        raise ConfigurationError(f"{name}.base: expected 4 probabilities")
    sev = SeverityDistribution(*(float(p) for p in base))
    sev.validate()

    rows = []
    for i, entry in enumerate(_get(data, "odds_ratios", name, list, default=[])):
        where = f"{name}.odds_ratios[{i}]"
        delay = _get(entry, "delay", where, list)
        if len(delay) != 2:
            raise ConfigurationError(f"{where}: delay must be [lo, hi]")
        rows.append(OddsRatioRow(
            delay_lo=float(delay[0]),
            delay_hi=math.inf if delay[1] is None else float(delay[1]),
            or_mrs_le1=float(_get(entry, "or_mrs_le1", where, float)),
            or_mrs_ge2=float(_get(entry, "or_mrs_ge2", where, float)),
        ))
    ors = OddsRatioTable(rows=rows) if rows else OddsRatioTable.default()
    ors.validate()
    return sev, ors


@dataclass
class AppConfig:
    """Everything an experiment needs, loaded and validated."""

    source: str
    population_ref: str
    risk_model_ref: str
    life_table_ref: str
    demographics: DemographicSpec
    risk_tables: RiskFactorTables
    ensemble: EnsembleRiskModel
    life_table: LifeTable
    delay: DelayModel
    severity: SeverityDistribution
    odds_ratios: OddsRatioTable
    conversation_ages: tuple[int, ...]
    high_risk_threshold: float
    bmi_reduction_sd_fraction: float
    bp_reduction_sd_fraction: float
    horizon_days: int
    days_per_year: int
    base_seed: int
    n_runs: int
    significance_level: float
    use_skip_sampling: bool
    common_random_numbers: bool
    welch: bool
    calibration_target: float
    calibration_tol: float

    def make_scenario(self, kind: Scenario) -> ScenarioConfig:
        cfg = ScenarioConfig(
            scenario=kind,
            conversation_ages=self.conversation_ages,
            high_risk_threshold=self.high_risk_threshold,
            bmi_reduction_sd_fraction=self.bmi_reduction_sd_fraction,
            bp_reduction_sd_fraction=self.bp_reduction_sd_fraction,
            horizon_days=self.horizon_days,
            days_per_year=self.days_per_year,
        )
        cfg.validate()
        return cfg


def load_experiment_file(ref: str | Path = DEFAULT_EXPERIMENT, base_dir: Optional[Path] = None) -> AppConfig:
    text, name = _read_ref(ref, base_dir)
    data = _parse_json(text, name)
    if not isinstance(ref, str) or not ref.startswith(BUNDLED_PREFIX):
        base_dir = Path(name).parent
    else:
        base_dir = None

    population_ref = _get(data, "population", name, str)
    risk_model_ref = _get(data, "risk_model", name, str)
    life_table_ref = _get(data, "life_table", name, str)
    demographics, risk_tables = load_population_file(population_ref, base_dir)
    ensemble = load_risk_model(risk_model_ref, base_dir)
    life_table = load_life_table(life_table_ref, base_dir)

    sim = _get(data, "simulation", name, dict, default={})
    sim_where = f"{name}.simulation"
    ages = _get(sim, "conversation_ages", sim_where, list, default=[50, 60, 70, 80, 90])

    exp = _get(data, "experiment", name, dict, default={})
    exp_where = f"{name}.experiment"

    cal = _get(data, "calibration", name, dict, default={})
    cal_where = f"{name}.calibration"

    severity, odds_ratios = _load_severity(
        _get(data, "severity", name, dict, default=None), f"{name}.severity"
    )

    return AppConfig(
        source=name,
        population_ref=population_ref,
        risk_model_ref=risk_model_ref,
        life_table_ref=life_table_ref,
        demographics=demographics,
        risk_tables=risk_tables,
        ensemble=ensemble,
        life_table=life_table,
        delay=_load_delay(_get(data, "delay", name, dict, default=None), f"{name}.delay"),
        severity=severity,
        odds_ratios=odds_ratios,
        conversation_ages=tuple(int(a) for a in ages),
        high_risk_threshold=float(_get(sim, "high_risk_threshold", sim_where, float, default=0.1)),
        bmi_reduction_sd_fraction=float(
            _get(sim, "bmi_reduction_sd_fraction", sim_where, float, default=0.5)
        ),
        bp_reduction_sd_fraction=float(
            _get(sim, "bp_reduction_sd_fraction", sim_where, float, default=0.1)
        ),
        horizon_days=_get(sim, "horizon_days", sim_where, int, default=3650),
        days_per_year=_get(sim, "days_per_year", sim_where, int, default=365),
        base_seed=_get(exp, "base_seed", exp_where, int, default=42),
        n_runs=_get(exp, "n_runs", exp_where, int, default=1000),
        significance_level=float(
            _get(exp, "significance_level", exp_where, float, default=0.05)
        ),
        use_skip_sampling=_get(exp, "use_skip_sampling", exp_where, bool, default=True),
        common_random_numbers=_get(exp, "common_random_numbers", exp_where, bool, default=False),
        welch=_get(exp, "welch", exp_where, bool, default=False),
        calibration_target=float(_get(cal, "target_annual_risk", cal_where, float, default=0.0)),
        calibration_tol=float(_get(cal, "tol", cal_where, float, default=1e-9)),
    )
