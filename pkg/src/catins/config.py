"""Scenario configuration: defaults, validation, and YAML persistence.

A scenario is a tree of sections (``env``, ``utility``, ``population``,
``insurer``, ``government``, ``rl``, ``metrics``). Every key has a legal
range, which is enforced, and may also have a default calibration range.
Values that are legal but outside the default calibration produce a
warning instead of an error. Unknown keys are always rejected.

Ranges for uniformly drawn attributes are written as ``[low, high]`` pairs.
Per-class ranges are lists of three such pairs in the order low, middle,
upper class.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Raised when a scenario violates the schema."""


@dataclass
class EnvConfig:
    theta: float = 0.02
    T: int = 50
    n: int = 100
    m0: int = 5
    r: float = 0.02
    seed: int = 0
    moral_hazard: float = 1.02
    liquid_wealth_share: float = 0.0
    insurance_enabled: bool = True
    entry_when_empty: bool = True


@dataclass
class UtilityConfig:
    phi: float = 5000.0
    k: float = 3.0


@dataclass
class PopulationConfig:
    class_shares: list = field(default_factory=lambda: [0.5, 0.3, 0.2])
    income: list = field(default_factory=lambda: [5000.0, 12000.0, 50000.0])
    wealth: list = field(
        default_factory=lambda: [[10000.0, 15000.0], [25000.0, 40000.0], [150000.0, 300000.0]]
    )
    alpha0: list = field(default_factory=lambda: [[0.001, 0.005], [0.003, 0.01], [0.005, 0.01]])
    lambda_R: list = field(default_factory=lambda: [[0.6, 1.0], [0.3, 0.6], [0.0, 0.3]])
    beta_u: list = field(default_factory=lambda: [2.0, 3.0])
    beta_o: list = field(default_factory=lambda: [0.0, 1.0])
    beta_m: list = field(default_factory=lambda: [0.0, 1.0])
    beta_f: list = field(default_factory=lambda: [0.0, 1.0])
    beta_n: list = field(default_factory=lambda: [0.0, 1.0])
    beta_h: list = field(default_factory=lambda: [0.0, 1.0])


@dataclass
class InsurerConfig:
    capital_mean: float = 500000.0
    capital_sd: float = 100000.0
    gamma: list = field(default_factory=lambda: [0.0, 1.0])
    epsilon: list = field(default_factory=lambda: [0.0, 1.0])
    loading: list = field(default_factory=lambda: [0.0, 1.0])
    rho: list = field(default_factory=lambda: [0.8, 1.0])
    beta_prime: list = field(default_factory=lambda: [0.0, 1.0])
    admin_cost: list = field(default_factory=lambda: [0.05, 0.15])
    model_error: list = field(default_factory=lambda: [0.5, 1.5])
    modeler_fee: float = 1000.0
    loading_adjust: float = 0.1
    exit_increment: float = 0.25
    rho_cap: float = 0.999


@dataclass
class GovernmentConfig:
    cost_state_insurance: float = 1000.0
    cost_ease_solvency: float = 10000.0
    cost_awareness: float = 1000.0
    cost_regulation: float = 10000.0
    cost_prevention: float = 0.1
    subsidy_share: float = 0.3
    subsidy_wtp: str = "saved"
    prevention_delta: float = 0.2
    loading_cap: float = 0.2
    ease_factor: float = 0.9
    rho_floor: float = 0.7
    cry_wolf_decay: float = 0.5
    tax_thresholds: list = field(default_factory=lambda: [0.0, 12000.0, 50000.0])
    tax_rates: list = field(default_factory=lambda: [0.02, 0.05, 0.10])
    reward_cap: float = 10.0
    initial_treasury: float = 0.0


@dataclass
class RLConfig:
    episodes: int = 100000
    eta: float = 0.1
    delta: float = 0.9
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    decay_fraction: float = 0.5
    seed: int = 0
    awareness_threshold: float = 0.5
    supply_threshold: float = 0.5
    literal_update: bool = False
    parallel_envs: int = 1
    epoch_length: int = 1000


@dataclass
class MetricsConfig:
    terminal_coverage: float = 0.05
    window: int = 3
    lapse_steps: int = 10
    exit_window: int = 3


@dataclass
class ScenarioConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    utility: UtilityConfig = field(default_factory=UtilityConfig)
    population: PopulationConfig = field(default_factory=PopulationConfig)
    insurer: InsurerConfig = field(default_factory=InsurerConfig)
    government: GovernmentConfig = field(default_factory=GovernmentConfig)
    rl: RLConfig = field(default_factory=RLConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    def fingerprint(self) -> str:
        """Hash of everything that shapes the environment dynamics.

        The seed, learning parameters and metrics sections are excluded, so a table
        trained under one seed can be evaluated under another.
        """
        d = self.to_dict()
        d["env"].pop("seed")
        payload = {key: d[key] for key in ("env", "utility", "population", "insurer", "government")}
        # the thresholds define what each state index means
        payload["states"] = [d["rl"]["awareness_threshold"], d["rl"]["supply_threshold"]]
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


_SECTIONS = {
    "env": EnvConfig,
    "utility": UtilityConfig,
    "population": PopulationConfig,
    "insurer": InsurerConfig,
    "government": GovernmentConfig,
    "rl": RLConfig,
    "metrics": MetricsConfig,
}

INF = math.inf

# key -> (kind, legal (lo, hi)); kinds: float, int, bool, str, pair, pairs3, vec3
_SCHEMA: dict[str, tuple[str, Any]] = {
    "env.theta": ("float", (0.0, 1.0)),
    "env.T": ("int", (1, INF)),
    "env.n": ("int", (1, INF)),
    "env.m0": ("int", (0, INF)),
    "env.r": ("float", (0.0, INF)),
    "env.seed": ("int", (0, 2**64 - 1)),
    "env.moral_hazard": ("float", (1.0, INF)),
    "env.liquid_wealth_share": ("float", (0.0, 1.0)),
    "env.insurance_enabled": ("bool", None),
    "env.entry_when_empty": ("bool", None),
    "utility.phi": ("float", (1e-12, INF)),
    "utility.k": ("float", (1e-12, INF)),
    "population.class_shares": ("vec3", (0.0, 1.0)),
    "population.income": ("vec3", (1e-12, INF)),
    "population.wealth": ("pairs3", (0.0, INF)),
    "population.alpha0": ("pairs3", (0.0, 1.0)),
    "population.lambda_R": ("pairs3", (0.0, 1.0)),
    "population.beta_u": ("pair", (2.0, 3.0)),
    "population.beta_o": ("pair", (0.0, 1.0)),
    "population.beta_m": ("pair", (0.0, 1.0)),
    "population.beta_f": ("pair", (0.0, 1.0)),
    "population.beta_n": ("pair", (0.0, 1.0)),
    "population.beta_h": ("pair", (0.0, 1.0)),
    "insurer.capital_mean": ("float", (0.0, INF)),
    "insurer.capital_sd": ("float", (0.0, INF)),
    "insurer.gamma": ("pair", (0.0, 1.0)),
    "insurer.epsilon": ("pair", (0.0, 1.0)),
    "insurer.loading": ("pair", (0.0, INF)),
    "insurer.rho": ("pair", (0.0, 1.0)),
    "insurer.beta_prime": ("pair", (0.0, 1.0)),
    "insurer.admin_cost": ("pair", (0.0, INF)),
    "insurer.model_error": ("pair", (1e-12, INF)),
    "insurer.modeler_fee": ("float", (0.0, INF)),
    "insurer.loading_adjust": ("float", (0.0, 1.0)),
    "insurer.exit_increment": ("float", (0.0, 1.0)),
    "insurer.rho_cap": ("float", (0.5, 1.0 - 1e-12)),
    "government.cost_state_insurance": ("float", (0.0, INF)),
    "government.cost_ease_solvency": ("float", (0.0, INF)),
    "government.cost_awareness": ("float", (0.0, INF)),
    "government.cost_regulation": ("float", (0.0, INF)),
    "government.cost_prevention": ("float", (0.0, INF)),
    "government.subsidy_share": ("float", (0.0, 1.0)),
    "government.subsidy_wtp": ("str", ("saved", "literal")),
    "government.prevention_delta": ("float", (0.0, 1.0)),
    "government.loading_cap": ("float", (0.0, INF)),
    "government.ease_factor": ("float", (0.0, 1.0)),
    "government.rho_floor": ("float", (0.0, 1.0)),
    "government.cry_wolf_decay": ("float", (0.0, 1.0)),
    "government.tax_thresholds": ("vec3", (0.0, INF)),
    "government.tax_rates": ("vec3", (0.0, 1.0)),
    "government.reward_cap": ("float", (1e-12, INF)),
    "government.initial_treasury": ("float", (0.0, INF)),
    "rl.episodes": ("int", (0, INF)),
    "rl.eta": ("float", (1e-12, 1.0)),
    "rl.delta": ("float", (0.0, 1.0 - 1e-12)),
    "rl.epsilon_start": ("float", (0.0, 1.0)),
    "rl.epsilon_end": ("float", (0.0, 1.0)),
    "rl.decay_fraction": ("float", (0.0, 1.0)),
    "rl.seed": ("int", (0, 2**64 - 1)),
    "rl.awareness_threshold": ("float", (0.0, INF)),
    "rl.supply_threshold": ("float", (0.0, INF)),
    "rl.literal_update": ("bool", None),
    "rl.parallel_envs": ("int", (1, INF)),
    "rl.epoch_length": ("int", (1, INF)),
    "metrics.terminal_coverage": ("float", (0.0, 1.0)),
    "metrics.window": ("int", (1, INF)),
    "metrics.lapse_steps": ("int", (1, INF)),
    "metrics.exit_window": ("int", (0, INF)),
}

# Calibration ranges for keys whose legal range is wider than the default.
_DEFAULT_RANGE = {
    "insurer.rho": (0.8, 1.0),
    "insurer.gamma": (0.0, 1.0),
    "insurer.loading": (0.0, 1.0),
    "insurer.admin_cost": (0.05, 0.15),
    "insurer.model_error": (0.5, 1.5),
}


def _fail(key: str, value: Any, legal: Any) -> None:
    raise ConfigError(f"{key}={value!r} is invalid; legal range is {legal}")


def _check_number(key: str, value: Any, legal: tuple, integer: bool) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(key, value, f"a number in [{legal[0]}, {legal[1]}]")
    if integer and (not float(value).is_integer()):
        _fail(key, value, f"an integer in [{legal[0]}, {legal[1]}]")
    if not (legal[0] <= value <= legal[1]) or math.isnan(value):
        _fail(key, value, f"[{legal[0]}, {legal[1]}]")
    return int(value) if integer else float(value)


def _check_pair(key: str, value: Any, legal: tuple) -> list:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        _fail(key, value, f"a [low, high] pair within [{legal[0]}, {legal[1]}]")
    lo, hi = (_check_number(key, v, legal, False) for v in value)
    if lo > hi:
        _fail(key, value, f"a [low, high] pair with low <= high within [{legal[0]}, {legal[1]}]")
    return [lo, hi]


def _validate_value(key: str, value: Any) -> Any:
    kind, legal = _SCHEMA[key]
    if kind == "float":
        return _check_number(key, value, legal, False)
    if kind == "int":
        return _check_number(key, value, legal, True)
    if kind == "bool":
        if not isinstance(value, bool):
            _fail(key, value, "true or false")
        return value
    if kind == "str":
        if value not in legal:
            _fail(key, value, f"one of {list(legal)}")
        return value
    if kind == "pair":
        return _check_pair(key, value, legal)
    if kind == "vec3":
        if not isinstance(value, (list, tuple)) or len(value) != 3:
            _fail(key, value, f"a list of three numbers in [{legal[0]}, {legal[1]}]")
        return [_check_number(key, v, legal, False) for v in value]
    if kind == "pairs3":
        if not isinstance(value, (list, tuple)) or len(value) != 3:
            _fail(key, value, f"three [low, high] pairs within [{legal[0]}, {legal[1]}]")
        return [_check_pair(key, v, legal) for v in value]
    raise AssertionError(kind)


def _cross_checks(cfg: ScenarioConfig) -> None:
    shares = cfg.population.class_shares
    if abs(sum(shares) - 1.0) > 1e-9:
        _fail("population.class_shares", shares, "three shares summing to 1")
    th = cfg.government.tax_thresholds
    if any(b < a for a, b in zip(th, th[1:])):
        _fail("government.tax_thresholds", th, "non-decreasing income thresholds")
    if cfg.insurer.rho[0] <= 0.0:
        _fail("insurer.rho", cfg.insurer.rho, "(0, 1] (a zero percentile has no finite quantile)")


def _warn_out_of_default(cfg: ScenarioConfig) -> list[str]:
    warnings = []
    for key, (lo, hi) in _DEFAULT_RANGE.items():
        section, name = key.split(".")
        value = getattr(getattr(cfg, section), name)
        if value[0] < lo or value[1] > hi:
            msg = f"{key}={value} lies outside the default calibration range [{lo}, {hi}]"
            logger.warning(msg)
            warnings.append(msg)
    return warnings


def scenario_from_dict(data: dict | None) -> ScenarioConfig:
    """Build a validated scenario from a (possibly partial) nested dict."""
    data = {} if data is None else data
    if not isinstance(data, dict):
        raise ConfigError("scenario file must contain a mapping of sections")
    cfg = ScenarioConfig()
    for section, values in data.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section {section!r}; legal sections are {sorted(_SECTIONS)}")
        if values is None:
            continue
        if not isinstance(values, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        target = getattr(cfg, section)
        legal_keys = {f.name for f in fields(target)}
        for key, value in values.items():
            if key not in legal_keys:
                raise ConfigError(
                    f"unknown key {section}.{key}; legal keys are {sorted(legal_keys)}"
                )
            setattr(target, key, _validate_value(f"{section}.{key}", value))
    _cross_checks(cfg)
    cfg.warnings = _warn_out_of_default(cfg)
    return cfg


def validate(cfg: ScenarioConfig) -> ScenarioConfig:
    """Re-validate a config that may have been edited in code."""
    return scenario_from_dict(cfg.to_dict())


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Read a YAML scenario file; missing keys take their default values."""
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return scenario_from_dict(data)


def save_scenario(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False))


def with_overrides(cfg: ScenarioConfig, **sections: dict) -> ScenarioConfig:
    """Return a validated copy with the given per-section overrides."""
    d = copy.deepcopy(cfg.to_dict())
    for section, values in sections.items():
        d.setdefault(section, {}).update(values)
    return scenario_from_dict(d)
