"""Scenario configuration: one JSON document, validated fail-fast"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import config as defaults
from .elections import CriteriaWeights
from .errors import ConfigError
from .models import AggregationRule, AttackBehavior, get_preset


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Bounds(_Strict):
    width: float = Field(700.0, gt=0)
    height: float = Field(700.0, gt=0)


class MobilityConfig(_Strict):
    v_min: float = Field(1.0, gt=0)
    v_max: float = Field(20.0, gt=0)
    tick: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _ordered(self):
        if self.v_min > self.v_max:
            raise ValueError("mobility.v_min must not exceed mobility.v_max")
        return self


class RadioConfig(_Strict):
    propagation_speed: float = Field(defaults.SPEED_OF_LIGHT, gt=0)
    timestamp_noise_sigma: float = Field(5e-9, ge=0)
    transmission_range: float = Field(defaults.TRANSMISSION_RANGE, gt=0)
    path_exponent: float = Field(defaults.PATH_EXPONENT, gt=0)
    aoa_noise_deg: float = Field(1.0, ge=0)
    packet_interval: float = Field(defaults.PACKET_INTERVAL, ge=0)


class RangingConfig(_Strict):
    packets: int = Field(defaults.PACKETS_PER_READING, ge=1)
    threshold: float = Field(defaults.RANGE_ACCEPT_THRESHOLD, gt=0)
    max_retries: int = Field(defaults.MAX_RANGE_RETRIES, ge=0)


class ElectionConfig(_Strict):
    ocf_weights: Tuple[float, float, float, float] = defaults.OCF_WEIGHTS
    bcf_weights: Tuple[float, float, float, float] = defaults.BCF_WEIGHTS
    bcf_threshold: float = Field(defaults.BCF_THRESHOLD, ge=0, le=1)
    cluster_size: int = Field(2, ge=1)  # hops
    interval: float = Field(defaults.ELECTION_INTERVAL, gt=0)
    top_k: int = Field(defaults.REFERENCE_TOP_K, ge=3)
    spread_penalty: float = Field(defaults.SPREAD_PENALTY, ge=0)
    reply_window: float = Field(defaults.SECTOR_REPLY_WINDOW, gt=0)
    mobility_window: float = Field(defaults.ELECTION_INTERVAL, gt=0)
    mobility_scale: Optional[float] = Field(None, gt=0)  # m/s; None uses mobility.v_max

    @field_validator("ocf_weights", "bcf_weights")
    @classmethod
    def _ordered_weights(cls, value):
        CriteriaWeights(*value)
        return value


class TrustConfig(_Strict):
    threshold: float = Field(defaults.TRUST_THRESHOLD, ge=0, le=1)
    aggregation: AggregationRule = AggregationRule.MEAN
    behaviour_alpha: float = Field(defaults.BEHAVIOUR_ALPHA, gt=0, le=1)
    misbehaviour_limit: float = Field(defaults.MISBEHAVIOUR_LIMIT, ge=0, le=1)
    trust_rate: float = Field(0.3, gt=0, le=1)
    honest_trust: Tuple[float, float] = (0.7, 1.0)
    attacker_trust: Tuple[float, float] = (0.6, 0.9)
    honest_noise: float = Field(0.05, ge=0, le=1)
    max_voters: int = Field(7, ge=1)

    @field_validator("honest_trust", "attacker_trust")
    @classmethod
    def _unit_interval(cls, value):
        low, high = value
        if not 0.0 <= low <= high <= 1.0:
            raise ValueError(f"trust range must satisfy 0 <= low <= high <= 1, got {value}")
        return value


class AttackStep(_Strict):
    """One scripted behaviour: from start_t on, the attacker does `behavior`"""

    start_t: float = Field(0.0, ge=0)
    behavior: AttackBehavior
    ratio: Optional[float] = Field(None, ge=0, le=1)
    offset_ns: Optional[float] = Field(None, ge=0)
    sector: Optional[int] = Field(None, ge=1, le=6)

    @model_validator(mode="after")
    def _parameters(self):
        required = {
            AttackBehavior.DROP_PACKETS: "ratio",
            AttackBehavior.REPLAY_TOD: "offset_ns",
            AttackBehavior.HIDE: "sector",
        }.get(self.behavior)
        if required and getattr(self, required) is None:
            raise ValueError(f"{self.behavior.value} requires '{required}'")
        return self


class AttackerConfig(_Strict):
    fraction: float = Field(0.1, ge=0, lt=1)
    script: List[AttackStep] = [
        AttackStep(behavior=AttackBehavior.FORGE_KEY),
        AttackStep(behavior=AttackBehavior.REPLAY_TOD, offset_ns=200.0),
    ]

    @model_validator(mode="after")
    def _script_present(self):
        if self.fraction > 0 and not self.script:
            raise ValueError("attackers.script must not be empty when fraction > 0")
        return self


class TrackerConfig(_Strict):
    r1: float = Field(defaults.ZONE_R1, gt=0)
    n_contours: int = Field(defaults.ZONE_CONTOURS, ge=1)
    half_angle: float = Field(defaults.ZONE_HALF_ANGLE, gt=0, le=90)
    max_coast: int = Field(defaults.MAX_COAST_EPOCHS, ge=0)
    fusion_tolerance: float = Field(5.0, ge=0)
    bearing_noise_deg: float = Field(1.0, ge=0)


class ScheduleConfig(_Strict):
    detection_interval: float = Field(10.0, gt=0)
    localization_interval: float = Field(5.0, gt=0)
    tracking_interval: float = Field(1.0, gt=0)
    localization_sample: int = Field(6, ge=1)  # members triangulated per cluster per epoch


class EnergyConfig(_Strict):
    initial: Tuple[float, float] = (0.6, 1.0)
    drain_per_meter: float = Field(1e-5, ge=0)
    drain_per_packet: float = Field(1e-6, ge=0)


class CompareConfig(_Strict):
    trajectories: int = Field(20, ge=1)
    steps: int = Field(120, ge=3)
    target_speed: float = Field(5.0, gt=0)
    arena: float = Field(250.0, gt=0)
    field_nodes: int = Field(80, ge=4)
    turn_every: int = Field(25, ge=2)
    speeds: List[float] = [10.0, 30.0, 50.0, 100.0]
    speed_spacing: float = Field(10.0, gt=0)
    speed_steps: int = Field(20, ge=3)


class ScenarioConfig(_Strict):
    """Complete scenario; every level rejects unknown keys"""

    seed: int = 1
    seeds: List[int] = [1]
    bounds: Bounds = Bounds()
    clusters: int = Field(7, ge=1)
    nodes_per_cluster: int = Field(80, ge=4)
    duration: float = Field(600.0, ge=0)
    mobility: MobilityConfig = MobilityConfig()
    radio: RadioConfig = RadioConfig()
    ranging: RangingConfig = RangingConfig()
    elections: ElectionConfig = ElectionConfig()
    trust: TrustConfig = TrustConfig()
    attackers: AttackerConfig = AttackerConfig()
    tracker: TrackerConfig = TrackerConfig()
    schedule: ScheduleConfig = ScheduleConfig()
    energy: EnergyConfig = EnergyConfig()
    compare: CompareConfig = CompareConfig()

    @property
    def total_nodes(self) -> int:
        return self.clusters * self.nodes_per_cluster

    @property
    def stability_scale(self) -> float:
        """Relative mobility that maps to stability 0.5"""
        return self.elections.mobility_scale or self.mobility.v_max

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return self.model_copy(update={"seed": seed})


def _deep_merge(base: Dict[str, Any], overlay: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overlay.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def build_config(
    overrides: Optional[Dict[str, Any]] = None,
    preset: str = "default",
    seed: Optional[int] = None,
) -> ScenarioConfig:
    """Validate preset defaults overlaid with a user document"""
    base = get_preset(preset)
    if base is None:
        raise ConfigError(f"Unknown preset: {preset}")
    document = _deep_merge(base.overrides, overrides or {})
    if seed is not None:
        document["seed"] = seed
        document.setdefault("seeds", [seed])
    try:
        return ScenarioConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def load_config(
    path: Optional[str | Path] = None, small: bool = False, seed: Optional[int] = None
) -> ScenarioConfig:
    """Load a scenario JSON document (or the preset alone when path is None)"""
    overrides: Dict[str, Any] = {}
    if path is not None:
        try:
            overrides = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as e:
            raise ConfigError(f"Config file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file is not valid JSON: {e}") from e
        if not isinstance(overrides, dict):
            raise ConfigError("Config document must be a JSON object")
    return build_config(overrides, preset="small" if small else "default", seed=seed)
