"""Enumerations and the scenario preset registry"""

from enum import Enum
from typing import Any, Dict, Optional


class Role(str, Enum):
    """Exactly one role per node at a time"""

    MEMBER = "member"
    CLUSTER_HEAD = "ca"
    RA = "ra"
    REFERENCE = "reference"
    MALICIOUS = "malicious"


class RangeStatus(str, Enum):
    ACCEPTED = "accepted"
    PARTIAL_ACCEPT = "partial_accept"
    REJECTED = "rejected"


class EstimateMethod(str, Enum):
    TRIANGULATION = "triangulation"
    MULTILATERATION = "multilateration"


class TrackStatus(str, Enum):
    LOCKED = "locked"
    COASTING = "coasting"
    LOST = "lost"


class Verdict(str, Enum):
    HONEST = "honest"
    MALICIOUS = "malicious"


class VerdictReason(str, Enum):
    NONE = ""
    LOW_TRUST = "low trust"
    KEY_DISPUTE = "key dispute"


class GateAction(str, Enum):
    FORWARD = "forward"
    REJECT = "reject"


class ElectionKind(str, Enum):
    CA = "CA"
    RA = "RA"
    REF = "REF"


class AggregationRule(str, Enum):
    MEAN = "mean"
    MIN = "min"
    MAX = "max"


class SignerKind(str, Enum):
    HMAC = "hmac"
    ED25519 = "ed25519"


class AttackBehavior(str, Enum):
    DROP_PACKETS = "drop_packets"
    FORGE_KEY = "forge_key"
    REPLAY_TOD = "replay_tod"
    HIDE = "hide"


class ExportFormat(str, Enum):
    CSV = "csv"
    NDJSON = "ndjson"
    PLOTDATA = "plotdata"


class EventKind(str, Enum):
    """Kinds written to the NDJSON event trace"""

    CLUSTERS_FORMED = "clusters_formed"
    CA_ELECTED = "ca_elected"
    CA_HEADLESS = "ca_headless"
    START_ELECTION = "start_election"
    RA_ELECTED = "ra_elected"
    RA_VACANT = "ra_vacant"
    REFERENCES_ELECTED = "references_elected"
    LOCALIZATION_DISABLED = "localization_disabled"
    GEOMETRY_WARNING = "geometry_warning"
    MOBILITY = "mobility"
    BEHAVIOUR = "behaviour"
    RA_GATE = "ra_gate"
    MALICIOUS_ALERT = "malicious_alert"
    DETECTION = "detection"
    MEASUREMENT = "measurement"
    ESTIMATE = "estimate"
    LOCALIZATION_FAILED = "localization_failed"
    TRACK = "track"


class ScenarioPreset:
    """Named base configuration; overrides are applied onto ScenarioConfig defaults"""

    def __init__(
        self,
        name: str,
        display_name: str,
        description: str,
        overrides: Optional[Dict[str, Any]] = None,
    ):
        self.name = name
        self.display_name = display_name
        self.description = description
        self.overrides = overrides or {}


# Scenario presets registry
SCENARIO_PRESETS = {
    "default": ScenarioPreset(
        name="default",
        display_name="Reference scenario",
        description="7 clusters of 80 nodes in 700x700 m, 300 m range, 600 s of random waypoint",
        overrides={},
    ),
    "small": ScenarioPreset(
        name="small",
        display_name="CI scenario",
        description="2 clusters of 20 nodes, 60 s, for quick and deterministic checks",
        overrides={
            "clusters": 2,
            "nodes_per_cluster": 20,
            "duration": 60.0,
            "bounds": {"width": 400.0, "height": 400.0},
        },
    ),
}


def get_preset(name: str) -> Optional[ScenarioPreset]:
    """Get a scenario preset by name"""
    return SCENARIO_PRESETS.get(name)


def get_all_presets() -> Dict[str, ScenarioPreset]:
    """Get all scenario presets"""
    return SCENARIO_PRESETS.copy()
