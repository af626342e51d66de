"""
Shared response and report models
"""

from typing import Any, Dict, Generic, List, Optional, TypeVar

import numpy as np
from pydantic import BaseModel, Field

T = TypeVar("T")


class BaseResponse(BaseModel, Generic[T]):
    """Generic response envelope"""

    success: bool
    message: str
    data: Optional[T] = None


class ErrorResponse(BaseModel):
    """Error response"""

    success: bool = False
    error: str
    detail: Optional[str] = None


class ErrorStats(BaseModel):
    count: int = 0
    mean: Optional[float] = None
    p95: Optional[float] = None

    @classmethod
    def of(cls, errors: List[float]) -> "ErrorStats":
        if not errors:
            return cls()
        values = np.asarray(errors, dtype=float)
        return cls(count=len(values), mean=float(values.mean()), p95=float(np.percentile(values, 95)))


class EpochElectionCount(BaseModel):
    t: float
    ca: int = 0
    ra: int = 0
    ref: int = 0
    headless: int = 0
    vacant_sectors: int = 0


class MetricsReport(BaseModel):
    """Scenario outcome; rates are in [0, 1] and errors are meters"""

    seed: int
    duration: float
    nodes: int
    attackers: int = 0
    detected: int = 0
    false_positives: int = 0
    detection_rate: Optional[float] = Field(None, ge=0, le=1)
    detected_per_cluster: Dict[str, int] = {}
    tracking_error: Dict[str, ErrorStats] = {}
    election_counts: List[EpochElectionCount] = []
    ra_rejects: Dict[str, int] = {}
    localization_attempts: Dict[str, int] = {}
    false_positive_trust: Dict[str, float] = {}  # node trust when it was flagged
    events: int = 0

    def detection_rate_label(self) -> str:
        return "N/A" if self.detection_rate is None else f"{self.detection_rate:.6f}"


class TrajectoryComparison(BaseModel):
    index: int
    triangulation_errors: List[Optional[float]]
    multilateration_errors: List[Optional[float]]
    turn_steps: List[int]
    triangulation_mean: float
    multilateration_mean: float
    triangulation_turn_ratio: Optional[float] = None
    multilateration_turn_ratio: Optional[float] = None


class ComparisonReport(BaseModel):
    """Paired triangulation vs multilateration tracking over the same trajectories"""

    seed: int
    sigma: float
    trajectories: List[TrajectoryComparison]
    triangulation_mean: float
    multilateration_mean: float
    ratio: float
    multilateration_wins: int
    sign_test_p: float


class SpeedStudyReport(BaseModel):
    speeds: List[float]
    seeds: List[int]
    mean_error: List[float]
    per_seed: Dict[str, List[float]]
    spearman_rho: float
    monotone: bool


class RunSummary(BaseModel):
    """A stored scenario run as listed by the service"""

    run_id: str
    seed: int
    preset: str
    report: MetricsReport
    files: List[str] = []


class StatusResponse(BaseModel):
    """Registered runs"""

    status: str
    runs: Dict[str, Any]
    total_stored: int


class ScenarioRequest(BaseModel):
    """Preset plus a partial scenario document overlaid on it"""

    preset: str = "small"
    overrides: Dict[str, Any] = {}
    seed: Optional[int] = None


class FixModel(BaseModel):
    x: float
    y: float
    z: float = 0.0
    distance: float = Field(..., ge=0)
    aoa: Optional[float] = None
    node_id: Optional[int] = None


class EstimateModel(BaseModel):
    """A position fix as returned by the localization routes"""

    method: str
    x: float
    y: float
    z: float = 0.0
    residual: float
    n_fixes: int
    fix_ids: List[int] = []
    remeasured: bool = False

    @classmethod
    def of(cls, estimate) -> "EstimateModel":
        return cls(
            method=estimate.method.value,
            x=estimate.position.x,
            y=estimate.position.y,
            z=estimate.position.z,
            residual=estimate.residual,
            n_fixes=estimate.n_fixes,
            fix_ids=list(estimate.fix_ids),
            remeasured=estimate.remeasured,
        )
