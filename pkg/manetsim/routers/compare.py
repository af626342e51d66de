"""HTTP routes for the paired tracker comparison and the speed study"""

from typing import List, Optional

from fastapi import APIRouter

from ..core.errors import ConfigError
from ..core.harness import compare_trackers, speed_study
from ..core.request_utils import http_error, process_request
from ..core.scenario import build_config
from ..core.schemas import ComparisonReport, ScenarioRequest, SpeedStudyReport

# Create router instance
router = APIRouter(prefix="/compare", tags=["compare"])


class CompareRequest(ScenarioRequest):
    trajectory_seed: Optional[int] = None


class SpeedRequest(ScenarioRequest):
    speeds: Optional[List[float]] = None
    seeds: Optional[List[int]] = None


def _config(request: ScenarioRequest):
    try:
        return build_config(request.overrides, preset=request.preset, seed=request.seed)
    except ConfigError as e:
        raise http_error(e)


@router.post("/trackers", response_model=ComparisonReport)
async def compare(request: CompareRequest):
    """Triangulation vs multilateration PL&T over the same scripted trajectories"""
    config = _config(request)
    return await process_request("tracker comparison", compare_trackers, config, request.trajectory_seed)


@router.post("/speed", response_model=SpeedStudyReport)
async def speed(request: SpeedRequest):
    """Multilateration tracking error against target speed"""
    config = _config(request)
    return await process_request("speed study", speed_study, config, request.speeds, request.seeds)
