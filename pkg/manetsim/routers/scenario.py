"""HTTP routes for running full scenarios"""

from fastapi import APIRouter, HTTPException

from ..core.config import logger
from ..core.harness import run_scenario
from ..core.models import get_all_presets
from ..core.request_utils import http_error, process_request
from ..core.runs import store_run
from ..core.scenario import build_config
from ..core.errors import ConfigError
from ..core.schemas import BaseResponse, RunSummary, ScenarioRequest

# Create router instance
router = APIRouter(prefix="/scenario", tags=["scenario"])


@router.get("/presets")
async def list_presets():
    """Available scenario presets"""
    return {
        name: {"display_name": p.display_name, "description": p.description, "overrides": p.overrides}
        for name, p in get_all_presets().items()
    }


@router.post("/run", response_model=BaseResponse[RunSummary])
async def run(request: ScenarioRequest):
    """Validate the scenario, run it and store the result"""
    try:
        config = build_config(request.overrides, preset=request.preset, seed=request.seed)
    except ConfigError as e:
        raise http_error(e)

    result = await process_request(f"scenario run (seed {config.seed})", run_scenario, config)
    try:
        run_id = store_run(result, request.preset)
        return BaseResponse(
            success=True,
            message="Scenario completed",
            data=RunSummary(run_id=run_id, seed=config.seed, preset=request.preset, report=result.report),
        )
    except HTTPException:
        raise
    except Exception as e:
        logger.error(f"Error storing scenario run: {e}")
        raise HTTPException(status_code=500, detail=f"Failed to store run: {str(e)}")
