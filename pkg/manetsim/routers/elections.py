"""HTTP routes for one-epoch elections"""

from typing import Any, Dict, List

from fastapi import APIRouter
from pydantic import BaseModel

from ..core.errors import ConfigError
from ..core.harness import run_elections
from ..core.request_utils import http_error, process_request
from ..core.scenario import build_config
from ..core.schemas import EpochElectionCount, ScenarioRequest

# Create router instance
router = APIRouter(prefix="/elections", tags=["elections"])


class ElectionResponse(BaseModel):
    seed: int
    counts: List[EpochElectionCount]
    elections: List[Dict[str, Any]]
    references: List[Dict[str, Any]]


@router.post("/run", response_model=ElectionResponse)
async def elect(request: ScenarioRequest):
    """Form clusters and run CA, RA and reference elections at t = 0"""
    try:
        config = build_config(request.overrides, preset=request.preset, seed=request.seed)
    except ConfigError as e:
        raise http_error(e)
    result = await process_request("election epoch", run_elections, config)
    return ElectionResponse(
        seed=config.seed,
        counts=result.report.election_counts,
        elections=result.logs.elections,
        references=result.logs.references,
    )
