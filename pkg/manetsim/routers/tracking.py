"""HTTP routes for replaying trajectories through the PL&T tracker"""

from typing import Any, Dict, List, Optional

from fastapi import APIRouter, File, Form, HTTPException, UploadFile
from pydantic import BaseModel, Field

from ..core.config import logger
from ..core.errors import ConfigError, ManetError
from ..core.file_utils import (
    cleanup_temp_file,
    generate_unique_id,
    read_trajectory,
    save_upload_file,
    validate_table_file,
    validate_upload_size,
)
from ..core.geometry import Position
from ..core.harness import replay_track
from ..core.models import EstimateMethod
from ..core.nodes import Trajectory
from ..core.request_utils import http_error, process_request
from ..core.scenario import build_config

# Create router instance
router = APIRouter(prefix="/tracking", tags=["tracking"])


class Sample(BaseModel):
    t: float
    x: float
    y: float


class ReplayRequest(BaseModel):
    samples: List[Sample] = Field(..., min_length=3)
    method: EstimateMethod = EstimateMethod.MULTILATERATION
    preset: str = "small"
    overrides: Dict[str, Any] = {}
    seed: Optional[int] = None


class ReplayResponse(BaseModel):
    method: str
    rows: List[Dict[str, Any]]


def _config(preset: str, overrides: Dict[str, Any], seed: Optional[int]):
    try:
        return build_config(overrides, preset=preset, seed=seed)
    except ConfigError as e:
        raise http_error(e)


@router.post("/replay", response_model=ReplayResponse)
async def replay(request: ReplayRequest):
    config = _config(request.preset, request.overrides, request.seed)
    try:
        trajectory = Trajectory([(s.t, Position(s.x, s.y)) for s in request.samples])
    except ManetError as e:
        raise http_error(e)
    rows = await process_request("trajectory replay", replay_track, config, trajectory, request.method)
    return ReplayResponse(method=request.method.value, rows=rows)


@router.post("/upload", response_model=ReplayResponse)
async def replay_upload(
    file: UploadFile = File(...),
    method: EstimateMethod = Form(EstimateMethod.MULTILATERATION),
    seed: Optional[int] = Form(None),
):
    """Upload a trajectory CSV (t, x, y) and replay it"""
    temp_file_path = None
    try:
        validate_table_file(file.filename)
        content = await file.read()
        validate_upload_size(content)
        temp_file_path = save_upload_file(file, generate_unique_id(), content)
        logger.info(f"Trajectory uploaded: {file.filename} -> {temp_file_path}")
        trajectory = await process_request("trajectory upload", read_trajectory, temp_file_path)
        config = _config("small", {}, seed)
        rows = await process_request("trajectory replay", replay_track, config, trajectory, method)
        return ReplayResponse(method=method.value, rows=rows)
    except HTTPException:
        raise
    except Exception as e:
        logger.error(f"Error during trajectory replay: {e}")
        raise HTTPException(status_code=500, detail=f"Failed to replay trajectory: {str(e)}")
    finally:
        if temp_file_path:
            cleanup_temp_file(temp_file_path)
