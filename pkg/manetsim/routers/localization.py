"""HTTP routes for one-shot triangulation and multilateration"""

from typing import List, Optional

from fastapi import APIRouter, File, Form, HTTPException, UploadFile
from pydantic import BaseModel, Field

from ..core.config import logger
from ..core.file_utils import (
    cleanup_temp_file,
    generate_unique_id,
    read_fixes,
    save_upload_file,
    validate_table_file,
    validate_upload_size,
)
from ..core.geometry import Position
from ..core.localization import ReferenceFix, multilaterate, multilaterate_leave_one_out, triangulate
from ..core.models import EstimateMethod
from ..core.request_utils import process_request
from ..core.schemas import EstimateModel, FixModel

# Create router instance
router = APIRouter(prefix="/localize", tags=["localization"])


class TriangulateRequest(BaseModel):
    fixes: List[FixModel] = Field(..., min_length=3, max_length=3)
    extra_fix: Optional[FixModel] = None
    hull: Optional[List[List[float]]] = None


class MultilaterateRequest(BaseModel):
    fixes: List[FixModel] = Field(..., min_length=4)
    leave_one_out: bool = False


def _fix(model: FixModel) -> ReferenceFix:
    return ReferenceFix(Position(model.x, model.y, model.z), model.distance, model.aoa, model.node_id)


def solve(method: EstimateMethod, fixes: List[ReferenceFix], leave_one_out: bool = False, **kwargs):
    if method == EstimateMethod.TRIANGULATION:
        return triangulate(fixes, **kwargs)
    if leave_one_out and len(fixes) >= 5:
        return multilaterate_leave_one_out(fixes)
    return multilaterate(fixes)


@router.post("/triangulate", response_model=EstimateModel)
async def triangulate_fixes(request: TriangulateRequest):
    hull = [Position(p[0], p[1]) for p in request.hull] if request.hull else None
    extra = _fix(request.extra_fix) if request.extra_fix else None
    estimate = await process_request(
        "triangulation",
        solve,
        EstimateMethod.TRIANGULATION,
        [_fix(f) for f in request.fixes],
        extra_fix=extra,
        hull=hull,
    )
    return EstimateModel.of(estimate)


@router.post("/multilaterate", response_model=EstimateModel)
async def multilaterate_fixes(request: MultilaterateRequest):
    estimate = await process_request(
        "multilateration",
        solve,
        EstimateMethod.MULTILATERATION,
        [_fix(f) for f in request.fixes],
        request.leave_one_out,
    )
    return EstimateModel.of(estimate)


@router.post("/upload", response_model=EstimateModel)
async def localize_upload(
    file: UploadFile = File(...),
    method: EstimateMethod = Form(EstimateMethod.MULTILATERATION),
):
    """Upload a fixes CSV (x, y, distance and optional z, aoa, node_id)"""
    temp_file_path = None
    try:
        validate_table_file(file.filename)
        content = await file.read()
        validate_upload_size(content)
        temp_file_path = save_upload_file(file, generate_unique_id(), content)
        logger.info(f"Fixes uploaded: {file.filename} -> {temp_file_path}")
        fixes = await process_request("fixes upload", read_fixes, temp_file_path)
        estimate = await process_request(f"{method.value} of uploaded fixes", solve, method, fixes)
        return EstimateModel.of(estimate)
    except HTTPException:
        raise
    except Exception as e:
        logger.error(f"Error during upload localization: {e}")
        raise HTTPException(status_code=500, detail=f"Failed to localize: {str(e)}")
    finally:
        if temp_file_path:
            cleanup_temp_file(temp_file_path)
