"""HTTP routes for stored runs: listing, traces and export"""

from pathlib import Path
from typing import List

from fastapi import APIRouter, HTTPException
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from ..core.export import export
from ..core.models import ExportFormat
from ..core.request_utils import process_request
from ..core.runs import drop_run, get_run, get_run_preset, get_runs_status
from ..core.schemas import BaseResponse, RunSummary, StatusResponse
from ..core.settings import get_settings

# Create router instance
router = APIRouter(prefix="/runs", tags=["runs"])


class ExportRequest(BaseModel):
    """Export a stored run below the configured output directory"""

    format: ExportFormat = ExportFormat.CSV
    subdir: str = ""


def _require(run_id: str):
    result = get_run(run_id)
    if result is None:
        raise HTTPException(status_code=404, detail=f"Run {run_id} not found")
    return result


@router.get("", response_model=StatusResponse)
async def list_runs():
    runs = get_runs_status()
    return StatusResponse(status="ok", runs=runs, total_stored=len(runs))


@router.get("/{run_id}", response_model=RunSummary)
async def get_run_summary(run_id: str):
    result = _require(run_id)
    return RunSummary(run_id=run_id, seed=result.config.seed, preset=get_run_preset(run_id), report=result.report)


@router.get("/{run_id}/events", response_class=PlainTextResponse)
async def get_run_events(run_id: str):
    """NDJSON event trace of a run"""
    return PlainTextResponse(_require(run_id).events, media_type="application/x-ndjson")


@router.post("/{run_id}/export", response_model=BaseResponse[List[str]])
async def export_run(run_id: str, request: ExportRequest):
    result = _require(run_id)
    base = Path(get_settings().output_dir).resolve()
    out_dir = (base / run_id / request.subdir).resolve()
    if not out_dir.is_relative_to(base):
        raise HTTPException(status_code=400, detail="Export directory must stay below the output directory")
    files = await process_request(f"export of run {run_id}", export, result, out_dir, request.format)
    return BaseResponse(success=True, message=f"Exported {len(files)} files", data=[str(f) for f in files])


@router.delete("/{run_id}")
async def delete_run(run_id: str):
    if not drop_run(run_id):
        raise HTTPException(status_code=404, detail=f"Run {run_id} not found")
    return {"success": True, "run_id": run_id, "message": "Run dropped"}
