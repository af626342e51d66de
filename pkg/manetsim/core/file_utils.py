"""
File handling: uploaded fixes / trajectory files and their CSV readers
"""

import csv
import tempfile
import uuid
from pathlib import Path
from typing import List, Optional, Tuple

from fastapi import HTTPException, UploadFile

from .config import logger
from .errors import ConfigError, InsufficientDataError
from .geometry import Position
from .localization import ReferenceFix
from .nodes import Trajectory
from .settings import get_settings

SUPPORTED_TABLE_FORMATS = {".csv"}
FIX_COLUMNS = ("x", "y", "distance")  # required; z and aoa are optional
TRAJECTORY_COLUMNS = ("t", "x", "y")


def temp_dir() -> Path:
    configured = get_settings().temp_dir
    return Path(configured) if configured else Path(tempfile.gettempdir())


def generate_unique_id() -> str:
    """Unique id for uploads and stored runs"""
    return str(uuid.uuid4())


def get_temp_path(file_id: str, filename: str) -> Path:
    return temp_dir() / f"{file_id}{Path(filename).suffix}"


def validate_table_file(filename: Optional[str]) -> None:
    if not filename or Path(filename).suffix.lower() not in SUPPORTED_TABLE_FORMATS:
        raise HTTPException(
            status_code=400,
            detail=f"Unsupported file format. Supported formats: {', '.join(sorted(SUPPORTED_TABLE_FORMATS))}",
        )


def validate_upload_size(content: bytes) -> None:
    limit = get_settings().max_upload_size * 1024 * 1024
    if len(content) > limit:
        raise HTTPException(status_code=413, detail=f"File exceeds {get_settings().max_upload_size} MB")


def save_upload_file(upload_file: UploadFile, file_id: str, content: Optional[bytes] = None) -> Path:
    """Save an uploaded file to the temp directory"""
    try:
        file_path = get_temp_path(file_id, upload_file.filename or "upload.csv")
        if content is None:
            content = upload_file.file.read()
        file_path.write_bytes(content)
        return file_path
    except Exception as e:
        logger.error(f"Error saving file {upload_file.filename}: {e}")
        raise HTTPException(status_code=500, detail=f"Failed to save file: {str(e)}")


def cleanup_temp_file(file_path: Path) -> None:
    try:
        if file_path.exists():
            file_path.unlink()
    except Exception as e:
        logger.warning(f"Failed to cleanup temp file {file_path}: {e}")


def _rows(path: Path, required: Tuple[str, ...]) -> List[dict]:
    try:
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            missing = [c for c in required if c not in (reader.fieldnames or [])]
            if missing:
                raise ConfigError(f"{path.name}: missing columns {missing}")
            return list(reader)
    except FileNotFoundError as e:
        raise ConfigError(f"File not found: {path}") from e


def _number(row: dict, column: str, line: int) -> Optional[float]:
    value = (row.get(column) or "").strip()
    if value == "":
        return None
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"Line {line}: column '{column}' is not a number: {value!r}") from None


def read_fixes(path: str | Path) -> List[ReferenceFix]:
    """Reference fixes from a CSV with columns x, y, distance and optional z, aoa, node_id"""
    fixes = []
    for line, row in enumerate(_rows(Path(path), FIX_COLUMNS), start=2):
        x, y, distance = (_number(row, c, line) for c in FIX_COLUMNS)
        if x is None or y is None or distance is None:
            raise ConfigError(f"Line {line}: x, y and distance are required")
        z = _number(row, "z", line) or 0.0
        node_id = _number(row, "node_id", line)
        fixes.append(
            ReferenceFix(
                Position(x, y, z),
                distance,
                _number(row, "aoa", line),
                None if node_id is None else int(node_id),
            )
        )
    if not fixes:
        raise InsufficientDataError(f"{Path(path).name} holds no fixes")
    return fixes


def read_trajectory(path: str | Path) -> Trajectory:
    """Time-ordered positions from a CSV with columns t, x, y"""
    samples = []
    for line, row in enumerate(_rows(Path(path), TRAJECTORY_COLUMNS), start=2):
        t, x, y = (_number(row, c, line) for c in TRAJECTORY_COLUMNS)
        if t is None or x is None or y is None:
            raise ConfigError(f"Line {line}: t, x and y are required")
        samples.append((t, Position(x, y)))
    if len(samples) < 3:
        raise InsufficientDataError("A trajectory needs at least 3 samples")
    try:
        return Trajectory(samples)
    except InsufficientDataError as e:
        raise ConfigError(str(e)) from e
