"""
Shared request handling: run blocking simulator work off the event loop
"""

from typing import Any, Callable

from fastapi import HTTPException
from fastapi.concurrency import run_in_threadpool

from .config import logger
from .errors import ConfigError, ManetError


def http_error(e: ManetError) -> HTTPException:
    """Map a simulator error to its HTTP status: 422 for configuration, 400 otherwise"""
    status = 422 if isinstance(e, ConfigError) else 400
    return HTTPException(status_code=status, detail=f"{type(e).__name__}: {e}")


async def process_request(operation: str, func: Callable[..., Any], *args, **kwargs) -> Any:
    """Run `func` in the threadpool, logging and mapping its errors"""
    try:
        logger.info(f"Processing {operation}")
        result = await run_in_threadpool(func, *args, **kwargs)
        logger.info(f"{operation} completed")
        return result
    except HTTPException:
        raise
    except ManetError as e:
        logger.warning(f"{operation} rejected: {e}")
        raise http_error(e)
    except Exception as e:
        logger.error(f"Error in {operation}: {e}")
        raise HTTPException(status_code=500, detail=f"{operation} failed: {str(e)}")
