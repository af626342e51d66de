"""Main application entry point for the MANET simulator API"""

from contextlib import asynccontextmanager
from datetime import datetime, timezone

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from .core.config import logger
from .core.runs import clear_runs, get_runs_status
from .core.settings import get_settings
from .routers.compare import router as compare_router
from .routers.elections import router as elections_router
from .routers.localization import router as localization_router
from .routers.runs import router as runs_router
from .routers.scenario import router as scenario_router
from .routers.tracking import router as tracking_router

API_VERSION = "0.1.0"
API_TITLE = "MANET Simulator API"


@asynccontextmanager
async def lifespan(app: FastAPI):  # noqa: ARG001
    """Log startup and drop stored runs on shutdown"""
    settings = get_settings()
    try:
        logger.info(
            f"Application startup completed ({settings.environment}); "
            f"keeping at most {settings.max_stored_runs} runs"
        )
        yield
    except Exception as e:
        logger.error(f"Failed to initialize application: {e}")
        raise
    finally:
        clear_runs()
        logger.info("Application shutdown")


# Initialize FastAPI app with lifespan
app = FastAPI(title=API_TITLE, version=API_VERSION, lifespan=lifespan)

app.add_middleware(
    CORSMiddleware,
    allow_origins=get_settings().cors_origins,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.get("/health")
async def health_check():
    """Health check with stored runs and system resources"""
    import psutil

    runs = get_runs_status()
    try:
        memory_info = psutil.virtual_memory()
        system_info = {
            "memory_total_gb": round(memory_info.total / (1024**3), 2),
            "memory_available_gb": round(memory_info.available / (1024**3), 2),
            "memory_usage_percent": memory_info.percent,
            "cpu_count": psutil.cpu_count(),
        }
    except Exception:
        system_info = {
            "memory_total_gb": "unknown",
            "memory_available_gb": "unknown",
            "memory_usage_percent": "unknown",
            "cpu_count": "unknown",
        }

    return {
        "status": "healthy",
        "timestamp": datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"),
        "total_stored": len(runs),
        "system": system_info,
        "api_info": {
            "version": API_VERSION,
            "title": API_TITLE,
            "docs": "/docs",
        },
    }


@app.get("/")
async def read_root():
    return {"message": API_TITLE, "docs": "/docs", "health": "/health"}


# Scenario runs and the stored-run registry
app.include_router(scenario_router)
app.include_router(runs_router)
# One-shot studies
app.include_router(elections_router)
app.include_router(localization_router)
app.include_router(tracking_router)
app.include_router(compare_router)


def serve(host: str | None = None, port: int | None = None) -> None:
    import uvicorn

    settings = get_settings()
    uvicorn.run(app, host=host or settings.host, port=port or settings.port)


if __name__ == "__main__":
    serve()
