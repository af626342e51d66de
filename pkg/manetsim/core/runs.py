"""Registry of scenario runs held by the service"""

from collections import OrderedDict
from threading import Lock
from typing import Dict, Optional

from .config import logger
from .file_utils import generate_unique_id
from .harness import ScenarioResult
from .settings import get_settings

# Global run instances, oldest first
run_instances: "OrderedDict[str, ScenarioResult]" = OrderedDict()
run_presets: Dict[str, str] = {}
_lock = Lock()


def store_run(result: ScenarioResult, preset: str = "default") -> str:
    """Keep a finished run; the oldest run is evicted beyond max_stored_runs"""
    run_id = generate_unique_id()
    limit = get_settings().max_stored_runs
    with _lock:
        run_instances[run_id] = result
        run_presets[run_id] = preset
        while len(run_instances) > limit:
            evicted, _ = run_instances.popitem(last=False)
            run_presets.pop(evicted, None)
            logger.info(f"Run {evicted} evicted (limit {limit})")
    logger.info(f"Run {run_id} stored (seed {result.config.seed})")
    return run_id


def get_run(run_id: str) -> Optional[ScenarioResult]:
    """Get a stored run by id"""
    return run_instances.get(run_id)


def get_run_preset(run_id: str) -> str:
    return run_presets.get(run_id, "default")


def drop_run(run_id: str) -> bool:
    """Forget a stored run"""
    with _lock:
        if run_instances.pop(run_id, None) is None:
            return False
        run_presets.pop(run_id, None)
    logger.info(f"Run {run_id} dropped")
    return True


def clear_runs() -> None:
    with _lock:
        run_instances.clear()
        run_presets.clear()


def get_runs_status() -> dict:
    """Status of all stored runs"""
    return {
        run_id: {
            "seed": result.config.seed,
            "preset": run_presets.get(run_id, "default"),
            "duration": result.config.duration,
            "detected": result.report.detected,
            "attackers": result.report.attackers,
        }
        for run_id, result in run_instances.items()
    }
