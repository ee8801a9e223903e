"""
System detection for sizing parallel work.

Reports CPU and memory through psutil and turns them into a default worker
count for fold, sweep and sampling jobs.
"""
import logging
import os
import platform
from functools import lru_cache
from typing import Any, Dict, Optional

import psutil

logger = logging.getLogger(__name__)

# Rough working-set of one toy-scale training job.
JOB_MEMORY_GB = 0.5


class SystemInfo:
    """Snapshot of the host taken once per process."""

    def __init__(self):
        self.os_name = platform.system().lower()
        self.architecture = platform.machine().lower()
        self.python_version = platform.python_version()
        self.cpu_count = psutil.cpu_count(logical=False) or os.cpu_count() or 1
        self.logical_cpu_count = psutil.cpu_count(logical=True) or self.cpu_count
        self.memory_gb = self._get_available_memory()

    @staticmethod
    def _get_available_memory() -> float:
        try:
            return round(psutil.virtual_memory().available / (1024 ** 3), 2)
        except (OSError, AttributeError) as e:
            logger.warning(f"Could not read system memory: {e}")
            return 4.0

    def get_optimal_jobs(self) -> int:
        """Physical cores, capped by how many jobs fit in available memory."""
        by_memory = max(1, int(self.memory_gb / JOB_MEMORY_GB))
        return max(1, min(self.cpu_count, by_memory))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "os": self.os_name,
            "architecture": self.architecture,
            "python_version": self.python_version,
            "cpu_count": self.cpu_count,
            "logical_cpu_count": self.logical_cpu_count,
            "memory_gb": self.memory_gb,
            "optimal_jobs": self.get_optimal_jobs(),
        }

    def __str__(self) -> str:
        return (
            f"{self.os_name}/{self.architecture} python {self.python_version}, "
            f"{self.cpu_count} cores, {self.memory_gb} GB available"
        )


@lru_cache(maxsize=1)
def get_system_info() -> SystemInfo:
    info = SystemInfo()
    logger.debug(f"System: {info}")
    return info


def resolve_jobs(requested: Optional[int] = None) -> int:
    """Worker count: explicit request, then ``EMODIFF_JOBS``, then the host default."""
    if requested is not None and requested > 0:
        return int(requested)
    env_value = os.getenv("EMODIFF_JOBS")
    if env_value:
        try:
            value = int(env_value)
            if value > 0:
                return value
        except ValueError:
            logger.warning(f"Ignoring invalid EMODIFF_JOBS={env_value!r}")
    return get_system_info().get_optimal_jobs()
