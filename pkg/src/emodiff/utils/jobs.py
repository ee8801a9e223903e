"""
Parallel execution of independent experiment jobs with progress tracking.

Jobs are keyed; whatever order they finish in, results come back sorted by
key so that reports assembled from them are deterministic.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Generic, Hashable, List, Optional, Sequence, Tuple, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass
class JobProgress:
    """Track job execution progress."""

    total_jobs: int = 0
    completed_jobs: int = 0
    failed_jobs: int = 0
    start_time: float = field(default_factory=time.time)
    current_job: Optional[str] = None

    @property
    def elapsed_time(self) -> float:
        return time.time() - self.start_time

    @property
    def progress_percentage(self) -> float:
        if self.total_jobs == 0:
            return 0.0
        return (self.completed_jobs / self.total_jobs) * 100

    @property
    def processing_rate(self) -> float:
        """Jobs per second."""
        if self.elapsed_time == 0:
            return 0.0
        return self.completed_jobs / self.elapsed_time

    @property
    def estimated_remaining(self) -> float:
        if self.processing_rate == 0:
            return 0.0
        return (self.total_jobs - self.completed_jobs) / self.processing_rate


@dataclass
class JobResult(Generic[T]):
    key: Any
    value: Optional[T] = None
    error: Optional[BaseException] = None
    duration: float = 0.0

    @property
    def ok(self) -> bool:
        return self.error is None


def _run_one(key: Hashable, fn: Callable[[], T]) -> JobResult:
    start = time.time()
    try:
        return JobResult(key=key, value=fn(), duration=time.time() - start)
    except Exception as e:  # collected; re-raised by run_jobs
        return JobResult(key=key, error=e, duration=time.time() - start)


def run_jobs(
    jobs: Sequence[Tuple[Hashable, Callable[[], T]]],
    max_workers: int = 1,
    progress_callback: Optional[Callable[[JobProgress], None]] = None,
    raise_on_error: bool = True,
) -> List[JobResult]:
    """Run ``(key, fn)`` jobs, up to ``max_workers`` at a time.

    With ``raise_on_error`` the error of the lowest-keyed failed job is raised
    after all jobs finished; otherwise failures are returned in the results.
    """
    progress = JobProgress(total_jobs=len(jobs))
    results: Dict[Any, JobResult] = {}
    keys = [key for key, _ in jobs]
    if len(set(keys)) != len(keys):
        raise ValueError("job keys must be unique")

    def record(result: JobResult) -> None:
        results[result.key] = result
        progress.completed_jobs += 1
        if not result.ok:
            progress.failed_jobs += 1
            logger.error(f"Job {result.key} failed: {result.error}")
        else:
            logger.debug(f"Job {result.key} finished in {result.duration:.2f}s")
        if progress_callback:
            progress_callback(progress)

    if max_workers <= 1 or len(jobs) <= 1:
        for key, fn in jobs:
            progress.current_job = str(key)
            record(_run_one(key, fn))
    else:
        logger.info(f"Running {len(jobs)} jobs on {max_workers} workers")
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            future_to_key = {executor.submit(_run_one, key, fn): key for key, fn in jobs}
            for future in as_completed(future_to_key):
                record(future.result())

    ordered = [results[key] for key in sorted(results, key=_sort_key)]
    if raise_on_error:
        for result in ordered:
            if not result.ok:
                raise result.error
    return ordered


def _sort_key(key: Any) -> Tuple:
    if isinstance(key, tuple):
        return tuple(_sort_key(part) for part in key)
    return (0, key) if isinstance(key, (int, float)) else (1, str(key))
