from .files import atomic_write_bytes, atomic_write_text, validate_and_create_path
from .hashing import corpus_hash, derive_seed, generate_content_hash, stable_bucket, sub_rng
from .jobs import JobProgress, JobResult, run_jobs
from .system_detection import get_system_info, resolve_jobs

__all__ = [
    'atomic_write_bytes',
    'atomic_write_text',
    'validate_and_create_path',
    'corpus_hash',
    'derive_seed',
    'generate_content_hash',
    'stable_bucket',
    'sub_rng',
    'JobProgress',
    'JobResult',
    'run_jobs',
    'get_system_info',
    'resolve_jobs',
]
