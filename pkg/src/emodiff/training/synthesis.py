"""Conditional sampling of synthetic segments from a trained denoiser."""
import logging
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..autodiff.tensor import no_grad
from ..diffusion.gaussian import VarianceMode
from ..diffusion.sampling import sample_loop
from ..diffusion.schedule import NoiseSchedule
from ..models.condition import ConditionSpec
from ..models.spectrogram import MelSpectrogram
from ..networks.denoiser import Denoiser
from ..utils.hashing import derive_seed
from ..utils.jobs import JobProgress, run_jobs

logger = logging.getLogger(__name__)


def synthesize(
    model: Denoiser,
    schedule: NoiseSchedule,
    requests: Sequence[ConditionSpec],
    seed: int,
    frames: int,
    variance_mode: str = VarianceMode.LEARNED_RANGE.value,
    sample_batch: int = 16,
    jobs: int = 1,
    progress_callback: Optional[Callable[[JobProgress], None]] = None,
    id_prefix: str = "syn",
) -> List[MelSpectrogram]:
    """One synthetic ``[n_mels, frames]`` segment per request, in request order.

    Requests are sampled in fixed chunks of ``sample_batch``; each chunk has
    its own noise stream derived from ``seed`` and its index, so the result
    does not depend on ``jobs``.
    """
    if not requests:
        return []
    model.eval()
    n_mels = model.cfg.in_channels
    chunks = [list(range(start, min(start + sample_batch, len(requests)))) for start in range(0, len(requests), sample_batch)]

    def chunk_job(chunk_index: int, members: List[int]) -> Callable[[], np.ndarray]:
        def run() -> np.ndarray:
            with no_grad():
                cond = model.condition.encode_batch([requests[i] for i in members]).data
            return sample_loop(
                model,
                cond,
                schedule,
                seed=derive_seed(seed, "sample", chunk_index),
                shape=(len(members), n_mels, frames),
                variance_mode=variance_mode,
            )
        return run

    logger.info(f"Sampling {len(requests)} segments in {len(chunks)} chunks over {schedule.num_steps} steps")
    results = run_jobs(
        [(k, chunk_job(k, members)) for k, members in enumerate(chunks)],
        max_workers=jobs,
        progress_callback=progress_callback,
    )
    segments = []
    for result, members in zip(results, chunks):
        for row, index in zip(result.value, members):
            spec = requests[index]
            segments.append(
                MelSpectrogram(
                    values=np.asarray(row, dtype=np.float64),
                    emotion=spec.emotion,
                    speaker=spec.speaker,
                    source_id=f"{id_prefix}_{seed}_{index:05d}",
                    text=" ".join(spec.tokens),
                    synthetic=True,
                    metadata={"sample_seed": seed},
                )
            )
    return segments


def balanced_requests(
    templates: Sequence[MelSpectrogram],
    count: int,
    rng: np.random.Generator,
) -> List[ConditionSpec]:
    """``count`` conditions drawn emotion-balanced from the templates' (emotion, speaker, text)."""
    if count <= 0 or not templates:
        return []
    by_emotion = {}
    for item in templates:
        by_emotion.setdefault(item.emotion, []).append(item)
    emotions = sorted(by_emotion)
    requests = []
    for k in range(count):
        pool = by_emotion[emotions[k % len(emotions)]]
        requests.append(pool[int(rng.integers(0, len(pool)))].condition())
    return requests
