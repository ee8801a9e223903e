"""
WAV manifest -> normalized, segmented log-mel corpus.

Two passes: the first computes every log-mel grid and the corpus min/max,
the second normalizes and cuts fixed-width segments. Files that fail are
reported and skipped; the run continues.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from ..audio.mel import MelFilterbank, log_mel_energies, normalization_from_energies, segment
from ..audio.wav import read_wav
from ..config import AudioConfig
from ..errors import DataError
from ..models.spectrogram import MelSpectrogram
from ..storage.files import FileSpectrogramStore
from ..utils.files import PathLike
from ..utils.jobs import JobProgress, run_jobs
from .manifest import ManifestEntry, read_manifest

logger = logging.getLogger(__name__)


@dataclass
class FeaturizeResult:
    n_files: int = 0
    n_segments: int = 0
    failures: Dict[str, str] = field(default_factory=dict)
    stats: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_failed(self) -> int:
        return len(self.failures)


def filterbank_for(audio: AudioConfig) -> MelFilterbank:
    return MelFilterbank(
        n_mels=audio.n_mels,
        n_fft=audio.n_fft,
        sample_rate=audio.sample_rate,
        f_min=audio.f_min,
        f_max=audio.f_max,
    )


def _utterance_id(entry: ManifestEntry, index: int) -> str:
    return f"{index:05d}_{Path(entry.path).stem}"


def featurize(
    manifest_path: PathLike,
    outdir: PathLike,
    audio: Optional[AudioConfig] = None,
    jobs: int = 1,
    progress_callback: Optional[Callable[[JobProgress], None]] = None,
) -> FeaturizeResult:
    audio = audio or AudioConfig()
    entries = read_manifest(manifest_path)
    store = FileSpectrogramStore.create(outdir)
    result = FeaturizeResult(n_files=len(entries))

    if not entries:
        logger.warning(f"Manifest {manifest_path} lists no files; writing an empty corpus")
        store.flush()
        result.stats = {"n_files": 0, "n_segments": 0, "failures": {}, "audio": vars(audio).copy()}
        store.write_stats(result.stats)
        return result

    fb = filterbank_for(audio)

    def energies_job(entry: ManifestEntry) -> Callable[[], np.ndarray]:
        def run() -> np.ndarray:
            waveform = read_wav(entry.path, expected_rate=audio.sample_rate)
            return log_mel_energies(waveform, fb, hop=audio.hop)
        return run

    outcomes = run_jobs(
        [(i, energies_job(entry)) for i, entry in enumerate(entries)],
        max_workers=jobs,
        progress_callback=progress_callback,
        raise_on_error=False,
    )
    energies: Dict[int, np.ndarray] = {}
    for outcome in outcomes:
        entry = entries[outcome.key]
        if outcome.ok:
            energies[outcome.key] = outcome.value
        elif isinstance(outcome.error, (DataError, ValueError)):
            logger.warning(f"Skipping {entry.path}: {outcome.error}")
            result.failures[entry.path] = str(outcome.error)
        else:
            raise outcome.error

    if not energies:
        logger.warning("No readable files; writing an empty corpus")
        store.flush()
    else:
        norm = normalization_from_energies([energies[i] for i in sorted(energies)])
        for i in sorted(energies):
            entry = entries[i]
            utterance = MelSpectrogram(
                values=norm.normalize(energies[i]),
                emotion=entry.emotion,
                speaker=entry.speaker,
                source_id=_utterance_id(entry, i),
                text=entry.text,
                frame_hop=audio.hop,
                metadata={"wav": Path(entry.path).name},
            )
            for piece in segment(utterance, audio.segment_frames):
                ok, message = store.store(piece)
                if ok:
                    result.n_segments += 1
                else:
                    result.failures[piece.source_id] = message
        store.flush()
        result.stats.update(norm.to_dict())

    result.stats.update(
        {
            "n_files": result.n_files,
            "n_segments": result.n_segments,
            "failures": dict(sorted(result.failures.items())),
            "audio": vars(audio).copy(),
        }
    )
    store.write_stats(result.stats)
    if result.failures:
        logger.warning(f"{result.n_failed} of {result.n_files} files failed")
    logger.info(f"Featurized {result.n_files - result.n_failed} files into {result.n_segments} segments")
    return result
