"""
CSV manifests: ``path,emotion,speaker,text``.

Relative paths are resolved against the manifest's directory. The same schema
is written for toy corpora and for featurized real data.
"""
import csv
import io
import logging
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, List

from ..errors import ManifestError, MissingArtifactError
from ..models.condition import EmotionLabel
from ..utils.files import PathLike, atomic_write_text

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ("path", "emotion", "speaker", "text")


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    emotion: str
    speaker: str
    text: str = ""

    def relative_to(self, root: PathLike) -> str:
        return Path(os.path.relpath(self.path, str(root))).as_posix()


def read_manifest(path: PathLike) -> List[ManifestEntry]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(str(path), "manifest")
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise ManifestError(f"{path}: unreadable manifest ({e})") from e

    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        logger.warning(f"Manifest {path} is empty")
        return []
    missing = [c for c in MANIFEST_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise ManifestError(f"{path}: missing column(s) {', '.join(missing)}; expected {','.join(MANIFEST_COLUMNS)}")

    base = path.parent
    entries = []
    for line, row in enumerate(reader, start=2):
        item_path = (row.get("path") or "").strip()
        if not item_path:
            raise ManifestError(f"{path}:{line}: empty path")
        try:
            emotion = EmotionLabel.parse(row.get("emotion") or "").emotion
        except ValueError as e:
            raise ManifestError(f"{path}:{line}: {e}") from e
        speaker = (row.get("speaker") or "").strip()
        if not speaker:
            raise ManifestError(f"{path}:{line}: empty speaker")
        resolved = Path(item_path) if os.path.isabs(item_path) else base / item_path
        entries.append(ManifestEntry(str(resolved), emotion, speaker, (row.get("text") or "").strip()))
    logger.debug(f"Read {len(entries)} manifest entries from {path}")
    return entries


def write_manifest(path: PathLike, entries: Iterable[ManifestEntry]) -> None:
    """Write entries with paths relative to the manifest's directory when possible."""
    path = Path(path)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(MANIFEST_COLUMNS)
    for entry in entries:
        if os.path.isabs(entry.path):
            entry = replace(entry, path=entry.relative_to(path.parent))
        writer.writerow([entry.path, entry.emotion, entry.speaker, entry.text])
    atomic_write_text(path, buffer.getvalue())
