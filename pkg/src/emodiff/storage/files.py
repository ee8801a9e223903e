"""
File-backed spectrogram store.

Layout under the store root::

    manifest.csv     path,emotion,speaker,text (paths relative to the root)
    index.json       per-path bookkeeping (source id, valid frames, parents)
    stats.json       corpus statistics
    segments/*.edtf  one tensor per segment
"""
import csv
import io
import json
import logging
import re
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np

from ..autodiff.serialization import dumps_json, read_tensor, write_tensor
from ..data.manifest import MANIFEST_COLUMNS, ManifestEntry, read_manifest
from ..errors import MissingArtifactError
from ..models.spectrogram import MelSpectrogram
from ..utils.files import PathLike, atomic_write_text, validate_and_create_path
from .base import SpectrogramStore

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.csv"
INDEX_NAME = "index.json"
STATS_NAME = "stats.json"
SEGMENT_DIR = "segments"

_UNSAFE = re.compile(r"[^A-Za-z0-9._-]+")


def segment_filename(source_id: str) -> str:
    return _UNSAFE.sub("_", source_id) + ".edtf"


class FileSpectrogramStore(SpectrogramStore):
    """EDTF grids plus a CSV manifest; readable by anything that reads manifests."""

    def __init__(self, root: PathLike, create: bool = False):
        self.root = validate_and_create_path(root) if create else Path(root)
        self._entries: List[ManifestEntry] = []
        self._index: Dict[str, Dict[str, Any]] = {}

    @classmethod
    def create(cls, root: PathLike) -> "FileSpectrogramStore":
        return cls(root, create=True)

    @classmethod
    def open(cls, root: PathLike) -> "FileSpectrogramStore":
        root = Path(root)
        if not (root / MANIFEST_NAME).exists():
            raise MissingArtifactError(str(root / MANIFEST_NAME), "spectrogram manifest")
        return cls(root)

    def store(self, item: MelSpectrogram) -> Tuple[bool, str]:
        relative = f"{SEGMENT_DIR}/{segment_filename(item.source_id)}"
        if relative in self._index:
            return False, f"Duplicate segment id {item.source_id!r}"
        try:
            write_tensor(self.root / relative, item.values)
        except OSError as e:
            logger.warning(f"Failed to write {relative}: {e}")
            return False, f"{item.source_id}: {e}"
        self._entries.append(ManifestEntry(path=relative, emotion=item.emotion, speaker=item.speaker, text=item.text))
        self._index[relative] = item.to_dict()
        return True, relative

    def flush(self) -> None:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for entry in self._entries:
            writer.writerow([entry.path, entry.emotion, entry.speaker, entry.text])
        atomic_write_text(self.root / MANIFEST_NAME, buffer.getvalue())
        atomic_write_text(self.root / INDEX_NAME, dumps_json(self._index))
        logger.info(f"Manifest with {len(self._entries)} segments written to {self.root}")

    def load_all(self) -> List[MelSpectrogram]:
        entries = read_manifest(self.root / MANIFEST_NAME)
        index_path = self.root / INDEX_NAME
        index = json.loads(index_path.read_text(encoding="utf-8")) if index_path.exists() else {}
        items = []
        for entry in entries:
            relative = entry.relative_to(self.root)
            values = np.asarray(read_tensor(entry.path), dtype=np.float64)
            info = index.get(relative) or {"source_id": Path(relative).stem}
            info = {**info, "emotion": entry.emotion, "speaker": entry.speaker, "text": entry.text}
            items.append(MelSpectrogram.from_dict(info, values))
        logger.info(f"Loaded {len(items)} segments from {self.root}")
        return items

    def write_stats(self, stats: Dict[str, Any]) -> None:
        atomic_write_text(self.root / STATS_NAME, dumps_json(stats))

    def read_stats(self) -> Dict[str, Any]:
        path = self.root / STATS_NAME
        if not path.exists():
            return {}
        return json.loads(path.read_text(encoding="utf-8"))

    def __len__(self) -> int:
        return len(self._entries)


def save_segments(root: PathLike, items: List[MelSpectrogram], stats: Dict[str, Any]) -> FileSpectrogramStore:
    store = FileSpectrogramStore.create(root)
    _, failures = store.store_many(items)
    if failures:
        stats = {**stats, "store_failures": failures}
    store.write_stats(stats)
    return store


def load_segments(root: PathLike) -> List[MelSpectrogram]:
    return FileSpectrogramStore.open(root).load_all()
