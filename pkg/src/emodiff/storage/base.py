from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ..models.spectrogram import MelSpectrogram, NormalizationSpec


class SpectrogramStore(ABC):
    """Abstract base class for labeled spectrogram collections."""

    @abstractmethod
    def store(self, item: MelSpectrogram) -> Tuple[bool, str]:
        """Store one segment. Returns (success, message)."""
        pass

    @abstractmethod
    def load_all(self) -> List[MelSpectrogram]:
        """Every stored segment, in manifest order."""
        pass

    @abstractmethod
    def write_stats(self, stats: Dict[str, Any]) -> None:
        """Persist corpus statistics (normalization range, counts, failures)."""
        pass

    @abstractmethod
    def read_stats(self) -> Dict[str, Any]:
        pass

    @abstractmethod
    def flush(self) -> None:
        """Write the manifest for everything stored so far."""
        pass

    def store_many(self, items: Sequence[MelSpectrogram]) -> Tuple[int, List[str]]:
        """Store several segments. Returns (count_stored, failure messages)."""
        stored, failures = 0, []
        for item in items:
            ok, message = self.store(item)
            if ok:
                stored += 1
            else:
                failures.append(message)
        self.flush()
        return stored, failures

    def normalization(self) -> Optional[NormalizationSpec]:
        stats = self.read_stats()
        if "log_min" in stats and "log_max" in stats:
            return NormalizationSpec.from_dict(stats)
        return None
