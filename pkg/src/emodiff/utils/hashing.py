import hashlib
import json
from typing import Any, Dict, Iterable, Optional

import numpy as np


def generate_content_hash(content: str, metadata: Optional[Dict[str, Any]] = None) -> str:
    """
    Generate a stable hash for content and metadata.

    Content is normalized (stripped, lowercased) and metadata is serialized with
    sorted keys, so the hash does not depend on dict ordering.
    """
    hash_content = content.strip().lower()
    if metadata:
        static_metadata = {k: v for k, v in metadata.items() if k not in ("timestamp", "content_hash")}
        if static_metadata:
            hash_content += json.dumps(static_metadata, sort_keys=True, ensure_ascii=True)
    return hashlib.sha256(hash_content.encode("utf-8")).hexdigest()


def corpus_hash(items: Iterable[Any]) -> str:
    """Hash of a labeled corpus: ids, labels and grid contents, in source-id order.

    ``items`` are MelSpectrogram-like objects with ``source_id``, ``emotion``,
    ``speaker``, ``text`` and ``values``.
    """
    digest = hashlib.sha256()
    for item in sorted(items, key=lambda m: m.source_id):
        header = generate_content_hash(
            item.source_id, {"emotion": item.emotion, "speaker": item.speaker, "text": item.text}
        )
        digest.update(header.encode("ascii"))
        digest.update(np.ascontiguousarray(item.values, dtype="<f8").tobytes())
    return digest.hexdigest()


def stable_bucket(token: str, buckets: int) -> int:
    """Bucket index of ``token`` that does not change between interpreter runs."""
    if buckets < 1:
        raise ValueError(f"buckets must be positive, got {buckets}")
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") % buckets


def derive_seed(seed: int, *names: Any) -> int:
    """Named sub-stream of a run seed (``derive_seed(7, "split", 2)``).

    Streams with different names are independent, so adding a consumer of
    randomness never shifts the draws of another.
    """
    key = "/".join([str(int(seed))] + [str(n) for n in names])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & 0x7FFF_FFFF_FFFF_FFFF


def sub_rng(seed: int, *names: Any) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *names))
