"""Corpus ingestion: manifests and toy corpora. WAV featurization lives in ``emodiff.data.featurize``."""
from .manifest import MANIFEST_COLUMNS, ManifestEntry, read_manifest, write_manifest
from .toy import ToyCorpus, ToyCorpusSpec, generate_toy_corpus

__all__ = [
    'MANIFEST_COLUMNS',
    'ManifestEntry',
    'read_manifest',
    'write_manifest',
    'ToyCorpus',
    'ToyCorpusSpec',
    'generate_toy_corpus',
]
