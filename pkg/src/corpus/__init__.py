# Corpus Module for SecretSieve: synthetic corpus generation, obfuscation and scoring

from .keys import KeyFormat, KeyGenerator, load_key_formats, split_value
from .generator import (
    CorpusGenerator, GeneratedApp, GeneratedCorpus, GroundTruthManifest, ManifestEntry, Placement,
    SeedSpec, gen_corpus, load_corpus_spec,
)
from .datasets import DATASET_NAMES, build_datasets
from .obfuscator import Obfuscator, RenameMap, obfuscate
from .scoring import DetectorScore, ScoreReport, draw_review_sample, review_sample_size, score

__all__ = [
    'KeyFormat', 'KeyGenerator', 'load_key_formats', 'split_value',
    'CorpusGenerator', 'GeneratedApp', 'GeneratedCorpus', 'GroundTruthManifest', 'ManifestEntry',
    'Placement', 'SeedSpec', 'gen_corpus', 'load_corpus_spec',
    'DATASET_NAMES', 'build_datasets',
    'Obfuscator', 'RenameMap', 'obfuscate',
    'DetectorScore', 'ScoreReport', 'draw_review_sample', 'review_sample_size', 'score',
]
