"""
Labelled datasets derived from a generated corpus and its manifest
String groups, single strings and context windows, balanced per class
"""

import logging
from typing import Dict, List, Sequence, Tuple

import numpy as np

from src.corpus.generator import GroundTruthManifest
from src.extraction.string_extractor import build_string_groups, extract_occurrences, method_strings
from src.ir.model import IrApp
from src.learning.detectors import CONTEXT_RADIUS, render_window
from src.learning.models import Label, LabeledGroupDataset

logger = logging.getLogger(__name__)

DATASET_NAMES = ('string_groups', 'intrinsic', 'context')

Document = Tuple[str, Tuple[str, ...]]


def _balanced(name: str, secret: List[Document], plain: List[Document], rng: np.random.Generator) -> LabeledGroupDataset:
    """Downsample the larger class to the size of the smaller one"""
    n = min(len(secret), len(plain))
    if n == 0:
        logger.warning(f"{name}: one class is empty ({len(secret)} secret, {len(plain)} no-secret)")
    dataset = LabeledGroupDataset()
    for documents, label in ((secret, Label.SECRET), (plain, Label.NO_SECRET)):
        chosen = np.sort(rng.choice(len(documents), size=n, replace=False)) if n else []
        for i in chosen:
            doc_id, strings = documents[int(i)]
            dataset.add(doc_id, strings, label)
    logger.info(f"{name}: {dataset.class_counts()} (from {len(secret)} secret / {len(plain)} no-secret)")
    return dataset


def string_group_documents(apps: Sequence[IrApp], manifest: GroundTruthManifest,
                           min_size: int = 2) -> Tuple[List[Document], List[Document]]:
    """
    Secret collection: groups holding a seeded value next to other strings.
    No-secret collection: groups holding neither a seeded value nor a fragment of one.
    """
    values, fragments = manifest.values(), manifest.fragments()
    secret, plain = [], []
    for app in apps:
        for group in build_string_groups(app, min_size):
            hits = [s in values for s in group.strings]
            if any(hits):
                if not all(hits):
                    secret.append((group.group_id, group.strings))
            elif not any(s in fragments for s in group.strings):
                plain.append((group.group_id, group.strings))
    return secret, plain


def intrinsic_documents(apps: Sequence[IrApp], manifest: GroundTruthManifest) -> Tuple[List[Document], List[Document]]:
    values, fragments = manifest.values(), manifest.fragments()
    secret = [(f"value:{i}", (value,)) for i, value in enumerate(sorted(values))]
    seen = set()
    for app in apps:
        for occ in extract_occurrences(app):
            if occ.value and occ.value not in values and occ.value not in fragments:
                seen.add(occ.value)
    plain = [(f"string:{i}", (value,)) for i, value in enumerate(sorted(seen))]
    return secret, plain


def context_documents(apps: Sequence[IrApp], manifest: GroundTruthManifest,
                      radius: int = CONTEXT_RADIUS) -> Tuple[List[Document], List[Document]]:
    values, fragments = manifest.values(), manifest.fragments()
    secret, plain = [], []
    for app in apps:
        for method in app.methods():
            for index, value in method_strings(method):
                if not value or value in fragments:
                    continue
                doc = (f"{app.app_id}:{method.owner}.{method.name}:{index}",
                       tuple(render_window(method, index, radius)))
                (secret if value in values else plain).append(doc)
    return secret, plain


def build_datasets(apps: Sequence[IrApp], manifest: GroundTruthManifest, seed: int = 0,
                   radius: int = CONTEXT_RADIUS, min_size: int = 2) -> Dict[str, LabeledGroupDataset]:
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(len(DATASET_NAMES))]
    sources = {
        'string_groups': string_group_documents(apps, manifest, min_size),
        'intrinsic': intrinsic_documents(apps, manifest),
        'context': context_documents(apps, manifest, radius),
    }
    return {name: _balanced(name, *sources[name], rng) for name, rng in zip(DATASET_NAMES, streams)}
