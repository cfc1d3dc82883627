#!/usr/bin/env python3
"""
SecretSieve: multi-strategy detection of checked-in secrets in app IR

Main system orchestrator: scanning, training, evaluation against a
ground-truth manifest, corpus generation and the separability study.
"""

import json
import logging
import os
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from src.core.errors import ConfigError
from src.core.paths import config_path
from src.corpus.generator import CorpusGenerator, GroundTruthManifest, load_corpus_spec
from src.corpus.obfuscator import obfuscate
from src.corpus.scoring import draw_review_sample, review_sample_size, score
from src.engine.config import ScanConfig, build_scan_config
from src.engine.findings import Detector
from src.engine.reporting import emit_report
from src.engine.scanner import ScanReport, SecretScanner
from src.ir.model import IrApp
from src.learning.detectors import (
    CONTEXT_RADIUS, TOKEN_SCHEMES, DegradationReport, context_degradation, paired_windows,
)
from src.learning.features import Scheme, Variant
from src.learning.models import Label, LabeledGroupDataset, ModelKind, ModelTrainer, TrainedModel
from src.learning.study import StudyReport, separability_study
from src.three_layer.filters import WordDictionary

SYSTEM_NAME = 'SecretSieve'
VERSION = '1.0.0'

# Feature schemes each learned detector accepts
TARGET_SCHEMES = {
    'intrinsic': (Scheme.CHAR_NGRAM,),
    'context': TOKEN_SCHEMES,
    'string_group': tuple(Scheme),
}


def load_groups(path: str, label: Optional[Label] = None) -> List[Tuple[str, ...]]:
    """
    String groups from JSON lines: either a bare list of strings or an object
    with "strings" (and optionally "label", used to filter when `label` is set)
    """
    groups = []
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            if not line.strip():
                continue
            record = json.loads(line)
            if isinstance(record, list):
                groups.append(tuple(record))
            elif label is None or Label(record.get('label', label)) == label:
                groups.append(tuple(record['strings']))
    return groups


class SecretSieveSystem:
    """
    SecretSieve orchestrator. The scan configuration is built on first use,
    so commands that do not scan never require detector files.
    """

    def __init__(self, config_file: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None):
        self.logger = logging.getLogger('SecretSieveSystem')
        self.config_file = config_file
        self.overrides = dict(overrides or {})
        self._config: Optional[ScanConfig] = None
        self._dictionary: Optional[WordDictionary] = None

    @property
    def config(self) -> ScanConfig:
        if self._config is None:
            self._config = build_scan_config(self.config_file, self.overrides)
        return self._config

    @property
    def dictionary(self) -> WordDictionary:
        if self._dictionary is None:
            path = self.overrides.get('dictionary_path') or config_path('english_words.txt')
            self._dictionary = WordDictionary.load(path)
        return self._dictionary

    # ------------------------------------------------------------------ scan

    def scan(self, corpus: str, dump_strings: Optional[str] = None) -> ScanReport:
        return SecretScanner(self.config).scan(corpus, dump_strings)

    def render(self, report: ScanReport, fmt: Optional[str] = None, mask: Optional[bool] = None) -> bytes:
        return emit_report(report, fmt or self.config.output_format,
                           self.config.mask if mask is None else mask)

    # ----------------------------------------------------------------- train

    def train(self, dataset_path: str, out: str, target: str = 'string_group',
              model_kind: str = ModelKind.LINEAR_SVC.value, scheme: str = Scheme.COUNT_FREQUENCY.value,
              variant: str = Variant.CASE_SENSITIVE.value, seed: int = 42, tune: bool = False) -> Dict[str, Any]:
        if target not in TARGET_SCHEMES:
            raise ConfigError(f"unknown training target {target!r}; expected one of {', '.join(TARGET_SCHEMES)}")
        scheme = Scheme(scheme)
        if scheme not in TARGET_SCHEMES[target]:
            allowed = ', '.join(s.value for s in TARGET_SCHEMES[target])
            raise ConfigError(f"{target} models need one of: {allowed}; got {scheme.value}")

        variant = Variant(variant)
        dataset = LabeledGroupDataset.load(dataset_path, variant)
        dictionary = self.dictionary if variant == Variant.ENGLISH_WORD_EXTRACTION else None
        model, metrics = ModelTrainer().fit(dataset, ModelKind(model_kind), scheme, seed, dictionary, tune)
        model.save(out)
        return {
            'target': target,
            'model': out,
            'kind': model.kind.value,
            'scheme': model.scheme.value,
            'variant': model.variant.value,
            'hyperparameters': model.metadata.get('hyperparameters', {}),
            'metrics': metrics,
        }

    # ------------------------------------------------------------ evaluation

    def evaluate(self, corpus: str, manifest_path: str, review_seed: int = 0) -> Dict[str, Any]:
        manifest = GroundTruthManifest.load(manifest_path)
        report = self.scan(corpus)
        scores = score(report.findings, manifest, [d.value for d in report.detectors])
        sample = draw_review_sample(report.findings, review_seed)
        return {
            'corpus': corpus,
            'manifest': manifest_path,
            'seeded': len(manifest),
            'findings': len(report.findings),
            'apps_failed': len(report.failed_apps),
            'score': scores.to_dict(),
            'review': {
                'population': len(report.findings),
                'sample_size': review_sample_size(len(report.findings)),
                'sample': [f.to_dict(mask=True) for f in sample],
            },
        }

    # ---------------------------------------------------------------- corpus

    def generate_corpus(self, spec_path: str, out_dir: str, seed: int = 0, n_apps: Optional[int] = None,
                        noise_profile: Optional[str] = None, jobs: int = 1,
                        with_datasets: bool = True) -> Dict[str, str]:
        spec = load_corpus_spec(spec_path)
        n_apps = n_apps if n_apps is not None else spec.get('n_apps', 1)
        profile = noise_profile if noise_profile is not None else spec.get('noise_profile', 'default')
        corpus = CorpusGenerator({'jobs': jobs}).generate(spec['seeds'], n_apps, profile, seed)
        outputs = corpus.write(out_dir, with_datasets=with_datasets)
        self.logger.info(f"Corpus written to {out_dir}: {', '.join(sorted(outputs))}")
        return outputs

    def obfuscation_study(self, apps: Sequence[IrApp], manifest: GroundTruthManifest,
                          context_model: TrainedModel, seed: int = 0,
                          radius: int = CONTEXT_RADIUS) -> DegradationReport:
        """Context-score change on seeded-secret windows between each app and its obfuscated twin"""
        pairs = []
        for app in apps:
            values = [entry.value for entry in manifest.for_app(app.app_id)]
            if not values:
                continue
            twin, rename = obfuscate(app, seed)
            pairs.extend(paired_windows(app, twin, rename.method_key, values, radius))
        return context_degradation(context_model, pairs)

    # ----------------------------------------------------------------- study

    def study(self, secret_path: str, nosecret_path: Optional[str] = None,
              variant: str = Variant.CASE_SENSITIVE.value, max_pairs: Optional[int] = None,
              seed: int = 0) -> StudyReport:
        """With one path, the file is a labelled dataset split by label"""
        if nosecret_path is None:
            secret = load_groups(secret_path, Label.SECRET)
            nosecret = load_groups(secret_path, Label.NO_SECRET)
        else:
            secret, nosecret = load_groups(secret_path), load_groups(nosecret_path)
        variant = Variant(variant)
        dictionary = self.dictionary if variant == Variant.ENGLISH_WORD_EXTRACTION else None
        return separability_study(secret, nosecret, variant, dictionary, max_pairs, seed)

    def get_system_status(self) -> Dict[str, Any]:
        try:
            config = self.config.to_dict()
            status = 'ready'
        except ConfigError as e:
            config, status = {}, f'config error: {e}'
        return {
            'system_name': SYSTEM_NAME,
            'version': VERSION,
            'status': status,
            'detectors': [d.value for d in Detector],
            'config': config,
            'config_file': self.config_file or config_path('secretsieve_config.json'),
            'env_override': os.environ.get('SECRETSIEVE_CONFIG'),
        }
