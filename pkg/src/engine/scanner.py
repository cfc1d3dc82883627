"""
Corpus Scanner for SecretSieve
Runs the enabled detectors over every app of a corpus with a bounded worker
pool, isolates per-app failures and merges findings in a fixed order
"""

import glob
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple, Union

from src.core.errors import CorpusUnreadableError, classify_error, describe_error
from src.engine.config import ScanConfig
from src.engine.findings import Detector, SecretFinding, merge_findings, overlap_matrix
from src.extraction.string_extractor import StringOccurrence, dump_occurrences_csv, extract_occurrences
from src.ir.model import IrApp
from src.ir.parser import IrParser
from src.learning.detectors import ContextDetector, IntrinsicDetector, StringGroupDetector
from src.learning.models import TrainedModel
from src.sigflow.detector import SigFlowDetector, SliceDiagnostic
from src.sigflow.signatures import ApiSignature, load_signatures
from src.three_layer.detector import RegexMatch, ThreeLayerFilter
from src.three_layer.filters import WordDictionary
from src.three_layer.rules import DetectionRule, load_rules

IR_SUFFIX = '.jir'
ENV_FILE = 'env.json'
NOT_APPLICABLE = 'NA'


def list_apps(corpus_path: str) -> List[Tuple[str, str]]:
    """
    (app_id, directory) for every app under a corpus: each subdirectory
    holding IR files is one app; IR files directly in the root form one more.
    """
    if not os.path.isdir(corpus_path):
        raise CorpusUnreadableError(f"corpus {corpus_path} is not a readable directory")
    try:
        entries = sorted(os.listdir(corpus_path))
    except OSError as e:
        raise CorpusUnreadableError(f"cannot list corpus {corpus_path}: {e}")

    apps = []
    for name in entries:
        app_dir = os.path.join(corpus_path, name)
        if os.path.isdir(app_dir) and glob.glob(os.path.join(app_dir, f'*{IR_SUFFIX}')):
            apps.append((name, app_dir))
    if any(name.endswith(IR_SUFFIX) for name in entries):
        apps.append((os.path.basename(os.path.normpath(corpus_path)) or 'app', corpus_path))
    return sorted(apps)


def load_app_files(app_dir: str) -> Tuple[List[Tuple[str, str]], Dict[str, Dict[str, str]]]:
    """IR (path, text) pairs sorted by file name, plus the optional env map"""
    files = []
    for path in sorted(glob.glob(os.path.join(app_dir, f'*{IR_SUFFIX}'))):
        with open(path, 'r', encoding='utf-8') as f:
            files.append((os.path.basename(path), f.read()))
    env: Dict[str, Dict[str, str]] = {}
    env_path = os.path.join(app_dir, ENV_FILE)
    if os.path.isfile(env_path):
        with open(env_path, 'r', encoding='utf-8') as f:
            env = json.load(f)
    return files, env


@dataclass
class AppScan:
    """Outcome of one app; findings exclude three_layer, which runs after the corpus barrier"""
    app_id: str
    success: bool
    findings: List[SecretFinding] = field(default_factory=list)
    matches: List[RegexMatch] = field(default_factory=list)
    diagnostics: List[SliceDiagnostic] = field(default_factory=list)
    occurrences: List[StringOccurrence] = field(default_factory=list)
    n_strings: int = 0
    degraded_statements: int = 0
    error: Optional[str] = None
    error_type: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'success': self.success,
            'app_id': self.app_id,
            'n_strings': self.n_strings,
            'error': self.error,
            'error_type': self.error_type,
        }


@dataclass
class ScanReport:
    corpus: str
    detectors: List[Detector]
    apps: List[AppScan] = field(default_factory=list)
    findings: List[SecretFinding] = field(default_factory=list)
    diagnostics: List[SliceDiagnostic] = field(default_factory=list)
    capability: Dict[str, Set[str]] = field(default_factory=dict)
    settings: Dict[str, Any] = field(default_factory=dict)

    @property
    def failed_apps(self) -> List[AppScan]:
        return [app for app in self.apps if not app.success]

    @property
    def degraded_statements(self) -> int:
        return sum(app.degraded_statements for app in self.apps)

    def provider_counts(self) -> Dict[str, Dict[str, Union[int, str]]]:
        """
        Findings per provider and detector (duplicates across apps counted
        once per app); NA where the detector cannot report that provider.
        """
        providers = set(self.capability.get('providers', set())) | {f.provider for f in self.findings}
        table: Dict[str, Dict[str, Union[int, str]]] = {}
        for provider in sorted(providers):
            row: Dict[str, Union[int, str]] = {}
            for detector in self.detectors:
                supported = self.capability.get(detector.value)
                if supported is not None and provider not in supported:
                    row[detector.value] = NOT_APPLICABLE
                else:
                    row[detector.value] = sum(1 for f in self.findings
                                              if f.provider == provider and detector in f.detectors)
            row['total'] = sum(1 for f in self.findings if f.provider == provider)
            table[provider] = row
        return table

    def overlap(self) -> Dict[str, int]:
        return overlap_matrix(self.findings)


class SecretScanner:
    """
    Scan pipeline: parse, extract, then the enabled detectors per app on a
    thread pool; the Three-Layer entropy stage is a barrier over all apps.
    """

    def __init__(self, config: ScanConfig):
        self.logger = logging.getLogger('SecretScanner')
        self.config = config
        self.rules: List[DetectionRule] = []
        self.signatures: List[ApiSignature] = []
        self.dictionary: Optional[WordDictionary] = None
        self.three_layer: Optional[ThreeLayerFilter] = None
        self.intrinsic: Optional[IntrinsicDetector] = None
        self.context: Optional[ContextDetector] = None
        self.string_group: Optional[StringGroupDetector] = None
        self._load_components()

    def _load_components(self):
        config = self.config
        ml_enabled = any(config.enabled(d) for d in (Detector.INTRINSIC, Detector.CONTEXT, Detector.STRING_GROUP))
        if config.enabled(Detector.THREE_LAYER) or ml_enabled:
            self.rules = load_rules(config.rules_path, config.three_layer.get('include_loose', True))
        if config.enabled(Detector.THREE_LAYER) or (ml_enabled and os.path.isfile(config.dictionary_path or '')):
            self.dictionary = WordDictionary.load(config.dictionary_path)
        if config.enabled(Detector.THREE_LAYER):
            self.three_layer = ThreeLayerFilter(self.rules, self.dictionary, config.three_layer)
        if config.enabled(Detector.SIG_FLOW):
            self.signatures = load_signatures(config.signatures_path)

        detector_config = {'context_radius': config.context_radius, 'group_min_size': config.group_min_size}
        models = {name: TrainedModel.load(path, self.dictionary)
                  for name, path in config.models.items() if path and self._model_needed(name)}
        if config.enabled(Detector.INTRINSIC):
            self.intrinsic = IntrinsicDetector(models['intrinsic'], self.rules, detector_config)
        if config.enabled(Detector.CONTEXT):
            self.context = ContextDetector(models['intrinsic'], models['context'], self.rules, detector_config)
        if config.enabled(Detector.STRING_GROUP):
            self.string_group = StringGroupDetector(models['string_group'], self.rules, detector_config)
        self.logger.info(f"[SCAN] Enabled detectors: {', '.join(d.value for d in config.detectors)}")

    def _model_needed(self, name: str) -> bool:
        return any(key == f'models.{name}' for key in self.config.required_files())

    def capability(self) -> Dict[str, Set[str]]:
        """Providers each catalog-bound detector can report; ML detectors are unrestricted"""
        rule_providers = {rule.provider for rule in self.rules}
        sig_providers = {sig.provider for sig in self.signatures}
        table: Dict[str, Set[str]] = {'providers': set()}
        if self.three_layer is not None:
            table[Detector.THREE_LAYER.value] = rule_providers
            table['providers'] |= rule_providers
        if self.config.enabled(Detector.SIG_FLOW):
            table[Detector.SIG_FLOW.value] = sig_providers
            table['providers'] |= sig_providers
        return table

    def scan_app(self, app_id: str, app_dir: str, keep_occurrences: bool = False) -> AppScan:
        try:
            files, env = load_app_files(app_dir)
            parser = IrParser()
            app = parser.parse_app(files, app_id)
            result = self.scan_parsed(app, env, keep_occurrences)
            result.degraded_statements = parser.degraded_statements
            return result
        except Exception as e:
            error_type = classify_error(e)
            self.logger.warning(f"[SCAN] {describe_error(e, app_id)}")
            return AppScan(app_id=app_id, success=False, error=describe_error(e), error_type=error_type.value)

    def scan_parsed(self, app: IrApp, env: Optional[Dict[str, Dict[str, str]]] = None,
                    keep_occurrences: bool = False) -> AppScan:
        occurrences = extract_occurrences(app)
        result = AppScan(app_id=app.app_id, success=True, n_strings=len(occurrences))
        if keep_occurrences:
            result.occurrences = occurrences
        if self.three_layer is not None:
            result.matches = self.three_layer.match(occurrences)
        if self.config.enabled(Detector.SIG_FLOW):
            sig_flow = SigFlowDetector(self.signatures, {
                'budget': self.config.budget, 'env': env or {}, 'env_getters': self.config.env_getters,
            })
            result.findings.extend(sig_flow.run(app))
            result.diagnostics = list(sig_flow.diagnostics)
        if self.intrinsic is not None:
            result.findings.extend(self.intrinsic.run(occurrences))
        if self.context is not None:
            result.findings.extend(self.context.run(app, occurrences))
        if self.string_group is not None:
            result.findings.extend(self.string_group.run(app))
        self.logger.debug(f"[SCAN] {app.app_id}: {len(occurrences)} strings, {len(result.matches)} regex matches, "
                          f"{len(result.findings)} pre-barrier findings")
        return result

    def _run_apps(self, apps: Sequence[Tuple[str, str]], keep_occurrences: bool) -> List[AppScan]:
        if self.config.jobs <= 1 or len(apps) <= 1:
            return [self.scan_app(app_id, app_dir, keep_occurrences) for app_id, app_dir in apps]
        results: Dict[str, AppScan] = {}
        with ThreadPoolExecutor(max_workers=self.config.jobs) as pool:
            futures = {pool.submit(self.scan_app, app_id, app_dir, keep_occurrences): app_id
                       for app_id, app_dir in apps}
            for future in as_completed(futures):
                results[futures[future]] = future.result()
        return [results[app_id] for app_id, _ in apps]

    def finish(self, corpus: str, results: List[AppScan]) -> ScanReport:
        """Barrier stage: Three-Layer verdicts over every app's regex matches, then the sorted merge"""
        results = sorted(results, key=lambda r: r.app_id)
        findings = [f for r in results for f in r.findings]
        if self.three_layer is not None:
            matches = [m for r in results for m in r.matches]
            findings.extend(self.three_layer.findings(self.three_layer.evaluate(matches)))
        report = ScanReport(
            corpus=corpus,
            detectors=list(self.config.detectors),
            apps=results,
            findings=merge_findings(findings),
            diagnostics=sorted((d for r in results for d in r.diagnostics),
                               key=lambda d: (d.app_id, d.location, d.arg_index, d.partial)),
            capability=self.capability(),
            settings={
                'detectors': [d.value for d in self.config.detectors],
                'budget': dict(self.config.budget),
                'three_layer': dict(self.config.three_layer),
                'context_radius': self.config.context_radius,
                'group_min_size': self.config.group_min_size,
            },
        )
        self.logger.info(f"[SCAN] {len(results)} apps ({len(report.failed_apps)} failed), "
                         f"{len(report.findings)} findings, {len(report.diagnostics)} slice diagnostics, "
                         f"{report.degraded_statements} degraded statements")
        return report

    def scan(self, corpus_path: str, dump_strings: Optional[str] = None) -> ScanReport:
        apps = list_apps(corpus_path)
        self.logger.info(f"[SCAN] Scanning {len(apps)} apps under {corpus_path} with {self.config.jobs} workers")
        results = self._run_apps(apps, keep_occurrences=dump_strings is not None)
        if dump_strings is not None:
            rows = dump_occurrences_csv([occ for r in sorted(results, key=lambda r: r.app_id)
                                         for occ in r.occurrences], dump_strings)
            self.logger.info(f"[SCAN] Dumped {rows} string occurrences to {dump_strings}")
        return self.finish(corpus_path, results)

    def scan_apps(self, apps: Sequence[IrApp], env: Optional[Dict[str, Dict[str, Dict[str, str]]]] = None,
                  corpus: str = '<memory>') -> ScanReport:
        """Scan already-parsed apps; `env` maps app_id to its env map"""
        env = env or {}
        results = [self.scan_parsed(app, env.get(app.app_id)) for app in apps]
        return self.finish(corpus, results)


def scan(corpus_path: str, config: ScanConfig, dump_strings: Optional[str] = None) -> ScanReport:
    return SecretScanner(config).scan(corpus_path, dump_strings)
