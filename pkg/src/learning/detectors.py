"""
Learned detectors for SecretSieve
Intrinsic-string and context-window classifiers (combined into one detector)
and the string-group classifier
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import EmptyStringError, EmptyWindowError, FeatureMismatchError
from src.engine.findings import Detector, FindingLocation, SecretFinding, merge_findings
from src.extraction.string_extractor import Origin, StringGroup, StringOccurrence, build_string_groups, method_strings
from src.ir.index import method_window
from src.ir.model import IrApp, IrMethod
from src.ir.printer import render_statement
from src.learning.features import Scheme
from src.learning.models import DECISION_THRESHOLD, TrainedModel
from src.three_layer.filters import shannon_entropy
from src.three_layer.rules import DetectionRule, PrecisionClass

logger = logging.getLogger(__name__)

CONTEXT_RADIUS = 6
UNKNOWN_PROVIDER = "unknown"
TOKEN_SCHEMES = (Scheme.COUNT_FREQUENCY, Scheme.TFIDF)

MethodKey = Tuple[str, str, Tuple[str, ...]]


@dataclass(frozen=True)
class Verdict:
    label: str
    score: float

    @property
    def positive(self) -> bool:
        return self.label in ('candidate', 'secret_context', 'secret')


def _require_scheme(model: TrainedModel, allowed: Sequence[Scheme], role: str):
    if model.scheme not in allowed:
        raise FeatureMismatchError(
            f"{role} model needs {'/'.join(s.value for s in allowed)} features, got {model.scheme.value}")


def intrinsic_classify(s: str, model: TrainedModel, threshold: float = DECISION_THRESHOLD) -> Verdict:
    """Judge a string on its own characters (char n-gram model)"""
    if not s:
        raise EmptyStringError("cannot classify an empty string")
    _require_scheme(model, (Scheme.CHAR_NGRAM,), 'intrinsic')
    score = float(model.scores([(s,)])[0])
    return Verdict('candidate' if score >= threshold else 'not', score)


def context_classify(window: Sequence[str], model: TrainedModel, threshold: float = DECISION_THRESHOLD) -> Verdict:
    """Judge the rendered statements around a literal"""
    if not window:
        raise EmptyWindowError("context window has no statements")
    _require_scheme(model, TOKEN_SCHEMES, 'context')
    score = float(model.scores([tuple(window)])[0])
    return Verdict('secret_context' if score >= threshold else 'not', score)


def predict_group(model: TrainedModel, group, threshold: float = DECISION_THRESHOLD) -> Verdict:
    strings = group.strings if isinstance(group, StringGroup) else tuple(group)
    if not strings:
        raise EmptyStringError("cannot classify an empty string group")
    score = float(model.scores([strings])[0])
    return Verdict('secret' if score >= threshold else 'no_secret', score)


def render_window(method: IrMethod, index: int, radius: int = CONTEXT_RADIUS) -> List[str]:
    return [render_statement(stmt) for stmt in method_window(method, index, radius)]


def infer_provider(value: str, rules: Sequence[DetectionRule]) -> str:
    """Provider of the first precise rule matching the value, else 'unknown'"""
    for rule in rules:
        if rule.precision_class == PrecisionClass.PRECISE and rule.match(value) is not None:
            return rule.provider
    return UNKNOWN_PROVIDER


def pick_group_secret(strings: Sequence[str]) -> Optional[str]:
    """Member string most likely to be the secret: highest entropy, then longest, then first; None if all are empty"""
    best, best_key = None, None
    for s in strings:
        if not s:
            continue
        key = (shannon_entropy(s), len(s))
        if best_key is None or key > best_key:
            best, best_key = s, key
    return best


def _location(occ: StringOccurrence) -> FindingLocation:
    return FindingLocation(occ.app_id, occ.class_name, occ.method_name, occ.statement_index, occ.origin.value)


class IntrinsicDetector:
    def __init__(self, model: TrainedModel, rules: Sequence[DetectionRule] = (), config: Optional[Dict[str, Any]] = None):
        config = config or {}
        self.logger = logging.getLogger('IntrinsicDetector')
        _require_scheme(model, (Scheme.CHAR_NGRAM,), 'intrinsic')
        self.model = model
        self.rules = list(rules)
        self.threshold = config.get('threshold', DECISION_THRESHOLD)

    def score_all(self, occurrences: Sequence[StringOccurrence]) -> np.ndarray:
        documents = [(occ.value,) for occ in occurrences]
        return self.model.scores(documents) if documents else np.zeros(0)

    def run(self, occurrences: Sequence[StringOccurrence]) -> List[SecretFinding]:
        occurrences = [occ for occ in occurrences if occ.value]
        scores = self.score_all(occurrences)
        raw = [
            SecretFinding(value=occ.value, provider=infer_provider(occ.value, self.rules), app_id=occ.app_id,
                          detectors={Detector.INTRINSIC}, locations=[_location(occ)],
                          confidence={Detector.INTRINSIC: float(score)})
            for occ, score in zip(occurrences, scores) if score >= self.threshold
        ]
        findings = merge_findings(raw)
        self.logger.debug(f"Intrinsic model flagged {len(raw)} of {len(occurrences)} strings")
        return findings


class ContextDetector:
    """
    Two-model combination: a literal is reported when the intrinsic model
    marks it a candidate and the context model marks its window as secret context.
    """

    def __init__(self, intrinsic: TrainedModel, context: TrainedModel, rules: Sequence[DetectionRule] = (),
                 config: Optional[Dict[str, Any]] = None):
        config = config or {}
        self.logger = logging.getLogger('ContextDetector')
        self.intrinsic = IntrinsicDetector(intrinsic, rules, config)
        _require_scheme(context, TOKEN_SCHEMES, 'context')
        self.context = context
        self.rules = list(rules)
        self.radius = config.get('context_radius', CONTEXT_RADIUS)
        self.threshold = config.get('threshold', DECISION_THRESHOLD)

    def run(self, app: IrApp, occurrences: Sequence[StringOccurrence]) -> List[SecretFinding]:
        in_methods = [occ for occ in occurrences if occ.value and occ.origin == Origin.METHOD_BODY]
        intrinsic_scores = self.intrinsic.score_all(in_methods)
        candidates = [(occ, score) for occ, score in zip(in_methods, intrinsic_scores) if score >= self.threshold]
        if not candidates:
            return []

        windows = []
        for occ, _ in candidates:
            method = app.index.methods[(occ.class_name, occ.method_name, occ.param_types)]
            windows.append(tuple(render_window(method, occ.statement_index, self.radius)))
        context_scores = self.context.scores(windows)

        raw = []
        for (occ, intrinsic_score), context_score in zip(candidates, context_scores):
            if context_score < self.threshold:
                continue
            raw.append(SecretFinding(
                value=occ.value, provider=infer_provider(occ.value, self.rules), app_id=occ.app_id,
                detectors={Detector.CONTEXT}, locations=[_location(occ)],
                confidence={Detector.CONTEXT: float(min(intrinsic_score, context_score))}))
        self.logger.debug(f"{app.app_id}: {len(candidates)} intrinsic candidates, {len(raw)} in secret context")
        return merge_findings(raw)


class StringGroupDetector:
    def __init__(self, model: TrainedModel, rules: Sequence[DetectionRule] = (), config: Optional[Dict[str, Any]] = None):
        config = config or {}
        self.logger = logging.getLogger('StringGroupDetector')
        self.model = model
        self.rules = list(rules)
        self.min_size = config.get('group_min_size', 2)
        self.threshold = config.get('threshold', DECISION_THRESHOLD)

    def classify(self, groups: Sequence[StringGroup]) -> List[Verdict]:
        if not groups:
            return []
        scores = self.model.scores([g.strings for g in groups])
        return [Verdict('secret' if s >= self.threshold else 'no_secret', float(s)) for s in scores]

    def run(self, app: IrApp) -> List[SecretFinding]:
        groups = build_string_groups(app, self.min_size)
        raw = []
        for group, verdict in zip(groups, self.classify(groups)):
            if not verdict.positive:
                continue
            value = pick_group_secret(group.strings)
            if value is None:
                continue
            method = app.index.methods[(group.class_name, group.method_name, group.param_types)]
            index = next(i for i, s in method_strings(method) if s == value)
            raw.append(SecretFinding(
                value=value, provider=infer_provider(value, self.rules), app_id=app.app_id,
                detectors={Detector.STRING_GROUP},
                locations=[FindingLocation(app.app_id, group.class_name, group.method_name, index, 'method_body')],
                confidence={Detector.STRING_GROUP: verdict.score}))
        self.logger.debug(f"{app.app_id}: {len(raw)} of {len(groups)} string groups classified secret")
        return merge_findings(raw)


@dataclass(frozen=True)
class DegradationReport:
    n_windows: int
    mean_original: float
    mean_obfuscated: float
    n_dropped: int

    @property
    def mean_drop(self) -> float:
        return self.mean_original - self.mean_obfuscated

    def to_dict(self) -> Dict[str, Any]:
        return {
            'n_windows': self.n_windows,
            'mean_original': round(self.mean_original, 6),
            'mean_obfuscated': round(self.mean_obfuscated, 6),
            'mean_drop': round(self.mean_drop, 6),
            'n_dropped': self.n_dropped,
        }


def secret_windows(app: IrApp, values: Sequence[str], radius: int = CONTEXT_RADIUS) -> Dict[Tuple[MethodKey, int], List[str]]:
    """Rendered windows around every method-body literal whose value is in `values`"""
    wanted = set(values)
    windows = {}
    for method in app.methods():
        for index, value in method_strings(method):
            if value in wanted:
                windows[(method.key, index)] = render_window(method, index, radius)
    return windows


def paired_windows(app: IrApp, obfuscated: IrApp, method_map: Callable[[MethodKey], MethodKey],
                   values: Sequence[str], radius: int = CONTEXT_RADIUS) -> List[Tuple[List[str], List[str]]]:
    """(original, obfuscated) window pairs for the same literal occurrence"""
    renamed = secret_windows(obfuscated, values, radius)
    pairs = []
    for (key, index), window in sorted(secret_windows(app, values, radius).items()):
        twin = renamed.get((method_map(key), index))
        if twin is not None:
            pairs.append((window, twin))
    return pairs


def context_degradation(model: TrainedModel, pairs: Sequence[Tuple[Sequence[str], Sequence[str]]]) -> DegradationReport:
    """Paired context-score change between windows and their obfuscated twins"""
    if not pairs:
        raise EmptyWindowError("no window pairs to compare")
    original = model.scores([tuple(a) for a, _ in pairs])
    obfuscated = model.scores([tuple(b) for _, b in pairs])
    report = DegradationReport(len(pairs), float(original.mean()), float(obfuscated.mean()),
                               int((obfuscated < original).sum()))
    logger.info(f"Context score over {report.n_windows} windows: {report.mean_original:.3f} -> "
                f"{report.mean_obfuscated:.3f} (drop {report.mean_drop:.3f})")
    return report
