"""
Scoring detector output against a ground-truth manifest
Per-detector and combined precision/recall/F1, per-provider breakdown,
detector overlap, complementarity and manual-review sampling
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
from scipy import stats

from src.corpus.generator import GroundTruthManifest
from src.engine.findings import SecretFinding, detector_names, overlap_matrix, unique_detections

logger = logging.getLogger(__name__)

COMBINED = 'combined'
DEFAULT_CONFIDENCE = 0.95
DEFAULT_MARGIN = 0.05
# Worst-case proportion for sample sizing
MAX_VARIANCE_P = 0.5

Key = Tuple[str, str, str]


@dataclass
class DetectorScore:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        predicted = self.tp + self.fp
        return self.tp / predicted if predicted else 0.0

    @property
    def recall(self) -> float:
        actual = self.tp + self.fn
        return self.tp / actual if actual else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    @classmethod
    def compare(cls, predicted: Set[Key], truth: Set[Key]) -> 'DetectorScore':
        return cls(tp=len(predicted & truth), fp=len(predicted - truth), fn=len(truth - predicted))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'tp': self.tp, 'fp': self.fp, 'fn': self.fn,
            'precision': round(self.precision, 6),
            'recall': round(self.recall, 6),
            'f1': round(self.f1, 6),
        }


@dataclass
class ScoreReport:
    detectors: Dict[str, DetectorScore] = field(default_factory=dict)
    per_provider: Dict[str, Dict[str, DetectorScore]] = field(default_factory=dict)
    overlap: Dict[str, int] = field(default_factory=dict)
    complementarity: Dict[str, Dict[str, float]] = field(default_factory=dict)

    @property
    def combined(self) -> DetectorScore:
        return self.detectors[COMBINED]

    def score(self, detector: str, provider: Optional[str] = None) -> DetectorScore:
        if provider is None:
            return self.detectors[detector]
        return self.per_provider.get(provider, {}).get(detector, DetectorScore())

    def to_dict(self) -> Dict[str, Any]:
        return {
            'detectors': {name: s.to_dict() for name, s in self.detectors.items()},
            'per_provider': {provider: {name: s.to_dict() for name, s in scores.items()}
                             for provider, scores in self.per_provider.items()},
            'overlap': dict(self.overlap),
            'complementarity': {name: dict(values) for name, values in self.complementarity.items()},
        }


def complementarity(findings: Sequence[SecretFinding]) -> Dict[str, Dict[str, float]]:
    """
    exclusive_share: fraction of a detector's unique detections no other detector made.
    coverage_gain: fraction of the union that the detector alone misses.
    """
    unique = unique_detections(list(findings))
    union = len(unique)
    names = sorted({d for detectors in unique.values() for d in detectors})
    result = {}
    for name in names:
        found = [detectors for detectors in unique.values() if name in detectors]
        exclusive = sum(1 for detectors in found if detectors == {name})
        result[name] = {
            'detections': len(found),
            'exclusive': exclusive,
            'exclusive_share': round(exclusive / len(found), 6) if found else 0.0,
            'coverage_gain': round((union - len(found)) / union, 6) if union else 0.0,
        }
    return result


def score(findings: Sequence[SecretFinding], manifest: GroundTruthManifest,
          detectors: Iterable[str] = ()) -> ScoreReport:
    """
    A finding matches a manifest entry on exact (app_id, value, provider).
    `detectors` adds rows for enabled detectors that produced nothing.
    """
    truth = manifest.keys()
    names = sorted(set(detector_names(detectors)) | {d for f in findings for d in detector_names(f.detectors)})
    predicted: Dict[str, Set[Key]] = {name: set() for name in names}
    for finding in findings:
        for name in detector_names(finding.detectors):
            predicted[name].add(finding.key)
    predicted[COMBINED] = {f.key for f in findings}

    report = ScoreReport()
    for name in names + [COMBINED]:
        report.detectors[name] = DetectorScore.compare(predicted[name], truth)

    providers = sorted({key[2] for key in truth} | {f.provider for f in findings})
    for provider in providers:
        provider_truth = {key for key in truth if key[2] == provider}
        report.per_provider[provider] = {
            name: DetectorScore.compare({k for k in predicted[name] if k[2] == provider}, provider_truth)
            for name in names + [COMBINED]
        }

    report.overlap = overlap_matrix(list(findings))
    report.complementarity = complementarity(findings)
    combined = report.combined
    logger.info(f"Scored {len(findings)} findings against {len(truth)} seeded secrets: "
                f"combined precision {combined.precision:.3f}, recall {combined.recall:.3f}")
    return report


def review_sample_size(population: int, confidence: float = DEFAULT_CONFIDENCE,
                       margin: float = DEFAULT_MARGIN) -> int:
    """Cochran sample size with finite-population correction"""
    if population <= 0:
        return 0
    if not 0 < confidence < 1 or not 0 < margin < 1:
        raise ValueError(f"confidence and margin must lie in (0, 1), got {confidence}, {margin}")
    z = stats.norm.ppf(1 - (1 - confidence) / 2)
    n0 = z ** 2 * MAX_VARIANCE_P * (1 - MAX_VARIANCE_P) / margin ** 2
    return min(population, math.ceil(n0 / (1 + (n0 - 1) / population)))


def draw_review_sample(findings: Sequence[SecretFinding], seed: int = 0, size: Optional[int] = None,
                       confidence: float = DEFAULT_CONFIDENCE, margin: float = DEFAULT_MARGIN) -> List[SecretFinding]:
    """Seeded sample of findings for manual validation, returned in key order"""
    ordered = sorted(findings, key=lambda f: f.key)
    if size is None:
        size = review_sample_size(len(ordered), confidence, margin)
    size = min(size, len(ordered))
    if size == 0:
        return []
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(len(ordered), size=size, replace=False))
    logger.info(f"Drew {size} of {len(ordered)} findings for review")
    return [ordered[int(i)] for i in chosen]
