"""
Secret findings shared by all detectors and the scan engine
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

MASK_PREFIX_LEN = 4


class Detector(str, Enum):
    THREE_LAYER = "three_layer"
    SIG_FLOW = "sig_flow"
    INTRINSIC = "intrinsic"
    CONTEXT = "context"
    STRING_GROUP = "string_group"

    @classmethod
    def parse_list(cls, names) -> List['Detector']:
        """Accepts a comma string or an iterable of names"""
        if isinstance(names, str):
            names = [name for name in names.split(',') if name.strip()]
        return [cls(name.strip()) for name in names]


def mask_value(value: str) -> str:
    """First four characters plus the length, e.g. AIza…(39)"""
    return f"{value[:MASK_PREFIX_LEN]}…({len(value)})"


@dataclass(frozen=True)
class FindingLocation:
    app_id: str
    class_name: str
    method_name: Optional[str] = None
    statement_index: Optional[int] = None
    origin: str = "method_body"

    @property
    def sort_key(self) -> Tuple:
        return (self.app_id, self.class_name, self.method_name or '',
                -1 if self.statement_index is None else self.statement_index, self.origin)

    def render(self) -> str:
        if self.method_name is None:
            return f"{self.class_name}.<static>"
        return f"{self.class_name}.{self.method_name}:{self.statement_index}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            'class': self.class_name,
            'method': self.method_name,
            'index': self.statement_index,
            'origin': self.origin,
        }


@dataclass
class SecretFinding:
    """Detected candidate secret; merged per app by (value, provider)"""
    value: str
    provider: str
    app_id: str
    detectors: set = field(default_factory=set)
    locations: List[FindingLocation] = field(default_factory=list)
    confidence: Dict[str, float] = field(default_factory=dict)
    multiplicity: int = 1
    slice_trace: Optional[List[Any]] = None
    filter_verdict: Optional[Any] = None
    fuzzy: bool = False

    @property
    def key(self) -> Tuple[str, str, str]:
        return (self.app_id, self.value, self.provider)

    def add_location(self, location: FindingLocation):
        if location not in self.locations:
            self.locations.append(location)
            self.locations.sort(key=lambda loc: loc.sort_key)

    def merge(self, other: 'SecretFinding'):
        """Union another finding with the same key into this one"""
        if other.key != self.key:
            raise ValueError(f"cannot merge findings {self.key} and {other.key}")
        self.detectors |= other.detectors
        for location in other.locations:
            self.add_location(location)
        for detector, score in other.confidence.items():
            self.confidence[detector] = max(score, self.confidence.get(detector, 0.0))
        self.multiplicity += other.multiplicity
        if self.slice_trace is None:
            self.slice_trace = other.slice_trace
        if self.filter_verdict is None:
            self.filter_verdict = other.filter_verdict
        self.fuzzy = self.fuzzy or other.fuzzy

    def to_dict(self, mask: bool = True) -> Dict[str, Any]:
        data = {
            'app_id': self.app_id,
            'value': mask_value(self.value) if mask else self.value,
            'provider': self.provider,
            'detectors': sorted(str(Detector(d).value) for d in self.detectors),
            'confidence': {str(Detector(k).value): round(v, 6) for k, v in sorted(
                self.confidence.items(), key=lambda item: str(Detector(item[0]).value))},
            'multiplicity': self.multiplicity,
            'locations': [loc.to_dict() for loc in self.locations],
            'fuzzy': self.fuzzy,
        }
        if self.slice_trace is not None:
            data['slice_trace'] = [step.to_dict() for step in self.slice_trace]
        if self.filter_verdict is not None:
            data['filter_verdict'] = self.filter_verdict.to_dict(mask=mask)
        return data


def merge_findings(findings: List[SecretFinding]) -> List[SecretFinding]:
    """Collapse findings sharing (app, value, provider); output sorted by key"""
    merged: Dict[Tuple[str, str, str], SecretFinding] = {}
    for finding in findings:
        existing = merged.get(finding.key)
        if existing is None:
            merged[finding.key] = SecretFinding(
                value=finding.value, provider=finding.provider, app_id=finding.app_id,
                detectors=set(finding.detectors), locations=sorted(finding.locations, key=lambda l: l.sort_key),
                confidence=dict(finding.confidence), multiplicity=finding.multiplicity,
                slice_trace=finding.slice_trace, filter_verdict=finding.filter_verdict,
                fuzzy=finding.fuzzy)
        else:
            existing.merge(finding)
    return [merged[key] for key in sorted(merged)]


def detector_names(detectors) -> List[str]:
    return sorted(Detector(d).value for d in detectors)


def unique_detections(findings: List[SecretFinding]) -> Dict[Tuple[str, str], set]:
    """(value, provider) -> detectors that reported it in any app"""
    unique: Dict[Tuple[str, str], set] = {}
    for finding in findings:
        unique.setdefault((finding.value, finding.provider), set()).update(detector_names(finding.detectors))
    return unique


def overlap_matrix(findings: List[SecretFinding]) -> Dict[str, int]:
    """
    Unique (value, provider) counts per exact detector set, keyed by the
    '+'-joined sorted detector names. Cells sum to the number of unique pairs.
    """
    cells: Dict[str, int] = {}
    for detectors in unique_detections(findings).values():
        cell = '+'.join(sorted(detectors))
        cells[cell] = cells.get(cell, 0) + 1
    return dict(sorted(cells.items()))
