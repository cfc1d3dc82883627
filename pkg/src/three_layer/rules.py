"""
Detection Rules for the Three-Layer Filter
Provider regex catalog loaded from JSON (config/detection_rules.json)
"""

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, List, Optional, Pattern

from src.core.errors import RuleCompileError

logger = logging.getLogger(__name__)

FILTER_NAMES = ('entropy', 'word', 'pattern')


class PrecisionClass(str, Enum):
    PRECISE = "precise"
    LOOSE = "loose"


@dataclass(frozen=True)
class DetectionRule:
    """
    Provider regex rule. Precise rules match anywhere inside a string,
    loose rules must match the whole string.
    """
    rule_id: str
    provider: str
    pattern: str
    precision_class: PrecisionClass = PrecisionClass.PRECISE
    filters: FrozenSet[str] = frozenset(FILTER_NAMES)
    compiled: Pattern = field(default=None, compare=False, repr=False)

    @classmethod
    def build(cls, provider: str, pattern: str, precision_class: str = "precise",
              filters=FILTER_NAMES, rule_id: Optional[str] = None) -> 'DetectionRule':
        if not provider:
            raise RuleCompileError(provider, pattern, "empty provider")
        try:
            precision = PrecisionClass(precision_class)
        except ValueError:
            raise RuleCompileError(provider, pattern, f"unknown precision_class {precision_class!r}")
        unknown = set(filters) - set(FILTER_NAMES)
        if unknown:
            raise RuleCompileError(provider, pattern, f"unknown filters {sorted(unknown)}")
        try:
            compiled = re.compile(pattern)
        except re.error as e:
            raise RuleCompileError(provider, pattern, str(e))
        return cls(rule_id or provider, provider, pattern, precision, frozenset(filters), compiled)

    def match(self, value: str) -> Optional[re.Match]:
        if not value:
            return None
        if self.precision_class == PrecisionClass.LOOSE:
            return self.compiled.fullmatch(value)
        return self.compiled.search(value)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'id': self.rule_id,
            'provider': self.provider,
            'pattern': self.pattern,
            'precision_class': self.precision_class.value,
            'filters': sorted(self.filters),
        }


def rules_from_entries(entries: List[Dict[str, Any]]) -> List[DetectionRule]:
    rules = []
    seen = set()
    for position, entry in enumerate(entries):
        provider = entry.get('provider', '')
        rule_id = entry.get('id') or f"{provider}#{position}"
        if rule_id in seen:
            raise RuleCompileError(provider, entry.get('pattern', ''), f"duplicate rule id {rule_id}")
        seen.add(rule_id)
        rules.append(DetectionRule.build(
            provider=provider,
            pattern=entry.get('pattern', ''),
            precision_class=entry.get('precision_class', 'precise'),
            filters=entry.get('filters', FILTER_NAMES),
            rule_id=rule_id,
        ))
    return rules


def load_rules(path: str, include_loose: bool = True) -> List[DetectionRule]:
    """Load and compile the rule catalog; compile errors surface here, never during a scan"""
    with open(path, 'r', encoding='utf-8') as f:
        entries = json.load(f)
    rules = rules_from_entries(entries)
    if not include_loose:
        rules = [rule for rule in rules if rule.precision_class == PrecisionClass.PRECISE]
    logger.info(f"Loaded {len(rules)} detection rules for "
                f"{len({rule.provider for rule in rules})} providers from {path}")
    return rules
