"""
Three-Layer Filter detector for SecretSieve
Regex candidates, then entropy, word and pattern filters
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from src.engine.findings import Detector, FindingLocation, SecretFinding, mask_value, merge_findings
from src.extraction.string_extractor import StringOccurrence
from src.three_layer.filters import (
    WordDictionary, entropy_verdicts, pattern_filter, shannon_entropy, word_filter,
)
from src.three_layer.rules import DetectionRule, PrecisionClass

CONFIDENCE = {PrecisionClass.PRECISE: 1.0, PrecisionClass.LOOSE: 0.5}


@dataclass(frozen=True)
class RegexMatch:
    occurrence: StringOccurrence
    rule: DetectionRule
    matched: str
    span: Tuple[int, int]


@dataclass
class FilterVerdict:
    """Per-filter outcome for one regex match; every enabled filter is evaluated"""
    candidate: StringOccurrence
    matched_rule: str
    rule_id: str
    matched_value: str
    entropy_bits: float
    passed: Dict[str, bool] = field(default_factory=dict)
    dictionary_hits: List[str] = field(default_factory=list)

    @property
    def final(self) -> bool:
        return all(self.passed.values())

    def to_dict(self, mask: bool = True) -> Dict[str, Any]:
        return {
            'rule': self.rule_id,
            'provider': self.matched_rule,
            'candidate': mask_value(self.candidate.value) if mask else self.candidate.value,
            'entropy_bits': round(self.entropy_bits, 6),
            'passed': dict(sorted(self.passed.items())),
            'final': self.final,
        }


def scan_regex(occurrences: Sequence[StringOccurrence], rules: Sequence[DetectionRule]) -> List[RegexMatch]:
    """One match per (occurrence, rule) pair whose rule fires on the occurrence"""
    matches = []
    for occurrence in occurrences:
        if not occurrence.value:
            continue
        for rule in rules:
            found = rule.match(occurrence.value)
            if found is not None and found.group(0):
                matches.append(RegexMatch(occurrence, rule, found.group(0), found.span()))
    return matches


class ThreeLayerFilter:
    """
    Three-Layer Filter. Entropy statistics are computed per rule group, either
    over the whole corpus (default) or per app; the corpus scope makes
    evaluate() a barrier over all apps' matches.
    """

    def __init__(self, rules: Sequence[DetectionRule], dictionary: Union[WordDictionary, Sequence[str]],
                 config: Optional[Dict[str, Any]] = None):
        config = config or {}
        self.logger = logging.getLogger('ThreeLayerFilter')
        self.rules = list(rules)
        self.rules_by_id = {rule.rule_id: rule for rule in self.rules}
        self.dictionary = dictionary if isinstance(dictionary, WordDictionary) else WordDictionary(dictionary)
        self.entropy_sided = config.get('entropy_sided', 'two')
        self.entropy_scope = config.get('entropy_scope', 'corpus')
        self.run_len = config.get('run_len', 4)
        self.min_word_len = config.get('min_word_len', 5)
        if self.entropy_scope not in ('corpus', 'app'):
            raise ValueError(f"entropy_scope must be 'corpus' or 'app', got {self.entropy_scope!r}")

    def match(self, occurrences: Sequence[StringOccurrence]) -> List[RegexMatch]:
        return scan_regex(occurrences, self.rules)

    def evaluate(self, matches: Sequence[RegexMatch]) -> List[FilterVerdict]:
        """Filter verdicts in the same order as `matches`"""
        entropies = [shannon_entropy(m.occurrence.value) for m in matches]

        groups: Dict[Tuple, List[int]] = defaultdict(list)
        for position, m in enumerate(matches):
            if 'entropy' in m.rule.filters:
                scope = m.occurrence.app_id if self.entropy_scope == 'app' else ''
                groups[(scope, m.rule.rule_id)].append(position)
        entropy_pass: Dict[int, bool] = {}
        for positions in groups.values():
            flags = entropy_verdicts([entropies[p] for p in positions], self.entropy_sided)
            entropy_pass.update(zip(positions, flags))

        verdicts = []
        for position, m in enumerate(matches):
            value = m.occurrence.value
            verdict = FilterVerdict(candidate=m.occurrence, matched_rule=m.rule.provider,
                                    rule_id=m.rule.rule_id, matched_value=m.matched,
                                    entropy_bits=entropies[position])
            if 'entropy' in m.rule.filters:
                verdict.passed['entropy'] = entropy_pass[position]
            if 'word' in m.rule.filters:
                verdict.dictionary_hits = self.dictionary.find(value, self.min_word_len)
                verdict.passed['word'] = word_filter(value, self.dictionary, self.min_word_len)
            if 'pattern' in m.rule.filters:
                verdict.passed['pattern'] = pattern_filter(value, self.run_len)
            verdicts.append(verdict)

        rejected = {name: sum(1 for v in verdicts if v.passed.get(name) is False)
                    for name in ('entropy', 'word', 'pattern')}
        self.logger.debug(f"Evaluated {len(verdicts)} regex matches, rejections per filter: {rejected}")
        return verdicts

    def findings(self, verdicts: Sequence[FilterVerdict]) -> List[SecretFinding]:
        """Accepted verdicts as findings, collapsed per (app, value, provider)"""
        raw = []
        for verdict in verdicts:
            if not verdict.final:
                continue
            occ = verdict.candidate
            rule = self.rules_by_id[verdict.rule_id]
            raw.append(SecretFinding(
                value=verdict.matched_value,
                provider=verdict.matched_rule,
                app_id=occ.app_id,
                detectors={Detector.THREE_LAYER},
                locations=[FindingLocation(occ.app_id, occ.class_name, occ.method_name,
                                           occ.statement_index, occ.origin.value)],
                confidence={Detector.THREE_LAYER: CONFIDENCE[rule.precision_class]},
                filter_verdict=verdict,
            ))
        return merge_findings(raw)

    def run(self, occurrences: Sequence[StringOccurrence]) -> List[SecretFinding]:
        verdicts = self.evaluate(self.match(occurrences))
        findings = self.findings(verdicts)
        self.logger.info(f"Three-Layer Filter: {len(verdicts)} candidates, {len(findings)} findings")
        return findings


def run_three_layer(occurrences: Sequence[StringOccurrence], rules: Sequence[DetectionRule],
                    dictionary, config: Optional[Dict[str, Any]] = None) -> List[SecretFinding]:
    return ThreeLayerFilter(rules, dictionary, config).run(occurrences)
