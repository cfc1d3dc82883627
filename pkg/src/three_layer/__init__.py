# Three-Layer Filter Module for SecretSieve

from .detector import FilterVerdict, RegexMatch, ThreeLayerFilter, run_three_layer, scan_regex
from .filters import (
    WordDictionary, entropy_filter, entropy_verdicts, pattern_filter, shannon_entropy, word_filter,
)
from .rules import DetectionRule, PrecisionClass, load_rules

__all__ = [
    'DetectionRule', 'FilterVerdict', 'PrecisionClass', 'RegexMatch', 'ThreeLayerFilter',
    'WordDictionary', 'entropy_filter', 'entropy_verdicts', 'load_rules', 'pattern_filter',
    'run_three_layer', 'scan_regex', 'shannon_entropy', 'word_filter',
]
