"""
Secret value generation for the synthetic corpus
Key formats are templates such as "AIza{urlsafe:35}": literal text plus
{charset:count} or {charset:min-max} segments.
"""

import json
import logging
import re
import string
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.errors import InvalidSpecError
from src.engine.findings import mask_value
from src.three_layer.filters import WordDictionary, pattern_filter, word_filter
from src.three_layer.rules import DetectionRule, PrecisionClass

logger = logging.getLogger(__name__)

CHARSETS = {
    'digits': string.digits,
    'nonzero': '123456789',
    'hex': '0123456789abcdef',
    'upper_hex': '0123456789ABCDEF',
    'lower': string.ascii_lowercase,
    'upper': string.ascii_uppercase,
    'alnum': string.digits + string.ascii_uppercase + string.ascii_lowercase,
    'upper_digits': string.digits + string.ascii_uppercase,
    'lower_digits': string.digits + string.ascii_lowercase,
    'urlsafe': string.digits + string.ascii_uppercase + string.ascii_lowercase + '-_',
    'base64': string.digits + string.ascii_uppercase + string.ascii_lowercase + '+/',
}

SEGMENT = re.compile(r'\{(\w+):(\d+)(?:-(\d+))?\}')
MAX_ATTEMPTS = 64
MIN_PIECE = 4
MAX_PIECE = 12
DISTRACTOR_LENGTHS = ((18, 25), (40, 50))


@dataclass(frozen=True)
class Segment:
    charset: str
    low: int
    high: int


@dataclass(frozen=True)
class KeyFormat:
    template: str
    parts: Tuple[Union[str, Segment], ...]

    @classmethod
    def parse(cls, template: str) -> 'KeyFormat':
        parts: List[Union[str, Segment]] = []
        position = 0
        for match in SEGMENT.finditer(template):
            if match.start() > position:
                parts.append(template[position:match.start()])
            name, low, high = match.group(1), int(match.group(2)), match.group(3)
            if name not in CHARSETS:
                raise InvalidSpecError(f"key format {template!r}: unknown charset {name!r}")
            high = int(high) if high is not None else low
            if low < 1 or high < low:
                raise InvalidSpecError(f"key format {template!r}: bad length range {low}-{high}")
            parts.append(Segment(name, low, high))
            position = match.end()
        if position < len(template):
            parts.append(template[position:])
        literal = ''.join(p for p in parts if isinstance(p, str))
        if '{' in literal or '}' in literal:
            raise InvalidSpecError(f"key format {template!r}: malformed segment")
        if not any(isinstance(p, Segment) for p in parts):
            raise InvalidSpecError(f"key format {template!r} has no random segment")
        return cls(template, tuple(parts))

    def sample(self, rng: np.random.Generator) -> str:
        """
        Random parts avoid the template's literal characters and each other
        when the charset is large enough, so keys of one fixed-length format
        share one entropy value.
        """
        used = set(''.join(p for p in self.parts if isinstance(p, str)))
        out = []
        for part in self.parts:
            if isinstance(part, str):
                out.append(part)
                continue
            n = int(rng.integers(part.low, part.high + 1))
            charset = CHARSETS[part.charset]
            pool = [c for c in charset if c not in used]
            if len(pool) >= n:
                chars = [pool[i] for i in rng.choice(len(pool), size=n, replace=False)]
            else:
                chars = [charset[i] for i in rng.integers(0, len(charset), size=n)]
            used.update(chars)
            out.append(''.join(chars))
        return ''.join(out)


def load_key_formats(path: str) -> Dict[str, str]:
    with open(path, 'r', encoding='utf-8') as f:
        formats = json.load(f)
    logger.info(f"Loaded {len(formats)} key formats from {path}")
    return formats


class KeyGenerator:
    """
    Draws secret values that match the provider's detection rule and, where
    that rule enables them, pass the word and pattern filters. A format whose
    literal text can never pass (e.g. an "AAAA" prefix) is accepted after
    MAX_ATTEMPTS draws.
    """

    def __init__(self, formats: Mapping[str, str], rules: Sequence[DetectionRule],
                 dictionary: Optional[WordDictionary] = None, config: Optional[Dict[str, Any]] = None):
        config = config or {}
        self.logger = logging.getLogger('KeyGenerator')
        self.formats = {provider: KeyFormat.parse(template) for provider, template in formats.items()}
        self.rules = list(rules)
        self.dictionary = dictionary
        self.run_len = config.get('run_len', 4)
        self.min_word_len = config.get('min_word_len', 5)

    def key_format(self, provider: str, template: Optional[str] = None) -> KeyFormat:
        if template is not None:
            return KeyFormat.parse(template)
        if provider not in self.formats:
            raise InvalidSpecError(f"no key format for provider {provider!r}")
        return self.formats[provider]

    def provider_rules(self, provider: str) -> List[DetectionRule]:
        rules = [r for r in self.rules if r.provider == provider]
        precise = [r for r in rules if r.precision_class == PrecisionClass.PRECISE]
        return precise or rules

    def _passes(self, value: str, rule: DetectionRule) -> bool:
        if 'pattern' in rule.filters and not pattern_filter(value, self.run_len):
            return False
        if 'word' in rule.filters and self.dictionary is not None \
                and not word_filter(value, self.dictionary, self.min_word_len):
            return False
        return True

    def generate(self, provider: str, rng: np.random.Generator, template: Optional[str] = None) -> str:
        key_format = self.key_format(provider, template)
        rules = self.provider_rules(provider)
        candidate = ''
        for _ in range(MAX_ATTEMPTS):
            candidate = key_format.sample(rng)
            if not rules:
                return candidate
            rule = next((r for r in rules if r.match(candidate) is not None), None)
            if rule is None:
                raise InvalidSpecError(
                    f"key format {key_format.template!r} yields {mask_value(candidate)}, "
                    f"which no {provider} rule matches")
            if self._passes(candidate, rule):
                return candidate
        self.logger.debug(f"{provider}: no filter-clean key after {MAX_ATTEMPTS} draws, keeping the last one")
        return candidate

    def distractor(self, rng: np.random.Generator,
                   lengths: Sequence[Sequence[int]] = DISTRACTOR_LENGTHS) -> str:
        """Random alphanumeric string shaped like the loose Twitter rules"""
        low, high = lengths[int(rng.integers(len(lengths)))]
        n = int(rng.integers(low, high + 1))
        charset = CHARSETS['alnum']
        return ''.join(charset[i] for i in rng.integers(0, len(charset), size=n))


def split_value(value: str, rng: np.random.Generator, rules: Sequence[DetectionRule] = (),
                max_piece: int = MAX_PIECE) -> List[str]:
    """Cut a secret into at least two pieces, none of which a precise rule matches"""
    if len(value) < 2:
        raise InvalidSpecError(f"cannot split a {len(value)}-character value")
    precise = [r for r in rules if r.precision_class == PrecisionClass.PRECISE]
    for _ in range(MAX_ATTEMPTS):
        pieces, rest = [], value
        while len(rest) > max_piece:
            size = int(rng.integers(MIN_PIECE, max_piece + 1))
            pieces.append(rest[:size])
            rest = rest[size:]
        pieces.append(rest)
        if len(pieces) == 1:
            cut = int(rng.integers(1, len(value)))
            pieces = [value[:cut], value[cut:]]
        if not any(rule.match(piece) is not None for piece in pieces for rule in precise):
            return pieces
    raise InvalidSpecError(f"could not split {mask_value(value)} into rule-free pieces")
