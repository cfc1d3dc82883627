"""
Entropy, word and pattern filters of the Three-Layer Filter
"""

import logging
from collections import Counter
from typing import Dict, FrozenSet, Hashable, Iterable, List, Mapping, Sequence, Union

import numpy as np

from src.core.errors import EmptyStringError

logger = logging.getLogger(__name__)

SIGMA_FACTOR = 3.0
SIGMA_TOLERANCE = 1e-12


def shannon_entropy(s: str) -> float:
    """Shannon entropy in bits per character"""
    if not s:
        raise EmptyStringError("entropy of an empty string is undefined")
    counts = np.fromiter(Counter(s).values(), dtype=float)
    probs = counts / len(s)
    return max(0.0, float(-(probs * np.log2(probs)).sum()))


def entropy_verdicts(entropies: Sequence[float], sided: str = "two") -> List[bool]:
    """
    Pass flags for one rule group. A value fails when it lies more than
    three population standard deviations from the group mean; with
    sided="low" only values below the mean can fail.
    """
    if len(entropies) < 2:
        return [True] * len(entropies)
    values = np.asarray(entropies, dtype=float)
    mean = values.mean()
    bound = SIGMA_FACTOR * values.std() + SIGMA_TOLERANCE
    if sided == "low":
        deviation = mean - values
    elif sided == "two":
        deviation = np.abs(values - mean)
    else:
        raise ValueError(f"entropy_sided must be 'two' or 'low', got {sided!r}")
    return [bool(d <= bound) for d in deviation]


def entropy_filter(groups: Mapping[Hashable, Sequence[float]], sided: str = "two") -> Dict[Hashable, List[bool]]:
    """Apply the 3-sigma rule independently inside every group"""
    return {key: entropy_verdicts(values, sided) for key, values in groups.items()}


class WordDictionary:
    """Lower-case word set indexed by length for substring lookups"""

    def __init__(self, words: Iterable[str]):
        self.words: FrozenSet[str] = frozenset(w.strip().casefold() for w in words if w.strip())
        self.lengths = sorted({len(w) for w in self.words})

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.words

    def find(self, s: str, min_word_len: int = 1) -> List[str]:
        """Dictionary words of length >= min_word_len occurring inside s"""
        folded = s.casefold()
        hits = []
        for length in self.lengths:
            if length < min_word_len or length > len(folded):
                continue
            for start in range(len(folded) - length + 1):
                piece = folded[start:start + length]
                if piece in self.words:
                    hits.append(piece)
        return hits

    def contains_word(self, s: str, min_word_len: int = 1) -> bool:
        folded = s.casefold()
        for length in self.lengths:
            if length < min_word_len or length > len(folded):
                continue
            for start in range(len(folded) - length + 1):
                if folded[start:start + length] in self.words:
                    return True
        return False

    @classmethod
    def load(cls, path: str) -> 'WordDictionary':
        with open(path, 'r', encoding='utf-8') as f:
            dictionary = cls(f.read().splitlines())
        logger.info(f"Loaded {len(dictionary)} dictionary words from {path}")
        return dictionary


def word_filter(s: str, dictionary: Union[WordDictionary, Iterable[str]], min_word_len: int = 5) -> bool:
    """Pass unless s contains a dictionary word of at least min_word_len characters"""
    if not isinstance(dictionary, WordDictionary):
        dictionary = WordDictionary(dictionary)
    return not dictionary.contains_word(s, min_word_len)


def pattern_filter(s: str, run_len: int = 4) -> bool:
    """Pass unless s has a run of run_len identical, ascending-by-one or descending-by-one characters"""
    if run_len < 2:
        raise ValueError(f"run_len must be >= 2, got {run_len}")
    same = ascending = descending = 1
    for prev, cur in zip(s, s[1:]):
        step = ord(cur) - ord(prev)
        same = same + 1 if step == 0 else 1
        ascending = ascending + 1 if step == 1 else 1
        descending = descending + 1 if step == -1 else 1
        if max(same, ascending, descending) >= run_len:
            return False
    return True
