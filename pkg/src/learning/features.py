"""
Feature extraction for the learned detectors
Character histograms, token counts, TF-IDF and character n-grams over
string groups, single strings and rendered context windows
"""

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from sklearn.feature_extraction.text import CountVectorizer

from src.core.errors import EmptyGroupError, FeatureMismatchError, UnknownTermError, ZeroVectorError
from src.three_layer.filters import WordDictionary

logger = logging.getLogger(__name__)

HISTOGRAM_BINS = 256
TOKEN_PATTERN = re.compile(r'\w\w+')
WORD_PIECE = re.compile(r'[A-Z]?[a-z]+|[A-Z]+(?![a-z])')
DEFAULT_NGRAM_RANGE = (1, 3)


class Variant(str, Enum):
    CASE_SENSITIVE = "case_sensitive"
    CASE_INSENSITIVE = "case_insensitive"
    ENGLISH_WORD_EXTRACTION = "english_word_extraction"


class Scheme(str, Enum):
    CHAR_HISTOGRAM = "char_histogram"
    TFIDF = "tfidf"
    COUNT_FREQUENCY = "count_frequency"
    CHAR_NGRAM = "char_ngram"


@dataclass(frozen=True)
class FeatureVector:
    """Sparse term -> weight map tagged with the scheme and variant that produced it"""
    dims: Mapping[Any, float]
    scheme: Scheme
    variant: Variant

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(np.fromiter(self.dims.values(), dtype=float))) if self.dims else 0.0

    def check_compatible(self, other: 'FeatureVector'):
        if self.scheme != other.scheme or self.variant != other.variant:
            raise FeatureMismatchError(
                f"cannot combine {self.scheme.value}/{self.variant.value} with "
                f"{other.scheme.value}/{other.variant.value}")


def english_words(s: str, dictionary: WordDictionary) -> List[str]:
    """Dictionary words obtained by splitting s on non-letters and camel-case boundaries"""
    pieces = (piece.lower() for piece in WORD_PIECE.findall(s))
    return [piece for piece in pieces if len(piece) >= 2 and piece in dictionary]


def preprocess(strings: Sequence[str], variant: Variant, dictionary: Optional[WordDictionary] = None) -> List[str]:
    variant = Variant(variant)
    if variant == Variant.CASE_SENSITIVE:
        return list(strings)
    if variant == Variant.CASE_INSENSITIVE:
        return [s.lower() for s in strings]
    if dictionary is None:
        raise ValueError("english_word_extraction needs a word dictionary")
    return [' '.join(words) for words in (english_words(s, dictionary) for s in strings) if words]


def tokenize(text: str, variant: Variant, dictionary: Optional[WordDictionary] = None) -> List[str]:
    """Alphanumeric/underscore tokens of length >= 2, preprocessed per variant"""
    variant = Variant(variant)
    if variant == Variant.ENGLISH_WORD_EXTRACTION:
        if dictionary is None:
            raise ValueError("english_word_extraction needs a word dictionary")
        return english_words(text, dictionary)
    tokens = TOKEN_PATTERN.findall(text)
    return [t.lower() for t in tokens] if variant == Variant.CASE_INSENSITIVE else tokens


def byte_histogram(content: str) -> np.ndarray:
    return np.bincount(np.frombuffer(content.encode('utf-8'), dtype=np.uint8), minlength=HISTOGRAM_BINS)


def char_vector(strings: Sequence[str], variant: Variant = Variant.CASE_SENSITIVE,
                dictionary: Optional[WordDictionary] = None) -> FeatureVector:
    """256-bin byte histogram of the concatenated, preprocessed group content"""
    content = ''.join(preprocess(strings, variant, dictionary))
    if not content:
        raise EmptyGroupError("string group is empty after preprocessing")
    counts = byte_histogram(content)
    dims = {int(b): float(counts[b]) for b in np.flatnonzero(counts)}
    return FeatureVector(dims, Scheme.CHAR_HISTOGRAM, Variant(variant))


def cosine_similarity(x: FeatureVector, y: FeatureVector) -> float:
    x.check_compatible(y)
    norm_x, norm_y = x.norm, y.norm
    if norm_x == 0.0 or norm_y == 0.0:
        raise ZeroVectorError("cosine similarity needs two non-zero vectors")
    dot = math.fsum(x.dims[term] * y.dims[term] for term in x.dims.keys() & y.dims.keys())
    return min(1.0, max(0.0, dot / (norm_x * norm_y)))


def tf(term: str, group: Sequence[str], variant: Variant = Variant.CASE_SENSITIVE,
       dictionary: Optional[WordDictionary] = None) -> float:
    """Raw count of the term over the group's tokens"""
    return float(sum(tokenize(s, variant, dictionary).count(term) for s in group))


def idf(term: str, dataset: Sequence[Sequence[str]], variant: Variant = Variant.CASE_SENSITIVE,
        dictionary: Optional[WordDictionary] = None) -> float:
    """log10(N / df); a term no document contains is an UnknownTermError"""
    df = sum(1 for group in dataset
             if any(term in tokenize(s, variant, dictionary) for s in group))
    if df == 0:
        raise UnknownTermError(term)
    return math.log10(len(dataset) / df)


def tfidf_features(dataset: Sequence[Sequence[str]], variant: Variant = Variant.CASE_SENSITIVE,
                   dictionary: Optional[WordDictionary] = None) -> List[FeatureVector]:
    """One TF-IDF vector per group; terms present in every group weigh 0 and are dropped"""
    counts = [Counter(t for s in group for t in tokenize(s, variant, dictionary)) for group in dataset]
    df = Counter(term for c in counts for term in c)
    n = len(dataset)
    vectors = []
    for c in counts:
        dims = {term: count * math.log10(n / df[term]) for term, count in sorted(c.items())}
        vectors.append(FeatureVector({t: w for t, w in dims.items() if w > 0.0}, Scheme.TFIDF, Variant(variant)))
    return vectors


class GroupVectorizer:
    """
    Document-term matrices for a fixed scheme and variant. A document is a
    sequence of strings (a string group, a one-string sample or a rendered
    context window). The vocabulary is frozen by fit().
    """

    def __init__(self, scheme: Scheme, variant: Variant = Variant.CASE_SENSITIVE,
                 dictionary: Optional[WordDictionary] = None, ngram_range: Tuple[int, int] = DEFAULT_NGRAM_RANGE):
        self.scheme = Scheme(scheme)
        self.variant = Variant(variant)
        self.dictionary = dictionary
        self.ngram_range = tuple(ngram_range)
        self.idf_: Optional[np.ndarray] = None
        self._counter: Optional[CountVectorizer] = None
        if self.variant == Variant.ENGLISH_WORD_EXTRACTION and dictionary is None:
            raise ValueError("english_word_extraction needs a word dictionary")

    def _tokens(self, document: Sequence[str]) -> List[str]:
        return [t for s in document for t in tokenize(s, self.variant, self.dictionary)]

    def _char_ngrams(self, document: Sequence[str]) -> List[str]:
        low, high = self.ngram_range
        grams = []
        for s in preprocess(document, self.variant, self.dictionary):
            padded = f"^{s}$"
            for n in range(low, high + 1):
                grams.extend(padded[i:i + n] for i in range(len(padded) - n + 1))
        return grams

    def _counter_for(self, vocabulary: Optional[Mapping[str, int]] = None) -> CountVectorizer:
        analyzer = self._char_ngrams if self.scheme == Scheme.CHAR_NGRAM else self._tokens
        return CountVectorizer(analyzer=analyzer, lowercase=False, vocabulary=vocabulary)

    @property
    def vocabulary(self) -> Dict[str, int]:
        if self.scheme == Scheme.CHAR_HISTOGRAM:
            return {str(b): b for b in range(HISTOGRAM_BINS)}
        if self._counter is None:
            return {}
        fitted = getattr(self._counter, "vocabulary_", None) or self._counter.vocabulary or {}
        return {term: int(index) for term, index in sorted(fitted.items(), key=lambda kv: kv[1])}

    @property
    def n_features(self) -> int:
        return len(self.vocabulary)

    def fit(self, documents: Sequence[Sequence[str]]) -> 'GroupVectorizer':
        if self.scheme == Scheme.CHAR_HISTOGRAM:
            return self
        self._counter = self._counter_for()
        counts = self._counter.fit_transform(documents)
        if self.scheme == Scheme.TFIDF:
            df = np.asarray((counts > 0).sum(axis=0)).ravel()
            self.idf_ = np.log10(counts.shape[0] / df)
        logger.debug(f"Fitted {self.scheme.value}/{self.variant.value} vocabulary of {self.n_features} terms")
        return self

    def transform(self, documents: Sequence[Sequence[str]]) -> sparse.csr_matrix:
        if self.scheme == Scheme.CHAR_HISTOGRAM:
            rows = [byte_histogram(''.join(preprocess(doc, self.variant, self.dictionary))) for doc in documents]
            if not rows:
                return sparse.csr_matrix((0, HISTOGRAM_BINS), dtype=float)
            return sparse.csr_matrix(np.vstack(rows).astype(float))
        if self._counter is None:
            raise ValueError("vectorizer is not fitted")
        counts = self._counter.transform(documents).astype(float)
        if self.scheme == Scheme.TFIDF:
            counts = (counts @ sparse.diags(self.idf_)).tocsr()
        return counts

    def fit_transform(self, documents: Sequence[Sequence[str]]) -> sparse.csr_matrix:
        return self.fit(documents).transform(documents)

    def vector(self, document: Sequence[str]) -> FeatureVector:
        """Feature map of one document over the frozen vocabulary"""
        row = self.transform([document]).tocoo()
        terms = {index: term for term, index in self.vocabulary.items()}
        key = int if self.scheme == Scheme.CHAR_HISTOGRAM else terms.get
        dims = {key(int(col)): float(value) for col, value in zip(row.col, row.data) if value}
        return FeatureVector(dims, self.scheme, self.variant)

    def to_dict(self) -> Dict[str, Any]:
        data = {
            'scheme': self.scheme.value,
            'variant': self.variant.value,
            'ngram_range': list(self.ngram_range),
            'vocabulary': self.vocabulary if self.scheme != Scheme.CHAR_HISTOGRAM else {},
        }
        if self.idf_ is not None:
            data['idf'] = [float(v) for v in self.idf_]
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], dictionary: Optional[WordDictionary] = None) -> 'GroupVectorizer':
        vectorizer = cls(Scheme(data['scheme']), Variant(data['variant']), dictionary,
                         tuple(data.get('ngram_range', DEFAULT_NGRAM_RANGE)))
        if vectorizer.scheme != Scheme.CHAR_HISTOGRAM:
            vectorizer._counter = vectorizer._counter_for(dict(data['vocabulary']))
        if 'idf' in data:
            vectorizer.idf_ = np.asarray(data['idf'], dtype=float)
        return vectorizer
