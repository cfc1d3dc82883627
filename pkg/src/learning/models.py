"""
Binary classifiers for the learned detectors
Logistic regression, multinomial naive Bayes and linear SVC trained with
fixed recipes and exported as linear scorers (weights + bias) in JSON
"""

import json
import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit
from sklearn.linear_model import SGDClassifier
from sklearn.metrics import accuracy_score, f1_score, precision_score, recall_score
from sklearn.model_selection import train_test_split
from sklearn.naive_bayes import MultinomialNB
from sklearn.preprocessing import normalize

from src.core.errors import DegenerateDatasetError, FeatureMismatchError
from src.learning.features import FeatureVector, GroupVectorizer, Scheme, Variant
from src.three_layer.filters import WordDictionary

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1
MIN_PER_CLASS = 10
TEST_SIZE = 0.2
DECISION_THRESHOLD = 0.5


class ModelKind(str, Enum):
    LOGISTIC_REGRESSION = "logistic_regression"
    NAIVE_BAYES = "naive_bayes"
    LINEAR_SVC = "linear_svc"


class Label(str, Enum):
    SECRET = "secret"
    NO_SECRET = "no_secret"


# First entry of every grid is the default recipe
HYPERPARAMETER_GRID: Dict[ModelKind, List[Dict[str, float]]] = {
    ModelKind.LOGISTIC_REGRESSION: [{'alpha': 1e-4}, {'alpha': 1e-3}, {'alpha': 1e-2}],
    ModelKind.NAIVE_BAYES: [{'alpha': 1.0}, {'alpha': 0.5}, {'alpha': 2.0}],
    ModelKind.LINEAR_SVC: [{'alpha': 1e-3}, {'alpha': 1e-4}, {'alpha': 1e-2}],
}


def build_estimator(kind: ModelKind, seed: int, alpha: Optional[float] = None):
    kind = ModelKind(kind)
    if kind == ModelKind.LOGISTIC_REGRESSION:
        return SGDClassifier(loss='log_loss', learning_rate='constant', eta0=0.1,
                             alpha=1e-4 if alpha is None else alpha, max_iter=500, tol=None,
                             random_state=seed)
    if kind == ModelKind.NAIVE_BAYES:
        return MultinomialNB(alpha=1.0 if alpha is None else alpha)
    return SGDClassifier(loss='hinge', alpha=1e-3 if alpha is None else alpha, max_iter=1000,
                         tol=None, random_state=seed)


@dataclass(frozen=True)
class LabeledEntry:
    group_id: str
    strings: Tuple[str, ...]
    label: Label

    def to_dict(self) -> Dict[str, Any]:
        return {'group_id': self.group_id, 'strings': list(self.strings), 'label': self.label.value}


@dataclass
class LabeledGroupDataset:
    """Binary-labelled documents; one JSON object per line on disk"""
    entries: List[LabeledEntry] = field(default_factory=list)
    variant: Variant = Variant.CASE_SENSITIVE

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def documents(self) -> List[Tuple[str, ...]]:
        return [entry.strings for entry in self.entries]

    @property
    def labels(self) -> np.ndarray:
        return np.array([1 if entry.label == Label.SECRET else 0 for entry in self.entries], dtype=int)

    def class_counts(self) -> Dict[str, int]:
        counts = {label.value: 0 for label in Label}
        for entry in self.entries:
            counts[entry.label.value] += 1
        return counts

    def add(self, group_id: str, strings: Sequence[str], label) -> LabeledEntry:
        entry = LabeledEntry(group_id, tuple(strings), Label(label))
        self.entries.append(entry)
        return entry

    def save(self, path: str):
        os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            for entry in self.entries:
                f.write(json.dumps(entry.to_dict(), ensure_ascii=False, sort_keys=True) + '\n')

    @classmethod
    def load(cls, path: str, variant: Variant = Variant.CASE_SENSITIVE) -> 'LabeledGroupDataset':
        dataset = cls(variant=Variant(variant))
        with open(path, 'r', encoding='utf-8') as f:
            for line in f:
                if line.strip():
                    record = json.loads(line)
                    dataset.add(record['group_id'], record['strings'], record['label'])
        logger.info(f"Loaded {len(dataset)} labelled entries from {path}: {dataset.class_counts()}")
        return dataset


@dataclass(frozen=True, eq=False)
class TrainedModel:
    kind: ModelKind
    vectorizer: GroupVectorizer
    weights: np.ndarray
    bias: float
    normalize_rows: bool = False
    metadata: Mapping[str, Any] = field(default_factory=dict)

    @property
    def scheme(self) -> Scheme:
        return self.vectorizer.scheme

    @property
    def variant(self) -> Variant:
        return self.vectorizer.variant

    @property
    def vocabulary(self) -> Dict[str, int]:
        return self.vectorizer.vocabulary

    def _features(self, documents: Sequence[Sequence[str]]):
        matrix = self.vectorizer.transform(documents)
        return normalize(matrix) if self.normalize_rows else matrix

    def decision(self, documents: Sequence[Sequence[str]]) -> np.ndarray:
        return np.asarray(self._features(documents) @ self.weights).ravel() + self.bias

    def scores(self, documents: Sequence[Sequence[str]]) -> np.ndarray:
        """Sigmoid of the linear decision, in [0, 1]"""
        return expit(self.decision(documents))

    def predict(self, documents: Sequence[Sequence[str]]) -> np.ndarray:
        return (self.scores(documents) >= DECISION_THRESHOLD).astype(int)

    def score_vector(self, vector: FeatureVector) -> float:
        """Score a precomputed feature vector; scheme and variant must match the model"""
        if vector.scheme != self.scheme or vector.variant != self.variant:
            raise FeatureMismatchError(
                f"model expects {self.scheme.value}/{self.variant.value} features, got "
                f"{vector.scheme.value}/{vector.variant.value}")
        row = np.zeros(len(self.weights))
        for term, weight in vector.dims.items():
            index = int(term) if self.scheme == Scheme.CHAR_HISTOGRAM else self.vocabulary.get(term)
            if index is not None:
                row[index] = weight
        if self.normalize_rows and np.linalg.norm(row) > 0:
            row = row / np.linalg.norm(row)
        return float(expit(row @ self.weights + self.bias))

    def to_dict(self) -> Dict[str, Any]:
        vectorizer = self.vectorizer.to_dict()
        return {
            'format_version': MODEL_FORMAT_VERSION,
            'kind': self.kind.value,
            'scheme': vectorizer.pop('scheme'),
            'variant': vectorizer.pop('variant'),
            'vocabulary': vectorizer.pop('vocabulary'),
            'vectorizer': vectorizer,
            'weights': [float(w) for w in self.weights],
            'bias': float(self.bias),
            'normalize_rows': self.normalize_rows,
            'metadata': dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], dictionary: Optional[WordDictionary] = None) -> 'TrainedModel':
        vectorizer = GroupVectorizer.from_dict({
            'scheme': data['scheme'], 'variant': data['variant'],
            'vocabulary': data.get('vocabulary', {}), **data.get('vectorizer', {}),
        }, dictionary)
        return cls(kind=ModelKind(data['kind']), vectorizer=vectorizer,
                   weights=np.asarray(data['weights'], dtype=float), bias=float(data['bias']),
                   normalize_rows=bool(data.get('normalize_rows', False)),
                   metadata=dict(data.get('metadata', {})))

    def save(self, path: str):
        os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
        logger.info(f"Saved {self.kind.value} model ({self.scheme.value}/{self.variant.value}) to {path}")

    @classmethod
    def load(cls, path: str, dictionary: Optional[WordDictionary] = None) -> 'TrainedModel':
        with open(path, 'r', encoding='utf-8') as f:
            model = cls.from_dict(json.load(f), dictionary)
        logger.info(f"Loaded {model.kind.value} model from {path}")
        return model


def export_linear(estimator, kind: ModelKind) -> Tuple[np.ndarray, float]:
    """Weights and bias of the log-odds (or margin) for the positive class"""
    if ModelKind(kind) == ModelKind.NAIVE_BAYES:
        log_prob = estimator.feature_log_prob_
        prior = estimator.class_log_prior_
        return (log_prob[1] - log_prob[0]).astype(float), float(prior[1] - prior[0])
    return estimator.coef_[0].astype(float), float(estimator.intercept_[0])


def classification_metrics(y_true: np.ndarray, y_pred: np.ndarray) -> Dict[str, float]:
    return {
        'precision': float(precision_score(y_true, y_pred, zero_division=0)),
        'recall': float(recall_score(y_true, y_pred, zero_division=0)),
        'accuracy': float(accuracy_score(y_true, y_pred)),
        'f1': float(f1_score(y_true, y_pred, zero_division=0)),
    }


class ModelTrainer:
    """Train/test split, optional grid selection by training accuracy, and export"""

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        config = config or {}
        self.logger = logging.getLogger('ModelTrainer')
        self.test_size = config.get('test_size', TEST_SIZE)
        self.min_per_class = config.get('min_per_class', MIN_PER_CLASS)
        self.ngram_range = tuple(config.get('ngram_range', (1, 3)))

    def _check(self, dataset: LabeledGroupDataset):
        counts = dataset.class_counts()
        if min(counts.values()) == 0:
            raise DegenerateDatasetError(f"dataset holds a single class: {counts}")
        if min(counts.values()) < self.min_per_class:
            raise DegenerateDatasetError(
                f"need >= {self.min_per_class} entries per class, got {counts}")

    def _train(self, kind: ModelKind, vectorizer: GroupVectorizer, x_train, y_train,
               seed: int, params: Dict[str, float]) -> Tuple[TrainedModel, float]:
        normalize_rows = kind != ModelKind.NAIVE_BAYES
        features = normalize(x_train) if normalize_rows else x_train
        estimator = build_estimator(kind, seed, params.get('alpha'))
        estimator.fit(features, y_train)
        weights, bias = export_linear(estimator, kind)
        model = TrainedModel(kind, vectorizer, weights, bias, normalize_rows)
        train_pred = (expit(np.asarray(features @ weights).ravel() + bias) >= DECISION_THRESHOLD).astype(int)
        return model, float(accuracy_score(y_train, train_pred))

    def fit(self, dataset: LabeledGroupDataset, kind: ModelKind, scheme: Scheme, split_seed: int = 42,
            dictionary: Optional[WordDictionary] = None, tune: bool = False) -> Tuple[TrainedModel, Dict[str, float]]:
        kind, scheme = ModelKind(kind), Scheme(scheme)
        self._check(dataset)
        documents, labels = dataset.documents, dataset.labels
        train_idx, test_idx = train_test_split(
            np.arange(len(dataset)), test_size=self.test_size, stratify=labels, random_state=split_seed)

        vectorizer = GroupVectorizer(scheme, dataset.variant, dictionary, self.ngram_range)
        x_train = vectorizer.fit_transform([documents[i] for i in train_idx])
        y_train = labels[train_idx]

        grid = HYPERPARAMETER_GRID[kind] if tune else HYPERPARAMETER_GRID[kind][:1]
        best: Optional[Tuple[TrainedModel, float, Dict[str, float]]] = None
        for params in grid:
            model, train_accuracy = self._train(kind, vectorizer, x_train, y_train, split_seed, params)
            self.logger.debug(f"{kind.value} {params}: training accuracy {train_accuracy:.4f}")
            if best is None or train_accuracy > best[1]:
                best = (model, train_accuracy, params)
        model, train_accuracy, params = best

        y_test = labels[test_idx]
        metrics = classification_metrics(y_test, model.predict([documents[i] for i in test_idx]))
        metadata = {
            'seed': split_seed,
            'split_ratio': [1.0 - self.test_size, self.test_size],
            'hyperparameters': params,
            'training_accuracy': train_accuracy,
            'n_train': int(len(train_idx)),
            'n_test': int(len(test_idx)),
            'metrics': metrics,
        }
        model = TrainedModel(model.kind, model.vectorizer, model.weights, model.bias,
                             model.normalize_rows, metadata)
        self.logger.info(f"Trained {kind.value} on {scheme.value}/{dataset.variant.value}: "
                         f"precision {metrics['precision']:.3f}, recall {metrics['recall']:.3f}, "
                         f"accuracy {metrics['accuracy']:.3f}, f1 {metrics['f1']:.3f}")
        return model, metrics


def fit(dataset: LabeledGroupDataset, kind: ModelKind, scheme: Scheme, split_seed: int = 42,
        dictionary: Optional[WordDictionary] = None, tune: bool = False) -> Tuple[TrainedModel, Dict[str, float]]:
    return ModelTrainer().fit(dataset, kind, scheme, split_seed, dictionary, tune)
