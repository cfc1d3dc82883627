# Learned Detectors Module for SecretSieve: features, separability study, classifiers and detectors
from .features import FeatureVector, GroupVectorizer, Scheme, Variant, char_vector, cosine_similarity, idf, tf, tfidf_features
from .study import StudyReport, separability_study
from .models import Label, LabeledGroupDataset, ModelKind, ModelTrainer, TrainedModel, fit
from .detectors import (
    ContextDetector, IntrinsicDetector, StringGroupDetector, Verdict, context_classify,
    context_degradation, intrinsic_classify, predict_group,
)

__all__ = [
    'FeatureVector', 'GroupVectorizer', 'Scheme', 'Variant', 'char_vector', 'cosine_similarity',
    'idf', 'tf', 'tfidf_features',
    'StudyReport', 'separability_study',
    'Label', 'LabeledGroupDataset', 'ModelKind', 'ModelTrainer', 'TrainedModel', 'fit',
    'ContextDetector', 'IntrinsicDetector', 'StringGroupDetector', 'Verdict', 'context_classify',
    'context_degradation', 'intrinsic_classify', 'predict_group',
]
