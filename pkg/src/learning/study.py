"""
String-group separability study
Cosine similarity within the secret collection versus across collections,
with an F-test on variances and a Z-test on means
"""

import logging
import math
from dataclasses import dataclass, asdict
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np
from scipy import stats
from scipy.special import erfc
from sklearn.metrics.pairwise import cosine_similarity as pairwise_cosine

from src.extraction.string_extractor import StringGroup
from src.learning.features import GroupVectorizer, Scheme, Variant
from src.three_layer.filters import WordDictionary

logger = logging.getLogger(__name__)

SIGNIFICANCE_ALPHA = 0.01
P_VALUE_FLOOR = 1e-300

GroupLike = Union[StringGroup, Sequence[str]]


def group_strings(group: GroupLike) -> Sequence[str]:
    return group.strings if isinstance(group, StringGroup) else tuple(group)


@dataclass
class StudyReport:
    variant: str
    n_secret: int
    n_nosecret: int
    n_ss: int
    n_sn: int
    mean_ss: float
    mean_sn: float
    var_ss: float
    var_sn: float
    f_stat: float
    f_p: float
    z_stat: float
    z_p: float

    @property
    def significant(self) -> bool:
        return self.f_p < SIGNIFICANCE_ALPHA and self.z_p < SIGNIFICANCE_ALPHA

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['significant'] = self.significant
        return data


def _var(x: np.ndarray) -> float:
    return float(np.var(x, ddof=1)) if len(x) > 1 else 0.0


def f_test(a: np.ndarray, b: np.ndarray) -> tuple:
    """Variance-ratio test, larger sample variance in the numerator; two-sided p"""
    var_a, var_b = _var(a), _var(b)
    if var_a >= var_b:
        num, den, dfn, dfd = var_a, var_b, len(a) - 1, len(b) - 1
    else:
        num, den, dfn, dfd = var_b, var_a, len(b) - 1, len(a) - 1
    if num == 0.0:
        return 1.0, 1.0
    if den == 0.0:
        return math.inf, P_VALUE_FLOOR
    statistic = float(num / den)
    p_value = min(1.0, 2.0 * float(stats.f.sf(statistic, dfn, dfd)))
    return statistic, max(p_value, P_VALUE_FLOOR)


def z_test(a: np.ndarray, b: np.ndarray) -> tuple:
    """Two-sample, two-tailed test on means; p = erfc(|z| / sqrt 2) clamped at 1e-300"""
    diff = float(np.mean(a) - np.mean(b))
    se = math.sqrt(_var(a) / len(a) + _var(b) / len(b))
    if se == 0.0:
        return (0.0, 1.0) if diff == 0.0 else (math.copysign(math.inf, diff), P_VALUE_FLOOR)
    z = diff / se
    return z, max(float(erfc(abs(z) / math.sqrt(2.0))), P_VALUE_FLOOR)


def _sample(values: np.ndarray, max_pairs: Optional[int], rng: np.random.Generator) -> np.ndarray:
    if max_pairs is None or len(values) <= max_pairs:
        return values
    return values[np.sort(rng.choice(len(values), size=max_pairs, replace=False))]


def separability_study(secret: Sequence[GroupLike], nosecret: Sequence[GroupLike],
                       variant: Variant = Variant.CASE_SENSITIVE,
                       dictionary: Optional[WordDictionary] = None,
                       max_pairs: Optional[int] = None, seed: int = 0) -> StudyReport:
    """
    Mean cosine similarity over all unordered secret pairs (SvS) and all
    secret x no-secret pairs (SvN). `max_pairs` caps each sample by
    uniform sampling for large collections.
    """
    if len(secret) < 2 or not nosecret:
        raise ValueError("separability study needs >= 2 secret groups and >= 1 no-secret group")
    if len(secret) != len(nosecret):
        logger.warning(f"Unbalanced collections: {len(secret)} secret vs {len(nosecret)} no-secret groups")

    vectorizer = GroupVectorizer(Scheme.CHAR_HISTOGRAM, variant, dictionary)
    x_secret = vectorizer.transform([group_strings(g) for g in secret])
    x_nosecret = vectorizer.transform([group_strings(g) for g in nosecret])
    for name, matrix in (('secret', x_secret), ('no-secret', x_nosecret)):
        empty = int((np.asarray(matrix.sum(axis=1)).ravel() == 0).sum())
        if empty:
            raise ValueError(f"{empty} {name} groups are empty after {Variant(variant).value} preprocessing")

    within = pairwise_cosine(x_secret)
    ss = within[np.triu_indices(within.shape[0], k=1)]
    sn = pairwise_cosine(x_secret, x_nosecret).ravel()
    rng = np.random.default_rng(seed)
    ss, sn = _sample(ss, max_pairs, rng), _sample(sn, max_pairs, rng)

    f_stat, f_p = f_test(ss, sn)
    z_stat, z_p = z_test(ss, sn)
    report = StudyReport(
        variant=Variant(variant).value,
        n_secret=len(secret), n_nosecret=len(nosecret),
        n_ss=int(len(ss)), n_sn=int(len(sn)),
        mean_ss=float(ss.mean()), mean_sn=float(sn.mean()),
        var_ss=_var(ss), var_sn=_var(sn),
        f_stat=f_stat, f_p=f_p, z_stat=z_stat, z_p=z_p,
    )
    logger.info(f"Separability ({report.variant}): SvS {report.mean_ss:.3f} vs SvN {report.mean_sn:.3f}, "
                f"F p={report.f_p:.3g}, Z p={report.z_p:.3g}")
    return report
