"""
String Extractor for SecretSieve
Collects every string constant of an app with its location and builds per-method string groups
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import IO, List, Optional, Sequence, Tuple, Union

import pandas as pd

from src.ir.model import IrApp, IrMethod, StringConst, iter_exprs

logger = logging.getLogger(__name__)

OCCURRENCE_COLUMNS = ['app_id', 'class', 'method', 'index', 'value']


class Origin(str, Enum):
    METHOD_BODY = "method_body"
    STATIC_FIELD = "static_field"


@dataclass(frozen=True)
class StringOccurrence:
    value: str
    app_id: str
    class_name: str
    method_name: Optional[str] = None
    statement_index: Optional[int] = None
    origin: Origin = Origin.METHOD_BODY
    param_types: Tuple[str, ...] = ()

    @property
    def location(self) -> str:
        if self.origin == Origin.STATIC_FIELD:
            return f"{self.class_name}.<static>"
        return f"{self.class_name}.{self.method_name}:{self.statement_index}"


@dataclass(frozen=True)
class StringGroup:
    """All string literals of one method, in statement order, duplicates kept"""
    app_id: str
    class_name: str
    method_name: str
    strings: Tuple[str, ...]
    param_types: Tuple[str, ...] = ()

    @property
    def group_id(self) -> str:
        return f"{self.app_id}:{self.class_name}.{self.method_name}({','.join(self.param_types)})"

    @property
    def size(self) -> int:
        return len(self.strings)


def method_strings(method: IrMethod) -> List[Tuple[int, str]]:
    """(statement index, value) for every string constant in the body"""
    found = []
    for stmt in method.body:
        for side in (stmt.lhs, stmt.rhs):
            for expr in iter_exprs(side):
                if isinstance(expr, StringConst):
                    found.append((stmt.index, expr.value))
    return found


def extract_occurrences(app: IrApp) -> List[StringOccurrence]:
    """Static-field initializers first, then method bodies; classes in name order"""
    occurrences: List[StringOccurrence] = []
    for unit in app.classes:
        for static_field in unit.static_fields:
            if static_field.initializer is not None:
                occurrences.append(StringOccurrence(
                    value=static_field.initializer, app_id=app.app_id,
                    class_name=unit.qualified_name, origin=Origin.STATIC_FIELD))
        for method in unit.methods:
            for index, value in method_strings(method):
                occurrences.append(StringOccurrence(
                    value=value, app_id=app.app_id, class_name=unit.qualified_name,
                    method_name=method.name, statement_index=index,
                    origin=Origin.METHOD_BODY, param_types=method.param_types))
    logger.debug(f"{app.app_id}: extracted {len(occurrences)} string occurrences")
    return occurrences


def build_string_groups(app: IrApp, min_size: int = 2) -> List[StringGroup]:
    """One group per method holding at least `min_size` string constants"""
    if min_size < 1:
        raise ValueError(f"min_size must be >= 1, got {min_size}")
    groups = []
    for unit in app.classes:
        for method in unit.methods:
            strings = tuple(value for _, value in method_strings(method))
            if strings and len(strings) >= min_size:
                groups.append(StringGroup(app.app_id, unit.qualified_name, method.name,
                                          strings, method.param_types))
    return groups


def occurrences_frame(occurrences: Sequence[StringOccurrence]) -> pd.DataFrame:
    rows = [{
        'app_id': occ.app_id,
        'class': occ.class_name,
        'method': occ.method_name or '',
        'index': '' if occ.statement_index is None else occ.statement_index,
        'value': occ.value,
    } for occ in occurrences]
    return pd.DataFrame(rows, columns=OCCURRENCE_COLUMNS)


def dump_occurrences_csv(occurrences: Sequence[StringOccurrence], target: Union[str, IO[str]]) -> int:
    """Write occurrences as RFC-4180 CSV; returns the row count"""
    frame = occurrences_frame(occurrences)
    frame.to_csv(target, index=False, lineterminator='\r\n')
    return len(frame)
