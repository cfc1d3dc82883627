"""
Lookup structures over a parsed IrApp: method index, call sites, field stores
"""

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Tuple

from src.core.errors import IndexOutOfRangeError
from src.ir.model import (
    Call, FieldRef, IrApp, IrClassUnit, IrMethod, IrStatement, MethodSignature, StatementKind,
)

MethodKey = Tuple[str, str, Tuple[str, ...]]


@dataclass(frozen=True)
class CallSite:
    """One invoke (or assign-from-call) statement inside an app method"""
    class_name: str
    method_name: str
    param_types: Tuple[str, ...]
    index: int
    call: Call
    method: IrMethod = field(compare=False, repr=False, hash=False)

    @property
    def method_key(self) -> MethodKey:
        return (self.class_name, self.method_name, self.param_types)

    @property
    def statement(self) -> IrStatement:
        return self.method.body[self.index]

    @property
    def sort_key(self) -> Tuple:
        return (self.class_name, self.method_name, self.param_types, self.index)

    @property
    def location(self) -> str:
        return f"{self.class_name}.{self.method_name}:{self.index}"


@dataclass(frozen=True)
class FieldStore:
    method: IrMethod
    statement: IrStatement


class AppIndex:
    """Built once per IrApp and cached on it"""

    def __init__(self, app: IrApp):
        self.classes: Dict[str, IrClassUnit] = {unit.qualified_name: unit for unit in app.classes}
        self.methods: Dict[MethodKey, IrMethod] = {}
        self.callers: Dict[MethodKey, List[CallSite]] = defaultdict(list)
        self.field_stores: Dict[Tuple[str, str], List[FieldStore]] = defaultdict(list)
        self.call_sites: List[CallSite] = []

        for unit in app.classes:
            for method in unit.methods:
                self.methods[method.key] = method

        for unit in app.classes:
            for method in unit.methods:
                for stmt in method.body:
                    call = stmt.call
                    if call is not None and stmt.kind in (StatementKind.INVOKE, StatementKind.ASSIGN):
                        site = CallSite(method.owner, method.name, method.param_types,
                                        stmt.index, call, method)
                        self.call_sites.append(site)
                        self.callers[call.callee.key].append(site)
                    if stmt.kind == StatementKind.FIELD_STORE and isinstance(stmt.lhs, FieldRef):
                        self.field_stores[stmt.lhs.key].append(FieldStore(method, stmt))

        self.call_sites.sort(key=lambda site: site.sort_key)
        for sites in self.callers.values():
            sites.sort(key=lambda site: site.sort_key)

    def callers_of(self, method: IrMethod) -> List[CallSite]:
        return list(self.callers.get(method.key, ()))

    def stores_to(self, field_ref: FieldRef) -> List[FieldStore]:
        return list(self.field_stores.get(field_ref.key, ()))


def find_callsites(app: IrApp, callee_matcher: Callable[[MethodSignature], bool]) -> List[CallSite]:
    """Every call whose callee satisfies the predicate, in (class, method, index) order"""
    return [site for site in app.index.call_sites if callee_matcher(site.call.callee)]


def method_window(method: IrMethod, center: int, radius: int) -> List[IrStatement]:
    """Statements [center - radius, center + radius] clipped to the body"""
    if not 0 <= center < len(method.body):
        raise IndexOutOfRangeError(
            f"center {center} outside {method.name} body of {len(method.body)} statements")
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    low = max(0, center - radius)
    return list(method.body[low:center + radius + 1])
