"""
Forward reference interpreter for straight-line IR
Executes an app concretely and records the argument values reaching external calls;
used as the oracle for the backward slicer and for corpus manifest checks
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from src.ir.model import (
    ArrayRef, BinaryOp, Call, FieldRef, IntConst, IrApp, IrExpr, IrMethod, LocalRef, MethodSignature,
    NewArray, NewObject, NullConst, ParameterRef, StatementKind, StringConst, ThisRef,
)
from src.sigflow.slicer import BUILDER_TYPES, STRING_TYPE


@dataclass
class _Builder:
    parts: List[str] = field(default_factory=list)
    unknown: bool = False

    def content(self) -> Optional[str]:
        return None if self.unknown else ''.join(self.parts)


@dataclass
class _Object:
    type_name: str


def _plain(value: Any) -> Any:
    return value.content() if isinstance(value, _Builder) else value


def _as_text(value: Any, param_type: str = '') -> Optional[str]:
    value = _plain(value)
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return chr(value) if param_type == 'char' else str(value)
    return value if isinstance(value, str) else None


@dataclass(frozen=True)
class ObservedCall:
    class_name: str
    method_name: str
    param_types: Tuple[str, ...]
    index: int
    callee: MethodSignature
    args: Tuple[Any, ...]

    @property
    def location(self) -> str:
        return f"{self.class_name}.{self.method_name}:{self.index}"

    @property
    def site_key(self) -> Tuple:
        return (self.class_name, self.method_name, self.param_types, self.index)


class _Return(Exception):
    def __init__(self, value: Any):
        self.value = value


class ReferenceInterpreter:
    """
    Concrete executor: runs every <clinit>, then every method no app code calls.
    Branch lines are skipped, so only straight-line programs are modeled exactly.
    """

    def __init__(self, app: IrApp, env: Optional[Mapping[str, Mapping[str, str]]] = None,
                 env_getters: Sequence[str] = (), max_call_depth: int = 16):
        self.logger = logging.getLogger('ReferenceInterpreter')
        self.app = app
        self.env = env or {}
        self.env_getters = frozenset(env_getters)
        self.max_call_depth = max_call_depth
        self.statics: Dict[Tuple[str, str], Any] = {}
        self.instance_fields: Dict[Tuple[str, str], Any] = {}
        self.observed: List[ObservedCall] = []

    def run(self, entry_points: Optional[Sequence[IrMethod]] = None) -> List[ObservedCall]:
        self.statics = {
            (unit.qualified_name, f.name): f.initializer
            for unit in self.app.classes for f in unit.static_fields
        }
        self.instance_fields = {}
        self.observed = []
        for unit in self.app.classes:
            for method in unit.methods:
                if method.name == '<clinit>':
                    self._execute(method, (), None, 0)
        if entry_points is None:
            entry_points = [m for m in self.app.methods()
                            if m.name != '<clinit>' and not self.app.index.callers_of(m)]
        for method in entry_points:
            self._execute(method, (None,) * len(method.param_types), _Object(method.owner), 0)
        self.logger.debug(f"{self.app.app_id}: observed {len(self.observed)} external calls")
        return self.observed

    def values_at(self, predicate: Callable[[MethodSignature], bool], arg_index: int) -> Dict[Tuple, List[Any]]:
        """Concrete argument values per call site for callees matching the predicate"""
        values: Dict[Tuple, List[Any]] = {}
        for obs in self.observed:
            if predicate(obs.callee) and arg_index < len(obs.args):
                values.setdefault(obs.site_key, []).append(obs.args[arg_index])
        return values

    # ---------------------------------------------------------------- engine

    def _execute(self, method: IrMethod, args: Tuple[Any, ...], this: Any, depth: int) -> Any:
        if depth > self.max_call_depth:
            return None
        frame: Dict[str, Any] = {}
        try:
            for stmt in method.body:
                self._step(method, stmt, frame, args, this, depth)
        except _Return as ret:
            return ret.value
        return None

    def _step(self, method: IrMethod, stmt, frame: Dict[str, Any], args, this, depth: int):
        if stmt.is_unknown:
            return
        if stmt.kind == StatementKind.RETURN:
            raise _Return(self._eval(stmt.rhs, method, stmt.index, frame, args, this, depth)
                          if stmt.rhs is not None else None)
        value = self._eval(stmt.rhs, method, stmt.index, frame, args, this, depth)
        if stmt.kind == StatementKind.ASSIGN:
            frame[stmt.lhs.name] = value
        elif stmt.kind == StatementKind.FIELD_STORE:
            store = self.statics if stmt.lhs.base is None else self.instance_fields
            store[stmt.lhs.key] = value
        elif stmt.kind == StatementKind.ARRAY_STORE:
            array = frame.get(stmt.lhs.base)
            index = self._eval(stmt.lhs.index, method, stmt.index, frame, args, this, depth)
            if isinstance(array, list) and isinstance(index, int) and 0 <= index < len(array):
                array[index] = value

    def _eval(self, expr: IrExpr, method: IrMethod, at: int, frame, args, this, depth: int) -> Any:
        if isinstance(expr, StringConst):
            return expr.value
        if isinstance(expr, IntConst):
            return expr.value
        if isinstance(expr, NullConst):
            return None
        if isinstance(expr, LocalRef):
            return frame.get(expr.name)
        if isinstance(expr, ParameterRef):
            return args[expr.index] if expr.index < len(args) else None
        if isinstance(expr, ThisRef):
            return this
        if isinstance(expr, FieldRef):
            store = self.statics if expr.base is None else self.instance_fields
            return store.get(expr.key)
        if isinstance(expr, NewArray):
            length = self._eval(expr.length, method, at, frame, args, this, depth)
            return [None] * length if isinstance(length, int) and length >= 0 else None
        if isinstance(expr, NewObject):
            if expr.type_name in BUILDER_TYPES or expr.type_name == STRING_TYPE:
                return _Builder()
            return _Object(expr.type_name)
        if isinstance(expr, ArrayRef):
            array = frame.get(expr.base)
            index = self._eval(expr.index, method, at, frame, args, this, depth)
            if isinstance(array, list) and isinstance(index, int) and 0 <= index < len(array):
                return array[index]
            return None
        if isinstance(expr, BinaryOp):
            left = self._eval(expr.left, method, at, frame, args, this, depth)
            right = self._eval(expr.right, method, at, frame, args, this, depth)
            if isinstance(left, int) and isinstance(right, int):
                if expr.op == '+':
                    return left + right
                if expr.op == '-':
                    return left - right
                if expr.op == '*':
                    return left * right
            return None
        if isinstance(expr, Call):
            return self._call(expr, method, at, frame, args, this, depth)
        return None

    def _call(self, call: Call, method: IrMethod, at: int, frame, args, this, depth: int) -> Any:
        callee = call.callee
        receiver = frame.get(call.receiver) if call.receiver else None
        values = [self._eval(arg, method, at, frame, args, this, depth) for arg in call.args]
        owner, name, params = callee.owner, callee.name, callee.param_types

        if isinstance(receiver, _Builder) and (owner in BUILDER_TYPES or owner == STRING_TYPE):
            if name == '<init>':
                receiver.parts, receiver.unknown = [], False
                if params and params[0] in (STRING_TYPE, 'java.lang.CharSequence'):
                    text = _as_text(values[0])
                    receiver.parts, receiver.unknown = ([text], False) if text is not None else ([], True)
                elif params and params != ('int',):
                    receiver.unknown = True
                return None
            if name == 'append' and values:
                text = _as_text(values[0], params[0] if params else '')
                if text is None:
                    receiver.unknown = True
                else:
                    receiver.parts.append(text)
                return receiver
            if name == 'toString':
                return receiver.content()
            receiver.unknown = True
            return receiver
        if owner == STRING_TYPE:
            if name in ('toString', 'intern'):
                return _plain(receiver)
            if name == 'concat' and len(values) == 1:
                left, right = _as_text(receiver), _as_text(values[0])
                return left + right if left is not None and right is not None else None
            if name == 'valueOf' and len(values) == 1:
                return _as_text(values[0], params[0] if params else '')

        if f"{owner}.{name}" in self.env_getters:
            key = _as_text(values[0]) if values else None
            for env_file in sorted(self.env):
                if key is not None and key in self.env[env_file]:
                    return self.env[env_file][key]
            return None

        target = self.app.resolve_method(callee)
        if target is not None:
            return self._execute(target, tuple(_plain(v) for v in values), receiver, depth + 1)

        self.observed.append(ObservedCall(method.owner, method.name, method.param_types, at,
                                          callee, tuple(_plain(v) for v in values)))
        return None
