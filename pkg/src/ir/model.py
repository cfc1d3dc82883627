"""
IR model for SecretSieve
Immutable representation of one app's Jimple-like IR: classes, methods, statements
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import ClassVar, Dict, FrozenSet, Iterator, Optional, Tuple, Union

UNKNOWN_TYPE = "?"

# Opaque control-flow lines; a method containing one is treated as branching
BRANCH_PREFIXES = ('if ', 'goto ', 'label', 'lookupswitch', 'tableswitch')


@dataclass(frozen=True)
class MethodSignature:
    """Fully qualified callee signature, `<owner: ret name(params)>`"""
    owner: str
    return_type: str
    name: str
    param_types: Tuple[str, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.param_types)

    @property
    def key(self) -> Tuple[str, str, Tuple[str, ...]]:
        return (self.owner, self.name, self.param_types)

    def render(self) -> str:
        return f"<{self.owner}: {self.return_type} {self.name}({','.join(self.param_types)})>"

    def __str__(self) -> str:
        return self.render()


class ExprKind(str, Enum):
    STRING_CONST = "string_const"
    INT_CONST = "int_const"
    NULL_CONST = "null_const"
    LOCAL_REF = "local_ref"
    FIELD_REF = "field_ref"
    CALL = "call"
    NEW_ARRAY = "new_array"
    NEW_OBJECT = "new_object"
    ARRAY_REF = "array_ref"
    BINARY_OP = "binary_op"
    PARAMETER_REF = "parameter_ref"
    THIS_REF = "this_ref"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class StringConst:
    value: str
    kind: ClassVar[ExprKind] = ExprKind.STRING_CONST


@dataclass(frozen=True)
class IntConst:
    value: int
    kind: ClassVar[ExprKind] = ExprKind.INT_CONST


@dataclass(frozen=True)
class NullConst:
    kind: ClassVar[ExprKind] = ExprKind.NULL_CONST


@dataclass(frozen=True)
class LocalRef:
    name: str
    kind: ClassVar[ExprKind] = ExprKind.LOCAL_REF


@dataclass(frozen=True)
class FieldRef:
    """Static field when `base` is None, instance field otherwise"""
    owner: str
    field_type: str
    name: str
    base: Optional[str] = None
    kind: ClassVar[ExprKind] = ExprKind.FIELD_REF

    @property
    def key(self) -> Tuple[str, str]:
        return (self.owner, self.name)


@dataclass(frozen=True)
class Call:
    invoke_kind: str
    callee: MethodSignature
    receiver: Optional[str]
    args: Tuple['IrExpr', ...] = ()
    kind: ClassVar[ExprKind] = ExprKind.CALL


@dataclass(frozen=True)
class NewArray:
    elem_type: str
    length: 'IrExpr'
    kind: ClassVar[ExprKind] = ExprKind.NEW_ARRAY


@dataclass(frozen=True)
class NewObject:
    type_name: str
    kind: ClassVar[ExprKind] = ExprKind.NEW_OBJECT


@dataclass(frozen=True)
class ArrayRef:
    base: str
    index: 'IrExpr'
    kind: ClassVar[ExprKind] = ExprKind.ARRAY_REF


@dataclass(frozen=True)
class BinaryOp:
    op: str
    left: 'IrExpr'
    right: 'IrExpr'
    kind: ClassVar[ExprKind] = ExprKind.BINARY_OP


@dataclass(frozen=True)
class ParameterRef:
    index: int
    type_name: str
    kind: ClassVar[ExprKind] = ExprKind.PARAMETER_REF


@dataclass(frozen=True)
class ThisRef:
    type_name: str
    kind: ClassVar[ExprKind] = ExprKind.THIS_REF


@dataclass(frozen=True)
class Unknown:
    text: str
    kind: ClassVar[ExprKind] = ExprKind.UNKNOWN


IrExpr = Union[StringConst, IntConst, NullConst, LocalRef, FieldRef, Call, NewArray,
               NewObject, ArrayRef, BinaryOp, ParameterRef, ThisRef, Unknown]


def iter_exprs(expr: Optional[IrExpr]) -> Iterator[IrExpr]:
    """Pre-order walk over an expression and its sub-expressions"""
    if expr is None:
        return
    yield expr
    if isinstance(expr, Call):
        for arg in expr.args:
            yield from iter_exprs(arg)
    elif isinstance(expr, NewArray):
        yield from iter_exprs(expr.length)
    elif isinstance(expr, ArrayRef):
        yield from iter_exprs(expr.index)
    elif isinstance(expr, BinaryOp):
        yield from iter_exprs(expr.left)
        yield from iter_exprs(expr.right)


def expr_locals(expr: Optional[IrExpr]) -> Iterator[str]:
    """Local names referenced anywhere inside an expression"""
    for sub in iter_exprs(expr):
        if isinstance(sub, LocalRef):
            yield sub.name
        elif isinstance(sub, Call) and sub.receiver:
            yield sub.receiver
        elif isinstance(sub, ArrayRef):
            yield sub.base
        elif isinstance(sub, FieldRef) and sub.base:
            yield sub.base


class StatementKind(str, Enum):
    ASSIGN = "assign"
    INVOKE = "invoke"
    RETURN = "return"
    FIELD_STORE = "field_store"
    ARRAY_STORE = "array_store"


@dataclass(frozen=True)
class IrStatement:
    """
    One IR statement. Field layout per kind:
      assign       lhs=LocalRef, rhs=value (Unknown when the line did not parse)
      invoke       lhs=None, rhs=Call
      return       lhs=None, rhs=value or None
      field_store  lhs=FieldRef, rhs=value
      array_store  lhs=ArrayRef(base, index), rhs=value
    """
    index: int
    kind: StatementKind
    lhs: Optional[IrExpr] = None
    rhs: Optional[IrExpr] = None

    @property
    def call(self) -> Optional[Call]:
        return self.rhs if isinstance(self.rhs, Call) else None

    @property
    def is_unknown(self) -> bool:
        return isinstance(self.rhs, Unknown) and self.lhs is None

    @property
    def is_branch(self) -> bool:
        return self.is_unknown and self.rhs.text.startswith(BRANCH_PREFIXES)

    @property
    def defined_local(self) -> Optional[str]:
        if self.kind == StatementKind.ASSIGN and isinstance(self.lhs, LocalRef):
            return self.lhs.name
        return None


@dataclass(frozen=True)
class IrMethod:
    owner: str
    name: str
    param_types: Tuple[str, ...]
    return_type: str
    body: Tuple[IrStatement, ...] = ()
    locals: FrozenSet[str] = frozenset()

    @property
    def signature(self) -> MethodSignature:
        return MethodSignature(self.owner, self.return_type, self.name, self.param_types)

    @property
    def key(self) -> Tuple[str, str, Tuple[str, ...]]:
        return (self.owner, self.name, self.param_types)

    @property
    def has_branches(self) -> bool:
        return any(stmt.is_branch for stmt in self.body)

    def __str__(self) -> str:
        return self.signature.render()


@dataclass(frozen=True)
class StaticField:
    name: str
    field_type: str
    initializer: Optional[str] = None


@dataclass(frozen=True)
class IrClassUnit:
    qualified_name: str
    static_fields: Tuple[StaticField, ...] = ()
    methods: Tuple[IrMethod, ...] = ()

    @property
    def simple_name(self) -> str:
        return self.qualified_name.rsplit('.', 1)[-1]

    @property
    def package(self) -> str:
        return self.qualified_name.rsplit('.', 1)[0] if '.' in self.qualified_name else ''

    def static_field(self, name: str) -> Optional[StaticField]:
        for static_field in self.static_fields:
            if static_field.name == name:
                return static_field
        return None


@dataclass(frozen=True)
class IrApp:
    """Parsed app; classes are ordered by qualified name"""
    app_id: str
    classes: Tuple[IrClassUnit, ...] = ()
    source_manifest: Tuple[Tuple[str, Tuple[str, ...]], ...] = field(default=())

    @property
    def files(self) -> Dict[str, Tuple[str, ...]]:
        return dict(self.source_manifest)

    def class_unit(self, qualified_name: str) -> Optional[IrClassUnit]:
        return self.index.classes.get(qualified_name)

    def methods(self) -> Iterator[IrMethod]:
        for unit in self.classes:
            yield from unit.methods

    def resolve_method(self, signature: MethodSignature) -> Optional[IrMethod]:
        return self.index.methods.get(signature.key)

    def is_external(self, signature: MethodSignature) -> bool:
        """Callee has no body in this app and is modeled by signature only"""
        return signature.key not in self.index.methods

    @cached_property
    def index(self):
        from src.ir.index import AppIndex
        return AppIndex(self)
