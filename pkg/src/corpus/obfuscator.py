"""
Identifier-renaming obfuscator
Renames classes, packages, methods, fields and locals to short random
identifiers while leaving every string literal untouched. Platform types
(java., android., ...) keep their names, like a shrinker's library keep rules.
"""

import itertools
import logging
import string
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from src.ir.model import (
    UNKNOWN_TYPE, ArrayRef, BinaryOp, Call, FieldRef, IrApp, IrClassUnit, IrExpr, IrMethod,
    LocalRef, MethodSignature, NewArray, NewObject, ParameterRef, StaticField,
    ThisRef, iter_exprs,
)
from src.ir.printer import class_file_name


PLATFORM_PREFIXES = ('java.', 'javax.', 'android.', 'kotlin.', 'dalvik.', 'org.json.', 'org.w3c.', 'org.xml.')
KEPT_METHOD_NAMES = frozenset({'<init>', '<clinit>'})
PRIMITIVE_TYPES = frozenset({'void', 'int', 'long', 'short', 'byte', 'char', 'boolean', 'float', 'double'})
RESERVED = frozenset({
    'if', 'goto', 'new', 'null', 'return', 'class', 'method', 'staticfield', 'newarray', 'label',
    'cmp', 'cmpl', 'cmpg', 'lookupswitch', 'tableswitch',
})

MethodKey = Tuple[str, str, Tuple[str, ...]]


def short_names(count: int) -> List[str]:
    """First `count` identifiers in the sequence a..z, aa..zz, aaa.. minus reserved words"""
    names: List[str] = []
    for length in itertools.count(1):
        for letters in itertools.product(string.ascii_lowercase, repeat=length):
            name = ''.join(letters)
            if name not in RESERVED:
                names.append(name)
                if len(names) >= count:
                    return names
    return names


def is_platform(type_name: str) -> bool:
    return type_name.startswith(PLATFORM_PREFIXES)


def _base_type(type_name: str) -> Tuple[str, str]:
    """('com.x.Y', '[]') for 'com.x.Y[]'"""
    stripped = type_name.rstrip('[]')
    return stripped, type_name[len(stripped):]


@dataclass
class RenameMap:
    packages: Dict[str, str] = field(default_factory=dict)
    classes: Dict[str, str] = field(default_factory=dict)
    methods: Dict[MethodKey, str] = field(default_factory=dict)
    fields: Dict[Tuple[str, str], str] = field(default_factory=dict)
    locals: Dict[Tuple[MethodKey, str], str] = field(default_factory=dict)

    def type_name(self, type_name: str) -> str:
        base, suffix = _base_type(type_name)
        return self.classes.get(base, base) + suffix

    def method_key(self, key: MethodKey) -> MethodKey:
        owner, name, params = key
        return (self.type_name(owner), self.methods.get(key, name), tuple(self.type_name(p) for p in params))

    def signature(self, sig: MethodSignature) -> MethodSignature:
        owner, name, params = self.method_key(sig.key)
        return MethodSignature(owner, self.type_name(sig.return_type), name, params)

    def field_name(self, owner: str, name: str) -> str:
        return self.fields.get((owner, name), name)

    def local(self, method_key: MethodKey, name: str) -> str:
        return self.locals.get((method_key, name), name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'packages': dict(sorted(self.packages.items())),
            'classes': dict(sorted(self.classes.items())),
            'methods': [{'owner': k[0], 'name': k[1], 'params': list(k[2]), 'renamed': v}
                        for k, v in sorted(self.methods.items())],
            'fields': [{'owner': k[0], 'name': k[1], 'renamed': v} for k, v in sorted(self.fields.items())],
        }


class _Collector:
    """Every renameable type, method and field referenced by an app"""

    def __init__(self, app: IrApp):
        self.types: Set[str] = set()
        self.methods: Set[MethodKey] = set()
        self.fields: Set[Tuple[str, str]] = set()
        for unit in app.classes:
            self._type(unit.qualified_name)
            for static_field in unit.static_fields:
                self._type(static_field.field_type)
                self.fields.add((unit.qualified_name, static_field.name))
            for method in unit.methods:
                self._signature(method.signature)
                for stmt in method.body:
                    for expr in itertools.chain(iter_exprs(stmt.lhs), iter_exprs(stmt.rhs)):
                        self._expr(expr)

    def _type(self, type_name: str):
        base, _ = _base_type(type_name)
        if base and base != UNKNOWN_TYPE and base not in PRIMITIVE_TYPES and not is_platform(base):
            self.types.add(base)

    def _signature(self, sig: MethodSignature):
        self._type(sig.owner)
        self._type(sig.return_type)
        for param in sig.param_types:
            self._type(param)
        if sig.owner != UNKNOWN_TYPE and not is_platform(sig.owner) and sig.name not in KEPT_METHOD_NAMES:
            self.methods.add(sig.key)

    def _expr(self, expr: IrExpr):
        if isinstance(expr, Call):
            self._signature(expr.callee)
        elif isinstance(expr, FieldRef):
            self._type(expr.owner)
            self._type(expr.field_type)
            if not is_platform(expr.owner):
                self.fields.add(expr.key)
        elif isinstance(expr, NewArray):
            self._type(expr.elem_type)
        elif isinstance(expr, NewObject):
            self._type(expr.type_name)
        elif isinstance(expr, (ParameterRef, ThisRef)):
            self._type(expr.type_name)


class Obfuscator:
    def __init__(self, seed: int = 0):
        self.logger = logging.getLogger('Obfuscator')
        self.seed = seed

    def _assign(self, keys: Sequence[Any], rng: np.random.Generator) -> Dict[Any, str]:
        """Random one-to-one mapping from sorted keys onto the shortest free names"""
        keys = sorted(keys)
        names = short_names(len(keys))
        order = rng.permutation(len(keys)) if keys else []
        return {key: names[int(i)] for key, i in zip(keys, order)}

    def rename_map(self, app: IrApp) -> RenameMap:
        rng = np.random.default_rng(self.seed)
        found = _Collector(app)
        rename = RenameMap()

        packages = {t.rsplit('.', 1)[0] for t in found.types if '.' in t}
        rename.packages = self._assign(packages, rng)
        by_package: Dict[str, List[str]] = {}
        for type_name in found.types:
            package = type_name.rsplit('.', 1)[0] if '.' in type_name else ''
            by_package.setdefault(package, []).append(type_name)
        for package in sorted(by_package):
            prefix = rename.packages.get(package)
            for type_name, short in sorted(self._assign(by_package[package], rng).items()):
                rename.classes[type_name] = f"{prefix}.{short.upper()}" if prefix else short.upper()

        by_owner: Dict[str, List[MethodKey]] = {}
        for key in found.methods:
            by_owner.setdefault(key[0], []).append(key)
        for owner in sorted(by_owner):
            rename.methods.update(self._assign(by_owner[owner], rng))

        fields_by_owner: Dict[str, List[Tuple[str, str]]] = {}
        for key in found.fields:
            fields_by_owner.setdefault(key[0], []).append(key)
        for owner in sorted(fields_by_owner):
            rename.fields.update(self._assign(fields_by_owner[owner], rng))

        for method in app.methods():
            for name, short in self._assign(method.locals, rng).items():
                rename.locals[(method.key, name)] = f"{short}{len(short)}"
        return rename

    # ------------------------------------------------------------ rewriting

    def _expr(self, expr: Optional[IrExpr], rename: RenameMap, scope: MethodKey) -> Optional[IrExpr]:
        if expr is None:
            return None
        local = lambda name: rename.local(scope, name) if name is not None else None
        if isinstance(expr, LocalRef):
            return LocalRef(local(expr.name))
        if isinstance(expr, FieldRef):
            return FieldRef(rename.type_name(expr.owner), rename.type_name(expr.field_type),
                            rename.field_name(expr.owner, expr.name), local(expr.base))
        if isinstance(expr, Call):
            return Call(expr.invoke_kind, rename.signature(expr.callee), local(expr.receiver),
                        tuple(self._expr(arg, rename, scope) for arg in expr.args))
        if isinstance(expr, NewArray):
            return NewArray(rename.type_name(expr.elem_type), self._expr(expr.length, rename, scope))
        if isinstance(expr, NewObject):
            return NewObject(rename.type_name(expr.type_name))
        if isinstance(expr, ArrayRef):
            return ArrayRef(local(expr.base), self._expr(expr.index, rename, scope))
        if isinstance(expr, BinaryOp):
            return BinaryOp(expr.op, self._expr(expr.left, rename, scope), self._expr(expr.right, rename, scope))
        if isinstance(expr, ParameterRef):
            return ParameterRef(expr.index, rename.type_name(expr.type_name))
        if isinstance(expr, ThisRef):
            return ThisRef(rename.type_name(expr.type_name))
        return expr

    def _method(self, method: IrMethod, rename: RenameMap) -> IrMethod:
        owner, name, params = rename.method_key(method.key)
        body = tuple(replace(stmt, lhs=self._expr(stmt.lhs, rename, method.key),
                             rhs=self._expr(stmt.rhs, rename, method.key)) for stmt in method.body)
        return IrMethod(owner=owner, name=name, param_types=params,
                        return_type=rename.type_name(method.return_type), body=body,
                        locals=frozenset(rename.local(method.key, n) for n in method.locals))

    def apply(self, app: IrApp, rename: RenameMap) -> IrApp:
        units = []
        for unit in app.classes:
            name = rename.type_name(unit.qualified_name)
            fields = tuple(StaticField(rename.field_name(unit.qualified_name, f.name), rename.type_name(f.field_type),
                                       f.initializer) for f in unit.static_fields)
            units.append(IrClassUnit(name, fields, tuple(self._method(m, rename) for m in unit.methods)))
        units.sort(key=lambda u: u.qualified_name)
        manifest = []
        for path, names in app.source_manifest:
            if names:
                renamed = tuple(rename.type_name(n) for n in names)
                manifest.append((class_file_name(renamed[0]), renamed))
            else:
                manifest.append((path, names))
        return IrApp(app.app_id, tuple(units), tuple(sorted(manifest)))

    def obfuscate(self, app: IrApp) -> Tuple[IrApp, RenameMap]:
        rename = self.rename_map(app)
        obfuscated = self.apply(app, rename)
        self.logger.debug(f"{app.app_id}: renamed {len(rename.classes)} classes, {len(rename.methods)} methods, "
                          f"{len(rename.fields)} fields, {len(rename.locals)} locals")
        return obfuscated, rename


def obfuscate(app: IrApp, seed: int = 0) -> Tuple[IrApp, RenameMap]:
    """Literal-preserving identifier renaming; same app and seed give the same output"""
    return Obfuscator(seed).obfuscate(app)
