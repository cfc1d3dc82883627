"""
Backward Slicer for SecretSieve
Inter-procedural backward constant propagation over the IR with a
concatenation domain of constant fragments and holes
"""

import itertools
import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from src.ir.index import CallSite
from src.ir.model import (
    ArrayRef, Call, FieldRef, IntConst, IrApp, IrExpr, IrMethod, LocalRef, NewArray, NewObject,
    NullConst, ParameterRef, StatementKind, StringConst, ThisRef,
)

BUILDER_TYPES = frozenset({'java.lang.StringBuilder', 'java.lang.StringBuffer'})
STRING_TYPE = 'java.lang.String'
BUDGET_REASONS = frozenset({'budget_depth', 'budget_statements', 'fan_out'})


@dataclass(frozen=True)
class Hole:
    reason: str

    def __str__(self) -> str:
        return f"<?{self.reason}>"


Fragment = Union[str, Hole]


def concat_fragments(*parts: Sequence[Fragment]) -> Tuple[Fragment, ...]:
    """Concatenate fragment sequences, merging adjacent constants and dropping empty ones"""
    out: List[Fragment] = []
    for part in parts:
        for frag in part:
            if isinstance(frag, str):
                if not frag:
                    continue
                if out and isinstance(out[-1], str):
                    out[-1] = out[-1] + frag
                    continue
            out.append(frag)
    return tuple(out)


@dataclass(frozen=True)
class TraceStep:
    method: str
    index: int
    transfer: str
    detail: str = ''

    def to_dict(self) -> Dict[str, Any]:
        return {'method': self.method, 'index': self.index, 'transfer': self.transfer, 'detail': self.detail}


@dataclass(frozen=True)
class SliceBudget:
    max_depth: int = 5
    max_statements: int = 500
    fan_out: int = 8

    @classmethod
    def from_config(cls, config: Optional[Mapping[str, Any]]) -> 'SliceBudget':
        config = config or {}
        return cls(max_depth=config.get('max_depth', cls.max_depth),
                   max_statements=config.get('max_statements', cls.max_statements),
                   fan_out=config.get('fan_out', cls.fan_out))


class SliceStatus(str, Enum):
    RESOLVED = "resolved"
    PARTIAL = "partial"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True)
class SliceResult:
    status: SliceStatus
    fragments: Tuple[Fragment, ...]
    trace: Tuple[TraceStep, ...]
    depth_used: int = 0
    reason: Optional[str] = None

    @property
    def value(self) -> Optional[str]:
        if self.status != SliceStatus.RESOLVED:
            return None
        return ''.join(self.fragments)

    @property
    def holes(self) -> List[Hole]:
        return [frag for frag in self.fragments if isinstance(frag, Hole)]

    def render(self) -> str:
        return ''.join(str(frag) for frag in self.fragments)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'status': self.status.value,
            'reason': self.reason,
            'holes': [hole.reason for hole in self.holes],
            'depth_used': self.depth_used,
            'trace': [step.to_dict() for step in self.trace],
        }

    @classmethod
    def from_fragments(cls, fragments: Tuple[Fragment, ...], trace: Tuple[TraceStep, ...],
                       depth_used: int) -> 'SliceResult':
        holes = [frag for frag in fragments if isinstance(frag, Hole)]
        if not holes:
            return cls(SliceStatus.RESOLVED, fragments, trace, depth_used)
        if any(hole.reason in BUDGET_REASONS for hole in holes):
            return cls(SliceStatus.PARTIAL, fragments, trace, depth_used)
        if len(fragments) == 1:
            return cls(SliceStatus.UNRESOLVED, fragments, trace, depth_used, reason=holes[0].reason)
        return cls(SliceStatus.PARTIAL, fragments, trace, depth_used)


@dataclass(frozen=True)
class _Path:
    fragments: Tuple[Fragment, ...]
    trace: Tuple[TraceStep, ...]
    depth: int


@dataclass(frozen=True)
class _Frame:
    """Method activation; `parent` is set when the method was entered from a known call"""
    method: IrMethod
    parent: Optional['_Frame'] = None
    call_index: int = -1
    call: Optional[Call] = None

    @property
    def name(self) -> str:
        return f"{self.method.owner}.{self.method.name}"


@dataclass(frozen=True)
class _Ctx:
    """Per-path walk state: call depth, statements spent and the active method stack"""
    depth: int = 0
    cost: int = 0
    active: Tuple = ()

    def spend(self) -> '_Ctx':
        return replace(self, cost=self.cost + 1)

    def enter(self, method_key) -> '_Ctx':
        return replace(self, depth=self.depth + 1, active=self.active + (method_key,))


class BackwardSlicer:
    """
    Walks definitions backward from a call argument. Straight-line methods use the
    nearest earlier definition; methods with opaque branches use every earlier
    definition. Formal parameters continue through every call site of the method
    (call-site cloning), so each caller yields its own path. The statement budget
    is counted along each path.
    """

    def __init__(self, app: IrApp, budget: Optional[SliceBudget] = None,
                 env: Optional[Mapping[str, Mapping[str, str]]] = None,
                 env_getters: Sequence[str] = ()):
        self.logger = logging.getLogger('BackwardSlicer')
        self.app = app
        self.budget = budget or SliceBudget()
        self.env = env or {}
        self.env_getters = frozenset(env_getters)
        self.visited = 0

    # ------------------------------------------------------------------ entry

    def slice(self, callsite: CallSite, arg_index: int) -> List[SliceResult]:
        if not 0 <= arg_index < len(callsite.call.args):
            raise IndexError(f"argument {arg_index} outside call arity {len(callsite.call.args)}")
        self.visited = 0
        ctx = _Ctx(active=(callsite.method.key,))
        paths = self._eval(callsite.call.args[arg_index], _Frame(callsite.method), callsite.index, ctx)
        results = [SliceResult.from_fragments(p.fragments, p.trace, p.depth) for p in paths]
        self.logger.debug(f"{callsite.location} arg {arg_index}: "
                          f"{[r.status.value for r in results]} after {self.visited} statements")
        return results

    # ---------------------------------------------------------------- helpers

    def _hole(self, reason: str, frame: _Frame, index: int, ctx: _Ctx, detail: str = '') -> List[_Path]:
        return [_Path((Hole(reason),), (TraceStep(frame.name, index, reason, detail),), ctx.depth)]

    def _const(self, value: str, frame: _Frame, index: int, ctx: _Ctx, transfer: str = 'const') -> List[_Path]:
        return [_Path(concat_fragments((value,)), (TraceStep(frame.name, index, transfer, repr(value)),), ctx.depth)]

    def _prefix(self, step: TraceStep, paths: List[_Path]) -> List[_Path]:
        return [_Path(p.fragments, (step,) + p.trace, p.depth) for p in paths]

    def _cap(self, paths: List[_Path], frame: _Frame, index: int, ctx: _Ctx) -> List[_Path]:
        """Keep the first fan_out paths; the rest collapse into one partial path"""
        if len(paths) <= self.budget.fan_out:
            return paths
        kept = paths[:self.budget.fan_out]
        return kept + self._hole('fan_out', frame, index, ctx, f"{len(paths) - len(kept)} more paths")

    def _product(self, parts: List[List[_Path]], frame: _Frame, index: int, ctx: _Ctx) -> List[_Path]:
        """Concatenate alternatives position-wise (cartesian product)"""
        combined = []
        for choice in itertools.product(*parts):
            combined.append(_Path(
                concat_fragments(*(p.fragments for p in choice)),
                tuple(step for p in choice for step in p.trace),
                max((p.depth for p in choice), default=ctx.depth)))
            if len(combined) > self.budget.fan_out:
                break
        return self._cap(combined, frame, index, ctx)

    def _spend(self, ctx: _Ctx) -> Optional[_Ctx]:
        """Charge one statement to the path; None once the budget is exhausted"""
        self.visited += 1
        ctx = ctx.spend()
        return None if ctx.cost > self.budget.max_statements else ctx

    def _reaching(self, method: IrMethod, local: str, before: int) -> List[int]:
        """Indices of definitions of `local` that reach statement `before`"""
        defs = [stmt.index for stmt in method.body[:before] if stmt.defined_local == local]
        if not defs:
            return []
        return defs if method.has_branches else [defs[-1]]

    # ------------------------------------------------------------- evaluation

    def _eval(self, expr: IrExpr, frame: _Frame, at: int, ctx: _Ctx) -> List[_Path]:
        if isinstance(expr, StringConst):
            return self._const(expr.value, frame, at, ctx)
        if isinstance(expr, IntConst):
            return self._const(str(expr.value), frame, at, ctx, 'int_const')
        if isinstance(expr, NullConst):
            return self._hole('null', frame, at, ctx)
        if isinstance(expr, LocalRef):
            return self._eval_local(expr.name, frame, at, ctx)
        if isinstance(expr, FieldRef):
            return self._eval_field(expr, frame, at, ctx)
        if isinstance(expr, Call):
            return self._eval_call(expr, frame, at, ctx)
        if isinstance(expr, ArrayRef):
            return self._eval_array_read(expr, frame, at, ctx)
        if isinstance(expr, ParameterRef):
            return self._eval_parameter(expr.index, frame, at, ctx)
        if isinstance(expr, ThisRef):
            return self._hole('this', frame, at, ctx)
        return self._hole('unsupported', frame, at, ctx, type(expr).__name__)

    def _eval_local(self, name: str, frame: _Frame, at: int, ctx: _Ctx) -> List[_Path]:
        defs = self._reaching(frame.method, name, at)
        if not defs:
            return self._hole('no_definition', frame, at, ctx, name)
        if self._builder_root(frame.method, name, at) is not None:
            return self._builder_content(name, frame, at, ctx)
        paths: List[_Path] = []
        for index in defs:
            step_ctx = self._spend(ctx)
            if step_ctx is None:
                paths.extend(self._hole('budget_statements', frame, index, ctx, name))
                continue
            sub = self._eval(frame.method.body[index].rhs, frame, index, step_ctx)
            paths.extend(self._prefix(TraceStep(frame.name, index, 'assign', name), sub))
        return self._cap(paths, frame, at, ctx)

    # ---------------------------------------------------------------- fields

    def _eval_field(self, ref: FieldRef, frame: _Frame, at: int, ctx: _Ctx) -> List[_Path]:
        label = f"{ref.owner}.{ref.name}"
        stores = self.app.index.stores_to(ref)
        local_stores = [s for s in stores if s.method.key == frame.method.key and s.statement.index < at]
        if local_stores and not frame.method.has_branches:
            stores, initializer = [local_stores[-1]], None
        else:
            stores = [s for s in stores if s.method.key != frame.method.key or s.statement.index < at]
            unit = self.app.class_unit(ref.owner)
            static_field = unit.static_field(ref.name) if unit is not None and ref.base is None else None
            initializer = static_field.initializer if static_field is not None else None

        paths: List[_Path] = []
        if initializer is not None:
            paths.extend(self._const(initializer, frame, at, ctx, 'static_init'))
        for store in stores:
            step_ctx = self._spend(ctx)
            if step_ctx is None:
                paths.extend(self._hole('budget_statements', frame, at, ctx, label))
                continue
            same = store.method.key == frame.method.key
            if not same:
                if ctx.depth + 1 > self.budget.max_depth:
                    paths.extend(self._hole('budget_depth', frame, at, ctx, label))
                    continue
                step_ctx = replace(step_ctx, depth=step_ctx.depth + 1)
            store_frame = frame if same else _Frame(store.method)
            sub = self._eval(store.statement.rhs, store_frame, store.statement.index, step_ctx)
            paths.extend(self._prefix(TraceStep(store_frame.name, store.statement.index, 'field_store', label), sub))
        if not paths:
            return self._hole('no_definition', frame, at, ctx, label)
        return self._cap(paths, frame, at, ctx)

    # ---------------------------------------------------------------- arrays

    def _const_int(self, expr: IrExpr, frame: _Frame, at: int) -> Optional[int]:
        if isinstance(expr, IntConst):
            return expr.value
        if isinstance(expr, LocalRef):
            defs = self._reaching(frame.method, expr.name, at)
            if len(defs) == 1:
                rhs = frame.method.body[defs[0]].rhs
                if isinstance(rhs, IntConst):
                    return rhs.value
        return None

    def _array_sources(self, local: str, frame: _Frame, at: int, depth: int,
                       seen: frozenset = frozenset()) -> List[Tuple[_Frame, str, int, int, int, Optional[str]]]:
        """
        (frame, array local, allocation index, scan end, depth, hole) for every allocation
        reaching `local`. Entries with a hole reason mark a walk cut short by a cycle through
        field stores or by the depth budget; their allocation index is -1.
        """
        if depth > self.budget.max_depth:
            return [(frame, local, -1, at, depth, 'budget_depth')]
        key = (frame.method.key, local, at)
        if key in seen:
            return [(frame, local, -1, at, depth, 'recursive')]
        seen = seen | {key}

        sources = []
        for index in self._reaching(frame.method, local, at):
            rhs = frame.method.body[index].rhs
            if isinstance(rhs, NewArray):
                sources.append((frame, local, index, at, depth, None))
            elif isinstance(rhs, LocalRef):
                sources.extend(self._array_sources(rhs.name, frame, index, depth, seen))
            elif isinstance(rhs, FieldRef):
                for store in self.app.index.stores_to(rhs):
                    if isinstance(store.statement.rhs, LocalRef):
                        same = store.method.key == frame.method.key
                        store_frame = frame if same else _Frame(store.method)
                        sources.extend(self._array_sources(
                            store.statement.rhs.name, store_frame, store.statement.index,
                            depth if same else depth + 1, seen))
        return sources

    def _eval_array_read(self, ref: ArrayRef, frame: _Frame, at: int, ctx: _Ctx) -> List[_Path]:
        position = self._const_int(ref.index, frame, at)
        if position is None:
            return self._hole('dynamic_index', frame, at, ctx, ref.base)
        sources = self._array_sources(ref.base, frame, at, ctx.depth)
        if not sources:
            return self._hole('no_definition', frame, at, ctx, f"{ref.base}[{position}]")

        paths: List[_Path] = []
        for src_frame, local, alloc, end, src_depth, cut in sources:
            if cut is not None:
                paths.extend(self._hole(cut, src_frame, end, ctx, local))
                continue
            src_ctx = replace(ctx, depth=src_depth)
            aliases = {local}
            writes = []
            dynamic = False
            for stmt in src_frame.method.body[alloc + 1:end]:
                if stmt.defined_local and isinstance(stmt.rhs, LocalRef) and stmt.rhs.name in aliases:
                    aliases.add(stmt.defined_local)
                if stmt.kind == StatementKind.ARRAY_STORE and stmt.lhs.base in aliases:
                    index = self._const_int(stmt.lhs.index, src_frame, stmt.index)
                    if index is None:
                        dynamic = True
                    elif index == position:
                        writes.append(stmt)
            if dynamic:
                paths.extend(self._hole('dynamic_index', src_frame, alloc, src_ctx, local))
                continue
            if not writes:
                paths.extend(self._hole('no_definition', src_frame, alloc, src_ctx, f"{local}[{position}]"))
                continue
            if not src_frame.method.has_branches:
                writes = writes[-1:]
            for stmt in writes:
                step_ctx = self._spend(src_ctx)
                if step_ctx is None:
                    paths.extend(self._hole('budget_statements', src_frame, stmt.index, src_ctx, local))
                    continue
                sub = self._eval(stmt.rhs, src_frame, stmt.index, step_ctx)
                paths.extend(self._prefix(
                    TraceStep(src_frame.name, stmt.index, 'array_store', f"{local}[{position}]"), sub))
        return self._cap(paths, frame, at, ctx)

    # -------------------------------------------------------------- builders

    def _builder_root(self, method: IrMethod, local: str, at: int) -> Optional[Tuple[str, int]]:
        """(local, index) of the `new` allocation a builder-typed local descends from"""
        defs = self._reaching(method, local, at)
        if len(defs) != 1:
            return None
        rhs = method.body[defs[0]].rhs
        if isinstance(rhs, NewObject) and (rhs.type_name in BUILDER_TYPES or rhs.type_name == STRING_TYPE):
            return (local, defs[0])
        if isinstance(rhs, Call) and rhs.receiver and rhs.callee.owner in BUILDER_TYPES \
                and rhs.callee.name == 'append':
            return self._builder_root(method, rhs.receiver, defs[0])
        if isinstance(rhs, LocalRef):
            return self._builder_root(method, rhs.name, defs[0])
        return None

    def _builder_content(self, local: str, frame: _Frame, at: int, ctx: _Ctx) -> List[_Path]:
        """Replays constructor and append calls on a builder (and its aliases) up to `at`"""
        root = self._builder_root(frame.method, local, at)
        if root is None:
            return self._hole('unknown_builder', frame, at, ctx, local)
        root_local, alloc = root
        aliases = {root_local}
        parts: List[List[_Path]] = [self._const('', frame, alloc, ctx, 'new')]
        saw_branch = False
        for stmt in frame.method.body[alloc + 1:at]:
            if stmt.is_branch:
                saw_branch = True
                continue
            call = stmt.call
            target = stmt.defined_local
            if call is not None and call.receiver in aliases:
                owner, name = call.callee.owner, call.callee.name
                if owner in BUILDER_TYPES or (owner == STRING_TYPE and name == '<init>'):
                    step_ctx = self._spend(ctx)
                    if step_ctx is None:
                        parts.append(self._hole('budget_statements', frame, stmt.index, ctx, name))
                        break
                    ctx = step_ctx
                    if name == '<init>':
                        params = call.callee.param_types
                        if params and params[0] in (STRING_TYPE, 'java.lang.CharSequence'):
                            parts = [self._prefix(TraceStep(frame.name, stmt.index, 'builder_init'),
                                                  self._eval(call.args[0], frame, stmt.index, ctx))]
                        elif not params or (params == ('int',) and owner in BUILDER_TYPES):
                            parts = [self._const('', frame, stmt.index, ctx, 'builder_init')]
                        else:
                            parts = [self._hole('builder_op', frame, stmt.index, ctx, name)]
                    elif name == 'append' and call.args:
                        parts.append(self._prefix(TraceStep(frame.name, stmt.index, 'append'),
                                                  self._eval_appended(call, frame, stmt.index, ctx)))
                    elif name != 'toString':
                        parts.append(self._hole('builder_op', frame, stmt.index, ctx, name))
                    if target is not None and name == 'append':
                        aliases.add(target)
                    continue
            if target is not None:
                if isinstance(stmt.rhs, LocalRef) and stmt.rhs.name in aliases:
                    aliases.add(target)
                else:
                    aliases.discard(target)
        if saw_branch:
            parts.append(self._hole('loop', frame, at, ctx))
        return self._product(parts, frame, at, ctx)

    def _eval_appended(self, call: Call, frame: _Frame, at: int, ctx: _Ctx) -> List[_Path]:
        arg = call.args[0]
        if call.callee.param_types and call.callee.param_types[0] == 'char' and isinstance(arg, IntConst):
            return self._const(chr(arg.value), frame, at, ctx, 'char_const')
        return self._eval(arg, frame, at, ctx)

    # ----------------------------------------------------------------- calls

    def _eval_call(self, call: Call, frame: _Frame, at: int, ctx: _Ctx) -> List[_Path]:
        callee = call.callee
        owner, name = callee.owner, callee.name

        if owner in BUILDER_TYPES and name == 'toString' and call.receiver:
            return self._prefix(TraceStep(frame.name, at, 'to_string', call.receiver),
                                self._builder_content(call.receiver, frame, at, ctx))
        if owner == STRING_TYPE:
            if name in ('toString', 'intern') and call.receiver:
                return self._eval_local(call.receiver, frame, at, ctx)
            if name == 'concat' and call.receiver and len(call.args) == 1:
                parts = [self._eval_local(call.receiver, frame, at, ctx),
                         self._eval(call.args[0], frame, at, ctx)]
                return self._prefix(TraceStep(frame.name, at, 'concat'), self._product(parts, frame, at, ctx))
            if name == 'valueOf' and len(call.args) == 1:
                if callee.param_types[0] == 'char' and isinstance(call.args[0], IntConst):
                    return self._const(chr(call.args[0].value), frame, at, ctx, 'value_of')
                return self._prefix(TraceStep(frame.name, at, 'value_of'),
                                    self._eval(call.args[0], frame, at, ctx))

        if f"{owner}.{name}" in self.env_getters:
            return self._eval_env(call, frame, at, ctx)

        target = self.app.resolve_method(callee)
        if target is None:
            return self._hole('external', frame, at, ctx, callee.render())
        return self._eval_return(target, call, frame, at, ctx)

    def _eval_env(self, call: Call, frame: _Frame, at: int, ctx: _Ctx) -> List[_Path]:
        """Substitutes values from the app's env files for configured getter calls"""
        if not call.args:
            return self._hole('env_missing', frame, at, ctx)
        paths = []
        for key_path in self._eval(call.args[0], frame, at, ctx):
            if any(isinstance(f, Hole) for f in key_path.fragments):
                paths.append(_Path((Hole('env_key'),), key_path.trace, key_path.depth))
                continue
            key = ''.join(key_path.fragments)
            value = None
            for env_file in sorted(self.env):
                if key in self.env[env_file]:
                    value = self.env[env_file][key]
                    break
            if value is None:
                paths.extend(self._hole('env_missing', frame, at, ctx, key))
            else:
                paths.append(_Path(concat_fragments((value,)),
                                   key_path.trace + (TraceStep(frame.name, at, 'env', key),),
                                   key_path.depth))
        return self._cap(paths, frame, at, ctx)

    def _eval_return(self, target: IrMethod, call: Call, frame: _Frame, at: int, ctx: _Ctx) -> List[_Path]:
        if ctx.depth + 1 > self.budget.max_depth:
            return self._hole('budget_depth', frame, at, ctx, target.name)
        if target.key in ctx.active:
            return self._hole('recursive', frame, at, ctx, target.name)
        returns = [stmt for stmt in target.body
                   if stmt.kind == StatementKind.RETURN and stmt.rhs is not None]
        if not returns:
            return self._hole('no_definition', frame, at, ctx, f"{target.name} returns nothing")
        if not target.has_branches:
            returns = returns[-1:]
        callee_frame = _Frame(target, frame, at, call)
        callee_ctx = ctx.enter(target.key)
        paths = []
        for stmt in returns:
            sub = self._eval(stmt.rhs, callee_frame, stmt.index, callee_ctx)
            paths.extend(self._prefix(TraceStep(callee_frame.name, stmt.index, 'return'), sub))
        return self._cap(paths, frame, at, ctx)

    def _eval_parameter(self, index: int, frame: _Frame, at: int, ctx: _Ctx) -> List[_Path]:
        label = f"@parameter{index}"
        if frame.parent is not None:
            if index >= len(frame.call.args):
                return self._hole('no_definition', frame, at, ctx, label)
            parent_ctx = replace(ctx, active=tuple(k for k in ctx.active if k != frame.method.key))
            sub = self._eval(frame.call.args[index], frame.parent, frame.call_index, parent_ctx)
            return self._prefix(TraceStep(frame.name, at, 'parameter', label), sub)

        callers = self.app.index.callers_of(frame.method)
        if not callers:
            return self._hole('no_caller', frame, at, ctx, label)
        if ctx.depth + 1 > self.budget.max_depth:
            return self._hole('budget_depth', frame, at, ctx, label)
        paths: List[_Path] = []
        for site in callers:
            if site.method.key in ctx.active:
                paths.extend(self._hole('recursive', frame, at, ctx, site.location))
                continue
            if index >= len(site.call.args):
                continue
            sub = self._eval(site.call.args[index], _Frame(site.method), site.index, ctx.enter(site.method.key))
            paths.extend(self._prefix(TraceStep(f"{site.method.owner}.{site.method.name}", site.index,
                                                'call_site', label), sub))
        if not paths:
            return self._hole('no_caller', frame, at, ctx, label)
        return self._cap(paths, frame, at, ctx)


def backward_slice(app: IrApp, callsite: CallSite, arg_index: int, budget: Optional[SliceBudget] = None,
                   env: Optional[Mapping[str, Mapping[str, str]]] = None,
                   env_getters: Sequence[str] = ()) -> List[SliceResult]:
    """One SliceResult per feasible definition path of the argument"""
    return BackwardSlicer(app, budget, env, env_getters).slice(callsite, arg_index)
