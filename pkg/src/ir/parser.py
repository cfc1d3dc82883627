"""
IR Parser for SecretSieve
Parses the Jimple-like textual IR (see docs/IR_GRAMMAR.md) into the immutable IR model
"""

import logging
import re
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from src.core.errors import FileSyntaxError
from src.ir.model import (
    UNKNOWN_TYPE, ArrayRef, BinaryOp, Call, FieldRef, IntConst, IrApp, IrClassUnit, IrExpr,
    IrMethod, IrStatement, LocalRef, MethodSignature, NewArray, NewObject, NullConst,
    ParameterRef, StatementKind, StaticField, StringConst, ThisRef, Unknown, expr_locals,
)

CLASS_HEADER = re.compile(r'^class\s+([\w$]+(?:\.[\w$]+)*)$')
STATIC_FIELD = re.compile(r'^staticfield\s+(\S+)\s+([\w$]+)(?:\s*=\s*("(?:[^"\\]|\\.)*"))?$')
METHOD_HEADER = re.compile(r'^method\s+(\S+)\s+([\w$]+|<init>|<clinit>)\s*\(([^()]*)\)\s*\{$')

IDENTITY = re.compile(r'^([\w$]+)\s*:=\s*@(parameter(\d+)|this)\s*:\s*(\S+)$')
LOCAL_NAME = re.compile(r'^[\w$]+$')
INT_LITERAL = re.compile(r'^-?\d+$')
NEW_ARRAY = re.compile(r'^newarray\s+\((\S+)\)\[(.+)\]$')
NEW_OBJECT = re.compile(r'^new\s+(\S+)$')
ARRAY_ACCESS = re.compile(r'^([\w$]+)\[(.+)\]$')
INVOKE_PREFIX = re.compile(r'^(static|virtual|special|interface)invoke\s+')
SHORTHAND_CALL = re.compile(r'^(?:([\w$]+)\.)?([\w$]+)\((.*)\)$')
SIGNATURE_BODY = re.compile(r'^(\S+):\s+(\S+)\s+([\w$]+|<init>|<clinit>)\((.*)\)$')
FIELD_BODY = re.compile(r'^(\S+):\s+(\S+)\s+([\w$]+)$')
BINARY = re.compile(
    r'^(\S+)\s+(\+|-|\*|/|%|&|\||\^|<<|>>>|>>|cmpl|cmpg|cmp|==|!=|<=|>=|<|>)\s+(\S+)$'
)

_ESCAPES = {'n': '\n', 't': '\t', 'r': '\r', '"': '"', '\\': '\\', '0': '\0'}


def unescape_string(body: str) -> str:
    """Decode the inside of a quoted IR string literal"""
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == '\\' and i + 1 < len(body):
            nxt = body[i + 1]
            if nxt == 'u' and re.fullmatch(r'[0-9a-fA-F]{4}', body[i + 2:i + 6]):
                out.append(chr(int(body[i + 2:i + 6], 16)))
                i += 6
                continue
            if nxt in _ESCAPES:
                out.append(_ESCAPES[nxt])
                i += 2
                continue
        out.append(ch)
        i += 1
    return ''.join(out)


def _quoted_end(text: str, start: int) -> int:
    """Index just past the closing quote of the literal opening at `start`, or -1"""
    i = start + 1
    while i < len(text):
        if text[i] == '\\':
            i += 2
            continue
        if text[i] == '"':
            return i + 1
        i += 1
    return -1


def _split_top_level(text: str, sep: str = ',') -> Optional[List[str]]:
    """Split on `sep` outside quotes, parentheses and angle brackets; None when unbalanced"""
    parts, depth, current, i = [], 0, [], 0
    while i < len(text):
        ch = text[i]
        if ch == '"':
            end = _quoted_end(text, i)
            if end < 0:
                return None
            current.append(text[i:end])
            i = end
            continue
        if ch in '(<[':
            depth += 1
        elif ch in ')>]':
            depth -= 1
            if depth < 0:
                return None
        if ch == sep and depth == 0:
            parts.append(''.join(current).strip())
            current = []
        else:
            current.append(ch)
        i += 1
    if depth != 0:
        return None
    tail = ''.join(current).strip()
    if tail or parts:
        parts.append(tail)
    return parts


def _closing_angle(text: str, start: int) -> int:
    """Index of the '>' matching the '<' at `start`, or -1"""
    depth = 0
    for i in range(start, len(text)):
        if text[i] == '<':
            depth += 1
        elif text[i] == '>':
            depth -= 1
            if depth == 0:
                return i
    return -1


def _find_assignment(text: str) -> int:
    """Position of the top-level ' = ' of an assignment, or -1"""
    i, angle = 0, 0
    while i < len(text):
        ch = text[i]
        if ch == '"':
            end = _quoted_end(text, i)
            if end < 0:
                return -1
            i = end
            continue
        if ch == '<':
            angle += 1
        elif ch == '>':
            angle -= 1
        elif ch == '=' and angle == 0:
            before = text[i - 1] if i > 0 else ''
            after = text[i + 1] if i + 1 < len(text) else ''
            if before not in '=!<>:' and after != '=':
                return i
        i += 1
    return -1


def _split_types(text: str) -> Tuple[str, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(part.strip() for part in text.split(','))


def parse_signature(text: str) -> Optional[MethodSignature]:
    """Parse `<owner: ret name(types)>` (angle brackets included)"""
    if not (text.startswith('<') and text.endswith('>')):
        return None
    match = SIGNATURE_BODY.match(text[1:-1].strip())
    if not match:
        return None
    owner, ret, name, params = match.groups()
    return MethodSignature(owner, ret, name, _split_types(params))


def _parse_field_sig(text: str, base: Optional[str]) -> Optional[FieldRef]:
    match = FIELD_BODY.match(text[1:-1].strip())
    if not match:
        return None
    owner, field_type, name = match.groups()
    return FieldRef(owner, field_type, name, base)


def _parse_args(text: str) -> Optional[Tuple[IrExpr, ...]]:
    parts = _split_top_level(text)
    if parts is None or any(part == '' for part in parts):
        return None
    args = tuple(parse_expr(part) for part in parts)
    if any(isinstance(arg, Unknown) for arg in args):
        return None
    return args


def _parse_invoke(text: str) -> Optional[Call]:
    prefix = INVOKE_PREFIX.match(text)
    if not prefix:
        return None
    invoke_kind = prefix.group(1)
    rest = text[prefix.end():]
    receiver = None
    if not rest.startswith('<'):
        dot = rest.find('.<')
        if dot <= 0 or not LOCAL_NAME.match(rest[:dot]):
            return None
        receiver = rest[:dot]
        rest = rest[dot + 1:]
    close = _closing_angle(rest, 0)
    if close < 0:
        return None
    callee = parse_signature(rest[:close + 1])
    tail = rest[close + 1:].strip()
    if callee is None or not (tail.startswith('(') and tail.endswith(')')):
        return None
    args = _parse_args(tail[1:-1])
    if args is None:
        return None
    if invoke_kind == 'static' and receiver is not None:
        return None
    return Call(invoke_kind, callee, receiver, args)


def _parse_shorthand(text: str) -> Optional[Call]:
    """`r7.ggh(ctx, "AIza")` style call with unresolved owner and types"""
    match = SHORTHAND_CALL.match(text)
    if not match:
        return None
    receiver, name, arg_text = match.groups()
    args = _parse_args(arg_text)
    if args is None:
        return None
    callee = MethodSignature(UNKNOWN_TYPE, UNKNOWN_TYPE, name, (UNKNOWN_TYPE,) * len(args))
    return Call('virtual' if receiver else 'static', callee, receiver, args)


def parse_expr(text: str) -> IrExpr:
    """Parse one right-hand-side expression; anything outside the grammar is Unknown"""
    text = text.strip()
    if not text:
        return Unknown(text)
    if text.startswith('"'):
        if _quoted_end(text, 0) == len(text):
            return StringConst(unescape_string(text[1:-1]))
    if INT_LITERAL.match(text):
        return IntConst(int(text))
    if text == 'null':
        return NullConst()

    match = NEW_ARRAY.match(text)
    if match:
        length = parse_expr(match.group(2))
        if not isinstance(length, Unknown):
            return NewArray(match.group(1), length)
    match = NEW_OBJECT.match(text)
    if match:
        return NewObject(match.group(1))

    call = _parse_invoke(text)
    if call is not None:
        return call

    if text.startswith('<') and _closing_angle(text, 0) == len(text) - 1:
        field_ref = _parse_field_sig(text, None)
        if field_ref is not None:
            return field_ref
    dot = text.find('.<')
    if dot > 0 and LOCAL_NAME.match(text[:dot]) and text.endswith('>'):
        field_ref = _parse_field_sig(text[dot + 1:], text[:dot])
        if field_ref is not None:
            return field_ref

    match = ARRAY_ACCESS.match(text)
    if match:
        index = parse_expr(match.group(2))
        if isinstance(index, (IntConst, LocalRef)):
            return ArrayRef(match.group(1), index)

    call = _parse_shorthand(text)
    if call is not None:
        return call

    if LOCAL_NAME.match(text):
        return LocalRef(text)

    match = BINARY.match(text)
    if match:
        left, right = parse_expr(match.group(1)), parse_expr(match.group(3))
        if not isinstance(left, Unknown) and not isinstance(right, Unknown):
            return BinaryOp(match.group(2), left, right)
    return Unknown(text)


def parse_statement(text: str, index: int) -> IrStatement:
    """Parse one statement line; degrades to an unknown assign instead of raising"""
    text = text.strip().rstrip(';').strip()

    match = IDENTITY.match(text)
    if match:
        local, _, param_index, type_name = match.groups()
        rhs = ThisRef(type_name) if param_index is None else ParameterRef(int(param_index), type_name)
        return IrStatement(index, StatementKind.ASSIGN, LocalRef(local), rhs)

    if text == 'return' or text.startswith('return '):
        value_text = text[len('return'):].strip()
        value = parse_expr(value_text) if value_text else None
        if not isinstance(value, Unknown):
            return IrStatement(index, StatementKind.RETURN, None, value)

    call = _parse_invoke(text)
    if call is None and _find_assignment(text) < 0:
        call = _parse_shorthand(text)
    if call is not None:
        return IrStatement(index, StatementKind.INVOKE, None, call)

    eq = _find_assignment(text)
    if eq > 0:
        lhs_text, rhs_text = text[:eq].strip(), text[eq + 1:].strip()
        rhs = parse_expr(rhs_text)
        if not isinstance(rhs, Unknown):
            if LOCAL_NAME.match(lhs_text) and not INT_LITERAL.match(lhs_text):
                return IrStatement(index, StatementKind.ASSIGN, LocalRef(lhs_text), rhs)
            target = parse_expr(lhs_text)
            if isinstance(target, FieldRef):
                return IrStatement(index, StatementKind.FIELD_STORE, target, rhs)
            if isinstance(target, ArrayRef):
                return IrStatement(index, StatementKind.ARRAY_STORE, target, rhs)

    return IrStatement(index, StatementKind.ASSIGN, None, Unknown(text))


def _statement_locals(stmt: IrStatement) -> Iterable[str]:
    if isinstance(stmt.lhs, LocalRef):
        yield stmt.lhs.name
    else:
        yield from expr_locals(stmt.lhs)
    yield from expr_locals(stmt.rhs)


class IrParser:
    """
    Line-oriented parser for one app's IR files
    """

    def __init__(self, config: Optional[Dict] = None):
        self.config = config or {}
        self.logger = logging.getLogger('IrParser')
        self.degraded_statements = 0

    def parse_app(self, ir_text_files: Sequence[Tuple[str, str]], app_id: str = "app") -> IrApp:
        """Parse every (path, text) pair into one IrApp"""
        units: Dict[str, IrClassUnit] = {}
        manifest = []
        for path, text in ir_text_files:
            file_units = self.parse_file(path, text)
            for unit, line_no in file_units:
                if unit.qualified_name in units:
                    raise FileSyntaxError(path, line_no, f"duplicate class {unit.qualified_name}")
                units[unit.qualified_name] = unit
            manifest.append((path, tuple(unit.qualified_name for unit, _ in file_units)))

        classes = tuple(units[name] for name in sorted(units))
        self.logger.debug(f"Parsed app {app_id}: {len(classes)} classes from {len(manifest)} files")
        return IrApp(app_id=app_id, classes=classes, source_manifest=tuple(sorted(manifest)))

    def parse_file(self, path: str, text: str) -> List[Tuple[IrClassUnit, int]]:
        """Parse one file; returns [(unit, header line)] (empty for a blank file)"""
        lines = text.splitlines()
        class_name: Optional[str] = None
        class_line = 0
        fields: List[StaticField] = []
        methods: List[IrMethod] = []
        method_keys = set()
        current: Optional[dict] = None

        for line_no, raw in enumerate(lines, start=1):
            line = raw.strip()
            if not line or line.startswith('//') or line.startswith('#'):
                continue

            if current is not None:
                if line == '}':
                    method = self._finish_method(current, class_name)
                    if method.key in method_keys:
                        raise FileSyntaxError(path, current['line'], f"duplicate method {method.name}")
                    method_keys.add(method.key)
                    methods.append(method)
                    current = None
                else:
                    current['lines'].append(line)
                continue

            if class_name is None:
                match = CLASS_HEADER.match(line)
                if not match:
                    raise FileSyntaxError(path, line_no, "expected class header")
                class_name, class_line = match.group(1), line_no
                continue

            if line.startswith('class'):
                raise FileSyntaxError(path, line_no, "more than one class in file")
            if line.startswith('staticfield'):
                match = STATIC_FIELD.match(line)
                if not match:
                    raise FileSyntaxError(path, line_no, "malformed staticfield declaration")
                field_type, name, literal = match.groups()
                if any(f.name == name for f in fields):
                    raise FileSyntaxError(path, line_no, f"duplicate field {name}")
                initializer = unescape_string(literal[1:-1]) if literal is not None else None
                fields.append(StaticField(name, field_type, initializer))
                continue
            if line.startswith('method'):
                match = METHOD_HEADER.match(line)
                if not match:
                    raise FileSyntaxError(path, line_no, "malformed method header")
                ret, name, params = match.groups()
                current = {'ret': ret, 'name': name, 'params': _split_types(params),
                           'line': line_no, 'lines': []}
                continue
            raise FileSyntaxError(path, line_no, "statement outside method body")

        if current is not None:
            raise FileSyntaxError(path, current['line'], "unterminated method body")
        if class_name is None:
            return []
        unit = IrClassUnit(class_name, tuple(fields), tuple(methods))
        return [(unit, class_line)]

    def _finish_method(self, current: dict, owner: str) -> IrMethod:
        body = tuple(parse_statement(line, i) for i, line in enumerate(current['lines']))
        degraded = sum(1 for stmt in body if stmt.is_unknown and not stmt.is_branch)
        if degraded:
            self.degraded_statements += degraded
            self.logger.warning(f"{owner}.{current['name']}: {degraded} statement(s) degraded to unknown")
        local_names = frozenset(name for stmt in body for name in _statement_locals(stmt))
        return IrMethod(owner=owner, name=current['name'], param_types=current['params'],
                        return_type=current['ret'], body=body, locals=local_names)


def parse_app(ir_text_files: Sequence[Tuple[str, str]], app_id: str = "app") -> IrApp:
    """Parse (path, text) pairs into an IrApp"""
    return IrParser().parse_app(ir_text_files, app_id)
