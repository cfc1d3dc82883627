"""
IR printer: renders model objects back to the textual IR accepted by the parser
"""

from typing import Dict, List, Optional, Tuple

from src.ir.model import (
    ArrayRef, BinaryOp, Call, FieldRef, IntConst, IrApp, IrClassUnit, IrExpr, IrMethod,
    IrStatement, LocalRef, NewArray, NewObject, NullConst, ParameterRef, StatementKind,
    StringConst, ThisRef, Unknown, UNKNOWN_TYPE,
)

_ESCAPES = {'\\': '\\\\', '"': '\\"', '\n': '\\n', '\t': '\\t', '\r': '\\r', '\0': '\\0'}


def escape_string(value: str) -> str:
    out = []
    for ch in value:
        if ch in _ESCAPES:
            out.append(_ESCAPES[ch])
        elif ord(ch) < 0x20 or ord(ch) == 0x7f or ch in "\x85\u2028\u2029":
            out.append(f'\\u{ord(ch):04x}')
        else:
            out.append(ch)
    return '"' + ''.join(out) + '"'


def render_expr(expr: Optional[IrExpr]) -> str:
    if expr is None:
        return ''
    if isinstance(expr, StringConst):
        return escape_string(expr.value)
    if isinstance(expr, IntConst):
        return str(expr.value)
    if isinstance(expr, NullConst):
        return 'null'
    if isinstance(expr, LocalRef):
        return expr.name
    if isinstance(expr, FieldRef):
        sig = f'<{expr.owner}: {expr.field_type} {expr.name}>'
        return f'{expr.base}.{sig}' if expr.base else sig
    if isinstance(expr, Call):
        args = ', '.join(render_expr(arg) for arg in expr.args)
        if expr.callee.owner == UNKNOWN_TYPE:
            target = f'{expr.receiver}.{expr.callee.name}' if expr.receiver else expr.callee.name
            return f'{target}({args})'
        target = f'{expr.receiver}.{expr.callee.render()}' if expr.receiver else expr.callee.render()
        return f'{expr.invoke_kind}invoke {target}({args})'
    if isinstance(expr, NewArray):
        return f'newarray ({expr.elem_type})[{render_expr(expr.length)}]'
    if isinstance(expr, NewObject):
        return f'new {expr.type_name}'
    if isinstance(expr, ArrayRef):
        return f'{expr.base}[{render_expr(expr.index)}]'
    if isinstance(expr, BinaryOp):
        return f'{render_expr(expr.left)} {expr.op} {render_expr(expr.right)}'
    if isinstance(expr, ParameterRef):
        return f'@parameter{expr.index}: {expr.type_name}'
    if isinstance(expr, ThisRef):
        return f'@this: {expr.type_name}'
    if isinstance(expr, Unknown):
        return expr.text
    raise TypeError(f"not an IR expression: {expr!r}")


def render_statement(stmt: IrStatement) -> str:
    if stmt.is_unknown:
        return stmt.rhs.text
    if stmt.kind == StatementKind.INVOKE:
        return render_expr(stmt.rhs)
    if stmt.kind == StatementKind.RETURN:
        return f'return {render_expr(stmt.rhs)}' if stmt.rhs is not None else 'return'
    operator = ':=' if isinstance(stmt.rhs, (ParameterRef, ThisRef)) else '='
    return f'{render_expr(stmt.lhs)} {operator} {render_expr(stmt.rhs)}'


def render_method(method: IrMethod, indent: str = '    ') -> List[str]:
    lines = [f"method {method.return_type} {method.name}({','.join(method.param_types)}) {{"]
    lines.extend(indent + render_statement(stmt) for stmt in method.body)
    lines.append('}')
    return lines


def render_class(unit: IrClassUnit) -> str:
    lines = [f'class {unit.qualified_name}']
    for static_field in unit.static_fields:
        decl = f'staticfield {static_field.field_type} {static_field.name}'
        if static_field.initializer is not None:
            decl += f' = {escape_string(static_field.initializer)}'
        lines.append(decl)
    for method in unit.methods:
        lines.append('')
        lines.extend(render_method(method))
    return '\n'.join(lines) + '\n'


def class_file_name(qualified_name: str) -> str:
    return qualified_name.replace('$', '_') + '.jir'


def print_app(app: IrApp) -> List[Tuple[str, str]]:
    """Render an app as (path, text) pairs, one class per file"""
    paths: Dict[str, str] = {}
    for path, names in app.source_manifest:
        for name in names:
            paths[name] = path
    files = [(path, "") for path, names in app.source_manifest if not names]
    for unit in app.classes:
        files.append((paths.get(unit.qualified_name, class_file_name(unit.qualified_name)),
                      render_class(unit)))
    return sorted(files)
