"""Tests for the textual IR: parsing, printing and the app index.

Covers statement forms, degraded statements, header errors with line
numbers, the print/parse round trip and call-site lookups.
"""

from __future__ import annotations

import pytest

from src.core.errors import FileSyntaxError, IndexOutOfRangeError
from src.ir.index import find_callsites, method_window
from src.ir.model import (
    ArrayRef, BinaryOp, Call, FieldRef, IntConst, LocalRef, NewArray, NewObject, NullConst,
    ParameterRef, StatementKind, StringConst, ThisRef, Unknown,
)
from src.ir.parser import IrParser, parse_app, parse_expr, parse_signature, parse_statement, unescape_string
from src.ir.printer import class_file_name, escape_string, print_app, render_statement
from tests.conftest import GOOGLE_KEY


class TestExpressions:
    """Tests for single right-hand-side expressions."""

    def test_constants(self) -> None:
        """String, int and null literals parse to constants."""
        assert parse_expr('"abc"') == StringConst("abc")
        assert parse_expr('-12') == IntConst(-12)
        assert parse_expr('null') == NullConst()

    def test_string_escapes(self) -> None:
        """Escapes inside literals are decoded."""
        assert parse_expr(r'"a\"b\\c\n"') == StringConst('a"b\\c\n')
        assert unescape_string(r'Ax') == 'Ax'

    def test_allocation_and_array_access(self) -> None:
        """new, newarray and indexed reads keep their operands."""
        assert parse_expr('new java.lang.StringBuilder') == NewObject('java.lang.StringBuilder')
        assert parse_expr('newarray (java.lang.String)[3]') == NewArray('java.lang.String', IntConst(3))
        assert parse_expr('r4[i2]') == ArrayRef('r4', LocalRef('i2'))

    def test_field_references(self) -> None:
        """Static and instance field signatures parse to FieldRef."""
        static = parse_expr('<com.example.Config: java.lang.String KEY>')
        assert static == FieldRef('com.example.Config', 'java.lang.String', 'KEY')
        instance = parse_expr('r0.<com.example.Config: java.lang.String token>')
        assert instance == FieldRef('com.example.Config', 'java.lang.String', 'token', 'r0')

    def test_invocations(self) -> None:
        """Static and virtual invokes carry callee, receiver and arguments."""
        call = parse_expr('virtualinvoke r1.<java.lang.StringBuilder: '
                          'java.lang.StringBuilder append(java.lang.String)>("x")')
        assert isinstance(call, Call)
        assert call.invoke_kind == 'virtual'
        assert call.receiver == 'r1'
        assert call.callee.name == 'append'
        assert call.args == (StringConst("x"),)

        static = parse_expr('staticinvoke <a.B: void run(int,java.lang.String)>(3, r2)')
        assert static.receiver is None
        assert static.callee.param_types == ('int', 'java.lang.String')
        assert static.args == (IntConst(3), LocalRef('r2'))

    def test_shorthand_call_has_unknown_types(self) -> None:
        """Calls without a signature keep the name and arity."""
        call = parse_expr('r7.ggh(r1, "AIza")')
        assert isinstance(call, Call)
        assert call.callee.name == 'ggh'
        assert call.callee.arity == 2

    def test_binary_operation(self) -> None:
        """Arithmetic over locals and ints."""
        assert parse_expr('i3 + 7') == BinaryOp('+', LocalRef('i3'), IntConst(7))

    def test_signature(self) -> None:
        """Signatures with constructor names parse."""
        sig = parse_signature('<android.app.Activity: void <init>()>')
        assert sig.owner == 'android.app.Activity'
        assert sig.name == '<init>'
        assert sig.param_types == ()
        assert parse_signature('not a signature') is None


class TestStatements:
    """Tests for statement lines."""

    def test_identity_statements(self) -> None:
        """this and parameter identities become assigns of reference expressions."""
        this = parse_statement('r0 := @this: com.example.Main', 0)
        assert this.kind == StatementKind.ASSIGN
        assert this.rhs == ThisRef('com.example.Main')
        param = parse_statement('r1 := @parameter2: java.lang.String', 1)
        assert param.rhs == ParameterRef(2, 'java.lang.String')

    def test_stores(self) -> None:
        """Field and array targets produce store statements."""
        field_store = parse_statement('<a.B: java.lang.String KEY> = "v"', 0)
        assert field_store.kind == StatementKind.FIELD_STORE
        array_store = parse_statement('r3[0] = "piece"', 1)
        assert array_store.kind == StatementKind.ARRAY_STORE
        assert array_store.lhs == ArrayRef('r3', IntConst(0))

    def test_returns(self) -> None:
        """Bare and valued returns."""
        assert parse_statement('return', 0).rhs is None
        assert parse_statement('return r2', 0).rhs == LocalRef('r2')

    def test_unparseable_line_degrades(self) -> None:
        """Lines outside the grammar become unknown statements."""
        stmt = parse_statement('monitorenter r3 weird ???', 4)
        assert stmt.is_unknown
        assert isinstance(stmt.rhs, Unknown)
        assert not stmt.is_branch

    def test_branch_lines(self) -> None:
        """Conditional jumps and labels are opaque branches."""
        assert parse_statement('if r1 == null goto label3', 0).is_branch
        assert parse_statement('label3:', 1).is_branch
        assert parse_statement('goto label1', 2).is_branch

    def test_trailing_semicolon_ignored(self) -> None:
        """Jimple-style semicolons are tolerated."""
        assert parse_statement('r1 = "x";', 0).rhs == StringConst("x")


class TestParseApp:
    """Tests for whole files and apps."""

    def test_sample_app_structure(self, sample_app) -> None:
        """Classes are ordered, fields and methods are kept."""
        assert [unit.qualified_name for unit in sample_app.classes] == [
            'com.example.app.MainActivity', 'com.example.app.NetHelper']
        main = sample_app.class_unit('com.example.app.MainActivity')
        assert main.static_field('API_KEY').initializer == GOOGLE_KEY
        assert main.static_field('LABEL').initializer is None
        assert [m.name for m in main.methods] == ['<init>', 'onCreate']

    def test_sink_call_statement(self, sample_app) -> None:
        """The Places call is a static invoke with the key local as second argument."""
        main = sample_app.class_unit('com.example.app.MainActivity')
        on_create = main.methods[1]
        stmt = on_create.body[3]
        assert stmt.kind == StatementKind.INVOKE
        assert stmt.call.callee.owner == 'com.google.android.libraries.places.api.Places'
        assert stmt.call.args[1] == LocalRef('r2')
        assert {'r0', 'r1', 'r2', 'r3', 'r4', 'r5'} <= on_create.locals

    def test_external_and_internal_callees(self, sample_app) -> None:
        """Methods with a body resolve; SDK calls are external."""
        helper = sample_app.class_unit('com.example.app.NetHelper').methods[0]
        assert sample_app.resolve_method(helper.signature) is helper
        sink = helper.body[1].call.callee
        assert sample_app.is_external(sink)

    def test_blank_file_is_allowed(self) -> None:
        """A file with only comments contributes no class."""
        app = parse_app([('Empty.jir', '// nothing here\n\n')], 'blank')
        assert app.classes == ()
        assert app.files == {'Empty.jir': ()}

    def test_degraded_statements_counted(self) -> None:
        """The parser counts statements it could not model."""
        parser = IrParser()
        parser.parse_app([('A.jir', 'class a.A\nmethod void m() {\n    ??? odd\n    return\n}\n')], 'x')
        assert parser.degraded_statements == 1


class TestSyntaxErrors:
    """Tests for malformed files."""

    @pytest.mark.parametrize("text, line, message", [
        ('r1 = "x"\n', 1, 'expected class header'),
        ('class a.A\nr1 = "x"\n', 2, 'statement outside method body'),
        ('class a.A\nclass a.B\n', 2, 'more than one class'),
        ('class a.A\nmethod void m( {\n}\n', 2, 'malformed method header'),
        ('class a.A\nstaticfield KEY\n', 2, 'malformed staticfield'),
        ('class a.A\nmethod void m() {\n    return\n', 2, 'unterminated method body'),
        ('class a.A\nstaticfield int N\nstaticfield int N\n', 3, 'duplicate field'),
        ('class a.A\nmethod void m() {\n}\nmethod void m() {\n}\n', 4, 'duplicate method'),
    ])
    def test_header_errors_report_line(self, text: str, line: int, message: str) -> None:
        """Each structural problem names the file and line."""
        with pytest.raises(FileSyntaxError) as info:
            parse_app([('Bad.jir', text)], 'bad')
        assert info.value.path == 'Bad.jir'
        assert info.value.line == line
        assert message in info.value.message

    def test_duplicate_class_across_files(self) -> None:
        """The same class in two files is rejected."""
        with pytest.raises(FileSyntaxError, match='duplicate class a.A'):
            parse_app([('A.jir', 'class a.A\n'), ('B.jir', 'class a.A\n')], 'dup')

    def test_overloads_are_distinct(self) -> None:
        """Same name with different parameters is not a duplicate."""
        app = parse_app([('A.jir', 'class a.A\nmethod void m() {\n}\n'
                                   'method void m(java.lang.String) {\n}\n')], 'ok')
        assert len(app.classes[0].methods) == 2


class TestPrinter:
    """Tests for rendering IR back to text."""

    def test_print_then_parse_is_identity(self, sample_app) -> None:
        """Printing an app and parsing the text gives an equal app."""
        reparsed = parse_app(print_app(sample_app), sample_app.app_id)
        assert reparsed == sample_app

    def test_escape_round_trip_for_awkward_strings(self) -> None:
        """Quotes, backslashes and control characters survive escaping."""
        for value in ['plain', 'quote " inside', 'back\\slash', 'tab\tnew\nline', 'nul\0', 'bell\x07', '']:
            literal = escape_string(value)
            assert parse_expr(literal) == StringConst(value)

    def test_render_identity_statement(self) -> None:
        """Identity statements keep the := operator."""
        stmt = parse_statement('r1 := @parameter0: java.lang.String', 0)
        assert render_statement(stmt) == 'r1 := @parameter0: java.lang.String'

    def test_class_file_name(self) -> None:
        """Nested class markers are file-system safe."""
        assert class_file_name('a.B$Inner') == 'a.B_Inner.jir'


class TestIndex:
    """Tests for call-site lookups and method windows."""

    def test_find_callsites(self, sample_app) -> None:
        """Predicate selects matching callees in class/method/index order."""
        sites = find_callsites(sample_app, lambda sig: sig.name == 'config')
        assert [site.location for site in sites] == [
            'com.example.app.MainActivity.onCreate:8', 'com.example.app.NetHelper.send:1']

    def test_callers_and_field_stores(self) -> None:
        """Callers of a method and stores to a static field are indexed."""
        app = parse_app([('A.jir', """
class a.A
staticfield java.lang.String K

method void <clinit>() {
    <a.A: java.lang.String K> = "v"
    return
}

method void f(java.lang.String) {
    r0 := @parameter0: java.lang.String
    return
}

method void g() {
    staticinvoke <a.A: void f(java.lang.String)>("x")
    staticinvoke <a.A: void f(java.lang.String)>("y")
    return
}
""")], 'idx')
        f = app.class_unit('a.A').methods[1]
        assert [site.index for site in app.index.callers_of(f)] == [0, 1]
        stores = app.index.stores_to(FieldRef('a.A', 'java.lang.String', 'K'))
        assert len(stores) == 1
        assert stores[0].method.name == '<clinit>'

    def test_method_window_clips_to_body(self, sample_app) -> None:
        """Windows never extend beyond the method."""
        on_create = sample_app.class_unit('com.example.app.MainActivity').methods[1]
        window = method_window(on_create, 1, 3)
        assert [stmt.index for stmt in window] == [0, 1, 2, 3, 4]
        assert len(method_window(on_create, 5, 0)) == 1

    def test_method_window_rejects_bad_arguments(self, sample_app) -> None:
        """Out-of-range centers and negative radii raise."""
        on_create = sample_app.class_unit('com.example.app.MainActivity').methods[1]
        with pytest.raises(IndexOutOfRangeError):
            method_window(on_create, len(on_create.body), 2)
        with pytest.raises(ValueError):
            method_window(on_create, 0, -1)
