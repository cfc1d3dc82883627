# IR Module for SecretSieve: model, parser, printer, lookup helpers

from .index import CallSite, find_callsites, method_window
from .model import IrApp, IrClassUnit, IrMethod, IrStatement, MethodSignature
from .parser import parse_app
from .printer import print_app, render_statement

__all__ = [
    'CallSite', 'IrApp', 'IrClassUnit', 'IrMethod', 'IrStatement', 'MethodSignature',
    'find_callsites', 'method_window', 'parse_app', 'print_app', 'render_statement',
]
