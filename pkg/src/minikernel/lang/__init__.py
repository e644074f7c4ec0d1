"""MiniKernel language frontend: lexer, parser, typechecker, printer."""

from .ast import Diagnostic, SourceError, SourceUnit
from .parser import parse_unit
from .pretty import pretty_expr, pretty_unit
from .types import typecheck

__all__ = [
    "Diagnostic",
    "SourceError",
    "SourceUnit",
    "parse_unit",
    "pretty_expr",
    "pretty_unit",
    "typecheck",
]
