"""Surface language and reporting for stmguard."""

from .parser import SourceUnit, load, parse, parse_contract, parse_expr, parse_program, parse_type, prepare
from .pretty import pretty_contract, pretty_expr, pretty_type
from .report import Entry, Report, build_report

__all__ = [
    "SourceUnit",
    "load",
    "parse",
    "parse_contract",
    "parse_expr",
    "parse_program",
    "parse_type",
    "prepare",
    "pretty_contract",
    "pretty_expr",
    "pretty_type",
    "Entry",
    "Report",
    "build_report",
]
