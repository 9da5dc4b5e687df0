"""stmguard checking engine."""

from .checker import Checker, Safe, Unknown, Unsafe, check_all, check_transaction, modular_check_function
from .config import CheckConfig, DEFAULT_CONFIG
from .errors import StmError
from .semantics import evaluate
from .simplify import simplify
from .typecheck import check_program
from .transform import specialize_program

__all__ = [
    "Checker", "Safe", "Unknown", "Unsafe", "check_all", "check_transaction", "modular_check_function",
    "CheckConfig", "DEFAULT_CONFIG", "StmError", "evaluate", "simplify", "check_program", "specialize_program",
]
