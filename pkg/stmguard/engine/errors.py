"""Error types for stmguard."""

from typing import Optional


class StmError(Exception):
    """Raised when a program cannot be parsed, typed, transformed or checked."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None,
                 column: Optional[int] = None, offset: Optional[int] = None):
        self.message = message
        self.path = path
        self.line = line
        self.column = column
        self.offset = offset  # byte offset into the source; the frontend resolves it to line/column
        super().__init__(self.format_message())

    def format_message(self) -> str:
        """Format the error message with its source location."""
        parts = []
        if self.path:
            parts.append(f"File: {self.path}")
        if self.line is not None:
            if self.column is not None:
                parts.append(f"Line {self.line}, column {self.column}")
            else:
                parts.append(f"Line {self.line}")

        location = " | ".join(parts)
        if location:
            return f"{location}\n  Error: {self.message}"
        return self.message

    def at(self, path: Optional[str], text: Optional[str] = None) -> "StmError":
        """Attach a file path (and, given the source text, a line/column) to an error raised without one."""
        if path and not self.path:
            self.path = path
        if text is not None and self.line is None and self.offset is not None:
            prefix = text[: self.offset]
            self.line = prefix.count("\n") + 1
            self.column = self.offset - (prefix.rfind("\n") + 1) + 1
        self.args = (self.format_message(),)
        return self


class ParseError(StmError):
    """Syntax errors, duplicate declarations and unknown identifiers."""


class DesugarError(StmError):
    """Malformed do-blocks."""


class CaseCompletionError(StmError):
    """Case alternatives mixing datatypes or repeating a constructor."""


class TypeCheckError(StmError):
    """Ill-typed programs and ill-formed STM payloads."""


class ContractError(StmError):
    """Ill-typed contracts, missing contracts and malformed environment tuples."""


class TransformError(StmError):
    """Inputs the T-transformation, Γ-expansion or specialization cannot handle."""


class CheckError(StmError):
    """Programs the checker cannot verify as posed."""


class StuckError(StmError):
    """Evaluation reached a non-value with no applicable reduction rule."""
