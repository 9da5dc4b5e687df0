"""Shared fixtures: sample programs and a compile helper."""

from pathlib import Path

import pytest

from stmguard.engine.syntax import Program
from stmguard.frontend.parser import load, parse, prepare

PROGRAMS = Path(__file__).resolve().parent.parent / "programs"


@pytest.fixture
def programs_dir() -> Path:
    return PROGRAMS


@pytest.fixture
def program_path():
    def _path(name: str) -> Path:
        return PROGRAMS / f"{name}.stm"
    return _path


@pytest.fixture
def sample():
    """Load, type-check and specialize one of the shipped programs."""
    def _sample(name: str) -> Program:
        return prepare(load(PROGRAMS / f"{name}.stm").program)
    return _sample


@pytest.fixture
def compile_source():
    """Parse, type-check and specialize program text."""
    def _compile(text: str) -> Program:
        return prepare(parse(text, "test.stm").program)
    return _compile
