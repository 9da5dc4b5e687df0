"""Arithmetic and boolean reasoning for the simplifier, backed by z3.

Boolean goals are translated into quantifier-free linear integer arithmetic: integer
subterms the translation does not understand (function calls, variables, projections)
become uninterpreted integer atoms keyed by their structure, so equal subterms share an
atom; other boolean subterms become propositional atoms.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Set, Tuple

import z3

from .syntax import (
    Case, Con, Exc, Expr, FALSE_CON, IntLit, PrimOp, TRUE_CON, free_vars, is_false, is_true,
)
from .typecheck import TInt

logger = logging.getLogger(__name__)

SOLVER_TIMEOUT_MS = 2000
_ARITH_OPS = ("+", "-", "*")
_COMPARISONS = (">", ">=", "<", "<=")


@dataclass(frozen=True)
class PathCondition:
    """Boolean facts known to hold on the current branch."""
    facts: Tuple[Expr, ...] = ()

    def assume(self, fact: Expr, holds: bool = True) -> "PathCondition":
        if not holds:
            fact = PrimOp("not", (fact,))
        if is_true(fact) or is_false(fact) or fact in self.facts:
            return self
        return PathCondition(self.facts + (fact,))

    def names(self) -> Set[str]:
        out: Set[str] = set()
        for fact in self.facts:
            out.update(free_vars(fact))
        return out


class _Outside(Exception):
    """The goal leaves the decidable fragment."""


class _Translator:
    def __init__(self) -> None:
        self.int_atoms: Dict[Expr, z3.ArithRef] = {}
        self.bool_atoms: Dict[Expr, z3.BoolRef] = {}

    def int_atom(self, e: Expr) -> z3.ArithRef:
        if e not in self.int_atoms:
            self.int_atoms[e] = z3.Int(f"i{len(self.int_atoms)}")
        return self.int_atoms[e]

    def bool_atom(self, e: Expr) -> z3.BoolRef:
        if e not in self.bool_atoms:
            self.bool_atoms[e] = z3.Bool(f"b{len(self.bool_atoms)}")
        return self.bool_atoms[e]

    def integer(self, e: Expr) -> z3.ArithRef:
        if isinstance(e, Exc):
            raise _Outside()
        if isinstance(e, IntLit):
            return z3.IntVal(e.value)
        if isinstance(e, PrimOp) and e.op in _ARITH_OPS:
            a, b = (self.integer(x) for x in e.args)
            if e.op == "+":
                return a + b
            if e.op == "-":
                return a - b
            return a * b
        if _bool_case(e):
            return z3.If(self.boolean(e.scrutinee), self.integer(_alt(e, TRUE_CON)), self.integer(_alt(e, FALSE_CON)))
        return self.int_atom(e)

    def boolean(self, e: Expr) -> z3.BoolRef:
        if isinstance(e, Exc):
            raise _Outside()
        if is_true(e):
            return z3.BoolVal(True)
        if is_false(e):
            return z3.BoolVal(False)
        if isinstance(e, PrimOp):
            if e.op == "not":
                return z3.Not(self.boolean(e.args[0]))
            if e.op == "&&":
                return z3.And(*(self.boolean(a) for a in e.args))
            if e.op == "||":
                return z3.Or(*(self.boolean(a) for a in e.args))
            if e.op in _COMPARISONS:
                a, b = (self.integer(x) for x in e.args)
                return {">": a > b, ">=": a >= b, "<": a < b, "<=": a <= b}[e.op]
            if e.op == "==":
                return self.equality(*e.args)
        if _bool_case(e):
            return z3.If(self.boolean(e.scrutinee), self.boolean(_alt(e, TRUE_CON)), self.boolean(_alt(e, FALSE_CON)))
        return self.bool_atom(e)

    def equality(self, a: Expr, b: Expr) -> z3.BoolRef:
        if _is_bool_literal(a) or _is_bool_literal(b):
            return self.boolean(a) == self.boolean(b)
        if isinstance(a, Con) and isinstance(b, Con):
            if a.name != b.name or len(a.args) != len(b.args):
                return z3.BoolVal(False)
            return z3.And(z3.BoolVal(True), *(self.equality(x, y) for x, y in zip(a.args, b.args)))
        if _integer_like(a) or _integer_like(b) or not (isinstance(a, Con) or isinstance(b, Con)):
            # Equality is an equivalence relation on any datatype, so data atoms may share the integer encoding.
            return self.integer(a) == self.integer(b)
        return self.bool_atom(PrimOp("==", tuple(sorted((a, b), key=repr))))


def _is_bool_literal(e: Expr) -> bool:
    return is_true(e) or is_false(e)


def _integer_like(e: Expr) -> bool:
    return isinstance(e, IntLit) or (isinstance(e, PrimOp) and e.op in _ARITH_OPS) or isinstance(e.ty, TInt)


def _bool_case(e: Expr) -> bool:
    return (isinstance(e, Case) and len(e.alts) == 2
            and {a.con for a in e.alts} == {TRUE_CON, FALSE_CON})


def _alt(e: Case, con: str) -> Expr:
    for alt in e.alts:
        if alt.con == con:
            return alt.body
    raise KeyError(con)


def _check(solver: z3.Solver, extra: z3.BoolRef) -> z3.CheckSatResult:
    solver.push()
    solver.add(extra)
    try:
        return solver.check()
    finally:
        solver.pop()


def arith_decide(goal: Expr, pc: Optional[PathCondition] = None) -> Optional[bool]:
    """True if goal holds under every integer assignment consistent with pc, False if it
    holds under none, None when undecided or outside the fragment."""
    pc = pc or PathCondition()
    translator = _Translator()
    try:
        target = translator.boolean(goal)
        facts = [translator.boolean(f) for f in pc.facts]
    except _Outside as exc:
        logger.debug("not decidable: %s", exc)
        return None

    solver = z3.Solver()
    solver.set("timeout", SOLVER_TIMEOUT_MS)
    solver.add(*facts)
    if _check(solver, z3.Not(target)) == z3.unsat:
        return True
    if _check(solver, target) == z3.unsat:
        return False
    return None

