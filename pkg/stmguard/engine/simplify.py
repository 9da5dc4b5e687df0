"""Symbolic simplification of pure expressions.

The simplifier rewrites until a fixpoint or until its fuel runs out: beta reduction,
case of a known constructor, case-of-case, exception propagation, constant folding,
dead-branch pruning decided by :func:`arith_decide`, and bounded inlining of
function definitions. Inside a case alternative the scrutinee is known to match the
alternative's pattern; boolean scrutinees become facts of the path condition.
"""

import logging
from dataclasses import replace
from typing import FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple

from .arith import PathCondition, arith_decide
from .config import CheckConfig, DEFAULT_CONFIG
from .semantics import delta
from .syntax import (
    Alt, App, Case, Con, Exc, Expr, FALSE_CON, FunRef, IntLit, Lam, PrimOp, TRUE_CON, Var, fresh,
    free_vars, function_refs, get_prim_spec, map_children, mk_apps, mk_bool, rename_free,
    substitute, substitute_many, subterms, unspine,
)

logger = logging.getLogger(__name__)

MAX_ROUNDS = 8


def recursive_functions(defs: Mapping[str, Expr]) -> Set[str]:
    """Functions that can reach themselves through the call graph."""
    calls = {name: function_refs(body) & set(defs) for name, body in defs.items()}
    out: Set[str] = set()
    for name in defs:
        seen: Set[str] = set()
        stack = list(calls[name])
        while stack:
            g = stack.pop()
            if g == name:
                out.add(name)
                break
            if g not in seen:
                seen.add(g)
                stack.extend(calls.get(g, ()))
    return out


def crashy_functions(defs: Mapping[str, Expr]) -> FrozenSet[str]:
    """Functions whose body, or the body of a function they call, contains BAD."""
    crashy: Set[str] = {name for name, body in defs.items()
                        if any(isinstance(n, Exc) and n.kind == "BAD" for n in subterms(body))}
    changed = True
    while changed:
        changed = False
        for name, body in defs.items():
            if name not in crashy and function_refs(body) & crashy:
                crashy.add(name)
                changed = True
    return frozenset(crashy)


def _is_ground(e: Expr) -> bool:
    if isinstance(e, IntLit):
        return True
    if isinstance(e, Con):
        return all(_is_ground(a) for a in e.args)
    return False


class _Simplifier:
    def __init__(self, defs: Mapping[str, Expr], config: CheckConfig, crashy: Iterable[str]):
        self.defs = defs
        self.fuel = config.fuel
        self.inline_depth = config.inline_depth
        self.recursive = recursive_functions(defs)
        self.crashy = frozenset(crashy)
        self.exhausted = False

    def spend(self) -> bool:
        if self.fuel <= 0:
            self.exhausted = True
            return False
        self.fuel -= 1
        return True

    def decidable(self, e: Expr) -> bool:
        for n in subterms(e):
            if isinstance(n, Exc) or (isinstance(n, FunRef) and n.name in self.crashy):
                return False
        return True

    # -- main dispatch -----------------------------------------------------

    def simp(self, e: Expr, pc: PathCondition, chain: Tuple[str, ...]) -> Expr:
        if isinstance(e, (Var, IntLit, Exc)):
            return e
        if isinstance(e, FunRef):
            return self.call(e, [], pc, chain)
        if isinstance(e, Con):
            return replace(e, args=tuple(self.simp(a, pc, chain) for a in e.args)) if e.args else e
        if isinstance(e, Lam):
            var, body = self.unshadow(e.var, e.body, pc)
            return replace(e, var=var, body=self.simp(body, pc, chain))
        if isinstance(e, App):
            head, args = unspine(e)
            if isinstance(head, FunRef):
                return self.call(head, args, pc, chain)
            return self.apply(self.simp(e.fun, pc, chain), e.arg, pc, chain)
        if isinstance(e, Case):
            return self.case(e, pc, chain)
        if isinstance(e, PrimOp):
            return self.prim(e, pc, chain)
        return map_children(e, lambda c: self.simp(c, pc, chain))

    def unshadow(self, var: str, body: Expr, pc: PathCondition) -> Tuple[str, Expr]:
        """Rename a binder whose name occurs in a fact, so facts keep their meaning below it."""
        if var not in pc.names():
            return var, body
        new = fresh(var)
        return new, rename_free(body, var, new)

    # -- application and inlining -----------------------------------------

    def apply(self, fun: Expr, arg: Expr, pc: PathCondition, chain: Tuple[str, ...]) -> Expr:
        if isinstance(fun, Exc) and self.spend():
            return fun
        if isinstance(fun, Lam) and self.spend():
            return self.simp(substitute(fun.body, fun.var, arg), pc, chain)
        if isinstance(fun, Case) and self.spend():
            # (case s of {K xs -> b}) a  =  case s of {K xs -> b a}
            avoid = set(free_vars(arg))
            alts = []
            for alt in fun.alts:
                names, body = self.rename_binders(alt.vars, alt.body, avoid)
                alts.append(Alt(alt.con, names, App(body, arg)))
            return self.simp(Case(fun.scrutinee, tuple(alts)), pc, chain)
        return App(fun, self.simp(arg, pc, chain))

    def call(self, head: FunRef, args: List[Expr], pc: PathCondition, chain: Tuple[str, ...]) -> Expr:
        simplified = [self.simp(a, pc, chain) for a in args]
        body = self.defs.get(head.name)
        if body is not None and chain.count(head.name) < self.inline_depth:
            productive = head.name not in self.recursive or any(isinstance(a, (Con, IntLit)) for a in simplified)
            if productive and self.spend():
                logger.debug("inlining %s (depth %d)", head.name, chain.count(head.name) + 1)
                return self.simp(mk_apps(body, simplified), pc, chain + (head.name,))
        return mk_apps(head, simplified)

    @staticmethod
    def rename_binders(names: Tuple[str, ...], body: Expr, avoid: Set[str]) -> Tuple[Tuple[str, ...], Expr]:
        out = []
        for name in names:
            if name in avoid:
                new = fresh(name)
                body = rename_free(body, name, new)
                name = new
            out.append(name)
        return tuple(out), body

    # -- case --------------------------------------------------------------

    def case(self, e: Case, pc: PathCondition, chain: Tuple[str, ...]) -> Expr:
        s = self.simp(e.scrutinee, pc, chain)

        if isinstance(s, Exc) and self.spend():
            return s

        if isinstance(s, Con):
            for alt in e.alts:
                if alt.con == s.name and len(alt.vars) == len(s.args) and self.spend():
                    return self.simp(substitute_many(alt.body, dict(zip(alt.vars, s.args))), pc, chain)

        if isinstance(s, Case) and self.spend():
            # case (case s0 of {K xs -> b}) of alts  =  case s0 of {K xs -> case b of alts}
            avoid: Set[str] = set()
            for alt in e.alts:
                avoid.update(v for v in free_vars(alt.body) if v not in alt.vars)
            inner = []
            for alt in s.alts:
                names, body = self.rename_binders(alt.vars, alt.body, avoid)
                inner.append(Alt(alt.con, names, Case(body, e.alts)))
            return self.simp(Case(s.scrutinee, tuple(inner)), pc, chain)

        boolean = {a.con for a in e.alts} <= {TRUE_CON, FALSE_CON}
        if boolean and self.decidable(s):
            decided = arith_decide(s, pc)
            if decided is not None and self.spend():
                wanted = TRUE_CON if decided else FALSE_CON
                for alt in e.alts:
                    if alt.con == wanted:
                        return self.simp(alt.body, pc, chain)

        alts = []
        for alt in e.alts:
            names, body = alt.vars, alt.body
            for name in names:
                if name in pc.names() or name in free_vars(s):
                    new = fresh(name)
                    body = rename_free(body, name, new)
                    names = tuple(new if n == name else n for n in names)
            pattern = Con(alt.con, tuple(Var(n) for n in names))
            if isinstance(s, Var):
                body = substitute(body, s.name, pattern)
            else:
                body = _replace_occurrences(body, s, pattern)
            inner_pc = pc
            if boolean and self.decidable(s):
                inner_pc = pc.assume(s, alt.con == TRUE_CON)
            alts.append(Alt(alt.con, names, self.simp(body, inner_pc, chain)))
        return replace(e, scrutinee=s, alts=tuple(alts))

    # -- primitives --------------------------------------------------------

    def prim(self, e: PrimOp, pc: PathCondition, chain: Tuple[str, ...]) -> Expr:
        args = [self.simp(a, pc, chain) for a in e.args]
        for index, arg in enumerate(args):
            if isinstance(arg, Exc):
                # Operands are evaluated left to right; an earlier operand may itself fail first.
                if all(_is_ground(a) for a in args[:index]) and self.spend():
                    return arg
                break

        if all(_is_ground(a) for a in args) and self.spend():
            return delta(e.op, args)

        node = replace(e, args=tuple(args))
        spec = get_prim_spec(e.op)
        if spec is not None and spec.result == "bool" and self.decidable(node):
            decided = arith_decide(node, pc)
            if decided is not None and self.spend():
                return mk_bool(decided)
        return node

    def run(self, e: Expr, pc: PathCondition) -> Expr:
        for _ in range(MAX_ROUNDS):
            out = self.simp(e, pc, ())
            if out == e or self.exhausted:
                e = out
                break
            e = out
        logger.debug("simplifier stopped with %d fuel left%s", self.fuel,
                     " (exhausted)" if self.exhausted else "")
        return e


def _replace_occurrences(e: Expr, target: Expr, replacement: Expr) -> Expr:
    """Replace occurrences of target not under a binder of one of its free variables."""
    if e == target:
        return replacement
    names = set(free_vars(target))
    if isinstance(e, Lam) and e.var in names:
        return e
    if isinstance(e, Case):
        return replace(
            e,
            scrutinee=_replace_occurrences(e.scrutinee, target, replacement),
            alts=tuple(a if names & set(a.vars) else replace(a, body=_replace_occurrences(a.body, target, replacement))
                       for a in e.alts),
        )
    return map_children(e, lambda c: _replace_occurrences(c, target, replacement))


def simplify(e: Expr, defs: Optional[Mapping[str, Expr]] = None, config: CheckConfig = DEFAULT_CONFIG,
             crashy: Iterable[str] = (), pc: Optional[PathCondition] = None) -> Expr:
    """Simplify a pure expression using the definitions in defs.

    Running out of fuel is not an error; the partially simplified expression is returned.
    """
    defs = defs or {}
    return _Simplifier(defs, config, crashy).run(e, pc or PathCondition())

