"""Abstract syntax of the core STM language, desugaring, substitution and case-completion."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple, Union

from .errors import CaseCompletionError, DesugarError

if TYPE_CHECKING:
    from .contracts import Contract, TVarSpecContract
    from .typecheck import Type


# ---------------------------------------------------------------------------
# Primitive operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PrimSpec:
    """Specification for a primitive operator."""
    name: str
    arity: int
    arg_type: str  # 'int', 'bool' or 'eq' (any first-order data)
    result: str    # 'int' or 'bool'
    description: str
    infix_level: int = 0  # binding strength when printed infix; 0 for prefix operators


PRIM_SPECS: Dict[str, PrimSpec] = {
    "+": PrimSpec("+", 2, "int", "int", "Integer addition", 7),
    "-": PrimSpec("-", 2, "int", "int", "Integer subtraction", 7),
    "*": PrimSpec("*", 2, "int", "int", "Integer multiplication", 8),
    "==": PrimSpec("==", 2, "eq", "bool", "Structural equality on first-order data", 5),
    ">": PrimSpec(">", 2, "int", "bool", "Greater than", 5),
    ">=": PrimSpec(">=", 2, "int", "bool", "Greater than or equal", 5),
    "<": PrimSpec("<", 2, "int", "bool", "Less than", 5),
    "<=": PrimSpec("<=", 2, "int", "bool", "Less than or equal", 5),
    "&&": PrimSpec("&&", 2, "bool", "bool", "Conjunction (strict in both operands)", 4),
    "||": PrimSpec("||", 2, "bool", "bool", "Disjunction (strict in both operands)", 3),
    "not": PrimSpec("not", 1, "bool", "bool", "Negation"),
}


def get_prim_spec(name: str) -> Optional[PrimSpec]:
    """Get the specification for a primitive operator."""
    return PRIM_SPECS.get(name)


# ---------------------------------------------------------------------------
# Fresh names
# ---------------------------------------------------------------------------

_fresh_counter = itertools.count(1)
_SUFFIX = re.compile(r"'\d+$")


def fresh(base: str) -> str:
    """Return a name never produced before, of the form ``base'k``."""
    stem = _SUFFIX.sub("", base) or "v"
    return f"{stem}'{next(_fresh_counter)}"


def reset_fresh() -> None:
    """Restart the fresh-name counter (one check run, one numbering)."""
    global _fresh_counter
    _fresh_counter = itertools.count(1)


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Expr:
    # Cached type from the type checker and source byte offset; neither takes part in equality.
    ty: Optional["Type"] = field(default=None, compare=False, repr=False, kw_only=True)
    loc: Optional[int] = field(default=None, compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Con(Expr):
    name: str
    args: Tuple[Expr, ...] = ()


@dataclass(frozen=True)
class IntLit(Expr):
    value: int


@dataclass(frozen=True)
class Lam(Expr):
    var: str
    body: Expr


@dataclass(frozen=True)
class Exc(Expr):
    kind: str  # "BAD" or "UNR"


@dataclass(frozen=True)
class App(Expr):
    fun: Expr
    arg: Expr


@dataclass(frozen=True)
class FunRef(Expr):
    name: str


@dataclass(frozen=True)
class Alt:
    con: str
    vars: Tuple[str, ...]
    body: Expr


@dataclass(frozen=True)
class Case(Expr):
    scrutinee: Expr
    alts: Tuple[Alt, ...]


@dataclass(frozen=True)
class PrimOp(Expr):
    op: str
    args: Tuple[Expr, ...]


@dataclass(frozen=True)
class ReadTVar(Expr):
    tvar: str


@dataclass(frozen=True)
class WriteTVar(Expr):
    tvar: str
    expr: Expr


@dataclass(frozen=True)
class Bind(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Return(Expr):
    expr: Expr


@dataclass(frozen=True)
class OrElse(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Retry(Expr):
    pass


@dataclass(frozen=True)
class TVarRef(Expr):
    """A TVar passed as an argument to a TVar-typed parameter (removed by specialization)."""
    name: str


BAD = Exc("BAD")
UNR = Exc("UNR")

STM_NODES = (ReadTVar, WriteTVar, Bind, Return, OrElse, Retry)


# ---------------------------------------------------------------------------
# Surface-only forms (removed by desugar)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DoBind:
    var: str
    expr: Expr


@dataclass(frozen=True)
class DoLet:
    var: str
    expr: Expr


@dataclass(frozen=True)
class DoExpr:
    expr: Expr


Stmt = Union[DoBind, DoLet, DoExpr]


@dataclass(frozen=True)
class Do(Expr):
    stmts: Tuple[Stmt, ...]


@dataclass(frozen=True)
class Let(Expr):
    var: str
    value: Expr
    body: Expr


@dataclass(frozen=True)
class LamPat(Expr):
    """``\\(x1,...,xn) -> body``."""
    vars: Tuple[str, ...]
    body: Expr


# ---------------------------------------------------------------------------
# Built-in constructors
# ---------------------------------------------------------------------------

UNIT_CON = "()"
NIL_CON = "[]"
CONS_CON = "(:)"
TRUE_CON = "True"
FALSE_CON = "False"


def tuple_name(arity: int) -> str:
    """Constructor name of the tuple of the given arity (``()`` for 0)."""
    if arity == 0:
        return UNIT_CON
    return "(" + "," * (arity - 1) + ")"


def tuple_arity(name: str) -> Optional[int]:
    """Arity of a tuple constructor name, or None for other constructors."""
    if name == UNIT_CON:
        return 0
    if len(name) >= 3 and name[0] == "(" and name[-1] == ")" and set(name[1:-1]) == {","}:
        return len(name) - 1
    return None


def mk_tuple(items: Sequence[Expr]) -> Expr:
    """Build a tuple; a 1-tuple is the bare component."""
    if len(items) == 1:
        return items[0]
    return Con(tuple_name(len(items)), tuple(items))


def mk_bool(value: bool) -> Con:
    return Con(TRUE_CON if value else FALSE_CON)


def mk_list(items: Sequence[Expr]) -> Expr:
    out: Expr = Con(NIL_CON)
    for item in reversed(items):
        out = Con(CONS_CON, (item, out))
    return out


def mk_unit() -> Con:
    return Con(UNIT_CON)


def mk_apps(fun: Expr, args: Iterable[Expr]) -> Expr:
    for arg in args:
        fun = App(fun, arg)
    return fun


def mk_lams(vars: Iterable[str], body: Expr) -> Expr:
    for v in reversed(list(vars)):
        body = Lam(v, body)
    return body


def unspine(e: Expr) -> Tuple[Expr, List[Expr]]:
    """Split ``f a1 ... an`` into ``(f, [a1, ..., an])``."""
    args: List[Expr] = []
    while isinstance(e, App):
        args.append(e.arg)
        e = e.fun
    args.reverse()
    return e, args


def is_true(e: Expr) -> bool:
    return isinstance(e, Con) and e.name == TRUE_CON and not e.args


def is_false(e: Expr) -> bool:
    return isinstance(e, Con) and e.name == FALSE_CON and not e.args


# ---------------------------------------------------------------------------
# Program
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstructorSig:
    """A datatype and its constructors with their arities (and field types when declared)."""
    datatype: str
    constructors: Tuple[Tuple[str, int], ...]
    field_types: Tuple[Tuple["Type", ...], ...] = ()

    def arity(self, con: str) -> int:
        for name, arity in self.constructors:
            if name == con:
                return arity
        raise KeyError(con)

    def fields(self, con: str) -> Tuple["Type", ...]:
        for (name, _), types in zip(self.constructors, self.field_types):
            if name == con:
                return types
        return ()


BUILTIN_SIGS: Tuple[ConstructorSig, ...] = (
    ConstructorSig("Bool", ((TRUE_CON, 0), (FALSE_CON, 0))),
    ConstructorSig("List", ((NIL_CON, 0), (CONS_CON, 2))),
    ConstructorSig("Unit", ((UNIT_CON, 0),)),
)


class Constructors:
    """Constructor lookup over the built-in and declared datatypes; tuples of any arity included."""

    def __init__(self, sigs: Iterable[ConstructorSig] = ()):
        self.sigs: Dict[str, ConstructorSig] = {}
        self._by_con: Dict[str, ConstructorSig] = {}
        for sig in list(BUILTIN_SIGS) + list(sigs):
            self.sigs[sig.datatype] = sig
            for con, _ in sig.constructors:
                self._by_con[con] = sig

    def lookup(self, con: str) -> Optional[ConstructorSig]:
        sig = self._by_con.get(con)
        if sig is not None:
            return sig
        arity = tuple_arity(con)
        if arity is not None and arity >= 2:
            return ConstructorSig(f"Tuple{arity}", ((con, arity),))
        return None

    def __contains__(self, con: str) -> bool:
        return self.lookup(con) is not None


@dataclass(frozen=True)
class TVarDecl:
    name: str
    type: "Type"
    init: Optional[Expr] = None
    loc: Optional[int] = field(default=None, compare=False)


@dataclass(frozen=True)
class FunctionDef:
    name: str
    body: Expr
    type: Optional["Type"] = None
    contract: Optional[Union["Contract", "TVarSpecContract"]] = None
    loc: Optional[int] = field(default=None, compare=False)


@dataclass(frozen=True)
class Transaction:
    name: str
    params: Tuple[Tuple[str, "Contract"], ...]
    body: Expr
    param_types: Tuple["Type", ...] = ()  # filled in by the type checker
    loc: Optional[int] = field(default=None, compare=False)


@dataclass(frozen=True)
class Program:
    tvars: Tuple[TVarDecl, ...] = ()
    datatypes: Tuple[ConstructorSig, ...] = ()
    functions: Mapping[str, FunctionDef] = field(default_factory=dict)
    invariant: Optional[str] = None
    transactions: Mapping[str, Transaction] = field(default_factory=dict)

    @property
    def tvar_names(self) -> List[str]:
        return [d.name for d in self.tvars]

    def tvar_types(self) -> List["Type"]:
        return [d.type for d in self.tvars]

    def tvar(self, name: str) -> Optional[TVarDecl]:
        for decl in self.tvars:
            if decl.name == name:
                return decl
        return None

    def constructors(self) -> Constructors:
        return Constructors(self.datatypes)

    def definitions(self) -> Dict[str, Expr]:
        """Δ: function names to bodies."""
        return {name: f.body for name, f in self.functions.items()}


# ---------------------------------------------------------------------------
# Generic traversal
# ---------------------------------------------------------------------------

def children(e: Expr) -> List[Expr]:
    """Direct subexpressions of e, left to right."""
    if isinstance(e, Con):
        return list(e.args)
    if isinstance(e, Lam):
        return [e.body]
    if isinstance(e, App):
        return [e.fun, e.arg]
    if isinstance(e, Case):
        return [e.scrutinee] + [alt.body for alt in e.alts]
    if isinstance(e, PrimOp):
        return list(e.args)
    if isinstance(e, WriteTVar):
        return [e.expr]
    if isinstance(e, (Bind, OrElse)):
        return [e.left, e.right]
    if isinstance(e, Return):
        return [e.expr]
    if isinstance(e, Let):
        return [e.value, e.body]
    if isinstance(e, LamPat):
        return [e.body]
    if isinstance(e, Do):
        return [s.expr for s in e.stmts]
    return []


def map_children(e: Expr, f: Callable[[Expr], Expr]) -> Expr:
    """Rebuild e with f applied to each direct subexpression; annotations are kept."""
    if isinstance(e, Con):
        return replace(e, args=tuple(f(a) for a in e.args)) if e.args else e
    if isinstance(e, Lam):
        return replace(e, body=f(e.body))
    if isinstance(e, App):
        return replace(e, fun=f(e.fun), arg=f(e.arg))
    if isinstance(e, Case):
        return replace(e, scrutinee=f(e.scrutinee), alts=tuple(replace(a, body=f(a.body)) for a in e.alts))
    if isinstance(e, PrimOp):
        return replace(e, args=tuple(f(a) for a in e.args))
    if isinstance(e, WriteTVar):
        return replace(e, expr=f(e.expr))
    if isinstance(e, (Bind, OrElse)):
        return replace(e, left=f(e.left), right=f(e.right))
    if isinstance(e, Return):
        return replace(e, expr=f(e.expr))
    if isinstance(e, Let):
        return replace(e, value=f(e.value), body=f(e.body))
    if isinstance(e, LamPat):
        return replace(e, body=f(e.body))
    if isinstance(e, Do):
        return replace(e, stmts=tuple(replace(s, expr=f(s.expr)) for s in e.stmts))
    return e


def subterms(e: Expr) -> Iterator[Expr]:
    """Pre-order walk over e and all its subexpressions."""
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def size(e: Expr) -> int:
    return sum(1 for _ in subterms(e))


def contains_exc(e: Expr, kind: str = "BAD") -> bool:
    return any(isinstance(n, Exc) and n.kind == kind for n in subterms(e))


def function_refs(e: Expr) -> Set[str]:
    return {n.name for n in subterms(e) if isinstance(n, FunRef)}


# ---------------------------------------------------------------------------
# Free variables, purity
# ---------------------------------------------------------------------------

def free_vars(e: Expr) -> List[str]:
    """Free lambda-variables of e in first-occurrence order."""
    seen: List[str] = []

    def walk(node: Expr, bound: frozenset) -> None:
        if isinstance(node, Var):
            if node.name not in bound and node.name not in seen:
                seen.append(node.name)
        elif isinstance(node, Lam):
            walk(node.body, bound | {node.var})
        elif isinstance(node, Case):
            walk(node.scrutinee, bound)
            for alt in node.alts:
                walk(alt.body, bound | set(alt.vars))
        elif isinstance(node, LamPat):
            walk(node.body, bound | set(node.vars))
        elif isinstance(node, Let):
            walk(node.value, bound)
            walk(node.body, bound | {node.var})
        elif isinstance(node, Do):
            inner = bound
            for stmt in node.stmts:
                walk(stmt.expr, inner)
                if isinstance(stmt, (DoBind, DoLet)):
                    inner = inner | {stmt.var}
        else:
            for child in children(node):
                walk(child, bound)

    walk(e, frozenset())
    return seen


def is_free(name: str, e: Expr) -> bool:
    return name in free_vars(e)


def is_pure(e: Expr) -> bool:
    """True iff e contains no STM construct."""
    return not any(isinstance(n, STM_NODES) for n in subterms(e))


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------

def substitute(e: Expr, var: str, replacement: Expr) -> Expr:
    """Capture-avoiding ``e[replacement/var]``."""
    return substitute_many(e, {var: replacement})


def substitute_many(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Simultaneous capture-avoiding substitution."""
    if not mapping:
        return e
    avoid: Set[str] = set()
    for r in mapping.values():
        avoid.update(free_vars(r))
    return _subst(e, dict(mapping), avoid)


def _subst(e: Expr, mapping: Dict[str, Expr], avoid: Set[str]) -> Expr:
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Lam):
        inner = {k: v for k, v in mapping.items() if k != e.var}
        if not inner:
            return e
        var, body = _avoid_capture([e.var], e.body, inner, avoid)
        return replace(e, var=var[0], body=_subst(body, inner, avoid))
    if isinstance(e, Case):
        scrutinee = _subst(e.scrutinee, mapping, avoid)
        alts = []
        for alt in e.alts:
            inner = {k: v for k, v in mapping.items() if k not in alt.vars}
            if not inner:
                alts.append(alt)
                continue
            vars_, body = _avoid_capture(list(alt.vars), alt.body, inner, avoid)
            alts.append(Alt(alt.con, tuple(vars_), _subst(body, inner, avoid)))
        return replace(e, scrutinee=scrutinee, alts=tuple(alts))
    if isinstance(e, (Let, LamPat, Do)):
        return _subst(desugar(e), mapping, avoid)
    return map_children(e, lambda c: _subst(c, mapping, avoid))


def _avoid_capture(binders: List[str], body: Expr, mapping: Dict[str, Expr], avoid: Set[str]) -> Tuple[List[str], Expr]:
    clash = [b for b in binders if b in avoid]
    if not clash:
        return binders, body
    body_free = set(free_vars(body))
    if not any(k in body_free for k in mapping):
        return binders, body
    renaming: Dict[str, Expr] = {}
    out = []
    for b in binders:
        if b in avoid:
            new = fresh(b)
            renaming[b] = Var(new)
            out.append(new)
        else:
            out.append(b)
    return out, substitute_many(body, renaming)


def rename_free(e: Expr, old: str, new: str) -> Expr:
    return substitute(e, old, Var(new))


# ---------------------------------------------------------------------------
# Alpha-equivalence
# ---------------------------------------------------------------------------

def alpha_equal(a: Expr, b: Expr) -> bool:
    """Structural equality up to renaming of bound variables."""
    return _alpha(a, b, {}, {}, 0)


def _alpha(a: Expr, b: Expr, env_a: Dict[str, int], env_b: Dict[str, int], depth: int) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, Var):
        ia, ib = env_a.get(a.name), env_b.get(b.name)
        if ia is None and ib is None:
            return a.name == b.name
        return ia == ib
    if isinstance(a, Lam):
        return _alpha(a.body, b.body, {**env_a, a.var: depth}, {**env_b, b.var: depth}, depth + 1)
    if isinstance(a, Case):
        if len(a.alts) != len(b.alts) or not _alpha(a.scrutinee, b.scrutinee, env_a, env_b, depth):
            return False
        for alt_a, alt_b in zip(a.alts, b.alts):
            if alt_a.con != alt_b.con or len(alt_a.vars) != len(alt_b.vars):
                return False
            ea, eb, d = dict(env_a), dict(env_b), depth
            for va, vb in zip(alt_a.vars, alt_b.vars):
                ea[va], eb[vb], d = d, d, d + 1
            if not _alpha(alt_a.body, alt_b.body, ea, eb, d):
                return False
        return True
    if isinstance(a, Con):
        return a.name == b.name and len(a.args) == len(b.args) and all(
            _alpha(x, y, env_a, env_b, depth) for x, y in zip(a.args, b.args))
    if isinstance(a, PrimOp):
        return a.op == b.op and len(a.args) == len(b.args) and all(
            _alpha(x, y, env_a, env_b, depth) for x, y in zip(a.args, b.args))
    if isinstance(a, (ReadTVar,)):
        return a.tvar == b.tvar
    if isinstance(a, WriteTVar):
        return a.tvar == b.tvar and _alpha(a.expr, b.expr, env_a, env_b, depth)
    if isinstance(a, (IntLit, Exc, FunRef, Retry, TVarRef)):
        return a == b
    ca, cb = children(a), children(b)
    return len(ca) == len(cb) and all(_alpha(x, y, env_a, env_b, depth) for x, y in zip(ca, cb))


# ---------------------------------------------------------------------------
# Desugaring
# ---------------------------------------------------------------------------

def desugar(e: Expr) -> Expr:
    """Expand do-blocks, let-bindings and tuple-pattern lambdas, innermost first."""
    if isinstance(e, Do):
        return _desugar_do(list(e.stmts), e)
    if isinstance(e, Let):
        return App(Lam(e.var, desugar(e.body)), desugar(e.value), loc=e.loc)
    if isinstance(e, LamPat):
        return tuple_lambda(e.vars, desugar(e.body), loc=e.loc)
    return map_children(e, desugar)


def _desugar_do(stmts: List[Stmt], node: Do) -> Expr:
    if not stmts:
        raise DesugarError("empty do-block")
    head, rest = stmts[0], stmts[1:]
    if not rest:
        if not isinstance(head, DoExpr):
            raise DesugarError("the last statement of a do-block must be an expression")
        return desugar(head.expr)
    tail = _desugar_do(rest, node)
    if isinstance(head, DoBind):
        return Bind(desugar(head.expr), Lam(head.var, tail), loc=node.loc)
    if isinstance(head, DoLet):
        return App(Lam(head.var, tail), desugar(head.expr), loc=node.loc)
    return Bind(desugar(head.expr), Lam(fresh("_"), tail), loc=node.loc)


def tuple_lambda(vars: Sequence[str], body: Expr, loc: Optional[int] = None) -> Expr:
    """``\\(x1,...,xn) -> body`` as ``\\x -> case x of {(x1,...,xn) -> body}``."""
    if len(vars) == 1:
        return Lam(vars[0], body, loc=loc)
    x = fresh("p")
    return Lam(x, Case(Var(x), (Alt(tuple_name(len(vars)), tuple(vars), body),)), loc=loc)


# ---------------------------------------------------------------------------
# Case completion
# ---------------------------------------------------------------------------

def complete_cases(e: Expr, sigs: Union[Constructors, Iterable[ConstructorSig]]) -> Expr:
    """Add a ``-> BAD`` alternative for every constructor a case expression leaves out."""
    table = sigs if isinstance(sigs, Constructors) else Constructors(sigs)

    def go(node: Expr) -> Expr:
        node = map_children(node, go)
        if isinstance(node, Case):
            return _complete(node, table)
        return node

    return go(e)


def _complete(node: Case, table: Constructors) -> Case:
    if not node.alts:
        return node
    datatypes = []
    seen: Set[str] = set()
    sig: Optional[ConstructorSig] = None
    for alt in node.alts:
        alt_sig = table.lookup(alt.con)
        if alt_sig is None:
            raise CaseCompletionError(f"unknown constructor '{alt.con}' in case alternative")
        if alt.con in seen:
            raise CaseCompletionError(f"duplicate alternative for constructor '{alt.con}'")
        seen.add(alt.con)
        if alt_sig.arity(alt.con) != len(alt.vars):
            raise CaseCompletionError(
                f"constructor '{alt.con}' expects {alt_sig.arity(alt.con)} pattern variables, got {len(alt.vars)}")
        if alt_sig.datatype not in datatypes:
            datatypes.append(alt_sig.datatype)
        sig = alt_sig
    if len(datatypes) > 1:
        raise CaseCompletionError(f"case alternatives mix constructors of {', '.join(datatypes)}")
    assert sig is not None
    missing = [
        Alt(con, tuple(fresh("x") for _ in range(arity)), BAD)
        for con, arity in sig.constructors if con not in seen
    ]
    if not missing:
        return node
    return replace(node, alts=node.alts + tuple(missing))
