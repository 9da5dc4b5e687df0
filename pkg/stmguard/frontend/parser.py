"""Parser for ``.stm`` programs.

A program is a sequence of declarations, each starting in the first column:

    tvar shSum :: Int = 0
    data Msg = Hello | Text Int
    invariant inv
    inv :: ([Int], Int) -> Bool
    inv (tab, s) = sum tab == s
    contract add :: {x | True} -> {(tab, s) | sum tab == s} -> {(tab, s) | sum tab == s}
    transaction addTab(n :: Ok) = do { tab <- readTVar shTab; writeTVar shTab (n : tab) }

Lines that start with whitespace continue the previous declaration; ``--`` starts a comment.
Each declaration is parsed with the lark grammar below; the tree is turned into surface
syntax by ``_Builder``, then names are resolved and the result desugared into core terms.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedInput, VisitError

from ..engine.contracts import (
    ANY, ArgParam, Contract, DepFun, Pred, StmOp, TupleContract, TVarParam, TVarSpecContract, ok,
    pattern_pred, pred_pattern, scope_pattern,
)
from ..engine.errors import ParseError, StmError
from ..engine.syntax import (
    Alt, App, Bind, Case, Con, CONS_CON, ConstructorSig, Constructors, Do, DoBind, DoExpr, DoLet,
    Exc, Expr, FALSE_CON, FunctionDef, FunRef, IntLit, Lam, LamPat, Let, NIL_CON, OrElse, PrimOp,
    Program, ReadTVar, Retry, Return, TRUE_CON, TVarDecl, TVarRef, Transaction, UNIT_CON, Var,
    WriteTVar, complete_cases, desugar, fresh, mk_apps, mk_list, reset_fresh, substitute,
    tuple_name,
)
from ..engine.transform import specialize_program
from ..engine.typecheck import BOOL, INT, UNIT, TData, TFun, TList, TStm, TTVar, Type, check_program, tuple_type

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Grammar
# ---------------------------------------------------------------------------

GRAMMAR = r"""
decl: "tvar" NAME "::" type ("=" expr)?                 -> tvar_decl
    | "data" CON "=" constructor ("|" constructor)*    -> data_decl
    | "invariant" NAME                                 -> invariant_decl
    | "contract" NAME "::" contract                    -> contract_decl
    | "transaction" NAME params? "=" expr              -> transaction_decl
    | NAME "::" type                                   -> signature
    | NAME binder* "=" expr                            -> definition

constructor: CON atype*
params: "(" ")"
      | "(" param ("," param)* ")"
param: NAME "::" contract

// types

?type: btype
     | btype "->" type                  -> fun_ty
?btype: atype
      | "STM" atype                     -> stm_ty
      | "TVar" atype                    -> tvar_ty
?atype: "Int"                           -> int_ty
      | "Bool"                          -> bool_ty
      | CON                             -> data_ty
      | "[" type "]"                    -> list_ty
      | "(" ")"                         -> unit_ty
      | "(" type ("," type)* ")"        -> tuple_ty

// expressions, loosest binding first; a lambda, let or if extends as far right as it can

?expr: bind
?bind: bind ">>=" orelse                -> bind_op
     | orelse
?orelse: disj "`" "orElse" "`" orelse   -> or_else
       | disj
?disj: conj "||" disj                   -> or_op
     | conj
?conj: cmp "&&" conj                    -> and_op
     | cmp
?cmp: cons cmp_op cons                  -> compare
    | cons
!cmp_op: "==" | ">=" | "<=" | ">" | "<"
?cons: sum ":" cons                     -> cons_op
     | sum
?sum: sum add_op product                -> arith
    | product
!add_op: "+" | "-"
?product: product "*" operand           -> mul_op
        | operand

?operand: lam
        | "let" NAME "=" expr "in" expr                        -> let_expr
        | "if" expr "then" expr "else" expr                    -> if_expr
        | "case" expr "of" "{" alt (";" alt)* ";"? "}"         -> case_expr
        | "do" "{" stmt (";" stmt)* ";"? "}"                   -> do_expr
        | "readTVar" NAME                                      -> read_expr
        | "writeTVar" NAME aexpr                               -> write_expr
        | "return" aexpr                                       -> return_expr
        | "not" aexpr                                          -> not_expr
        | "-" NUMBER                                           -> negative
        | application

lam: ("\\" | "λ") binder+ "->" expr
?application: aexpr+

?aexpr: NUMBER                          -> int_lit
      | NAME                            -> var
      | CON                             -> con
      | "retry"                         -> retry
      | "(" ")"                         -> unit_expr
      | "(" expr ")"
      | "(" expr ("," expr)+ ")"        -> tuple_expr
      | "[" "]"                         -> nil_expr
      | "[" expr ("," expr)* "]"        -> list_expr

alt: pattern "->" expr
?pattern: CON NAME*                     -> con_pat
        | "[" "]"                       -> nil_pat
        | "(" ")"                       -> unit_pat
        | "(" NAME ":" NAME ")"         -> cons_pat
        | NAME ":" NAME                 -> cons_pat
        | "(" NAME ("," NAME)* ")"      -> tuple_pat
        | NAME                          -> var_pat

stmt: NAME "<-" expr                    -> bind_stmt
    | "let" NAME "=" expr               -> let_stmt
    | expr                              -> expr_stmt

?binder: NAME                           -> name_binder
       | "(" ")"                        -> unit_binder
       | "(" NAME ("," NAME)* ")"       -> tuple_binder

// contracts

contract: citem ("->" citem)*
citem: (NAME ":")? cterm                                   -> plain_item
     | (NAME ":")? "TVar" "[" NAME "," NAME "]"            -> tvar_item
     | "|" expr "<>" expr "|" cterm                        -> tail_item
?cterm: "Ok"                                               -> ok_c
      | "Any"                                              -> any_c
      | "{" binder "|" expr "}"                            -> pred_c
      | "(" ")"                                            -> unit_c
      | "(" contract ("," contract)* ")"                   -> tuple_c
      | "||" (NAME ":")? cterm "<>" cterm "||" cterm       -> stm_c

NAME: /[a-z_][A-Za-z0-9_']*/
CON: /[A-Z][A-Za-z0-9_']*/
NUMBER: /[0-9]+/
COMMENT: /--[^\n]*/
WS: /[ \t\r\n]+/
%ignore COMMENT
%ignore WS
"""

_LARK = Lark(
    GRAMMAR,
    start=["decl", "expr", "contract", "type"],
    parser="lalr",
    lexer="basic",
    propagate_positions=True,
    maybe_placeholders=False,
)

_LITERALS = {t.name: t.pattern.value for t in _LARK.terminals if t.pattern.type == "str"}


# ---------------------------------------------------------------------------
# Tokens
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Token:
    kind: str    # the grammar's terminal name, e.g. NAME, CON, NUMBER or a keyword
    text: str
    offset: int
    column: int


def tokenize(text: str) -> List[Token]:
    try:
        return [Token(t.type, str(t), t.start_pos, t.column) for t in _LARK.lex(text)]
    except UnexpectedCharacters as exc:
        raise ParseError(f"unexpected character {exc.char!r}", offset=exc.pos_in_stream)


def _describe_expected(expected: Sequence[str]) -> str:
    names = set(expected) - {"$END"}
    if "NUMBER" in names:
        return "expected an expression"
    if "OK" in names:
        return "expected a contract"
    if "INT" in names:
        return "expected a type"
    if not names:
        return "unexpected input"
    shown = sorted(f"'{_LITERALS[n]}'" if n in _LITERALS else f"a {n.lower()}" for n in names)
    return "expected " + " or ".join(shown)


def _parse(text: str, start: str, base: int, end: int):
    """Parse ``text`` (found at offset ``base`` of its file) from the grammar rule ``start``."""
    try:
        tree = _LARK.parse(text, start=start)
    except UnexpectedCharacters as exc:
        raise ParseError(f"unexpected character {exc.char!r}", offset=base + exc.pos_in_stream)
    except UnexpectedInput as exc:
        token = getattr(exc, "token", None)
        if token is None or token.type == "$END":
            found, offset = "end of declaration", end
        else:
            found, offset = f"'{token}'", base + token.start_pos
        raise ParseError(f"{_describe_expected(getattr(exc, 'expected', ()))}, found {found}", offset=offset)
    try:
        return _Builder(base).transform(tree)
    except VisitError as exc:
        if isinstance(exc.orig_exc, StmError):
            raise exc.orig_exc
        raise


# ---------------------------------------------------------------------------
# Declarations as parsed, before name resolution
# ---------------------------------------------------------------------------

@dataclass
class _Raw:
    tvars: List[TVarDecl] = field(default_factory=list)
    datatypes: List[ConstructorSig] = field(default_factory=list)
    signatures: Dict[str, Tuple[Type, int]] = field(default_factory=dict)
    contracts: Dict[str, Tuple[Union[Contract, TVarSpecContract], int]] = field(default_factory=dict)
    definitions: Dict[str, Tuple[Expr, int]] = field(default_factory=dict)
    invariant: Optional[Tuple[str, int]] = None
    transactions: Dict[str, Transaction] = field(default_factory=dict)

    def add(self, decl) -> None:
        if isinstance(decl, TVarDecl):
            if any(d.name == decl.name for d in self.tvars):
                raise ParseError(f"duplicate TVar '{decl.name}'", offset=decl.loc)
            self.tvars.append(decl)
        elif isinstance(decl, ConstructorSig):
            self.datatypes.append(decl)
        elif isinstance(decl, Transaction):
            if decl.name in self.transactions:
                raise ParseError(f"duplicate transaction '{decl.name}'", offset=decl.loc)
            self.transactions[decl.name] = decl
        elif isinstance(decl, _Invariant):
            if self.invariant is not None:
                raise ParseError("duplicate invariant declaration", offset=decl.loc)
            self.invariant = (decl.name, decl.loc)
        elif isinstance(decl, _ContractDecl):
            if decl.name in self.contracts:
                raise ParseError(f"duplicate contract for '{decl.name}'", offset=decl.loc)
            self.contracts[decl.name] = (decl.contract, decl.loc)
        elif isinstance(decl, _Signature):
            if decl.name in self.signatures:
                raise ParseError(f"duplicate type signature for '{decl.name}'", offset=decl.loc)
            self.signatures[decl.name] = (decl.type, decl.loc)
        elif isinstance(decl, _Definition):
            if decl.name in self.definitions:
                raise ParseError(f"duplicate function '{decl.name}'", offset=decl.loc)
            self.definitions[decl.name] = (decl.body, decl.loc)


@dataclass(frozen=True)
class _Invariant:
    name: str
    loc: int


@dataclass(frozen=True)
class _ContractDecl:
    name: str
    contract: Union[Contract, TVarSpecContract]
    loc: int


@dataclass(frozen=True)
class _Signature:
    name: str
    type: Type
    loc: int


@dataclass(frozen=True)
class _Definition:
    name: str
    body: Expr
    loc: int


@dataclass(frozen=True)
class _SpecTail:
    """``| p <> q | c``, the end of a TVar-parameterized contract."""
    pre: Expr
    post: Expr
    result: Contract


_DEFAULT_ALT = "_"

Binder = Union[str, Tuple[str, ...]]


def _var_name(token) -> str:
    return fresh("_") if str(token) == "_" else str(token)


def _bind(binder: Binder, body: Expr, loc: Optional[int]) -> Expr:
    if isinstance(binder, tuple):
        return LamPat(binder, body, loc=loc)
    return Lam(binder, body, loc=loc)


def _pattern_vars(c: Contract) -> Tuple[str, ...]:
    if isinstance(c, Pred):
        pattern = pred_pattern(c)
        if pattern is not None:
            return pattern[0]
    return ()


def _build_contract(items, offset: Optional[int]) -> Union[Contract, TVarSpecContract]:
    parameterized = any(isinstance(c, (TVarParam, _SpecTail)) for _, c in items)
    if parameterized:
        *params, (_, tail) = items
        if not isinstance(tail, _SpecTail):
            raise ParseError("a contract with TVar[...] parameters must end in '| pre <> post | result'",
                             offset=offset)
        out = []
        for binder, c in params:
            if isinstance(c, TVarParam):
                out.append(c)
            elif isinstance(c, _SpecTail):
                raise ParseError("'| pre <> post | result' must end the contract", offset=offset)
            else:
                out.append(ArgParam(binder or (c.var if isinstance(c, Pred) else fresh("_")), c))
        return TVarSpecContract(tuple(out), tail.pre, tail.post, tail.result)

    (_, result) = items[-1]
    for binder, dom in reversed(items[:-1]):
        var = binder or (dom.var if isinstance(dom, Pred) else fresh("_"))
        result = DepFun(var, dom, scope_pattern(var, _pattern_vars(dom), result))
    return result


@v_args(meta=True)
class _Builder(Transformer):
    """Builds surface syntax from a parse tree; ``base`` is the file offset of the parsed text."""

    def __init__(self, base: int = 0):
        super().__init__()
        self.base = base

    def _loc(self, meta) -> Optional[int]:
        return None if meta.empty else self.base + meta.start_pos

    # -- declarations ------------------------------------------------------

    def tvar_decl(self, meta, children):
        name, ty, *init = children
        return TVarDecl(str(name), ty, init[0] if init else None, loc=self._loc(meta))

    def data_decl(self, meta, children):
        name, *constructors = children
        return ConstructorSig(str(name), tuple((c, len(types)) for c, types in constructors),
                              tuple(types for _, types in constructors))

    def constructor(self, meta, children):
        con, *types = children
        return str(con), tuple(types)

    def invariant_decl(self, meta, children):
        return _Invariant(str(children[0]), self._loc(meta))

    def contract_decl(self, meta, children):
        name, c = children
        return _ContractDecl(str(name), c, self._loc(meta))

    def transaction_decl(self, meta, children):
        name, *rest = children
        params = rest[0] if len(rest) == 2 else []
        for _, c in params:
            if isinstance(c, TVarSpecContract):
                raise ParseError("transaction parameters cannot take TVar contracts", offset=self._loc(meta))
        return Transaction(str(name), tuple(params), rest[-1], loc=self._loc(meta))

    def params(self, meta, children):
        return list(children)

    def param(self, meta, children):
        name, c = children
        return str(name), c

    def signature(self, meta, children):
        name, ty = children
        return _Signature(str(name), ty, self._loc(meta))

    def definition(self, meta, children):
        name, *binders, body = children
        loc = self._loc(meta)
        for b in reversed(binders):
            body = _bind(b, body, loc)
        return _Definition(str(name), body, loc)

    # -- types -------------------------------------------------------------

    def fun_ty(self, meta, children):
        return TFun(children[0], children[1])

    def stm_ty(self, meta, children):
        return TStm(children[0])

    def tvar_ty(self, meta, children):
        return TTVar(children[0])

    def int_ty(self, meta, children):
        return INT

    def bool_ty(self, meta, children):
        return BOOL

    def data_ty(self, meta, children):
        return TData(str(children[0]))

    def list_ty(self, meta, children):
        return TList(children[0])

    def unit_ty(self, meta, children):
        return UNIT

    def tuple_ty(self, meta, children):
        return children[0] if len(children) == 1 else tuple_type(list(children))

    # -- expressions -------------------------------------------------------

    def bind_op(self, meta, children):
        return Bind(children[0], children[1], loc=self._loc(meta))

    def or_else(self, meta, children):
        return OrElse(children[0], children[1], loc=self._loc(meta))

    def or_op(self, meta, children):
        return PrimOp("||", tuple(children), loc=self._loc(meta))

    def and_op(self, meta, children):
        return PrimOp("&&", tuple(children), loc=self._loc(meta))

    def cmp_op(self, meta, children):
        return str(children[0])

    def add_op(self, meta, children):
        return str(children[0])

    def compare(self, meta, children):
        left, op, right = children
        return PrimOp(op, (left, right), loc=self._loc(meta))

    def arith(self, meta, children):
        left, op, right = children
        return PrimOp(op, (left, right), loc=self._loc(meta))

    def mul_op(self, meta, children):
        return PrimOp("*", tuple(children), loc=self._loc(meta))

    def cons_op(self, meta, children):
        return Con(CONS_CON, tuple(children), loc=self._loc(meta))

    def lam(self, meta, children):
        *binders, body = children
        loc = self._loc(meta)
        for b in reversed(binders):
            body = _bind(b, body, loc)
        return body

    def let_expr(self, meta, children):
        name, value, body = children
        return Let(str(name), value, body, loc=self._loc(meta))

    def if_expr(self, meta, children):
        test, then, other = children
        return Case(test, (Alt(TRUE_CON, (), then), Alt(FALSE_CON, (), other)), loc=self._loc(meta))

    def case_expr(self, meta, children):
        scrutinee, *alts = children
        return Case(scrutinee, tuple(alts), loc=self._loc(meta))

    def do_expr(self, meta, children):
        return Do(tuple(children), loc=self._loc(meta))

    def read_expr(self, meta, children):
        return ReadTVar(str(children[0]), loc=self._loc(meta))

    def write_expr(self, meta, children):
        name, value = children
        return WriteTVar(str(name), value, loc=self._loc(meta))

    def return_expr(self, meta, children):
        return Return(children[0], loc=self._loc(meta))

    def not_expr(self, meta, children):
        return PrimOp("not", (children[0],), loc=self._loc(meta))

    def negative(self, meta, children):
        return IntLit(-int(children[0]), loc=self._loc(meta))

    def application(self, meta, children):
        head, *args = children
        if isinstance(head, Con) and not head.args:
            return Con(head.name, tuple(args), loc=head.loc)
        return mk_apps(head, args)

    def int_lit(self, meta, children):
        return IntLit(int(children[0]), loc=self._loc(meta))

    def var(self, meta, children):
        return Var(str(children[0]), loc=self._loc(meta))

    def con(self, meta, children):
        name = str(children[0])
        if name in ("BAD", "UNR"):
            return Exc(name, loc=self._loc(meta))
        return Con(name, loc=self._loc(meta))

    def retry(self, meta, children):
        return Retry(loc=self._loc(meta))

    def unit_expr(self, meta, children):
        return Con(UNIT_CON, loc=self._loc(meta))

    def tuple_expr(self, meta, children):
        return Con(tuple_name(len(children)), tuple(children), loc=self._loc(meta))

    def nil_expr(self, meta, children):
        return replace(mk_list([]), loc=self._loc(meta))

    def list_expr(self, meta, children):
        return replace(mk_list(list(children)), loc=self._loc(meta))

    # -- case alternatives and do statements ---------------------------------

    def alt(self, meta, children):
        (con, vars), body = children
        return Alt(con, tuple(vars), body)

    def con_pat(self, meta, children):
        con, *names = children
        return str(con), [_var_name(n) for n in names]

    def nil_pat(self, meta, children):
        return NIL_CON, []

    def unit_pat(self, meta, children):
        return UNIT_CON, []

    def cons_pat(self, meta, children):
        return CONS_CON, [_var_name(n) for n in children]

    def tuple_pat(self, meta, children):
        names = [_var_name(n) for n in children]
        return (tuple_name(len(names)) if len(names) > 1 else _DEFAULT_ALT), names

    def var_pat(self, meta, children):
        return _DEFAULT_ALT, [_var_name(children[0])]

    def bind_stmt(self, meta, children):
        name, value = children
        return DoBind(_var_name(name), value)

    def let_stmt(self, meta, children):
        name, value = children
        return DoLet(str(name), value)

    def expr_stmt(self, meta, children):
        return DoExpr(children[0])

    def name_binder(self, meta, children):
        return _var_name(children[0])

    def unit_binder(self, meta, children):
        return fresh("_")

    def tuple_binder(self, meta, children):
        names = [_var_name(n) for n in children]
        return names[0] if len(names) == 1 else tuple(names)

    # -- contracts ---------------------------------------------------------

    def contract(self, meta, children):
        return _build_contract(children, self._loc(meta))

    def plain_item(self, meta, children):
        if len(children) == 2:
            return str(children[0]), children[1]
        return None, children[0]

    def tvar_item(self, meta, children):
        *binder, pre, post = children
        return (str(binder[0]) if binder else None), TVarParam(str(pre), str(post))

    def tail_item(self, meta, children):
        pre, post, result = children
        return None, _SpecTail(pre, post, result)

    def ok_c(self, meta, children):
        return ok()

    def any_c(self, meta, children):
        return ANY

    def pred_c(self, meta, children):
        binder, body = children
        if isinstance(binder, tuple):
            return pattern_pred(binder, body)
        return Pred(binder, body)

    def unit_c(self, meta, children):
        return TupleContract(())

    def tuple_c(self, meta, children):
        return children[0] if len(children) == 1 else TupleContract(tuple(children))

    def stm_c(self, meta, children):
        *binder, pre, post, result = children
        var = str(binder[0]) if binder else (pre.var if isinstance(pre, Pred) else fresh("s"))
        vars = _pattern_vars(pre)
        return StmOp(var, pre, scope_pattern(var, vars, post), scope_pattern(var, vars, result))


# ---------------------------------------------------------------------------
# Declarations
# ---------------------------------------------------------------------------

def _split_declarations(tokens: List[Token]) -> List[Tuple[int, int]]:
    """(start, end) offsets of each declaration; ``end`` is just past its last token."""
    spans: List[Tuple[int, int]] = []
    for token in tokens:
        if token.column == 1:
            spans.append((token.offset, token.offset))
        elif not spans:
            raise ParseError("a declaration must start in the first column", offset=token.offset)
        start, _ = spans[-1]
        spans[-1] = (start, token.offset + len(token.text))
    return spans


# ---------------------------------------------------------------------------
# Name resolution
# ---------------------------------------------------------------------------

class _Resolver:
    """Turns parsed names into variables, function references and TVar references."""

    def __init__(self, tvars: Set[str], functions: Set[str], constructors: Constructors, rename_tvars: bool = True):
        self.tvars = tvars
        self.functions = functions
        self.constructors = constructors
        self.rename_tvars = rename_tvars

    def expr(self, e: Expr, scope: Dict[str, str]) -> Expr:
        if isinstance(e, Var):
            if e.name in scope:
                return replace(e, name=scope[e.name])
            if e.name in self.functions:
                return FunRef(e.name, loc=e.loc)
            if e.name in self.tvars:
                return TVarRef(e.name, loc=e.loc)
            raise ParseError(f"unknown identifier '{e.name}'", offset=e.loc)
        if isinstance(e, Lam):
            name, inner = self.bind(e.var, scope)
            return replace(e, var=name, body=self.expr(e.body, inner))
        if isinstance(e, Case):
            return self.case(e, scope)
        if isinstance(e, Con):
            self.check_con(e.name, len(e.args), e.loc)
            return replace(e, args=tuple(self.expr(a, scope) for a in e.args))
        if isinstance(e, (ReadTVar, WriteTVar)):
            if e.tvar in scope:
                e = replace(e, tvar=scope[e.tvar])
            elif e.tvar not in self.tvars:
                raise ParseError(f"unknown TVar '{e.tvar}'", offset=e.loc)
            if isinstance(e, WriteTVar):
                return replace(e, expr=self.expr(e.expr, scope))
            return e
        if isinstance(e, (IntLit, Exc, Retry, FunRef, TVarRef)):
            return e
        if isinstance(e, App):
            return replace(e, fun=self.expr(e.fun, scope), arg=self.expr(e.arg, scope))
        if isinstance(e, PrimOp):
            return replace(e, args=tuple(self.expr(a, scope) for a in e.args))
        if isinstance(e, (Bind, OrElse)):
            return replace(e, left=self.expr(e.left, scope), right=self.expr(e.right, scope))
        if isinstance(e, Return):
            return replace(e, expr=self.expr(e.expr, scope))
        raise ParseError(f"unexpected {type(e).__name__} (desugar first)", offset=e.loc)

    def bind(self, name: str, scope: Dict[str, str]) -> Tuple[str, Dict[str, str]]:
        # In code, TVar names are reserved for the environment tuple of the transformed program;
        # in contracts they name TVar contents.
        new = fresh(name) if self.rename_tvars and name in self.tvars else name
        return new, {**scope, name: new}

    def bind_all(self, names: Sequence[str], scope: Dict[str, str]) -> Tuple[Tuple[str, ...], Dict[str, str]]:
        out = []
        for name in names:
            new, scope = self.bind(name, scope)
            out.append(new)
        return tuple(out), scope

    def check_con(self, con: str, arity: int, loc: Optional[int]) -> None:
        sig = self.constructors.lookup(con)
        if sig is None:
            raise ParseError(f"unknown constructor '{con}'", offset=loc)
        if sig.arity(con) != arity:
            raise ParseError(f"constructor '{con}' takes {sig.arity(con)} argument(s), got {arity}", offset=loc)

    def case(self, e: Case, scope: Dict[str, str]) -> Expr:
        scrutinee = self.expr(e.scrutinee, scope)
        regular = [a for a in e.alts if a.con != _DEFAULT_ALT]
        defaults = [a for a in e.alts if a.con == _DEFAULT_ALT]
        if len(defaults) > 1 or (defaults and e.alts[-1].con != _DEFAULT_ALT):
            raise ParseError("a catch-all alternative must come last", offset=e.loc)

        alts = []
        for alt in regular:
            self.check_con(alt.con, len(alt.vars), e.loc)
            names, inner = self.bind_all(alt.vars, scope)
            alts.append(Alt(alt.con, names, self.expr(alt.body, inner)))

        if not defaults:
            return replace(e, scrutinee=scrutinee, alts=tuple(alts))
        default = defaults[0]
        if not regular:
            return App(self.expr(Lam(default.vars[0], default.body), scope), scrutinee, loc=e.loc)
        sig = self.constructors.lookup(regular[0].con)
        assert sig is not None
        seen = {a.con for a in regular}
        for con, arity in sig.constructors:
            if con in seen:
                continue
            names = tuple(fresh("x") for _ in range(arity))
            body = self.expr(default.body, {**scope, default.vars[0]: default.vars[0]})
            body = substitute(body, default.vars[0], Con(con, tuple(Var(n) for n in names)))
            alts.append(Alt(con, names, body))
        return replace(e, scrutinee=scrutinee, alts=tuple(alts))

    def contract(self, c, scope: Dict[str, str]):
        if isinstance(c, Pred):
            return replace(c, pred=self.expr(c.pred, {**scope, c.var: c.var}))
        if isinstance(c, DepFun):
            return DepFun(c.var, self.contract(c.dom, scope), self.contract(c.cod, {**scope, c.var: c.var}))
        if isinstance(c, TupleContract):
            return TupleContract(tuple(self.contract(i, scope) for i in c.items))
        if isinstance(c, StmOp):
            inner = {**scope, c.var: c.var}
            return StmOp(c.var, self.contract(c.pre, scope), self.contract(c.post, inner),
                         self.contract(c.result, inner))
        if isinstance(c, TVarSpecContract):
            params = []
            pre_names: Dict[str, str] = {}
            post_names: Dict[str, str] = {}
            for param in c.params:
                if isinstance(param, TVarParam):
                    pre_names[param.pre] = param.pre
                    post_names[param.post] = param.post
                    params.append(param)
                else:
                    params.append(ArgParam(param.var, self.contract(param.contract, scope)))
                    scope = {**scope, param.var: param.var}
            pre = self.expr(c.pre, {**scope, **pre_names})
            post = self.expr(c.post, {**scope, **pre_names, **post_names})
            result = self.contract(c.result, {**scope, **pre_names})
            return TVarSpecContract(tuple(params), pre, post, result)
        return c


def _core(e: Expr, resolver: _Resolver, constructors: Constructors, scope: Optional[Dict[str, str]] = None) -> Expr:
    return complete_cases(resolver.expr(desugar(e), scope or {}), constructors)


def _core_contract(c, resolver: _Resolver, constructors: Constructors):
    c = _map_contract_exprs(c, desugar)
    c = _Resolver(resolver.tvars, resolver.functions, constructors, rename_tvars=False).contract(c, {})
    return _map_contract_exprs(c, lambda e: complete_cases(e, constructors))


def _map_contract_exprs(c, f):
    if isinstance(c, Pred):
        return replace(c, pred=f(c.pred))
    if isinstance(c, DepFun):
        return DepFun(c.var, _map_contract_exprs(c.dom, f), _map_contract_exprs(c.cod, f))
    if isinstance(c, TupleContract):
        return TupleContract(tuple(_map_contract_exprs(i, f) for i in c.items))
    if isinstance(c, StmOp):
        return StmOp(c.var, _map_contract_exprs(c.pre, f), _map_contract_exprs(c.post, f),
                     _map_contract_exprs(c.result, f))
    if isinstance(c, TVarSpecContract):
        params = tuple(ArgParam(p.var, _map_contract_exprs(p.contract, f)) if isinstance(p, ArgParam) else p
                       for p in c.params)
        return TVarSpecContract(params, f(c.pre), f(c.post), _map_contract_exprs(c.result, f))
    return c



# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SourceUnit:
    """A parsed source file: nodes carry byte offsets into ``text``."""
    path: Optional[str]
    text: str
    program: Program


def parse_program(text: str) -> Program:
    """Parse a whole program; errors carry a byte offset but no path."""
    reset_fresh()
    tokens = tokenize(text)
    if not tokens:
        raise ParseError("no declarations")

    raw = _Raw()
    for start, end in _split_declarations(tokens):
        raw.add(_parse(text[start:end], "decl", start, end))

    for name, (_, offset) in raw.signatures.items():
        if name not in raw.definitions:
            raise ParseError(f"type signature for '{name}' has no definition", offset=offset)
    for name, (_, offset) in raw.contracts.items():
        if name not in raw.definitions:
            raise ParseError(f"contract for unknown function '{name}'", offset=offset)
    if raw.invariant is not None and raw.invariant[0] not in raw.definitions:
        raise ParseError(f"invariant '{raw.invariant[0]}' is not a declared function", offset=raw.invariant[1])

    names: Dict[str, str] = {}
    for kind, declared in (("TVar", [d.name for d in raw.tvars]), ("function", list(raw.definitions)),
                           ("transaction", list(raw.transactions))):
        for name in declared:
            if name in names:
                raise ParseError(f"{kind} '{name}' clashes with the {names[name]} of the same name")
            names[name] = kind
    seen_cons: Set[str] = set()
    for sig in raw.datatypes:
        for con, _ in sig.constructors:
            if con in seen_cons or con in (TRUE_CON, FALSE_CON):
                raise ParseError(f"duplicate constructor '{con}'")
            seen_cons.add(con)

    constructors = Constructors(raw.datatypes)
    resolver = _Resolver({d.name for d in raw.tvars}, set(raw.definitions), constructors)

    tvars = tuple(replace(d, init=_core(d.init, resolver, constructors)) if d.init is not None else d
                  for d in raw.tvars)
    functions: Dict[str, FunctionDef] = {}
    for name, (body, offset) in raw.definitions.items():
        ty = raw.signatures.get(name, (None, None))[0]
        contract = raw.contracts.get(name, (None, None))[0]
        functions[name] = FunctionDef(
            name,
            _core(body, resolver, constructors),
            ty,
            _core_contract(contract, resolver, constructors) if contract is not None else None,
            loc=offset,
        )
    transactions: Dict[str, Transaction] = {}
    for name, tx in raw.transactions.items():
        param_names = [p for p, _ in tx.params]
        for p in param_names:
            if p in resolver.tvars:
                raise ParseError(f"parameter '{p}' of '{name}' has the name of a TVar", offset=tx.loc)
        if len(set(param_names)) != len(param_names):
            raise ParseError(f"duplicate parameter in '{name}'", offset=tx.loc)
        params = tuple((p, _core_contract(c, resolver, constructors)) for p, c in tx.params)
        body = _core(tx.body, resolver, constructors, {p: p for p in param_names})
        transactions[name] = replace(tx, params=params, body=body)

    program = Program(
        tvars=tvars,
        datatypes=tuple(raw.datatypes),
        functions=functions,
        invariant=raw.invariant[0] if raw.invariant else None,
        transactions=transactions,
    )
    logger.debug("parsed %d TVar(s), %d function(s), %d transaction(s)",
                 len(tvars), len(functions), len(transactions))
    return program


def parse(text: str, path: Optional[str] = None) -> SourceUnit:
    """Parse program text into a SourceUnit; errors are located in ``path``."""
    try:
        return SourceUnit(path, text, parse_program(text))
    except StmError as exc:
        raise exc.at(path, text)


def load(path: Union[str, Path]) -> SourceUnit:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8 text ({exc.reason})", path=str(path))
    return parse(text, str(path))


def _resolver_for(program: Program) -> Tuple[_Resolver, Constructors]:
    constructors = program.constructors()
    return _Resolver(set(program.tvar_names), set(program.functions), constructors), constructors


def parse_expr(text: str, program: Optional[Program] = None, scope: Sequence[str] = ()) -> Expr:
    """Parse a single expression against the declarations of program."""
    e = _parse(text, "expr", 0, len(text))
    resolver, constructors = _resolver_for(program or Program())
    return _core(e, resolver, constructors, {v: v for v in scope})


def parse_contract(text: str, program: Optional[Program] = None) -> Union[Contract, TVarSpecContract]:
    c = _parse(text, "contract", 0, len(text))
    resolver, constructors = _resolver_for(program or Program())
    return _core_contract(c, resolver, constructors)


def parse_type(text: str) -> Type:
    return _parse(text, "type", 0, len(text))


def prepare(program: Program) -> Program:
    """Type-check, specialize TVar-parameterized functions, and type-check the result."""
    program = specialize_program(check_program(program))
    return check_program(program)
