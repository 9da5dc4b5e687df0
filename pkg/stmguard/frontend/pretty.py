"""Pretty printing of expressions, contracts and types in source syntax.

Printed expressions parse back to the same core term: tuple-pattern lambdas, list
literals, tuples and infix operators are resugared, and parentheses are added only
where precedence requires them.
"""

from dataclasses import replace
from typing import Dict, Optional, Tuple, Union

from ..engine.contracts import (
    AnyContract, ArgParam, Contract, DepFun, Pred, StmOp, TupleContract, TVarParam, TVarSpecContract,
    contract_free_vars, is_ok, pred_pattern,
)
from ..engine.syntax import (
    App, Bind, Case, Con, CONS_CON, Do, Exc, Expr, FunRef, IntLit, Lam, LamPat, Let, NIL_CON, OrElse,
    PrimOp, ReadTVar, Retry, Return, TVarRef, Var, WriteTVar, desugar, free_vars, get_prim_spec,
    tuple_arity,
)
from ..engine.typecheck import Type

TOP, BIND, OR_ELSE, APP, ATOM = 0, 1, 2, 9, 10
_CONS_LEVEL = 6


def _paren(text: str, needed: bool) -> str:
    return f"({text})" if needed else text


def _list_items(e: Con) -> Optional[Tuple[Expr, ...]]:
    items = []
    node: Expr = e
    while isinstance(node, Con) and node.name == CONS_CON:
        items.append(node.args[0])
        node = node.args[1]
    if isinstance(node, Con) and node.name == NIL_CON:
        return tuple(items)
    return None


def _tuple_lambda(e: Lam) -> Optional[Tuple[Tuple[str, ...], Expr]]:
    body = e.body
    if (isinstance(body, Case) and body.scrutinee == Var(e.var) and len(body.alts) == 1
            and tuple_arity(body.alts[0].con) not in (None, 0)
            and e.var not in free_vars(body.alts[0].body)):
        return body.alts[0].vars, body.alts[0].body
    return None


def pretty_expr(e: Expr, level: int = TOP) -> str:
    if isinstance(e, (Do, Let, LamPat)):
        e = desugar(e)

    if isinstance(e, Var):
        return e.name
    if isinstance(e, (FunRef, TVarRef)):
        return e.name
    if isinstance(e, IntLit):
        return _paren(str(e.value), e.value < 0 and level > TOP)
    if isinstance(e, Exc):
        return e.kind
    if isinstance(e, Retry):
        return "retry"

    if isinstance(e, Con):
        arity = tuple_arity(e.name)
        if arity is not None and arity >= 2:
            return "(" + ", ".join(pretty_expr(a) for a in e.args) + ")"
        if e.name == CONS_CON:
            items = _list_items(e)
            if items is not None:
                return "[" + ", ".join(pretty_expr(a) for a in items) + "]"
            head, tail = e.args
            text = f"{pretty_expr(head, _CONS_LEVEL + 1)} : {pretty_expr(tail, _CONS_LEVEL)}"
            return _paren(text, level > _CONS_LEVEL)
        if not e.args:
            return e.name
        text = " ".join([e.name] + [pretty_expr(a, ATOM) for a in e.args])
        return _paren(text, level > APP)

    if isinstance(e, Lam):
        pattern = _tuple_lambda(e)
        if pattern is not None:
            vars, body = pattern
            text = f"\\({', '.join(vars)}) -> {pretty_expr(body)}"
        else:
            text = f"\\{e.var} -> {pretty_expr(e.body)}"
        return _paren(text, level > TOP)

    if isinstance(e, Case):
        alts = []
        for alt in e.alts:
            alts.append(f"{_pattern(alt.con, alt.vars)} -> {pretty_expr(alt.body)}")
        text = f"case {pretty_expr(e.scrutinee)} of {{{'; '.join(alts)}}}"
        return _paren(text, level > TOP)

    if isinstance(e, App):
        return _paren(f"{pretty_expr(e.fun, APP)} {pretty_expr(e.arg, ATOM)}", level > APP)

    if isinstance(e, PrimOp):
        spec = get_prim_spec(e.op)
        if spec is None or spec.infix_level == 0:
            args = " ".join(pretty_expr(a, ATOM) for a in e.args)
            return _paren(f"{e.op} {args}", level > APP)
        left, right = e.args
        op_level = spec.infix_level
        if e.op in ("&&", "||"):
            left_level, right_level = op_level + 1, op_level
        elif spec.result == "bool":
            left_level = right_level = op_level + 1
        else:
            left_level, right_level = op_level, op_level + 1
        text = f"{pretty_expr(left, left_level)} {e.op} {pretty_expr(right, right_level)}"
        return _paren(text, level > op_level)

    if isinstance(e, ReadTVar):
        return _paren(f"readTVar {e.tvar}", level > APP)
    if isinstance(e, WriteTVar):
        return _paren(f"writeTVar {e.tvar} {pretty_expr(e.expr, ATOM)}", level > APP)
    if isinstance(e, Return):
        return _paren(f"return {pretty_expr(e.expr, ATOM)}", level > APP)
    if isinstance(e, Bind):
        return _paren(f"{pretty_expr(e.left, BIND)} >>= {pretty_expr(e.right, BIND + 1)}", level > BIND)
    if isinstance(e, OrElse):
        text = f"{pretty_expr(e.left, OR_ELSE + 1)} `orElse` {pretty_expr(e.right, OR_ELSE)}"
        return _paren(text, level > OR_ELSE)
    raise TypeError(f"cannot print {type(e).__name__}")


def _pattern(con: str, vars: Tuple[str, ...]) -> str:
    arity = tuple_arity(con)
    if arity is not None and arity >= 2:
        return "(" + ", ".join(vars) + ")"
    if con == CONS_CON:
        return f"{vars[0]} : {vars[1]}"
    return " ".join((con,) + tuple(vars))


# ---------------------------------------------------------------------------
# Contracts
# ---------------------------------------------------------------------------

Scopes = Dict[str, Tuple[str, ...]]


def _strip(body: Expr, scopes: Scopes) -> Expr:
    """Remove the pattern-scoping wrappers that make outer tuple components visible."""
    while (isinstance(body, Case) and isinstance(body.scrutinee, Var) and body.scrutinee.name in scopes
           and len(body.alts) == 1 and body.alts[0].vars == scopes[body.scrutinee.name]):
        body = body.alts[0].body
    return body


def _unscope(c: Contract, scopes: Scopes) -> Contract:
    if not scopes:
        return c
    if isinstance(c, Pred):
        pattern = pred_pattern(c)
        if pattern is not None:
            vars, body = pattern
            alt = replace(c.pred.alts[0], body=_strip(body, scopes))
            return replace(c, pred=replace(c.pred, alts=(alt,)))
        return replace(c, pred=_strip(c.pred, scopes))
    if isinstance(c, DepFun):
        return DepFun(c.var, _unscope(c.dom, scopes), _unscope(c.cod, scopes))
    if isinstance(c, TupleContract):
        return TupleContract(tuple(_unscope(i, scopes) for i in c.items))
    if isinstance(c, StmOp):
        return StmOp(c.var, _unscope(c.pre, scopes), _unscope(c.post, scopes), _unscope(c.result, scopes))
    return c


def _pattern_scope(binder: str, dom: Contract) -> Scopes:
    if isinstance(dom, Pred):
        pattern = pred_pattern(dom)
        if pattern is not None:
            return {binder: pattern[0]}
    return {}


def _binder_prefix(var: str, dom: Contract, scope: Contract) -> str:
    if isinstance(dom, Pred) and dom.var == var and pred_pattern(dom) is None:
        return ""
    if var in contract_free_vars(scope):
        return f"{var}:"
    return ""


def pretty_contract(c: Union[Contract, TVarSpecContract], arrow_left: bool = False) -> str:
    if isinstance(c, TVarSpecContract):
        return _pretty_spec(c)
    if isinstance(c, AnyContract):
        return "Any"
    if isinstance(c, Pred):
        if is_ok(c):
            return "Ok"
        pattern = pred_pattern(c)
        if pattern is not None:
            vars, body = pattern
            return f"{{({', '.join(vars)}) | {pretty_expr(body)}}}"
        return f"{{{c.var} | {pretty_expr(c.pred)}}}"
    if isinstance(c, TupleContract):
        return "(" + ", ".join(pretty_contract(i) for i in c.items) + ")"
    if isinstance(c, DepFun):
        cod = _unscope(c.cod, _pattern_scope(c.var, c.dom))
        prefix = _binder_prefix(c.var, c.dom, cod)
        text = f"{prefix}{pretty_contract(c.dom, arrow_left=True)} -> {pretty_contract(cod)}"
        return _paren(text, arrow_left)
    if isinstance(c, StmOp):
        scopes = _pattern_scope(c.var, c.pre)
        post, result = _unscope(c.post, scopes), _unscope(c.result, scopes)
        prefix = _binder_prefix(c.var, c.pre, TupleContract((post, result)))
        return f"|| {prefix}{pretty_contract(c.pre)} <> {pretty_contract(post)} || {pretty_contract(result)}"
    raise TypeError(f"cannot print contract {type(c).__name__}")


def _pretty_spec(c: TVarSpecContract) -> str:
    parts = []
    for param in c.params:
        if isinstance(param, TVarParam):
            parts.append(f"TVar[{param.pre},{param.post}]")
        elif isinstance(param, ArgParam):
            implicit = isinstance(param.contract, Pred) and param.contract.var == param.var
            prefix = "" if implicit else f"{param.var}:"
            parts.append(prefix + pretty_contract(param.contract, arrow_left=True))
    parts.append(f"| {pretty_expr(c.pre)} <> {pretty_expr(c.post)} | {pretty_contract(c.result)}")
    return " -> ".join(parts)


def pretty_type(ty: Optional[Type]) -> str:
    return "?" if ty is None else str(ty)
