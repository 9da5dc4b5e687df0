"""Purifying STM code: the state-passing transformation of expressions and contracts,
orElse expansion, transaction closure and specialization of TVar-parameterized functions.
"""

import itertools
import logging
from dataclasses import replace
from typing import Dict, List, Optional, Sequence, Tuple

from .contracts import (
    ANY, ArgParam, Contract, DepFun, Pred, StmOp, TupleContract, TVarParam, TVarSpecContract, ok,
    pattern_pred, scope_pattern, subst_contract,
)
from .errors import CheckError, ContractError, TransformError
from .syntax import (
    Alt, App, Bind, Case, Expr, FunctionDef, FunRef, Lam, OrElse, Program, ReadTVar, Retry,
    Return, TVarRef, Transaction, UNR, Var, WriteTVar, children, free_vars, fresh, is_true, map_children,
    mk_apps, mk_lams, mk_tuple, mk_unit, subterms, substitute_many, tuple_name, unspine,
)
from .typecheck import BOOL, TFun, TStm, TTuple, TTVar, Type, fun_type, is_stm_typed, split_fun, tvar_tuple_type

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Environment-tuple helpers
# ---------------------------------------------------------------------------

def env_lambda(tvars: Sequence[str], body: Expr) -> Expr:
    """``λ(t1,...,tn). body``; a single TVar binds its name directly."""
    if len(tvars) == 1:
        return Lam(tvars[0], body)
    s = fresh("s")
    return Lam(s, Case(Var(s), (Alt(tuple_name(len(tvars)), tuple(tvars), body),)))


def env_expr(tvars: Sequence[str], overrides: Optional[Dict[str, Expr]] = None) -> Expr:
    """The tuple ``(t1,...,tn)`` with some positions replaced."""
    overrides = overrides or {}
    items = [overrides.get(t, Var(t)) for t in tvars]
    if not items:
        return mk_unit()
    return mk_tuple(items)


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

def t_expr(e: Expr, tvars: Sequence[str]) -> Expr:
    """Translate an annotated STM expression into a pure function over the environment tuple.

    Applications and cases are lifted by their type annotation, so e must be type-checked.
    """
    if not _contains_stm(e):
        return e

    if isinstance(e, ReadTVar):
        _known(e.tvar, tvars)
        return env_lambda(tvars, mk_tuple([Var(e.tvar), env_expr(tvars)]))

    if isinstance(e, WriteTVar):
        _known(e.tvar, tvars)
        return env_lambda(tvars, mk_tuple([mk_unit(), env_expr(tvars, {e.tvar: e.expr})]))

    if isinstance(e, Return):
        return env_lambda(tvars, mk_tuple([e.expr, env_expr(tvars)]))

    if isinstance(e, Retry):
        return UNR

    if isinstance(e, Bind):
        # the left step is forced before the continuation runs
        result, state = fresh("r"), fresh("s")
        step = App(t_expr(e.left, tvars), env_expr(tvars))
        rest = mk_apps(t_expr(e.right, tvars), [Var(result), Var(state)])
        return env_lambda(tvars, Case(step, (Alt(tuple_name(2), (result, state), rest),)))

    if isinstance(e, OrElse):
        raise TransformError("orElse must be expanded before the transformation", offset=e.loc)

    if isinstance(e, App):
        translated = App(t_expr(e.fun, tvars), t_expr(e.arg, tvars))
        if is_stm_typed(e):
            return env_lambda(tvars, App(translated, env_expr(tvars)))
        return translated

    if isinstance(e, Case):
        translated = replace(
            e,
            scrutinee=t_expr(e.scrutinee, tvars),
            alts=tuple(replace(a, body=t_expr(a.body, tvars)) for a in e.alts),
            ty=None,
        )
        if is_stm_typed(e):
            return env_lambda(tvars, App(translated, env_expr(tvars)))
        return translated

    return replace(map_children(e, lambda c: t_expr(c, tvars)), ty=None)


def _known(tvar: str, tvars: Sequence[str]) -> None:
    if tvar not in tvars:
        raise TransformError(f"'{tvar}' is not a declared TVar (specialize TVar parameters first)")


def _contains_stm(e: Expr) -> bool:
    return any(isinstance(n, (ReadTVar, WriteTVar, Bind, Return, OrElse, Retry)) for n in subterms(e))


# ---------------------------------------------------------------------------
# Contracts
# ---------------------------------------------------------------------------

def t_contract(c: Contract) -> Contract:
    """``||x:c1 <> c2|| c`` becomes ``x:c1 -> (c, c2)``; pure contracts are fixed points."""
    if isinstance(c, StmOp):
        return DepFun(c.var, t_contract(c.pre), TupleContract((t_contract(c.result), t_contract(c.post))))
    if isinstance(c, DepFun):
        return DepFun(c.var, t_contract(c.dom), t_contract(c.cod))
    if isinstance(c, TupleContract):
        return TupleContract(tuple(t_contract(i) for i in c.items))
    return c


def transformed_type(ty: Type, env_ty: Type) -> Type:
    """The type of T(e) given the type of e."""
    if isinstance(ty, TStm):
        return TFun(env_ty, TTuple((transformed_type(ty.res, env_ty), env_ty)))
    if isinstance(ty, TFun):
        return TFun(transformed_type(ty.arg, env_ty), transformed_type(ty.res, env_ty))
    if isinstance(ty, TTuple):
        return TTuple(tuple(transformed_type(t, env_ty) for t in ty.items))
    return ty


def t_program(program: Program) -> Program:
    """Transform every function of Δ (after specialization) together with its type and contract."""
    tvars = program.tvar_names
    env_ty = tvar_tuple_type(program)
    functions = {}
    for name, fdef in program.functions.items():
        if any(isinstance(n, OrElse) for n in subterms(fdef.body)):
            raise TransformError(f"function '{name}' uses orElse; only transaction bodies are expanded",
                                 offset=fdef.loc)
        contract = fdef.contract
        if contract is not None and not isinstance(contract, Contract):
            raise TransformError(f"function '{name}' still has a TVar-parameterized contract")
        functions[name] = replace(
            fdef,
            body=t_expr(fdef.body, tvars),
            type=transformed_type(fdef.type, env_ty) if fdef.type is not None else None,
            contract=t_contract(contract) if contract is not None else None,
        )
    return replace(program, functions=functions)


# ---------------------------------------------------------------------------
# orElse expansion
# ---------------------------------------------------------------------------

def gamma_expand(e: Expr, cap: int = 64) -> List[Expr]:
    """All orElse-free variants of e, one per choice of alternative at each orElse."""
    variants = _gamma(e, cap)
    logger.debug("orElse expansion produced %d variant(s)", len(variants))
    return variants


def _gamma(e: Expr, cap: int) -> List[Expr]:
    if not any(isinstance(n, OrElse) for n in subterms(e)):
        return [e]
    if isinstance(e, OrElse):
        out = _dedup(_gamma(e.left, cap) + _gamma(e.right, cap))
    else:
        options = [_gamma(c, cap) for c in children(e)]
        out = []
        for choice in itertools.product(*options):
            it = iter(choice)
            out.append(map_children(e, lambda _: next(it)))
            if len(out) > cap:
                break
        out = _dedup(out)
    if len(out) > cap:
        raise TransformError(f"orElse expansion exceeds {cap} variants", offset=e.loc)
    return out


def _dedup(exprs: List[Expr]) -> List[Expr]:
    out: List[Expr] = []
    for e in exprs:
        if e not in out:
            out.append(e)
    return out


# ---------------------------------------------------------------------------
# Invariants and closure
# ---------------------------------------------------------------------------

def invariant_to_contract(inv_name: str, program: Program) -> StmOp:
    """``|| c <> c || Any`` where c accepts the environment tuples the invariant maps to True."""
    fdef = program.functions.get(inv_name)
    if fdef is None:
        raise CheckError(f"invariant '{inv_name}' is not a declared function")
    env_ty = tvar_tuple_type(program)
    if fdef.type is not None and fdef.type != TFun(env_ty, BOOL):
        raise CheckError(f"invariant '{inv_name}' must have type {TFun(env_ty, BOOL)}, has {fdef.type}")

    tvars = program.tvar_names
    if _constant_true(fdef.body):
        return StmOp(fresh("s"), ok(), ok(), ANY)

    def state(names: Sequence[str]) -> Pred:
        if len(names) == 1:
            return Pred(names[0], App(FunRef(inv_name), Var(names[0])))
        return pattern_pred(names, App(FunRef(inv_name), env_expr(names)))

    var = tvars[0] if len(tvars) == 1 else fresh("s")
    return StmOp(var, state(tvars), state(tvars), ANY)


def _constant_true(body: Expr) -> bool:
    if not isinstance(body, Lam):
        return False
    inner = body.body
    if isinstance(inner, Case) and len(inner.alts) == 1 and inner.scrutinee == Var(body.var):
        inner = inner.alts[0].body
    return is_true(inner)


def close_transaction(e: Expr, params: Sequence[Tuple[str, Contract]], invariant: Contract) -> Tuple[Expr, Contract]:
    """Abstract a transaction over its free variables: ``(λx1..xn. e, c1 -> ... -> cn -> invariant)``."""
    names = [p for p, _ in params]
    for var in free_vars(e):
        if var not in names:
            raise ContractError(f"free variable '{var}' of the transaction has no contract", offset=e.loc)
    contract = invariant
    for name, c in reversed(list(params)):
        contract = DepFun(name, c, contract)
    return mk_lams(names, e), contract


# ---------------------------------------------------------------------------
# Specialization of TVar parameters
# ---------------------------------------------------------------------------

def specialize_tvar_args(fdef: FunctionDef, program: Program) -> List[Tuple[FunctionDef, Optional[Contract]]]:
    """One definition (and contract) per assignment of declared TVars to the TVar parameters."""
    if fdef.type is None:
        return [(fdef, fdef.contract)]
    arg_types, res_ty = split_fun(fdef.type)
    tvar_positions = [i for i, t in enumerate(arg_types) if isinstance(t, TTVar)]
    if not tvar_positions:
        return [(fdef, fdef.contract)]

    params, body = _peel_lambdas(fdef.body, len(arg_types))
    candidates = []
    for i in tvar_positions:
        content = arg_types[i].content
        matching = [d.name for d in program.tvars if d.type == content]
        if not matching:
            raise TransformError(f"parameter {i + 1} of '{fdef.name}' has type {arg_types[i]}, "
                                 f"but no declared TVar holds {content}", offset=fdef.loc)
        candidates.append(matching)

    out = []
    for assignment in itertools.product(*candidates):
        binding = {params[i]: tvar for i, tvar in zip(tvar_positions, assignment)}
        kept = [p for i, p in enumerate(params) if i not in tvar_positions]
        new_body = mk_lams(kept, _instantiate(body, binding))
        new_type = fun_type([t for i, t in enumerate(arg_types) if i not in tvar_positions], res_ty)
        name = specialized_name(fdef.name, assignment)
        contract = fdef.contract
        if isinstance(contract, TVarSpecContract):
            contract = _specialize_contract(contract, assignment, program)
        out.append((replace(fdef, name=name, body=new_body, type=new_type, contract=contract), contract))
        logger.debug("specialized %s at %s as %s", fdef.name, ", ".join(assignment), name)
    return out


def specialized_name(name: str, tvars: Sequence[str]) -> str:
    return "_".join([name, *tvars])


def _peel_lambdas(body: Expr, count: int) -> Tuple[List[str], Expr]:
    params = []
    for _ in range(count):
        if not isinstance(body, Lam):
            v = fresh("x")
            body = App(body, Var(v))
            params.append(v)
            continue
        params.append(body.var)
        body = body.body
    return params, body


def _instantiate(e: Expr, binding: Dict[str, str]) -> Expr:
    """Replace TVar parameters by declared TVars in reads, writes and argument positions."""
    if not binding:
        return e
    if isinstance(e, ReadTVar) and e.tvar in binding:
        return replace(e, tvar=binding[e.tvar])
    if isinstance(e, WriteTVar) and e.tvar in binding:
        return replace(e, tvar=binding[e.tvar], expr=_instantiate(e.expr, binding))
    if isinstance(e, Var) and e.name in binding:
        return TVarRef(binding[e.name], loc=e.loc)
    if isinstance(e, Lam):
        inner = {k: v for k, v in binding.items() if k != e.var}
        return replace(e, body=_instantiate(e.body, inner))
    if isinstance(e, Case):
        return replace(
            e,
            scrutinee=_instantiate(e.scrutinee, binding),
            alts=tuple(replace(a, body=_instantiate(a.body, {k: v for k, v in binding.items() if k not in a.vars}))
                       for a in e.alts),
        )
    return map_children(e, lambda c: _instantiate(c, binding))


def _specialize_contract(spec: TVarSpecContract, assignment: Sequence[str], program: Program) -> Contract:
    tvars = program.tvar_names
    primed = [t + "'" for t in tvars]
    tvar_params = [p for p in spec.params if isinstance(p, TVarParam)]
    pre_map: Dict[str, Expr] = {}
    post_map: Dict[str, Expr] = {}
    for param, tvar in zip(tvar_params, assignment):
        pre_map[param.pre] = Var(tvar)
        post_map[param.pre] = Var(tvar)
        post_map[param.post] = Var(tvar + "'")

    var = tvars[0] if len(tvars) == 1 else fresh("s")
    pre = pattern_pred(tvars, substitute_many(spec.pre, pre_map))
    post = scope_pattern(var, tvars, pattern_pred(primed, substitute_many(spec.post, post_map)))
    result = spec.result
    for name, value in pre_map.items():
        result = subst_contract(result, name, value)
    result = scope_pattern(var, tvars, result)
    contract: Contract = StmOp(var, pre, post, result)

    for param in reversed(spec.params):
        if isinstance(param, ArgParam):
            contract = DepFun(param.var, param.contract, contract)
    return contract


def rewrite_tvar_calls(e: Expr, program: Program) -> Expr:
    """``f tA x`` becomes ``f_tA x`` for every TVar-parameterized function f."""
    tvar_params: Dict[str, List[int]] = {}
    for name, fdef in program.functions.items():
        if fdef.type is not None:
            positions = [i for i, t in enumerate(split_fun(fdef.type)[0]) if isinstance(t, TTVar)]
            if positions:
                tvar_params[name] = positions
    if not tvar_params:
        return e
    return _rewrite_calls(e, tvar_params)


def _rewrite_calls(e: Expr, tvar_params: Dict[str, List[int]]) -> Expr:
    if isinstance(e, App):
        head, args = unspine(e)
        if isinstance(head, FunRef) and head.name in tvar_params:
            positions = tvar_params[head.name]
            if len(args) <= max(positions):
                raise TransformError(f"'{head.name}' must be applied to all of its TVar arguments", offset=e.loc)
            chosen = []
            for i in positions:
                if not isinstance(args[i], TVarRef):
                    raise TransformError(f"argument {i + 1} of '{head.name}' must be a declared TVar", offset=e.loc)
                chosen.append(args[i].name)
            rest = [_rewrite_calls(a, tvar_params) for i, a in enumerate(args) if i not in positions]
            return mk_apps(FunRef(specialized_name(head.name, chosen), loc=head.loc), rest)
    if isinstance(e, FunRef) and e.name in tvar_params:
        raise TransformError(f"'{e.name}' must be applied to its TVar arguments", offset=e.loc)
    return map_children(e, lambda c: _rewrite_calls(c, tvar_params))


def specialize_program(program: Program) -> Program:
    """Replace every TVar-parameterized function by its specializations and rewrite all calls."""
    functions: Dict[str, FunctionDef] = {}
    for name, fdef in program.functions.items():
        for specialized, _ in specialize_tvar_args(fdef, program):
            functions[specialized.name] = specialized
    functions = {
        name: replace(fdef, body=rewrite_tvar_calls(fdef.body, program)) for name, fdef in functions.items()
    }
    transactions: Dict[str, Transaction] = {
        name: replace(tx, body=rewrite_tvar_calls(tx.body, program)) for name, tx in program.transactions.items()
    }
    for fdef in functions.values():
        if any(isinstance(n, TVarRef) for n in subterms(fdef.body)):
            raise TransformError(f"'{fdef.name}' passes a TVar to a function without TVar parameters",
                                 offset=fdef.loc)
    return replace(program, functions=functions, transactions=transactions)
