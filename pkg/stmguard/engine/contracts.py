"""Contracts: representation, typing and a sampling-based satisfaction oracle."""

import itertools
import logging
import math
import random
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import ContractError, TypeCheckError
from .semantics import (
    Converged, Crashed, DEFAULT_FUEL, Env, as_bool, env_tuple, evaluate, evaluate_deep, tuple_env,
)
from .sampling import diagonal_product, function_samples, random_value, universe
from .syntax import (
    Alt, Case, Con, Expr, Program, Return, Var, alpha_equal, free_vars, fresh, is_pure, mk_apps,
    mk_bool, substitute, tuple_arity, tuple_name,
)
from .typecheck import BOOL, TFun, TStm, TTuple, TUnit, Type, annotate_expr, tvar_tuple_type

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Contract forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Contract:
    pass


@dataclass(frozen=True)
class Pred(Contract):
    """``{x | p}``."""
    var: str
    pred: Expr


@dataclass(frozen=True)
class DepFun(Contract):
    """``x:c1 -> c2``."""
    var: str
    dom: Contract
    cod: Contract


@dataclass(frozen=True)
class TupleContract(Contract):
    items: Tuple[Contract, ...]


@dataclass(frozen=True)
class AnyContract(Contract):
    pass


@dataclass(frozen=True)
class StmOp(Contract):
    """``|| x:pre <> post || result``: pre-state, post-state and result of an STM operation."""
    var: str
    pre: Contract
    post: Contract
    result: Contract


ANY = AnyContract()


def ok() -> Pred:
    """``Ok``, the contract satisfied by every crash-free expression."""
    return Pred(fresh("_"), mk_bool(True))


def is_ok(c: Contract) -> bool:
    return isinstance(c, Pred) and isinstance(c.pred, Con) and c.pred.name == "True" and not c.pred.args


def pattern_pred(vars: Sequence[str], body: Expr, var: Optional[str] = None) -> Pred:
    """``{(x1,...,xn) | p}`` as ``{x | case x of {(x1,...,xn) -> p}}``."""
    if len(vars) == 1:
        return Pred(vars[0], body)
    x = var or fresh("s")
    return Pred(x, Case(Var(x), (Alt(tuple_name(len(vars)), tuple(vars), body),)))


def pred_pattern(c: Pred) -> Optional[Tuple[Tuple[str, ...], Expr]]:
    """The tuple pattern and body of a pattern predicate, if c is one."""
    p = c.pred
    if (isinstance(p, Case) and isinstance(p.scrutinee, Var) and p.scrutinee.name == c.var
            and len(p.alts) == 1 and tuple_arity(p.alts[0].con) not in (None, 0)
            and c.var not in free_vars(p.alts[0].body)):
        return p.alts[0].vars, p.alts[0].body
    return None


def scope_pattern(binder: str, vars: Sequence[str], c: Contract) -> Contract:
    """Make pattern variables of ``binder`` visible in the predicates of c that mention them."""
    if len(vars) < 2:
        return c
    if isinstance(c, Pred):
        if not any(v in free_vars(c.pred) for v in vars if v != c.var):
            return c
        inner = pred_pattern(c)
        wrap = lambda body: Case(Var(binder), (Alt(tuple_name(len(vars)), tuple(vars), body),))
        if inner is not None:
            pvars, body = inner
            return pattern_pred(pvars, wrap(body), c.var)
        return Pred(c.var, wrap(c.pred))
    if isinstance(c, DepFun):
        return DepFun(c.var, scope_pattern(binder, vars, c.dom), scope_pattern(binder, vars, c.cod))
    if isinstance(c, TupleContract):
        return TupleContract(tuple(scope_pattern(binder, vars, i) for i in c.items))
    if isinstance(c, StmOp):
        return StmOp(c.var, scope_pattern(binder, vars, c.pre), scope_pattern(binder, vars, c.post),
                     scope_pattern(binder, vars, c.result))
    return c


# ---------------------------------------------------------------------------
# Parameterized TVar contracts (consumed by specialization)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TVarParam:
    """``TVar[t,t']``: names for a TVar parameter's content before and after the operation."""
    pre: str
    post: str


@dataclass(frozen=True)
class ArgParam:
    var: str
    contract: Contract


@dataclass(frozen=True)
class TVarSpecContract:
    """``... -> TVar[t,t'] -> ... -> | p <> q | c``."""
    params: Tuple[Union[TVarParam, ArgParam], ...]
    pre: Expr
    post: Expr
    result: Contract


# ---------------------------------------------------------------------------
# Structural operations
# ---------------------------------------------------------------------------

def contract_free_vars(c: Contract) -> List[str]:
    out: List[str] = []

    def add(names: Iterable[str]) -> None:
        for n in names:
            if n not in out:
                out.append(n)

    if isinstance(c, Pred):
        add(v for v in free_vars(c.pred) if v != c.var)
    elif isinstance(c, DepFun):
        add(contract_free_vars(c.dom))
        add(v for v in contract_free_vars(c.cod) if v != c.var)
    elif isinstance(c, TupleContract):
        for item in c.items:
            add(contract_free_vars(item))
    elif isinstance(c, StmOp):
        add(contract_free_vars(c.pre))
        add(v for v in contract_free_vars(c.post) + contract_free_vars(c.result) if v != c.var)
    return out


def subst_contract(c: Contract, var: str, replacement: Expr) -> Contract:
    """Capture-avoiding ``c[replacement/var]``."""
    if isinstance(c, AnyContract):
        return c
    if isinstance(c, TupleContract):
        return TupleContract(tuple(subst_contract(i, var, replacement) for i in c.items))
    avoid = set(free_vars(replacement))
    if isinstance(c, Pred):
        if c.var == var:
            return c
        binder, pred = c.var, c.pred
        if binder in avoid:
            binder = fresh(binder)
            pred = substitute(pred, c.var, Var(binder))
        return Pred(binder, substitute(pred, var, replacement))
    if isinstance(c, DepFun):
        dom = subst_contract(c.dom, var, replacement)
        if c.var == var:
            return DepFun(c.var, dom, c.cod)
        binder, cod = _rebind(c.var, [c.cod], avoid)
        return DepFun(binder, dom, subst_contract(cod[0], var, replacement))
    if isinstance(c, StmOp):
        pre = subst_contract(c.pre, var, replacement)
        if c.var == var:
            return StmOp(c.var, pre, c.post, c.result)
        binder, (post, result) = _rebind(c.var, [c.post, c.result], avoid)
        return StmOp(binder, pre, subst_contract(post, var, replacement), subst_contract(result, var, replacement))
    raise ContractError(f"unknown contract form {type(c).__name__}")


def _rebind(binder: str, scope: List[Contract], avoid: set) -> Tuple[str, List[Contract]]:
    if binder not in avoid:
        return binder, scope
    new = fresh(binder)
    return new, [subst_contract(c, binder, Var(new)) for c in scope]


def subst_contract_many(c: Contract, mapping: Mapping[str, Expr]) -> Contract:
    for var, value in mapping.items():
        c = subst_contract(c, var, value)
    return c


def is_pure_contract(c: Contract) -> bool:
    """True iff c contains no STM operation contract."""
    if isinstance(c, StmOp):
        return False
    if isinstance(c, DepFun):
        return is_pure_contract(c.dom) and is_pure_contract(c.cod)
    if isinstance(c, TupleContract):
        return all(is_pure_contract(i) for i in c.items)
    return True


def contract_alpha_equal(a: Contract, b: Contract) -> bool:
    """Structural equality up to renaming of bound variables."""
    if type(a) is not type(b):
        return False
    if isinstance(a, AnyContract):
        return True
    if isinstance(a, Pred):
        z = Var(fresh("z"))
        return alpha_equal(substitute(a.pred, a.var, z), substitute(b.pred, b.var, z))
    if isinstance(a, TupleContract):
        return len(a.items) == len(b.items) and all(contract_alpha_equal(x, y) for x, y in zip(a.items, b.items))
    if isinstance(a, DepFun):
        z = Var(fresh("z"))
        return contract_alpha_equal(a.dom, b.dom) and contract_alpha_equal(
            subst_contract(a.cod, a.var, z), subst_contract(b.cod, b.var, z))
    if isinstance(a, StmOp):
        z = Var(fresh("z"))
        return (contract_alpha_equal(a.pre, b.pre)
                and contract_alpha_equal(subst_contract(a.post, a.var, z), subst_contract(b.post, b.var, z))
                and contract_alpha_equal(subst_contract(a.result, a.var, z), subst_contract(b.result, b.var, z)))
    return a == b


# ---------------------------------------------------------------------------
# Contract typing
# ---------------------------------------------------------------------------

def check_contract_type(c: Contract, ty: Type, program: Program, diagnostics: Optional[List[str]] = None,
                        ctx: Optional[Mapping[str, Type]] = None) -> bool:
    """True iff c is a well-formed contract for values of type ty.

    Mismatches are appended to ``diagnostics`` with the offending subcontract.
    """
    problems: List[str] = [] if diagnostics is None else diagnostics
    return _check_type(c, ty, program, dict(ctx or {}), problems)


def _check_type(c: Contract, ty: Type, program: Program, ctx: Dict[str, Type], problems: List[str]) -> bool:
    if isinstance(c, AnyContract):
        if isinstance(ty, TStm):
            problems.append(f"Any is a pure contract, but the type is {ty}")
            return False
        return True

    if isinstance(c, Pred):
        if isinstance(ty, TStm):
            problems.append(f"predicate contract on STM type {ty}")
            return False
        try:
            annotate_expr(c.pred, program, {**ctx, c.var: ty}, expected=BOOL)
        except TypeCheckError as exc:
            problems.append(f"predicate of {{{c.var} | ...}} at type {ty}: {exc.message}")
            return False
        return True

    if isinstance(c, DepFun):
        if not isinstance(ty, TFun):
            problems.append(f"function contract against non-function type {ty}")
            return False
        return (_check_type(c.dom, ty.arg, program, ctx, problems)
                and _check_type(c.cod, ty.res, program, {**ctx, c.var: ty.arg}, problems))

    if isinstance(c, TupleContract):
        if not c.items and isinstance(ty, TUnit):
            return True
        if len(c.items) == 1:
            return _check_type(c.items[0], ty, program, ctx, problems)
        if not isinstance(ty, TTuple) or len(ty.items) != len(c.items):
            problems.append(f"{len(c.items)}-tuple contract against type {ty}")
            return False
        return all(_check_type(i, t, program, ctx, problems) for i, t in zip(c.items, ty.items))

    if isinstance(c, StmOp):
        if not isinstance(ty, TStm):
            problems.append(f"STM operation contract against non-STM type {ty}")
            return False
        for part in (c.pre, c.post, c.result):
            if not is_pure_contract(part):
                problems.append("the parts of an STM operation contract must be pure contracts")
                return False
        env_ty = tvar_tuple_type(program)
        inner = {**ctx, c.var: env_ty}
        return (_check_type(c.pre, env_ty, program, ctx, problems)
                and _check_type(c.post, env_ty, program, inner, problems)
                and _check_type(c.result, ty.res, program, inner, problems))

    problems.append(f"unknown contract form {type(c).__name__}")
    return False


# ---------------------------------------------------------------------------
# Satisfaction oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Holds:
    pass


@dataclass(frozen=True)
class Violated:
    witness: Tuple[Tuple[str, Expr], ...]
    reason: str


@dataclass(frozen=True)
class Inconclusive:
    reason: str


SatVerdict = Union[Holds, Violated, Inconclusive]


@dataclass(frozen=True)
class _Slot:
    name: str
    contract: Contract
    ty: Type
    is_env: bool = False


class _Oracle:
    def __init__(self, program: Program, samples: int, fuel: int, seed: int):
        self.program = program
        self.samples = max(1, samples)
        self.fuel = fuel
        self.seed = seed
        self.defs = program.definitions()
        self.constructors = program.constructors()
        self.tvar_names = program.tvar_names
        self.env_ty = tvar_tuple_type(program)

    def nested(self) -> "_Oracle":
        return _Oracle(self.program, max(4, self.samples // 8), self.fuel, self.seed + 1)

    def spine(self, c: Contract, ty: Type) -> Tuple[List[_Slot], Contract, Type]:
        slots: List[_Slot] = []
        while isinstance(c, DepFun):
            if not isinstance(ty, TFun):
                raise ContractError(f"function contract against non-function type {ty}")
            slots.append(_Slot(c.var, c.dom, ty.arg))
            c, ty = c.cod, ty.res
        if isinstance(c, StmOp):
            if not isinstance(ty, TStm):
                raise ContractError(f"STM operation contract against non-STM type {ty}")
            slots.append(_Slot(c.var, c.pre, self.env_ty, is_env=True))
        return slots, c, ty

    def check(self, e: Expr, c: Contract, ty: Type) -> SatVerdict:
        slots, final, final_ty = self.spine(c, ty)
        if not slots:
            if isinstance(final, Pred) and isinstance(final_ty, TFun) and is_pure(e):
                reason = self.predicate(e, final)
                if reason is not None:
                    return Violated((), reason)
                return self.applied_safely(e, final_ty)
            reason = self.member(e, final, final_ty)
            return Holds() if reason is None else Violated((), reason)

        parts = [universe(s.ty, self.constructors) for s in slots]
        space = math.prod(len(p) for p in parts)
        exhaustive = space <= self.samples
        if exhaustive:
            candidates: Iterable[Tuple[Expr, ...]] = itertools.product(*parts)
        else:
            rng = random.Random(self.seed)
            systematic = itertools.islice(diagonal_product(parts), self.samples // 2)
            randomized = (
                tuple(random_value(s.ty, self.constructors, rng) for s in slots)
                for _ in range(self.samples - self.samples // 2)
            )
            candidates = itertools.chain(systematic, randomized)

        tried = 0
        for values in candidates:
            mapping: Dict[str, Expr] = {}
            admitted = True
            for slot, value in zip(slots, values):
                if self.member(value, subst_contract_many(slot.contract, mapping), slot.ty) is not None:
                    admitted = False
                    break
                mapping[slot.name] = value
            if not admitted:
                continue
            tried += 1
            reason = self.run(e, slots, values, mapping, final, final_ty)
            if reason is not None:
                logger.debug("oracle found a violation after %d samples: %s", tried, reason)
                return Violated(self.witness(slots, values), reason)

        logger.debug("oracle ran %d admitted samples (space %d, exhaustive=%s)", tried, space, exhaustive)
        if exhaustive:
            return Holds()
        return Inconclusive(f"{tried} sampled inputs satisfied the contract; the input space was not exhausted")

    def witness(self, slots: Sequence[_Slot], values: Sequence[Expr]) -> Tuple[Tuple[str, Expr], ...]:
        out: List[Tuple[str, Expr]] = []
        for slot, value in zip(slots, values):
            if slot.is_env:
                out.extend(tuple_env(value, self.tvar_names))
            else:
                out.append((slot.name, value))
        return tuple(out)

    def run(self, e: Expr, slots: Sequence[_Slot], values: Sequence[Expr], mapping: Mapping[str, Expr],
            final: Contract, final_ty: Type) -> Optional[str]:
        args = [v for s, v in zip(slots, values) if not s.is_env]
        applied = mk_apps(e, args)
        if not (slots and slots[-1].is_env):
            return self.member(applied, subst_contract_many(final, mapping), final_ty)

        assert isinstance(final, StmOp) and isinstance(final_ty, TStm)
        env = tuple_env(values[-1], self.tvar_names)
        outcome = evaluate(applied, env, self.defs, self.fuel)
        if isinstance(outcome, Crashed):
            return "the operation crashes"
        if not isinstance(outcome, Converged):
            return None
        if not isinstance(outcome.value, Return):
            return "the operation did not return"
        post = subst_contract_many(final.post, mapping)
        result = subst_contract_many(final.result, mapping)
        reason = self.member(outcome.value.expr, result, final_ty.res)
        if reason is not None:
            return f"result: {reason}"
        reason = self.member(env_tuple(outcome.env), post, self.env_ty)
        if reason is not None:
            return f"post-state: {reason}"
        return None

    def predicate(self, e: Expr, c: Pred) -> Optional[str]:
        outcome = evaluate_deep(e, Env(), self.defs, self.fuel)
        if isinstance(outcome, Crashed):
            return "the value crashes"
        if not isinstance(outcome, Converged):
            return None
        check = evaluate(substitute(c.pred, c.var, outcome.value), Env(), self.defs, self.fuel)
        if isinstance(check, Crashed):
            return "the predicate crashes"
        if isinstance(check, Converged) and as_bool(check.value) is False:
            return "the predicate is False"
        return None

    def applied_safely(self, e: Expr, ty: TFun) -> SatVerdict:
        """A function value is crash-free when no crash-free argument makes it crash."""
        return self.check(e, DepFun(fresh("arg"), ok(), ok()), ty)

    def member(self, e: Expr, c: Contract, ty: Type) -> Optional[str]:
        """None when e passes c on this evaluation, otherwise the reason it does not."""
        if isinstance(c, (DepFun, StmOp)):
            verdict = self.nested().check(e, c, ty)
            return verdict.reason if isinstance(verdict, Violated) else None

        if not is_pure(e):
            return "impure against pure contract"
        if isinstance(c, AnyContract):
            return None

        if isinstance(c, Pred):
            reason = self.predicate(e, c)
            if reason is None and isinstance(ty, TFun):
                verdict = self.nested().applied_safely(e, ty)
                return verdict.reason if isinstance(verdict, Violated) else None
            return reason

        if isinstance(c, TupleContract):
            if len(c.items) == 1:
                return self.member(e, c.items[0], ty)
            outcome = evaluate(e, Env(), self.defs, self.fuel)
            if isinstance(outcome, Crashed):
                return "the tuple crashes"
            if not isinstance(outcome, Converged):
                return None
            value = outcome.value
            if not (isinstance(value, Con) and value.name == tuple_name(len(c.items))):
                return "not a tuple of the expected arity"
            item_types = ty.items if isinstance(ty, TTuple) else (ty,) * len(c.items)
            for index, (component, item, item_ty) in enumerate(zip(value.args, c.items, item_types)):
                reason = self.member(component, item, item_ty)
                if reason is not None:
                    return f"component {index + 1}: {reason}"
            return None

        raise ContractError(f"unknown contract form {type(c).__name__}")


def satisfies_oracle(e: Expr, c: Contract, ty: Type, program: Program, samples: int = 200,
                     fuel: int = DEFAULT_FUEL, seed: int = 0) -> SatVerdict:
    """Approximate ``e ∈ c`` by evaluating e on sampled inputs and environments.

    Holds is definite only when every input of the small-scope space was tried; a
    Violated verdict always carries inputs that reproduce the violation.
    """
    if not is_pure(e) and not isinstance(c, (DepFun, StmOp)):
        return Violated((), "impure against pure contract")
    return _Oracle(program, samples, fuel, seed).check(e, c, ty)


def generate_inhabitant(c: Contract, ty: Type, program: Program, size: int = 200, seed: int = 0) -> Expr:
    """A closed pure expression satisfying c, found among small-scope and random values."""
    oracle = _Oracle(program, size, DEFAULT_FUEL, seed)
    constructors = program.constructors()
    if isinstance(c, DepFun) and isinstance(ty, TFun):
        for candidate in function_samples(ty, constructors):
            if not isinstance(oracle.check(candidate, c, ty), Violated):
                return candidate
        raise ContractError("no inhabitant within bounds")

    rng = random.Random(seed)
    candidates = itertools.chain(
        universe(ty, constructors),
        (random_value(ty, constructors, rng) for _ in range(size)),
    )
    for candidate in itertools.islice(candidates, size * 2):
        if oracle.member(candidate, c, ty) is None:
            return candidate
    raise ContractError("no inhabitant within bounds")
