"""Small-step reference interpreter for the core STM language.

The interpreter is deliberately literal: call-by-name application, evaluation contexts
restricted to function position, case scrutinee and the left operand of a bind, and
exceptions propagating out of any context. It serves as the oracle for contract
satisfaction, witness confirmation and the property suites.
"""

import logging
from dataclasses import dataclass, replace
from typing import Callable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import ContractError, StuckError, TypeCheckError
from .syntax import (
    App, Bind, Case, Con, Exc, Expr, FALSE_CON, FunRef, IntLit, Lam, OrElse, PRIM_SPECS, PrimOp,
    ReadTVar, Retry, Return, TRUE_CON, TVarRef, Var, WriteTVar, is_pure, mk_bool, mk_tuple, mk_unit,
    size, substitute, substitute_many, tuple_name,
)

logger = logging.getLogger(__name__)

DEFAULT_FUEL = 10_000


# ---------------------------------------------------------------------------
# Environment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Env:
    """The transactional environment: an ordered, total map from TVars to pure expressions."""
    bindings: Tuple[Tuple[str, Expr], ...] = ()

    @classmethod
    def of(cls, names: Sequence[str], values: Sequence[Expr]) -> "Env":
        if len(names) != len(values):
            raise ContractError(f"environment needs {len(names)} values, got {len(values)}")
        for name, value in zip(names, values):
            if not is_pure(value):
                raise TypeCheckError(f"TVar '{name}' would hold an impure expression")
        return cls(tuple(zip(names, values)))

    def get(self, name: str) -> Expr:
        for key, value in self.bindings:
            if key == name:
                return value
        raise KeyError(name)

    def set(self, name: str, value: Expr) -> "Env":
        if not is_pure(value):
            raise TypeCheckError(f"TVar '{name}' would hold an impure expression")
        if name not in self.names():
            raise KeyError(name)
        return Env(tuple((k, value if k == name else v) for k, v in self.bindings))

    def names(self) -> List[str]:
        return [k for k, _ in self.bindings]

    def values(self) -> List[Expr]:
        return [v for _, v in self.bindings]

    def __iter__(self) -> Iterator[Tuple[str, Expr]]:
        return iter(self.bindings)

    def __len__(self) -> int:
        return len(self.bindings)


def env_tuple(env: Env) -> Expr:
    """σ as the tuple (σ(t1), ..., σ(tn)); unit when no TVars are declared."""
    values = env.values()
    if not values:
        return mk_unit()
    return mk_tuple(values)


def tuple_env(e: Expr, names: Sequence[str]) -> Env:
    """Inverse of env_tuple for the TVars ``names``."""
    n = len(names)
    if n == 0:
        if not (isinstance(e, Con) and e.name == tuple_name(0)):
            raise ContractError("expected () for an empty TVar set")
        return Env()
    if n == 1:
        return Env.of(names, [e])
    if not (isinstance(e, Con) and e.name == tuple_name(n) and len(e.args) == n):
        raise ContractError(f"expected a {n}-tuple of TVar contents")
    for component in e.args:
        if not is_pure(component):
            raise ContractError("environment tuple has an impure component")
    return Env.of(names, list(e.args))


# ---------------------------------------------------------------------------
# Step results and outcomes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Stepped:
    expr: Expr
    env: Env
    rule: str


@dataclass(frozen=True)
class Value:
    expr: Expr
    env: Env


@dataclass(frozen=True)
class Stuck:
    reason: str


StepResult = Union[Stepped, Value, Stuck]


@dataclass(frozen=True)
class Converged:
    value: Expr
    env: Env

    @property
    def payload(self) -> Expr:
        """The returned expression of an STM computation, or the value itself."""
        return self.value.expr if isinstance(self.value, Return) else self.value


@dataclass(frozen=True)
class Crashed:
    env: Env


@dataclass(frozen=True)
class Unreachable:
    env: Env
    retried: bool = False


@dataclass(frozen=True)
class FuelExhausted:
    pass


EvalOutcome = Union[Converged, Crashed, Unreachable, FuelExhausted]


@dataclass(frozen=True)
class _Checkpoint(Expr):
    """An ``orElse`` in progress: the saved environment is restored if the body retries."""
    body: Expr
    handler: Expr
    saved: Env


# ---------------------------------------------------------------------------
# Single step
# ---------------------------------------------------------------------------

def is_value(e: Expr) -> bool:
    return isinstance(e, (Con, Lam, Exc, Return, IntLit))


def step(e: Expr, env: Env, defs: Mapping[str, Expr]) -> StepResult:
    """Perform one reduction step of ⟨e, σ⟩."""
    if is_value(e):
        return Value(e, env)

    if isinstance(e, Var):
        return Stuck(f"free variable '{e.name}'")

    if isinstance(e, FunRef):
        body = defs.get(e.name)
        if body is None:
            return Stuck(f"undefined function '{e.name}'")
        return Stepped(body, env, "CALL")

    if isinstance(e, App):
        fun = e.fun
        if isinstance(fun, Lam):
            return Stepped(substitute(fun.body, fun.var, e.arg), env, "APP")
        if isinstance(fun, Exc):
            return Stepped(fun, env, "EXC")
        if is_value(fun):
            return Stuck("application of a non-function")
        return _in_context(step(fun, env, defs), lambda x: replace(e, fun=x))

    if isinstance(e, Case):
        scrutinee = e.scrutinee
        if isinstance(scrutinee, Exc):
            return Stepped(scrutinee, env, "EXC")
        if isinstance(scrutinee, Con):
            for alt in e.alts:
                if alt.con == scrutinee.name and len(alt.vars) == len(scrutinee.args):
                    return Stepped(substitute_many(alt.body, dict(zip(alt.vars, scrutinee.args))), env, "CASE")
            return Stuck(f"no alternative for constructor '{scrutinee.name}'")
        if is_value(scrutinee):
            return Stuck("case on a non-constructor value")
        return _in_context(step(scrutinee, env, defs), lambda x: replace(e, scrutinee=x))

    if isinstance(e, PrimOp):
        return _step_prim(e, env, defs)

    if isinstance(e, ReadTVar):
        return Stepped(Return(env.get(e.tvar)), env, "READ")

    if isinstance(e, WriteTVar):
        return Stepped(Return(mk_unit()), env.set(e.tvar, e.expr), "WRITE")

    if isinstance(e, Bind):
        left = e.left
        if isinstance(left, Return):
            return Stepped(App(e.right, left.expr), env, "BIND")
        if isinstance(left, Exc):
            return Stepped(left, env, "EXC")
        if isinstance(left, Retry):
            return Stepped(left, env, "RETRY")
        if is_value(left):
            return Stuck("bind on a non-STM value")
        return _in_context(step(left, env, defs), lambda x: replace(e, left=x))

    if isinstance(e, OrElse):
        return Stepped(_Checkpoint(e.left, e.right, env), env, "ORELSE")

    if isinstance(e, _Checkpoint):
        body = e.body
        if isinstance(body, Return):
            return Stepped(body, env, "ORELSE-COMMIT")
        if isinstance(body, Retry):
            return Stepped(e.handler, e.saved, "ORELSE-ROLLBACK")
        if isinstance(body, Exc):
            return Stepped(body, env, "EXC")
        if is_value(body):
            return Stuck("orElse on a non-STM value")
        return _in_context(step(body, env, defs), lambda x: replace(e, body=x))

    if isinstance(e, Retry):
        return Stuck("retry")

    if isinstance(e, TVarRef):
        return Stuck(f"TVar '{e.name}' used as a value")

    return Stuck(f"unsupported expression {type(e).__name__}")


def _in_context(result: StepResult, rebuild: Callable[[Expr], Expr]) -> StepResult:
    if isinstance(result, Stepped):
        return Stepped(rebuild(result.expr), result.env, result.rule)
    if isinstance(result, Value):
        return Stuck("value in redex position")
    return result


def _step_prim(e: PrimOp, env: Env, defs: Mapping[str, Expr]) -> StepResult:
    spec = PRIM_SPECS.get(e.op)
    if spec is None:
        return Stuck(f"unknown primitive '{e.op}'")
    if len(e.args) != spec.arity:
        return Stuck(f"primitive '{e.op}' expects {spec.arity} arguments")

    for i, arg in enumerate(e.args):
        def rebuild(x: Expr, i: int = i) -> Expr:
            args = list(e.args)
            args[i] = x
            return replace(e, args=tuple(args))

        if spec.arg_type == "eq":
            forced = _step_ground(arg, env, defs)
            if forced is None:
                continue
            if isinstance(forced, Exc):
                return Stepped(forced, env, "EXC")
            return _in_context(forced, rebuild)

        if isinstance(arg, Exc):
            return Stepped(arg, env, "EXC")
        if spec.arg_type == "int" and isinstance(arg, IntLit):
            continue
        if spec.arg_type == "bool" and _is_bool(arg):
            continue
        if is_value(arg):
            return Stuck(f"primitive '{e.op}' applied to a non-{spec.arg_type} value")
        return _in_context(step(arg, env, defs), rebuild)

    return Stepped(delta(e.op, e.args), env, "DELTA")


def _step_ground(e: Expr, env: Env, defs: Mapping[str, Expr]) -> Union[None, Exc, StepResult]:
    """Drive e towards a ground data value; None when it already is one."""
    if isinstance(e, IntLit):
        return None
    if isinstance(e, Exc):
        return e
    if isinstance(e, Con):
        for j, arg in enumerate(e.args):
            forced = _step_ground(arg, env, defs)
            if forced is None:
                continue
            if isinstance(forced, (Exc, Stuck)):
                return forced

            def rebuild(x: Expr, j: int = j) -> Expr:
                args = list(e.args)
                args[j] = x
                return replace(e, args=tuple(args))

            return _in_context(forced, rebuild)
        return None
    if is_value(e):
        return Stuck("equality on a function or STM value")
    return step(e, env, defs)


def _is_bool(e: Expr) -> bool:
    return isinstance(e, Con) and e.name in (TRUE_CON, FALSE_CON) and not e.args


def delta(op: str, args: Sequence[Expr]) -> Expr:
    """Apply a primitive to ground arguments."""
    if op == "==":
        return mk_bool(args[0] == args[1])
    if op == "not":
        return mk_bool(args[0].name == FALSE_CON)
    if op in ("&&", "||"):
        a, b = (arg.name == TRUE_CON for arg in args)
        return mk_bool(a and b if op == "&&" else a or b)
    x, y = args[0].value, args[1].value
    if op == "+":
        return IntLit(x + y)
    if op == "-":
        return IntLit(x - y)
    if op == "*":
        return IntLit(x * y)
    if op == ">":
        return mk_bool(x > y)
    if op == ">=":
        return mk_bool(x >= y)
    if op == "<":
        return mk_bool(x < y)
    if op == "<=":
        return mk_bool(x <= y)
    raise ValueError(f"unknown primitive '{op}'")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass
class _Machine:
    defs: Mapping[str, Expr]
    fuel: int
    trace: Optional[List[Tuple[str, int]]] = None

    def whnf(self, e: Expr, env: Env) -> EvalOutcome:
        while True:
            if self.fuel <= 0:
                logger.debug("evaluation ran out of fuel")
                return FuelExhausted()
            result = step(e, env, self.defs)
            if isinstance(result, Stepped):
                self.fuel -= 1
                if self.trace is not None:
                    self.trace.append((result.rule, size(result.expr)))
                e, env = result.expr, result.env
                continue
            if isinstance(result, Value):
                if isinstance(e, Exc):
                    return Crashed(env) if e.kind == "BAD" else Unreachable(env)
                return Converged(e, env)
            if isinstance(e, Retry):
                return Unreachable(env, retried=True)
            raise StuckError(result.reason)

    def deep(self, e: Expr, env: Env) -> EvalOutcome:
        outcome = self.whnf(e, env)
        if not isinstance(outcome, Converged):
            return outcome
        value = outcome.value
        if isinstance(value, Return):
            inner = self.deep(value.expr, outcome.env)
            if not isinstance(inner, Converged):
                return inner
            return Converged(Return(inner.value), outcome.env)
        if isinstance(value, Con) and value.args:
            args = []
            for arg in value.args:
                inner = self.deep(arg, outcome.env)
                if not isinstance(inner, Converged):
                    return inner
                args.append(inner.value)
            return Converged(Con(value.name, tuple(args)), outcome.env)
        return outcome


def evaluate(e: Expr, env: Env, defs: Optional[Mapping[str, Expr]] = None, fuel: int = DEFAULT_FUEL,
             trace: Optional[List[Tuple[str, int]]] = None) -> EvalOutcome:
    """Reduce ⟨e, σ⟩ to a value (weak head normal form) within ``fuel`` steps."""
    return _Machine(defs or {}, fuel, trace).whnf(e, env)


def evaluate_deep(e: Expr, env: Env, defs: Optional[Mapping[str, Expr]] = None, fuel: int = DEFAULT_FUEL,
                  trace: Optional[List[Tuple[str, int]]] = None) -> EvalOutcome:
    """Like evaluate, but also normalizes constructor arguments and return payloads."""
    return _Machine(defs or {}, fuel, trace).deep(e, env)


def normalize_env(env: Env, defs: Optional[Mapping[str, Expr]] = None, fuel: int = DEFAULT_FUEL) -> Optional[Env]:
    """Fully evaluate every stored TVar content; None if any of them fails to converge."""
    values = []
    for _, value in env:
        outcome = evaluate_deep(value, Env(), defs, fuel)
        if not isinstance(outcome, Converged):
            return None
        values.append(outcome.value)
    return Env(tuple(zip(env.names(), values)))


def as_bool(e: Expr) -> Optional[bool]:
    if isinstance(e, Con) and not e.args and e.name in (TRUE_CON, FALSE_CON):
        return e.name == TRUE_CON
    return None
