"""Static contract checking: contract wrapping, verdicts and the per-transaction and
per-function checks."""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .config import CheckConfig, DEFAULT_CONFIG
from .contracts import (
    AnyContract, Contract, DepFun, Pred, StmOp, TupleContract, TVarSpecContract, Violated,
    check_contract_type, satisfies_oracle, subst_contract,
)
from .errors import CheckError, ContractError
from .simplify import crashy_functions, simplify
from .syntax import (
    Alt, App, BAD, Case, Con, Exc, Expr, FALSE_CON, FunRef, Lam, Program, TRUE_CON, Transaction, UNR,
    Var, children, free_vars, fresh, function_refs, map_children, mk_tuple, substitute, tuple_name,
)
from .transform import (
    close_transaction, gamma_expand, invariant_to_contract, t_contract, t_expr, t_program,
)
from .typecheck import TStm, UNIT, fun_type

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Wrapping
# ---------------------------------------------------------------------------

def wrap_ensure(e: Expr, c: Contract) -> Expr:
    """``e ▷ c``: e as seen by its context; a violation by e is BAD."""
    return _wrap(e, c, BAD, UNR)


def wrap_assume(e: Expr, c: Contract) -> Expr:
    """``e ◁ c``: e as assumed by its definition; a violation is UNR."""
    return _wrap(e, c, UNR, BAD)


def _wrap(e: Expr, c: Contract, blame: Exc, excuse: Exc) -> Expr:
    if isinstance(c, AnyContract):
        return e

    if isinstance(c, Pred):
        return _guard(substitute(c.pred, c.var, e), e, blame)

    if isinstance(c, TupleContract):
        if len(c.items) == 1:
            return _wrap(e, c.items[0], blame, excuse)
        names = tuple(fresh("r") for _ in c.items)
        parts = [_wrap(Var(n), item, blame, excuse) for n, item in zip(names, c.items)]
        return Case(e, (Alt(tuple_name(len(names)), names, mk_tuple(parts)),))

    if isinstance(c, DepFun):
        v = c.var if c.var not in free_vars(e) else fresh(c.var)
        if isinstance(c.dom, Pred):
            # The argument check is hoisted out of the body: λv. case p[v] of {True -> ...; False -> excuse}
            inner = _wrap(_apply(e, Var(v)), subst_contract(c.cod, c.var, Var(v)), blame, excuse)
            return Lam(v, _guard(substitute(c.dom.pred, c.dom.var, Var(v)), inner, excuse))
        arg = _wrap(Var(v), c.dom, excuse, blame)
        return Lam(v, _wrap(_apply(e, arg), subst_contract(c.cod, c.var, arg), blame, excuse))

    if isinstance(c, StmOp):
        raise ContractError("STM operation contracts must be transformed before wrapping")
    raise ContractError(f"cannot wrap with contract form {type(c).__name__}")


def _guard(test: Expr, body: Expr, otherwise: Exc) -> Case:
    return Case(test, (Alt(TRUE_CON, (), body), Alt(FALSE_CON, (), otherwise)))


def _apply(fun: Expr, arg: Expr) -> Expr:
    if isinstance(fun, Lam):
        return substitute(fun.body, fun.var, arg)
    return App(fun, arg)


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------

Branch = Tuple[Expr, str]  # a scrutinee and the constructor its alternative matched


@dataclass(frozen=True)
class BadSite:
    """A BAD (or a call to a possibly crashing function) left in a residual, with the branches leading to it."""
    path: Tuple[Branch, ...]
    target: Expr


@dataclass(frozen=True)
class Safe:
    pass


@dataclass(frozen=True)
class Unsafe:
    witness: Tuple[Tuple[str, Expr], ...]
    reason: str
    trace: Tuple[Branch, ...] = ()


@dataclass(frozen=True)
class Unknown:
    residual: Expr
    bad_sites: Tuple[BadSite, ...]
    reason: str = "BAD remains after simplification"


Verdict = Union[Safe, Unsafe, Unknown]


@dataclass(frozen=True)
class VariantResult:
    pure: Expr            # simplified transformed expression
    contract: Contract    # transformed contract
    residual: Expr        # simplified wrapped expression
    bad_sites: Tuple[BadSite, ...]

    @property
    def safe(self) -> bool:
        return not self.bad_sites


@dataclass(frozen=True)
class CheckResult:
    name: str
    kind: str  # "transaction" or "function"
    verdict: Verdict
    variants: Tuple[VariantResult, ...] = ()


def verdict_name(v: Verdict) -> str:
    return type(v).__name__


def bad_sites(e: Expr, crashy: Sequence[str] = ()) -> List[BadSite]:
    """Reachable-BAD candidates of a residual: BADs and calls to crashing functions."""
    out: List[BadSite] = []

    def walk(node: Expr, path: Tuple[Branch, ...]) -> None:
        if isinstance(node, Exc):
            if node.kind == "BAD":
                out.append(BadSite(path, node))
            return
        if isinstance(node, FunRef):
            if node.name in crashy:
                out.append(BadSite(path, node))
            return
        if isinstance(node, Case):
            walk(node.scrutinee, path)
            for alt in node.alts:
                pattern = Con(alt.con, tuple(Var(v) for v in alt.vars))
                walk(alt.body, path + ((node.scrutinee, _describe(pattern)),))
            return
        for child in children(node):
            walk(child, path)

    walk(e, ())
    return out


def _describe(pattern: Con) -> str:
    if not pattern.args:
        return pattern.name
    return f"{pattern.name} {' '.join(a.name for a in pattern.args if isinstance(a, Var))}"


# ---------------------------------------------------------------------------
# Checking
# ---------------------------------------------------------------------------

class Checker:
    """Checks the transactions and contracted functions of one type-checked, specialized program."""

    def __init__(self, program: Program, config: CheckConfig = DEFAULT_CONFIG):
        self.program = program
        self.config = config
        self.transformed = t_program(program)
        self.tvars = program.tvar_names

        # Contracted callees are abstracted by their contracts; the others are inlined.
        self.abstractions: Dict[str, Expr] = {}
        for name, fdef in self.transformed.functions.items():
            if fdef.contract is not None:
                self.abstractions[name] = wrap_assume(Var(fresh(name)), fdef.contract)
        self.defs: Dict[str, Expr] = {
            name: self.abstract(fdef.body)
            for name, fdef in self.transformed.functions.items()
            if name not in self.abstractions
        }
        self.crashy = crashy_functions(self.defs)
        self.full_defs = self.transformed.definitions()

    def abstract(self, e: Expr) -> Expr:
        if isinstance(e, FunRef):
            if e.name in self.abstractions:
                return self.abstractions[e.name]
            return e
        return map_children(e, self.abstract)

    def residual(self, e: Expr, c: Contract) -> Tuple[Expr, Tuple[BadSite, ...]]:
        wrapped = wrap_ensure(self.abstract(e), c)
        out = simplify(wrapped, self.defs, self.config, self.crashy)
        return out, tuple(bad_sites(out, self.crashy))

    def transaction(self, name: str) -> CheckResult:
        tx = self.program.transactions.get(name)
        if tx is None:
            raise CheckError(f"no transaction named '{name}'")
        if self.program.invariant is None:
            raise CheckError("the program declares no invariant")
        invariant = invariant_to_contract(self.program.invariant, self.program)
        for (param, c), ty in zip(tx.params, tx.param_types):
            diagnostics: List[str] = []
            if not check_contract_type(c, ty, self.program, diagnostics):
                raise ContractError(f"contract of parameter '{param}' of '{name}': {'; '.join(diagnostics)}",
                                    offset=tx.loc)

        variants = []
        for variant in gamma_expand(tx.body, self.config.gamma_cap):
            closed, contract = close_transaction(variant, tx.params, invariant)
            pure = t_expr(closed, self.tvars)
            tc = t_contract(contract)
            residual, sites = self.residual(pure, tc)
            variants.append(VariantResult(simplify(pure, self.full_defs, self.config),
                                          tc, residual, sites))
        logger.debug("transaction %s: %d variant(s), %d with BAD left", name, len(variants),
                     sum(1 for v in variants if not v.safe))

        if all(v.safe for v in variants):
            return CheckResult(name, "transaction", Safe(), tuple(variants))

        closed, contract = close_transaction(tx.body, tx.params, invariant)
        ty = fun_type(list(tx.param_types), tx.body.ty or TStm(UNIT))
        return CheckResult(name, "transaction", self.refute(closed, contract, ty, variants), tuple(variants))

    def function(self, name: str) -> CheckResult:
        fdef = self.program.functions.get(name)
        if fdef is None:
            raise CheckError(f"no function named '{name}'")
        if fdef.contract is None:
            raise CheckError(f"function '{name}' has no contract")
        if isinstance(fdef.contract, TVarSpecContract):
            raise CheckError(f"function '{name}' must be specialized before checking")
        diagnostics: List[str] = []
        if not check_contract_type(fdef.contract, fdef.type, self.program, diagnostics):
            raise ContractError(f"contract of '{name}': {'; '.join(diagnostics)}", offset=fdef.loc)

        transformed = self.transformed.functions[name]
        uncontracted = sorted(function_refs(transformed.body) - set(self.abstractions))
        if self.config.strict_modular and uncontracted:
            raise CheckError(f"'{name}' calls '{uncontracted[0]}', which has no contract", offset=fdef.loc)
        residual, sites = self.residual(transformed.body, transformed.contract)
        variant = VariantResult(transformed.body, transformed.contract, residual, sites)
        if variant.safe:
            return CheckResult(name, "function", Safe(), (variant,))
        verdict = self.refute(FunRef(name), fdef.contract, fdef.type, [variant])
        return CheckResult(name, "function", verdict, (variant,))

    def refute(self, e: Expr, c: Contract, ty, variants: Sequence[VariantResult]) -> Verdict:
        """Unsafe when the interpreter confirms a violation, otherwise Unknown."""
        failing = next(v for v in variants if not v.safe)
        unknown = Unknown(failing.residual, failing.bad_sites)
        if not self.config.witness_search:
            return unknown
        verdict = satisfies_oracle(e, c, ty, self.program, samples=self.config.samples,
                                   fuel=self.config.oracle_fuel, seed=self.config.seed)
        logger.debug("witness search: %s", type(verdict).__name__)
        if isinstance(verdict, Violated):
            return Unsafe(verdict.witness, verdict.reason, failing.bad_sites[0].path)
        return unknown


def check_transaction(tx: Union[str, Transaction], program: Program, config: CheckConfig = DEFAULT_CONFIG) -> CheckResult:
    name = tx if isinstance(tx, str) else tx.name
    return Checker(program, config).transaction(name)


def modular_check_function(name: str, program: Program, config: CheckConfig = DEFAULT_CONFIG) -> CheckResult:
    return Checker(program, config).function(name)


def check_all(program: Program, config: CheckConfig = DEFAULT_CONFIG,
              only: Optional[Sequence[str]] = None) -> Tuple[List[CheckResult], List[CheckResult]]:
    """Check every transaction (or those named in ``only``) and every contracted function, in declaration order."""
    checker = Checker(program, config)
    names = list(program.transactions)
    if only:
        missing = [n for n in only if n not in program.transactions]
        if missing:
            raise CheckError(f"no transaction named '{missing[0]}'")
        names = [n for n in names if n in only]
    transactions = [checker.transaction(n) for n in names]
    functions = [checker.function(n) for n, f in program.functions.items()
                 if f.contract is not None and not only]
    return transactions, functions


def overall(results: Sequence[CheckResult]) -> Verdict:
    """Safe iff every result is Safe; Unsafe if any is; otherwise the first Unknown."""
    for r in results:
        if isinstance(r.verdict, Unsafe):
            return r.verdict
    for r in results:
        if isinstance(r.verdict, Unknown):
            return r.verdict
    return Safe()

