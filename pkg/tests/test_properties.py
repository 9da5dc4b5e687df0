"""Property tests: rewriting and purification agree with the interpreter."""

from dataclasses import replace
from itertools import product

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from stmguard.engine.arith import PathCondition, arith_decide
from stmguard.engine.checker import Safe, modular_check_function
from stmguard.engine.config import DEFAULT_CONFIG
from stmguard.engine.contracts import (
    ANY, DepFun, Holds, Pred, StmOp, TupleContract, Violated, is_pure_contract, ok, satisfies_oracle,
)
from stmguard.engine.semantics import (
    Converged, Env, FuelExhausted, as_bool, env_tuple, evaluate, evaluate_deep, normalize_env,
)
from stmguard.engine.simplify import simplify
from stmguard.engine.syntax import (
    Alt, App, BAD, Bind, Case, FALSE_CON, FunctionDef, FunRef, IntLit, Lam, PrimOp, Program, ReadTVar, Retry,
    Return, TRUE_CON, TVarDecl, Var, WriteTVar, alpha_equal, is_pure, mk_tuple, size, substitute,
    substitute_many,
)
from stmguard.engine.transform import t_contract, t_expr, transformed_type
from stmguard.engine.typecheck import INT, TStm, annotate_expr
from stmguard.frontend.parser import parse, parse_contract, parse_expr, prepare
from stmguard.frontend.pretty import pretty_expr

literals = st.integers(min_value=-3, max_value=3).map(IntLit)
leaves = st.one_of(literals, st.just(Var("x")))


def _arith(kids):
    return st.tuples(st.sampled_from(["+", "-", "*"]), kids, kids).map(lambda t: PrimOp(t[0], (t[1], t[2])))


def _comparison(kids):
    return st.tuples(st.sampled_from([">", ">=", "<", "<=", "=="]), kids, kids).map(
        lambda t: PrimOp(t[0], (t[1], t[2])))


def _branch(kids):
    return st.tuples(_comparison(kids), kids, st.one_of(kids, st.just(BAD))).map(
        lambda t: Case(t[0], (Alt(TRUE_CON, (), t[1]), Alt(FALSE_CON, (), t[2]))))


int_exprs = st.recursive(leaves, lambda kids: st.one_of(_arith(kids), _branch(kids)), max_leaves=10)


def _outcome(e, x):
    outcome = evaluate_deep(substitute(e, "x", IntLit(x)), Env())
    if isinstance(outcome, Converged):
        return outcome.value
    return type(outcome).__name__


@settings(max_examples=1000, deadline=None)
@given(e=int_exprs, x=st.integers(min_value=-4, max_value=4))
def test_simplification_preserves_evaluation(e, x):
    assert _outcome(simplify(e), x) == _outcome(e, x)


@settings(max_examples=100, deadline=None)
@given(e=int_exprs)
def test_printed_expressions_parse_back(e):
    assert alpha_equal(parse_expr(pretty_expr(e), scope=("x",)), e)


ops = st.lists(
    st.one_of(
        st.just(("read", 0)),
        st.tuples(st.just("write"), st.integers(min_value=-3, max_value=3)),
        st.tuples(st.just("bump"), st.integers(min_value=-3, max_value=3)),
    ),
    max_size=6,
)


def build(steps, index=0, last=None):
    """A chain of binds over the single TVar ``t``, returning the last value read."""
    if index == len(steps):
        return Return(Var(last) if last else IntLit(0))
    kind, k = steps[index]
    if kind == "read":
        var = f"v{index}"
        return Bind(ReadTVar("t"), Lam(var, build(steps, index + 1, var)))
    payload = IntLit(k) if kind == "write" or last is None else PrimOp("+", (Var(last), IntLit(k)))
    return Bind(WriteTVar("t", payload), Lam(f"u{index}", build(steps, index + 1, last)))


@settings(max_examples=60, deadline=None)
@given(steps=ops, start=st.integers(min_value=-3, max_value=3))
def test_purified_transactions_agree_with_the_interpreter(steps, start):
    e = build(steps)
    direct = evaluate_deep(e, Env.of(["t"], [IntLit(start)]))
    assert isinstance(direct, Converged)
    final = normalize_env(direct.env)

    purified = evaluate_deep(App(t_expr(e, ["t"]), IntLit(start)), Env())
    assert isinstance(purified, Converged)
    result, state = purified.value.args
    assert result == direct.value.expr
    assert state == final.get("t")


# ---------------------------------------------------------------------------
# Generated STM operations over two TVars
# ---------------------------------------------------------------------------

TWO = prepare(parse("""\
tvar a :: Int = 0
tvar b :: Int = 0

spin :: STM Int
spin = spin
""", "props.stm").program)
TVARS = TWO.tvar_names
DEFS = TWO.definitions()
SPIN = FunRef("spin")

small = st.integers(min_value=-2, max_value=2)


def pure_ints(scope):
    atoms = [small.map(IntLit)] + ([st.sampled_from(scope).map(Var)] if scope else [])
    atom = st.one_of(*atoms)
    return st.one_of(atom, st.tuples(st.sampled_from(["+", "-"]), atom, atom).map(
        lambda t: PrimOp(t[0], (t[1], t[2]))))


@st.composite
def stm_ops(draw, scope=(), depth=3):
    """Well-typed ``STM Int`` operations: reads, writes, binds, branches, applications and retry."""
    if depth == 0 or draw(st.integers(min_value=0, max_value=3)) == 0:
        if draw(st.integers(min_value=0, max_value=19)) == 0:
            return SPIN
        return draw(st.one_of(
            st.sampled_from(TVARS).map(ReadTVar),
            pure_ints(scope).map(Return),
            st.just(Retry()),
        ))
    var = f"x{depth}"
    kind = draw(st.sampled_from(["bind", "write", "branch", "apply"]))
    if kind == "bind":
        left = draw(stm_ops(scope, depth - 1))
        return Bind(left, Lam(var, draw(stm_ops(scope + (var,), depth - 1))))
    if kind == "write":
        write = WriteTVar(draw(st.sampled_from(TVARS)), draw(pure_ints(scope)))
        return Bind(write, Lam(f"u{depth}", draw(stm_ops(scope, depth - 1))))
    if kind == "branch":
        test = PrimOp(">", (draw(pure_ints(scope)), IntLit(0)))
        yes = draw(stm_ops(scope, depth - 1))
        no = BAD if draw(st.booleans()) else draw(stm_ops(scope, depth - 1))
        return Case(test, (Alt(TRUE_CON, (), yes), Alt(FALSE_CON, (), no)))
    return App(Lam(var, draw(stm_ops(scope + (var,), depth - 1))), draw(pure_ints(scope)))


typed_ops = stm_ops().map(lambda e: annotate_expr(e, TWO))


@settings(max_examples=1000, deadline=None)
@given(e=typed_ops)
def test_purified_operations_are_pure_fixed_points(e):
    p = t_expr(e, TVARS)
    assert is_pure(p)
    assert t_expr(p, TVARS) is p


@settings(max_examples=1000, deadline=None)
@given(e=int_exprs)
def test_pure_expressions_are_left_alone(e):
    assert t_expr(e, TVARS) is e


@settings(max_examples=1000, deadline=None)
@given(e=typed_ops)
def test_purified_operations_take_the_environment(e):
    assume(not isinstance(e, Retry) and not is_pure(e))
    outcome = evaluate(t_expr(e, TVARS), Env(), DEFS)
    assert isinstance(outcome, Converged)
    assert isinstance(outcome.value, Lam)


def _run_both(e, values):
    direct = evaluate_deep(e, Env.of(TVARS, values), DEFS, fuel=400)
    purified = evaluate_deep(App(t_expr(e, TVARS), mk_tuple(values)), Env(), DEFS, fuel=5000)
    return direct, purified


@settings(max_examples=1000, deadline=None)
@given(e=typed_ops, envs=st.lists(st.tuples(small, small), min_size=5, max_size=5))
def test_purified_operations_agree_with_the_interpreter(e, envs):
    for pair in envs:
        direct, purified = _run_both(e, [IntLit(v) for v in pair])
        if isinstance(direct, Converged):
            assert isinstance(purified, Converged)
            result, state = purified.value.args
            assert result == direct.value.expr
            assert state == env_tuple(normalize_env(direct.env, DEFS))
        else:
            assert type(purified) is type(direct)


def test_divergence_survives_purification():
    e = annotate_expr(Bind(ReadTVar("a"), Lam("x", SPIN)), TWO)
    direct, purified = _run_both(e, [IntLit(1), IntLit(2)])
    assert isinstance(direct, FuelExhausted)
    assert isinstance(purified, FuelExhausted)


# ---------------------------------------------------------------------------
# Contracts
# ---------------------------------------------------------------------------

contract_leaves = st.one_of(
    st.just(ok()),
    st.just(ANY),
    small.map(lambda k: Pred("v", PrimOp(">", (Var("v"), IntLit(k))))),
)


def _contract_nodes(kids):
    return st.one_of(
        st.tuples(kids, kids).map(lambda t: DepFun("v", t[0], t[1])),
        st.lists(kids, min_size=2, max_size=3).map(lambda items: TupleContract(tuple(items))),
        st.tuples(kids, kids, kids).map(lambda t: StmOp("s", t[0], t[1], t[2])),
    )


contracts = st.recursive(contract_leaves, _contract_nodes, max_leaves=8)


@settings(max_examples=1000, deadline=None)
@given(c=contracts)
def test_purified_contracts_are_pure_and_stable(c):
    p = t_contract(c)
    assert is_pure_contract(p)
    assert t_contract(p) == p
    if is_pure_contract(c):
        assert p == c


# ---------------------------------------------------------------------------
# Every small operation over one TVar
# ---------------------------------------------------------------------------

ONE = Program(tvars=(TVarDecl("t", INT, IntLit(1)),))
INVARIANTS = ["|| {t | t > 0} <> {t' | t' > 0} || Any", "|| Ok <> Ok || Any"]


def _lefts(x):
    atoms = [ReadTVar("t"), Retry(), BAD, Return(IntLit(0)), WriteTVar("t", IntLit(0)), WriteTVar("t", IntLit(1))]
    if x:
        atoms += [
            Return(Var(x)),
            WriteTVar("t", PrimOp("+", (Var(x), IntLit(1)))),
            WriteTVar("t", PrimOp("-", (Var(x), IntLit(1)))),
        ]
    return atoms


def _tails(x):
    return [ReadTVar("t"), Retry(), BAD, Return(IntLit(0))] + ([Return(Var(x))] if x else [])


def chains(budget, x=None, depth=0):
    """Bind chains of at most ``budget`` nodes; read and return results are named for later steps."""
    for tail in _tails(x):
        if size(tail) <= budget:
            yield tail
    var = f"x{depth}"
    for left in _lefts(x):
        rest = budget - size(left) - 2
        if rest < 1:
            continue
        scope = var if isinstance(left, (ReadTVar, Return)) else x
        for tail in chains(rest, scope, depth + 1):
            yield Bind(left, Lam(var, tail))


CHAINS = list(chains(8))
UNCONFIRMED = DEFAULT_CONFIG.with_overrides(witness_search=False)


@pytest.mark.parametrize("text", INVARIANTS)
@pytest.mark.parametrize("body", CHAINS, ids=pretty_expr)
def test_small_operations(body, text):
    c = parse_contract(text, ONE)
    program = prepare(replace(ONE, functions={"op": FunctionDef("op", body, TStm(INT), c)}))
    op = program.functions["op"]

    direct = satisfies_oracle(op.body, op.contract, TStm(INT), program, samples=40)
    purified = satisfies_oracle(t_expr(op.body, ["t"]), t_contract(op.contract),
                                transformed_type(TStm(INT), INT), program, samples=40)
    assert {type(direct), type(purified)} != {Holds, Violated}

    if modular_check_function("op", program, UNCONFIRMED).verdict == Safe():
        assert not isinstance(direct, Violated)


def test_small_operations_cover_every_shape():
    assert max(size(e) for e in CHAINS) == 8
    assert Bind(ReadTVar("t"), Lam("x0", Return(Var("x0")))) in CHAINS
    assert len(CHAINS) == len(set(CHAINS))


# ---------------------------------------------------------------------------
# Arithmetic decisions
# ---------------------------------------------------------------------------

terms = st.recursive(
    st.one_of(st.integers(min_value=-3, max_value=3).map(IntLit), st.sampled_from([Var("x"), Var("y")])),
    lambda kids: st.one_of(
        st.tuples(st.sampled_from(["+", "-"]), kids, kids).map(lambda t: PrimOp(t[0], (t[1], t[2]))),
        st.tuples(kids, st.integers(min_value=-2, max_value=2)).map(lambda t: PrimOp("*", (t[0], IntLit(t[1])))),
    ),
    max_leaves=4,
)
comparisons = st.tuples(st.sampled_from([">", ">=", "<", "<=", "=="]), terms, terms).map(
    lambda t: PrimOp(t[0], (t[1], t[2])))
GRID = range(-5, 6)


def _holds(e, x, y):
    outcome = evaluate(substitute_many(e, {"x": IntLit(x), "y": IntLit(y)}), Env())
    assert isinstance(outcome, Converged)
    return as_bool(outcome.value)


@settings(max_examples=1000, deadline=None)
@given(goal=comparisons, fact=st.one_of(st.none(), comparisons))
def test_arithmetic_decisions_match_brute_force(goal, fact):
    pc = PathCondition() if fact is None else PathCondition().assume(fact)
    decision = arith_decide(goal, pc)
    if decision is None:
        return
    for x, y in product(GRID, GRID):
        if fact is None or _holds(fact, x, y):
            assert _holds(goal, x, y) is decision
