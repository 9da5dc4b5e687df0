import pytest

from stmguard.engine.contracts import (
    ANY, DepFun, Holds, Pred, StmOp, TupleContract, Violated, check_contract_type, contract_alpha_equal,
    contract_free_vars, generate_inhabitant, is_ok, ok, pattern_pred, pred_pattern, satisfies_oracle,
    subst_contract,
)
from stmguard.engine.errors import ContractError
from stmguard.engine.semantics import Converged, Env, as_bool, evaluate
from stmguard.engine.syntax import IntLit, Program, TVarDecl, Var, substitute
from stmguard.engine.typecheck import BOOL, INT, TFun, TList, TStm, TTuple, UNIT
from stmguard.frontend.parser import parse_contract, parse_expr

EMPTY = Program()
ONE_TVAR = Program(tvars=(TVarDecl("t", INT, IntLit(1)),))
TWO_TVARS = Program(tvars=(TVarDecl("a", INT, IntLit(0)), TVarDecl("b", INT, IntLit(0))))


def holds_on(pred: Pred, value) -> bool:
    outcome = evaluate(substitute(pred.pred, pred.var, value), Env())
    assert isinstance(outcome, Converged)
    return as_bool(outcome.value)


def test_ok_accepts_everything():
    assert is_ok(ok())
    assert is_ok(parse_contract("Ok"))
    assert not is_ok(parse_contract("{x | x > 0}"))


def test_pattern_predicates_destructure_tuples():
    c = pattern_pred(("a", "b"), parse_expr("a < b", scope=("a", "b")))
    assert pred_pattern(c)[0] == ("a", "b")
    assert holds_on(c, parse_expr("(1, 2)"))
    assert not holds_on(c, parse_expr("(2, 1)"))


def test_single_variable_pattern_is_a_plain_predicate():
    c = pattern_pred(("a",), parse_expr("a > 0", scope=("a",)))
    assert c.var == "a"
    assert pred_pattern(c) is None


def test_dependent_codomain_refers_to_the_argument():
    c = parse_contract("{x | x > 0} -> {r | r > x}")
    assert isinstance(c, DepFun)
    assert c.var == "x"
    assert contract_free_vars(c) == []
    assert contract_free_vars(c.cod) == ["x"]


def test_substitution_avoids_capture():
    c = Pred("r", parse_expr("r > x", scope=("r", "x")))
    renamed = subst_contract(c, "x", Var("r"))
    assert renamed.var != "r"
    assert contract_alpha_equal(renamed, Pred("q", parse_expr("q > r", scope=("q", "r"))))


def test_alpha_equality_ignores_binder_names():
    assert contract_alpha_equal(parse_contract("{x | x > 0}"), parse_contract("{y | y > 0}"))
    assert not contract_alpha_equal(parse_contract("{x | x > 0}"), parse_contract("{y | y > 1}"))
    assert contract_alpha_equal(parse_contract("x:Ok -> {r | r > x}"), parse_contract("y:Ok -> {s | s > y}"))


def test_contract_typing_accepts_matching_types():
    assert check_contract_type(parse_contract("{x | x > 0} -> {r | r > x}"), TFun(INT, INT), EMPTY)
    assert check_contract_type(parse_contract("({a | a > 0}, Any)"), TTuple((INT, BOOL)), EMPTY)
    assert check_contract_type(parse_contract("{xs | xs == []}"), TList(INT), EMPTY)


def test_contract_typing_reports_mismatches():
    diagnostics = []
    assert not check_contract_type(parse_contract("{x | x > 0}"), BOOL, EMPTY, diagnostics)
    assert "predicate of {x | ...} at type Bool" in diagnostics[0]

    diagnostics = []
    assert not check_contract_type(parse_contract("Ok -> Ok"), INT, EMPTY, diagnostics)
    assert "non-function type Int" in diagnostics[0]

    assert not check_contract_type(ANY, TStm(UNIT), EMPTY)
    assert not check_contract_type(parse_contract("(Ok, Ok)"), TTuple((INT, INT, INT)), EMPTY)


def test_stm_contracts_are_typed_against_the_environment():
    c = parse_contract("|| {(a, b) | a <= b} <> {(a', b') | a' <= b'} || Any", TWO_TVARS)
    assert isinstance(c, StmOp)
    assert check_contract_type(c, TStm(UNIT), TWO_TVARS)
    assert not check_contract_type(c, TStm(UNIT), ONE_TVAR)
    assert not check_contract_type(c, INT, TWO_TVARS)


def test_oracle_proves_small_scope_contracts():
    c = parse_contract("{x | x > 0} -> {r | r > x}")
    assert satisfies_oracle(parse_expr("\\x -> x + 1"), c, TFun(INT, INT), EMPTY) == Holds()


def test_oracle_reports_the_first_violating_input():
    c = parse_contract("x:Ok -> {r | r > x}")
    verdict = satisfies_oracle(parse_expr("\\x -> x"), c, TFun(INT, INT), EMPTY)
    assert isinstance(verdict, Violated)
    assert verdict.witness == (("x", IntLit(0)),)
    assert verdict.reason == "the predicate is False"


def test_oracle_rejects_crashing_values():
    verdict = satisfies_oracle(parse_expr("\\x -> BAD"), parse_contract("Ok -> Ok"), TFun(INT, INT), EMPTY)
    assert isinstance(verdict, Violated)
    assert verdict.reason == "the value crashes"


def test_oracle_ignores_inputs_outside_the_domain():
    c = parse_contract("{x | x > 0} -> Ok")
    e = parse_expr("\\x -> case x > 0 of { True -> x; False -> BAD }")
    assert satisfies_oracle(e, c, TFun(INT, INT), EMPTY) == Holds()


def test_ok_functions_are_applied_to_arguments():
    e = parse_expr("\\x -> case x > 0 of { True -> x; False -> BAD }")
    verdict = satisfies_oracle(e, ok(), TFun(INT, INT), EMPTY)
    assert isinstance(verdict, Violated)
    assert [value for _, value in verdict.witness] == [IntLit(0)]
    assert verdict.reason == "the value crashes"

    assert satisfies_oracle(parse_expr("\\x -> x * 2"), ok(), TFun(INT, INT), EMPTY) == Holds()


def test_curried_functions_are_applied_to_every_argument():
    e = parse_expr("\\x -> \\y -> case y > 0 of { True -> x; False -> BAD }")
    verdict = satisfies_oracle(e, ok(), TFun(INT, TFun(INT, INT)), EMPTY)
    assert isinstance(verdict, Violated)
    assert verdict.reason == "the value crashes"


def test_oracle_runs_stm_operations_on_sampled_states():
    c = parse_contract("|| {t | t > 0} <> {t' | t' > t} || Any", ONE_TVAR)
    good = parse_expr("readTVar t >>= \\x -> writeTVar t (x + 1)", ONE_TVAR)
    assert satisfies_oracle(good, c, TStm(UNIT), ONE_TVAR) == Holds()

    bad = parse_expr("writeTVar t 0", ONE_TVAR)
    verdict = satisfies_oracle(bad, c, TStm(UNIT), ONE_TVAR)
    assert isinstance(verdict, Violated)
    assert verdict.witness == (("t", IntLit(1)),)
    assert verdict.reason.startswith("post-state")


def test_oracle_checks_stm_results():
    c = parse_contract("|| {t | True} <> {t' | True} || {r | r > 0}", ONE_TVAR)
    verdict = satisfies_oracle(parse_expr("readTVar t", ONE_TVAR), c, TStm(INT), ONE_TVAR)
    assert isinstance(verdict, Violated)
    assert verdict.reason.startswith("result")
    assert verdict.witness == (("t", IntLit(0)),)


def test_impure_expression_against_pure_contract():
    verdict = satisfies_oracle(parse_expr("readTVar t", ONE_TVAR), ANY, INT, ONE_TVAR)
    assert verdict == Violated((), "impure against pure contract")


def test_generate_inhabitant_finds_small_values():
    value = generate_inhabitant(parse_contract("{x | x > 2}"), INT, EMPTY)
    assert value == IntLit(3)

    pair = generate_inhabitant(TupleContract((parse_contract("{a | a < 0}"), ok())), TTuple((INT, INT)), EMPTY)
    assert pair.args[0].value < 0


def test_generate_inhabitant_for_function_contracts():
    c = parse_contract("{x | x > 0} -> {r | r > 0}")
    f = generate_inhabitant(c, TFun(INT, INT), EMPTY)
    assert satisfies_oracle(f, c, TFun(INT, INT), EMPTY) == Holds()


def test_generate_inhabitant_gives_up():
    with pytest.raises(ContractError, match="no inhabitant"):
        generate_inhabitant(parse_contract("{x | x > 1000}"), INT, EMPTY, size=20)
