import pytest

from stmguard.engine.contracts import (
    ANY, DepFun, Pred, StmOp, TupleContract, contract_alpha_equal, is_ok, ok,
)
from stmguard.engine.errors import ContractError, TransformError, TypeCheckError
from stmguard.engine.semantics import Converged, Env, evaluate_deep
from stmguard.engine.syntax import (
    App, Con, FunRef, IntLit, Lam, Program, TVarDecl, Var, alpha_equal, mk_tuple, mk_unit, tuple_name,
)
from stmguard.engine.transform import (
    close_transaction, env_expr, gamma_expand, invariant_to_contract, specialized_name, t_contract, t_expr,
    t_program, transformed_type,
)
from stmguard.engine.typecheck import BOOL, INT, TFun, TStm, TTuple, UNIT, annotate_expr
from stmguard.frontend.parser import parse_contract, parse_expr
from stmguard.frontend.pretty import pretty_contract

ONE = Program(tvars=(TVarDecl("t", INT, IntLit(1)),))
TWO = Program(tvars=(TVarDecl("t", INT, IntLit(1)), TVarDecl("u", INT, IntLit(2))))


def typed(text: str, program: Program):
    return annotate_expr(parse_expr(text, program), program)


def test_read_returns_the_content_and_keeps_the_state():
    e = t_expr(typed("readTVar t", ONE), ["t"])
    assert e == Lam("t", Con(tuple_name(2), (Var("t"), Var("t"))))


def test_write_replaces_one_component():
    e = t_expr(typed("writeTVar u 5", TWO), ["t", "u"])
    outcome = evaluate_deep(App(e, mk_tuple([IntLit(1), IntLit(2)])), Env())
    assert isinstance(outcome, Converged)
    assert outcome.value == mk_tuple([mk_unit(), mk_tuple([IntLit(1), IntLit(5)])])


def test_bind_threads_the_state():
    e = t_expr(typed("readTVar t >>= \\x -> writeTVar u (x + 10)", TWO), ["t", "u"])
    outcome = evaluate_deep(App(e, mk_tuple([IntLit(3), IntLit(0)])), Env())
    assert isinstance(outcome, Converged)
    assert outcome.value == mk_tuple([mk_unit(), mk_tuple([IntLit(3), IntLit(13)])])


def test_retry_becomes_unreachable():
    e = t_expr(typed("retry", ONE), ["t"])
    assert e.kind == "UNR"


def test_stm_typed_applications_take_the_state():
    e = t_expr(typed("(\\x -> writeTVar t (x + 1)) 4", ONE), ["t"])
    outcome = evaluate_deep(App(e, IntLit(0)), Env())
    assert isinstance(outcome, Converged)
    assert outcome.value == mk_tuple([mk_unit(), IntLit(5)])


def test_transformation_needs_annotations():
    with pytest.raises(TypeCheckError, match="carries no type annotation"):
        t_expr(parse_expr("(\\x -> writeTVar t x) 4", ONE), ["t"])


def test_pure_expressions_are_fixed_points():
    e = parse_expr("\\x -> x + 1")
    assert t_expr(e, ["t"]) is e


def test_or_else_must_be_expanded_first():
    with pytest.raises(TransformError, match="orElse must be expanded"):
        t_expr(typed("retry `orElse` return 1", ONE), ["t"])


def test_unknown_tvars_are_rejected():
    with pytest.raises(TransformError, match="not a declared TVar"):
        t_expr(typed("readTVar u", TWO), ["t"])


def test_stm_contract_becomes_a_state_function():
    c = parse_contract("|| {t | t > 0} <> {t' | t' > t} || Any", ONE)
    transformed = t_contract(c)
    assert isinstance(transformed, DepFun)
    assert transformed.var == "t"
    assert transformed.dom == c.pre
    assert transformed.cod == TupleContract((ANY, c.post))


def test_pure_contracts_are_fixed_points():
    c = parse_contract("{x | x > 0} -> {r | r > x}")
    assert t_contract(c) == c


def test_transformed_types():
    env = TTuple((INT, BOOL))
    assert transformed_type(TStm(INT), env) == TFun(env, TTuple((INT, env)))
    assert transformed_type(TFun(INT, TStm(UNIT)), env) == TFun(INT, TFun(env, TTuple((UNIT, env))))
    assert transformed_type(INT, env) == INT


def test_env_expr_overrides_positions():
    assert env_expr(["t", "u"], {"u": IntLit(0)}) == mk_tuple([Var("t"), IntLit(0)])
    assert env_expr([]) == mk_unit()


def test_gamma_expansion_of_a_single_or_else(sample):
    tx = sample("orelse").transactions["adjust"]
    variants = gamma_expand(tx.body)
    assert len(variants) == 2


def test_gamma_expansion_multiplies_choices():
    e = parse_expr("(return 1 `orElse` return 2) >>= \\x -> (writeTVar t x `orElse` writeTVar t (x + 1))", ONE)
    assert len(gamma_expand(e)) == 4


def test_gamma_expansion_removes_duplicates():
    e = parse_expr("retry `orElse` retry", ONE)
    assert gamma_expand(e) == [parse_expr("retry", ONE)]


def test_gamma_expansion_is_capped():
    e = parse_expr("(return 1 `orElse` return 2) >>= \\x -> (writeTVar t x `orElse` writeTVar t (x + 1))", ONE)
    with pytest.raises(TransformError, match="exceeds 3 variants"):
        gamma_expand(e, cap=3)


def test_or_else_free_bodies_have_one_variant():
    e = parse_expr("readTVar t", ONE)
    assert gamma_expand(e) == [e]


def test_invariant_becomes_an_stm_contract(sample):
    program = sample("increment")
    c = invariant_to_contract("positive", program)
    assert isinstance(c, StmOp)
    assert c.var == "t"
    assert c.result == ANY
    assert contract_alpha_equal(c.pre, Pred("x", App(FunRef("positive"), Var("x"))))
    assert pretty_contract(c) == "|| {t | positive t} <> {t | positive t} || Any"


def test_constant_true_invariant_is_ok(sample):
    program = sample("specialize")
    c = invariant_to_contract("anything", program)
    assert is_ok(c.pre) and is_ok(c.post)


def test_close_transaction_abstracts_parameters():
    body = parse_expr("writeTVar t n", ONE, scope=("n",))
    inv = StmOp("t", ok(), ok(), ANY)
    closed, contract = close_transaction(body, [("n", ok())], inv)
    assert alpha_equal(closed, Lam("n", body))
    assert isinstance(contract, DepFun) and contract.var == "n" and contract.cod == inv


def test_close_transaction_needs_a_contract_per_free_variable():
    body = parse_expr("writeTVar t n", ONE, scope=("n",))
    with pytest.raises(ContractError, match="free variable 'n'"):
        close_transaction(body, [], StmOp("t", ok(), ok(), ANY))


def test_specialization_rewrites_calls(sample):
    program = sample("specialize")
    assert set(program.functions) == {"anything", "f_tA", "f_tB"}
    assert program.transactions["bumpA"].body == FunRef("f_tA")
    assert specialized_name("f", ["tA", "tB"]) == "f_tA_tB"


def test_specialized_contract_names_the_chosen_tvar(sample):
    program = sample("specialize")
    assert pretty_contract(program.functions["f_tA"].contract) == \
        "|| {(tA, tB) | tA >= 0} <> {(tA', tB') | tA' >= tA} || Any"
    assert pretty_contract(program.functions["f_tB"].contract) == \
        "|| {(tA, tB) | tB >= 0} <> {(tA', tB') | tB' >= tB} || Any"


def test_specialization_needs_a_matching_tvar(compile_source):
    source = (
        "tvar flag :: Bool = True\n"
        "f :: TVar Int -> STM ()\n"
        "f t = writeTVar t 0\n"
    )
    with pytest.raises(TransformError, match="no declared TVar holds Int"):
        compile_source(source)


def test_transformed_program_types(sample):
    program = t_program(sample("increment"))
    assert program.functions["positive"].type == TFun(INT, BOOL)


def test_functions_may_not_use_or_else(compile_source):
    source = (
        "tvar t :: Int = 0\n"
        "g :: STM Int\n"
        "g = readTVar t `orElse` return 0\n"
    )
    with pytest.raises(TransformError, match="uses orElse"):
        t_program(compile_source(source))
