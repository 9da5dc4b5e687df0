import pytest

from stmguard.engine.errors import CaseCompletionError, DesugarError
from stmguard.engine.syntax import (
    Alt, BAD, Bind, Case, Con, CONS_CON, ConstructorSig, Do, DoBind, DoExpr, IntLit, Lam, LamPat, Let,
    NIL_CON, PrimOp, ReadTVar, Return, Var, alpha_equal, complete_cases, desugar, free_vars, mk_list,
    mk_tuple, substitute, tuple_arity, tuple_name, unspine,
)


def test_tuple_names_round_trip():
    assert tuple_name(0) == "()"
    assert tuple_name(3) == "(,,)"
    assert tuple_arity("(,,)") == 3
    assert tuple_arity("Just") is None


def test_mk_tuple_of_one_is_the_component():
    assert mk_tuple([Var("x")]) == Var("x")


def test_free_vars_respects_binders():
    e = Lam("x", PrimOp("+", (Var("x"), Var("y"))))
    assert free_vars(e) == ["y"]
    case = Case(Var("p"), (Alt("(,)", ("a", "b"), PrimOp("+", (Var("a"), Var("c")))),))
    assert free_vars(case) == ["p", "c"]


def test_substitute_avoids_capture():
    e = Lam("y", PrimOp("+", (Var("x"), Var("y"))))
    out = substitute(e, "x", Var("y"))
    assert isinstance(out, Lam)
    assert out.var != "y"
    assert free_vars(out) == ["y"]
    assert alpha_equal(out, Lam("z", PrimOp("+", (Var("y"), Var("z")))))


def test_substitute_stops_at_shadowing_binder():
    e = Lam("x", Var("x"))
    assert substitute(e, "x", IntLit(1)) == e


def test_alpha_equal_ignores_bound_names():
    assert alpha_equal(Lam("x", Var("x")), Lam("y", Var("y")))
    assert not alpha_equal(Lam("x", Var("x")), Lam("y", Var("x")))


def test_desugar_do_block():
    block = Do((DoBind("x", ReadTVar("t")), DoExpr(Return(Var("x")))))
    out = desugar(block)
    assert out == Bind(ReadTVar("t"), Lam("x", Return(Var("x"))))


def test_desugar_let_and_tuple_lambda():
    out = desugar(Let("x", IntLit(1), Var("x")))
    assert unspine(out) == (Lam("x", Var("x")), [IntLit(1)])

    out = desugar(LamPat(("a", "b"), Var("a")))
    assert isinstance(out, Lam)
    assert isinstance(out.body, Case)
    assert out.body.alts[0].con == "(,)"


def test_empty_do_block_is_rejected():
    with pytest.raises(DesugarError):
        desugar(Do(()))


def test_do_block_must_end_in_an_expression():
    with pytest.raises(DesugarError, match="last statement"):
        desugar(Do((DoBind("x", ReadTVar("t")),)))


def test_complete_cases_adds_bad_alternatives():
    e = Case(Var("xs"), (Alt(NIL_CON, (), IntLit(0)),))
    out = complete_cases(e, [])
    assert [a.con for a in out.alts] == [NIL_CON, CONS_CON]
    assert out.alts[1].body == BAD
    assert len(out.alts[1].vars) == 2


def test_complete_cases_uses_declared_datatypes():
    msg = ConstructorSig("Msg", (("Hello", 0), ("Text", 1)))
    e = Case(Var("m"), (Alt("Text", ("n",), Var("n")),))
    out = complete_cases(e, [msg])
    assert [a.con for a in out.alts] == ["Text", "Hello"]


def test_complete_cases_rejects_mixed_datatypes():
    e = Case(Var("x"), (Alt("True", (), IntLit(0)), Alt(NIL_CON, (), IntLit(1))))
    with pytest.raises(CaseCompletionError, match="mix"):
        complete_cases(e, [])


def test_complete_cases_rejects_duplicate_alternatives():
    e = Case(Var("x"), (Alt("True", (), IntLit(0)), Alt("True", (), IntLit(1))))
    with pytest.raises(CaseCompletionError, match="duplicate"):
        complete_cases(e, [])


def test_mk_list_builds_cons_cells():
    assert mk_list([IntLit(1)]) == Con(CONS_CON, (IntLit(1), Con(NIL_CON)))
