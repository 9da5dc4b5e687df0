import pytest

from stmguard.engine.errors import TypeCheckError
from stmguard.engine.syntax import Program, TVarDecl
from stmguard.engine.typecheck import (
    BOOL, INT, TFun, TList, TStm, TTuple, UNIT, annotate_expr, infer_type, is_stm_typed, tvar_tuple_type,
)
from stmguard.frontend.parser import parse_expr, parse_type

PROGRAM = Program(tvars=(TVarDecl("t", INT), TVarDecl("tab", TList(INT))))


def test_every_sample_program_type_checks(programs_dir, sample):
    for path in sorted(programs_dir.glob("*.stm")):
        program = sample(path.stem)
        for fdef in program.functions.values():
            assert fdef.body.ty is not None


def test_types_print_in_source_syntax():
    assert str(parse_type("[Int] -> (Int, Bool)")) == "[Int] -> (Int, Bool)"
    assert str(parse_type("STM ()")) == "STM ()"
    assert str(parse_type("(Int -> Int) -> Int")) == "(Int -> Int) -> Int"


def test_stm_expressions():
    assert infer_type(parse_expr("readTVar t", PROGRAM), PROGRAM) == TStm(INT)
    assert infer_type(parse_expr("writeTVar tab []", PROGRAM), PROGRAM) == TStm(UNIT)
    ty = infer_type(parse_expr("readTVar t >>= \\x -> return (x > 0)", PROGRAM), PROGRAM)
    assert ty == TStm(BOOL)


def test_stm_typed_nodes_follow_their_annotation():
    applied = annotate_expr(parse_expr("(\\x -> writeTVar t x) 1", PROGRAM), PROGRAM)
    assert is_stm_typed(applied)
    assert not is_stm_typed(annotate_expr(parse_expr("(\\x -> x) 1"), PROGRAM))
    with pytest.raises(TypeCheckError, match="carries no type annotation"):
        is_stm_typed(parse_expr("(\\x -> x) 1"))


def test_exceptions_take_any_type():
    assert infer_type(parse_expr("case True of { True -> 1; False -> BAD }", PROGRAM), PROGRAM) == INT


def test_write_payload_must_be_pure():
    with pytest.raises(TypeCheckError, match="impure payload"):
        infer_type(parse_expr("writeTVar t (readTVar t)", PROGRAM), PROGRAM)


def test_write_payload_must_match_the_tvar():
    with pytest.raises(TypeCheckError):
        infer_type(parse_expr("writeTVar t True", PROGRAM), PROGRAM)


def test_environment_tuple_type():
    assert tvar_tuple_type(PROGRAM) == TTuple((INT, TList(INT)))


def test_tvar_used_as_a_value(compile_source):
    with pytest.raises(TypeCheckError, match="outside readTVar/writeTVar"):
        compile_source("tvar t :: Int = 0\nf :: Int\nf = t + 1\n")


def test_body_must_match_its_signature(compile_source):
    with pytest.raises(TypeCheckError):
        compile_source("f :: Int -> Int\nf x = x > 0\n")


def test_functions_need_signatures(compile_source):
    with pytest.raises(TypeCheckError, match="no type signature"):
        compile_source("f x = x + 1\n")


def test_invariant_must_take_the_environment_tuple(compile_source):
    source = (
        "tvar t :: Int = 0\n"
        "tvar u :: Bool = True\n"
        "invariant inv\n"
        "inv :: Int -> Bool\n"
        "inv x = x > 0\n"
    )
    with pytest.raises(TypeCheckError, match=r"must have type \(Int, Bool\) -> Bool"):
        compile_source(source)


def test_unused_transaction_parameters_default_to_int(compile_source):
    program = compile_source("tvar t :: Int = 0\ntransaction noop(n :: Ok) = return ()\n")
    assert program.transactions["noop"].param_types == (INT,)


def test_transaction_parameter_types_are_inferred(compile_source):
    program = compile_source("tvar t :: [Int] = []\ntransaction push(n :: Ok) = writeTVar t (n : [])\n")
    assert program.transactions["push"].param_types == (INT,)
    assert program.transactions["push"].body.ty == TStm(UNIT)


def test_signature_types(sample):
    program = sample("table-split")
    assert program.functions["sum"].type == TFun(TList(INT), INT)
