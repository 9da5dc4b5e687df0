import random

import pytest

from stmguard.engine.errors import ContractError
from stmguard.engine.sampling import SMALL_INTS, diagonal_product, initial_env, random_value, universe
from stmguard.engine.syntax import Con, Constructors, IntLit, Lam, mk_bool, mk_list
from stmguard.engine.typecheck import BOOL, INT, TFun, TList, TTuple, TTVar

SOURCE = """\
data Msg = Hello | Bye

tvar count :: Int
tvar last :: Msg
tvar log :: [Int] = [1, 2]

invariant ok
ok :: (Int, Msg, [Int]) -> Bool
ok (n, m, xs) = n >= 0

transaction reset = writeTVar count 0
"""


def test_small_ints_come_first():
    assert universe(INT, Constructors()) == [IntLit(i) for i in SMALL_INTS]
    assert universe(BOOL, Constructors()) == [mk_bool(True), mk_bool(False)]


def test_lists_are_bounded_and_smallest_first():
    values = universe(TList(BOOL), Constructors())
    assert values[0] == mk_list([])
    assert len(values) == 1 + 2 + 4 + 8


def test_tuples_enumerate_diagonally():
    values = list(diagonal_product([["a", "b"], ["c", "d"]]))
    assert values == [("a", "c"), ("a", "d"), ("b", "c"), ("b", "d")]
    assert universe(TTuple((INT, BOOL)), Constructors())[0] == Con("(,)", (IntLit(0), mk_bool(True)))


def test_empty_component_gives_no_tuples():
    assert list(diagonal_product([["a"], []])) == []


def test_functions_sample_identity_and_constants():
    values = universe(TFun(INT, INT), Constructors())
    assert all(isinstance(v, Lam) for v in values)
    assert values[0].body.name == values[0].var


def test_tvars_cannot_be_sampled():
    with pytest.raises(ContractError, match="TVars cannot be sampled"):
        universe(TTVar(INT), Constructors())


def test_random_values_are_seeded():
    first = [random_value(TList(INT), Constructors(), random.Random(3)) for _ in range(5)]
    second = [random_value(TList(INT), Constructors(), random.Random(3)) for _ in range(5)]
    assert first == second


def test_initial_env_uses_initializers_and_zero_values(compile_source):
    program = compile_source(SOURCE)
    env = initial_env(program)
    assert env.names() == ["count", "last", "log"]
    assert env.get("count") == IntLit(0)
    assert env.get("last") == Con("Hello")
    assert env.get("log") == mk_list([IntLit(1), IntLit(2)])


def test_initial_env_overrides(compile_source):
    program = compile_source(SOURCE)
    env = initial_env(program, {"count": IntLit(5)})
    assert env.get("count") == IntLit(5)
