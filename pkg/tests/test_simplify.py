from stmguard.engine.config import CheckConfig
from stmguard.engine.simplify import crashy_functions, recursive_functions, simplify
from stmguard.engine.syntax import App, BAD, FunRef, IntLit, Lam, Var, alpha_equal, contains_exc
from stmguard.frontend.parser import parse_expr


def test_beta_reduction_and_constant_folding():
    assert simplify(parse_expr("(\\x -> x + 1) 2")) == IntLit(3)


def test_case_of_known_constructor():
    assert simplify(parse_expr("case (1, 2) of { (a, b) -> b }")) == IntLit(2)


def test_exceptions_propagate():
    assert simplify(parse_expr("BAD + 1")) == BAD
    assert simplify(parse_expr("case BAD of { True -> 1; False -> 2 }")) == BAD


def test_dead_branches_are_pruned():
    e = parse_expr("\\x -> case x > 0 of { True -> case x > -1 of { True -> 1; False -> BAD }; False -> 0 }")
    assert not contains_exc(simplify(e))


def test_branches_know_their_condition():
    e = parse_expr("\\x -> case x > 0 of { True -> x > 0; False -> x > 0 }")
    expected = parse_expr("\\x -> case x > 0 of { True -> True; False -> False }")
    assert alpha_equal(simplify(e), expected)


def test_reachable_bad_remains():
    e = parse_expr("\\x -> case x > 0 of { True -> 1; False -> BAD }")
    assert contains_exc(simplify(e))


def test_definitions_are_inlined():
    defs = {"inc": parse_expr("\\x -> x + 1")}
    assert simplify(App(FunRef("inc"), IntLit(1)), defs) == IntLit(2)


def test_recursive_functions_unfold_on_constructors(sample):
    program = sample("addpure")
    defs = program.definitions()
    assert simplify(parse_expr("sum [1, 2]", program), defs) == IntLit(3)


def test_recursive_functions_stay_folded_on_variables(sample):
    program = sample("addpure")
    e = parse_expr("sum xs", program, scope=("xs",))
    assert simplify(e, program.definitions()) == e


def test_no_fuel_means_no_rewriting():
    e = parse_expr("(\\x -> x) 1")
    assert simplify(e, config=CheckConfig(fuel=0)) == e


def test_call_graph_analyses():
    defs = {
        "f": Lam("x", App(FunRef("g"), Var("x"))),
        "g": Lam("x", App(FunRef("f"), Var("x"))),
        "h": Lam("x", BAD),
        "k": Lam("x", App(FunRef("h"), Var("x"))),
        "id": Lam("x", Var("x")),
    }
    assert recursive_functions(defs) == {"f", "g"}
    assert crashy_functions(defs) == frozenset({"h", "k"})
