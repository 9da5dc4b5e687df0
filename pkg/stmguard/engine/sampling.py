"""Small-scope and seeded random value generation by type."""

import itertools
import random
from typing import Iterator, List, Optional, Sequence, Tuple

from .errors import ContractError
from .semantics import Env
from .syntax import Con, Constructors, Expr, IntLit, Lam, Program, Return, Var, fresh, mk_bool, mk_list, mk_tuple, mk_unit
from .typecheck import TBool, TData, TFun, TInt, TList, TMeta, TStm, TTuple, TTVar, TUnit, Type

SMALL_INTS = (0, 1, -1, 2, -2, 3, -3)
MAX_LIST_LENGTH = 3
MAX_DATA_DEPTH = 2
UNIVERSE_CAP = 1024

RANDOM_INT_RANGE = 20
RANDOM_LIST_LENGTH = 5


def universe(ty: Type, constructors: Constructors, depth: int = MAX_DATA_DEPTH) -> List[Expr]:
    """The small-scope values of a type, smallest first.

    Integers range over -3..3, lists have at most three elements and user datatypes nest
    at most two constructors deep. Lists are truncated at UNIVERSE_CAP entries.
    """
    if isinstance(ty, (TInt, TMeta)):
        return [IntLit(i) for i in SMALL_INTS]
    if isinstance(ty, TBool):
        return [mk_bool(True), mk_bool(False)]
    if isinstance(ty, TUnit):
        return [mk_unit()]
    if isinstance(ty, TList):
        elems = universe(ty.elem, constructors, depth)
        out: List[Expr] = []
        for length in range(MAX_LIST_LENGTH + 1):
            for items in itertools.product(elems, repeat=length):
                out.append(mk_list(items))
                if len(out) >= UNIVERSE_CAP:
                    return out
        return out
    if isinstance(ty, TTuple):
        parts = [universe(t, constructors, depth) for t in ty.items]
        return [mk_tuple(list(items)) for items in itertools.islice(diagonal_product(parts), UNIVERSE_CAP)]
    if isinstance(ty, TData):
        sig = constructors.sigs.get(ty.name)
        if sig is None:
            raise ContractError(f"unknown datatype '{ty.name}'")
        out = []
        for con, arity in sig.constructors:
            if arity == 0:
                out.append(Con(con))
            elif depth > 0:
                fields = sig.fields(con) or tuple(TInt() for _ in range(arity))
                parts = [universe(t, constructors, depth - 1) for t in fields]
                out.extend(Con(con, tuple(items)) for items in itertools.islice(diagonal_product(parts), UNIVERSE_CAP))
        return out[:UNIVERSE_CAP]
    if isinstance(ty, TFun):
        return function_samples(ty, constructors)
    if isinstance(ty, TStm):
        return [Return(v) for v in universe(ty.res, constructors, depth)]
    if isinstance(ty, TTVar):
        raise ContractError("TVars cannot be sampled as values")
    raise ContractError(f"cannot sample values of type {ty}")


def function_samples(ty: TFun, constructors: Constructors) -> List[Expr]:
    """Crash-free functions: the identity (when it fits) and constant functions."""
    x = fresh("a")
    out: List[Expr] = []
    if ty.arg == ty.res:
        out.append(Lam(x, Var(x)))
    for value in universe(ty.res, constructors)[:4]:
        out.append(Lam(x, value))
    return out


def diagonal_product(parts: Sequence[Sequence[Expr]]) -> Iterator[Tuple[Expr, ...]]:
    """Tuples of the cartesian product, ordered by the sum of the component indices."""
    if not parts:
        yield ()
        return
    if any(not p for p in parts):
        return
    limits = [len(p) - 1 for p in parts]
    for total in range(sum(limits) + 1):
        for indices in _compositions(total, limits):
            yield tuple(p[i] for p, i in zip(parts, indices))


def _compositions(total: int, limits: Sequence[int]) -> Iterator[Tuple[int, ...]]:
    if len(limits) == 1:
        if total <= limits[0]:
            yield (total,)
        return
    for first in range(min(total, limits[0]) + 1):
        for rest in _compositions(total - first, limits[1:]):
            yield (first,) + rest


def random_value(ty: Type, constructors: Constructors, rng: random.Random, depth: int = 3) -> Expr:
    """A seeded random value drawn from a wider range than the small scope."""
    if isinstance(ty, (TInt, TMeta)):
        return IntLit(rng.randint(-RANDOM_INT_RANGE, RANDOM_INT_RANGE))
    if isinstance(ty, TBool):
        return mk_bool(rng.random() < 0.5)
    if isinstance(ty, TUnit):
        return mk_unit()
    if isinstance(ty, TList):
        length = rng.randint(0, RANDOM_LIST_LENGTH)
        return mk_list([random_value(ty.elem, constructors, rng, depth) for _ in range(length)])
    if isinstance(ty, TTuple):
        return mk_tuple([random_value(t, constructors, rng, depth) for t in ty.items])
    if isinstance(ty, TData):
        sig = constructors.sigs[ty.name]
        options = [(c, a) for c, a in sig.constructors if a == 0 or depth > 0] or list(sig.constructors)
        con, arity = rng.choice(options)
        fields = sig.fields(con) or tuple(TInt() for _ in range(arity))
        return Con(con, tuple(random_value(t, constructors, rng, depth - 1) for t in fields))
    if isinstance(ty, TFun):
        x = fresh("a")
        return Lam(x, random_value(ty.res, constructors, rng, depth))
    if isinstance(ty, TStm):
        return Return(random_value(ty.res, constructors, rng, depth))
    raise ContractError(f"cannot sample values of type {ty}")


def zero_value(ty: Type, constructors: Constructors) -> Expr:
    """The first small-scope value of a type."""
    values = universe(ty, constructors, depth=0) or universe(ty, constructors)
    if not values:
        raise ContractError(f"type {ty} has no small-scope values")
    return values[0]


def initial_env(program: Program, overrides: Optional[dict] = None) -> Env:
    """The environment given by the TVar initializers, zero values where none is declared."""
    constructors = program.constructors()
    overrides = overrides or {}
    values = []
    for decl in program.tvars:
        if decl.name in overrides:
            values.append(overrides[decl.name])
        elif decl.init is not None:
            values.append(decl.init)
        else:
            values.append(zero_value(decl.type, constructors))
    return Env.of(program.tvar_names, values)
