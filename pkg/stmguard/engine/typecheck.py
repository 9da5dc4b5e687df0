"""Monomorphic type checking with STM typings and node annotation."""

import itertools
import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .errors import TypeCheckError
from .syntax import (
    App, Bind, Case, Con, CONS_CON, Constructors, Exc, Expr, FALSE_CON, FunRef, IntLit, Lam,
    NIL_CON, OrElse, PRIM_SPECS, PrimOp, Program, ReadTVar, Retry, Return, TRUE_CON, TVarRef,
    UNIT_CON, Var, WriteTVar, is_pure, map_children, tuple_arity,
)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Type:
    pass


@dataclass(frozen=True)
class TInt(Type):
    def __str__(self) -> str:
        return "Int"


@dataclass(frozen=True)
class TBool(Type):
    def __str__(self) -> str:
        return "Bool"


@dataclass(frozen=True)
class TUnit(Type):
    def __str__(self) -> str:
        return "()"


@dataclass(frozen=True)
class TList(Type):
    elem: Type

    def __str__(self) -> str:
        return f"[{self.elem}]"


@dataclass(frozen=True)
class TTuple(Type):
    items: Tuple[Type, ...]

    def __str__(self) -> str:
        return "(" + ", ".join(str(t) for t in self.items) + ")"


@dataclass(frozen=True)
class TFun(Type):
    arg: Type
    res: Type

    def __str__(self) -> str:
        arg = f"({self.arg})" if isinstance(self.arg, TFun) else str(self.arg)
        return f"{arg} -> {self.res}"


@dataclass(frozen=True)
class TStm(Type):
    res: Type

    def __str__(self) -> str:
        return f"STM {_atomic(self.res)}"


@dataclass(frozen=True)
class TTVar(Type):
    content: Type

    def __str__(self) -> str:
        return f"TVar {_atomic(self.content)}"


@dataclass(frozen=True)
class TData(Type):
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class TMeta(Type):
    id: int

    def __str__(self) -> str:
        return f"?{self.id}"


def _atomic(t: Type) -> str:
    return f"({t})" if isinstance(t, (TFun, TStm, TTVar)) else str(t)


INT = TInt()
BOOL = TBool()
UNIT = TUnit()


def tuple_type(items: Sequence[Type]) -> Type:
    """Tuple type with the 1-tuple collapsed and the 0-tuple as unit."""
    if not items:
        return UNIT
    if len(items) == 1:
        return items[0]
    return TTuple(tuple(items))


def fun_type(args: Sequence[Type], res: Type) -> Type:
    for arg in reversed(list(args)):
        res = TFun(arg, res)
    return res


def split_fun(t: Type) -> Tuple[List[Type], Type]:
    args = []
    while isinstance(t, TFun):
        args.append(t.arg)
        t = t.res
    return args, t


def is_first_order(t: Type) -> bool:
    if isinstance(t, (TFun, TStm, TTVar)):
        return False
    if isinstance(t, TList):
        return is_first_order(t.elem)
    if isinstance(t, TTuple):
        return all(is_first_order(i) for i in t.items)
    return True


# ---------------------------------------------------------------------------
# Unification
# ---------------------------------------------------------------------------

class _Unifier:
    def __init__(self, constructors: Constructors):
        self.constructors = constructors
        self.solution: Dict[int, Type] = {}
        self._ids = itertools.count()

    def meta(self) -> TMeta:
        return TMeta(next(self._ids))

    def resolve(self, t: Type) -> Type:
        while isinstance(t, TMeta) and t.id in self.solution:
            t = self.solution[t.id]
        return t

    def zonk(self, t: Type) -> Type:
        t = self.resolve(t)
        if isinstance(t, TList):
            return TList(self.zonk(t.elem))
        if isinstance(t, TTuple):
            return TTuple(tuple(self.zonk(i) for i in t.items))
        if isinstance(t, TFun):
            return TFun(self.zonk(t.arg), self.zonk(t.res))
        if isinstance(t, TStm):
            return TStm(self.zonk(t.res))
        if isinstance(t, TTVar):
            return TTVar(self.zonk(t.content))
        return t

    def unify(self, a: Type, b: Type, where: Optional[Expr] = None) -> None:
        a, b = self.resolve(a), self.resolve(b)
        if a == b:
            return
        if isinstance(a, TMeta):
            self._bind(a, b, where)
            return
        if isinstance(b, TMeta):
            self._bind(b, a, where)
            return
        if type(a) is not type(b):
            self._mismatch(a, b, where)
        if isinstance(a, TList):
            self.unify(a.elem, b.elem, where)
        elif isinstance(a, TTuple):
            if len(a.items) != len(b.items):
                self._mismatch(a, b, where)
            for x, y in zip(a.items, b.items):
                self.unify(x, y, where)
        elif isinstance(a, TFun):
            self.unify(a.arg, b.arg, where)
            self.unify(a.res, b.res, where)
        elif isinstance(a, TStm):
            self.unify(a.res, b.res, where)
        elif isinstance(a, TTVar):
            self.unify(a.content, b.content, where)
        else:
            self._mismatch(a, b, where)

    def _bind(self, meta: TMeta, t: Type, where: Optional[Expr]) -> None:
        if self._occurs(meta.id, t):
            raise TypeCheckError(f"infinite type {meta} ~ {self.zonk(t)}", offset=where.loc if where else None)
        self.solution[meta.id] = t

    def _occurs(self, id: int, t: Type) -> bool:
        t = self.resolve(t)
        if isinstance(t, TMeta):
            return t.id == id
        if isinstance(t, TList):
            return self._occurs(id, t.elem)
        if isinstance(t, TTuple):
            return any(self._occurs(id, i) for i in t.items)
        if isinstance(t, TFun):
            return self._occurs(id, t.arg) or self._occurs(id, t.res)
        if isinstance(t, (TStm,)):
            return self._occurs(id, t.res)
        if isinstance(t, TTVar):
            return self._occurs(id, t.content)
        return False

    def _mismatch(self, a: Type, b: Type, where: Optional[Expr]) -> None:
        raise TypeCheckError(
            f"type mismatch: expected {self.zonk(b)}, found {self.zonk(a)}",
            offset=where.loc if where is not None else None,
        )


# ---------------------------------------------------------------------------
# Inference
# ---------------------------------------------------------------------------

class _Inferencer:
    def __init__(self, program: Program):
        self.program = program
        self.constructors = program.constructors()
        self.u = _Unifier(self.constructors)
        self.tvars = {d.name: d.type for d in program.tvars}
        self.functions = {name: f.type for name, f in program.functions.items()}

    def infer(self, e: Expr, ctx: Mapping[str, Type], tvar_arg: bool = False) -> Expr:
        """Return e with every node annotated (types may still contain metas)."""
        if isinstance(e, Var):
            if e.name in ctx:
                return replace(e, ty=ctx[e.name])
            if e.name in self.tvars:
                raise TypeCheckError(f"TVar '{e.name}' used outside readTVar/writeTVar", offset=e.loc)
            raise TypeCheckError(f"unknown identifier '{e.name}'", offset=e.loc)

        if isinstance(e, IntLit):
            return replace(e, ty=INT)

        if isinstance(e, Exc):
            return replace(e, ty=self.u.meta())

        if isinstance(e, FunRef):
            if e.name not in self.functions:
                raise TypeCheckError(f"unknown function '{e.name}'", offset=e.loc)
            ty = self.functions[e.name]
            if ty is None:
                raise TypeCheckError(f"function '{e.name}' has no type signature", offset=e.loc)
            return replace(e, ty=ty)

        if isinstance(e, TVarRef):
            if not tvar_arg:
                raise TypeCheckError(f"TVar '{e.name}' used outside readTVar/writeTVar", offset=e.loc)
            if e.name not in self.tvars:
                raise TypeCheckError(f"unknown TVar '{e.name}'", offset=e.loc)
            return replace(e, ty=TTVar(self.tvars[e.name]))

        if isinstance(e, Lam):
            arg = self.u.meta()
            body = self.infer(e.body, {**ctx, e.var: arg})
            return replace(e, body=body, ty=TFun(arg, body.ty))

        if isinstance(e, App):
            fun = self.infer(e.fun, ctx)
            arg = self.infer(e.arg, ctx, tvar_arg=True)
            res = self.u.meta()
            self.u.unify(fun.ty, TFun(arg.ty, res), e)
            return replace(e, fun=fun, arg=arg, ty=res)

        if isinstance(e, Con):
            return self._infer_con(e, ctx)

        if isinstance(e, Case):
            return self._infer_case(e, ctx)

        if isinstance(e, PrimOp):
            spec = PRIM_SPECS.get(e.op)
            if spec is None or len(e.args) != spec.arity:
                raise TypeCheckError(f"bad use of primitive '{e.op}'", offset=e.loc)
            args = [self.infer(a, ctx) for a in e.args]
            if spec.arg_type == "eq":
                self.u.unify(args[1].ty, args[0].ty, e)
            else:
                expected = INT if spec.arg_type == "int" else BOOL
                for a in args:
                    self.u.unify(a.ty, expected, a)
            return replace(e, args=tuple(args), ty=INT if spec.result == "int" else BOOL)

        if isinstance(e, ReadTVar):
            return replace(e, ty=TStm(self._tvar_content(e.tvar, ctx, e)))

        if isinstance(e, WriteTVar):
            self._require_pure(e.expr, "writeTVar")
            payload = self.infer(e.expr, ctx)
            self.u.unify(payload.ty, self._tvar_content(e.tvar, ctx, e), e.expr)
            return replace(e, expr=payload, ty=TStm(UNIT))

        if isinstance(e, Return):
            self._require_pure(e.expr, "return")
            payload = self.infer(e.expr, ctx)
            return replace(e, expr=payload, ty=TStm(payload.ty))

        if isinstance(e, Bind):
            left = self.infer(e.left, ctx)
            right = self.infer(e.right, ctx)
            a, b = self.u.meta(), self.u.meta()
            self.u.unify(left.ty, TStm(a), e.left)
            self.u.unify(right.ty, TFun(a, TStm(b)), e.right)
            return replace(e, left=left, right=right, ty=TStm(b))

        if isinstance(e, OrElse):
            left = self.infer(e.left, ctx)
            right = self.infer(e.right, ctx)
            a = self.u.meta()
            self.u.unify(left.ty, TStm(a), e.left)
            self.u.unify(right.ty, TStm(a), e.right)
            return replace(e, left=left, right=right, ty=TStm(a))

        if isinstance(e, Retry):
            return replace(e, ty=TStm(self.u.meta()))

        raise TypeCheckError(f"cannot type {type(e).__name__} (desugar first)", offset=e.loc)

    def _tvar_content(self, name: str, ctx: Mapping[str, Type], where: Expr) -> Type:
        if name in ctx:
            content = self.u.meta()
            self.u.unify(ctx[name], TTVar(content), where)
            return content
        if name in self.tvars:
            return self.tvars[name]
        raise TypeCheckError(f"unknown TVar '{name}'", offset=where.loc)

    def _require_pure(self, payload: Expr, form: str) -> None:
        if not is_pure(payload):
            raise TypeCheckError(f"impure payload in {form}: the argument must be a pure expression", offset=payload.loc)

    def _con_fields(self, con: str, where: Expr) -> Tuple[List[Type], Type]:
        """Field types and result type of a constructor, instantiated with fresh metas."""
        if con in (TRUE_CON, FALSE_CON):
            return [], BOOL
        if con == UNIT_CON:
            return [], UNIT
        if con == NIL_CON:
            return [], TList(self.u.meta())
        if con == CONS_CON:
            elem = self.u.meta()
            return [elem, TList(elem)], TList(elem)
        arity = tuple_arity(con)
        if arity is not None and arity >= 2:
            items = [self.u.meta() for _ in range(arity)]
            return list(items), TTuple(tuple(items))
        sig = self.constructors.lookup(con)
        if sig is None:
            raise TypeCheckError(f"unknown constructor '{con}'", offset=where.loc)
        fields = list(sig.fields(con))
        if len(fields) != sig.arity(con):
            fields = fields + [self.u.meta() for _ in range(sig.arity(con) - len(fields))]
        return fields, TData(sig.datatype)

    def _infer_con(self, e: Con, ctx: Mapping[str, Type]) -> Expr:
        fields, result = self._con_fields(e.name, e)
        if len(fields) != len(e.args):
            raise TypeCheckError(f"constructor '{e.name}' expects {len(fields)} arguments, got {len(e.args)}", offset=e.loc)
        args = []
        for field_ty, arg in zip(fields, e.args):
            typed = self.infer(arg, ctx)
            self.u.unify(typed.ty, field_ty, arg)
            args.append(typed)
        return replace(e, args=tuple(args), ty=result)

    def _infer_case(self, e: Case, ctx: Mapping[str, Type]) -> Expr:
        scrutinee = self.infer(e.scrutinee, ctx)
        result = self.u.meta()
        alts = []
        for alt in e.alts:
            fields, con_ty = self._con_fields(alt.con, e)
            if len(fields) != len(alt.vars):
                raise TypeCheckError(f"pattern '{alt.con}' binds {len(alt.vars)} variables, expected {len(fields)}", offset=e.loc)
            self.u.unify(scrutinee.ty, con_ty, e.scrutinee)
            body = self.infer(alt.body, {**ctx, **dict(zip(alt.vars, fields))})
            self.u.unify(body.ty, result, alt.body)
            alts.append(replace(alt, body=body))
        return replace(e, scrutinee=scrutinee, alts=tuple(alts), ty=result)

    def finish(self, e: Expr) -> Expr:
        """Replace solved metas in every annotation."""
        def go(node: Expr) -> Expr:
            node = map_children(node, go)
            if node.ty is not None:
                node = replace(node, ty=self.u.zonk(node.ty))
            return node
        return go(e)

    def check(self, e: Expr, expected: Type, ctx: Mapping[str, Type]) -> Expr:
        typed = self.infer(e, ctx)
        self.u.unify(typed.ty, expected, e)
        return self.finish(typed)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def tvar_tuple_type(program: Program) -> Type:
    """Type of the environment tuple (a1, ..., an) over the declared TVars."""
    return tuple_type(program.tvar_types())


def check_program(program: Program) -> Program:
    """Type-check every declaration and return the program with annotated bodies."""
    inf = _Inferencer(program)

    for decl in program.tvars:
        _check_declared_type(decl.type, inf.constructors, decl.loc)
        if isinstance(decl.type, (TStm, TFun, TTVar)):
            raise TypeCheckError(f"TVar '{decl.name}' cannot hold {decl.type}", offset=decl.loc)
        if decl.init is not None:
            if not is_pure(decl.init):
                raise TypeCheckError(f"initializer of '{decl.name}' must be pure", offset=decl.loc)
            inf.check(decl.init, decl.type, {})

    functions = {}
    for name, fdef in program.functions.items():
        if fdef.type is None:
            raise TypeCheckError(f"function '{name}' has no type signature", offset=fdef.loc)
        _check_declared_type(fdef.type, inf.constructors, fdef.loc)
        body = inf.check(fdef.body, fdef.type, {})
        functions[name] = replace(fdef, body=body)
        logger.debug("function %s :: %s", name, fdef.type)

    if program.invariant is not None:
        inv = program.functions.get(program.invariant)
        if inv is None:
            raise TypeCheckError(f"invariant '{program.invariant}' is not a declared function")
        expected = TFun(tvar_tuple_type(program), BOOL)
        if inv.type != expected:
            raise TypeCheckError(
                f"invariant '{program.invariant}' must have type {expected}, has {inv.type}", offset=inv.loc)

    transactions = {}
    for name, tx in program.transactions.items():
        params = {p: inf.u.meta() for p, _ in tx.params}
        body = inf.check(tx.body, TStm(inf.u.meta()), params)
        param_types = tuple(inf.u.zonk(params[p]) for p, _ in tx.params)
        for (p, _), ty in zip(tx.params, param_types):
            if isinstance(ty, TMeta):
                logger.debug("transaction %s: parameter %s is unused, defaulting to Int", name, p)
        param_types = tuple(INT if isinstance(t, TMeta) else t for t in param_types)
        transactions[name] = replace(tx, body=body, param_types=param_types)
        logger.debug("transaction %s :: %s", name, body.ty)

    return replace(program, functions=functions, transactions=transactions)


def _check_declared_type(t: Type, constructors: Constructors, loc: Optional[int]) -> None:
    if isinstance(t, TData):
        if t.name not in constructors.sigs:
            raise TypeCheckError(f"unknown type '{t.name}'", offset=loc)
    elif isinstance(t, TList):
        _check_declared_type(t.elem, constructors, loc)
    elif isinstance(t, TTuple):
        for item in t.items:
            _check_declared_type(item, constructors, loc)
    elif isinstance(t, TFun):
        _check_declared_type(t.arg, constructors, loc)
        _check_declared_type(t.res, constructors, loc)
    elif isinstance(t, (TStm,)):
        _check_declared_type(t.res, constructors, loc)
    elif isinstance(t, TTVar):
        _check_declared_type(t.content, constructors, loc)


def annotate_expr(e: Expr, program: Program, ctx: Optional[Mapping[str, Type]] = None,
                  expected: Optional[Type] = None) -> Expr:
    """Type-check a free-standing expression against the program's declarations."""
    inf = _Inferencer(program)
    env = dict(ctx or {})
    if expected is None:
        return inf.finish(inf.infer(e, env))
    return inf.check(e, expected, env)


def infer_type(e: Expr, program: Program, ctx: Optional[Mapping[str, Type]] = None) -> Type:
    ty = annotate_expr(e, program, ctx).ty
    assert ty is not None
    return ty


def is_stm_typed(node: Expr) -> bool:
    """True iff the annotated node has an STM type."""
    if node.ty is None:
        raise TypeCheckError(f"{type(node).__name__} node carries no type annotation", offset=node.loc)
    return isinstance(node.ty, TStm)
