"""Data expressions and formulas over finite domains, plus the guard solver.

Expressions are small immutable trees.  Each node compiles itself lazily into a
closure ``fn(xi, cfg)`` where ``xi`` is a mapping of variable values and ``cfg``
the active :class:`~linkalg.data.DurationConfig`.  Reading an undefined variable
raises :class:`Unbound`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Iterable, Mapping, Sequence

from .data import (
    Ack,
    Cts,
    DataFrame,
    DurationConfig,
    Notice,
    Rts,
    User,
    complete_message,
    dur,
    IDLE,
)


class Unbound(Exception):
    """An expression referenced a variable outside the valuation."""


class ModelError(Exception):
    """The model is malformed (bad bound, unbindable guard variable, ...)."""


class Expr:
    __slots__ = ()

    def __add__(self, other: Any) -> "Op":
        return Op("add", (self, lift(other)))

    def __radd__(self, other: Any) -> "Op":
        return Op("add", (lift(other), self))

    def __sub__(self, other: Any) -> "Op":
        return Op("sub", (self, lift(other)))

    def __rsub__(self, other: Any) -> "Op":
        return Op("sub", (lift(other), self))

    def __mul__(self, other: Any) -> "Op":
        return Op("mul", (self, lift(other)))

    def __lt__(self, other: Any) -> "Op":
        return Op("lt", (self, lift(other)))

    def __le__(self, other: Any) -> "Op":
        return Op("le", (self, lift(other)))

    def __gt__(self, other: Any) -> "Op":
        return Op("gt", (self, lift(other)))

    def __ge__(self, other: Any) -> "Op":
        return Op("ge", (self, lift(other)))

    def __and__(self, other: Any) -> "Op":
        return Op("and", (self, lift(other)))

    def __or__(self, other: Any) -> "Op":
        return Op("or", (self, lift(other)))

    def __invert__(self) -> "Op":
        return Op("not", (self,))

    @property
    def fn(self) -> Callable[[Mapping, DurationConfig], Any]:
        cached = getattr(self, "_fn", None)
        if cached is None:
            cached = _compile(self)
            object.__setattr__(self, "_fn", cached)
        return cached


@dataclass(frozen=True, eq=True, order=False)
class Var(Expr):
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, eq=True, order=False)
class Const(Expr):
    value: Any

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True, eq=True, order=False)
class Wild(Expr):
    """Matches any field inside a ``new(...)`` pattern."""

    def __str__(self) -> str:
        return "_"


@dataclass(frozen=True, eq=True, order=False)
class Op(Expr):
    name: str
    args: tuple

    def __str__(self) -> str:
        infix = {"add": "+", "sub": "-", "mul": "*", "eq": "=", "ne": "!=",
                 "lt": "<", "le": "<=", "gt": ">", "ge": ">=", "and": "&", "or": "|"}
        if self.name in infix and len(self.args) == 2:
            return f"({self.args[0]} {infix[self.name]} {self.args[1]})"
        if self.name == "not":
            return f"!{self.args[0]}"
        return f"{self.name}({','.join(map(str, self.args))})"


WILD = Wild()
TRUE = Const(True)
FALSE = Const(False)
NOW = Var("now")
RFR = Var("rfr")


def lift(x: Any) -> Expr:
    return x if isinstance(x, Expr) else Const(x)


def V(name: str) -> Var:
    return Var(name)


def C(value: Any) -> Const:
    return Const(value)


def op(name: str, *args: Any) -> Op:
    return Op(name, tuple(lift(a) for a in args))


def eq(a: Any, b: Any) -> Op:
    return op("eq", a, b)


def ne(a: Any, b: Any) -> Op:
    return op("ne", a, b)


def emax(a: Any, b: Any) -> Op:
    return op("max", a, b)


def emin(a: Any, b: Any) -> Op:
    return op("min", a, b)


def pow2(a: Any) -> Op:
    return op("pow2", a)


def conj(*fs: Any) -> Expr:
    out: Expr | None = None
    for f in fs:
        out = lift(f) if out is None else Op("and", (out, lift(f)))
    return TRUE if out is None else out


def disj(*fs: Any) -> Expr:
    out: Expr | None = None
    for f in fs:
        out = lift(f) if out is None else Op("or", (out, lift(f)))
    return FALSE if out is None else out


def new(pattern: Any) -> Op:
    return op("new", pattern)


IDLE_F = Op("idle", ())
BUSY_F = Op("not", (IDLE_F,))


def dataframe(data: Any, src: Any, dest: Any) -> Op:
    return op("dataframe", data, src, dest)


def ack(src: Any, dest: Any) -> Op:
    return op("ack", src, dest)


def rts(src: Any, dest: Any, d: Any) -> Op:
    return op("rts", src, dest, d)


def cts(src: Any, dest: Any, d: Any) -> Op:
    return op("cts", src, dest, d)


def notice(kind: str, data: Any) -> Op:
    return op("notice", kind, data)


def field_of(msg: Any, name: str) -> Op:
    return op("field", msg, name)


def dur_of(msg: Any) -> Op:
    return op("dur", msg)


CONSTRUCTORS: dict[str, type] = {
    "dataframe": DataFrame,
    "ack": Ack,
    "rts": Rts,
    "cts": Cts,
}


# ---------------------------------------------------------------- compilation

def _var(name: str):
    def f(xi, cfg):
        try:
            return xi[name]
        except KeyError:
            raise Unbound(name) from None
    return f


def _compile(e: Expr):
    if isinstance(e, Var):
        return _var(e.name)
    if isinstance(e, Const):
        v = e.value
        return lambda xi, cfg: v
    if isinstance(e, Wild):
        raise ModelError("wildcard outside a new(...) pattern")
    assert isinstance(e, Op)
    name = e.name
    if name == "new":
        pattern = e.args[0]

        def f_new(xi, cfg):
            try:
                rfr = xi["rfr"]
            except KeyError:
                raise Unbound("rfr") from None
            m = complete_message(rfr, cfg)
            if m is None:
                return False
            return match(pattern, m, xi, cfg, None)
        return f_new
    if name == "idle":
        def f_idle(xi, cfg):
            try:
                return xi["rfr"] is IDLE
            except KeyError:
                raise Unbound("rfr") from None
        return f_idle
    fs = [a.fn for a in e.args]
    if name == "and":
        a, b = fs
        return lambda xi, cfg: bool(a(xi, cfg)) and bool(b(xi, cfg))
    if name == "or":
        a, b = fs
        return lambda xi, cfg: bool(a(xi, cfg)) or bool(b(xi, cfg))
    if name == "field":
        m_f = fs[0]
        attr = e.args[1].value
        return lambda xi, cfg: getattr(m_f(xi, cfg), attr)
    if name == "dur":
        m_f = fs[0]
        return lambda xi, cfg: dur(m_f(xi, cfg), cfg)
    if name == "notice":
        k, d = fs
        return lambda xi, cfg: Notice(k(xi, cfg), d(xi, cfg))
    if name == "user":
        return lambda xi, cfg: User(fs[0](xi, cfg), tuple(g(xi, cfg) for g in fs[1:]))
    if name in CONSTRUCTORS:
        cls = CONSTRUCTORS[name]
        return lambda xi, cfg: cls(*[g(xi, cfg) for g in fs])
    impl = _BINARY.get(name) or _UNARY.get(name)
    if impl is None:
        raise ModelError(f"unknown operator {name!r}")
    if len(fs) == 1:
        a = fs[0]
        return lambda xi, cfg: impl(a(xi, cfg))
    a, b = fs
    return lambda xi, cfg: impl(a(xi, cfg), b(xi, cfg))


_BINARY: dict[str, Callable[[Any, Any], Any]] = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "max": max,
    "min": min,
    "eq": lambda a, b: a == b,
    "ne": lambda a, b: a != b,
    "lt": lambda a, b: a < b,
    "le": lambda a, b: a <= b,
    "gt": lambda a, b: a > b,
    "ge": lambda a, b: a >= b,
}
_UNARY: dict[str, Callable[[Any], Any]] = {
    "not": lambda a: not a,
    "pow2": lambda a: 2 ** a,
}


def evaluate(e: Expr, xi: Mapping, cfg: DurationConfig) -> Any:
    return e.fn(xi, cfg)


def match(pattern: Expr, value: Any, xi: Mapping, cfg: DurationConfig,
          bindings: dict | None) -> bool:
    """Structural match of ``value`` against ``pattern``.

    With ``bindings`` given, unbound variables of the pattern are bound into it
    (unification); otherwise every variable must be defined.
    """
    if isinstance(pattern, Wild):
        return True
    if isinstance(pattern, Var):
        name = pattern.name
        if name in xi:
            return xi[name] == value
        if bindings is None:
            raise Unbound(name)
        if name in bindings:
            return bindings[name] == value
        bindings[name] = value
        return True
    if isinstance(pattern, Op) and pattern.name in CONSTRUCTORS:
        cls = CONSTRUCTORS[pattern.name]
        if not isinstance(value, cls):
            return False
        fields = cls.__slots__  # declaration order of the dataclass
        return all(match(p, getattr(value, f), xi, cfg, bindings)
                   for p, f in zip(pattern.args, fields))
    return pattern.fn(xi, cfg) == value


# ------------------------------------------------------------------ analysis

@lru_cache(maxsize=None)
def free_vars(e: Expr) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Op):
        out: frozenset[str] = frozenset()
        for a in e.args:
            out |= free_vars(a)
        if e.name in ("new", "idle"):
            out |= {"rfr"}
        return out
    return frozenset()


def conjuncts(e: Expr) -> list[Expr]:
    if isinstance(e, Op) and e.name == "and":
        return conjuncts(e.args[0]) + conjuncts(e.args[1])
    return [e]


def solve(phi: Expr, xi: Mapping, cfg: DurationConfig,
          domains: Mapping[str, Sequence[Any]]) -> list[dict]:
    """All extensions of ``xi`` (as dicts of new bindings) that make ``phi`` true.

    Variables free in ``phi`` but undefined in ``xi`` are first bound by
    unifying top-level ``new(pattern)`` conjuncts against the message just
    received; whatever remains is enumerated over its declared finite domain,
    in sorted variable order.
    """
    missing = sorted(v for v in free_vars(phi) if v not in xi)
    if not missing:
        try:
            return [{}] if phi.fn(xi, cfg) else []
        except Unbound:
            return []
    seed: dict = {}
    for c in conjuncts(phi):
        if isinstance(c, Op) and c.name == "new" and not all(v in xi for v in free_vars(c.args[0])):
            m = complete_message(xi.get("rfr"), cfg)
            if m is None:
                return []
            trial = dict(seed)
            scope = _Overlay(xi, seed)
            try:
                ok = match(c.args[0], m, scope, cfg, trial)
            except Unbound:
                continue
            if not ok:
                return []
            seed = trial
    rest = [v for v in missing if v not in seed]
    for v in rest:
        if v not in domains:
            raise ModelError(f"guard variable {v!r} has no finite domain")
    out = []
    for combo in itertools.product(*(domains[v] for v in rest)):
        ext = dict(seed)
        ext.update(zip(rest, combo))
        try:
            if phi.fn(_Overlay(xi, ext), cfg):
                out.append(ext)
        except Unbound:
            continue
    return out


def solve_by_enumeration(phi: Expr, xi: Mapping, cfg: DurationConfig,
                         domains: Mapping[str, Sequence[Any]]) -> list[dict]:
    """Reference solver: brute force over the domains of every missing variable."""
    missing = sorted(v for v in free_vars(phi) if v not in xi)
    out = []
    for combo in itertools.product(*(domains[v] for v in missing)):
        ext = dict(zip(missing, combo))
        try:
            if phi.fn(_Overlay(xi, ext), cfg):
                out.append(ext)
        except Unbound:
            continue
    return out


class _Overlay(Mapping):
    """Read-only view of ``base`` extended by ``top``."""

    __slots__ = ("base", "top")

    def __init__(self, base: Mapping, top: Mapping):
        self.base = base
        self.top = top

    def __getitem__(self, k):
        if k in self.top:
            return self.top[k]
        return self.base[k]

    def __contains__(self, k) -> bool:
        return k in self.top or k in self.base

    def __iter__(self):
        yield from self.top
        yield from (k for k in self.base if k not in self.top)

    def __len__(self) -> int:
        return len(set(self.top) | set(self.base))

    def keys(self):  # type: ignore[override]
        return set(self.top) | set(self.base)


def subexprs(e: Expr) -> Iterable[Expr]:
    yield e
    if isinstance(e, Op):
        for a in e.args:
            yield from subexprs(a)
