"""Sequential processes: AST, valuations and their one-step semantics.

Process expression nodes compare by identity.  Every state's expression is a
subterm of some defining equation (or a ``transmit`` whose message has been
fixed, which is interned), so identity is a sound and cheap state key.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterator, Mapping, Sequence

from .data import CONFLICT, DEFAULT_DURATIONS, IDLE, Chunk, DurationConfig, Frag, chunk_merge, dur
from .expr import (
    Const,
    Expr,
    ModelError,
    Op,
    Unbound,
    Var,
    free_vars,
    lift,
    solve,
    subexprs,
)

READONLY = frozenset({"now", "rfr", "counter"})


# ----------------------------------------------------------------- valuations

class Valuation(Mapping):
    """Immutable variable assignment with a cached hash."""

    __slots__ = ("_d", "_key", "_hash")

    def __init__(self, items: Mapping[str, Any] | None = None):
        self._d: dict = dict(items or {})
        self._key = None
        self._hash = None

    @classmethod
    def initial(cls, now: int = 0, rfr: Chunk = IDLE, **values: Any) -> "Valuation":
        return cls({"now": now, "rfr": rfr, "counter": 0, **values})

    def __getitem__(self, k: str) -> Any:
        return self._d[k]

    def __contains__(self, k: object) -> bool:
        return k in self._d

    def __iter__(self) -> Iterator[str]:
        return iter(self._d)

    def __len__(self) -> int:
        return len(self._d)

    def get(self, k, default=None):
        return self._d.get(k, default)

    def key(self) -> tuple:
        if self._key is None:
            self._key = tuple(sorted(self._d.items(), key=lambda kv: kv[0]))
        return self._key

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self.key())
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, Valuation):
            return NotImplemented
        return hash(self) == hash(other) and self._d == other._d

    def set(self, **updates: Any) -> "Valuation":
        d = dict(self._d)
        d.update(updates)
        return Valuation(d)

    def update(self, updates: Mapping[str, Any]) -> "Valuation":
        if not updates:
            return self
        d = dict(self._d)
        d.update(updates)
        return Valuation(d)

    def restrict(self, keep: frozenset[str]) -> "Valuation":
        return Valuation({k: v for k, v in self._d.items() if k in keep})

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}={v}" for k, v in self.key())
        return "{" + inner + "}"


# ------------------------------------------------------------------------ AST

class SeqExpr:
    """Base class of sequential process expressions (identity equality)."""

    owner: str = "?"

    def children(self) -> tuple["SeqExpr", ...]:
        return ()


@dataclass(eq=False)
class Call(SeqExpr):
    name: str
    args: tuple

    def __post_init__(self) -> None:
        self.args = tuple(lift(a) for a in self.args)

    def __repr__(self) -> str:
        return f"{self.name}({','.join(map(str, self.args))})"


@dataclass(eq=False)
class Guard(SeqExpr):
    phi: Expr
    p: SeqExpr

    def children(self):
        return (self.p,)

    def __repr__(self) -> str:
        return f"[{self.phi}]{self.p!r}"


@dataclass(eq=False)
class Assign(SeqExpr):
    var: str
    e: Expr
    p: SeqExpr

    def __post_init__(self) -> None:
        self.e = lift(self.e)

    def children(self):
        return (self.p,)

    def __repr__(self) -> str:
        return f"[[{self.var}:={self.e}]]{self.p!r}"


@dataclass(eq=False)
class Transmit(SeqExpr):
    e: Expr
    p: SeqExpr

    def __post_init__(self) -> None:
        self.e = lift(self.e)

    def children(self):
        return (self.p,)

    def __repr__(self) -> str:
        return f"transmit({self.e}).{self.p!r}"


@dataclass(eq=False)
class NewPkt(SeqExpr):
    data_var: str
    dest_var: str
    p: SeqExpr

    def children(self):
        return (self.p,)

    def __repr__(self) -> str:
        return f"newpkt({self.data_var},{self.dest_var}).{self.p!r}"


@dataclass(eq=False)
class Deliver(SeqExpr):
    e: Expr
    p: SeqExpr

    def __post_init__(self) -> None:
        self.e = lift(self.e)

    def children(self):
        return (self.p,)

    def __repr__(self) -> str:
        return f"deliver({self.e}).{self.p!r}"


@dataclass(eq=False)
class Choice(SeqExpr):
    p: SeqExpr
    q: SeqExpr

    def children(self):
        return (self.p, self.q)

    def __repr__(self) -> str:
        return f"({self.p!r} + {self.q!r})"


@dataclass(eq=False)
class ProbChoice(SeqExpr):
    """Uniform choice of ``var`` in 0..n, then ``p``."""

    var: str
    n: Expr
    p: SeqExpr

    def __post_init__(self) -> None:
        self.n = lift(self.n)

    def children(self):
        return (self.p,)

    def __repr__(self) -> str:
        return f"(+)[{self.var}=0..{self.n}]{self.p!r}"


def choice(*ps: SeqExpr) -> SeqExpr:
    """Right-nested ``p1 + (p2 + ...)``."""
    if not ps:
        raise ValueError("empty choice")
    out = ps[-1]
    for p in reversed(ps[:-1]):
        out = Choice(p, out)
    return out


# ---------------------------------------------------------------- definitions

@dataclass
class ProcessDefs:
    """Defining equations plus the finite data domains guards may bind over.

    ``time_vars`` names the variables holding absolute time values; the value
    is an optional floor relative to ``now`` below which the variable's exact
    value no longer matters (used by clock normalisation).
    """

    equations: dict[str, tuple[tuple[str, ...], SeqExpr]]
    domains: dict[str, tuple] = field(default_factory=dict)
    time_vars: dict[str, int | None] = field(default_factory=lambda: {"now": None})
    durations: DurationConfig = DEFAULT_DURATIONS
    entry: SeqExpr | None = None   # the process every node starts in

    def __post_init__(self) -> None:
        self.time_vars.setdefault("now", None)
        self._transmit_cache: dict = {}
        for name, (_params, body) in self.equations.items():
            for node in walk(body):
                node.owner = name
        if isinstance(self.entry, Call):
            self.entry.owner = self.entry.name
        self.check()

    def live(self, p: SeqExpr) -> frozenset[str]:
        """Variables whose value can still influence the behaviour of ``p``."""
        cache = self.__dict__.setdefault("_live", {})
        hit = cache.get(id(p))
        if hit is None:
            hit = _live(p, self) | READONLY
            cache[id(p)] = (hit, p)
            return hit
        return hit[0]

    def params(self, name: str) -> tuple[str, ...]:
        return self.equations[name][0]

    def body(self, name: str) -> SeqExpr:
        return self.equations[name][1]

    def fixed_transmit(self, m: Any, p: SeqExpr) -> "Transmit":
        key = (m, id(p))
        t = self._transmit_cache.get(key)
        if t is None:
            t = Transmit(Const(m), p)
            t.owner = p.owner
            self._transmit_cache[key] = t
        return t

    def check(self) -> None:
        """Reject assignments to read-only variables, unknown calls and unbound data variables."""
        for name, (params, body) in self.equations.items():
            _check_bound(body, set(params) | READONLY, self, name)

    def clock_normalisable(self) -> bool:
        """True iff absolute time values only flow through offsets, differences and comparisons."""
        try:
            for name, (params, body) in self.equations.items():
                for node in walk(body):
                    _check_time_usage(node, self)
        except _TimeMisuse:
            return False
        return True


def walk(p: SeqExpr) -> Iterator[SeqExpr]:
    seen: set[int] = set()
    stack = [p]
    while stack:
        x = stack.pop()
        if id(x) in seen:
            continue
        seen.add(id(x))
        yield x
        stack.extend(x.children())


def _live(p: SeqExpr, defs: "ProcessDefs") -> frozenset[str]:
    if isinstance(p, Call):
        out: frozenset[str] = frozenset()
        for a in p.args:
            out |= free_vars(a)
        return out
    if isinstance(p, Guard):
        return free_vars(p.phi) | defs.live(p.p)
    if isinstance(p, Assign):
        return free_vars(p.e) | (defs.live(p.p) - {p.var})
    if isinstance(p, (Transmit, Deliver)):
        return free_vars(p.e) | defs.live(p.p)
    if isinstance(p, NewPkt):
        return defs.live(p.p) - {p.data_var, p.dest_var}
    if isinstance(p, Choice):
        return defs.live(p.p) | defs.live(p.q)
    if isinstance(p, ProbChoice):
        return free_vars(p.n) | (defs.live(p.p) - {p.var})
    raise TypeError(f"not a process expression: {p!r}")


def _check_bound(p: SeqExpr, bound: set[str], defs: ProcessDefs, owner: str) -> None:
    def need(e: Expr) -> None:
        loose = free_vars(e) - bound
        if loose:
            raise ModelError(f"{owner}: unbound variable(s) {sorted(loose)} in {e}")

    if isinstance(p, Call):
        if p.name not in defs.equations:
            raise ModelError(f"{owner}: call to undefined process {p.name}")
        if len(p.args) != len(defs.params(p.name)):
            raise ModelError(f"{owner}: arity mismatch calling {p.name}")
        for a in p.args:
            need(a)
    elif isinstance(p, Guard):
        _check_bound(p.p, bound | free_vars(p.phi), defs, owner)
    elif isinstance(p, Assign):
        if p.var in READONLY:
            raise ModelError(f"{owner}: assignment to read-only variable {p.var}")
        need(p.e)
        _check_bound(p.p, bound | {p.var}, defs, owner)
    elif isinstance(p, (Transmit, Deliver)):
        need(p.e)
        _check_bound(p.p, bound, defs, owner)
    elif isinstance(p, NewPkt):
        _check_bound(p.p, bound | {p.data_var, p.dest_var}, defs, owner)
    elif isinstance(p, Choice):
        _check_bound(p.p, bound, defs, owner)
        _check_bound(p.q, bound, defs, owner)
    elif isinstance(p, ProbChoice):
        if p.var in READONLY:
            raise ModelError(f"{owner}: probabilistic choice binds read-only {p.var}")
        need(p.n)
        _check_bound(p.p, bound | {p.var}, defs, owner)


class _TimeMisuse(Exception):
    pass


_ABS, _VAL = "abs", "val"


def _kind(e: Expr, defs: ProcessDefs) -> str:
    if isinstance(e, Var):
        return _ABS if e.name in defs.time_vars else _VAL
    if not isinstance(e, Op):
        return _VAL
    kinds = [_kind(a, defs) for a in e.args]
    n = e.name
    if n == "add":
        if kinds == [_ABS, _ABS]:
            raise _TimeMisuse(str(e))
        return _ABS if _ABS in kinds else _VAL
    if n == "sub":
        if kinds == [_VAL, _ABS]:
            raise _TimeMisuse(str(e))
        return _VAL if kinds[0] == kinds[1] else _ABS
    if n in ("max", "min"):
        if kinds[0] != kinds[1]:
            raise _TimeMisuse(str(e))
        return kinds[0]
    if n in ("eq", "ne", "lt", "le", "gt", "ge"):
        if kinds[0] != kinds[1]:
            raise _TimeMisuse(str(e))
        return _VAL
    if _ABS in kinds:
        raise _TimeMisuse(str(e))
    return _VAL


def _check_time_usage(p: SeqExpr, defs: ProcessDefs) -> None:
    def value(e: Expr) -> None:
        if _kind(e, defs) != _VAL:
            raise _TimeMisuse(str(e))

    if isinstance(p, Guard):
        value(p.phi)
    elif isinstance(p, Assign):
        want = _ABS if p.var in defs.time_vars else _VAL
        if _kind(p.e, defs) != want:
            raise _TimeMisuse(f"{p.var} := {p.e}")
    elif isinstance(p, (Transmit, Deliver)):
        value(p.e)
    elif isinstance(p, ProbChoice):
        value(p.n)
        if p.var in defs.time_vars:
            raise _TimeMisuse(p.var)
    elif isinstance(p, NewPkt):
        if p.data_var in defs.time_vars or p.dest_var in defs.time_vars:
            raise _TimeMisuse(p.data_var)
    elif isinstance(p, Call):
        for a, param in zip(p.args, defs.params(p.name)):
            want = _ABS if param in defs.time_vars else _VAL
            if _kind(a, defs) != want:
                raise _TimeMisuse(f"{p.name}: {param} <- {a}")


# --------------------------------------------------------------------- states

@dataclass(frozen=True, eq=False)
class ProcState:
    xi: Valuation
    p: SeqExpr

    def __hash__(self) -> int:
        return hash((hash(self.xi), id(self.p)))

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, ProcState):
            return NotImplemented
        return self.p is other.p and self.xi == other.xi

    def __repr__(self) -> str:
        return f"<{self.xi!r}, {self.p!r}>"


# Process-level actions.  Time-consuming ones never leave this module: they
# appear as timed offers instead.

@dataclass(frozen=True, slots=True)
class ProcAction:
    kind: str          # "tau" | "newpkt" | "deliver"
    args: tuple = ()

    def __str__(self) -> str:
        if not self.args:
            return self.kind
        return f"{self.kind}({','.join(map(str, self.args))})"


TAU = ProcAction("tau")


def NewPktIn(d: Any, dest: Any) -> ProcAction:
    return ProcAction("newpkt", (d, dest))


def DeliverOut(d: Any) -> ProcAction:
    return ProcAction("deliver", (d,))


Dist = tuple  # tuple of (outcome, Fraction) pairs; weights positive, summing to 1


def point(s: Any) -> Dist:
    return ((s, Fraction(1)),)


def uniform(outcomes: Sequence[Any]) -> Dist:
    w = Fraction(1, len(outcomes))
    return tuple((o, w) for o in outcomes)


@dataclass(frozen=True, slots=True)
class Injection:
    """What the network layer currently offers a node: a packet, and whether
    the node may still decline it for now (lazy environment)."""

    data: Any
    dest: Any
    lazy: bool = False


@dataclass(frozen=True, eq=False)
class TimedOffer:
    """A time step the process can take: transmit ``frag`` and continue as
    ``(xi, p)``; ``frag is None`` means wait with the expression unchanged."""

    frag: Frag | None
    xi: Valuation | None = None
    p: SeqExpr | None = None

    @property
    def is_wait(self) -> bool:
        return self.frag is None

    def __repr__(self) -> str:
        return "wait" if self.frag is None else f"transmit{self.frag}"


WAIT = TimedOffer(None)


# ------------------------------------------------------------------ semantics

def instant_steps(s: ProcState, defs: ProcessDefs,
                  inj: Injection | None = None) -> list[tuple[ProcAction, Dist]]:
    """All instantaneous transitions of ``s`` (tau, newpkt, deliver)."""
    return _instant(s.xi, s.p, defs, inj)


def _instant(xi: Valuation, p: SeqExpr, defs: ProcessDefs,
             inj: Injection | None) -> list[tuple[ProcAction, Dist]]:
    cfg = defs.durations
    if isinstance(p, Guard):
        out = []
        for ext in solve(p.phi, xi, cfg, defs.domains):
            out.append((TAU, point(ProcState(xi.update(ext), p.p))))
        return out
    if isinstance(p, Choice):
        return _instant(xi, p.p, defs, inj) + _instant(xi, p.q, defs, inj)
    if isinstance(p, Call):
        inner = _call_valuation(xi, p, defs)
        if inner is None:
            return []
        return _instant(inner, defs.body(p.name), defs, inj)
    if isinstance(p, Assign):
        try:
            v = p.e.fn(xi, cfg)
        except Unbound:
            return []
        return [(TAU, point(ProcState(xi.set(**{p.var: v}), p.p)))]
    if isinstance(p, Deliver):
        try:
            v = p.e.fn(xi, cfg)
        except Unbound:
            return []
        return [(DeliverOut(v), point(ProcState(xi, p.p)))]
    if isinstance(p, NewPkt):
        if inj is None:
            return []
        nxt = xi.set(**{p.data_var: inj.data, p.dest_var: inj.dest})
        return [(NewPktIn(inj.data, inj.dest), point(ProcState(nxt, p.p)))]
    if isinstance(p, ProbChoice):
        try:
            n = p.n.fn(xi, cfg)
        except Unbound:
            return []
        if not isinstance(n, int) or isinstance(n, bool) or n < 0:
            raise ModelError(f"probabilistic choice bound {p.n} evaluated to {n!r}")
        states = [ProcState(xi.set(**{p.var: i}), p.p) for i in range(n + 1)]
        return [(TAU, uniform(states))]
    if isinstance(p, Transmit):
        return []
    raise TypeError(f"not a process expression: {p!r}")


def _call_valuation(xi: Valuation, p: Call, defs: ProcessDefs) -> Valuation | None:
    cfg = defs.durations
    try:
        values = [a.fn(xi, cfg) for a in p.args]
    except Unbound:
        return None
    d = {k: xi[k] for k in READONLY if k in xi}
    d.update(zip(defs.params(p.name), values))
    return Valuation(d)


def timed_offers(s: ProcState, defs: ProcessDefs,
                 inj: Injection | None = None) -> list[TimedOffer]:
    """All time-consuming steps available to ``s`` (at most one wait)."""
    return _timed(s.xi, s.p, defs, inj)


def _timed(xi: Valuation, p: SeqExpr, defs: ProcessDefs,
           inj: Injection | None) -> list[TimedOffer]:
    cfg = defs.durations
    if isinstance(p, Transmit):
        try:
            m = p.e.fn(xi, cfg)
        except Unbound:
            return [WAIT]
        c = xi["counter"] + 1
        total = dur(m, cfg)
        if c < total:
            return [TimedOffer(Frag(m, c), xi.set(counter=c), defs.fixed_transmit(m, p.p))]
        return [TimedOffer(Frag(m, c), xi.set(counter=0), p.p)]
    if isinstance(p, Guard):
        return [] if solve(p.phi, xi, cfg, defs.domains) else [WAIT]
    if isinstance(p, Choice):
        left = _timed(xi, p.p, defs, inj)
        right = _timed(xi, p.q, defs, inj)
        sends = [o for o in left + right if not o.is_wait]
        if WAIT in left and WAIT in right:
            sends.append(WAIT)
        return sends
    if isinstance(p, Call):
        inner = _call_valuation(xi, p, defs)
        if inner is None:
            return [WAIT]
        return _timed(inner, defs.body(p.name), defs, inj)
    if isinstance(p, NewPkt):
        return [WAIT] if inj is None or inj.lazy else []
    if isinstance(p, (Assign, Deliver)):
        try:
            p.e.fn(xi, cfg)
        except Unbound:
            return [WAIT]
        return []
    if isinstance(p, ProbChoice):
        try:
            p.n.fn(xi, cfg)
        except Unbound:
            return [WAIT]
        return []
    raise TypeError(f"not a process expression: {p!r}")


def timed_offer(s: ProcState, defs: ProcessDefs, inj: Injection | None = None) -> TimedOffer | None:
    """The single timed offer of ``s``; ``None`` if it can only act instantly.

    A transmission is preferred to a wait when both exist; models where a
    choice offers two different transmissions must use :func:`timed_offers`.
    """
    offers = timed_offers(s, defs, inj)
    if not offers:
        return None
    return offers[0]


def advance(s: ProcState, offer: TimedOffer, ch: Chunk) -> ProcState:
    """Take the time step ``offer`` while receiving chunk ``ch``."""
    if offer is None:
        raise ValueError("cannot advance a process that offers no time step")
    if offer.frag is None:
        xi, p = s.xi, s.p
    else:
        xi, p = offer.xi, offer.p
    return ProcState(xi.set(rfr=chunk_merge(xi["rfr"], ch), now=xi["now"] + 1), p)


__all__ = [
    "READONLY", "Valuation", "SeqExpr", "Call", "Guard", "Assign", "Transmit", "NewPkt",
    "Deliver", "Choice", "ProbChoice", "choice", "ProcessDefs", "ProcState", "ProcAction",
    "TAU", "NewPktIn", "DeliverOut", "Dist", "point", "uniform", "Injection", "TimedOffer",
    "WAIT", "instant_steps", "timed_offers", "timed_offer", "advance", "walk", "CONFLICT",
    "Op", "Var",
]
