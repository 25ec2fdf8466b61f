"""Node expressions ``id:(xi,P):R`` and the lifting of process actions to node actions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Iterable

from .data import Chunk, NodeId
from .process import (
    Dist,
    Injection,
    ProcessDefs,
    ProcState,
    TimedOffer,
    advance,
    instant_steps,
    timed_offers,
)


@dataclass(frozen=True, slots=True)
class Action:
    """Node- and network-level transition label.

    ``kind`` is one of ``tick``, ``tau``, ``deliver``, ``newpkt``, ``connect``
    and ``disconnect``; ``args`` holds the identifiers and data.
    """

    kind: str
    args: tuple = ()

    def __str__(self) -> str:
        if self.kind == "deliver":
            return f"{self.args[0]}:deliver({self.args[1]})"
        if self.kind == "newpkt":
            return f"{self.args[0]}:newpkt({self.args[1]},{self.args[2]})"
        if not self.args:
            return self.kind
        return f"{self.kind}({','.join(map(str, self.args))})"


TICK = Action("tick")
TAU = Action("tau")


def deliver(node: NodeId, d: Any) -> Action:
    return Action("deliver", (node, d))


def newpkt(node: NodeId, d: Any, dest: NodeId) -> Action:
    return Action("newpkt", (node, d, dest))


def connect(a: NodeId, b: NodeId) -> Action:
    return Action("connect", (a, b))


def disconnect(a: NodeId, b: NodeId) -> Action:
    return Action("disconnect", (a, b))


ANY = None  # wildcard inside label patterns


def label_matches(pattern: Action, a: Action) -> bool:
    """``pattern`` matches ``a`` when kinds agree and every non-wildcard argument is equal.

    A pattern with no arguments matches every action of its kind.
    """
    if pattern.kind != a.kind:
        return False
    if not pattern.args:
        return True
    if len(pattern.args) != len(a.args):
        return False
    return all(p is ANY or p == x for p, x in zip(pattern.args, a.args))


@dataclass(frozen=True, eq=False)
class Node:
    id: NodeId
    state: ProcState
    range: frozenset

    def __hash__(self) -> int:
        h = self.__dict__.get("_h")
        if h is None:
            h = hash((self.id, self.state, self.range))
            object.__setattr__(self, "_h", h)
        return h

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, Node):
            return NotImplemented
        return (hash(self) == hash(other) and self.id == other.id
                and self.range == other.range and self.state == other.state)

    def with_state(self, state: ProcState) -> "Node":
        return Node(self.id, state, self.range)

    def __repr__(self) -> str:
        return f"{self.id}:{self.state!r}:{{{','.join(sorted(map(str, self.range)))}}}"


def lift_action(node_id: NodeId, kind: str, args: tuple) -> Action:
    if kind == "tau":
        return TAU
    if kind == "deliver":
        return deliver(node_id, args[0])
    if kind == "newpkt":
        return newpkt(node_id, args[0], args[1])
    raise ValueError(f"unknown process action {kind!r}")


def node_instant(n: Node, defs: ProcessDefs, inj: Injection | None = None) -> list[tuple[Action, Dist]]:
    """Instantaneous node transitions: process actions lifted pointwise."""
    out = []
    for pa, dist in instant_steps(n.state, defs, inj):
        label = lift_action(n.id, pa.kind, pa.args)
        out.append((label, tuple((n.with_state(s), w) for s, w in dist)))
    return out


@dataclass(frozen=True)
class TimedStep:
    """A node's participation in the next tick."""

    transmitted: dict       # NodeId -> Chunk; empty when waiting
    offer: TimedOffer
    node: Node

    def continue_with(self, ch: Chunk) -> Node:
        return self.node.with_state(advance(self.node.state, self.offer, ch))


def transmitted_map(offer: TimedOffer, rng: Iterable[NodeId]) -> dict:
    if offer.frag is None:
        return {}
    return {r: offer.frag for r in rng}


def node_timed_all(n: Node, defs: ProcessDefs, inj: Injection | None = None) -> list[TimedStep]:
    return [TimedStep(transmitted_map(o, n.range), o, n) for o in timed_offers(n.state, defs, inj)]


def node_timed(n: Node, defs: ProcessDefs, inj: Injection | None = None) -> TimedStep | None:
    """The node's single timed participation, or ``None`` if it cannot let time pass."""
    steps = node_timed_all(n, defs, inj)
    return steps[0] if steps else None


def apply_connect(n: Node, a: NodeId, b: NodeId) -> Node:
    if n.id == a:
        return Node(n.id, n.state, n.range | {b})
    if n.id == b:
        return Node(n.id, n.state, n.range | {a})
    return n


def apply_disconnect(n: Node, a: NodeId, b: NodeId) -> Node:
    if n.id == a:
        return Node(n.id, n.state, n.range - {b})
    if n.id == b:
        return Node(n.id, n.state, n.range - {a})
    return n


def apply_connect_oneway(n: Node, a: NodeId, b: NodeId) -> Node:
    """Asymmetric variant: only ``a`` gains ``b`` in its range."""
    if n.id == a:
        return Node(n.id, n.state, n.range | {b})
    return n


def apply_disconnect_oneway(n: Node, a: NodeId, b: NodeId) -> Node:
    if n.id == a:
        return Node(n.id, n.state, n.range - {b})
    return n


MobilityFn = Callable[[Node, NodeId, NodeId], Node]
