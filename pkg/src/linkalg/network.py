"""Networks: parallel composition, the collision union, encapsulation and ticks.

A :class:`Model` holds everything static about a network (process
definitions, declared ids, environment schedule, mobility policy, composition
shape).  A :class:`Network` is one dynamic snapshot: the nodes plus the
environment's own bookkeeping.  ``Model.transitions`` is the network-level
transition relation of an encapsulated network.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Literal, Mapping, Sequence, Union

from .data import CONFLICT, IDLE, Chunk, NodeId, Signal
from .expr import ModelError
from .node import (
    TAU,
    TICK,
    Action,
    Node,
    apply_connect,
    apply_connect_oneway,
    apply_disconnect,
    apply_disconnect_oneway,
    connect,
    disconnect,
)
from .process import (
    Injection,
    ProcessDefs,
    ProcState,
    Valuation,
    advance,
    instant_steps,
    timed_offers,
)


def uplus(t1: Mapping[NodeId, Chunk], t2: Mapping[NodeId, Chunk]) -> dict:
    """Pointwise union of chunk maps; ids in both domains receive ``CONFLICT``."""
    if not t1:
        return dict(t2)
    out = dict(t1)
    for k, v in t2.items():
        out[k] = CONFLICT if k in t1 else v
    return out


Shape = Union[int, tuple]


def left_assoc(n: int) -> Shape:
    shape: Shape = 0
    for i in range(1, n):
        shape = (shape, i)
    return shape


def right_assoc(n: int) -> Shape:
    shape: Shape = n - 1
    for i in range(n - 2, -1, -1):
        shape = (i, shape)
    return shape


def shape_leaves(shape: Shape) -> list[int]:
    if isinstance(shape, int):
        return [shape]
    return shape_leaves(shape[0]) + shape_leaves(shape[1])


def compose(shape: Shape, maps: Sequence[Mapping]) -> dict:
    if isinstance(shape, int):
        return dict(maps[shape])
    return uplus(compose(shape[0], maps), compose(shape[1], maps))


# ---------------------------------------------------------------- environment

@dataclass(frozen=True)
class InjectionSpec:
    """Network-layer request: offer ``newpkt(data, dest)`` to ``node`` once ``clock >= at``.

    ``repeat`` keeps offering after each acceptance (a saturating source);
    ``lazy`` lets the node decline for now, leaving the timing to the scheduler.
    """

    node: NodeId
    data: Any
    dest: NodeId
    at: int = 0
    repeat: bool = False
    lazy: bool = False


@dataclass(frozen=True)
class MobilityEvent:
    at: int
    kind: Literal["connect", "disconnect"]
    a: NodeId
    b: NodeId


@dataclass(frozen=True)
class MobilityPolicy:
    """``off``: static topology.  ``scripted``: the listed events fire once their time
    is reached (time cannot pass while one is due).  ``arbitrary``: any listed pair
    may connect or disconnect at any moment."""

    mode: Literal["off", "scripted", "arbitrary"] = "off"
    events: tuple[MobilityEvent, ...] = ()
    pairs: tuple[tuple[NodeId, NodeId], ...] = ()
    symmetric: bool = True


MOBILITY_OFF = MobilityPolicy()


@dataclass(frozen=True, slots=True)
class EnvState:
    clock: int = 0
    consumed: frozenset = frozenset()     # indices of one-shot injections already taken
    moved: frozenset = frozenset()        # indices of scripted mobility events done


@dataclass(frozen=True, eq=False)
class Network:
    nodes: tuple
    env: EnvState = EnvState()

    def __hash__(self) -> int:
        h = self.__dict__.get("_h")
        if h is None:
            h = hash((self.nodes, self.env))
            object.__setattr__(self, "_h", h)
        return h

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, Network):
            return NotImplemented
        return hash(self) == hash(other) and self.env == other.env and self.nodes == other.nodes

    def node(self, node_id: NodeId) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise ModelError(f"unknown node id {node_id!r}")

    @property
    def ids(self) -> tuple:
        return tuple(n.id for n in self.nodes)

    def __repr__(self) -> str:
        return "[" + " || ".join(map(repr, self.nodes)) + f"] @{self.env.clock}"


def cntd(net: Network, a: NodeId, b: NodeId) -> bool:
    """True iff ``b`` is in the transmission range of ``a``."""
    net.node(b)
    return b in net.node(a).range


@dataclass(frozen=True, eq=False)
class NetTransition:
    label: Action
    dist: tuple                  # ((Network, Fraction), ...)
    traffic: tuple | None = None  # sorted (id, chunk) pairs of the tick's combined map
    sent: tuple = ()              # (sender id, fragment) pairs of the tick

    @property
    def is_tick(self) -> bool:
        return self.label is TICK or self.label.kind == "tick"

    def traffic_map(self) -> dict:
        return dict(self.traffic or ())


class Model:
    """Static description of an encapsulated network."""

    def __init__(self, defs: ProcessDefs, ids: Sequence[NodeId], *,
                 schedule: Sequence[InjectionSpec] = (),
                 mobility: MobilityPolicy = MOBILITY_OFF,
                 shape: Shape | None = None,
                 por: bool = False,
                 normalize: bool = False,
                 drop_dead: bool = True):
        self.defs = defs
        self.ids = tuple(ids)
        if len(set(self.ids)) != len(self.ids):
            raise ModelError("node identifiers must be unique")
        self.schedule = tuple(schedule)
        self.mobility = mobility
        self.shape = left_assoc(len(self.ids)) if shape is None else shape
        if sorted(shape_leaves(self.shape)) != list(range(len(self.ids))):
            raise ModelError(f"shape {self.shape!r} does not cover every node exactly once")
        self.por = por
        self.normalize = normalize and defs.clock_normalisable()
        self.drop_dead = drop_dead
        known = set(self.ids)
        for inj in self.schedule:
            if inj.node not in known or inj.dest not in known:
                raise ModelError(f"injection references unknown node: {inj}")
            if inj.at < 0:
                raise ModelError("injection times must be >= 0")
        for ev in mobility.events:
            if ev.a not in known or ev.b not in known:
                raise ModelError(f"mobility event references unknown node: {ev}")
        times = [i.at for i in self.schedule] + [e.at for e in mobility.events]
        self.clock_cap = max(times, default=0)
        self._step_cache: dict = {}
        self._norm_cache: dict = {}
        self._intern: dict = {}
        self._index = {nid: i for i, nid in enumerate(self.ids)}

    # ------------------------------------------------------------- building

    def network(self, states: Mapping[NodeId, ProcState],
                ranges: Mapping[NodeId, Iterable[NodeId]]) -> Network:
        known = set(self.ids)
        nodes = []
        for nid in self.ids:
            rng = frozenset(ranges.get(nid, ()))
            if not rng <= known:
                raise ModelError(f"range of {nid} mentions undeclared ids {sorted(rng - known)}")
            nodes.append(Node(nid, states[nid], rng))
        return self.canonical(Network(tuple(nodes)))

    def reshaped(self, shape: Shape, order: Sequence[NodeId] | None = None) -> "Model":
        """Same network composed differently (for associativity/commutativity checks)."""
        ids = tuple(order) if order is not None else self.ids
        return Model(self.defs, ids, schedule=self.schedule, mobility=self.mobility,
                     shape=shape, por=self.por, normalize=self.normalize,
                     drop_dead=self.drop_dead)

    def reorder(self, net: Network, order: Sequence[NodeId]) -> Network:
        return Network(tuple(net.node(i) for i in order), net.env)

    # ----------------------------------------------------------- environment

    def pending(self, net: Network, node_id: NodeId) -> tuple[int, Injection] | None:
        env = net.env
        for k, inj in enumerate(self.schedule):
            if inj.node != node_id or k in env.consumed or env.clock < inj.at:
                continue
            return k, Injection(inj.data, inj.dest, inj.lazy)
        return None

    def _due_events(self, env: EnvState) -> list[int]:
        if self.mobility.mode != "scripted":
            return []
        return [k for k, ev in enumerate(self.mobility.events)
                if k not in env.moved and env.clock >= ev.at]

    # ----------------------------------------------------------- transitions

    def _node_info(self, node: Node, inj: Injection | None):
        key = (node.state, inj)
        hit = self._step_cache.get(key)
        if hit is None:
            hit = (tuple(instant_steps(node.state, self.defs, inj)),
                   tuple(timed_offers(node.state, self.defs, inj)))
            self._step_cache[key] = hit
        return hit

    def transitions(self, net: Network, *, env_enabled: bool = True,
                    por: bool | None = None) -> list[NetTransition]:
        """All transitions of the encapsulated network ``net``."""
        por = self.por if por is None else por
        nodes = net.nodes
        pend = [self.pending(net, n.id) if env_enabled else None for n in nodes]
        infos = [self._node_info(n, p[1] if p else None) for n, p in zip(nodes, pend)]

        if por:
            for i, (inst, offers) in enumerate(infos):
                if len(inst) == 1 and not offers and inst[0][0].kind == "tau":
                    return [self._lift_instant(net, i, inst[0], pend[i])]

        out: list[NetTransition] = []
        order = shape_leaves(self.shape)
        for i in order:
            for step in infos[i][0]:
                out.append(self._lift_instant(net, i, step, pend[i]))

        due = self._due_events(net.env) if env_enabled else []
        for k in due:
            ev = self.mobility.events[k]
            env = EnvState(net.env.clock, net.env.consumed, net.env.moved | {k})
            out.append(self._mobility(net, ev.kind, ev.a, ev.b, env))
        if env_enabled and self.mobility.mode == "arbitrary":
            for a, b in self.mobility.pairs:
                kind = "disconnect" if b in net.node(a).range else "connect"
                out.append(self._mobility(net, kind, a, b, net.env))

        if not due and all(offers for _inst, offers in infos):
            out.extend(self._ticks(net, infos))
        return out

    def _lift_instant(self, net: Network, i: int, step, pend) -> NetTransition:
        pa, dist = step
        node = net.nodes[i]
        if pa.kind == "tau":
            label = TAU
        elif pa.kind == "deliver":
            label = Action("deliver", (node.id, pa.args[0]))
        else:
            label = Action("newpkt", (node.id, pa.args[0], pa.args[1]))
        env = net.env
        if pa.kind == "newpkt" and pend is not None:
            k = pend[0]
            if not self.schedule[k].repeat:
                env = EnvState(env.clock, env.consumed | {k}, env.moved)
        outcomes = []
        for s, w in dist:
            nodes = net.nodes[:i] + (node.with_state(s),) + net.nodes[i + 1:]
            outcomes.append((self.canonical(Network(nodes, env)), w))
        return NetTransition(label, tuple(outcomes))

    def _mobility(self, net: Network, kind: str, a: NodeId, b: NodeId, env: EnvState) -> NetTransition:
        if kind == "connect":
            fn = apply_connect if self.mobility.symmetric else apply_connect_oneway
            label = connect(a, b)
        else:
            fn = apply_disconnect if self.mobility.symmetric else apply_disconnect_oneway
            label = disconnect(a, b)
        nodes = tuple(fn(n, a, b) for n in net.nodes)
        return NetTransition(label, ((self.canonical(Network(nodes, env)), Fraction(1)),))

    def _ticks(self, net: Network, infos) -> list[NetTransition]:
        env = net.env
        clock = min(env.clock + 1, self.clock_cap)
        env2 = EnvState(clock, env.consumed, env.moved)
        out = []
        for combo in itertools.product(*(offers for _inst, offers in infos)):
            maps = []
            for node, offer in zip(net.nodes, combo):
                maps.append({r: offer.frag for r in node.range} if offer.frag is not None else {})
            total = compose(self.shape, maps)
            nodes = tuple(n.with_state(advance(n.state, o, total.get(n.id, IDLE)))
                          for n, o in zip(net.nodes, combo))
            traffic = tuple(sorted(total.items(), key=lambda kv: str(kv[0])))
            sent = tuple((n.id, o.frag) for n, o in zip(net.nodes, combo) if o.frag is not None)
            out.append(NetTransition(TICK, ((self.canonical(Network(nodes, env2)), Fraction(1)),),
                                     traffic, sent))
        return out

    # --------------------------------------------------------- normalisation

    def canonical(self, net: Network) -> Network:
        """Intern the nodes, drop dead variables and, if enabled, shift clocks to ``now = 0``."""
        return Network(tuple(self._canonical_node(n) for n in net.nodes), net.env)

    def _canonical_node(self, n: Node) -> Node:
        hit = self._norm_cache.get(n)
        if hit is not None:
            return hit
        xi = n.state.xi
        keep = self.defs.live(n.state.p) if self.drop_dead else None
        now = xi["now"]
        shift = self.normalize and now != 0
        if shift or (keep is not None and any(k not in keep for k in xi)):
            floors = self.defs.time_vars
            d = {}
            for k, v in xi.items():
                if keep is not None and k not in keep:
                    continue
                if shift and k in floors and isinstance(v, int):
                    v = v - now
                    lo = floors[k]
                    if lo is not None and v < lo:
                        v = lo
                d[k] = v
            out = n.with_state(ProcState(Valuation(d), n.state.p))
        else:
            out = n
        out = self._intern.setdefault(out, out)
        self._norm_cache[n] = out
        return out

    def clear_caches(self) -> None:
        self._step_cache.clear()
        self._norm_cache.clear()
        self._intern.clear()


__all__ = [
    "uplus", "compose", "left_assoc", "right_assoc", "shape_leaves", "InjectionSpec",
    "MobilityEvent", "MobilityPolicy", "MOBILITY_OFF", "EnvState", "Network", "cntd",
    "NetTransition", "Model", "Signal",
]
