"""Bounded construction of the probabilistic labelled transition system of a network."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

from .network import Model, Network, NetTransition
from .node import Action


class ResourceError(RuntimeError):
    """The exploration exceeded its state budget."""


@dataclass(frozen=True, slots=True)
class Edge:
    """A stored transition: label and distribution over state indices."""

    label: Action
    dist: tuple            # ((state index, Fraction), ...)
    traffic: tuple | None = None

    @property
    def targets(self) -> tuple[int, ...]:
        return tuple(s for s, _w in self.dist)


@dataclass
class Plts:
    model: Model
    states: list[Network]
    index: dict
    edges: list[list[Edge]]     # per state; empty for truncated (unexpanded) states
    truncated: set[int]
    depth: list[int]            # minimal number of ticks from the root
    parent: list[tuple[int, int] | None]   # (state, edge index) on a shortest path from the root
    horizon: int
    initial: int = 0

    def __len__(self) -> int:
        return len(self.states)

    @property
    def n_transitions(self) -> int:
        return sum(len(e) for e in self.edges)

    def transitions(self) -> Iterator[tuple[int, int, Edge]]:
        for s, es in enumerate(self.edges):
            for k, e in enumerate(es):
                yield s, k, e

    def is_deadlock(self, s: int) -> bool:
        return not self.edges[s] and s not in self.truncated

    def path_to(self, s: int) -> list[tuple[int, int]]:
        """(state, edge index) steps of a shortest path from the root to ``s``."""
        steps = []
        while self.parent[s] is not None:
            ps, k = self.parent[s]
            steps.append((ps, k))
            s = ps
        steps.reverse()
        return steps

    def stats(self) -> dict:
        return {
            "states": len(self.states),
            "transitions": self.n_transitions,
            "truncated": len(self.truncated),
            "max_depth": max(self.depth, default=0),
            "horizon": self.horizon,
            "normalized": self.model.normalize,
            "por": self.model.por,
        }


def explore(model: Model, root: Network, horizon: int, *, budget: int = 1_000_000) -> Plts:
    """Breadth-first exploration up to ``horizon`` ticks from ``root``.

    States are ordered by the minimal number of ticks needed to reach them;
    states first reached after ``horizon`` ticks are kept as an unexpanded
    frontier and reported in ``Plts.truncated``.
    """
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    root = model.canonical(root)
    states = [root]
    index = {root: 0}
    depth = [0]
    parent: list = [None]
    edges: list[list[Edge]] = [[]]
    expanded = [False]
    queue: deque = deque([0])

    while queue:
        s = queue.popleft()
        if expanded[s]:
            continue
        d = depth[s]
        if d >= horizon:
            continue
        expanded[s] = True
        out = []
        for k, tr in enumerate(model.transitions(states[s])):
            w = 1 if tr.is_tick else 0
            dist = []
            for net, p in tr.dist:
                t = index.get(net)
                if t is None:
                    t = len(states)
                    if t >= budget:
                        raise ResourceError(f"state budget of {budget} states exceeded")
                    states.append(net)
                    index[net] = t
                    depth.append(d + w)
                    parent.append((s, k))
                    edges.append([])
                    expanded.append(False)
                    if w:
                        queue.append(t)
                    else:
                        queue.appendleft(t)
                elif not expanded[t] and d + w < depth[t]:
                    depth[t] = d + w
                    parent[t] = (s, k)
                    if w:
                        queue.append(t)
                    else:
                        queue.appendleft(t)
                dist.append((t, p))
            out.append(Edge(tr.label, tuple(dist), tr.traffic))
        edges[s] = out

    truncated = {i for i, e in enumerate(expanded) if not e}
    return Plts(model, states, index, edges, truncated, depth, parent, horizon)


def check_distributions(p: Plts) -> bool:
    """Every stored distribution has positive weights summing to exactly one."""
    for _s, _k, e in p.transitions():
        if any(w <= 0 for _t, w in e.dist) or sum(w for _t, w in e.dist) != Fraction(1):
            return False
    return True
