"""Strong probabilistic bisimulation between explored pLTSs by partition refinement."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction

from .node import Action
from .plts import Plts


@dataclass
class BisimResult:
    bisimilar: bool
    blocks: int                          # classes of the coarsest bisimulation on the union
    rounds: int
    witness: list[Action] | None = None  # a label sequence one side can perform and the other cannot
    witness_side: int | None = None      # 0 or 1: the side that performs the witness
    relation: list[tuple[int, int]] | None = None   # related (left, right) state pairs

    def __bool__(self) -> bool:
        return self.bisimilar


def _union(p1: Plts, p2: Plts):
    off = len(p1.states)
    edges = []
    for p, shift in ((p1, 0), (p2, off)):
        for s, es in enumerate(p.edges):
            edges.append([(e.label, tuple((t + shift, w) for t, w in e.dist)) for e in es])
    truncated = set(p1.truncated) | {s + off for s in p2.truncated}
    return edges, truncated, off


def coarsest_partition(edges: list, truncated: set[int]) -> tuple[list[int], int]:
    """Block index per state.

    Truncated states form their own class, since nothing is known about their
    behaviour.  Two states stay together while, for every label, they reach the
    same sets of block-level distributions.
    """
    n = len(edges)
    block = [1 if s in truncated else 0 for s in range(n)]
    count = len(set(block))
    rounds = 0
    while True:
        rounds += 1
        sigs: dict = {}
        new = [0] * n
        for s in range(n):
            if s in truncated:
                sig = ("truncated",)
            else:
                moves = set()
                for label, dist in edges[s]:
                    agg: dict[int, Fraction] = {}
                    for t, w in dist:
                        agg[block[t]] = agg.get(block[t], Fraction(0)) + w
                    moves.add((label, frozenset(agg.items())))
                sig = (block[s], frozenset(moves))
            new[s] = sigs.setdefault(sig, len(sigs))
        if len(sigs) == count:
            return new, rounds
        block, count = new, len(sigs)


def strong_bisim(p1: Plts, p2: Plts, *, want_relation: bool = False) -> BisimResult:
    """Are the initial states of ``p1`` and ``p2`` strongly probabilistically bisimilar?"""
    edges, truncated, off = _union(p1, p2)
    block, rounds = coarsest_partition(edges, truncated)
    ok = block[p1.initial] == block[p2.initial + off]
    nblocks = len(set(block))
    if ok:
        relation = None
        if want_relation:
            by_block: dict[int, list[int]] = {}
            for s in range(off, len(block)):
                by_block.setdefault(block[s], []).append(s - off)
            relation = [(s, t) for s in range(off) for t in by_block.get(block[s], ())]
        return BisimResult(True, nblocks, rounds, relation=relation)
    witness, side = trace_witness(p1, p2)
    return BisimResult(False, nblocks, rounds, witness, side)


def trace_witness(p1: Plts, p2: Plts, max_len: int = 200) -> tuple[list[Action] | None, int | None]:
    """Shortest label sequence enabled from one initial state but not the other.

    Works on the determinised systems (sets of states reachable by the same
    labels).  Returns ``(None, None)`` when the two are trace equivalent up to
    ``max_len`` steps; the difference then lies in the probabilities only.
    """
    def step(p: Plts, states: frozenset, label: Action) -> frozenset:
        return frozenset(t for s in states for e in p.edges[s] if e.label == label for t, _w in e.dist)

    def labels(p: Plts, states: frozenset) -> set:
        return {e.label for s in states for e in p.edges[s]}

    start = (frozenset([p1.initial]), frozenset([p2.initial]))
    seen = {start}
    queue = deque([(start, [])])
    while queue:
        (a, b), trace = queue.popleft()
        if len(trace) >= max_len:
            continue
        la, lb = labels(p1, a), labels(p2, b)
        # a truncated state may still do anything, so it cannot witness absence
        a_open = any(s in p1.truncated for s in a)
        b_open = any(s in p2.truncated for s in b)
        for lab in sorted(la | lb, key=str):
            if lab in la and lab not in lb and not b_open:
                return trace + [lab], 0
            if lab in lb and lab not in la and not a_open:
                return trace + [lab], 1
            nxt = (step(p1, a, lab), step(p2, b, lab))
            if nxt not in seen:
                seen.add(nxt)
                queue.append((nxt, trace + [lab]))
    return None, None
