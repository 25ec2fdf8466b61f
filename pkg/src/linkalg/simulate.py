"""Seeded Monte-Carlo runs: every choice between transitions is resolved uniformly,
probabilistic outcomes by their weights.

Per-trial generators come from ``numpy.random.SeedSequence(seed).spawn(trials)``,
so trial ``i`` sees the same random stream however the trials are distributed
over worker processes.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import ScenarioConfig, build
from .data import CONFLICT, DataFrame, Notice, Rts
from .network import Model, NetTransition, Network
from .node import Action, label_matches
from .trace import header, step_record

CACHE_LIMIT = 200_000


class TransitionCache:
    """Memoised ``Model.transitions``; cleared wholesale when it grows too big."""

    def __init__(self, model: Model, limit: int = CACHE_LIMIT):
        self.model = model
        self.limit = limit
        self._memo: dict[Network, list[NetTransition]] = {}

    def __call__(self, net: Network) -> list[NetTransition]:
        hit = self._memo.get(net)
        if hit is None:
            if len(self._memo) >= self.limit:
                self._memo.clear()
            hit = self._memo[net] = self.model.transitions(net)
        return hit


@dataclass
class Packet:
    node: str
    data: str
    dest: str
    accepted: int | None = None       # slot of the newpkt
    delivered: int | None = None      # slot of the first delivery at dest
    failed: bool = False              # sender gave up
    attempts: int = 0                 # transmissions started (RTS, or data frame without RTS)

    @property
    def resolved(self) -> bool:
        return self.delivered is not None or self.failed


@dataclass
class TrialResult:
    packets: list[Packet]
    slots: int
    collisions: int
    target_hit: bool
    exhausted: bool
    deadlocked: bool
    choices: list[tuple[int, int]] = field(default_factory=list)


def _pick(rng: np.random.Generator, dist) -> int:
    if len(dist) == 1:
        return 0
    u = rng.random()
    acc = 0.0
    for j, (_s, w) in enumerate(dist):
        acc += float(w)
        if u < acc:
            return j
    return len(dist) - 1


def run_trial(model: Model, root: Network, horizon: int, rng: np.random.Generator, *,
              target: Sequence[Action] = (), step=None, record: list | None = None) -> TrialResult:
    """One run of at most ``horizon`` ticks.

    The run stops early once every one-shot packet is resolved and, when
    ``target`` labels are given, once one of them occurs.
    """
    step = step or model.transitions
    packets = [Packet(i.node, i.data, i.dest) for i in model.schedule if not i.repeat]
    net, slot, collisions = root, 0, 0
    model_has_rts = "CSMA'" in model.defs.equations
    hit = exhausted = deadlocked = False
    choices: list[tuple[int, int]] = []
    while True:
        if hit or (packets and all(p.resolved for p in packets)):
            break
        trs = step(net)
        if not trs:
            deadlocked = True
            break
        k = int(rng.integers(len(trs))) if len(trs) > 1 else 0
        tr = trs[k]
        if tr.is_tick and slot >= horizon:
            exhausted = True
            break
        j = _pick(rng, tr.dist)
        choices.append((k, j))
        net = tr.dist[j][0]
        label = tr.label
        if tr.is_tick:
            slot += 1
            if any(ch is CONFLICT for _id, ch in tr.traffic or ()):
                collisions += 1
            for sender, frag in tr.sent:
                m = frag.m
                if frag.c != 1 or not isinstance(m, (DataFrame, Rts)):
                    continue
                for p in packets:
                    if p.accepted is None or p.resolved or p.node != sender or p.dest != m.dest:
                        continue
                    # an RTS opens an attempt, the data frame that follows belongs to it
                    if isinstance(m, Rts) or (not model_has_rts and m.data == p.data):
                        p.attempts += 1
        elif label.kind == "newpkt":
            for p in packets:
                if p.accepted is None and (p.node, p.data, p.dest) == label.args:
                    p.accepted = slot
                    break
        elif label.kind == "deliver":
            who, d = label.args
            for p in packets:
                if isinstance(d, Notice):
                    if d.kind == "fail" and p.node == who and p.data == d.data and p.accepted is not None:
                        p.failed = p.delivered is None
                elif p.dest == who and p.data == d and p.delivered is None and p.accepted is not None:
                    p.delivered = slot
        if target and any(label_matches(t, label) for t in target):
            hit = True
        if record is not None:
            record.append(step_record(len(choices) - 1, slot, tr, (k, j), net))
    return TrialResult(packets, slot, collisions, hit, exhausted, deadlocked, choices)


@dataclass
class PacketStats:
    node: str
    data: str
    dest: str
    delivered: int
    failed: int
    unresolved: int                  # horizon ran out first
    mean_latency: float | None       # slots from acceptance to delivery
    attempts: dict[int, int]         # histogram: attempts -> trials

    def rate(self, trials: int) -> float:
        return self.delivered / trials


@dataclass
class DeliveryStats:
    trials: int
    seed: int
    horizon: int
    packets: list[PacketStats]
    delivery_rate: float             # all one-shot packets delivered
    exhausted: int
    deadlocked: int
    mean_collisions: float
    target_hits: int | None = None

    @property
    def target_rate(self) -> float | None:
        return None if self.target_hits is None else self.target_hits / self.trials

    def stderr(self, p: float) -> float:
        return math.sqrt(p * (1 - p) / self.trials)


def trial_seeds(seed: int, trials: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(trials)


def _run_chunk(cfg_json: str, seeds, horizon: int, target: tuple) -> list[TrialResult]:
    cfg = ScenarioConfig.model_validate_json(cfg_json)
    built = build(cfg)
    step = TransitionCache(built.model)
    return [run_trial(built.model, built.root, horizon, np.random.default_rng(s), target=target, step=step)
            for s in seeds]


def monte_carlo(cfg: ScenarioConfig, trials: int, seed: int | None = None, *,
                horizon: int | None = None, target: Sequence[Action] = (),
                workers: int = 1) -> DeliveryStats:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    seed = cfg.seed if seed is None else seed
    horizon = cfg.horizon if horizon is None else horizon
    seeds = trial_seeds(seed, trials)
    target = tuple(target)
    if workers > 1:
        size = math.ceil(trials / workers)
        chunks = [seeds[i:i + size] for i in range(0, trials, size)]
        with ProcessPoolExecutor(workers) as pool:
            parts = pool.map(_run_chunk, [cfg.model_dump_json()] * len(chunks), chunks,
                             [horizon] * len(chunks), [target] * len(chunks))
            results = [r for part in parts for r in part]
    else:
        results = _run_chunk(cfg.model_dump_json(), seeds, horizon, target)
    return summarize(results, seed, horizon, bool(target))


def summarize(results: list[TrialResult], seed: int, horizon: int, targeted: bool) -> DeliveryStats:
    n = len(results)
    per: list[PacketStats] = []
    if results:
        for i, p0 in enumerate(results[0].packets):
            ps = [r.packets[i] for r in results]
            lat = [p.delivered - p.accepted for p in ps if p.delivered is not None]
            per.append(PacketStats(
                p0.node, p0.data, p0.dest,
                delivered=sum(p.delivered is not None for p in ps),
                failed=sum(p.failed for p in ps),
                unresolved=sum(not p.resolved for p in ps),
                mean_latency=sum(lat) / len(lat) if lat else None,
                attempts=dict(sorted(Counter(p.attempts for p in ps).items())),
            ))
    all_ok = sum(all(p.delivered is not None for p in r.packets) for r in results)
    return DeliveryStats(
        trials=n, seed=seed, horizon=horizon, packets=per,
        delivery_rate=all_ok / n if n else 0.0,
        exhausted=sum(r.exhausted for r in results),
        deadlocked=sum(r.deadlocked for r in results),
        mean_collisions=sum(r.collisions for r in results) / n if n else 0.0,
        target_hits=sum(r.target_hit for r in results) if targeted else None,
    )


def simulate_trace(cfg: ScenarioConfig, seed: int | None = None, *, horizon: int | None = None,
                   target: Sequence[Action] = ()) -> list[dict]:
    """Trace records of a single seeded run (header, steps, end)."""
    seed = cfg.seed if seed is None else seed
    horizon = cfg.horizon if horizon is None else horizon
    built = build(cfg)
    rng = np.random.default_rng(trial_seeds(seed, 1)[0])
    recs: list[dict] = []
    res = run_trial(built.model, built.root, horizon, rng, target=tuple(target), record=recs)
    reason = ("deadlock" if res.deadlocked else "horizon" if res.exhausted
              else "target" if res.target_hit else "resolved")
    end = {"type": "end", "reason": reason, "slots": res.slots, "collisions": res.collisions,
           "packets": [{"node": p.node, "data": p.data, "dest": p.dest, "delivered": p.delivered,
                        "failed": p.failed, "attempts": p.attempts} for p in res.packets]}
    return [header(cfg, seed=seed, source="simulation")] + recs + [end]
