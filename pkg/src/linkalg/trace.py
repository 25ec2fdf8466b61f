"""Line-oriented JSON traces: one record per transition, replayable through the engine.

A trace starts with a header carrying the scenario configuration, then one
``step`` record per transition, then an ``end`` record.  Every step stores the
index of the chosen transition in ``Model.transitions`` order and the index of
the sampled outcome, which is all that replay needs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Iterator

from .config import ScenarioConfig, build
from .data import CONFLICT, IDLE, Ack, Cts, DataFrame, Frag, Notice, Rts, User
from .network import Model, NetTransition, Network

TRACE_VERSION = 1


def fmt(v: Any) -> Any:
    """JSON-friendly rendering of values found in valuations and chunks."""
    if v is IDLE:
        return "idle"
    if v is CONFLICT:
        return "conflict"
    if isinstance(v, Frag):
        return f"{fmt(v.m)}#{v.c}"
    if isinstance(v, DataFrame):
        return f"data({v.data},{v.src}->{v.dest})"
    if isinstance(v, Ack):
        return f"ack({v.src}->{v.dest})"
    if isinstance(v, Rts):
        return f"rts({v.src}->{v.dest},{v.d})"
    if isinstance(v, Cts):
        return f"cts({v.src}->{v.dest},{v.d})"
    if isinstance(v, Notice):
        return f"{v.kind}:{v.data}"
    if isinstance(v, User):
        return f"{v.tag}{tuple(v.fields)}"
    if isinstance(v, (bool, int, str)) or v is None:
        return v
    return str(v)


def node_view(net: Network) -> dict:
    out = {}
    for n in net.nodes:
        xi = n.state.xi
        out[str(n.id)] = {
            "now": xi["now"],
            "rfr": fmt(xi["rfr"]),
            "head": getattr(n.state.p, "owner", None),
            "vars": {k: fmt(v) for k, v in sorted(xi.items()) if k not in ("now", "rfr", "myip")},
        }
    return out


def step_record(step: int, slot: int, tr: NetTransition, choice: tuple[int, int],
                after: Network) -> dict:
    rec = {
        "type": "step",
        "step": step,
        "slot": slot,
        "label": str(tr.label),
        "choice": list(choice),
        "nodes": node_view(after),
    }
    if tr.is_tick:
        rec["traffic"] = {str(k): fmt(v) for k, v in tr.traffic or ()}
    return rec


def dumps(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, separators=(",", ":"))


def header(cfg: ScenarioConfig, *, seed: int | None, source: str) -> dict:
    return {"type": "header", "version": TRACE_VERSION, "source": source, "seed": seed,
            "config": cfg.model_dump(mode="json")}


@dataclass
class Replay:
    ok: bool
    steps: int
    mismatch_at: int | None = None
    detail: str = ""


def follow(model: Model, root: Network, choices: Iterable[tuple[int, int]]) -> Iterator[dict]:
    """Records produced by taking the given choices from ``root``."""
    net, slot = root, 0
    for i, (k, j) in enumerate(choices):
        trs = model.transitions(net)
        if not 0 <= k < len(trs) or not 0 <= j < len(trs[k].dist):
            raise IndexError(f"step {i}: choice ({k}, {j}) is not available")
        tr = trs[k]
        net = tr.dist[j][0]
        if tr.is_tick:
            slot += 1
        yield step_record(i, slot, tr, (k, j), net)


def read(path: str | Path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def replay(path: str | Path) -> Replay:
    """Re-run a trace file through the engine and compare every record."""
    return replay_records(read(path))


def replay_records(recs: list[dict]) -> Replay:
    if not recs or recs[0].get("type") != "header":
        return Replay(False, 0, 0, "missing header")
    cfg = ScenarioConfig.model_validate(recs[0]["config"])
    built = build(cfg)
    steps = [r for r in recs if r.get("type") == "step"]
    try:
        for want, got in zip(steps, follow(built.model, built.root, (tuple(r["choice"]) for r in steps))):
            if dumps(want) != dumps(got):
                return Replay(False, len(steps), want["step"], "state differs")
    except IndexError as exc:
        return Replay(False, len(steps), None, str(exc))
    return Replay(True, len(steps))


def write(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(dumps(rec) + "\n")


def path_records(cfg: ScenarioConfig, plts, path) -> list[dict]:
    """Trace records for a counterexample path of an explored pLTS."""
    choices = []
    for s, k, t in path.steps:
        j = next(i for i, (u, _w) in enumerate(plts.edges[s][k].dist) if u == t)
        choices.append((k, j))
    recs = [header(cfg, seed=None, source="counterexample")]
    recs += list(follow(plts.model, plts.states[plts.initial], choices))
    end = {"type": "end", "reason": "lasso" if path.loop_from is not None else "deadlock",
           "loop_from": path.loop_from, "pre_step": path.pre_step}
    return recs + [end]


__all__ = ["fmt", "node_view", "step_record", "dumps", "header", "follow", "read", "replay", "replay_records",
           "write", "path_records", "Replay"]
