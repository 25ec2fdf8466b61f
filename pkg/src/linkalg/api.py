"""Request/response models and the handlers behind the HTTP service."""

from __future__ import annotations

import ast
from fractions import Fraction
from typing import Any, Literal, Optional

from pydantic import BaseModel, Field

from . import analysis, bisim as bisim_mod, simulate, trace
from .config import ScenarioConfig, build
from .expr import ModelError
from .network import left_assoc, right_assoc
from .node import Action
from .plts import ResourceError, explore
from .scenarios import SCENARIOS, by_name

REPORT_SCHEMA = "linkalg.report/1"


class ConfigError(ValueError):
    """Bad scenario reference or request parameters (exit code 3)."""


# ------------------------------------------------------------------ requests

class ScenarioRef(BaseModel):
    """A built-in scenario by name or an inline configuration, plus overrides."""

    scenario: Optional[str] = "hidden"
    config: Optional[ScenarioConfig] = None
    protocol: Optional[Literal["csma", "csma-rts"]] = None
    horizon: Optional[int] = Field(None, ge=0)
    budget: Optional[int] = Field(None, ge=1)
    seed: Optional[int] = None
    max_retransmit: Optional[int] = Field(None, ge=1)

    def resolve(self) -> ScenarioConfig:
        if self.config is not None:
            cfg = self.config
        elif self.scenario in SCENARIOS:
            # built-in scenarios pick protocol-appropriate defaults
            kw = {} if self.protocol is None else {"protocol": self.protocol}
            cfg = by_name(self.scenario, **kw)
        else:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {sorted(SCENARIOS)} "
                              "or pass a configuration")
        changes: dict[str, Any] = {}
        if self.protocol is not None:
            changes["protocol"] = self.protocol
        if self.horizon is not None:
            changes["horizon"] = self.horizon
        if self.budget is not None:
            changes["budget"] = self.budget
        if self.seed is not None:
            changes["seed"] = self.seed
        if self.max_retransmit is not None:
            changes["params"] = {**cfg.params.model_dump(), "maxRetransmit": self.max_retransmit}
        return cfg.with_updates(**changes) if changes else cfg


class ExploreRequest(ScenarioRef):
    pass


class CheckRequest(ScenarioRef):
    mode: Literal["outright", "min-prob"] = "outright"
    query: Literal["delivery", "weak-delivery", "after-cts"] = "delivery"
    src: Optional[str] = None
    data: Optional[str] = None
    dest: Optional[str] = None
    threshold: str = "1"
    deadlock: bool = True


class SimulateRequest(ScenarioRef):
    trials: int = Field(1000, ge=1)
    workers: int = Field(1, ge=1)
    target: bool = False      # also report the rate of the queried packet's delivery


class BisimRequest(ScenarioRef):
    left_shape: Optional[str] = None     # e.g. "((0,1),2)"; default left-nested
    right_shape: Optional[str] = None    # default right-nested
    right_order: Optional[list[str]] = None


class TraceRequest(ScenarioRef):
    pass


class ReplayRequest(BaseModel):
    records: list[dict]


# ----------------------------------------------------------------- responses

class Report(BaseModel):
    report: str = REPORT_SCHEMA
    scenario: str
    protocol: str
    exit_code: int = 0


class ExploreResponse(Report):
    states: int
    transitions: int
    truncated: int
    max_depth: int
    horizon: int
    normalized: bool
    por: bool


class CheckResponse(Report):
    query: str
    mode: str
    deadlock_free: Optional[bool] = None
    deadlock_offending: int = 0
    verdict: Literal["holds", "fails", "unknown"]
    pre_transitions: int
    value: Optional[str] = None          # exact lower bound on the minimal probability
    value_float: Optional[float] = None
    upper: Optional[str] = None          # the same with the frontier counted as success
    exact: Optional[bool] = None
    threshold: Optional[str] = None
    states: int
    truncated: int
    counterexample: Optional[list[dict]] = None


class PacketReport(BaseModel):
    node: str
    data: str
    dest: str
    delivered: int
    failed: int
    unresolved: int
    rate: float
    mean_latency: Optional[float]
    attempts: dict[int, int]


class SimulateResponse(Report):
    trials: int
    seed: int
    horizon: int
    delivery_rate: float
    packets: list[PacketReport]
    exhausted: int
    deadlocked: int
    mean_collisions: float
    target: Optional[str] = None
    target_rate: Optional[float] = None


class BisimResponse(Report):
    bisimilar: bool
    left_states: int
    right_states: int
    blocks: int
    rounds: int
    witness: Optional[list[str]] = None
    witness_side: Optional[Literal["left", "right"]] = None


class TraceResponse(Report):
    records: list[dict]


class ReplayResponse(BaseModel):
    report: str = REPORT_SCHEMA
    ok: bool
    steps: int
    mismatch_at: Optional[int] = None
    detail: str = ""
    exit_code: int = 0


# ------------------------------------------------------------------ handlers

def _explore(cfg: ScenarioConfig, **kw):
    built = build(cfg)
    return built, explore(built.model, built.root, cfg.horizon, budget=cfg.budget, **kw)


def _target(cfg: ScenarioConfig, req: CheckRequest | SimulateRequest) -> tuple[str, str, str]:
    one_shot = [i for i in cfg.injections if not i.repeat] or cfg.injections
    src = getattr(req, "src", None) or (one_shot[0].node if one_shot else None)
    data = getattr(req, "data", None) or (one_shot[0].data if one_shot else None)
    dest = getattr(req, "dest", None) or (one_shot[0].dest if one_shot else None)
    if None in (src, data, dest):
        raise ConfigError("the scenario has no injection; give src, data and dest explicitly")
    unknown = [n for n in (src, dest) if n not in cfg.nodes]
    if unknown:
        raise ConfigError(f"undeclared node ids in the query: {unknown}")
    if data not in cfg.payloads:
        raise ConfigError(f"payload {data!r} is not in the scenario's payload alphabet")
    return src, data, dest


def _query(cfg: ScenarioConfig, req: CheckRequest, durations) -> analysis.EventualityQuery:
    src, data, dest = _target(cfg, req)
    if req.query == "after-cts":
        return analysis.after_cts(dest, src, data, durations=durations)
    return analysis.packet_delivery(src, data, dest, weak=req.query == "weak-delivery")


def handle_explore(req: ExploreRequest) -> ExploreResponse:
    cfg = req.resolve()
    _built, p = _explore(cfg)
    return ExploreResponse(scenario=cfg.name, protocol=cfg.protocol, **p.stats())


VERDICT_EXIT = {"holds": 0, "fails": 1, "unknown": 2}


def handle_check(req: CheckRequest) -> CheckResponse:
    cfg = req.resolve()
    try:
        threshold = Fraction(req.threshold)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad threshold {req.threshold!r}") from exc
    if not 0 <= threshold <= 1:
        raise ConfigError("threshold must lie in [0, 1]")
    built, p = _explore(cfg)
    q = _query(cfg, req, built.params.durations)
    dl = analysis.check_deadlock_freedom(p) if req.deadlock else None
    outright = analysis.holds_outright(p, q)
    fields: dict[str, Any] = {}
    if req.mode == "outright":
        verdict = outright.verdict
    else:
        pv = analysis.prob_at_least(p, q, threshold)
        verdict = pv.verdict
        r = pv.result
        fields = dict(value=str(r.value), value_float=float(r.value), upper=str(r.upper),
                      exact=r.exact, threshold=str(threshold))
    counterexample = None
    if outright.counterexample is not None and verdict != "holds":
        counterexample = trace.path_records(cfg, p, outright.counterexample)
    if dl is not None and not dl.ok:
        verdict = "fails"
    return CheckResponse(
        scenario=cfg.name, protocol=cfg.protocol, query=q.name, mode=req.mode,
        deadlock_free=None if dl is None else dl.ok,
        deadlock_offending=0 if dl is None else len(dl.offending),
        verdict=verdict, pre_transitions=outright.pre_transitions,
        states=len(p.states), truncated=len(p.truncated),
        counterexample=counterexample, exit_code=VERDICT_EXIT[verdict], **fields,
    )


def handle_simulate(req: SimulateRequest) -> SimulateResponse:
    cfg = req.resolve()
    target, target_name = (), None
    if req.target:
        src, data, dest = _target(cfg, req)
        target = (Action("deliver", (dest, data)),)
        target_name = str(target[0])
    st = simulate.monte_carlo(cfg, req.trials, cfg.seed, target=target, workers=req.workers)
    packets = [PacketReport(node=p.node, data=p.data, dest=p.dest, delivered=p.delivered,
                            failed=p.failed, unresolved=p.unresolved, rate=p.rate(st.trials),
                            mean_latency=p.mean_latency, attempts=p.attempts) for p in st.packets]
    return SimulateResponse(
        scenario=cfg.name, protocol=cfg.protocol, trials=st.trials, seed=st.seed,
        horizon=st.horizon, delivery_rate=st.delivery_rate, packets=packets,
        exhausted=st.exhausted, deadlocked=st.deadlocked, mean_collisions=st.mean_collisions,
        target=target_name, target_rate=st.target_rate,
    )


def parse_shape(text: str | None, n: int):
    if text is None:
        return None
    try:
        shape = ast.literal_eval(text)
    except (ValueError, SyntaxError) as exc:
        raise ConfigError(f"bad shape {text!r}") from exc

    def norm(s):
        if isinstance(s, int):
            return s
        if isinstance(s, (tuple, list)) and len(s) == 2:
            return (norm(s[0]), norm(s[1]))
        raise ConfigError(f"bad shape {text!r}: use nested pairs of node positions")
    return norm(shape)


def handle_bisim(req: BisimRequest) -> BisimResponse:
    # partial-order reduction depends on the node order, so compare the full systems
    cfg = req.resolve().with_updates(por=False)
    built = build(cfg)
    n = len(cfg.nodes)
    left = parse_shape(req.left_shape, n) or left_assoc(n)
    right = parse_shape(req.right_shape, n) or right_assoc(n)
    order = req.right_order or cfg.nodes
    if sorted(order) != sorted(cfg.nodes):
        raise ConfigError("right_order must be a permutation of the scenario's nodes")
    try:
        m1 = built.model.reshaped(left)
        m2 = built.model.reshaped(right, order)
    except ModelError as exc:
        raise ConfigError(str(exc)) from exc
    p1 = explore(m1, m1.canonical(built.root), cfg.horizon, budget=cfg.budget)
    p2 = explore(m2, m2.canonical(built.model.reorder(built.root, order)), cfg.horizon, budget=cfg.budget)
    res = bisim_mod.strong_bisim(p1, p2)
    return BisimResponse(
        scenario=cfg.name, protocol=cfg.protocol, bisimilar=res.bisimilar,
        left_states=len(p1.states), right_states=len(p2.states), blocks=res.blocks,
        rounds=res.rounds, witness=None if res.witness is None else [str(a) for a in res.witness],
        witness_side=None if res.witness_side is None else ("left", "right")[res.witness_side],
        exit_code=0 if res.bisimilar else 1,
    )


def handle_trace(req: TraceRequest) -> TraceResponse:
    cfg = req.resolve()
    recs = simulate.simulate_trace(cfg, cfg.seed)
    return TraceResponse(scenario=cfg.name, protocol=cfg.protocol, records=recs)


def handle_replay(req: ReplayRequest) -> ReplayResponse:
    res = trace.replay_records(req.records)
    return ReplayResponse(ok=res.ok, steps=res.steps, mismatch_at=res.mismatch_at,
                          detail=res.detail, exit_code=0 if res.ok else 1)


__all__ = [
    "ConfigError", "ScenarioRef", "ExploreRequest", "CheckRequest", "SimulateRequest",
    "BisimRequest", "TraceRequest", "ReplayRequest", "ExploreResponse", "CheckResponse",
    "SimulateResponse", "BisimResponse", "TraceResponse", "ReplayResponse", "handle_explore",
    "handle_check", "handle_simulate", "handle_bisim", "handle_trace", "handle_replay",
    "ResourceError", "ModelError",
]
