"""Scenario configuration files (versioned JSON) and their translation into models."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .csma import CsmaParams, build_defs, initial_state
from .data import DurationConfig
from .network import InjectionSpec, MobilityEvent, MobilityPolicy, Model, Network

SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class ParamsConfig(_Strict):
    """Protocol constants under their customary names."""

    cwmin: int = Field(2, ge=1)
    maxRetransmit: Optional[int] = Field(2, ge=1)
    sifs: int = Field(1, ge=1)
    difs: int = Field(2, ge=1)
    maxCtsWait: Optional[int] = Field(None, ge=1)
    maxAckWait: Optional[int] = Field(None, ge=1)
    durAck: int = Field(1, ge=1)
    durCTS: int = Field(1, ge=1)
    durRTS: int = Field(1, ge=1)
    dataFrame: int = Field(3, ge=1)
    payloadDur: dict[str, int] = Field(default_factory=dict)
    cwmax: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _spaces(self):
        if self.difs <= self.sifs:
            raise ValueError("difs must be larger than sifs")
        return self

    def to_params(self) -> CsmaParams:
        durations = DurationConfig(dur_ack=self.durAck, dur_cts=self.durCTS, dur_rts=self.durRTS,
                                   data_frame=self.dataFrame, payload_dur=dict(self.payloadDur))
        return CsmaParams(cwmin=self.cwmin, max_retransmit=self.maxRetransmit, sifs=self.sifs,
                          difs=self.difs, max_cts_wait=self.maxCtsWait,
                          max_ack_wait=self.maxAckWait, durations=durations, cwmax=self.cwmax)


class InjectionConfig(_Strict):
    node: str
    data: str
    dest: str
    at: int = Field(0, ge=0)
    repeat: bool = False
    lazy: bool = False


class MobilityEventConfig(_Strict):
    at: int = Field(..., ge=0)
    kind: Literal["connect", "disconnect"]
    a: str
    b: str


class MobilityConfig(_Strict):
    mode: Literal["off", "scripted", "arbitrary"] = "off"
    events: list[MobilityEventConfig] = Field(default_factory=list)
    pairs: list[tuple[str, str]] = Field(default_factory=list)
    symmetric: bool = True


class ScenarioConfig(_Strict):
    version: Literal[1] = SCHEMA_VERSION
    name: str = "custom"
    nodes: list[str]
    edges: list[tuple[str, str]] = Field(default_factory=list)
    own_range: list[str] = Field(default_factory=list)
    protocol: Literal["csma", "csma-rts"] = "csma"
    params: ParamsConfig = Field(default_factory=ParamsConfig)
    payloads: list[str]
    injections: list[InjectionConfig] = Field(default_factory=list)
    mobility: MobilityConfig = Field(default_factory=MobilityConfig)
    horizon: int = Field(30, ge=0)
    budget: int = Field(1_000_000, ge=1)
    seed: int = 0
    por: bool = True
    normalize: bool = True
    shape: Optional[Union[int, list[Any]]] = None   # nested lists of node positions

    @model_validator(mode="after")
    def _references(self):
        ids = set(self.nodes)
        if len(ids) != len(self.nodes):
            raise ValueError("node ids must be unique")

        def known(*xs):
            bad = [x for x in xs if x not in ids]
            if bad:
                raise ValueError(f"undeclared node ids: {bad}")

        for a, b in self.edges:
            known(a, b)
            if a == b:
                raise ValueError("self-loops belong in own_range")
        known(*self.own_range)
        for inj in self.injections:
            known(inj.node, inj.dest)
            if inj.data not in self.payloads:
                raise ValueError(f"payload {inj.data!r} is not in the payload alphabet")
        for ev in self.mobility.events:
            known(ev.a, ev.b)
        for a, b in self.mobility.pairs:
            known(a, b)
        for p in self.params.payloadDur:
            if p not in self.payloads:
                raise ValueError(f"payload {p!r} is not in the payload alphabet")
        return self

    # ------------------------------------------------------------ conversion

    def ranges(self) -> dict[str, set[str]]:
        out = {n: set() for n in self.nodes}
        for a, b in self.edges:
            out[a].add(b)
            out[b].add(a)
        for n in self.own_range:
            out[n].add(n)
        return out

    def with_updates(self, **changes) -> "ScenarioConfig":
        return self.model_validate({**self.model_dump(), **changes})


def _shape(spec):
    if spec is None or isinstance(spec, int):
        return spec
    return tuple(_shape(s) for s in spec)


@dataclass
class Built:
    cfg: ScenarioConfig
    model: Model
    root: Network
    params: CsmaParams


def build(cfg: ScenarioConfig) -> Built:
    params = cfg.params.to_params()
    defs = build_defs(cfg.protocol, params, cfg.payloads, cfg.nodes)
    schedule = [InjectionSpec(i.node, i.data, i.dest, i.at, i.repeat, i.lazy) for i in cfg.injections]
    mobility = MobilityPolicy(
        cfg.mobility.mode,
        tuple(MobilityEvent(e.at, e.kind, e.a, e.b) for e in cfg.mobility.events),
        tuple(tuple(p) for p in cfg.mobility.pairs),
        cfg.mobility.symmetric,
    )
    model = Model(defs, cfg.nodes, schedule=schedule, mobility=mobility, shape=_shape(cfg.shape),
                  por=cfg.por, normalize=cfg.normalize)
    root = model.network({n: initial_state(defs, n) for n in cfg.nodes}, cfg.ranges())
    return Built(cfg, model, root, params)


def load(path: str | Path) -> ScenarioConfig:
    return ScenarioConfig.model_validate(json.loads(Path(path).read_text()))


def dump(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(cfg.model_dump_json(indent=2) + "\n")
