"""Data carriers: node ids, messages, chunks, durations and the chunk-merge operator."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Mapping, Union

NodeId = str
Payload = str
TimeValue = int


@dataclass(frozen=True, slots=True)
class DataFrame:
    data: Payload
    src: NodeId
    dest: NodeId

    def __str__(self) -> str:
        return f"data({self.data},{self.src}->{self.dest})"


@dataclass(frozen=True, slots=True)
class Ack:
    src: NodeId
    dest: NodeId

    def __str__(self) -> str:
        return f"ack({self.src}->{self.dest})"


@dataclass(frozen=True, slots=True)
class Rts:
    src: NodeId
    dest: NodeId
    d: TimeValue

    def __str__(self) -> str:
        return f"rts({self.src}->{self.dest},{self.d})"


@dataclass(frozen=True, slots=True)
class Cts:
    src: NodeId
    dest: NodeId
    d: TimeValue

    def __str__(self) -> str:
        return f"cts({self.src}->{self.dest},{self.d})"


@dataclass(frozen=True, slots=True)
class User:
    """Ad-hoc message for tests and toy models."""

    tag: str
    fields: tuple = ()

    def __str__(self) -> str:
        inner = ",".join(map(str, self.fields))
        return f"{self.tag}({inner})"


Message = Union[DataFrame, Ack, Rts, Cts, User]
MESSAGE_TYPES = (DataFrame, Ack, Rts, Cts, User)


@dataclass(frozen=True, slots=True)
class Notice:
    """Status report handed to the network layer (send succeeded / gave up)."""

    kind: str
    data: Payload

    def __str__(self) -> str:
        return f"{self.kind}:{self.data}"


class Signal(enum.Enum):
    CONFLICT = "conflict"
    IDLE = "idle"

    def __str__(self) -> str:
        return self.value

    def __repr__(self) -> str:
        return self.value


CONFLICT = Signal.CONFLICT
IDLE = Signal.IDLE


@dataclass(frozen=True, slots=True)
class Frag:
    """The c-th one-slot fragment of message m."""

    m: Message
    c: int

    def __str__(self) -> str:
        return f"({self.m}:{self.c})"


Chunk = Union[Frag, Signal]


def _const(n: int) -> Callable[[Payload], int]:
    return lambda _payload: n


@dataclass(frozen=True)
class DurationConfig:
    dur_ack: TimeValue = 1
    dur_cts: TimeValue = 1
    dur_rts: TimeValue = 1
    data_frame: TimeValue = 3
    # per-payload overrides of the data frame length
    payload_dur: Mapping[Payload, TimeValue] = field(default_factory=dict)
    user_dur: Mapping[str, TimeValue] = field(default_factory=dict)

    def __post_init__(self) -> None:
        values = [self.dur_ack, self.dur_cts, self.dur_rts, self.data_frame]
        values += list(self.payload_dur.values()) + list(self.user_dur.values())
        if any(not isinstance(v, int) or v < 1 for v in values):
            raise ValueError("all durations must be integers >= 1")

    def data_frame_dur(self, payload: Payload) -> TimeValue:
        return self.payload_dur.get(payload, self.data_frame)

    def __hash__(self) -> int:
        return hash((self.dur_ack, self.dur_cts, self.dur_rts, self.data_frame,
                     tuple(sorted(self.payload_dur.items())),
                     tuple(sorted(self.user_dur.items()))))


DEFAULT_DURATIONS = DurationConfig()


def dur(m: Message, cfg: DurationConfig = DEFAULT_DURATIONS) -> TimeValue:
    """Number of one-slot chunks needed to transmit ``m``."""
    if isinstance(m, DataFrame):
        return cfg.data_frame_dur(m.data)
    if isinstance(m, Ack):
        return cfg.dur_ack
    if isinstance(m, Rts):
        return cfg.dur_rts
    if isinstance(m, Cts):
        return cfg.dur_cts
    if isinstance(m, User):
        return cfg.user_dur.get(m.tag, 1)
    raise TypeError(f"not a message: {m!r}")


def fragments(m: Message, cfg: DurationConfig = DEFAULT_DURATIONS) -> list[Frag]:
    return [Frag(m, c) for c in range(1, dur(m, cfg) + 1)]


def chunk_merge(rfr: Chunk, ch: Chunk) -> Chunk:
    """New value of ``rfr`` after receiving chunk ``ch`` (the merge table, top row first)."""
    if ch is CONFLICT:
        return CONFLICT
    if ch is IDLE:
        return IDLE
    if ch.c == 1:
        return ch
    if isinstance(rfr, Frag) and rfr.m == ch.m and rfr.c + 1 == ch.c:
        return ch
    return CONFLICT


def is_new(rfr: Chunk, m: Message, cfg: DurationConfig = DEFAULT_DURATIONS) -> bool:
    return isinstance(rfr, Frag) and rfr.m == m and rfr.c == dur(m, cfg)


def is_idle(rfr: Chunk) -> bool:
    return rfr is IDLE


def complete_message(rfr: Chunk, cfg: DurationConfig = DEFAULT_DURATIONS) -> Message | None:
    """The message just received in full, if any."""
    if isinstance(rfr, Frag) and rfr.c == dur(rfr.m, cfg):
        return rfr.m
    return None
