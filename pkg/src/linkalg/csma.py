"""CSMA/CA with physical carrier sense, and its RTS/CTS (virtual carrier sense) variant.

Both models are built from defining equations of the process calculus.  The
plain variant has four processes::

    CSMA(myip)                  wait for a packet to send or a data frame to receive
    INIT(myip, frm, be)         retry bookkeeping, contention window
    CCA(myip, frm, be, cw, bo)  listen, interframe space, backoff, transmit
    ACKRECV(myip, frm, be, to)  await the acknowledgement until ``to``

The RTS/CTS variant threads an extra ``nav`` (silence-until time) through
``CSMA'``, ``INIT'``, ``CCA'``, ``CTSRECV`` and ``ACKRECV'``.

Conventions shared by all processes:

* ``bo = -1`` means "no backoff drawn yet"; an interrupted backoff resumes
  with the number of slots still owed.
* Whenever a handler returns to the process it came from within the same
  instant while the received frame would still match, it first waits one slot
  (``[[t := now]] [now > t]``).  Without this the guard would fire again
  immediately and the process would loop on internal steps.
* Arguments of a call are re-evaluated for as long as the call waits, so
  anything derived from ``now`` (deadlines, remaining backoff) is assigned to
  a variable first and passed by name.
* Outcomes of a send attempt are reported to the network layer as deliveries
  of a :class:`~linkalg.data.Notice` (``success`` or ``fail``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .data import DEFAULT_DURATIONS, IDLE, DataFrame, DurationConfig, NodeId, Payload, dur
from .expr import (
    BUSY_F,
    IDLE_F,
    NOW,
    WILD,
    C,
    ModelError,
    V,
    ack,
    conj,
    cts,
    dataframe,
    dur_of,
    emax,
    emin,
    eq,
    field_of,
    ne,
    new,
    notice,
    pow2,
    rts,
)
from .process import (
    Assign,
    Call,
    Choice,
    Deliver,
    Guard,
    NewPkt,
    ProbChoice,
    ProcessDefs,
    ProcState,
    SeqExpr,
    Transmit,
    Valuation,
    choice,
)


@dataclass(frozen=True)
class CsmaParams:
    cwmin: int = 2
    max_retransmit: int | None = 2    # None: unbounded
    sifs: int = 1
    difs: int = 2
    max_cts_wait: int | None = None   # default sifs + durCTS
    max_ack_wait: int | None = None   # default sifs + durAck
    durations: DurationConfig = DEFAULT_DURATIONS
    cwmax: int | None = None          # optional cap on the contention window

    def __post_init__(self) -> None:
        if self.max_cts_wait is None:
            object.__setattr__(self, "max_cts_wait", self.sifs + self.durations.dur_cts)
        if self.max_ack_wait is None:
            object.__setattr__(self, "max_ack_wait", self.sifs + self.durations.dur_ack)
        self.validate()

    def validate(self) -> None:
        if self.cwmin < 1:
            raise ModelError("cwmin must be positive")
        if self.sifs < 1:
            raise ModelError("sifs must be at least one slot")
        if self.difs <= self.sifs:
            raise ModelError("difs must be larger than sifs")
        if self.max_retransmit is not None and self.max_retransmit < 1:
            raise ModelError("maxRetransmit must be at least 1 (or unbounded)")
        if self.max_cts_wait < 1 or self.max_ack_wait < 1:
            raise ModelError("maxCtsWait and maxAckWait must be positive")
        if self.cwmax is not None and self.cwmax < self.cwmin:
            raise ModelError("cwmax must be at least cwmin")


def cw_of(backoffexp: int, params: CsmaParams) -> int:
    """Contention window size for the given attempt number."""
    if backoffexp < 0:
        raise ValueError("backoffexp must be non-negative")
    cw = params.cwmin * 2 ** backoffexp
    return cw if params.cwmax is None else min(cw, params.cwmax)


def rts_duration(data: Payload, src: NodeId, dest: NodeId, params: CsmaParams) -> int:
    """Silence requested by an RTS: the whole CTS, data and ACK exchange."""
    cfg = params.durations
    frame = dur(DataFrame(data, src, dest), cfg)
    return params.sifs + cfg.dur_cts + params.sifs + frame + params.sifs + cfg.dur_ack


# ------------------------------------------------------------------ building

MYIP, FRM, BE, CW, BO, NAV, T, TO, RTO = (V(n) for n in
                                          ("myip", "frm", "be", "cw", "bo", "nav", "t", "to", "rto"))
DATA, SRC, DEST, DST, D = (V(n) for n in ("data", "src", "dest", "dst", "d"))

TIME_VARS = {"now": None, "nav": -1, "t": None, "to": None, "rto": None}


def _cw_expr(p: CsmaParams):
    e = C(p.cwmin) * pow2(BE)
    return e if p.cwmax is None else emin(e, p.cwmax)


def _wait_slot(then: SeqExpr) -> SeqExpr:
    """Let exactly one slot pass, then continue."""
    return Assign("t", NOW, Guard(NOW > T, then))


def _ack_back(p: CsmaParams, ret: SeqExpr) -> SeqExpr:
    """Deliver an incoming data frame and acknowledge it after sifs."""
    return Guard(new(dataframe(DATA, SRC, MYIP)),
                 Deliver(DATA,
                         Assign("t", NOW,
                                Guard(NOW >= T + p.sifs,
                                      Transmit(ack(MYIP, SRC), ret)))))


def _outcome(kind: str, then: SeqExpr) -> SeqExpr:
    return Deliver(notice(kind, field_of(FRM, "data")), then)


def _domains(payloads: Sequence[Payload], ids: Sequence[NodeId]) -> dict:
    ids = tuple(ids)
    return {"data": tuple(payloads), "src": ids, "dest": ids, "dst": ids}


def build_csma_defs(params: CsmaParams, payloads: Sequence[Payload],
                    ids: Sequence[NodeId]) -> ProcessDefs:
    """Defining equations of CSMA/CA with physical carrier sense."""
    p = params

    def csma() -> Call:
        return Call("CSMA", (MYIP,))

    def init(be) -> Call:
        return Call("INIT", (MYIP, FRM, be))

    def cca(bo) -> Call:
        return Call("CCA", (MYIP, FRM, BE, CW, bo))

    def ackrecv(to) -> Call:
        return Call("ACKRECV", (MYIP, FRM, BE, to))

    csma_body = choice(
        NewPkt("data", "dest", Call("INIT", (MYIP, dataframe(DATA, MYIP, DEST), 0))),
        _ack_back(p, csma()),
    )

    if p.max_retransmit is None:
        init_body = Assign("cw", _cw_expr(p), cca(-1))
    else:
        init_body = choice(
            Guard(BE < p.max_retransmit, Assign("cw", _cw_expr(p), cca(-1))),
            Guard(BE >= p.max_retransmit, _outcome("fail", csma())),
        )

    backoff = Assign("t", NOW, choice(
        Guard(conj(NOW >= T + BO, eq(NOW, T) | IDLE_F),
              Transmit(FRM, Assign("to", NOW + p.max_ack_wait, ackrecv(TO)))),
        Guard(conj(NOW > T, BUSY_F), Assign("bo", BO - (NOW - T - 1), cca(BO))),
    ))
    draw = choice(
        Guard(BO < 0, ProbChoice("bo", CW - 1, backoff)),
        Guard(BO >= 0, backoff),
    )
    difs = choice(
        Guard(BUSY_F, cca(BO)),
        Guard(conj(IDLE_F, NOW >= T + (p.difs - 1)), draw),
    )
    cca_body = choice(
        _ack_back(p, cca(BO)),
        Guard(IDLE_F, Assign("t", NOW, difs)),
    )

    got_ack = new(ack(field_of(FRM, "dest"), MYIP))
    ackrecv_body = choice(
        _ack_back(p, ackrecv(TO)),
        Guard(got_ack, _outcome("success", csma())),
        Guard(conj(NOW > TO, ~got_ack), init(BE + 1)),
    )

    equations = {
        "CSMA": (("myip",), csma_body),
        "INIT": (("myip", "frm", "be"), init_body),
        "CCA": (("myip", "frm", "be", "cw", "bo"), cca_body),
        "ACKRECV": (("myip", "frm", "be", "to"), ackrecv_body),
    }
    return ProcessDefs(equations, _domains(payloads, ids), dict(TIME_VARS), p.durations,
                       entry=csma())


def build_csma_rts_defs(params: CsmaParams, payloads: Sequence[Payload],
                        ids: Sequence[NodeId]) -> ProcessDefs:
    """Defining equations of CSMA/CA with RTS/CTS virtual carrier sense."""
    p = params
    cfg = p.durations

    def csma() -> Call:
        return Call("CSMA'", (MYIP, NAV))

    def init(be) -> Call:
        return Call("INIT'", (MYIP, FRM, be, NAV))

    def cca(bo) -> Call:
        return Call("CCA'", (MYIP, FRM, BE, CW, bo, NAV))

    def ctsrecv() -> Call:
        return Call("CTSRECV", (MYIP, FRM, BE, NAV, TO))

    def ackrecv(to) -> Call:
        return Call("ACKRECV'", (MYIP, FRM, BE, NAV, to))

    def overhear(ret: SeqExpr) -> SeqExpr:
        """Frames reserving the medium for others extend ``nav``."""
        return choice(
            Guard(conj(new(rts(WILD, DST, D)), ne(DST, MYIP)),
                  Assign("nav", emax(NAV, NOW + D), _wait_slot(ret))),
            Guard(conj(new(cts(WILD, DST, D)), ne(DST, MYIP)),
                  Assign("nav", emax(NAV, NOW + D), _wait_slot(ret))),
        )

    def respond(ret: SeqExpr) -> SeqExpr:
        """Answer an RTS for this node with a CTS after an idle sifs, unless silenced."""
        asked = new(rts(SRC, MYIP, D))
        start = RTO - p.sifs
        grant = Assign("nav", emax(NAV, start + D),
                       Transmit(cts(MYIP, SRC, D - (NOW - start) - cfg.dur_cts), ret))
        return choice(
            Guard(conj(asked, NOW <= NAV), _wait_slot(ret)),
            Guard(conj(asked, NOW > NAV),
                  Assign("rto", NOW + p.sifs, choice(
                      Guard(conj(BUSY_F, NOW > start), ret),
                      Guard(conj(IDLE_F, NOW >= RTO), grant),
                  ))),
        )

    csma_body = choice(
        NewPkt("data", "dest", Call("INIT'", (MYIP, dataframe(DATA, MYIP, DEST), 0, NAV))),
        _ack_back(p, csma()),
        overhear(csma()),
        respond(csma()),
    )

    if p.max_retransmit is None:
        init_body = Assign("cw", _cw_expr(p), cca(-1))
    else:
        init_body = choice(
            Guard(BE < p.max_retransmit, Assign("cw", _cw_expr(p), cca(-1))),
            Guard(BE >= p.max_retransmit, _outcome("fail", csma())),
        )

    reserve = C(3 * p.sifs + cfg.dur_cts + cfg.dur_ack) + dur_of(FRM)
    backoff = Assign("t", NOW, choice(
        Guard(conj(NOW >= T + BO, eq(NOW, T) | IDLE_F),
              Transmit(rts(MYIP, field_of(FRM, "dest"), reserve),
                       Assign("to", NOW + p.max_cts_wait, ctsrecv()))),
        Guard(conj(NOW > T, BUSY_F), Assign("bo", BO - (NOW - T - 1), cca(BO))),
    ))
    draw = choice(
        Guard(BO < 0, ProbChoice("bo", CW - 1, backoff)),
        Guard(BO >= 0, backoff),
    )
    difs = choice(
        Guard(BUSY_F, cca(BO)),
        Guard(conj(IDLE_F, NOW >= T + (p.difs - 1)), draw),
    )
    cca_body = choice(
        _ack_back(p, cca(BO)),
        overhear(cca(BO)),
        respond(cca(BO)),
        Guard(conj(IDLE_F, NOW > NAV), Assign("t", NOW, difs)),
    )

    got_cts = new(cts(field_of(FRM, "dest"), MYIP, WILD))
    ctsrecv_body = choice(
        Guard(got_cts, Assign("t", NOW, Guard(NOW >= T + p.sifs,
                                              Transmit(FRM, Assign("to", NOW + p.max_ack_wait,
                                                                   ackrecv(TO)))))),
        overhear(ctsrecv()),
        Guard(conj(NOW > TO, ~got_cts), init(BE + 1)),
    )

    got_ack = new(ack(field_of(FRM, "dest"), MYIP))
    ackrecv_body = choice(
        Guard(got_ack, _outcome("success", csma())),
        overhear(ackrecv(TO)),
        Guard(conj(NOW > TO, ~got_ack), init(BE + 1)),
    )

    equations = {
        "CSMA'": (("myip", "nav"), csma_body),
        "INIT'": (("myip", "frm", "be", "nav"), init_body),
        "CCA'": (("myip", "frm", "be", "cw", "bo", "nav"), cca_body),
        "CTSRECV": (("myip", "frm", "be", "nav", "to"), ctsrecv_body),
        "ACKRECV'": (("myip", "frm", "be", "nav", "to"), ackrecv_body),
    }
    return ProcessDefs(equations, _domains(payloads, ids), dict(TIME_VARS), cfg, entry=csma())


def build_defs(protocol: str, params: CsmaParams, payloads: Sequence[Payload],
               ids: Sequence[NodeId]) -> ProcessDefs:
    if protocol == "csma":
        return build_csma_defs(params, payloads, ids)
    if protocol == "csma-rts":
        return build_csma_rts_defs(params, payloads, ids)
    raise ModelError(f"unknown protocol {protocol!r} (expected csma or csma-rts)")


def initial_state(defs: ProcessDefs, node_id: NodeId) -> ProcState:
    """A node at the protocol entry point at time 0, with an idle medium behind it."""
    if "CSMA'" in defs.equations:
        return ProcState(Valuation.initial(myip=node_id, nav=-1), defs.entry)
    return ProcState(Valuation.initial(myip=node_id), defs.entry)


__all__ = [
    "CsmaParams", "cw_of", "rts_duration", "build_csma_defs", "build_csma_rts_defs",
    "build_defs", "initial_state", "TIME_VARS", "IDLE",
]
