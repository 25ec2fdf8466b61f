"""Built-in scenarios: hidden station, exposed station, the star topology and a two-node link."""

from __future__ import annotations

from typing import Callable

from .config import InjectionConfig, ParamsConfig, ScenarioConfig
from .data import DurationConfig
from .expr import FALSE, NOW, C, V, dataframe, new
from .network import Model, Network
from .process import (Assign, Call, Deliver, Guard, ProbChoice, ProcessDefs, ProcState,
                      Transmit, Valuation, choice)

MYIP, DATA, SRC, T, BO, K = (V(n) for n in ("myip", "data", "src", "t", "bo", "k"))


def hidden_station(protocol: str = "csma", *, max_retransmit: int | None = 2,
                   horizon: int = 30, **params) -> ScenarioConfig:
    """A - B - C: A and C cannot hear each other, both send to B at time 0."""
    return ScenarioConfig(
        name="hidden",
        nodes=["A", "B", "C"],
        edges=[("A", "B"), ("B", "C")],
        protocol=protocol,
        params=ParamsConfig(maxRetransmit=max_retransmit, **params),
        payloads=["a", "c"],
        injections=[InjectionConfig(node="A", data="a", dest="B"),
                    InjectionConfig(node="C", data="c", dest="B")],
        horizon=horizon,
    )


def exposed_station(protocol: str = "csma-rts", *, max_retransmit: int | None = 2,
                    horizon: int = 40, **params) -> ScenarioConfig:
    """A - B - C - D: C streams frames to D while A sends one frame to B."""
    return ScenarioConfig(
        name="exposed",
        nodes=["A", "B", "C", "D"],
        edges=[("A", "B"), ("B", "C"), ("C", "D")],
        protocol=protocol,
        params=ParamsConfig(maxRetransmit=max_retransmit, **params),
        payloads=["a", "x"],
        injections=[InjectionConfig(node="A", data="a", dest="B"),
                    InjectionConfig(node="C", data="x", dest="D", repeat=True)],
        horizon=horizon,
    )


def star(protocol: str = "csma-rts", *, branches: int = 3, start: int = 6,
         max_retransmit: int | None = 1, horizon: int = 20, **params) -> ScenarioConfig:
    """B - A, A - Ci, Ci - Di: every Ci may stream to its Di whenever the scheduler
    lets it, and A gets one frame for B at time ``start``."""
    cs = [f"C{i}" for i in range(1, branches + 1)]
    ds = [f"D{i}" for i in range(1, branches + 1)]
    edges = [("A", "B")] + [("A", c) for c in cs] + list(zip(cs, ds))
    inj = [InjectionConfig(node="A", data="a", dest="B", at=start)]
    inj += [InjectionConfig(node=c, data="x", dest=d, repeat=True, lazy=True) for c, d in zip(cs, ds)]
    return ScenarioConfig(
        name="star",
        nodes=["A", "B"] + [n for pair in zip(cs, ds) for n in pair],
        edges=edges,
        protocol=protocol,
        params=ParamsConfig(maxRetransmit=max_retransmit, **params),
        payloads=["a", "x"],
        injections=inj,
        horizon=horizon,
    )


def two_node(protocol: str = "csma", *, max_retransmit: int | None = 1,
             horizon: int = 30, **params) -> ScenarioConfig:
    """A - B on a clean channel."""
    return ScenarioConfig(
        name="two-node",
        nodes=["A", "B"],
        edges=[("A", "B")],
        protocol=protocol,
        params=ParamsConfig(maxRetransmit=max_retransmit, **params),
        payloads=["a"],
        injections=[InjectionConfig(node="A", data="a", dest="B")],
        horizon=horizon,
    )


SCENARIOS: dict[str, Callable[..., ScenarioConfig]] = {
    "hidden": hidden_station,
    "exposed": exposed_station,
    "star": star,
    "two-node": two_node,
}


def by_name(name: str, **kwargs) -> ScenarioConfig:
    try:
        factory = SCENARIOS[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
    return factory(**kwargs)


# ------------------------------------------------------------- contention toy

def contention_toy(rounds: int = 2, *, por: bool = False) -> tuple[Model, Network]:
    """Two transmitters T1, T2 next to a receiver R.

    In each of ``rounds`` two-slot rounds every transmitter draws a slot in
    {0, 1} uniformly and sends a one-slot frame in it; R delivers whatever
    arrives intact.  T1's frame gets through unless both draws agree in every round.
    """
    tx_round = Assign("t", NOW, ProbChoice("bo", C(1), Guard(NOW >= T + BO, Transmit(
        dataframe(DATA, MYIP, C("R")), Guard(NOW >= T + 2, Call("TX", (MYIP, DATA, K - 1)))))))
    equations = {
        "TX": (("myip", "data", "k"), choice(Guard(K > 0, tx_round), Guard(K <= 0, Call("HALT", ())))),
        "HALT": ((), Guard(FALSE, Call("HALT", ()))),
        "RX": (("myip",), Guard(new(dataframe(DATA, SRC, MYIP)), Deliver(
            DATA, Assign("t", NOW, Guard(NOW > T, Call("RX", (MYIP,))))))),
    }
    durations = DurationConfig(data_frame=1)
    defs = ProcessDefs(equations, {"data": ("m1", "m2"), "src": ("T1", "T2")},
                       {"now": None, "t": None}, durations)
    ids = ("T1", "T2", "R")
    model = Model(defs, ids, por=por, normalize=True)
    states = {
        "T1": ProcState(Valuation.initial(myip="T1", data="m1", k=rounds), Call("TX", (MYIP, DATA, K))),
        "T2": ProcState(Valuation.initial(myip="T2", data="m2", k=rounds), Call("TX", (MYIP, DATA, K))),
        "R": ProcState(Valuation.initial(myip="R"), Call("RX", (MYIP,))),
    }
    root = model.network(states, {"T1": {"R"}, "T2": {"R"}, "R": set()})
    return model, root
