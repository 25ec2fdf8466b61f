from fractions import Fraction

import pytest

from linkalg.data import DataFrame, DurationConfig, Frag, is_new
from linkalg.expr import FALSE, C, V
from linkalg.network import InjectionSpec, Model
from linkalg.plts import ResourceError, check_distributions, explore
from linkalg.process import (Call, Guard, NewPkt, ProbChoice, ProcessDefs, ProcState, Transmit,
                             Valuation)

M = DataFrame("d", "A", "B")
CFG = DurationConfig(data_frame=2)
STOP = Call("STOP", ())
EQS = {
    "STOP": ((), Guard(FALSE, STOP)),
    "SEND": (("m",), Transmit(V("m"), STOP)),
    "COIN": (("n",), ProbChoice("i", V("n"), STOP)),
    "SRV": ((), NewPkt("data", "dest", Call("SRV", ()))),
}


def defs():
    return ProcessDefs(dict(EQS), {}, durations=CFG)


def st_(p, **xi):
    return ProcState(Valuation.initial(**xi), p)


@pytest.mark.parametrize("normalize, expected", [(False, 4), (True, 1)])
def test_idle_node_states_collapse_under_clock_normalisation(normalize, expected):
    m = Model(defs(), ["a"], normalize=normalize)
    p = explore(m, m.network({"a": st_(STOP)}, {}), horizon=3)
    assert len(p) == expected
    assert p.depth[-1] == (3 if not normalize else 0)


def test_two_slot_transmission_is_received_new():
    m = Model(defs(), ["a", "b"])
    root = m.network({"a": st_(Call("SEND", (V("m"),)), m=M), "b": st_(STOP)}, {"a": {"b"}, "b": {"a"}})
    p = explore(m, root, horizon=4)
    labels = {e.label.kind for _s, _k, e in p.transitions()}
    assert labels == {"tick"}
    final = [s for s in range(len(p)) if p.depth[s] == 2][0]
    rfr = p.states[final].node("b").state.xi["rfr"]
    assert rfr == Frag(M, 2) and is_new(rfr, M, CFG)


@pytest.mark.parametrize("n", [0, 1, 3])
def test_root_probabilistic_choice(n):
    m = Model(defs(), ["a"], drop_dead=False)
    p = explore(m, m.network({"a": st_(Call("COIN", (V("n"),)), n=n)}, {}), horizon=1)
    [e] = p.edges[0]
    assert e.label.kind == "tau" and len(e.dist) == n + 1
    assert all(w == Fraction(1, n + 1) for _t, w in e.dist)
    assert check_distributions(p)


def test_budget_is_enforced():
    m = Model(defs(), ["a"])
    with pytest.raises(ResourceError):
        explore(m, m.network({"a": st_(STOP)}, {}), horizon=10, budget=3)


def test_frontier_is_reported_at_the_horizon():
    m = Model(defs(), ["a"])
    p = explore(m, m.network({"a": st_(STOP)}, {}), horizon=2)
    assert p.truncated == {2}
    assert p.path_to(2) == [(0, 0), (1, 0)]
    assert not p.is_deadlock(2)


def test_injections_are_offered_by_the_environment():
    sched = [InjectionSpec("a", "x", "b", repeat=True)]
    m = Model(defs(), ["a", "b"], schedule=sched, normalize=True)
    p = explore(m, m.network({"a": st_(Call("SRV", ())), "b": st_(STOP)}, {}), horizon=3)
    kinds = [e.label for e in p.edges[0]]
    assert [k.kind for k in kinds] == ["newpkt"] and kinds[0].args == ("a", "x", "b")


def test_scenario_distributions_are_exact(hidden_rts):
    _cfg, _built, p = hidden_rts
    assert check_distributions(p)
    assert all(isinstance(w, Fraction) for _s, _k, e in p.transitions() for _t, w in e.dist)
