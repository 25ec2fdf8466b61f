import pytest

from linkalg.analysis import holds_outright, packet_delivery
from linkalg.config import ScenarioConfig, build
from linkalg.csma import CsmaParams, cw_of, rts_duration
from linkalg.data import DurationConfig, Notice, Rts
from linkalg.expr import ModelError
from linkalg.node import Action
from linkalg.plts import explore
from linkalg.scenarios import star, two_node


def test_contention_window_doubles_and_caps():
    assert cw_of(3, CsmaParams(cwmin=2)) == 16
    assert cw_of(0, CsmaParams(cwmin=1)) == 1
    assert cw_of(6, CsmaParams(cwmin=2, cwmax=16)) == 16
    with pytest.raises(ValueError):
        cw_of(-1, CsmaParams())


def test_rts_reserves_the_whole_exchange():
    assert rts_duration("a", "A", "B", CsmaParams()) == 8
    assert rts_duration("a", "A", "B", CsmaParams(durations=DurationConfig(data_frame=1))) == 6
    assert rts_duration("a", "A", "B", CsmaParams(sifs=2, difs=3)) == 11


@pytest.mark.parametrize("bad", [dict(cwmin=0), dict(sifs=2, difs=2), dict(max_retransmit=0),
                                 dict(cwmin=4, cwmax=2)])
def test_parameter_validation(bad):
    with pytest.raises(ModelError):
        CsmaParams(**bad)


def plts_of(cfg):
    b = build(cfg)
    return explore(b.model, b.root, cfg.horizon)


@pytest.mark.parametrize("protocol", ["csma", "csma-rts"])
def test_clean_link_delivers_outright(protocol):
    p = plts_of(two_node(protocol, horizon=30))
    assert holds_outright(p, packet_delivery("A", "a", "B")).holds
    labels = {e.label for _s, _k, e in p.transitions()}
    assert Action("deliver", ("A", Notice("success", "a"))) in labels


@pytest.mark.parametrize("protocol", ["csma", "csma-rts"])
def test_unreachable_destination_retries_then_reports_failure(protocol):
    cfg = ScenarioConfig(nodes=["A", "B"], protocol=protocol, payloads=["a"],
                         params={"maxRetransmit": 2},
                         injections=[{"node": "A", "data": "a", "dest": "B"}], horizon=60)
    p = plts_of(cfg)
    assert not p.truncated
    labels = {e.label for _s, _k, e in p.transitions()}
    assert Action("deliver", ("A", Notice("fail", "a"))) in labels
    assert not any(lbl.kind == "deliver" and lbl.args[0] == "B" for lbl in labels)
    # retries never exceed maxRetransmit
    assert all(net.node("A").state.xi.get("be", 0) <= 2 for net in p.states)


def delivery_count_reaches(p, label, times):
    seen, stack = set(), [(p.initial, 0)]
    while stack:
        s, c = stack.pop()
        if (s, c) in seen:
            continue
        seen.add((s, c))
        for e in p.edges[s]:
            n = c + (e.label == label)
            if n >= times:
                return True
            stack.extend((t, n) for t, _w in e.dist)
    return False


def test_lost_ack_can_duplicate_a_delivery():
    # C1 talks to D1 with long frames; its tail can destroy B's ACK at A, so A resends
    cfg = star("csma", branches=1, start=0, max_retransmit=2, horizon=30, payloadDur={"x": 6})
    p = plts_of(cfg)
    assert delivery_count_reaches(p, Action("deliver", ("B", "a")), 2)
    assert not delivery_count_reaches(plts_of(two_node("csma")), Action("deliver", ("B", "a")), 2)


def test_overheard_reservations_set_nav(hidden_rts):
    _cfg, _b, p = hidden_rts
    assert any(n.state.xi.get("nav", -1) >= n.state.xi["now"] for net in p.states for n in net.nodes)


def test_rts_starts_only_after_nav_expires(hidden_rts):
    _cfg, _b, p = hidden_rts
    starts = 0
    for s, _k, e in p.transitions():
        for _nid, ch in e.traffic or ():
            m = getattr(ch, "m", None)
            if isinstance(m, Rts) and ch.c == 1:
                xi = p.states[s].node(m.src).state.xi
                assert xi["now"] > xi.get("nav", -1)
                starts += 1
    assert starts
