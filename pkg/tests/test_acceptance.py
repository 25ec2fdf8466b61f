"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import functools
import gc
import itertools
from fractions import Fraction

import pytest

from conftest import hidden_plts, record_criterion
from linkalg.analysis import (after_cts, check_deadlock_freedom, holds_outright, min_prob_from_root,
                              packet_delivery, prob_at_least, uniform_bounded_prob)
from linkalg.bisim import strong_bisim
from linkalg.config import build
from linkalg.data import (CONFLICT, IDLE, DataFrame, DurationConfig, Frag, chunk_merge, fragments)
from linkalg.expr import V
from linkalg.network import compose, left_assoc, right_assoc
from linkalg.node import Action
from linkalg.plts import explore
from linkalg.process import Call, ProbChoice, ProcessDefs, ProcState, Valuation, instant_steps
from linkalg.scenarios import contention_toy, exposed_station, hidden_station, star
from linkalg.simulate import monte_carlo, simulate_trace
from linkalg.trace import path_records, write

pytestmark = pytest.mark.acceptance


def explored(cfg, horizon=None):
    horizon = cfg.horizon if horizon is None else horizon
    b = build(cfg.with_updates(horizon=horizon, budget=10**6))
    return explore(b.model, b.root, horizon, budget=10**6)


# 1 ------------------------------------------------------------------------

def expected_merge(rfr, ch):
    """The five table rows, read top to bottom; the first matching row wins."""
    if ch == CONFLICT:
        return CONFLICT
    if ch == IDLE:
        return IDLE
    if ch.c == 1:
        return ch
    if rfr == Frag(ch.m, ch.c - 1):
        return ch
    return CONFLICT


def test_criterion_01_chunk_merge_table():
    cfg = DurationConfig(payload_dur={"a": 3, "b": 2})
    alphabet = [DataFrame("a", "A", "B"), DataFrame("b", "A", "B")]
    chunks = [f for m in alphabet for f in fragments(m, cfg)] + [IDLE, CONFLICT]
    pairs = list(itertools.product(chunks, chunks))
    bad = [(r, c) for r, c in pairs if chunk_merge(r, c) != expected_merge(r, c)]
    ok = not bad
    record_criterion(1, "chunk merge reproduces the table", ok, f"{len(pairs)} pairs, {len(bad)} mismatches")
    assert ok


# 2 ------------------------------------------------------------------------

DEADLOCK_CASES = [(f, proto) for f in ("hidden", "exposed", "star") for proto in ("csma", "csma-rts")]
FACTORIES = {"hidden": hidden_station, "exposed": exposed_station, "star": star}
_deadlock_results: dict = {}


@pytest.mark.parametrize("scenario, protocol", DEADLOCK_CASES)
def test_criterion_02_deadlock_freedom(scenario, protocol):
    horizon = 30 if scenario == "star" else 40
    p = explored(FACTORIES[scenario](protocol), horizon)
    rep = check_deadlock_freedom(p)
    _deadlock_results[(scenario, protocol)] = (rep.ok, rep.checked, len(p.truncated))
    del p
    gc.collect()
    if len(_deadlock_results) == len(DEADLOCK_CASES):
        ok = all(r[0] for r in _deadlock_results.values())
        detail = ", ".join(f"{s}/{pr}: {c} states" for (s, pr), (_o, c, _t) in _deadlock_results.items())
        record_criterion(2, "deadlock freedom on hidden, exposed and star", ok, detail)
    assert rep.ok, f"deadlocked states: {rep.offending[:5]}"


# 3 ------------------------------------------------------------------------

def test_criterion_03_uplus_algebra():
    m, m2 = DataFrame("a", "A", "B"), DataFrame("b", "A", "B")
    values = [None, Frag(m, 1), Frag(m2, 1), CONFLICT]
    ids = ("x", "y", "z")
    maps = [{i: v for i, v in zip(ids, combo) if v is not None}
            for combo in itertools.product(values, repeat=3)]

    def oracle(*ms):
        out = {}
        for i in ids:
            hits = [mm[i] for mm in ms if i in mm]
            if hits:
                out[i] = hits[0] if len(hits) == 1 else CONFLICT
        return out

    failures = 0
    for a, b in itertools.product(maps, repeat=2):
        if compose((0, 1), [a, b]) != compose((1, 0), [a, b]):
            failures += 1
    for a, b, c in itertools.product(maps, repeat=3):
        left = compose(left_assoc(3), [a, b, c])
        if left != compose(right_assoc(3), [a, b, c]) or left != oracle(a, b, c):
            failures += 1
    ok = failures == 0
    record_criterion(3, "union is associative and commutative", ok,
                     f"{len(maps)} maps, {len(maps) ** 3} triples, {failures} failures")
    assert ok


# 4 ------------------------------------------------------------------------

@pytest.mark.parametrize("protocol", ["csma", "csma-rts"])
def test_criterion_04_composition_bisimilar(protocol):
    cfg = hidden_station(protocol).with_updates(por=False)
    b = build(cfg)

    def plts(shape, order=None):
        m = b.model.reshaped(shape, order)
        root = b.model.reorder(b.root, order) if order else b.root
        return explore(m, m.canonical(root), cfg.horizon)

    left, right = plts(((0, 1), 2)), plts((0, (1, 2)))
    swapped = plts(((1, 0), 2))
    reordered = plts(((0, 1), 2), ["B", "A", "C"])
    sizes = [len(x) for x in (left, right, swapped, reordered)]
    assoc = strong_bisim(left, right).bisimilar
    comm = strong_bisim(left, swapped).bisimilar and strong_bisim(left, reordered).bisimilar
    ok = assoc and comm and max(sizes) <= 10**4
    record_criterion(4, f"composition is associative and commutative up to bisimilarity ({protocol})",
                     ok, f"states {sizes}, assoc={assoc}, comm={comm}")
    assert ok


# 5 ------------------------------------------------------------------------

def test_criterion_05_probabilistic_choice():
    stop = Call("S", ())
    body = ProbChoice("i", V("n"), stop)
    defs = ProcessDefs({"P": (("n",), body), "S": ((), stop)})
    [(_a, dist)] = instant_steps(ProcState(Valuation.initial(n=3), body), defs)
    got = sorted((t.xi["i"], w) for t, w in dist)
    ok = got == [(i, Fraction(1, 4)) for i in range(4)] and all(type(w) is Fraction for _t, w in dist)
    record_criterion(5, "probabilistic choice with n = 3", ok, str([str(w) for _i, w in got]))
    assert ok


# 6 ------------------------------------------------------------------------

def test_criterion_06_hidden_station_fails():
    cfg, _b, p = hidden_plts("csma")
    q = packet_delivery("A", "a", "B")
    out = holds_outright(p, q)
    recs = path_records(cfg, p, out.counterexample) if out.counterexample else []
    conflict_at_b = any(r.get("type") == "step" and r.get("traffic", {}).get("B") == "conflict" for r in recs)
    prob = prob_at_least(p, q)
    value = prob.result.value
    ok = (out.verdict == "fails" and conflict_at_b and prob.result.exact and value < 1
          and isinstance(value, Fraction))
    record_criterion(6, "hidden station: delivery fails with a conflict at B", ok,
                     f"verdict {out.verdict}, {len(recs)} trace records, min prob {value}")
    assert ok


# 7 ------------------------------------------------------------------------

def test_criterion_07_rts_cts_after_handshake():
    cfg, b, p = hidden_plts("csma-rts")
    results = []
    for sender, data in (("A", "a"), ("C", "c")):
        res = holds_outright(p, after_cts("B", sender, data, durations=b.params.durations))
        results.append((sender, res.verdict, res.pre_transitions))
    ok = all(v == "holds" and n > 0 for _s, v, n in results)
    record_criterion(7, "RTS/CTS: delivery holds outright after the CTS", ok,
                     ", ".join(f"{s}: {v} over {n} pre-transitions" for s, v, n in results))
    assert ok


# 8 ------------------------------------------------------------------------

def test_criterion_08_exposed_station_retries_help():
    values = []
    for k in (1, 2, 3):
        p = explored(exposed_station("csma-rts", max_retransmit=k), 60)
        r = prob_at_least(p, packet_delivery("A", "a", "B"))
        values.append((k, r.result.value, r.result.exact))
        del p
        gc.collect()
    vs = [v for _k, v, _e in values]
    ok = all(e for _k, _v, e in values) and all(a < b for a, b in zip(vs, vs[1:]))
    record_criterion(8, "exposed station: min prob strictly increasing in maxRetransmit", ok,
                     ", ".join(f"k={k}: {v}" for k, v, _e in values))
    assert ok


# 9 ------------------------------------------------------------------------

_star_results: list = []


@pytest.mark.parametrize("protocol", ["csma-rts", "csma"])
@pytest.mark.parametrize("horizon", [20, 40, 60])
def test_criterion_09_star_never_guarantees_delivery(protocol, horizon):
    p = explored(star(protocol), horizon)
    r = prob_at_least(p, packet_delivery("A", "a", "B"))
    _star_results.append((protocol, horizon, r.result.value, r.result.upper, len(p)))
    del p
    gc.collect()
    this_ok = r.result.value == 0 and r.result.upper == 0
    if len(_star_results) == 6:
        ok = all(v == 0 and u == 0 for _p, _h, v, u, _n in _star_results)
        record_criterion(9, "star: min prob of delivery is exactly 0", ok,
                         ", ".join(f"{pr}@{h}: {v} ({n} states)" for pr, h, v, _u, n in _star_results))
    assert this_ok


# 10 -----------------------------------------------------------------------

def brute_force_toy(model, root, ticks):
    """Minimum over every (history-dependent) scheduler by plain recursion on the model."""
    post = Action("deliver", ("R", "m1"))

    @functools.lru_cache(maxsize=None)
    def value(net, left):
        best = None
        for tr in model.transitions(net):
            if tr.label == post:
                v = Fraction(1)
            elif tr.is_tick and left == 0:
                v = Fraction(0)
            else:
                nl = left - 1 if tr.is_tick else left
                v = sum((w * value(t, nl) for t, w in tr.dist), Fraction(0))
            best = v if best is None else min(best, v)
        return Fraction(0) if best is None else best

    return value(model.canonical(root), ticks)


def test_criterion_10_toy_oracle():
    model, root = contention_toy(rounds=2)     # first attempt plus one retry
    p = explore(model, root, horizon=12)
    engine = min_prob_from_root(p, (Action("deliver", ("R", "m1")),))
    draws = list(itertools.product((0, 1), repeat=4))           # (T1, T2) per round
    by_counting = Fraction(sum(d[0] != d[1] or d[2] != d[3] for d in draws), len(draws))
    by_recursion = brute_force_toy(model, root, 12)
    ok = engine.exact and engine.value == by_counting == by_recursion == Fraction(3, 4)
    record_criterion(10, "contention toy matches brute force", ok,
                     f"engine {engine.value}, draws {by_counting}, schedulers {by_recursion}")
    assert ok


# 11 -----------------------------------------------------------------------

def test_criterion_11_monte_carlo_agrees_with_uniform_scheduler():
    cfg, _b, p = hidden_plts("csma-rts")
    target = (Action("deliver", ("B", "a")),)
    exact = uniform_bounded_prob(p, target, cfg.horizon)
    st = monte_carlo(cfg, trials=10_000, seed=7, horizon=cfg.horizon, target=target)
    rate = st.target_rate
    sigma = st.stderr(float(exact))
    z = abs(rate - float(exact)) / sigma
    ok = z <= 3
    record_criterion(11, "Monte Carlo within 3 sigma of the uniform-scheduler probability", ok,
                     f"rate {rate:.4f}, exact {exact} = {float(exact):.5f}, {z:.2f} sigma")
    assert ok


# 12 -----------------------------------------------------------------------

def test_criterion_12_trace_determinism(tmp_path):
    cfg = hidden_station("csma-rts")
    paths = []
    for i in range(2):
        path = tmp_path / f"run{i}.jsonl"
        write(path, simulate_trace(cfg, 42))
        paths.append(path)
    a, b = (x.read_bytes() for x in paths)
    ok = a == b and len(a) > 0
    record_criterion(12, "identical seeds give byte-identical traces", ok, f"{len(a)} bytes")
    assert ok
