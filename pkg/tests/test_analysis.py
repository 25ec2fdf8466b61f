import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linkalg.analysis import (EventualityQuery, check_deadlock_freedom, holds_outright, min_prob,
                              min_prob_from_root, min_reach_values, packet_delivery, prob_at_least,
                              uniform_bounded_prob)
from linkalg.node import TAU, TICK, Action
from linkalg.plts import Edge, Plts, explore
from linkalg.scenarios import contention_toy

GOAL = Action("deliver", ("B", "x"))
POST = (GOAL,)


def synthetic(edges, truncated=()):
    """A pLTS without a model: ``edges[s]`` lists (label, ((t, w), ...))."""
    n = len(edges)
    es = [[Edge(lbl, tuple((t, Fraction(w)) for t, w in dist)) for lbl, dist in row] for row in edges]
    trunc = set(truncated)
    for s in trunc:
        es[s] = []
    return Plts(None, [None] * n, {}, es, trunc, [0] * n, [None] * n, horizon=0)


def brute_force_min(p, post_label=GOAL):
    """Minimum over all memoryless deterministic schedulers, solved in floating point."""
    n = len(p.edges)
    choices = [range(len(es)) if es else [None] for es in p.edges]
    best = None
    for policy in itertools.product(*choices):
        a = np.eye(n)
        b = np.zeros(n)
        for s, k in enumerate(policy):
            if k is None:
                continue
            e = p.edges[s][k]
            if e.label == post_label:
                b[s] = 1.0
                continue
            for t, w in e.dist:
                a[s, t] -= float(w)
        # states that cannot reach a post edge under this policy are 0
        reach = {s for s, k in enumerate(policy) if k is not None and p.edges[s][k].label == post_label}
        changed = True
        while changed:
            changed = False
            for s, k in enumerate(policy):
                if s not in reach and k is not None and any(t in reach for t, _ in p.edges[s][k].dist):
                    reach.add(s)
                    changed = True
        for s in range(n):
            if s not in reach:
                a[s] = 0
                a[s, s] = 1
                b[s] = 0
        v = np.linalg.solve(a, b)
        best = v if best is None else np.minimum(best, v)
    return best


@st.composite
def small_mdps(draw):
    n = draw(st.integers(2, 5))
    rows = []
    for _s in range(n):
        k = draw(st.integers(0, 2))
        row = []
        for _ in range(k):
            if draw(st.integers(0, 4)) == 0:
                row.append((GOAL, ((draw(st.integers(0, n - 1)), 1),)))
                continue
            targets = draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=3, unique=True))
            weights = draw(st.lists(st.integers(1, 3), min_size=len(targets), max_size=len(targets)))
            tot = sum(weights)
            row.append((TAU, tuple((t, Fraction(w, tot)) for t, w in zip(targets, weights))))
        rows.append(row)
    return synthetic(rows)


@settings(max_examples=150, deadline=None)
@given(small_mdps())
def test_min_reachability_matches_brute_force(p):
    got = min_reach_values(p, POST).values
    expected = brute_force_min(p)
    assert all(isinstance(v, Fraction) for v in got)
    assert np.allclose([float(v) for v in got], expected, atol=1e-9)


@settings(max_examples=80, deadline=None)
@given(small_mdps())
def test_larger_post_set_never_lowers_the_minimum(p):
    base = min_reach_values(p, POST).values
    wider = min_reach_values(p, POST + (TAU,)).values
    assert all(w >= b for w, b in zip(wider, base))


def test_coin_flip_examples():
    coin = synthetic([
        [(TAU, ((1, Fraction(1, 2)), (2, Fraction(1, 2))))],
        [(GOAL, ((3, 1),))],
        [],
        [],
    ])
    assert min_prob_from_root(coin, POST).value == Fraction(1, 2)
    assert min_prob(coin, (1, 0), POST).value == 1
    assert min_prob(coin, (1, 0), POST, count_initial=False).value == 0


def test_scheduler_minimises_over_choices():
    p = synthetic([
        [(TAU, ((1, 1),)), (TAU, ((2, 1),))],
        [(GOAL, ((1, 1),))],
        [(TAU, ((2, 1),))],
    ])
    assert min_prob_from_root(p, POST).value == 0
    assert brute_force_min(p)[0] == 0


def test_truncation_gives_bounds():
    p = synthetic([[(TAU, ((1, Fraction(1, 3)), (2, Fraction(2, 3))))], [(GOAL, ((1, 1),))], []],
                  truncated=[2])
    r = min_prob_from_root(p, POST)
    assert (r.value, r.upper) == (Fraction(1, 3), 1)
    assert r.truncated and not r.exact


@pytest.mark.parametrize("rounds, expected", [(1, Fraction(1, 2)), (2, Fraction(3, 4)), (3, Fraction(7, 8))])
def test_contention_toy(rounds, expected):
    model, root = contention_toy(rounds)
    p = explore(model, root, horizon=4 * rounds + 4)
    post = (Action("deliver", ("R", "m1")),)
    r = min_prob_from_root(p, post)
    assert r.exact and r.value == expected
    assert uniform_bounded_prob(p, post, 2 * rounds + 2) == expected


def test_trivial_post_holds_outright():
    p = synthetic([[(TAU, ((1, 1),))], [(GOAL, ((1, 1),))]])
    q = EventualityQuery(post=POST)
    assert holds_outright(p, q).holds
    assert prob_at_least(p, q).verdict == "holds"


def test_outright_failure_has_a_lasso():
    p = synthetic([[(TAU, ((1, 1),)), (TAU, ((2, 1),))], [(TAU, ((0, 1),))], [(GOAL, ((2, 1),))]])
    r = holds_outright(p, EventualityQuery(post=POST, pre_label=TAU))
    assert r.verdict == "fails"
    path = r.counterexample
    assert path.loop_from is not None
    assert GOAL not in path.labels(p)[path.pre_step:]


def test_truncation_makes_outright_unknown():
    p = synthetic([[(TAU, ((1, 1),))], []], truncated=[1])
    assert holds_outright(p, EventualityQuery(post=POST)).verdict == "unknown"
    assert prob_at_least(p, EventualityQuery(post=POST)).verdict == "unknown"


def test_threshold_zero_always_holds():
    p = synthetic([[(TAU, ((1, 1),))], [(TAU, ((1, 1),))]])
    assert prob_at_least(p, EventualityQuery(post=POST), 0).verdict == "holds"
    assert prob_at_least(p, EventualityQuery(post=POST), Fraction(1, 2)).verdict == "fails"


def test_outright_holds_implies_probability_one(hidden_rts):
    cfg, _built, p = hidden_rts
    q = packet_delivery("C", "c", "B")
    out = holds_outright(p, q)
    prob = prob_at_least(p, q)
    if out.holds:
        assert prob.result.value == 1
    assert prob.result.value <= 1


def test_deadlock_freedom_and_bounded_probability(hidden_csma):
    _cfg, _built, p = hidden_csma
    assert check_deadlock_freedom(p).ok
    post = (Action("deliver", ("B", "a")),)
    probs = [uniform_bounded_prob(p, post, k) for k in (5, 10, 20)]
    assert probs == sorted(probs)


def test_uniform_probability_refuses_the_frontier():
    p = synthetic([[(TICK, ((1, 1),))], []], truncated=[1])
    with pytest.raises(ValueError):
        uniform_bounded_prob(p, POST, 3)
