import json

import numpy as np
import pytest

from linkalg.analysis import min_prob_from_root
from linkalg.config import build
from linkalg.node import Action
from linkalg.plts import explore
from linkalg.scenarios import hidden_station, two_node
from linkalg.simulate import TransitionCache, monte_carlo, run_trial, simulate_trace
from linkalg.trace import dumps, read, replay, replay_records, write

TARGET = (Action("deliver", ("B", "a")),)


def test_clean_link_always_delivers():
    st = monte_carlo(two_node(), trials=50, seed=3)
    assert st.delivery_rate == 1.0 and st.exhausted == 0 and st.deadlocked == 0
    [p] = st.packets
    assert p.delivered == 50 and p.attempts == {1: 50}


def test_runs_are_reproducible_from_the_seed():
    cfg = hidden_station("csma-rts")
    a = monte_carlo(cfg, trials=40, seed=11)
    b = monte_carlo(cfg, trials=40, seed=11)
    assert a == b


def test_parallel_workers_agree_with_a_single_worker():
    cfg = hidden_station("csma")
    assert monte_carlo(cfg, trials=30, seed=5, workers=2) == monte_carlo(cfg, trials=30, seed=5)


def test_cache_matches_direct_expansion():
    built = build(hidden_station("csma"))
    cache = TransitionCache(built.model)
    r1 = run_trial(built.model, built.root, 30, np.random.default_rng(1), step=cache)
    r2 = run_trial(built.model, built.root, 30, np.random.default_rng(1))
    assert r1.choices == r2.choices


def test_targeted_runs_stop_at_the_target():
    st = monte_carlo(hidden_station("csma-rts"), trials=200, seed=2, target=TARGET)
    assert 0 < st.target_rate <= 1
    assert st.target_hits <= 200


def test_a_trace_replays_and_detects_tampering(tmp_path):
    cfg = hidden_station("csma-rts")
    recs = simulate_trace(cfg, 9)
    assert recs[0]["type"] == "header" and recs[-1]["type"] == "end"
    assert [dumps(r) for r in simulate_trace(cfg, 9)] == [dumps(r) for r in recs]
    path = tmp_path / "t.jsonl"
    write(path, recs)
    assert read(path) == json.loads(json.dumps(recs))
    assert replay(path).ok
    bad = json.loads(json.dumps(recs))
    step = next(r for r in bad if r["type"] == "step" and r["label"] == "tick")
    step["slot"] += 1
    res = replay_records(bad)
    assert not res.ok and res.mismatch_at == step["step"]


def test_trials_must_be_positive():
    with pytest.raises(ValueError):
        monte_carlo(two_node(), trials=0)


@pytest.mark.parametrize("protocol", ["csma", "csma-rts"])
def test_simulated_rate_respects_the_exact_lower_bound(protocol):
    cfg = hidden_station(protocol)
    built = build(cfg)
    p = explore(built.model, built.root, cfg.horizon)
    bound = float(min_prob_from_root(p, TARGET).value)
    st = monte_carlo(cfg, trials=2000, seed=1, target=TARGET)
    assert st.target_rate >= bound - 3 * st.stderr(bound)
