import json

import pytest
from pydantic import ValidationError

from linkalg.config import ParamsConfig, ScenarioConfig, build, dump, load
from linkalg.scenarios import SCENARIOS, by_name


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_builtin_scenarios_round_trip_through_json(name, tmp_path):
    cfg = by_name(name)
    path = tmp_path / f"{name}.json"
    dump(cfg, path)
    assert load(path) == cfg
    assert json.loads(path.read_text())["version"] == 1


def test_topology_is_symmetric_with_optional_self_loops():
    cfg = ScenarioConfig(nodes=["A", "B", "C"], edges=[("A", "B")], own_range=["C"], payloads=["a"])
    assert cfg.ranges() == {"A": {"B"}, "B": {"A"}, "C": {"C"}}
    net = build(cfg).root
    assert net.node("A").range == {"B"} and net.node("C").range == {"C"}


def test_parameters_use_protocol_names():
    p = ParamsConfig(cwmin=4, maxRetransmit=None, durRTS=2, dataFrame=5).to_params()
    assert p.cwmin == 4 and p.max_retransmit is None
    assert p.durations.dur_rts == 2 and p.durations.data_frame == 5
    assert p.max_cts_wait == p.sifs + p.durations.dur_cts


@pytest.mark.parametrize("bad", [
    {"nodes": ["A", "A"], "payloads": ["a"]},
    {"nodes": ["A"], "edges": [("A", "Z")], "payloads": ["a"]},
    {"nodes": ["A"], "edges": [("A", "A")], "payloads": ["a"]},
    {"nodes": ["A", "B"], "payloads": ["a"], "injections": [{"node": "A", "data": "q", "dest": "B"}]},
    {"nodes": ["A"], "payloads": ["a"], "params": {"sifs": 2, "difs": 2}},
    {"nodes": ["A"], "payloads": ["a"], "params": {"cwmin": 0}},
    {"nodes": ["A"], "payloads": ["a"], "version": 2},
    {"nodes": ["A"], "payloads": ["a"], "colour": "red"},
    {"nodes": ["A"], "payloads": ["a"], "protocol": "aloha"},
])
def test_invalid_configurations_are_rejected(bad):
    with pytest.raises(ValidationError):
        ScenarioConfig.model_validate(bad)


def test_updates_are_revalidated():
    cfg = by_name("hidden")
    assert cfg.with_updates(horizon=5).horizon == 5
    with pytest.raises(ValidationError):
        cfg.with_updates(nodes=["A"])


def test_unknown_scenario():
    with pytest.raises(KeyError):
        by_name("ring")
