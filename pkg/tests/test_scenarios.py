# tests/test_scenarios.py
import json
import math

import pytest

from dynamics import DUBINS, INTEGRATOR, check_model
from scenarios import (
    BUNDLED, ScenarioError, build_model, build_planner, build_workspace, control_config,
    load_scenario, parse_scenario, save_scenario, scenario_to_dict,
)


def _inline(**overrides) -> dict:
    data = {
        "name": "inline",
        "workspace": {"bounds": [0, 0, 10, 5], "goal": {"center": [9, 2.5], "radius": 0.5},
                      "obstacles": [{"type": "disc", "center": [5, 2.5], "radius": 0.5}]},
        "model": {"system": "integrator", "b": 0.1},
        "start": [1.0, 2.5],
    }
    data.update(overrides)
    return data


def test_bundled_scenarios_load():
    for name in BUNDLED:
        s = load_scenario(name)
        assert s.name == name
        assert s.workspace_file is not None
        assert build_workspace(s).obstacles


def test_integrator_defaults():
    s = load_scenario("integrator_two_obstacles")
    model = build_model(s)
    assert model.kind == INTEGRATOR
    assert model.dt == pytest.approx(0.1)
    assert model.lam == pytest.approx(2.0 * 0.1 ** 2)
    assert math.isinf(model.phi_fail)
    graph = build_planner(s, model)
    assert graph.max_radius == pytest.approx(1.0)
    assert graph.filter.h_limit == pytest.approx(0.6)


def test_dubins_defaults():
    s = load_scenario("dubins_cluttered")
    model = build_model(s)
    assert model.kind == DUBINS
    assert model.dt == pytest.approx(0.05)
    assert model.phi_fail == pytest.approx(1000.0)
    assert model.state_dim == 3 and model.control_dim == 1


def test_round_trip(tmp_path):
    s = load_scenario("integrator_two_obstacles")
    target = tmp_path / "copy.json"
    (tmp_path / "workspaces").mkdir()
    ws_src = s.base_dir / s.workspace_file
    (tmp_path / s.workspace_file).write_text(ws_src.read_text())
    save_scenario(s, target)
    again = load_scenario(target)
    assert again == s
    assert scenario_to_dict(again) == scenario_to_dict(s)


def test_inline_workspace_and_infinite_values():
    s = parse_scenario(_inline(model={"system": "integrator", "b": 0.2, "phi_fail": "inf"}))
    assert s.workspace_file is None
    assert math.isinf(s.model.phi_fail)
    assert scenario_to_dict(s)["model"]["phi_fail"] == "inf"
    json.dumps(scenario_to_dict(s))


def test_explicit_lambda_overrides_model():
    s = parse_scenario(_inline(model={"system": "integrator", "b": 0.1, "lambda": 0.5}))
    model = build_model(s)
    assert model.lam == 0.5
    assert check_model(model, [[1.0, 1.0]])


@pytest.mark.parametrize("change, message", [
    ({"planner": {"h_limit": 0}}, "h_limit"),
    ({"control": {"n_samples": 0}}, "n_samples"),
    ({"model": {"system": "boat", "b": 0.1}}, "systeem"),
    ({"model": {"system": "integrator", "b": 0.1, "lamda": 1.0}}, "onbekende sleutels"),
    ({"start": [1.0, 2.0, 0.0]}, "start"),
    ({"workspace": "missing.json"}, "niet gevonden"),
])
def test_invalid_scenarios(change, message, tmp_path):
    with pytest.raises(ScenarioError, match=message):
        parse_scenario(_inline(**change), tmp_path)


def test_missing_key_and_bad_json(tmp_path):
    data = _inline()
    del data["start"]
    with pytest.raises(ScenarioError, match="start"):
        parse_scenario(data)
    bad = tmp_path / "bad.json"
    bad.write_text("{ niet json")
    with pytest.raises(ScenarioError):
        load_scenario(bad)
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "nope.json")


def test_control_config_carries_workers():
    s = load_scenario("integrator_two_obstacles")
    config = control_config(s, workers=4)
    assert config.workers == 4
    assert config.n_samples == s.control.n_samples
    assert config.max_wall_steps == s.control.max_wall_steps
