import json

import pytest

from conftest import DEAD_URL
from photoloop.config import ConfigError, load_config, parse_config
from photoloop.core import Category, Scale


def test_defaults():
    cfg = parse_config({}, env={})
    assert cfg.planner.budget >= cfg.planner.top_k and cfg.loop.max_iterations == 3
    assert cfg.editors() == {} and cfg.perceiver_url() is None


def test_full_document(tmp_path):
    (tmp_path / "c.toml").write_text(f"""
seed = 11
[loop]
max_iterations = 4
patience = 3
[planner]
budget = 12
depth = 2
sim_scale = "quarter"
[endpoints.ed]
url = "{DEAD_URL}"
retries = 0
[endpoints.sc]
url = "{DEAD_URL}"
kind = "scorer"
[[scorers]]
id = "exp"
weight = 1.0
builtin = "exposure_score"
[[scorers]]
id = "remote"
weight = 2.0
endpoint = "sc"
range = [0, 10]
[routing]
parallel_candidates = 2
[routing.routes]
SemanticEdit = ["ed", "procedural"]
""")
    cfg = load_config(tmp_path / "c.toml", env={})
    assert cfg.seed == 11 and cfg.planner.rng_seed == 11
    assert cfg.planner.sim_scale is Scale.QUARTER and cfg.loop.patience == 3
    assert [e.scorer_id for e in cfg.scorers.entries] == ["exp", "remote"]
    assert cfg.routing.routes[Category.SEMANTIC_EDIT] == ("ed", "procedural")
    assert cfg.routing.parallel_candidates == 2
    cfg.build()


def test_json_equivalent(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"planner": {"budget": 7, "top_k": 2}}))
    assert load_config(tmp_path / "c.json", env={}).planner.budget == 7


@pytest.mark.parametrize(
    "raw, path",
    [
        ({"planner": {"budget": 0}}, "planner.budget"),
        ({"planner": {"budget": "ten"}}, "planner.budget"),
        ({"planner": {"budget": 2, "top_k": 3}}, "planner.top_k"),
        ({"planner": {"sim_scale": "eighth"}}, "planner.sim_scale"),
        ({"planner": {"uct_c": 0}}, "planner.uct_c"),
        ({"loop": {"max_iterations": 2, "patience": 3}}, "loop.patience"),
        ({"loop": {"epsilon": -1}}, "loop.epsilon"),
        ({"scorers": []}, "scorers"),
        ({"scorers": [{"id": "a", "weight": -1, "builtin": "exposure_score"}]}, "scorers[0].weight"),
        ({"scorers": [{"id": "a", "weight": 1, "builtin": "nope"}]}, "scorers[0].builtin"),
        ({"scorers": [{"id": "a", "weight": 1, "endpoint": "missing"}]}, "scorers[0].endpoint"),
        ({"routing": {"routes": {"Foo": ["procedural"]}}}, "routing.routes.Foo"),
        ({"routing": {"routes": {"SemanticEdit": ["ghost"]}}}, "routing.routes.SemanticEdit"),
        ({"routing": {"parallel_candidates": 3}}, "routing.parallel_candidates"),
        ({"endpoints": {"x": {"kind": "editor"}}}, "endpoints.x.url"),
        ({"perceiver": {"endpoint": "x"}}, "perceiver.endpoint"),
        ({"bogus": 1}, "bogus"),
    ],
)
def test_field_path_diagnostics(raw, path):
    with pytest.raises(ConfigError) as e:
        parse_config(raw, env={})
    assert e.value.path == path and path in str(e.value)


def test_env_overrides_endpoint_url():
    raw = {"endpoints": {"ed": {"url": "http://a/"}}}
    cfg = parse_config(raw, env={"PHOTOLOOP_ENDPOINT_ED_URL": "http://b/"})
    assert cfg.editors()["ed"].url == "http://b/"


def test_unreadable_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")
    (tmp_path / "bad.toml").write_text("planner = [")
    with pytest.raises(ConfigError) as e:
        load_config(tmp_path / "bad.toml")
    assert e.value.path == "<file>"


def test_with_seed_reseeds_planner():
    cfg = parse_config({}, env={}).with_seed(5)
    assert cfg.seed == 5 and cfg.planner.rng_seed == 5
