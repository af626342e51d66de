import json

import pytest

from manetsim.core.errors import ConfigError
from manetsim.core.models import AttackBehavior, get_all_presets, get_preset
from manetsim.core.scenario import ScenarioConfig, build_config, load_config


def test_default_preset_is_the_reference_scenario():
    config = build_config()
    assert config.clusters == 7
    assert config.nodes_per_cluster == 80
    assert config.total_nodes == 560
    assert config.bounds.width == 700.0
    assert config.duration == 600.0
    assert config.radio.transmission_range == 300.0


def test_small_preset():
    config = build_config(preset="small", seed=3)
    assert config.total_nodes == 40
    assert config.duration == 60.0
    assert config.seed == 3
    assert config.seeds == [3]


def test_presets_registry():
    presets = get_all_presets()
    assert set(presets) == {"default", "small"}
    assert get_preset("missing") is None
    presets.pop("small")
    assert get_preset("small") is not None


def test_unknown_preset():
    with pytest.raises(ConfigError, match="Unknown preset"):
        build_config(preset="huge")


@pytest.mark.parametrize(
    "overrides",
    [
        {"bogus": 1},
        {"radio": {"range": 10}},
        {"compare": {"arena": 100, "colour": "red"}},
    ],
)
def test_unknown_keys_rejected(overrides):
    with pytest.raises(ConfigError):
        build_config(overrides)


@pytest.mark.parametrize(
    "overrides",
    [
        {"mobility": {"v_min": 30.0, "v_max": 20.0}},
        {"radio": {"transmission_range": 0}},
        {"radio": {"timestamp_noise_sigma": -1e-9}},
        {"trust": {"threshold": 1.5}},
        {"trust": {"honest_trust": [0.9, 0.2]}},
        {"attackers": {"fraction": 1.0}},
        {"attackers": {"fraction": 0.2, "script": []}},
        {"attackers": {"script": [{"behavior": "replay_tod"}]}},
        {"attackers": {"script": [{"behavior": "hide", "sector": 7}]}},
        {"ranging": {"packets": 0}},
    ],
)
def test_invalid_values_rejected(overrides):
    with pytest.raises(ConfigError):
        build_config(overrides)


@pytest.mark.parametrize(
    "weights",
    [
        [0.25, 0.25, 0.25, 0.25],  # w1 == w2
        [0.5, 0.2, 0.2, 0.2],  # sums above 1
        [0.4, 0.25, 0.2, 0.15],  # w2 != w3
    ],
)
def test_criteria_weight_ordering(weights):
    with pytest.raises(ConfigError):
        build_config({"elections": {"ocf_weights": weights}})


def test_valid_overrides_merge_deeply():
    config = build_config({"radio": {"timestamp_noise_sigma": 1e-9}}, preset="small")
    assert config.radio.timestamp_noise_sigma == 1e-9
    assert config.radio.transmission_range == 300.0
    assert config.bounds.width == 400.0


def test_stability_scale_defaults_to_top_speed():
    config = build_config(preset="small")
    assert config.elections.mobility_scale is None
    assert config.stability_scale == config.mobility.v_max
    raw = build_config({"elections": {"mobility_scale": 1.0}}, preset="small")
    assert raw.stability_scale == 1.0
    with pytest.raises(ConfigError):
        build_config({"elections": {"mobility_scale": 0}})


def test_attack_script_parsed():
    config = build_config(
        {
            "attackers": {
                "fraction": 0.25,
                "script": [
                    {"behavior": "drop_packets", "ratio": 0.5},
                    {"start_t": 20, "behavior": "hide", "sector": 2},
                ],
            }
        }
    )
    steps = config.attackers.script
    assert [s.behavior for s in steps] == [AttackBehavior.DROP_PACKETS, AttackBehavior.HIDE]
    assert steps[1].start_t == 20.0


def test_config_is_frozen():
    config = build_config(preset="small")
    with pytest.raises(Exception):
        config.seed = 99
    assert config.with_seed(99).seed == 99


def test_load_config_from_file(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"duration": 30.0, "seeds": [1, 2]}), encoding="utf-8")
    config = load_config(path, small=True, seed=5)
    assert isinstance(config, ScenarioConfig)
    assert config.duration == 30.0
    assert config.seed == 5
    assert config.seeds == [1, 2]
    assert config.clusters == 2


def test_load_config_without_path():
    assert load_config().total_nodes == 560


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.json")


def test_load_config_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{clusters: 3", encoding="utf-8")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(path)


def test_load_config_not_an_object(tmp_path):
    path = tmp_path / "list.json"
    path.write_text("[1, 2, 3]", encoding="utf-8")
    with pytest.raises(ConfigError, match="JSON object"):
        load_config(path)
