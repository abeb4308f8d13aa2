import json
import math
from pathlib import Path

import pytest

from stadium_decay.config import (
    RunConfig,
    Task,
    apply_overrides,
    config_hash,
    load_config,
    parse_config,
)
from stadium_decay.damping import DampingKind
from stadium_decay.exceptions import ConfigError
from stadium_decay.geometry import Shape

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def test_defaults_describe_the_wing_stadium():
    config = parse_config({"task": "sweep"})
    assert config.task is Task.SWEEP
    assert config.domain.shape is Shape.STADIUM
    assert config.damping.kind is DampingKind.WING_CONTINUOUS
    assert config.sweep.window == (5.0, math.inf)
    spec = config.domain.to_spec()
    assert spec.Ly == pytest.approx(2 * config.domain.beta)


def test_rectangle_spec_keeps_its_height():
    config = parse_config({"task": "mesh-info", "domain": {"shape": "rectangle", "Lx": 2.0, "Ly": 3.0, "h": 0.1}})
    mesh = config.domain.build()
    assert mesh.is_rectangle
    assert mesh.spec.Ly == pytest.approx(3.0)


@pytest.mark.parametrize(
    "data",
    [
        {"task": "sweep", "colour": "blue"},
        {"task": "sweep", "domain": {"radius": 1.0}},
        {"task": "fly"},
        {},
        {"task": "sweep", "sweep": {"lambdas": [5.0, 4.0]}},
        {"task": "sweep", "sweep": {"compare_orders": [8]}},
        {"task": "spectrum", "spectrum": {"lower_halfplane": [[0.0, 1.0]]}},
        {"task": "lemma31", "lemma31": {"orders": [2]}},
        {"task": "sweep", "jobs": 0},
        {"task": "sweep", "domain": {"beta": 0.0}},
    ],
)
def test_invalid_configurations(data):
    with pytest.raises(ConfigError):
        parse_config(data)


def test_error_message_names_the_field():
    with pytest.raises(ConfigError, match="domain.h"):
        parse_config({"task": "sweep", "domain": {"h": -1}})


def test_overrides_are_decoded_and_revalidated():
    config = parse_config({"task": "sweep"})
    updated = apply_overrides(config, {"domain.h": "0.02", "sweep.generator": "true", "output_dir": "out/a"})
    assert updated.domain.h == 0.02
    assert updated.sweep.generator is True
    assert updated.output_dir == "out/a"
    assert config.domain.h == 0.05
    with pytest.raises(ConfigError):
        apply_overrides(config, {"domain.radius": "1"})
    with pytest.raises(ConfigError):
        apply_overrides(config, {"mesh.h": "1"})
    with pytest.raises(ConfigError):
        apply_overrides(config, {"domain.h": "-0.1"})


def test_config_hash_is_stable():
    first = parse_config({"task": "evolve", "evolve": {"T": 10}})
    second = parse_config({"evolve": {"T": 10.0}, "task": "evolve"})
    assert config_hash(first) == config_hash(second)
    assert len(config_hash(first)) == 64
    assert config_hash(first) != config_hash(apply_overrides(first, {"evolve.T": 11}))


def test_load_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"domain": {"h": 0.1}}))
    config = load_config(path, task="mesh-info")
    assert isinstance(config, RunConfig)
    assert config.task is Task.MESH_INFO
    assert config.domain.h == 0.1
    with pytest.raises(ConfigError):
        load_config(path)


@pytest.mark.parametrize("content", ["{not json", "[1, 2]"])
def test_load_config_rejects_bad_files(tmp_path, content):
    path = tmp_path / "bad.json"
    path.write_text(content)
    with pytest.raises(ConfigError):
        load_config(path, task="sweep")


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.json", task="sweep")


def test_damping_builder_dispatch(coarse_stadium):
    config = parse_config({"task": "sweep", "damping": {"kind": "smooth_order_m", "m": 6, "delta": 0.2}})
    profile = config.damping.build(coarse_stadium)
    assert profile.kind is DampingKind.SMOOTH_ORDER_M
    assert profile.m == 6
    assert config.damping.build(coarse_stadium, m=8).m == 8
    constant = parse_config({"task": "sweep", "damping": {"kind": "constant", "value": 0.0}})
    assert constant.damping.build(coarse_stadium).a_max == 0.0


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_parse(path):
    config = load_config(path)
    assert config.task.value == json.loads(path.read_text())["task"]


@pytest.mark.parametrize("name", ["sweep_smooth_m", "r0_smooth_m"])
def test_smooth_m_configs_use_narrow_transition(name):
    config = load_config(CONFIG_DIR / f"{name}.json")
    assert config.damping.delta == pytest.approx(0.1)
    assert config.sweep.residual_bound == pytest.approx(0.2)
