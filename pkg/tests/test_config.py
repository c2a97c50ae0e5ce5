from __future__ import annotations

import pytest

from amdd.config import ConfigError, load_config, load_pipeline, sim_config_from, with_uv_count
from amdd.fixtures import uvf_path
from amdd.sim import SimConfig


def write(tmp_path, text):
    path = tmp_path / "amdd.toml"
    path.write_text(text)
    return path


def test_packaged_config():
    cfg = load_config(uvf_path("amdd.toml"))
    assert cfg.class_diagram == uvf_path("amdd.toml").resolve().parent / "uvf_class.puml"
    assert cfg.generation.include_ontology and cfg.generation.dialect == "jade-like"
    assert cfg.llm is not None and cfg.llm.model == "gpt-4"
    assert cfg.simulation == SimConfig(uv_count=2)
    pipe = load_pipeline(cfg)
    assert pipe.registry is not None and len(pipe.bound) > 0


def test_defaults_and_output_dir(tmp_path):
    cfg = load_config(write(tmp_path, ""))
    assert cfg.class_diagram is None and cfg.llm is None and cfg.ontology is None
    assert cfg.output_dir == tmp_path / "out"
    assert load_config(write(tmp_path, '[output]\ndir = "build"\n')).output_dir == tmp_path / "build"
    assert load_config(write(tmp_path, ""), default_output=tmp_path / "x").output_dir == tmp_path / "x"


@pytest.mark.parametrize("text,needle", [
    ("[model\n", "amdd.toml"),
    ("model = 3\n", "[model]"),
    ("[model]\nstate = [1, 2]\n", "model.state"),
    ('[llm]\nmodel = "m"\n', "base_url"),
    ("[simulation]\nuv_count = -1\n", "uv_count"),
    ("[simulation]\nuv_count = 2\navailability = [true]\n", "availability"),
    ('[generation]\ndialect = ""\n', "amdd.toml"),
])
def test_config_errors(tmp_path, text, needle):
    with pytest.raises(ConfigError, match=needle.replace("[", r"\[").replace("]", r"\]")):
        load_config(write(tmp_path, text))


def test_missing_config(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.toml")


def test_missing_input_named(tmp_path):
    cfg = load_config(write(tmp_path, '[model]\nclass = "nowhere.puml"\n'))
    with pytest.raises(ConfigError, match="nowhere.puml"):
        load_pipeline(cfg)


def test_sim_config_masks():
    cfg = sim_config_from({"uv_count": 3, "availability": [1, 0, 1], "seed": 4})
    assert cfg.availability == (True, False, True) and cfg.seed == 4


def test_with_uv_count():
    base = SimConfig(uv_count=2, availability=(True, False), seed=3)
    assert with_uv_count(base, None, None) == base
    grown = with_uv_count(base, 4, None)
    assert grown.uv_count == 4 and grown.availability == (True,) * 4 and grown.seed == 3
    assert with_uv_count(base, 2, 9).availability == (True, False)
    assert with_uv_count(base, None, 9).seed == 9
    assert with_uv_count(base, 3, None, (1, 3)).controlled == (True, False, True)


@pytest.mark.parametrize("indices", [(0,), (3,), (1, 5)])
def test_with_uv_count_range(indices):
    with pytest.raises(ConfigError, match="out of range"):
        with_uv_count(SimConfig(uv_count=2), None, None, indices)
