"""Project configuration (one TOML file) and pipeline loading.

Relative paths are resolved against the directory holding the config file::

    [model]
    name = "UVF"
    class = "uvf_class.puml"
    state = ["uv_state.puml"]
    activity = ["uvf_activity.puml"]
    constraints = "uvf.ocl"
    ontology = "uvf.onto"

    [generation]
    dialect = "jade-like"
    ontology = true

    [simulation]
    uv_count = 2
    seed = 0

    [output]
    dir = "out"
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from amdd.codegen.base import GenerationConfig
from amdd.codegen.llm import LlmEndpointConfig
from amdd.errors import AmddError, ModelError
from amdd.model import SystemModel, validate_model
from amdd.ocl import BoundConstraints, bind, parse_constraints
from amdd.ontology import OntologyRegistry, parse_ontology, registry_issues
from amdd.plantuml import DiagramKind, DiagramSource, parse_model
from amdd.sim import SimConfig


class ConfigError(AmddError):
    """The project configuration is missing, unreadable or refers to missing files."""


@dataclass(frozen=True)
class ProjectConfig:
    base_dir: Path
    class_diagram: Path | None
    state_diagrams: tuple[Path, ...] = ()
    activity_diagrams: tuple[Path, ...] = ()
    constraints: Path | None = None
    ontology: Path | None = None
    model_name: str = ""
    version: str = ""
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    llm: LlmEndpointConfig | None = None
    simulation: SimConfig = field(default_factory=SimConfig)
    output_dir: Path = Path("out")

    def input_paths(self) -> list[Path]:
        paths = [self.class_diagram, *self.state_diagrams, *self.activity_diagrams,
                 self.constraints, self.ontology]
        return [p for p in paths if p is not None]


def _paths(base: Path, value: Any, key: str) -> tuple[Path, ...]:
    if value is None:
        return ()
    items = [value] if isinstance(value, str) else value
    if not isinstance(items, list) or not all(isinstance(v, str) for v in items):
        raise ConfigError(f"{key} must be a path or a list of paths")
    return tuple((base / v) for v in items)


def _table(data: dict, name: str) -> dict:
    value = data.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{name}] must be a table")
    return value


def load_config(path: Path, default_output: Path | None = None) -> ProjectConfig:
    """Read a project TOML file. ``default_output`` applies when it sets no [output] dir."""
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"{path}: config file not found") from None
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    base = path.resolve().parent
    model = _table(data, "model")
    gen = _table(data, "generation")
    llm = _table(data, "llm")
    sim = _table(data, "simulation")
    out = _table(data, "output")
    classes = _paths(base, model.get("class"), "model.class")
    try:
        generation = GenerationConfig(
            dialect=str(gen.get("dialect", "jade-like")),
            include_ontology=bool(gen.get("ontology", True)),
            backend=str(gen.get("backend", "template")),
            seed=int(gen.get("seed", 0)),
        )
        endpoint = None
        if llm:
            endpoint = LlmEndpointConfig(
                base_url=str(llm["base_url"]),
                model=str(llm["model"]),
                temperature=float(llm.get("temperature", 0.0)),
                max_retries=int(llm.get("max_retries", 3)),
                timeout=float(llm.get("timeout", 120.0)),
                backoff=float(llm.get("backoff", 1.0)),
            )
        simulation = sim_config_from(sim)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if "dir" in out:
        output_dir = base / str(out["dir"])
    else:
        output_dir = default_output or base / "out"
    return ProjectConfig(
        base_dir=base,
        class_diagram=classes[0] if classes else None,
        state_diagrams=_paths(base, model.get("state"), "model.state"),
        activity_diagrams=_paths(base, model.get("activity"), "model.activity"),
        constraints=(_paths(base, model.get("constraints"), "model.constraints") or (None,))[0],
        ontology=(_paths(base, model.get("ontology"), "model.ontology") or (None,))[0],
        model_name=str(model.get("name", "")),
        version=str(model.get("version", "")),
        generation=generation,
        llm=endpoint,
        simulation=simulation,
        output_dir=output_dir,
    )


def sim_config_from(table: dict) -> SimConfig:
    def mask(key: str) -> tuple[bool, ...] | None:
        value = table.get(key)
        return None if value is None else tuple(bool(v) for v in value)

    return SimConfig(
        uv_count=int(table.get("uv_count", 2)),
        availability=mask("availability"),
        registration=mask("registration"),
        controlled=mask("controlled"),
        seed=int(table.get("seed", 0)),
        score_model=str(table.get("score_model", "linear-mod")),
        success_threshold=float(table.get("success_threshold", 50.0)),
    )


def with_uv_count(cfg: SimConfig, uv_count: int | None, seed: int | None,
                  controlled: tuple[int, ...] = ()) -> SimConfig:
    """Apply command-line overrides; masks are reset when the fleet size changes."""
    if uv_count is not None and uv_count != cfg.uv_count:
        cfg = SimConfig(uv_count, None, None, cfg.seed, cfg.score_model, None, cfg.success_threshold,
                        cfg.mission_id)
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if controlled:
        bad = [i for i in controlled if not 1 <= i <= cfg.uv_count]
        if bad:
            raise ConfigError(f"--controlled index out of range 1..{cfg.uv_count}: {bad}")
        mask = tuple(cfg.controlled[i - 1] or (i in controlled) for i in range(1, cfg.uv_count + 1))
        cfg = replace(cfg, controlled=mask)
    return cfg


# --------------------------------------------------------------------------
# Loading the pipeline inputs


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"{path}: file not found") from None
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_model(cfg: ProjectConfig) -> SystemModel:
    sources: list[DiagramSource] = []
    if cfg.class_diagram is not None:
        sources.append(DiagramSource(DiagramKind.CLASS, _read(cfg.class_diagram), str(cfg.class_diagram)))
    sources += [DiagramSource(DiagramKind.STATE, _read(p), str(p)) for p in cfg.state_diagrams]
    sources += [DiagramSource(DiagramKind.ACTIVITY, _read(p), str(p)) for p in cfg.activity_diagrams]
    model = parse_model(sources, cfg.model_name, cfg.version)
    report = validate_model(model)
    if report.errors:
        lines = [f"{i.location}: {i.message}" for i in report.errors]
        raise ModelError("model is invalid:\n  " + "\n  ".join(lines))
    return model


def load_constraints(cfg: ProjectConfig, model: SystemModel) -> BoundConstraints:
    if cfg.constraints is None:
        return bind(parse_constraints(""), model)
    return bind(parse_constraints(_read(cfg.constraints), str(cfg.constraints)), model)


def load_ontology(cfg: ProjectConfig, model: SystemModel) -> OntologyRegistry | None:
    if cfg.ontology is None:
        return None
    reg = parse_ontology(_read(cfg.ontology), str(cfg.ontology))
    issues = registry_issues(reg, model)
    if issues:
        raise ConfigError(f"{cfg.ontology}: " + "; ".join(issues))
    return reg


@dataclass(frozen=True)
class Pipeline:
    model: SystemModel
    bound: BoundConstraints
    registry: OntologyRegistry | None


def load_pipeline(cfg: ProjectConfig) -> Pipeline:
    for p in cfg.input_paths():
        if not p.is_file():
            raise ConfigError(f"{p}: file not found")
    model = load_model(cfg)
    return Pipeline(model, load_constraints(cfg, model), load_ontology(cfg, model))
