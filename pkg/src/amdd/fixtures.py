"""Packaged UV-fleet reference model and analysis fixtures."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from pathlib import Path

from amdd.model import SystemModel
from amdd.plantuml import DiagramKind, DiagramSource, parse_model

UVF_DIAGRAMS = (
    (DiagramKind.CLASS, "uvf_class.puml"),
    (DiagramKind.STATE, "uv_state.puml"),
    (DiagramKind.ACTIVITY, "uvf_activity.puml"),
)


def data_dir() -> Path:
    """Directory holding the packaged data files."""
    return Path(str(resources.files("amdd") / "data"))


def uvf_path(name: str) -> Path:
    return data_dir() / "uvf" / name


def uvf_sources() -> list[DiagramSource]:
    return [DiagramSource.from_file(kind, uvf_path(name)) for kind, name in UVF_DIAGRAMS]


@lru_cache(maxsize=1)
def uvf_model() -> SystemModel:
    """The UV-fleet system model parsed from the packaged diagrams."""
    return parse_model(uvf_sources(), model_name="UVF", version="1")


def uvf_constraints_text() -> str:
    return uvf_path("uvf.ocl").read_text(encoding="utf-8")


def uvf_ontology_text() -> str:
    return uvf_path("uvf.onto").read_text(encoding="utf-8")
