"""Generation configuration and results shared by both backends."""

from __future__ import annotations

from dataclasses import dataclass

from amdd.codegen.ir import AgentProgramIR

DIALECT_EXTENSIONS = {"jade-like": "java", "pade-like": "py"}


@dataclass(frozen=True)
class GenerationConfig:
    dialect: str = "jade-like"
    include_ontology: bool = True
    backend: str = "template"
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.dialect:
            raise ValueError("dialect must be non-empty")
        if self.backend not in ("template", "llm"):
            raise ValueError(f"unknown backend {self.backend!r}")

    @property
    def extension(self) -> str:
        return DIALECT_EXTENSIONS.get(self.dialect, "txt")

    @property
    def variant(self) -> str:
        """Directory-friendly name of the constraint configuration."""
        return "ocl_ontology" if self.include_ontology else "ocl"


@dataclass(frozen=True)
class SourceUnit:
    filename: str
    text: str


@dataclass(frozen=True)
class GenerationResult:
    programs: tuple[AgentProgramIR, ...] = ()
    source_units: tuple[SourceUnit, ...] | None = None
    backend_log: str = ""

    def program(self, name: str) -> AgentProgramIR | None:
        return next((p for p in self.programs if p.agent_name == name), None)
