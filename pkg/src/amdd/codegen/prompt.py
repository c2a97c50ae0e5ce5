"""Three-layer prompt assembly: structure, behaviour, constraints."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from amdd.codegen.base import GenerationConfig
from amdd.errors import GenerationError
from amdd.model import SystemModel
from amdd.ocl import BoundConstraints
from amdd.ontology import OntologyRegistry, render_ontology
from amdd.plantuml import render_activity_diagram, render_class_diagram, render_state_diagram

_DIALECT_NOTES = {
    "jade-like": "Java agents in the style of JADE: one Agent subclass per class, behaviours for "
                 "message handling, ACLMessage for communication.",
    "pade-like": "Python agents in the style of PADE: one Agent subclass per class, protocol "
                 "handlers for message exchange, ACLMessage for communication.",
}


@dataclass(frozen=True)
class PromptBundle:
    structural: str
    behavioral: str
    constraints: str
    directives: str
    checksum: str

    def sections(self) -> dict[str, str]:
        return {
            "structural": self.structural,
            "behavioral": self.behavioral,
            "constraints": self.constraints,
            "directives": self.directives,
        }

    def text(self) -> str:
        """The whole prompt as one document."""
        parts = [f"## {name.upper()}\n\n{body}" for name, body in self.sections().items()]
        return "\n".join(parts)


def _digest(sections: list[str]) -> str:
    h = hashlib.sha256()
    for s in sections:
        h.update(s.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


def _structural(model: SystemModel) -> str:
    lines = ["Agent classes:"]
    for c in model.classes:
        extra = f" (drawn as {c.label})" if c.label else ""
        lines.append(f"- {c.name}{extra}" + (" [abstract]" if c.is_abstract else ""))
    lines.append("")
    lines.append("Relationships:")
    for r in model.relationships:
        ends = f"{r.source} -> {r.target}"
        if r.source_cardinality or r.target_cardinality:
            ends += f" [{r.source_cardinality or ''} : {r.target_cardinality or ''}]"
        name = f"{r.name}: " if r.name else ""
        lines.append(f"- {name}{r.kind.value} {ends}")
    lines.append("")
    lines.append("Class diagram:")
    lines.append(render_class_diagram(model.classes, model.relationships, model.model_name))
    return "\n".join(lines)


def _behavioral(model: SystemModel) -> str:
    parts: list[str] = []
    for sm in model.state_machines:
        parts.append(f"State machine of {sm.owner_class}:\n{render_state_diagram(sm)}")
    for i, flow in enumerate(model.activities, start=1):
        parts.append(f"Activity flow {i}:\n{render_activity_diagram(flow)}")
    return "\n".join(parts) if parts else "No behavioural diagrams.\n"


def _constraints(bound: BoundConstraints, reg: OntologyRegistry | None) -> str:
    lines = ["OCL constraints (kind, name, definition):"]
    for c in bound:
        lines.append(f"- [{c.kind.value}] {c.name}: {c.render()}")
    if not len(bound):
        lines.append("- none")
    if reg is not None:
        lines.append("")
        lines.append("Communication ontology schemas:")
        lines.append("- concepts: " + ", ".join(reg.concepts))
        lines.append("- predicates: " + ", ".join(reg.predicates))
        lines.append("- actions: " + ", ".join(reg.actions))
        lines.append("")
        lines.append(render_ontology(reg))
    return "\n".join(lines)


def _directives(cfg: GenerationConfig, with_ontology: bool) -> str:
    target = _DIALECT_NOTES.get(cfg.dialect, f"Agents for the '{cfg.dialect}' framework.")
    lines = [
        f"Target: {target}",
        "Produce one agent program per concrete agent class in the structural layer.",
        "Realise every state machine transition and every activity flow message.",
        "Check each precondition before the operation runs and each postcondition after it.",
    ]
    if with_ontology:
        lines.append("Validate every incoming message against its concept schema; answer invalid "
                     "content with a not-understood reply.")
    lines.append(
        f"Return each file as a fenced code block preceded by a line '// File: <name>.{cfg.extension}'."
    )
    return "\n".join(lines) + "\n"


def assemble_prompt(model: SystemModel, bound: BoundConstraints, reg: OntologyRegistry | None,
                    cfg: GenerationConfig) -> PromptBundle:
    """Build the prompt bundle; ``reg`` is used only when ``cfg.include_ontology`` is set."""
    if model.is_empty:
        raise GenerationError("cannot build a prompt for an empty model")
    if bound.model_checksum != model.checksum():
        raise GenerationError("constraints were bound to a different model")
    use_reg = reg if cfg.include_ontology else None
    sections = [
        _structural(model),
        _behavioral(model),
        _constraints(bound, use_reg),
        _directives(cfg, use_reg is not None),
    ]
    return PromptBundle(*sections, checksum=_digest(sections))
