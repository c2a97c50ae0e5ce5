"""FIPA-style communication ontology: concept, predicate and action schemas.

Text format (``#`` starts a comment)::

    concept MissionBrief {
      missionId: id mandatory
      status: string mandatory
    }
    predicate Inheritance(UAV, UV)
    predicate Collaboration(Operator, MCC) : commands
    action Operator send MissionBrief to MCC
    action MCC receive MissionBrief from Operator

Slot types reuse the model's semantic type tags. Concepts are flat: a slot
whose type names another concept is rejected.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping

from amdd.errors import OntologyError, ParseError
from amdd.model import RelationshipKind, SystemModel, is_identifier, is_type_tag, value_matches_type


class PredicateKind(str, Enum):
    INHERITANCE = "Inheritance"
    COMPOSITION = "Composition"
    AGGREGATION = "Aggregation"
    COLLABORATION = "Collaboration"


_KIND_ORDER = {k: i for i, k in enumerate(PredicateKind)}

_FROM_RELATIONSHIP = {
    RelationshipKind.INHERITANCE: PredicateKind.INHERITANCE,
    RelationshipKind.COMPOSITION: PredicateKind.COMPOSITION,
    RelationshipKind.AGGREGATION: PredicateKind.AGGREGATION,
    RelationshipKind.ASSOCIATION: PredicateKind.COLLABORATION,
}


class Direction(str, Enum):
    SEND = "send"
    RECEIVE = "receive"

    @property
    def preposition(self) -> str:
        return "to" if self is Direction.SEND else "from"


@dataclass(frozen=True)
class Slot:
    name: str
    type: str
    mandatory: bool = False


@dataclass(frozen=True)
class ConceptSchema:
    name: str
    slots: tuple[Slot, ...]

    def slot(self, name: str) -> Slot | None:
        return next((s for s in self.slots if s.name == name), None)

    @property
    def mandatory(self) -> frozenset[str]:
        return frozenset(s.name for s in self.slots if s.mandatory)

    @property
    def slot_names(self) -> frozenset[str]:
        return frozenset(s.name for s in self.slots)


@dataclass(frozen=True)
class PredicateSchema:
    kind: PredicateKind
    source: str
    target: str
    relation: str | None = None

    @property
    def name(self) -> str:
        base = f"{self.kind.value}_{self.source}_{self.target}"
        return f"{base}_{self.relation}" if self.relation else base

    @property
    def roles(self) -> tuple[str, str]:
        return (self.source, self.target)

    def sort_key(self) -> tuple:
        return (_KIND_ORDER[self.kind], self.source, self.target, self.relation or "")


@dataclass(frozen=True)
class ActionSchema:
    actor: str
    direction: Direction
    payload: str
    counterparty: str

    @property
    def name(self) -> str:
        return f"{self.actor}_{self.direction.value}_{self.payload}_{self.counterparty}"

    def mirror(self) -> ActionSchema:
        flipped = Direction.RECEIVE if self.direction is Direction.SEND else Direction.SEND
        return ActionSchema(self.counterparty, flipped, self.payload, self.actor)


@dataclass(frozen=True)
class OntologyRegistry:
    """Name-indexed schema collections, in declaration order."""

    concepts: Mapping[str, ConceptSchema] = field(default_factory=dict)
    predicates: Mapping[str, PredicateSchema] = field(default_factory=dict)
    actions: Mapping[str, ActionSchema] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for a in self.actions.values():
            if a.payload not in self.concepts:
                raise OntologyError(f"action {a.name} carries unknown concept {a.payload!r}")

    def is_empty(self) -> bool:
        return not (self.concepts or self.predicates or self.actions)

    def schema_names(self) -> list[str]:
        return [*self.concepts, *self.predicates, *self.actions]

    def actions_of(self, actor: str) -> list[ActionSchema]:
        return [a for a in self.actions.values() if a.actor == actor]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OntologyRegistry):
            return NotImplemented
        return (dict(self.concepts), dict(self.predicates), dict(self.actions)) == (
            dict(other.concepts), dict(other.predicates), dict(other.actions))

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class ContentInstance:
    concept: str
    slots: Mapping[str, Any] = field(default_factory=dict)


class ViolationKind(str, Enum):
    MISSING_MANDATORY = "missing-mandatory"
    UNKNOWN_SLOT = "unknown-slot"
    TYPE_MISMATCH = "type-mismatch"
    UNKNOWN_CONCEPT = "unknown-concept"


@dataclass(frozen=True)
class ContentViolation:
    kind: ViolationKind
    concept: str
    slot: str | None
    message: str


# --------------------------------------------------------------------------
# Parsing and rendering

_CONCEPT_RE = re.compile(r"concept\s+(\w+)\s*\{\s*(.*)$")
_SLOT_RE = re.compile(r"(\w+)\s*:\s*(.+?)(?:\s+(mandatory|optional))?$")
_PREDICATE_RE = re.compile(r"predicate\s+(\w+)\s*\(\s*(\w+)\s*,\s*(\w+)\s*\)(?:\s*:\s*(\w+))?$")
_ACTION_RE = re.compile(r"action\s+(\w+)\s+(send|receive)\s+(\w+)\s+(to|from)\s+(\w+)$")


def parse_ontology(text: str, origin: str = "<inline>") -> OntologyRegistry:
    """Parse ``.onto`` text into a registry.

    Raises :class:`ParseError` on syntax errors, duplicate names, nested or
    mandatory-free concepts, and actions whose payload is not a declared concept.
    """
    concepts: dict[str, ConceptSchema] = {}
    predicates: dict[str, PredicateSchema] = {}
    actions: dict[str, ActionSchema] = {}
    pending: list[tuple[int, int, ActionSchema]] = []
    current: tuple[str, int, list[Slot]] | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        col = len(raw) - len(raw.lstrip()) + 1
        if not line:
            continue

        def fail(message: str) -> ParseError:
            return ParseError(message, lineno, col, origin)

        if current is not None:
            if _concept_body(line, current, concepts, fail):
                current = None
            continue

        if m := _CONCEPT_RE.match(line):
            name, rest = m.groups()
            if name in concepts:
                raise fail(f"duplicate concept {name!r}")
            current = (name, lineno, [])
            if rest.strip() and _concept_body(rest.strip(), current, concepts, fail):
                current = None
        elif m := _PREDICATE_RE.match(line):
            kind_text, source, target, relation = m.groups()
            try:
                kind = PredicateKind(kind_text)
            except ValueError:
                raise fail(f"unknown predicate kind {kind_text!r}") from None
            pred = PredicateSchema(kind, source, target, relation)
            if pred.name in predicates:
                raise fail(f"duplicate predicate {pred.name!r}")
            predicates[pred.name] = pred
        elif m := _ACTION_RE.match(line):
            actor, direction, payload, prep, counterparty = m.groups()
            d = Direction(direction)
            if prep != d.preposition:
                raise fail(f"'{direction}' takes '{d.preposition}', not '{prep}'")
            act = ActionSchema(actor, d, payload, counterparty)
            if act.name in actions:
                raise fail(f"duplicate action {act.name!r}")
            actions[act.name] = act
            pending.append((lineno, col, act))
        else:
            raise fail(f"cannot parse {line!r}")

    if current is not None:
        raise ParseError(f"concept {current[0]!r} is not closed", current[1], 1, origin)
    for lineno, col, act in pending:
        if act.payload not in concepts:
            raise ParseError(f"action payload {act.payload!r} is not a declared concept", lineno, col, origin)
    return OntologyRegistry(concepts, predicates, actions)


def _concept_body(line: str, current: tuple[str, int, list[Slot]],
                  concepts: dict[str, ConceptSchema], fail) -> bool:
    """Consume one line of a concept body; True once the closing brace is seen."""
    name, start, slots = current
    closing = line.endswith("}")
    body = line[:-1] if closing else line
    for part in filter(None, (p.strip() for p in body.split(";"))):
        slots.append(_parse_slot(part, slots, concepts, fail))
    if closing:
        if not any(s.mandatory for s in slots):
            raise fail(f"concept {name!r} needs at least one mandatory slot")
        concepts[name] = ConceptSchema(name, tuple(slots))
    return closing


def _parse_slot(text: str, seen: list[Slot], concepts: Mapping[str, ConceptSchema], fail) -> Slot:
    m = _SLOT_RE.match(text)
    if not m:
        raise fail(f"cannot parse slot {text!r}")
    name, type_tag, flag = m.groups()
    if any(s.name == name for s in seen):
        raise fail(f"duplicate slot {name!r}")
    if type_tag.rstrip("*") in concepts:
        raise fail(f"slot {name!r} nests concept {type_tag!r}; concepts are flat")
    if not is_type_tag(type_tag):
        raise fail(f"unknown slot type {type_tag!r}")
    return Slot(name, type_tag, flag == "mandatory")


def render_ontology(reg: OntologyRegistry) -> str:
    lines: list[str] = []
    for c in reg.concepts.values():
        lines.append(f"concept {c.name} {{")
        for s in c.slots:
            lines.append(f"  {s.name}: {s.type}" + (" mandatory" if s.mandatory else ""))
        lines.append("}")
    for p in reg.predicates.values():
        suffix = f" : {p.relation}" if p.relation else ""
        lines.append(f"predicate {p.kind.value}({p.source}, {p.target}){suffix}")
    for a in reg.actions.values():
        lines.append(f"action {a.actor} {a.direction.value} {a.payload} {a.direction.preposition} {a.counterparty}")
    return "".join(line + "\n" for line in lines)


# --------------------------------------------------------------------------
# Operations


def validate_content(reg: OntologyRegistry, inst: ContentInstance) -> list[ContentViolation]:
    """Schema violations of one message payload; empty when it conforms."""
    schema = reg.concepts.get(inst.concept)
    if schema is None:
        return [ContentViolation(ViolationKind.UNKNOWN_CONCEPT, inst.concept, None,
                                 f"no concept named {inst.concept!r}")]
    out: list[ContentViolation] = []
    for s in schema.slots:
        if s.mandatory and inst.slots.get(s.name) is None:
            out.append(ContentViolation(ViolationKind.MISSING_MANDATORY, inst.concept, s.name,
                                        f"mandatory slot {s.name!r} is missing"))
    for name, value in inst.slots.items():
        slot = schema.slot(name)
        if slot is None:
            out.append(ContentViolation(ViolationKind.UNKNOWN_SLOT, inst.concept, name,
                                        f"{inst.concept} has no slot {name!r}"))
        elif value is not None and not value_matches_type(value, slot.type):
            out.append(ContentViolation(ViolationKind.TYPE_MISMATCH, inst.concept, name,
                                        f"{value!r} is not a {slot.type}"))
    return out


def derive_predicates(model: SystemModel) -> list[PredicateSchema]:
    """One predicate per relationship, ordered by (kind, source, target)."""
    preds = [
        PredicateSchema(_FROM_RELATIONSHIP[r.kind], r.source, r.target, r.name)
        for r in model.relationships
    ]
    return sorted(preds, key=PredicateSchema.sort_key)


def check_action_conformance(reg: OntologyRegistry, sender: str, receiver: str, concept: str) -> bool:
    """True iff ``sender`` may send ``concept`` to ``receiver`` and the receiver may accept it."""
    send = ActionSchema(sender, Direction.SEND, concept, receiver)
    return send.name in reg.actions and send.mirror().name in reg.actions


def registry_issues(reg: OntologyRegistry, model: SystemModel) -> list[str]:
    """Cross-references from ``reg`` into ``model`` that do not resolve."""
    issues: list[str] = []
    derived = {p.name for p in derive_predicates(model)}
    for p in reg.predicates.values():
        for role in p.roles:
            if model.get_class(role) is None:
                issues.append(f"predicate {p.name}: unknown class {role!r}")
        if all(model.get_class(r) for r in p.roles) and p.name not in derived:
            issues.append(f"predicate {p.name}: no matching relationship in the model")
    for a in reg.actions.values():
        for role in (a.actor, a.counterparty):
            if model.get_class(role) is None:
                issues.append(f"action {a.name}: unknown class {role!r}")
        if a.mirror().name not in reg.actions:
            issues.append(f"action {a.name}: no mirror {a.mirror().name}")
    return issues


def bind_registry(reg: OntologyRegistry, model: SystemModel) -> OntologyRegistry:
    """Return ``reg`` unchanged after checking it against ``model``."""
    issues = registry_issues(reg, model)
    if issues:
        raise OntologyError("; ".join(issues))
    return reg


def registry_from(concepts: Iterable[ConceptSchema] = (), predicates: Iterable[PredicateSchema] = (),
                  actions: Iterable[ActionSchema] = ()) -> OntologyRegistry:
    """Build a registry from schema lists, rejecting duplicate names."""
    out: list[dict] = []
    for items in (concepts, predicates, actions):
        table: dict = {}
        for item in items:
            if item.name in table:
                raise OntologyError(f"duplicate schema name {item.name!r}")
            if not is_identifier(item.name):
                raise OntologyError(f"schema name {item.name!r} is not an identifier")
            table[item.name] = item
        out.append(table)
    return OntologyRegistry(*out)
