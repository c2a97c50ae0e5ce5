"""In-memory model IR: agent classes, relationships, state machines, activities.

All values are frozen dataclasses built from tuples, so a model can be shared
read-only between threads. ``SystemModel`` equality is structural: classes and
relationships compare as unordered collections, state and transition order is
significant (the simulator fires the first enabled transition).
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable, Iterator

from amdd.errors import ModelError, ParseError

SCALAR_TYPES = ("id", "string", "integer", "real", "boolean")

_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_ENUM_RE = re.compile(r"^enum\(([^()]*)\)$")


def is_identifier(text: str) -> bool:
    return bool(_IDENT_RE.match(text))


def normalize_name(text: str) -> str:
    """Drop hyphens so ``UVF-Manager`` becomes ``UVFManager``."""
    return text.replace("-", "")


def parse_type_tag(tag: str) -> str:
    """Validate a semantic type tag and return its canonical spelling.

    Accepted: ``id``, ``string``, ``integer``, ``real``, ``boolean``,
    ``enum(a, b, ...)``, each optionally suffixed with ``*`` for a list.
    """
    text = tag.strip()
    is_list = text.endswith("*")
    if is_list:
        text = text[:-1].strip()
    m = _ENUM_RE.match(text)
    if m:
        values = [v.strip() for v in m.group(1).split(",")]
        if not values or not all(is_identifier(v) for v in values):
            raise ValueError(f"malformed enum type {tag!r}")
        if len(set(values)) != len(values):
            raise ValueError(f"duplicate literal in enum type {tag!r}")
        text = "enum(" + ",".join(values) + ")"
    elif text not in SCALAR_TYPES:
        raise ValueError(f"unknown type {tag!r}")
    return text + ("*" if is_list else "")


def is_type_tag(tag: str) -> bool:
    try:
        parse_type_tag(tag)
    except ValueError:
        return False
    return True


def enum_values(tag: str) -> tuple[str, ...] | None:
    m = _ENUM_RE.match(tag.rstrip("*"))
    return tuple(m.group(1).split(",")) if m else None


def value_matches_type(value: Any, tag: str) -> bool:
    """True if a runtime value conforms to a semantic type tag."""
    if tag.endswith("*"):
        return isinstance(value, (list, tuple)) and all(
            value_matches_type(v, tag[:-1]) for v in value
        )
    if tag == "id":
        return isinstance(value, str) and value != ""
    if tag == "string":
        return isinstance(value, str)
    if tag == "boolean":
        return isinstance(value, bool)
    if tag == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if tag == "real":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    literals = enum_values(tag)
    return literals is not None and isinstance(value, str) and value in literals


# --------------------------------------------------------------------------
# Structural layer


@dataclass(frozen=True)
class Attribute:
    name: str
    type: str


@dataclass(frozen=True)
class Parameter:
    name: str
    type: str


@dataclass(frozen=True)
class Method:
    name: str
    parameters: tuple[Parameter, ...] = ()
    returns: str = "void"


@dataclass(frozen=True)
class AgentClass:
    """One agent class. ``label`` keeps a hyphenated display name, if any."""

    name: str
    attributes: tuple[Attribute, ...] = ()
    methods: tuple[Method, ...] = ()
    is_abstract: bool = False
    label: str | None = None

    @property
    def display_name(self) -> str:
        return self.label or self.name

    def attribute(self, name: str) -> Attribute | None:
        for attr in self.attributes:
            if attr.name == name:
                return attr
        return None

    def method(self, name: str) -> Method | None:
        for m in self.methods:
            if m.name == name:
                return m
        return None


@dataclass(frozen=True, order=True)
class Cardinality:
    """Multiplicity ``lower..upper``; ``upper=None`` means unbounded."""

    lower: int
    upper: int | None

    @classmethod
    def parse(cls, text: str) -> Cardinality:
        text = text.strip()
        if text == "*":
            return cls(0, None)
        if re.fullmatch(r"\d+", text):
            return cls(int(text), int(text))
        m = re.fullmatch(r"(\d+)\.\.(\d+|\*)", text)
        if not m:
            raise ValueError(f"malformed cardinality {text!r}")
        lower = int(m.group(1))
        upper = None if m.group(2) == "*" else int(m.group(2))
        if upper is not None and upper < lower:
            raise ValueError(f"cardinality upper bound below lower bound: {text!r}")
        return cls(lower, upper)

    @property
    def is_many(self) -> bool:
        return self.upper is None or self.upper > 1

    def admits(self, count: int) -> bool:
        return count >= self.lower and (self.upper is None or count <= self.upper)

    def __str__(self) -> str:
        if self.upper is None:
            return "*" if self.lower == 0 else f"{self.lower}..*"
        if self.upper == self.lower:
            return str(self.lower)
        return f"{self.lower}..{self.upper}"


class RelationshipKind(str, Enum):
    INHERITANCE = "Inheritance"
    COMPOSITION = "Composition"
    AGGREGATION = "Aggregation"
    ASSOCIATION = "Association"


@dataclass(frozen=True)
class Relationship:
    """A directed relationship. For inheritance ``source`` is the subclass.

    ``name`` is the navigation role from ``source`` to ``target``
    (``self.manages`` in a constraint), optional for inheritance.
    """

    kind: RelationshipKind
    source: str
    target: str
    source_cardinality: Cardinality | None = None
    target_cardinality: Cardinality | None = None
    name: str | None = None

    def sort_key(self) -> tuple:
        return (
            self.kind.value,
            self.source,
            self.target,
            self.name or "",
            str(self.source_cardinality or ""),
            str(self.target_cardinality or ""),
        )


# --------------------------------------------------------------------------
# Behavioural layer


@dataclass(frozen=True)
class State:
    """A state; ``parent`` names the enclosing composite (one level only).

    A composite state is one that other states name as parent; its ``initial``
    names the substate entered by default.
    """

    name: str
    parent: str | None = None
    initial: str | None = None


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    event: str
    guard: str | None = None
    action: str | None = None


@dataclass(frozen=True)
class StateMachine:
    owner_class: str
    states: tuple[State, ...]
    initial: str
    transitions: tuple[Transition, ...] = ()

    def state(self, name: str) -> State | None:
        for s in self.states:
            if s.name == name:
                return s
        return None

    def substates(self, name: str) -> tuple[State, ...]:
        return tuple(s for s in self.states if s.parent == name)

    def path(self, name: str) -> str:
        """Qualified path, e.g. ``Registered.Uncontrolled``."""
        s = self.state(name)
        if s is None:
            raise KeyError(name)
        return f"{s.parent}.{s.name}" if s.parent else s.name

    def enter(self, name: str) -> str:
        """Qualified path reached when entering ``name`` (descends into composites)."""
        s = self.state(name)
        if s is None:
            raise KeyError(name)
        if s.initial is not None:
            return self.path(s.initial)
        return self.path(name)

    def fire(self, current: str, event: str) -> str | None:
        """Qualified target path for ``event`` from ``current``, or None.

        Transitions leaving the leaf are tried before those leaving its
        composite parent; within a level, declaration order decides.
        """
        chain = current.split(".")
        for level in reversed(chain):
            for t in self.transitions:
                if t.source == level and t.event == event:
                    return self.enter(t.target)
        return None


class NodeKind(str, Enum):
    INITIAL = "Initial"
    FINAL = "Final"
    ACTION = "Action"
    DECISION = "Decision"
    MERGE = "Merge"
    FORK = "Fork"
    JOIN = "Join"


@dataclass(frozen=True)
class ActivityNode:
    id: str
    kind: NodeKind
    label: str = ""
    partition: str | None = None


@dataclass(frozen=True)
class ActivityEdge:
    source: str
    target: str
    guard: str | None = None


@dataclass(frozen=True)
class ActivityFlow:
    partitions: tuple[str, ...]
    nodes: tuple[ActivityNode, ...]
    edges: tuple[ActivityEdge, ...]

    def node(self, node_id: str) -> ActivityNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def successors(self, node_id: str) -> list[ActivityEdge]:
        return [e for e in self.edges if e.source == node_id]

    def initial_node(self) -> ActivityNode | None:
        starts = [n for n in self.nodes if n.kind is NodeKind.INITIAL]
        return starts[0] if len(starts) == 1 else None

    def _key(self) -> tuple:
        return (
            self.partitions,
            tuple(sorted(self.nodes, key=lambda n: n.id)),
            tuple(sorted(self.edges, key=lambda e: (e.source, e.target, e.guard or ""))),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ActivityFlow):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())


@dataclass(frozen=True, eq=False)
class SystemModel:
    classes: tuple[AgentClass, ...] = ()
    relationships: tuple[Relationship, ...] = ()
    state_machines: tuple[StateMachine, ...] = ()
    activities: tuple[ActivityFlow, ...] = ()
    model_name: str = ""
    version: str = ""

    def _key(self) -> tuple:
        return (
            tuple(sorted(self.classes, key=lambda c: c.name)),
            tuple(sorted(self.relationships, key=Relationship.sort_key)),
            tuple(sorted(self.state_machines, key=lambda m: m.owner_class)),
            self.activities,
            self.model_name,
            self.version,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SystemModel):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    @property
    def is_empty(self) -> bool:
        return not (self.classes or self.relationships or self.state_machines or self.activities)

    def get_class(self, name: str) -> AgentClass | None:
        for c in self.classes:
            if c.name == name:
                return c
        return None

    def parents(self, name: str) -> list[str]:
        return [
            r.target
            for r in self.relationships
            if r.kind is RelationshipKind.INHERITANCE and r.source == name
        ]

    def ancestors(self, name: str) -> list[str]:
        """``name`` followed by its superclasses, nearest first (cycle-safe)."""
        out: list[str] = []
        todo = [name]
        while todo:
            current = todo.pop(0)
            if current in out:
                continue
            out.append(current)
            todo.extend(self.parents(current))
        return out

    def is_subclass(self, name: str, base: str) -> bool:
        return base in self.ancestors(name)

    def subclasses(self, base: str) -> list[str]:
        return [c.name for c in self.classes if c.name != base and self.is_subclass(c.name, base)]

    def all_attributes(self, name: str) -> dict[str, Attribute]:
        """Attributes of a class including inherited ones; own declarations win."""
        out: dict[str, Attribute] = {}
        for cls_name in reversed(self.ancestors(name)):
            cls = self.get_class(cls_name)
            if cls:
                out.update({a.name: a for a in cls.attributes})
        return out

    def find_method(self, name: str, method: str) -> Method | None:
        for cls_name in self.ancestors(name):
            cls = self.get_class(cls_name)
            if cls and cls.method(method):
                return cls.method(method)
        return None

    def state_machine_for(self, name: str) -> StateMachine | None:
        """The machine owned by ``name`` or its nearest ancestor."""
        for cls_name in self.ancestors(name):
            for sm in self.state_machines:
                if sm.owner_class == cls_name:
                    return sm
        return None

    def navigation(self, name: str, role: str) -> tuple[Relationship, str] | None:
        """Resolve ``self.<role>`` from ``name``: the relationship and peer class."""
        for cls_name in self.ancestors(name):
            for r in self.relationships:
                if r.name == role and r.source == cls_name:
                    return r, r.target
        return None

    def checksum(self) -> str:
        return hashlib.sha256(serialize_model(self, check=False).encode()).hexdigest()


# --------------------------------------------------------------------------
# Validation


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True, order=True)
class Issue:
    location: str
    severity: Severity
    message: str


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...] = ()

    @property
    def errors(self) -> tuple[Issue, ...]:
        return tuple(i for i in self.issues if i.severity is Severity.ERROR)

    @property
    def ok(self) -> bool:
        return not self.errors

    def __iter__(self) -> Iterator[Issue]:
        return iter(self.issues)

    def __len__(self) -> int:
        return len(self.issues)


def validate_model(model: SystemModel) -> ValidationReport:
    """Check every model-IR invariant; problems are returned, never raised."""
    issues: list[Issue] = []

    def err(location: str, message: str) -> None:
        issues.append(Issue(location, Severity.ERROR, message))

    names = Counter(c.name for c in model.classes)
    for name, n in names.items():
        if n > 1:
            err(f"class:{name}", f"class {name!r} declared {n} times")
    class_names = set(names)

    for cls in model.classes:
        loc = f"class:{cls.name}"
        if not is_identifier(cls.name):
            err(loc, f"invalid class name {cls.name!r}")
        if cls.label is not None and normalize_name(cls.label) != cls.name:
            err(loc, f"label {cls.label!r} does not normalize to {cls.name!r}")
        seen: set[str] = set()
        for attr in cls.attributes:
            if attr.name in seen:
                err(f"{loc}.attribute:{attr.name}", f"duplicate attribute {attr.name!r}")
            seen.add(attr.name)
            if not is_type_tag(attr.type):
                err(f"{loc}.attribute:{attr.name}", f"unknown attribute type {attr.type!r}")

    for i, rel in enumerate(model.relationships):
        loc = f"relationship[{i:03d}]"
        for end in (rel.source, rel.target):
            if end not in class_names:
                err(loc, f"{rel.kind.value} endpoint {end!r} is not a declared class")
        if rel.kind is RelationshipKind.INHERITANCE:
            if rel.source_cardinality or rel.target_cardinality:
                err(loc, "inheritance carries no cardinalities")
    for cls in model.classes:
        if any(model.is_subclass(p, cls.name) for p in model.parents(cls.name)):
            err(f"class:{cls.name}", "inheritance cycle")

    owners = Counter(sm.owner_class for sm in model.state_machines)
    for owner, n in owners.items():
        if n > 1:
            err(f"stateMachine:{owner}", f"{n} state machines for one class")
    for sm in model.state_machines:
        issues.extend(
            Issue(f"stateMachine:{sm.owner_class}{sub}", Severity.ERROR, msg)
            for sub, msg in _state_machine_problems(sm, class_names)
        )

    for i, flow in enumerate(model.activities):
        issues.extend(
            Issue(f"activity[{i:03d}]{sub}", Severity.ERROR, msg)
            for sub, msg in _activity_problems(flow, class_names)
        )

    return ValidationReport(tuple(sorted(issues)))


def _state_machine_problems(sm: StateMachine, class_names: set[str]) -> Iterator[tuple[str, str]]:
    if sm.owner_class not in class_names:
        yield "", f"owner {sm.owner_class!r} is not a declared class"
    counts = Counter(s.name for s in sm.states)
    for name, n in counts.items():
        if n > 1:
            yield f".state:{name}", f"state {name!r} declared {n} times"
    by_name = {s.name: s for s in sm.states}
    for s in sm.states:
        if s.parent is None:
            continue
        parent = by_name.get(s.parent)
        if parent is None:
            yield f".state:{s.name}", f"parent state {s.parent!r} is not declared"
        elif parent.parent is not None:
            yield f".state:{s.name}", "composite states nest at most one level deep"
    for s in sm.states:
        children = {c.name for c in sm.states if c.parent == s.name}
        if children and s.initial not in children:
            yield f".state:{s.name}", "composite state needs an initial substate"
        if not children and s.initial is not None:
            yield f".state:{s.name}", "simple state cannot declare an initial substate"
    initial = by_name.get(sm.initial)
    if initial is None:
        yield ".initial", f"initial state {sm.initial!r} is not declared"
    elif initial.parent is not None:
        yield ".initial", "machine initial state must be top-level"
    for i, t in enumerate(sm.transitions):
        for end in (t.source, t.target):
            if end not in by_name:
                yield f".transition[{i:03d}]", f"state {end!r} is not declared"
        if not is_identifier(t.event):
            yield f".transition[{i:03d}]", f"invalid event {t.event!r}"


def _activity_problems(flow: ActivityFlow, class_names: set[str]) -> Iterator[tuple[str, str]]:
    ids = Counter(n.id for n in flow.nodes)
    for node_id, n in ids.items():
        if n > 1:
            yield f".node:{node_id}", f"node id {node_id!r} used {n} times"
    for p in flow.partitions:
        if p not in class_names:
            yield f".partition:{p}", f"partition {p!r} is not a declared class"
    starts = [n for n in flow.nodes if n.kind is NodeKind.INITIAL]
    if len(starts) != 1:
        yield "", f"expected exactly one Initial node, found {len(starts)}"
    for n in flow.nodes:
        if n.partition is not None and n.partition not in flow.partitions:
            yield f".node:{n.id}", f"partition {n.partition!r} not listed"
        if n.kind is NodeKind.ACTION and n.partition is None:
            yield f".node:{n.id}", "action outside any partition"
    known = set(ids)
    dangling = False
    for i, e in enumerate(flow.edges):
        for end in (e.source, e.target):
            if end not in known:
                dangling = True
                yield f".edge[{i:03d}]", f"edge endpoint {end!r} is not a node"
    if len(starts) != 1 or dangling:
        return
    succ: dict[str, list[str]] = {n: [] for n in known}
    for e in flow.edges:
        succ[e.source].append(e.target)
    reached = _reach(starts[0].id, succ)
    for n in flow.nodes:
        if n.id not in reached:
            yield f".node:{n.id}", "node unreachable from the Initial node"
    kinds = {n.id: n.kind for n in flow.nodes}
    for n in flow.nodes:
        if n.kind is NodeKind.FORK and not _fork_closes(n.id, succ, kinds):
            yield f".node:{n.id}", "fork without a matching join on every outgoing path"


def _reach(start: str, succ: dict[str, list[str]]) -> set[str]:
    seen = {start}
    todo = [start]
    while todo:
        for nxt in succ[todo.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return seen


def _fork_closes(fork: str, succ: dict[str, list[str]], kinds: dict[str, NodeKind]) -> bool:
    """Every path leaving ``fork`` meets its balancing Join before a Final."""
    seen: set[tuple[str, int]] = set()
    todo = [(t, 1) for t in succ[fork]]
    if not todo:
        return False
    while todo:
        node, depth = todo.pop()
        if (node, depth) in seen:
            continue
        seen.add((node, depth))
        kind = kinds[node]
        if kind is NodeKind.FORK:
            depth += 1
        elif kind is NodeKind.JOIN:
            depth -= 1
            if depth == 0:
                continue
        if kind is NodeKind.FINAL or not succ[node] or depth > len(kinds):
            return False
        todo.extend((t, depth) for t in succ[node])
    return True


# --------------------------------------------------------------------------
# JSON serialization


def model_to_dict(model: SystemModel) -> dict[str, Any]:
    def card(c: Cardinality | None) -> str | None:
        return None if c is None else str(c)

    return {
        "modelName": model.model_name,
        "version": model.version,
        "classes": [
            {
                "name": c.name,
                "label": c.label,
                "isAbstract": c.is_abstract,
                "attributes": [{"name": a.name, "type": a.type} for a in c.attributes],
                "methods": [
                    {
                        "name": m.name,
                        "parameters": [{"name": p.name, "type": p.type} for p in m.parameters],
                        "returns": m.returns,
                    }
                    for m in c.methods
                ],
            }
            for c in model.classes
        ],
        "relationships": [
            {
                "kind": r.kind.value,
                "source": r.source,
                "target": r.target,
                "sourceCardinality": card(r.source_cardinality),
                "targetCardinality": card(r.target_cardinality),
                "name": r.name,
            }
            for r in model.relationships
        ],
        "stateMachines": [
            {
                "ownerClass": sm.owner_class,
                "initial": sm.initial,
                "states": [
                    {"name": s.name, "parent": s.parent, "initial": s.initial} for s in sm.states
                ],
                "transitions": [
                    {
                        "from": t.source,
                        "to": t.target,
                        "event": t.event,
                        "guard": t.guard,
                        "action": t.action,
                    }
                    for t in sm.transitions
                ],
            }
            for sm in model.state_machines
        ],
        "activities": [
            {
                "partitions": list(f.partitions),
                "nodes": [
                    {"id": n.id, "kind": n.kind.value, "label": n.label, "partition": n.partition}
                    for n in f.nodes
                ],
                "edges": [{"from": e.source, "to": e.target, "guard": e.guard} for e in f.edges],
            }
            for f in model.activities
        ],
    }


def serialize_model(model: SystemModel, check: bool = True) -> str:
    """Canonical JSON text (sorted keys, two-space indent, trailing newline)."""
    if check:
        report = validate_model(model)
        if not report.ok:
            first = report.errors[0]
            raise ModelError(f"cannot serialize invalid model: {first.location}: {first.message}")
    return json.dumps(model_to_dict(model), sort_keys=True, indent=2) + "\n"


class _Reader:
    """Typed access into decoded JSON with path-annotated errors."""

    def __init__(self, origin: str):
        self.origin = origin

    def fail(self, path: str, message: str) -> ModelError:
        return ModelError(f"{self.origin}: {path}: {message}")

    def obj(self, value: Any, path: str) -> dict[str, Any]:
        if not isinstance(value, dict):
            raise self.fail(path, "expected an object")
        return value

    def field(self, data: dict[str, Any], key: str, path: str, kind: type, optional: bool = False) -> Any:
        if key not in data:
            if optional:
                return None
            raise self.fail(f"{path}.{key}", "missing field")
        value = data[key]
        if value is None and optional:
            return None
        if not isinstance(value, kind):
            raise self.fail(f"{path}.{key}", f"unexpected value {value!r}")
        return value

    def items(self, data: dict[str, Any], key: str, path: str) -> Iterable[tuple[str, dict]]:
        seq = self.field(data, key, path, list)
        for i, item in enumerate(seq):
            sub = f"{path}.{key}[{i}]"
            yield sub, self.obj(item, sub)


def model_from_dict(data: Any, origin: str = "<inline>") -> SystemModel:
    rd = _Reader(origin)
    root = rd.obj(data, "$")

    def card(value: str | None, path: str) -> Cardinality | None:
        if value is None:
            return None
        try:
            return Cardinality.parse(value)
        except ValueError as exc:
            raise rd.fail(path, str(exc)) from None

    classes = []
    for p, c in rd.items(root, "classes", "$"):
        attrs = tuple(
            Attribute(rd.field(a, "name", ap, str), rd.field(a, "type", ap, str))
            for ap, a in rd.items(c, "attributes", p)
        )
        methods = []
        for mp, m in rd.items(c, "methods", p):
            params = tuple(
                Parameter(rd.field(q, "name", qp, str), rd.field(q, "type", qp, str))
                for qp, q in rd.items(m, "parameters", mp)
            )
            methods.append(Method(rd.field(m, "name", mp, str), params, rd.field(m, "returns", mp, str)))
        classes.append(
            AgentClass(
                name=rd.field(c, "name", p, str),
                attributes=attrs,
                methods=tuple(methods),
                is_abstract=rd.field(c, "isAbstract", p, bool),
                label=rd.field(c, "label", p, str, optional=True),
            )
        )

    rels = []
    for p, r in rd.items(root, "relationships", "$"):
        kind_text = rd.field(r, "kind", p, str)
        try:
            kind = RelationshipKind(kind_text)
        except ValueError:
            raise rd.fail(f"{p}.kind", f"unknown relationship kind {kind_text!r}") from None
        rels.append(
            Relationship(
                kind=kind,
                source=rd.field(r, "source", p, str),
                target=rd.field(r, "target", p, str),
                source_cardinality=card(rd.field(r, "sourceCardinality", p, str, optional=True), p),
                target_cardinality=card(rd.field(r, "targetCardinality", p, str, optional=True), p),
                name=rd.field(r, "name", p, str, optional=True),
            )
        )

    machines = []
    for p, sm in rd.items(root, "stateMachines", "$"):
        states = tuple(
            State(
                rd.field(s, "name", sp, str),
                rd.field(s, "parent", sp, str, optional=True),
                rd.field(s, "initial", sp, str, optional=True),
            )
            for sp, s in rd.items(sm, "states", p)
        )
        transitions = tuple(
            Transition(
                rd.field(t, "from", tp, str),
                rd.field(t, "to", tp, str),
                rd.field(t, "event", tp, str),
                rd.field(t, "guard", tp, str, optional=True),
                rd.field(t, "action", tp, str, optional=True),
            )
            for tp, t in rd.items(sm, "transitions", p)
        )
        machines.append(
            StateMachine(rd.field(sm, "ownerClass", p, str), states, rd.field(sm, "initial", p, str), transitions)
        )

    flows = []
    for p, f in rd.items(root, "activities", "$"):
        parts = rd.field(f, "partitions", p, list)
        if not all(isinstance(x, str) for x in parts):
            raise rd.fail(f"{p}.partitions", "expected a list of class names")
        nodes = []
        for np_, n in rd.items(f, "nodes", p):
            kind_text = rd.field(n, "kind", np_, str)
            try:
                kind = NodeKind(kind_text)
            except ValueError:
                raise rd.fail(f"{np_}.kind", f"unknown node kind {kind_text!r}") from None
            nodes.append(
                ActivityNode(
                    rd.field(n, "id", np_, str),
                    kind,
                    rd.field(n, "label", np_, str),
                    rd.field(n, "partition", np_, str, optional=True),
                )
            )
        edges = tuple(
            ActivityEdge(
                rd.field(e, "from", ep, str),
                rd.field(e, "to", ep, str),
                rd.field(e, "guard", ep, str, optional=True),
            )
            for ep, e in rd.items(f, "edges", p)
        )
        flows.append(ActivityFlow(tuple(parts), tuple(nodes), edges))

    return SystemModel(
        classes=tuple(classes),
        relationships=tuple(rels),
        state_machines=tuple(machines),
        activities=tuple(flows),
        model_name=rd.field(root, "modelName", "$", str),
        version=rd.field(root, "version", "$", str),
    )


def deserialize_model(text: str, origin: str = "<inline>") -> SystemModel:
    """Inverse of :func:`serialize_model`.

    JSON syntax errors raise :class:`ParseError` with line and column;
    structural problems raise :class:`ModelError` naming the JSON path;
    dangling references raise :class:`ModelError` naming the location.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno, origin) from None
    model = model_from_dict(data, origin)
    report = validate_model(model)
    if not report.ok:
        first = report.errors[0]
        raise ModelError(f"{origin}: {first.location}: {first.message}")
    return model


__all__ = [
    "ActivityEdge",
    "ActivityFlow",
    "ActivityNode",
    "AgentClass",
    "Attribute",
    "Cardinality",
    "Issue",
    "Method",
    "NodeKind",
    "Parameter",
    "Relationship",
    "RelationshipKind",
    "Severity",
    "State",
    "StateMachine",
    "SystemModel",
    "Transition",
    "ValidationReport",
    "deserialize_model",
    "serialize_model",
    "validate_model",
]
