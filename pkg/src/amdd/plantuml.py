"""Parser and renderer for a strict PlantUML subset (class, state, activity).

Accepted grammar, one statement per line:

Class diagrams::

    [abstract] class Name [{ ... }]      body lines: ``attr : type`` or
                                         ``op(p : T, ...) [: Ret]``
    A ["c"] ARROW ["c"] B [: role]       ARROW is --|>, *--, o-- or --

State diagrams (``@startuml Owner`` names the owning class)::

    state Name
    state Name {  ...  }                 one level of nesting only
    [*] --> Name
    A --> B : event [guard] / action

Activity diagrams::

    |Lane|   start   stop   :Action;
    if (cond) then (label) / else (label) / endif
    fork / fork again / end fork

Lines starting with ``'`` are comments. Anything else is a positioned
:class:`~amdd.errors.ParseError`; unsupported PlantUML is rejected rather
than skipped so that no model content is silently lost. Arrows must be
separated from their operands by whitespace.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

from amdd.errors import ParseError
from amdd.model import (
    ActivityEdge,
    ActivityFlow,
    ActivityNode,
    AgentClass,
    Attribute,
    Cardinality,
    Method,
    NodeKind,
    Parameter,
    Relationship,
    RelationshipKind,
    State,
    StateMachine,
    SystemModel,
    Transition,
    normalize_name,
    parse_type_tag,
)


class DiagramKind(str, Enum):
    CLASS = "Class"
    STATE = "State"
    ACTIVITY = "Activity"


@dataclass(frozen=True)
class DiagramSource:
    kind: DiagramKind
    text: str
    origin: str = "<inline>"

    @classmethod
    def from_file(cls, kind: DiagramKind, path: str | Path) -> DiagramSource:
        path = Path(path)
        return cls(kind, path.read_text(encoding="utf-8"), str(path))


NAME = r"[A-Za-z_][A-Za-z0-9_-]*"
PLAIN = r"[A-Za-z_][A-Za-z0-9_]*"

ARROWS = {
    "--|>": RelationshipKind.INHERITANCE,
    "*--": RelationshipKind.COMPOSITION,
    "o--": RelationshipKind.AGGREGATION,
    "--": RelationshipKind.ASSOCIATION,
}


class _Source:
    """Comment-stripped body lines of one diagram plus its header name."""

    def __init__(self, src: DiagramSource):
        self.origin = src.origin
        self.header_name: str | None = None
        self.header_line = 1
        self.lines: list[tuple[int, int, str]] = []
        raw = src.text.splitlines()
        body: list[tuple[int, int, str]] = []
        for i, line in enumerate(raw, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("'"):
                continue
            body.append((i, len(line) - len(line.lstrip()) + 1, stripped))
        if not body or not body[0][2].startswith("@startuml"):
            where = body[0] if body else (1, 1, "")
            raise ParseError("diagram must start with @startuml", where[0], where[1], self.origin)
        first = body[0]
        rest = first[2][len("@startuml"):]
        if rest and not rest[0].isspace():
            raise ParseError("malformed @startuml line", first[0], first[1], self.origin)
        rest = rest.strip()
        if rest:
            if not re.fullmatch(NAME, rest):
                col = first[1] + first[2].index(rest)
                raise ParseError(f"invalid diagram name {rest!r}", first[0], col, self.origin)
            self.header_name = rest
        self.header_line = first[0]
        ends = [k for k, b in enumerate(body) if b[2] == "@enduml"]
        if not ends:
            last = body[-1]
            raise ParseError("missing @enduml", last[0], last[1], self.origin)
        end = ends[0]
        if end != len(body) - 1:
            extra = body[end + 1]
            raise ParseError("content after @enduml", extra[0], extra[1], self.origin)
        for number, col, text in body[1:end]:
            if text.startswith("@"):
                raise ParseError(f"unexpected directive {text.split()[0]!r}", number, col, self.origin)
            self.lines.append((number, col, text))

    def error(self, line: tuple[int, int, str], message: str, offset: int = 0) -> ParseError:
        number, col, _ = line
        return ParseError(message, number, col + offset, self.origin)


def _check_kind(src: DiagramSource, kind: DiagramKind) -> None:
    if src.kind is not kind:
        raise ValueError(f"expected a {kind.value} diagram, got {src.kind.value}")


# --------------------------------------------------------------------------
# Class diagrams

_CLASS_RE = re.compile(rf"^(?P<abstract>abstract\s+)?class\s+(?P<name>\S+)\s*(?P<brace>\{{\s*\}}|\{{)?$")
_ATTR_RE = re.compile(rf"^(?P<name>{PLAIN})\s*:\s*(?P<type>.+)$")
_METHOD_RE = re.compile(rf"^(?P<name>{PLAIN})\s*\((?P<params>[^()]*)\)\s*(?::\s*(?P<ret>.+))?$")
_PARAM_TYPE_RE = re.compile(rf"^{PLAIN}\*?$")
_REL_RE = re.compile(
    rf'^(?P<src>\S+)\s+(?:"(?P<c1>[^"]*)"\s+)?(?P<arrow>\S+)\s+(?:"(?P<c2>[^"]*)"\s+)?(?P<dst>[^\s:]+)'
    rf"\s*(?::\s*(?P<role>.*))?$"
)
_ARROWISH_RE = re.compile(r"^[-.<>|*o#x+^]*[-.][-.<>|*o#x+^]*$")


def _param_type(text: str) -> bool:
    if _PARAM_TYPE_RE.match(text):
        return True
    try:
        parse_type_tag(text)
    except ValueError:
        return False
    return True


def parse_class_diagram(src: DiagramSource) -> tuple[list[AgentClass], list[Relationship]]:
    """Classes and relationships of a class diagram, in declaration order."""
    _check_kind(src, DiagramKind.CLASS)
    s = _Source(src)
    classes: dict[str, dict] = {}
    rels: list[tuple[tuple[int, int, str], Relationship]] = []
    current: dict | None = None
    open_line = None

    for line in s.lines:
        text = line[2]
        if current is not None:
            if text == "}":
                current = None
                continue
            m = _METHOD_RE.match(text)
            if m:
                current["methods"].append(_parse_method(s, line, m, current))
                continue
            m = _ATTR_RE.match(text)
            if m:
                name = m.group("name")
                if any(a.name == name for a in current["attributes"]):
                    raise s.error(line, f"duplicate attribute {name!r}")
                try:
                    tag = parse_type_tag(m.group("type"))
                except ValueError as exc:
                    raise s.error(line, str(exc), m.start("type")) from None
                current["attributes"].append(Attribute(name, tag))
                continue
            raise s.error(line, "expected 'name : type', 'op(...) : type' or '}'")

        m = _CLASS_RE.match(text)
        if m:
            raw_name = m.group("name")
            if not re.fullmatch(NAME, raw_name):
                raise s.error(line, f"invalid class name {raw_name!r}", m.start("name"))
            name = normalize_name(raw_name)
            if name in classes:
                raise s.error(line, f"duplicate class declaration {raw_name!r}", m.start("name"))
            entry = {
                "name": name,
                "label": raw_name if raw_name != name else None,
                "abstract": bool(m.group("abstract")),
                "attributes": [],
                "methods": [],
                "line": line,
            }
            classes[name] = entry
            if m.group("brace") == "{":
                current = entry
                open_line = line
            continue
        if text.startswith("class ") or text.startswith("abstract "):
            raise s.error(line, "malformed class declaration")

        m = _REL_RE.match(text)
        if m:
            rels.append((line, _parse_relationship(s, line, m)))
            continue
        raise s.error(line, "unrecognized statement")

    if current is not None:
        raise s.error(open_line, f"class {current['name']!r} body is not closed")

    for line, rel in rels:
        for end, group in ((rel.source, "src"), (rel.target, "dst")):
            if end not in classes:
                m = _REL_RE.match(line[2])
                raise s.error(line, f"undeclared class {end!r}", m.start(group))

    out = [
        AgentClass(
            name=c["name"],
            attributes=tuple(c["attributes"]),
            methods=tuple(c["methods"]),
            is_abstract=c["abstract"],
            label=c["label"],
        )
        for c in classes.values()
    ]
    return out, [r for _, r in rels]


def _parse_method(s: _Source, line, m: re.Match, current: dict) -> Method:
    name = m.group("name")
    if any(x.name == name for x in current["methods"]):
        raise s.error(line, f"duplicate operation {name!r}")
    params: list[Parameter] = []
    raw = m.group("params").strip()
    if raw:
        offset = m.start("params")
        for chunk in m.group("params").split(","):
            pm = re.fullmatch(rf"\s*({PLAIN})\s*:\s*(\S+)\s*", chunk)
            if not pm or not _param_type(pm.group(2)):
                lead = len(chunk) - len(chunk.lstrip())
                raise s.error(line, "parameters must read 'name : Type'", offset + lead)
            params.append(Parameter(pm.group(1), pm.group(2)))
            offset += len(chunk) + 1
    ret = (m.group("ret") or "void").strip()
    if ret != "void" and not _param_type(ret):
        raise s.error(line, f"invalid return type {ret!r}", m.start("ret"))
    return Method(name, tuple(params), ret)


def _parse_relationship(s: _Source, line, m: re.Match) -> Relationship:
    arrow = m.group("arrow")
    if arrow not in ARROWS:
        if _ARROWISH_RE.match(arrow):
            raise s.error(line, f"unknown arrow token {arrow!r}", m.start("arrow"))
        raise s.error(line, "unrecognized statement")
    kind = ARROWS[arrow]
    ends = []
    for group in ("src", "dst"):
        raw = m.group(group)
        if not re.fullmatch(NAME, raw):
            raise s.error(line, f"invalid class name {raw!r}", m.start(group))
        ends.append(normalize_name(raw))
    cards: list[Cardinality | None] = []
    for group in ("c1", "c2"):
        raw = m.group(group)
        if raw is None:
            cards.append(None)
            continue
        if kind is RelationshipKind.INHERITANCE:
            raise s.error(line, "inheritance carries no cardinalities", m.start(group))
        try:
            cards.append(Cardinality.parse(raw))
        except ValueError as exc:
            raise s.error(line, str(exc), m.start(group)) from None
    role = m.group("role")
    if role is not None:
        role = role.strip()
        if not re.fullmatch(PLAIN, role):
            raise s.error(line, f"invalid role name {role!r}", m.start("role"))
    return Relationship(kind, ends[0], ends[1], cards[0], cards[1], role)


def render_class_diagram(classes: Iterable[AgentClass], relationships: Iterable[Relationship],
                         name: str = "") -> str:
    out = ["@startuml" + (f" {name}" if name else "")]
    for c in classes:
        head = ("abstract class " if c.is_abstract else "class ") + c.display_name
        members = []
        for a in c.attributes:
            members.append(f"  {a.name} : {a.type}")
        for mth in c.methods:
            params = ", ".join(f"{p.name} : {p.type}" for p in mth.parameters)
            members.append(f"  {mth.name}({params}) : {mth.returns}")
        if members:
            out.append(head + " {")
            out.extend(members)
            out.append("}")
        else:
            out.append(head)
    arrow_of = {kind: arrow for arrow, kind in ARROWS.items()}
    for r in relationships:
        parts = [r.source]
        if r.source_cardinality is not None:
            parts.append(f'"{r.source_cardinality}"')
        parts.append(arrow_of[r.kind])
        if r.target_cardinality is not None:
            parts.append(f'"{r.target_cardinality}"')
        parts.append(r.target)
        line = " ".join(parts)
        if r.name:
            line += f" : {r.name}"
        out.append(line)
    out.append("@enduml")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# State diagrams

_STATE_RE = re.compile(rf"^state\s+(?P<name>\S+)\s*(?P<brace>\{{)?$")
_TRANS_RE = re.compile(r"^(?P<src>\S+)\s+-->\s+(?P<dst>[^\s:]+)\s*(?::\s*(?P<label>.*))?$")
_LABEL_RE = re.compile(
    rf"^(?P<event>{PLAIN})\s*(?:\[(?P<guard>[^\]]*)\])?\s*(?:/\s*(?P<action>{PLAIN}))?\s*$"
)


def parse_state_diagram(src: DiagramSource) -> StateMachine:
    """One state machine; the owner class comes from ``@startuml <Owner>``."""
    _check_kind(src, DiagramKind.STATE)
    s = _Source(src)
    if s.header_name is None:
        raise ParseError("state diagram needs an owner: '@startuml <ClassName>'", s.header_line, 1, s.origin)
    owner = normalize_name(s.header_name)

    states: dict[str, dict] = {}
    transitions: list[tuple[tuple, Transition]] = []
    initial: tuple[str, tuple] | None = None
    composite: str | None = None
    composite_line = None

    for line in s.lines:
        text = line[2]
        if text == "}":
            if composite is None:
                raise s.error(line, "'}' without an open composite state")
            if states[composite]["initial"] is None:
                raise s.error(composite_line, f"composite state {composite!r} lacks '[*] --> <substate>'")
            composite = None
            continue
        m = _STATE_RE.match(text)
        if m:
            name = m.group("name")
            if not re.fullmatch(PLAIN, name):
                raise s.error(line, f"invalid state name {name!r}", m.start("name"))
            if name in states:
                raise s.error(line, f"duplicate state {name!r}", m.start("name"))
            if m.group("brace") and composite is not None:
                raise s.error(line, "composite states nest at most one level deep")
            states[name] = {"parent": composite, "initial": None, "line": line}
            if m.group("brace"):
                composite = name
                composite_line = line
            continue
        if text.startswith("state"):
            raise s.error(line, "malformed state declaration")
        m = _TRANS_RE.match(text)
        if m:
            src_name, dst = m.group("src"), m.group("dst")
            if dst == "[*]":
                raise s.error(line, "final pseudostate transitions are not supported", m.start("dst"))
            if src_name == "[*]":
                if m.group("label"):
                    raise s.error(line, "initial transition cannot carry a label", m.start("label"))
                if composite is None:
                    if initial is not None:
                        raise s.error(line, "duplicate initial transition")
                    initial = (dst, line)
                else:
                    if states[composite]["initial"] is not None:
                        raise s.error(line, f"duplicate initial transition in {composite!r}")
                    states[composite]["initial"] = dst
                    states[composite]["initial_line"] = line
                continue
            label = m.group("label")
            if label is None:
                raise s.error(line, "transition needs ': event'", len(text) - 1)
            lm = _LABEL_RE.match(label.strip())
            if not lm:
                raise s.error(line, "label must read 'event [guard] / action'", m.start("label"))
            guard = lm.group("guard")
            transitions.append(
                (line, Transition(src_name, dst, lm.group("event"),
                                  guard.strip() if guard is not None else None, lm.group("action")))
            )
            continue
        raise s.error(line, "unrecognized statement")

    if composite is not None:
        raise s.error(composite_line, f"composite state {composite!r} is not closed")
    if initial is None:
        raise ParseError("missing initial state ('[*] --> <state>')", s.header_line, 1, s.origin)

    def need(name: str, line, offset: int) -> None:
        if name not in states:
            raise s.error(line, f"undeclared state {name!r}", offset)

    init_name, init_line = initial
    need(init_name, init_line, init_line[2].index("-->") + 4)
    if states[init_name]["parent"] is not None:
        raise s.error(init_line, "machine initial state must be top-level", init_line[2].index("-->") + 4)
    for name, info in states.items():
        if info["initial"] is not None:
            line = info["initial_line"]
            need(info["initial"], line, line[2].index("-->") + 4)
            if states[info["initial"]]["parent"] != name:
                raise s.error(line, f"{info['initial']!r} is not a substate of {name!r}",
                              line[2].index("-->") + 4)
    for line, t in transitions:
        m = _TRANS_RE.match(line[2])
        need(t.source, line, m.start("src"))
        need(t.target, line, m.start("dst"))

    return StateMachine(
        owner_class=owner,
        states=tuple(State(n, i["parent"], i["initial"]) for n, i in states.items()),
        initial=init_name,
        transitions=tuple(t for _, t in transitions),
    )


def render_state_diagram(sm: StateMachine) -> str:
    out = [f"@startuml {sm.owner_class}"]
    for st in sm.states:
        if st.parent is not None:
            continue
        children = sm.substates(st.name)
        if not children:
            out.append(f"state {st.name}")
            continue
        out.append(f"state {st.name} {{")
        for child in children:
            out.append(f"  state {child.name}")
        if st.initial is not None:
            out.append(f"  [*] --> {st.initial}")
        out.append("}")
    out.append(f"[*] --> {sm.initial}")
    for t in sm.transitions:
        label = t.event
        if t.guard is not None:
            label += f" [{t.guard}]"
        if t.action is not None:
            label += f" / {t.action}"
        out.append(f"{t.source} --> {t.target} : {label}")
    out.append("@enduml")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# Activity diagrams

_IF_RE = re.compile(r"^if\s*\((?P<cond>.*)\)\s*then(?:\s*\((?P<label>[^()]*)\))?$")
_ELSE_RE = re.compile(r"^else(?:\s*\((?P<label>[^()]*)\))?$")
_LANE_RE = re.compile(r"^\|(?P<name>[^|]+)\|$")
_ACTION_RE = re.compile(r"^:(?P<label>[^;]*);$")


class _FlowBuilder:
    def __init__(self) -> None:
        self.nodes: list[ActivityNode] = []
        self.edges: list[ActivityEdge] = []
        self.partitions: list[str] = []
        self.lane: str | None = None
        self.tails: list[tuple[str, str | None]] = []

    def add(self, kind: NodeKind, label: str = "") -> str:
        node_id = f"n{len(self.nodes) + 1}"
        self.nodes.append(ActivityNode(node_id, kind, label, self.lane))
        for tail, guard in self.tails:
            self.edges.append(ActivityEdge(tail, node_id, guard))
        self.tails = [(node_id, None)]
        return node_id


def parse_activity_diagram(src: DiagramSource) -> ActivityFlow:
    _check_kind(src, DiagramKind.ACTIVITY)
    s = _Source(src)
    b = _FlowBuilder()
    stack: list[dict] = []

    for line in s.lines:
        text = line[2]
        m = _LANE_RE.match(text)
        if m:
            raw = m.group("name").strip()
            if not re.fullmatch(NAME, raw):
                raise s.error(line, f"invalid lane name {raw!r}", 1)
            b.lane = normalize_name(raw)
            if b.lane not in b.partitions:
                b.partitions.append(b.lane)
            continue
        if text == "start":
            if any(n.kind is NodeKind.INITIAL for n in b.nodes):
                raise s.error(line, "duplicate 'start'")
            b.add(NodeKind.INITIAL)
            continue
        if text in ("stop", "end"):
            b.add(NodeKind.FINAL)
            b.tails = []
            continue
        m = _ACTION_RE.match(text)
        if m:
            if b.lane is None:
                raise s.error(line, "action outside any partition")
            label = m.group("label").strip()
            if not label:
                raise s.error(line, "empty action label")
            b.add(NodeKind.ACTION, label)
            continue
        m = _IF_RE.match(text)
        if m:
            decision = b.add(NodeKind.DECISION, m.group("cond").strip())
            b.tails = [(decision, _label(m.group("label")))]
            stack.append({"kind": "if", "node": decision, "line": line, "done": [], "else": False})
            continue
        m = _ELSE_RE.match(text)
        if m:
            frame = stack[-1] if stack else None
            if frame is None or frame["kind"] != "if":
                raise s.error(line, "'else' outside an if block")
            if frame["else"]:
                raise s.error(line, "second 'else' in one if block")
            frame["done"].extend(b.tails)
            frame["else"] = True
            b.tails = [(frame["node"], _label(m.group("label")))]
            continue
        if text == "endif":
            frame = stack.pop() if stack and stack[-1]["kind"] == "if" else None
            if frame is None:
                raise s.error(line, "'endif' without a matching 'if'")
            if not frame["else"]:
                frame["done"].append((frame["node"], None))
            b.tails = frame["done"] + b.tails
            b.add(NodeKind.MERGE)
            continue
        if text == "fork":
            fork = b.add(NodeKind.FORK)
            stack.append({"kind": "fork", "node": fork, "line": line, "done": []})
            continue
        if text == "fork again":
            frame = stack[-1] if stack else None
            if frame is None or frame["kind"] != "fork":
                raise s.error(line, "'fork again' outside a fork block")
            frame["done"].extend(b.tails)
            b.tails = [(frame["node"], None)]
            continue
        if text == "end fork":
            frame = stack.pop() if stack and stack[-1]["kind"] == "fork" else None
            if frame is None:
                raise s.error(line, "'end fork' without a matching 'fork'")
            b.tails = frame["done"] + b.tails
            b.add(NodeKind.JOIN)
            continue
        raise s.error(line, "unrecognized statement")

    if stack:
        frame = stack[-1]
        raise s.error(frame["line"], f"unbalanced '{frame['kind']}' block")
    if not any(n.kind is NodeKind.INITIAL for n in b.nodes):
        raise ParseError("activity diagram needs 'start'", s.header_line, 1, s.origin)
    return ActivityFlow(tuple(b.partitions), tuple(b.nodes), tuple(b.edges))


def _label(text: str | None) -> str | None:
    if text is None:
        return None
    text = text.strip()
    return text or None


def _id_order(node_id: str) -> tuple[int, str]:
    digits = node_id.lstrip("n")
    return (int(digits), node_id) if digits.isdigit() else (1 << 30, node_id)


def render_activity_diagram(flow: ActivityFlow) -> str:
    """Structured text for a flow built by :func:`parse_activity_diagram`."""
    out = ["@startuml"]
    nodes = {n.id: n for n in flow.nodes}
    succ: dict[str, list[ActivityEdge]] = {n.id: [] for n in flow.nodes}
    for e in flow.edges:
        succ[e.source].append(e)
    lane: list[str | None] = [None]

    if flow.nodes and all(n.partition is not None for n in flow.nodes):
        for p in flow.partitions:
            out.append(f"|{p}|")
        lane[0] = flow.partitions[-1] if flow.partitions else None

    def switch(node: ActivityNode) -> None:
        if node.partition is not None and node.partition != lane[0]:
            out.append(f"|{node.partition}|")
            lane[0] = node.partition

    def first_id(edge: ActivityEdge, closing: NodeKind) -> tuple[int, str]:
        target = nodes[edge.target]
        return (1 << 31, "") if target.kind is closing else _id_order(target.id)

    def walk(node: ActivityNode, depth: int) -> ActivityNode | None:
        pad = "  " * depth
        while True:
            if node.kind in (NodeKind.MERGE, NodeKind.JOIN) and depth > 0:
                return node
            switch(node)
            if node.kind is NodeKind.INITIAL:
                out.append(pad + "start")
            elif node.kind is NodeKind.FINAL:
                out.append(pad + "stop")
                return None
            elif node.kind is NodeKind.ACTION:
                out.append(f"{pad}:{node.label};")
            elif node.kind in (NodeKind.DECISION, NodeKind.FORK):
                is_if = node.kind is NodeKind.DECISION
                closing = NodeKind.MERGE if is_if else NodeKind.JOIN
                branches = sorted(succ[node.id], key=lambda e: first_id(e, closing))
                ends: list[ActivityNode | None] = []
                for i, edge in enumerate(branches):
                    guard = f" ({edge.guard})" if edge.guard else ""
                    if is_if:
                        out.append(pad + (f"if ({node.label}) then{guard}" if i == 0 else f"else{guard}"))
                    else:
                        out.append(pad + ("fork" if i == 0 else "fork again"))
                    target = nodes[edge.target]
                    ends.append(target if target.kind is closing else walk(target, depth + 1))
                closer = next((e for e in ends if e is not None), None)
                if closer is not None:
                    switch(closer)
                out.append(pad + ("endif" if is_if else "end fork"))
                if closer is None:
                    return None
                node = closer
            elif node.kind in (NodeKind.MERGE, NodeKind.JOIN):
                pass
            nxt = succ[node.id]
            if not nxt:
                return None
            node = nodes[nxt[0].target]

    start = flow.initial_node()
    if start is not None:
        walk(start, 0)
    out.append("@enduml")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# Whole models


def render_model(model: SystemModel) -> list[DiagramSource]:
    """Class diagram first, then one state diagram per machine, then activities."""
    sources = [
        DiagramSource(DiagramKind.CLASS,
                      render_class_diagram(model.classes, model.relationships), "<rendered:class>")
    ]
    for sm in model.state_machines:
        sources.append(DiagramSource(DiagramKind.STATE, render_state_diagram(sm),
                                     f"<rendered:state:{sm.owner_class}>"))
    for i, flow in enumerate(model.activities):
        sources.append(DiagramSource(DiagramKind.ACTIVITY, render_activity_diagram(flow),
                                     f"<rendered:activity:{i}>"))
    return sources


def parse_model(sources: Iterable[DiagramSource], model_name: str = "", version: str = "") -> SystemModel:
    """Assemble a model from diagram sources; classes from all class diagrams are merged."""
    classes: list[AgentClass] = []
    rels: list[Relationship] = []
    machines: list[StateMachine] = []
    flows: list[ActivityFlow] = []
    for src in sources:
        if src.kind is DiagramKind.CLASS:
            cs, rs = parse_class_diagram(src)
            classes.extend(cs)
            rels.extend(rs)
        elif src.kind is DiagramKind.STATE:
            machines.append(parse_state_diagram(src))
        else:
            flows.append(parse_activity_diagram(src))
    return SystemModel(tuple(classes), tuple(rels), tuple(machines), tuple(flows), model_name, version)
