"""Expected message protocol from an activity flow, and trace checking against it.

An Action whose control flow next reaches an Action in another partition
emits an event labelled with the Action's text, sent from its partition to
the other one. Events inside a fork region, or whose hand-off passes through
a Fork, happen once per tasked instance (``perTaskedUV``). Ordering is the
reachability partial order of the flow, so per-instance pairs on different
instances may interleave freely.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from amdd.model import ActivityFlow, NodeKind
from amdd.sim import MessageTrace

_CONTROL = (NodeKind.DECISION, NodeKind.MERGE, NodeKind.FORK, NodeKind.JOIN)


class Multiplicity(str, Enum):
    ONCE = "once"
    PER_TASKED_UV = "perTaskedUV"


class Verdict(str, Enum):
    CONFORMANT = "Conformant"
    CONFORMANT_WITH_NOVEL = "ConformantWithNovelEvents"
    VIOLATING = "Violating"


@dataclass(frozen=True)
class ExpectedEvent:
    label: str
    sender_role: str
    receiver_role: str
    multiplicity: Multiplicity = Multiplicity.ONCE
    instance_role: str | None = None  # role that varies per instance for perTaskedUV events


@dataclass(frozen=True)
class ExpectedProtocol:
    events: tuple[ExpectedEvent, ...] = ()
    order: tuple[tuple[str, str], ...] = ()
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        labels = {e.label for e in self.events}
        if len(labels) != len(self.events):
            raise ValueError("event labels must be unique")
        for a, b in self.order:
            if a not in labels or b not in labels:
                raise ValueError(f"order edge {a} -> {b} names an undeclared event")
        if _has_cycle(labels, self.order):
            raise ValueError("event order is cyclic")

    def event(self, label: str) -> ExpectedEvent | None:
        return next((e for e in self.events if e.label == label), None)

    def labels(self) -> list[str]:
        return [e.label for e in self.events]

    def before(self, a: str, b: str) -> bool:
        return (a, b) in set(self.order)


def _has_cycle(nodes: set[str], edges: Iterable[tuple[str, str]]) -> bool:
    succ: dict[str, list[str]] = {n: [] for n in nodes}
    indeg = {n: 0 for n in nodes}
    for a, b in edges:
        succ[a].append(b)
        indeg[b] += 1
    todo = deque(n for n in nodes if indeg[n] == 0)
    seen = 0
    while todo:
        n = todo.popleft()
        seen += 1
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                todo.append(m)
    return seen != len(nodes)


# --------------------------------------------------------------------------
# Derivation


def _successors(flow: ActivityFlow) -> dict[str, list[str]]:
    succ: dict[str, list[str]] = {n.id: [] for n in flow.nodes}
    for e in flow.edges:
        succ[e.source].append(e.target)
    return succ


def _fork_region(flow: ActivityFlow, succ: dict[str, list[str]]) -> dict[str, str]:
    """Nodes strictly inside some fork/join pair, mapped to the opening Fork."""
    kinds = {n.id: n.kind for n in flow.nodes}
    region: dict[str, str] = {}
    for fork in (n.id for n in flow.nodes if n.kind is NodeKind.FORK):
        seen = set()
        todo = [(s, 1) for s in succ[fork]]
        while todo:
            node, depth = todo.pop()
            if (node, depth) in seen:
                continue
            seen.add((node, depth))
            if kinds[node] is NodeKind.FORK:
                depth += 1
            elif kinds[node] is NodeKind.JOIN:
                depth -= 1
                if depth == 0:
                    continue
            region.setdefault(node, fork)
            todo.extend((s, depth) for s in succ[node])
    return region


def _handoffs(start: str, flow: ActivityFlow, succ: dict[str, list[str]]) -> list[tuple[str, bool]]:
    """Actions first reached from ``start`` through control nodes; flag set if a Fork was crossed."""
    kinds = {n.id: n.kind for n in flow.nodes}
    out: list[tuple[str, bool]] = []
    seen: set[tuple[str, bool]] = set()
    todo = [(s, False) for s in succ[start]]
    while todo:
        node, forked = todo.pop(0)
        if (node, forked) in seen:
            continue
        seen.add((node, forked))
        kind = kinds[node]
        if kind is NodeKind.ACTION:
            out.append((node, forked))
        elif kind in _CONTROL:
            crossed = forked or kind is NodeKind.FORK
            todo.extend((s, crossed) for s in succ[node])
    return out


def _reachable(start: str, succ: dict[str, list[str]]) -> set[str]:
    seen: set[str] = set()
    todo = list(succ[start])
    while todo:
        n = todo.pop()
        if n not in seen:
            seen.add(n)
            todo.extend(succ[n])
    return seen


def derive_expected(flow: ActivityFlow, concepts: Iterable[str] | None = None) -> ExpectedProtocol:
    """Expected events and their partial order.

    When ``concepts`` is given, event labels that are not concept names are
    reported as warnings (matching is by concept name).
    """
    succ = _successors(flow)
    region = _fork_region(flow, succ)
    nodes = {n.id: n for n in flow.nodes}
    events: dict[str, ExpectedEvent] = {}
    sources: dict[str, list[str]] = {}
    warnings: list[str] = []
    for node in sorted(flow.nodes, key=lambda n: _id_key(n.id)):
        if node.kind is not NodeKind.ACTION or not node.label:
            continue
        for target, forked in _handoffs(node.id, flow, succ):
            other = nodes[target]
            if other.partition == node.partition or other.partition is None or node.partition is None:
                continue
            per_instance = forked or node.id in region
            if per_instance:
                inner = other if forked else node
                instance_role = inner.partition
                ev = ExpectedEvent(node.label, node.partition, other.partition,
                                   Multiplicity.PER_TASKED_UV, instance_role)
            else:
                ev = ExpectedEvent(node.label, node.partition, other.partition)
            known = events.get(ev.label)
            if known is None:
                events[ev.label] = ev
            elif known != ev:
                warnings.append(f"action {ev.label!r} hands off inconsistently; keeping the first reading")
            sources.setdefault(ev.label, [])
            if node.id not in sources[ev.label]:
                sources[ev.label].append(node.id)
    if not events:
        warnings.append("flow has no cross-partition hand-offs; the protocol is empty")
    if concepts is not None:
        known_concepts = set(concepts)
        warnings += [f"event label {lbl!r} is not a concept name" for lbl in events if lbl not in known_concepts]

    reach = {lbl: set().union(*(_reachable(n, succ) for n in ids)) for lbl, ids in sources.items()}
    order: list[tuple[str, str]] = []
    for a in events:
        for b in events:
            if a == b:
                continue
            a_to_b = any(n in reach[a] for n in sources[b])
            b_to_a = any(n in reach[b] for n in sources[a])
            if a_to_b and not b_to_a:
                order.append((a, b))
            elif a_to_b and b_to_a and a < b:
                warnings.append(f"{a!r} and {b!r} lie on a cycle; left unordered")
    return ExpectedProtocol(tuple(events.values()), tuple(order), tuple(warnings))


def _id_key(node_id: str) -> tuple[int, str]:
    digits = "".join(ch for ch in node_id if ch.isdigit())
    return (int(digits) if digits else 0, node_id)


# --------------------------------------------------------------------------
# Checking


@dataclass(frozen=True)
class ConformanceReport:
    verdict: Verdict
    matched: tuple[tuple[str, int], ...]
    novel: tuple[str, ...]
    missing: tuple[str, ...]
    order_violations: tuple[tuple[str, str], ...]
    conflicting: tuple[str, ...] = ()
    multiplicity: tuple[str, ...] = ()
    strict: bool = False

    @property
    def novel_set(self) -> frozenset[str]:
        return frozenset(self.novel)

    def violations(self) -> list[str]:
        out = [f"missing event {m}" for m in self.missing]
        out += [f"{later} observed before {earlier}" for earlier, later in self.order_violations]
        out += [f"conflicting message {c}" for c in self.conflicting]
        out += list(self.multiplicity)
        if self.strict:
            out += [f"novel event {n}" for n in self.novel]
        return out

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "matched": {label: count for label, count in self.matched},
            "novel": list(self.novel),
            "missing": list(self.missing),
            "orderViolations": [list(p) for p in self.order_violations],
            "conflicting": list(self.conflicting),
            "multiplicity": list(self.multiplicity),
            "strict": self.strict,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def render(self) -> str:
        lines = [f"verdict: {self.verdict.value}"]
        lines.append("matched: " + (", ".join(f"{lbl} x{n}" for lbl, n in self.matched) or "-"))
        lines.append("novel: " + (", ".join(self.novel) or "-"))
        lines.append("missing: " + (", ".join(self.missing) or "-"))
        for v in self.violations():
            lines.append(f"violation: {v}")
        return "\n".join(lines) + "\n"


def _roles(trace: MessageTrace, instance: str) -> list[str]:
    return list(trace.roles.get(instance) or [instance])


def check_trace(trace: MessageTrace, expected: ExpectedProtocol, strict: bool = False) -> ConformanceReport:
    """Compare a trace with the expected protocol; only relative message order matters."""
    msgs = sorted(trace.messages, key=lambda m: m.t)
    # occurrences per event: (position, per-instance key)
    hits: dict[str, list[tuple[int, str | None]]] = {e.label: [] for e in expected.events}
    novel: list[str] = []
    conflicting: list[str] = []
    for pos, m in enumerate(msgs):
        ev = expected.event(m.concept)
        if ev is None:
            if m.concept not in novel:
                novel.append(m.concept)
            continue
        s_roles, r_roles = _roles(trace, m.sender), _roles(trace, m.receiver)
        if ev.sender_role not in s_roles or ev.receiver_role not in r_roles:
            conflicting.append(f"{m.concept} {m.sender} -> {m.receiver} at t={m.t}")
            continue
        key = None
        if ev.multiplicity is Multiplicity.PER_TASKED_UV:
            key = m.receiver if ev.instance_role in r_roles and ev.instance_role not in s_roles else m.sender
        hits[ev.label].append((pos, key))

    missing = [e.label for e in expected.events if not hits[e.label]]
    problems: list[str] = []
    for e in expected.events:
        n = len(hits[e.label])
        if e.multiplicity is Multiplicity.ONCE and n > 1:
            problems.append(f"{e.label} occurs {n} times, expected once")
    per = [e for e in expected.events if e.multiplicity is Multiplicity.PER_TASKED_UV and hits[e.label]]
    for e in per:
        keys = [k for _, k in hits[e.label]]
        if len(set(keys)) != len(keys):
            problems.append(f"{e.label} occurs more than once for the same instance")
    key_sets = {e.label: {k for _, k in hits[e.label]} for e in per}
    for a in per:
        for b in per:
            if a.label < b.label and key_sets[a.label] != key_sets[b.label]:
                problems.append(f"{a.label} and {b.label} cover different instances")

    order_violations: list[tuple[str, str]] = []
    for a, b in expected.order:
        ea, eb = expected.event(a), expected.event(b)
        if not hits[a] or not hits[b]:
            continue
        both_per = ea.multiplicity is Multiplicity.PER_TASKED_UV and eb.multiplicity is Multiplicity.PER_TASKED_UV
        if both_per:
            first_a = {}
            for pos, key in hits[a]:
                first_a.setdefault(key, pos)
            bad = any(key in first_a and pos < first_a[key] for pos, key in hits[b])
        else:
            # every occurrence of a must precede every occurrence of b
            bad = min(pos for pos, _ in hits[b]) < max(pos for pos, _ in hits[a])
        if bad:
            order_violations.append((a, b))

    violating = bool(missing or order_violations or conflicting or problems or (strict and novel))
    if violating:
        verdict = Verdict.VIOLATING
    elif novel:
        verdict = Verdict.CONFORMANT_WITH_NOVEL
    else:
        verdict = Verdict.CONFORMANT
    matched = tuple((e.label, len(hits[e.label])) for e in expected.events if hits[e.label])
    return ConformanceReport(verdict, matched, tuple(novel), tuple(missing), tuple(order_violations),
                             tuple(conflicting), tuple(problems), strict)
