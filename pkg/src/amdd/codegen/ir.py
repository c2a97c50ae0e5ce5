"""Agent program intermediate representation: handlers over basic-block graphs."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable

from amdd.errors import GenerationError
from amdd.model import Attribute


class BlockKind(str, Enum):
    ENTRY = "Entry"
    EXIT = "Exit"
    STATEMENT = "Statement"
    BRANCH = "Branch"


@dataclass(frozen=True)
class Block:
    id: str
    kind: BlockKind
    text: str = ""


@dataclass(frozen=True)
class BlockEdge:
    source: str
    target: str
    label: str | None = None


# allowed out-degree per block kind
_OUT_DEGREE = {BlockKind.ENTRY: 1, BlockKind.STATEMENT: 1, BlockKind.BRANCH: 2, BlockKind.EXIT: 0}


@dataclass(frozen=True)
class BasicBlockGraph:
    """A single-entry, single-exit handler body.

    Entry and Statement blocks have one successor, Branch blocks two, Exit none.
    Every block is reachable from Entry.
    """

    blocks: tuple[Block, ...]
    edges: tuple[BlockEdge, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(self, "edges", tuple(self.edges))
        problems = graph_problems(self)
        if problems:
            raise GenerationError("invalid basic-block graph: " + "; ".join(problems))

    def block(self, block_id: str) -> Block:
        return next(b for b in self.blocks if b.id == block_id)

    @property
    def entry(self) -> Block:
        return next(b for b in self.blocks if b.kind is BlockKind.ENTRY)

    @property
    def exit(self) -> Block:
        return next(b for b in self.blocks if b.kind is BlockKind.EXIT)

    def successors(self, block_id: str) -> list[BlockEdge]:
        return [e for e in self.edges if e.source == block_id]

    def count(self, kind: BlockKind) -> int:
        return sum(1 for b in self.blocks if b.kind is kind)


def graph_problems(g: BasicBlockGraph) -> list[str]:
    problems: list[str] = []
    ids = [b.id for b in g.blocks]
    if len(set(ids)) != len(ids):
        problems.append("duplicate block ids")
    kinds = {b.id: b.kind for b in g.blocks}
    for kind in (BlockKind.ENTRY, BlockKind.EXIT):
        n = sum(1 for b in g.blocks if b.kind is kind)
        if n != 1:
            problems.append(f"expected exactly one {kind.value} block, found {n}")
    out: dict[str, int] = {i: 0 for i in ids}
    for e in g.edges:
        if e.source not in kinds or e.target not in kinds:
            problems.append(f"edge {e.source} -> {e.target} leaves the graph")
            continue
        if kinds[e.target] is BlockKind.ENTRY:
            problems.append(f"edge {e.source} -> {e.target} re-enters Entry")
        out[e.source] += 1
    for b in g.blocks:
        if out.get(b.id) != _OUT_DEGREE[b.kind]:
            problems.append(f"{b.kind.value} block {b.id} has out-degree {out.get(b.id)}")
    if problems:
        return problems
    entry = next(b.id for b in g.blocks if b.kind is BlockKind.ENTRY)
    seen = {entry}
    stack = [entry]
    while stack:
        cur = stack.pop()
        for e in g.edges:
            if e.source == cur and e.target not in seen:
                seen.add(e.target)
                stack.append(e.target)
    missing = [i for i in ids if i not in seen]
    if missing:
        problems.append("unreachable blocks: " + ", ".join(missing))
    return problems


class GraphBuilder:
    """Incremental construction of a structured handler body."""

    def __init__(self) -> None:
        self.blocks: list[Block] = [Block("entry", BlockKind.ENTRY)]
        self.edges: list[BlockEdge] = []
        self.open: list[tuple[str, str | None]] = [("entry", None)]
        self._exits: list[tuple[str, str | None]] = []
        self._n = 0

    def _new(self, kind: BlockKind, text: str) -> str:
        self._n += 1
        block_id = f"b{self._n}"
        self.blocks.append(Block(block_id, kind, text))
        return block_id

    def _link(self, target: str) -> None:
        for source, label in self.open:
            self.edges.append(BlockEdge(source, target, label))

    def statement(self, text: str) -> str:
        block_id = self._new(BlockKind.STATEMENT, text)
        self._link(block_id)
        self.open = [(block_id, None)]
        return block_id

    def guard(self, text: str, on_fail: Iterable[str] = ()) -> str:
        """Branch on ``text``; the false arm runs ``on_fail`` statements and leaves the handler."""
        block_id = self._new(BlockKind.BRANCH, text)
        self._link(block_id)
        tail: tuple[str, str | None] = (block_id, "false")
        for stmt in on_fail:
            s = self._new(BlockKind.STATEMENT, stmt)
            self.edges.append(BlockEdge(tail[0], s, tail[1]))
            tail = (s, None)
        self._exits.append(tail)
        self.open = [(block_id, "true")]
        return block_id

    def loop(self, text: str, body: Iterable[str]) -> str:
        """A loop header branching into ``body`` with a back-edge, or past it when done."""
        header = self._new(BlockKind.BRANCH, text)
        self._link(header)
        self.open = [(header, "next")]
        for stmt in body:
            self.statement(stmt)
        for source, label in self.open:
            self.edges.append(BlockEdge(source, header, label))
        self.open = [(header, "done")]
        return header

    def build(self) -> BasicBlockGraph:
        exit_id = "exit"
        self.blocks.append(Block(exit_id, BlockKind.EXIT))
        self._link(exit_id)
        for source, label in self._exits:
            self.edges.append(BlockEdge(source, exit_id, label))
        return BasicBlockGraph(tuple(self.blocks), tuple(self.edges))


@dataclass(frozen=True)
class Handler:
    trigger: str
    body: BasicBlockGraph


@dataclass(frozen=True)
class Guard:
    constraint: str
    attachment: str


@dataclass(frozen=True)
class AgentProgramIR:
    agent_name: str
    attributes: tuple[Attribute, ...]
    handlers: tuple[Handler, ...]
    guards: tuple[Guard, ...] = ()

    def handler(self, trigger: str) -> Handler | None:
        return next((h for h in self.handlers if h.trigger == trigger), None)

    def branch_count(self) -> int:
        return sum(h.body.count(BlockKind.BRANCH) for h in self.handlers)


# --------------------------------------------------------------------------
# JSON form


def program_to_dict(p: AgentProgramIR) -> dict[str, Any]:
    return {
        "agentName": p.agent_name,
        "attributes": [{"name": a.name, "type": a.type} for a in p.attributes],
        "handlers": [
            {
                "trigger": h.trigger,
                "blocks": [{"id": b.id, "kind": b.kind.value, "text": b.text} for b in h.body.blocks],
                "edges": [{"from": e.source, "to": e.target, "label": e.label} for e in h.body.edges],
            }
            for h in p.handlers
        ],
        "guards": [{"constraint": g.constraint, "attachment": g.attachment} for g in p.guards],
    }


def program_from_dict(data: Any) -> AgentProgramIR:
    try:
        handlers = tuple(
            Handler(
                h["trigger"],
                BasicBlockGraph(
                    tuple(Block(b["id"], BlockKind(b["kind"]), b.get("text", "")) for b in h["blocks"]),
                    tuple(BlockEdge(e["from"], e["to"], e.get("label")) for e in h["edges"]),
                ),
            )
            for h in data["handlers"]
        )
        return AgentProgramIR(
            data["agentName"],
            tuple(Attribute(a["name"], a["type"]) for a in data.get("attributes", [])),
            handlers,
            tuple(Guard(g["constraint"], g["attachment"]) for g in data.get("guards", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise GenerationError(f"not an agent program: {exc}") from None


def program_to_json(p: AgentProgramIR) -> str:
    return json.dumps(program_to_dict(p), indent=2, sort_keys=True) + "\n"


def program_from_json(text: str) -> AgentProgramIR:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GenerationError(f"invalid program JSON: {exc}") from None
    return program_from_dict(data)
