"""Control-flow graphs and cyclomatic complexity.

``M = E - N + 2P`` where P counts weakly connected components. Parallel
edges are counted individually; self-loops are allowed.

Graphs travel as a DOT subset::

    digraph Operator {
      entry -> check;
      check -> body;
      check -> exit;
      body -> exit;
    }

Node and edge attributes are accepted but ignored with a warning.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from amdd.codegen.ir import AgentProgramIR, BlockKind
from amdd.errors import GraphError, ParseError


class DotAttributeWarning(UserWarning):
    """Attributes in an imported DOT file were parsed and dropped."""


class RiskBand(str, Enum):
    LOW = "Low"
    MODERATE = "Moderate"
    HIGH = "High"
    SEVERE = "Severe"


# inclusive upper bound per band; Severe is open-ended
_BAND_LIMITS = ((10, RiskBand.LOW), (20, RiskBand.MODERATE), (50, RiskBand.HIGH))


def risk_band(m: int) -> RiskBand:
    if isinstance(m, bool) or not isinstance(m, int) or m < 1:
        raise ValueError(f"cyclomatic number must be a positive integer, got {m!r}")
    for limit, band in _BAND_LIMITS:
        if m <= limit:
            return band
    return RiskBand.SEVERE


@dataclass(frozen=True)
class ControlFlowGraph:
    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    label: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        if len(set(self.nodes)) != len(self.nodes):
            raise GraphError("duplicate node ids")
        known = set(self.nodes)
        for a, b in self.edges:
            for end in (a, b):
                if end not in known:
                    raise GraphError(f"edge {a} -> {b} has dangling endpoint {end!r}")

    @property
    def E(self) -> int:
        return len(self.edges)

    @property
    def N(self) -> int:
        return len(self.nodes)

    def relabel(self, label: str) -> ControlFlowGraph:
        return ControlFlowGraph(self.nodes, self.edges, label)


def disjoint_union(graphs: Sequence[ControlFlowGraph], label: str = "") -> ControlFlowGraph:
    """Union of graphs with node ids prefixed by their position."""
    nodes: list[str] = []
    edges: list[tuple[str, str]] = []
    for i, g in enumerate(graphs):
        nodes.extend(f"g{i}_{n}" for n in g.nodes)
        edges.extend((f"g{i}_{a}", f"g{i}_{b}") for a, b in g.edges)
    return ControlFlowGraph(tuple(nodes), tuple(edges), label)


def weak_components(g: ControlFlowGraph) -> int:
    parent = {n: n for n in g.nodes}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    count = len(parent)
    for a, b in g.edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            count -= 1
    return count


@dataclass(frozen=True)
class ComplexityReport:
    label: str
    E: int
    N: int
    P: int
    M: int
    band: RiskBand

    def __post_init__(self) -> None:
        if self.M != self.E - self.N + 2 * self.P:
            raise GraphError(f"{self.label}: M={self.M} does not equal E - N + 2P")
        if self.band is not risk_band(self.M):
            raise GraphError(f"{self.label}: band {self.band.value} inconsistent with M={self.M}")

    def to_dict(self) -> dict:
        return {"label": self.label, "E": self.E, "N": self.N, "P": self.P, "M": self.M,
                "band": self.band.value}


def cyclomatic(g: ControlFlowGraph) -> ComplexityReport:
    if g.N == 0:
        raise GraphError(f"graph {g.label or '<anonymous>'} has no nodes")
    p = weak_components(g)
    m = g.E - g.N + 2 * p
    return ComplexityReport(g.label, g.E, g.N, p, m, risk_band(m))


# --------------------------------------------------------------------------
# DOT subset

_DOT_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*|\#[^\n]*|/\*.*?\*/)
  | (?P<arrow>->)
  | (?P<id>[A-Za-z0-9_]+|"(?:[^"\\]|\\.)*")
  | (?P<punct>[{}\[\];=,])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class _DotTok:
    kind: str
    text: str
    line: int
    col: int


def _dot_tokens(text: str, origin: str) -> list[_DotTok]:
    out: list[_DotTok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _DOT_TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1, origin)
        if m.lastgroup not in ("ws", "comment"):
            value = m.group()
            if value.startswith('"'):
                value = value[1:-1].replace('\\"', '"')
            out.append(_DotTok(m.lastgroup, value, line, pos - line_start + 1))
        chunk = m.group()
        if "\n" in chunk:
            line += chunk.count("\n")
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    return out


def import_cfg(text: str, origin: str = "<inline>") -> ControlFlowGraph:
    """Parse a DOT-subset digraph.

    When the file declares nodes explicitly, every edge endpoint must be one
    of them; otherwise nodes are collected from edges in order of appearance.
    """
    toks = _dot_tokens(text, origin)
    i = 0
    end = text.count("\n") + 1

    def peek() -> _DotTok | None:
        return toks[i] if i < len(toks) else None

    def fail(message: str, tok: _DotTok | None = None) -> ParseError:
        tok = tok or peek()
        if tok is None:
            return ParseError(message + " (unexpected end of input)", end, 1, origin)
        return ParseError(message, tok.line, tok.col, origin)

    def expect(text_: str) -> _DotTok:
        nonlocal i
        tok = peek()
        if tok is None or tok.text != text_ or tok.kind not in ("punct", "id"):
            raise fail(f"expected {text_!r}")
        i += 1
        return tok

    def skip_attributes() -> bool:
        nonlocal i
        if peek() is None or peek().text != "[":
            return False
        start = peek()
        while peek() is not None and peek().text != "]":
            i += 1
        if peek() is None:
            raise fail("unterminated attribute list", start)
        i += 1
        return True

    if peek() is not None and peek().text == "strict":
        raise fail("strict digraphs are not supported")
    expect("digraph")
    label = ""
    if peek() is not None and peek().kind == "id":
        label = peek().text
        i += 1
    expect("{")
    declared: list[str] = []
    implied: list[str] = []
    edges: list[tuple[str, str]] = []
    edge_toks: list[tuple[_DotTok, _DotTok]] = []
    dropped = 0
    while True:
        tok = peek()
        if tok is None:
            raise fail("missing closing '}'")
        if tok.text == "}" and tok.kind == "punct":
            i += 1
            break
        if tok.text == ";":
            i += 1
            continue
        if tok.kind != "id":
            raise fail(f"unexpected {tok.text!r}")
        i += 1
        if tok.text in ("graph", "node", "edge") and peek() is not None and peek().text == "[":
            skip_attributes()
            dropped += 1
            continue
        if peek() is not None and peek().text == "=":
            i += 1
            if peek() is None or peek().kind != "id":
                raise fail("expected a value after '='")
            i += 1
            dropped += 1
            continue
        chain = [tok]
        while peek() is not None and peek().kind == "arrow":
            i += 1
            nxt = peek()
            if nxt is None or nxt.kind != "id":
                raise fail("expected a node id after '->'")
            i += 1
            chain.append(nxt)
        if skip_attributes():
            dropped += 1
        if len(chain) == 1:
            if tok.text in declared:
                raise fail(f"node {tok.text!r} declared twice", tok)
            declared.append(tok.text)
        else:
            for a, b in zip(chain, chain[1:]):
                edges.append((a.text, b.text))
                edge_toks.append((a, b))
                for n in (a.text, b.text):
                    if n not in implied:
                        implied.append(n)
    if peek() is not None:
        raise fail("content after the closing '}'")
    if dropped:
        warnings.warn(f"{origin}: ignored {dropped} attribute statement(s)", DotAttributeWarning, stacklevel=2)
    if declared:
        known = set(declared)
        for a, b in edge_toks:
            for t in (a, b):
                if t.text not in known:
                    raise fail(f"dangling edge endpoint {t.text!r}", t)
        nodes = declared
    else:
        nodes = implied
    if not nodes:
        raise ParseError("graph has no nodes; N >= 1 is required", end, 1, origin)
    return ControlFlowGraph(tuple(nodes), tuple(edges), label)


_PLAIN_ID = re.compile(r"[A-Za-z0-9_]+")


def _dot_id(name: str) -> str:
    return name if _PLAIN_ID.fullmatch(name) else '"' + name.replace('"', '\\"') + '"'


def export_cfg(g: ControlFlowGraph) -> str:
    head = f"digraph {_dot_id(g.label)} {{" if g.label else "digraph {"
    lines = [head]
    lines += [f"  {_dot_id(n)};" for n in g.nodes]
    lines += [f"  {_dot_id(a)} -> {_dot_id(b)};" for a, b in g.edges]
    lines.append("}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Report comparison and output


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    before: ComplexityReport | None
    after: ComplexityReport | None
    dE: int
    dN: int
    dM: int

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "before": self.before.to_dict() if self.before else None,
            "after": self.after.to_dict() if self.after else None,
            "dE": self.dE, "dN": self.dN, "dM": self.dM,
        }


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[ComparisonRow, ...]
    totals: ComparisonRow

    def delta_m(self) -> dict[str, int]:
        return {r.label: r.dM for r in self.rows}

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows], "totals": self.totals.to_dict()}

    def render(self) -> str:
        header = f"{'label':<14}{'M(a)':>6}{'M(b)':>6}{'dE':>5}{'dN':>5}{'dM':>5}"
        lines = [header, "-" * len(header)]
        for r in (*self.rows, self.totals):
            ma = r.before.M if r.before else "-"
            mb = r.after.M if r.after else "-"
            lines.append(f"{r.label:<14}{ma:>6}{mb:>6}{r.dE:>+5}{r.dN:>+5}{r.dM:>+5}")
        return "\n".join(lines) + "\n"


def compare_reports(a: Iterable[ComplexityReport], b: Iterable[ComplexityReport]) -> ComparisonTable:
    """Per-label deltas (b minus a), rows sorted by label, with a totals row.

    Raises :class:`GraphError` naming every label present on one side only.
    """
    left = {r.label: r for r in a}
    right = {r.label: r for r in b}
    only_left = sorted(set(left) - set(right))
    only_right = sorted(set(right) - set(left))
    if only_left or only_right:
        parts = []
        if only_left:
            parts.append("only in first: " + ", ".join(only_left))
        if only_right:
            parts.append("only in second: " + ", ".join(only_right))
        raise GraphError("report labels do not align (" + "; ".join(parts) + ")")
    rows = tuple(
        ComparisonRow(lbl, left[lbl], right[lbl], right[lbl].E - left[lbl].E,
                      right[lbl].N - left[lbl].N, right[lbl].M - left[lbl].M)
        for lbl in sorted(left)
    )
    totals = ComparisonRow("TOTAL", None, None, sum(r.dE for r in rows), sum(r.dN for r in rows),
                           sum(r.dM for r in rows))
    return ComparisonTable(rows, totals)


def render_reports(reports: Iterable[ComplexityReport]) -> str:
    header = f"{'label':<14}{'E':>5}{'N':>5}{'P':>4}{'M':>5}  band"
    lines = [header, "-" * (len(header) + 6)]
    for r in sorted(reports, key=lambda r: r.label):
        lines.append(f"{r.label:<14}{r.E:>5}{r.N:>5}{r.P:>4}{r.M:>5}  {r.band.value}")
    return "\n".join(lines) + "\n"


def reports_to_json(reports: Iterable[ComplexityReport]) -> str:
    data = [r.to_dict() for r in sorted(reports, key=lambda r: r.label)]
    return json.dumps(data, indent=2) + "\n"


def extract_cfg(program: AgentProgramIR) -> ControlFlowGraph:
    """Flatten an agent program into one control-flow graph.

    A dispatcher entry node leads into the first handler; handler bodies are
    chained in order, each body's Entry and Exit elided so that whatever
    reached a handler's Exit flows into the next handler, and the last one
    into a single ``exit`` node.
    """
    nodes = ["dispatch"]
    edges: list[tuple[str, str]] = []
    next_start = "exit"
    chunks: list[tuple[list[str], list[tuple[str, str]]]] = []
    for idx in range(len(program.handlers) - 1, -1, -1):
        body = program.handlers[idx].body

        def name(block_id: str, _idx: int = idx, _body=body, _next: str = next_start) -> str:
            kind = _body.block(block_id).kind
            return _next if kind is BlockKind.EXIT else f"h{_idx}_{block_id}"

        own = [f"h{idx}_{b.id}" for b in body.blocks if b.kind not in (BlockKind.ENTRY, BlockKind.EXIT)]
        own_edges = [(name(e.source), name(e.target)) for e in body.edges if e.source != body.entry.id]
        chunks.append((own, own_edges))
        next_start = name(body.successors(body.entry.id)[0].target)
    edges.append(("dispatch", next_start))
    for own, own_edges in reversed(chunks):
        nodes.extend(own)
        edges.extend(own_edges)
    nodes.append("exit")
    return ControlFlowGraph(tuple(nodes), tuple(edges), program.agent_name)
