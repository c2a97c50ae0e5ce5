"""OCL-subset constraints: parsing, binding to a model, and evaluation.

Supported surface::

    context UV inv scoreRange: self.performanceScore >= 0 and self.performanceScore <= 100
    context UV inv uniqueId: UV.allInstances()->isUnique(uvId)
    context UVFManager inv fleetSize: self.manages->size() >= 1
    context UV::assignTask(task : UVTask) pre idle: self.oclInState(Uncontrolled)
    context Operator::dispatchMission() post sent: self.pendingMissions = self.pendingMissions@pre - 1

An optional ``<<Kind>>`` after the constraint name declares the kind
explicitly; it must agree with the kind inferred from the syntax.

Evaluation is two-valued. A comparison that touches an unset attribute does
not quietly become true or false: the whole constraint is reported as a
violation whose reason starts with ``undefined``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import Any, Iterable, Iterator, Mapping

from amdd.errors import BindingError, ParseError
from amdd.model import SystemModel, enum_values, value_matches_type

REAL_TOLERANCE = 1e-9


class ConstraintKind(str, Enum):
    UNIQUENESS = "Uniqueness"
    CARDINALITY = "Cardinality"
    VALUE = "Value"
    PRECONDITION = "Precondition"
    POSTCONDITION = "Postcondition"

    @property
    def is_invariant(self) -> bool:
        return self in (ConstraintKind.UNIQUENESS, ConstraintKind.CARDINALITY, ConstraintKind.VALUE)


# --------------------------------------------------------------------------
# Expression tree


class Expr:
    def children(self) -> tuple[Expr, ...]:
        return ()

    def walk(self) -> Iterator[Expr]:
        yield self
        for child in self.children():
            yield from child.walk()


@dataclass(frozen=True)
class Literal(Expr):
    value: Any
    text: str

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class EnumLiteral(Expr):
    name: str

    def __str__(self) -> str:
        return f"#{self.name}"


@dataclass(frozen=True)
class SelfRef(Expr):
    def __str__(self) -> str:
        return "self"


@dataclass(frozen=True)
class ClassRef(Expr):
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Nav(Expr):
    """``source.name`` or ``source.name@pre``: attribute or role navigation."""

    source: Expr
    name: str
    at_pre: bool = False

    def children(self) -> tuple[Expr, ...]:
        return (self.source,)

    def __str__(self) -> str:
        return f"{self.source}.{self.name}" + ("@pre" if self.at_pre else "")


@dataclass(frozen=True)
class Call(Expr):
    """``source.op(args)``: ``allInstances()`` or ``oclInState(State)``."""

    source: Expr
    name: str
    args: tuple[str, ...] = ()

    def children(self) -> tuple[Expr, ...]:
        return (self.source,)

    def __str__(self) -> str:
        return f"{self.source}.{self.name}({', '.join(self.args)})"


@dataclass(frozen=True)
class CollectionOp(Expr):
    """``source->size()`` or ``source->isUnique(attr)``."""

    source: Expr
    name: str
    args: tuple[str, ...] = ()

    def children(self) -> tuple[Expr, ...]:
        return (self.source,)

    def __str__(self) -> str:
        return f"{self.source}->{self.name}({', '.join(self.args)})"


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    operand: Expr

    def children(self) -> tuple[Expr, ...]:
        return (self.operand,)

    def __str__(self) -> str:
        if self.op == "not":
            return f"not {_wrap(self.operand, _PREC['not'])}"
        return f"-{_wrap(self.operand, _PREC['unary'])}"


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr

    def children(self) -> tuple[Expr, ...]:
        return (self.left, self.right)

    def __str__(self) -> str:
        prec = _PREC[self.op]
        if self.op == "implies":
            lp, rp = prec + 1, prec
        elif self.op in _COMPARISONS:
            lp = rp = prec + 1
        else:
            lp, rp = prec, prec + 1
        return f"{_wrap(self.left, lp)} {self.op} {_wrap(self.right, rp)}"


_COMPARISONS = ("=", "<>", "<", "<=", ">", ">=")
_PREC = {"implies": 1, "or": 2, "and": 3, "not": 4, "+": 6, "-": 6, "*": 7, "unary": 8}
_PREC.update({op: 5 for op in _COMPARISONS})


def _prec_of(e: Expr) -> float:
    if isinstance(e, Binary):
        return _PREC[e.op]
    if isinstance(e, Unary):
        return _PREC["not"] if e.op == "not" else _PREC["unary"]
    return 10


def _wrap(e: Expr, needed: float) -> str:
    return f"({e})" if _prec_of(e) < needed else str(e)


# --------------------------------------------------------------------------
# Constraints


@dataclass(frozen=True)
class Constraint:
    name: str
    kind: ConstraintKind
    context: str
    expr: Expr
    operation: str | None = None
    line: int = field(default=0, compare=False)

    def render(self) -> str:
        if self.operation is None:
            head = f"context {self.context} inv {self.name}"
        else:
            keyword = "pre" if self.kind is ConstraintKind.PRECONDITION else "post"
            head = f"context {self.context}::{self.operation}() {keyword} {self.name}"
        return f"{head}: {self.expr}"

    @property
    def is_class_level(self) -> bool:
        """True when the expression never mentions ``self``."""
        return not any(isinstance(e, SelfRef) for e in self.expr.walk())


@dataclass(frozen=True)
class ConstraintSet:
    constraints: tuple[Constraint, ...] = ()

    def __iter__(self) -> Iterator[Constraint]:
        return iter(self.constraints)

    def __len__(self) -> int:
        return len(self.constraints)

    def names(self) -> list[str]:
        return [c.name for c in self.constraints]

    def union(self, other: ConstraintSet) -> ConstraintSet:
        return ConstraintSet(self.constraints + other.constraints)

    def render(self) -> str:
        return "".join(c.render() + "\n" for c in self.constraints)


# --------------------------------------------------------------------------
# Lexer and parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>--[^\n]*)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<str>'[^'\n]*'|"[^"\n]*")
  | (?P<at>@pre\b)
  | (?P<op>->|::|<>|<=|>=|<<|>>|[=<>().,:#+\-*])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)

_KEYWORDS = {"context", "inv", "pre", "post", "and", "or", "not", "implies", "true", "false", "self"}


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str, origin: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1, origin)
        kind = m.lastgroup
        value = m.group()
        if kind not in ("ws", "comment"):
            if kind == "ident" and value in _KEYWORDS:
                kind = "kw"
            toks.append(_Tok(kind, value, line, pos - line_start + 1))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = pos + value.rindex("\n") + 1
        pos = m.end()
    return toks


class _Parser:
    def __init__(self, toks: list[_Tok], origin: str, end: tuple[int, int]):
        self.toks = toks
        self.i = 0
        self.origin = origin
        self.end = end

    def peek(self, offset: int = 0) -> _Tok | None:
        j = self.i + offset
        return self.toks[j] if j < len(self.toks) else None

    def error(self, message: str, tok: _Tok | None = None) -> ParseError:
        tok = tok or self.peek()
        if tok is None:
            return ParseError(message + " (unexpected end of input)", self.end[0], self.end[1], self.origin)
        return ParseError(message, tok.line, tok.col, self.origin)

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.text == text and tok.kind in ("op", "kw")

    def take(self, text: str) -> _Tok:
        if not self.at(text):
            raise self.error(f"expected {text!r}")
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def ident(self, what: str) -> _Tok:
        tok = self.peek()
        if tok is None or tok.kind != "ident":
            raise self.error(f"expected {what}")
        self.i += 1
        return tok

    # expression grammar, lowest precedence first

    def expr(self) -> Expr:
        left = self.disjunction()
        if self.at("implies"):
            self.i += 1
            return Binary("implies", left, self.expr())
        return left

    def disjunction(self) -> Expr:
        left = self.conjunction()
        while self.at("or"):
            self.i += 1
            left = Binary("or", left, self.conjunction())
        return left

    def conjunction(self) -> Expr:
        left = self.negation()
        while self.at("and"):
            self.i += 1
            left = Binary("and", left, self.negation())
        return left

    def negation(self) -> Expr:
        if self.at("not"):
            self.i += 1
            return Unary("not", self.negation())
        return self.comparison()

    def comparison(self) -> Expr:
        left = self.additive()
        tok = self.peek()
        if tok is not None and tok.kind == "op" and tok.text in _COMPARISONS:
            self.i += 1
            right = self.additive()
            nxt = self.peek()
            if nxt is not None and nxt.kind == "op" and nxt.text in _COMPARISONS:
                raise self.error("comparisons do not chain; use 'and'", nxt)
            return Binary(tok.text, left, right)
        return left

    def additive(self) -> Expr:
        left = self.multiplicative()
        while self.at("+") or self.at("-"):
            op = self.toks[self.i].text
            self.i += 1
            left = Binary(op, left, self.multiplicative())
        return left

    def multiplicative(self) -> Expr:
        left = self.unary()
        while self.at("*"):
            self.i += 1
            left = Binary("*", left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.at("-"):
            self.i += 1
            operand = self.unary()
            if isinstance(operand, Literal) and isinstance(operand.value, Decimal):
                return Literal(-operand.value, "-" + operand.text)
            return Unary("-", operand)
        return self.postfix()

    def postfix(self) -> Expr:
        node = self.primary()
        while True:
            if self.at("."):
                self.i += 1
                name = self.ident("attribute or operation name")
                if self.at("("):
                    args = self.arg_list()
                    if name.text not in ("allInstances", "oclInState"):
                        raise self.error(f"unsupported operation {name.text!r}", name)
                    node = Call(node, name.text, args)
                else:
                    at_pre = False
                    if self.peek() is not None and self.peek().kind == "at":
                        self.i += 1
                        at_pre = True
                    node = Nav(node, name.text, at_pre)
            elif self.at("->"):
                self.i += 1
                name = self.ident("collection operation")
                if name.text not in ("size", "isUnique"):
                    raise self.error(f"unsupported collection operation {name.text!r}", name)
                node = CollectionOp(node, name.text, self.arg_list())
            else:
                return node

    def arg_list(self) -> tuple[str, ...]:
        self.take("(")
        args: list[str] = []
        if not self.at(")"):
            args.append(self.ident("argument").text)
            while self.at(","):
                self.i += 1
                args.append(self.ident("argument").text)
        self.take(")")
        return tuple(args)

    def primary(self) -> Expr:
        tok = self.peek()
        if tok is None:
            raise self.error("expected an expression")
        if tok.kind == "num":
            self.i += 1
            return Literal(Decimal(tok.text), tok.text)
        if tok.kind == "str":
            self.i += 1
            return Literal(tok.text[1:-1], tok.text)
        if tok.kind == "kw" and tok.text in ("true", "false"):
            self.i += 1
            return Literal(tok.text == "true", tok.text)
        if tok.kind == "kw" and tok.text == "self":
            self.i += 1
            return SelfRef()
        if tok.kind == "op" and tok.text == "#":
            self.i += 1
            return EnumLiteral(self.ident("enumeration literal").text)
        if tok.kind == "ident":
            self.i += 1
            if self.at("::"):
                self.i += 1
                return EnumLiteral(self.ident("enumeration literal").text)
            return ClassRef(tok.text)
        if self.at("("):
            self.i += 1
            inner = self.expr()
            self.take(")")
            return inner
        raise self.error(f"unexpected {tok.text!r}")


def _infer_kind(keyword: str, expr: Expr) -> ConstraintKind:
    if keyword == "pre":
        return ConstraintKind.PRECONDITION
    if keyword == "post":
        return ConstraintKind.POSTCONDITION
    ops = {e.name for e in expr.walk() if isinstance(e, CollectionOp)}
    if "isUnique" in ops:
        return ConstraintKind.UNIQUENESS
    if "size" in ops:
        return ConstraintKind.CARDINALITY
    return ConstraintKind.VALUE


def parse_constraints(text: str, origin: str = "<inline>") -> ConstraintSet:
    """Parse a ``.ocl`` text into constraints, one per ``context`` block."""
    toks = _tokenize(text, origin)
    lines = text.split("\n")
    end = (len(lines), len(lines[-1]) + 1)
    starts = [i for i, t in enumerate(toks) if t.kind == "kw" and t.text == "context"]
    if toks and (not starts or starts[0] != 0):
        raise ParseError("expected 'context'", toks[0].line, toks[0].col, origin)
    out: list[Constraint] = []
    seen: dict[str, _Tok] = {}
    for k, start in enumerate(starts):
        stop = starts[k + 1] if k + 1 < len(starts) else len(toks)
        block_end = (toks[stop].line, toks[stop].col) if stop < len(toks) else end
        p = _Parser(toks[start:stop], origin, block_end)
        constraint = _parse_block(p)
        if constraint.name in seen:
            raise p.error(f"duplicate constraint name {constraint.name!r}", toks[start])
        seen[constraint.name] = toks[start]
        out.append(constraint)
    return ConstraintSet(tuple(out))


def _parse_block(p: _Parser) -> Constraint:
    first = p.take("context")
    context = p.ident("class name").text
    operation = None
    if p.at("::"):
        p.i += 1
        operation = p.ident("operation name").text
        p.take("(")
        depth = 1
        while depth:
            tok = p.peek()
            if tok is None:
                raise p.error("unterminated parameter list")
            if tok.text == "(":
                depth += 1
            elif tok.text == ")":
                depth -= 1
            p.i += 1
        if p.at(":") and p.peek(1) is not None and p.peek(1).kind == "ident" and not (
            p.peek(2) is not None and p.peek(2).text == ":"
        ):
            p.i += 2  # return type
            if p.at("*"):
                p.i += 1
    kw = p.peek()
    if kw is None or kw.text not in ("inv", "pre", "post") or kw.kind != "kw":
        raise p.error("expected 'inv', 'pre' or 'post'")
    p.i += 1
    if operation is None and kw.text != "inv":
        raise p.error(f"'{kw.text}' needs an operation context 'Class::op()'", kw)
    if operation is not None and kw.text == "inv":
        raise p.error("invariants take a class context, not an operation", kw)
    name = p.ident("constraint name")
    declared = None
    if p.at("<<"):
        p.i += 1
        kind_tok = p.ident("constraint kind")
        try:
            declared = ConstraintKind(kind_tok.text)
        except ValueError:
            raise p.error(f"unknown constraint kind {kind_tok.text!r}", kind_tok) from None
        p.take(">>")
    p.take(":")
    body_start = p.peek()
    expr = p.expr()
    if p.peek() is not None:
        raise p.error(f"unexpected {p.peek().text!r} after expression")

    for node in expr.walk():
        if isinstance(node, Nav) and node.at_pre and kw.text != "post":
            raise p.error("'@pre' is only allowed in postconditions", _find_at_pre(p.toks))
    ops = {e.name for e in expr.walk() if isinstance(e, CollectionOp)}
    sole = isinstance(expr, CollectionOp) and expr.name == "isUnique"
    if "isUnique" in ops and (kw.text != "inv" or not sole):
        raise p.error("isUnique() belongs in a Uniqueness invariant of its own", body_start)
    if "size" in ops and kw.text != "inv":
        raise p.error("size() bounds belong in a Cardinality invariant", body_start)
    kind = _infer_kind(kw.text, expr)
    if declared is not None and declared is not kind:
        raise p.error(f"declared kind {declared.value} but the expression is a {kind.value} constraint", name)
    return Constraint(name.text, kind, context, expr, operation, first.line)


def _find_at_pre(toks: list[_Tok]) -> _Tok | None:
    return next((t for t in toks if t.kind == "at"), None)


def render_constraints(cs: ConstraintSet) -> str:
    return cs.render()


# --------------------------------------------------------------------------
# Binding


@dataclass(frozen=True)
class BoundConstraints:
    """Constraints whose names all resolve against ``model``."""

    model: SystemModel
    constraints: ConstraintSet
    model_checksum: str

    def __iter__(self) -> Iterator[Constraint]:
        return iter(self.constraints)

    def __len__(self) -> int:
        return len(self.constraints)

    def for_class(self, class_name: str) -> list[Constraint]:
        """Constraints whose context is ``class_name`` itself (not inherited)."""
        return [c for c in self.constraints if c.context == class_name]

    def applicable(self, class_name: str) -> list[Constraint]:
        """Constraints whose context is ``class_name`` or one of its ancestors."""
        ancestors = set(self.model.ancestors(class_name))
        return [c for c in self.constraints if c.context in ancestors]

    def contracts(self, class_name: str, operation: str) -> list[Constraint]:
        return [
            c for c in self.applicable(class_name)
            if c.operation == operation and not c.kind.is_invariant
        ]


def bind(cs: ConstraintSet, model: SystemModel) -> BoundConstraints:
    """Resolve every class, attribute, role and state name used by ``cs``.

    Raises :class:`BindingError` listing every problem, each tagged with the
    constraint name.
    """
    issues: list[tuple[str, str]] = []
    for c in cs:
        issues.extend((c.name, msg) for msg in _binding_problems(c, model))
    if issues:
        raise BindingError(issues)
    return BoundConstraints(model, cs, model.checksum())


def _binding_problems(c: Constraint, model: SystemModel) -> list[str]:
    if model.get_class(c.context) is None:
        return [f"unknown class {c.context!r}"]
    problems: list[str] = []
    if c.operation is not None and model.find_method(c.context, c.operation) is None:
        problems.append(f"unknown operation {c.context}::{c.operation}")

    def typ(e: Expr) -> tuple:
        if isinstance(e, SelfRef):
            return ("object", c.context)
        if isinstance(e, ClassRef):
            if model.get_class(e.name) is None:
                problems.append(f"unknown class {e.name!r}")
                return ("error",)
            return ("class", e.name)
        if isinstance(e, Literal):
            if isinstance(e.value, bool):
                return ("boolean",)
            return ("number",) if isinstance(e.value, Decimal) else ("string",)
        if isinstance(e, EnumLiteral):
            return ("enumlit", e.name)
        if isinstance(e, Nav):
            src = typ(e.source)
            if src[0] == "error":
                return src
            if src[0] != "object":
                problems.append(f"cannot navigate {e.name!r} from {e.source}")
                return ("error",)
            attrs = model.all_attributes(src[1])
            if e.name in attrs:
                return ("attr", attrs[e.name].type)
            nav = model.navigation(src[1], e.name)
            if nav is not None:
                if e.at_pre:
                    problems.append(f"'@pre' applies to attributes, not role {e.name!r}")
                return ("collection", nav[1])
            problems.append(f"unknown attribute {src[1]}.{e.name}")
            return ("error",)
        if isinstance(e, Call):
            src = typ(e.source)
            if src[0] == "error":
                return src
            if e.name == "allInstances":
                if src[0] != "class" or e.args:
                    problems.append("allInstances() is called on a class name with no arguments")
                    return ("error",)
                return ("collection", src[1])
            if src[0] != "object" or len(e.args) != 1:
                problems.append("oclInState() takes one state name and applies to an object")
                return ("error",)
            sm = model.state_machine_for(src[1])
            if sm is None or sm.state(e.args[0]) is None:
                problems.append(f"unknown state {e.args[0]!r} for {src[1]}")
                return ("error",)
            return ("boolean",)
        if isinstance(e, CollectionOp):
            src = typ(e.source)
            if src[0] == "error":
                return src
            if src[0] != "collection":
                problems.append(f"{e.name}() needs a collection, got {e.source}")
                return ("error",)
            if e.name == "size":
                if e.args:
                    problems.append("size() takes no arguments")
                return ("number",)
            if len(e.args) != 1 or e.args[0] not in model.all_attributes(src[1]):
                problems.append(f"isUnique() needs one attribute of {src[1]}")
                return ("error",)
            return ("boolean",)
        if isinstance(e, Unary):
            inner = typ(e.operand)
            return ("boolean",) if e.op == "not" else inner
        if isinstance(e, Binary):
            left, right = typ(e.left), typ(e.right)
            if e.op in ("and", "or", "implies"):
                return ("boolean",)
            if e.op in _COMPARISONS:
                for attr_t, other in ((left, right), (right, left)):
                    if attr_t[0] == "attr" and other[0] == "enumlit":
                        literals = enum_values(attr_t[1])
                        if literals is None or other[1] not in literals:
                            problems.append(f"#{other[1]} is not a literal of {attr_t[1]}")
                return ("boolean",)
            return ("number",)
        return ("error",)

    typ(c.expr)
    return problems


# --------------------------------------------------------------------------
# Snapshots and evaluation


@dataclass(frozen=True)
class InstanceState:
    class_name: str
    instance_id: str
    attributes: Mapping[str, Any] = field(default_factory=dict)
    state: str | None = None
    links: tuple[tuple[str, str], ...] = ()

    def linked(self, role: str) -> list[str]:
        return [peer for name, peer in self.links if name == role]


@dataclass(frozen=True)
class ObjectSnapshot:
    instances: tuple[InstanceState, ...] = ()

    def __post_init__(self) -> None:
        ids = [i.instance_id for i in self.instances]
        if len(ids) != len(set(ids)):
            raise ValueError("instance ids in a snapshot must be unique")

    def get(self, instance_id: str) -> InstanceState | None:
        for inst in self.instances:
            if inst.instance_id == instance_id:
                return inst
        return None

    def of_class(self, model: SystemModel, class_name: str) -> list[InstanceState]:
        return [i for i in self.instances if model.is_subclass(i.class_name, class_name)]


@dataclass(frozen=True)
class TransitionRecord:
    instance_id: str
    operation: str
    pre: ObjectSnapshot
    post: ObjectSnapshot

    def __post_init__(self) -> None:
        if self.pre.get(self.instance_id) is None or self.post.get(self.instance_id) is None:
            raise ValueError(f"both snapshots must contain {self.instance_id!r}")


@dataclass(frozen=True)
class Violation:
    constraint: str
    kind: ConstraintKind
    instance_ids: tuple[str, ...]
    expression: str
    actual: Mapping[str, Any]
    reason: str = "false"

    @property
    def instance_id(self) -> str | None:
        return self.instance_ids[0] if self.instance_ids else None


class _Undefined(Exception):
    def __init__(self, what: str):
        self.what = what


class _Env:
    def __init__(self, model: SystemModel, snap: ObjectSnapshot, this: InstanceState | None,
                 pre_snap: ObjectSnapshot | None = None):
        self.model = model
        self.snap = snap
        self.this = this
        self.pre_snap = pre_snap
        self.seen: dict[str, Any] = {}
        self.duplicates: list[tuple[Any, list[str]]] = []


def _num(v: Any) -> Any:
    if isinstance(v, bool):
        return v
    if isinstance(v, int):
        return Decimal(v)
    return v


def _compare(op: str, a: Any, b: Any) -> bool:
    a, b = _num(a), _num(b)
    if isinstance(a, float) or isinstance(b, float):
        a, b = float(a), float(b)
        eq = abs(a - b) <= REAL_TOLERANCE
        table = {"=": eq, "<>": not eq, "<=": a <= b or eq, ">=": a >= b or eq,
                 "<": a < b and not eq, ">": a > b and not eq}
        return table[op]
    if op == "=":
        return a == b
    if op == "<>":
        return a != b
    try:
        return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]
    except TypeError:
        raise _Undefined(f"cannot order {a!r} and {b!r}") from None


def _arith(op: str, a: Any, b: Any) -> Any:
    a, b = _num(a), _num(b)
    if isinstance(a, bool) or isinstance(b, bool) or not all(isinstance(x, (Decimal, float)) for x in (a, b)):
        raise _Undefined(f"non-numeric operand in {op}")
    if isinstance(a, float) or isinstance(b, float):
        a, b = float(a), float(b)
    try:
        return {"+": a + b, "-": a - b, "*": a * b}[op]
    except InvalidOperation:
        raise _Undefined(f"invalid arithmetic in {op}") from None


def _eval(e: Expr, env: _Env) -> Any:
    if isinstance(e, Literal):
        return e.value
    if isinstance(e, EnumLiteral):
        return e.name
    if isinstance(e, SelfRef):
        if env.this is None:
            raise _Undefined("self")
        return env.this
    if isinstance(e, ClassRef):
        return e
    if isinstance(e, Nav):
        obj = _eval(e.source, env)
        if not isinstance(obj, InstanceState):
            raise _Undefined(str(e))
        if e.at_pre:
            if env.pre_snap is None:
                raise _Undefined(str(e))
            obj = env.pre_snap.get(obj.instance_id)
            if obj is None:
                raise _Undefined(str(e))
        if env.model.navigation(obj.class_name, e.name) is not None and e.name not in obj.attributes:
            peers = [env.snap.get(p) for p in obj.linked(e.name)]
            return [p for p in peers if p is not None]
        value = obj.attributes.get(e.name)
        env.seen[str(e)] = value
        if value is None:
            raise _Undefined(str(e))
        return value
    if isinstance(e, Call):
        src = _eval(e.source, env)
        if e.name == "allInstances":
            return env.snap.of_class(env.model, src.name)
        if not isinstance(src, InstanceState) or src.state is None:
            raise _Undefined(f"state of {e.source}")
        env.seen[f"{e.source}.state"] = src.state
        return e.args[0] in src.state.split(".")
    if isinstance(e, CollectionOp):
        items = _eval(e.source, env)
        if e.name == "size":
            env.seen[f"{e.source}->size()"] = len(items)
            return len(items)
        attr = e.args[0]
        groups: dict[Any, list[str]] = {}
        for inst in items:
            value = inst.attributes.get(attr)
            if value is None:
                raise _Undefined(f"{inst.instance_id}.{attr}")
            groups.setdefault(_hashable(value), []).append(inst.instance_id)
        dups = [(k, ids) for k, ids in groups.items() if len(ids) > 1]
        env.duplicates.extend(dups)
        return not dups
    if isinstance(e, Unary):
        v = _eval(e.operand, env)
        if e.op == "not":
            return not _truth(v)
        return _arith("-", 0, v)
    if isinstance(e, Binary):
        if e.op == "and":
            return _truth(_eval(e.left, env)) and _truth(_eval(e.right, env))
        if e.op == "or":
            return _truth(_eval(e.left, env)) or _truth(_eval(e.right, env))
        if e.op == "implies":
            return (not _truth(_eval(e.left, env))) or _truth(_eval(e.right, env))
        a, b = _eval(e.left, env), _eval(e.right, env)
        if e.op in _COMPARISONS:
            return _compare(e.op, a, b)
        return _arith(e.op, a, b)
    raise _Undefined(str(e))


def _truth(v: Any) -> bool:
    if not isinstance(v, bool):
        raise _Undefined(f"non-boolean value {v!r}")
    return v


def _hashable(v: Any) -> Any:
    return tuple(v) if isinstance(v, list) else v


def _evaluate(c: Constraint, env: _Env, subject: tuple[str, ...]) -> list[Violation]:
    try:
        ok = _truth(_eval(c.expr, env))
    except _Undefined as exc:
        return [Violation(c.name, c.kind, subject, str(c.expr), dict(env.seen), f"undefined: {exc.what}")]
    if ok:
        return []
    if env.duplicates:
        attr = next(e.args[0] for e in c.expr.walk() if isinstance(e, CollectionOp) and e.name == "isUnique")
        return [
            Violation(c.name, c.kind, tuple(ids), str(c.expr), {attr: value}, "duplicate")
            for value, ids in env.duplicates
        ]
    return [Violation(c.name, c.kind, subject, str(c.expr), dict(env.seen))]


def check_snapshot(bound: BoundConstraints, snap: ObjectSnapshot) -> list[Violation]:
    """Violations of every invariant (Uniqueness, Cardinality, Value) on ``snap``.

    Pre- and postconditions are transition-scoped and ignored here.
    """
    out: list[Violation] = []
    for c in bound:
        if not c.kind.is_invariant:
            continue
        if c.is_class_level:
            out.extend(_evaluate(c, _Env(bound.model, snap, None), ()))
            continue
        for inst in snap.of_class(bound.model, c.context):
            out.extend(_evaluate(c, _Env(bound.model, snap, inst), (inst.instance_id,)))
    return out


def check_transition(bound: BoundConstraints, rec: TransitionRecord) -> list[Violation]:
    """Pre/postcondition violations for one operation call.

    Preconditions are evaluated on ``rec.pre``; postconditions on ``rec.post``
    with ``@pre`` navigations read from ``rec.pre``.
    """
    return [v for _, v in evaluate_contracts(bound, rec) if v is not None]


def evaluate_contracts(bound: BoundConstraints, rec: TransitionRecord
                       ) -> list[tuple[Constraint, Violation | None]]:
    """Every applicable contract paired with its violation, or None when it held."""
    before = rec.pre.get(rec.instance_id)
    after = rec.post.get(rec.instance_id)
    results: list[tuple[Constraint, Violation | None]] = []
    for c in bound.contracts(before.class_name, rec.operation):
        if c.kind is ConstraintKind.PRECONDITION:
            env = _Env(bound.model, rec.pre, before)
        else:
            env = _Env(bound.model, rec.post, after, pre_snap=rec.pre)
        found = _evaluate(c, env, (rec.instance_id,))
        results.extend((c, v) for v in found) if found else results.append((c, None))
    return results


def constraint_names(cs: Iterable[Constraint]) -> list[str]:
    return [c.name for c in cs]


def snapshot_issues(model: SystemModel, snap: ObjectSnapshot) -> list[str]:
    """Ways in which ``snap`` fails to conform to ``model``; empty when it conforms.

    Unset attributes (absent or None) are allowed: they surface later as
    ``undefined`` violations rather than as conformance errors.
    """
    issues: list[str] = []
    for inst in snap.instances:
        if model.get_class(inst.class_name) is None:
            issues.append(f"{inst.instance_id}: unknown class {inst.class_name!r}")
            continue
        declared = model.all_attributes(inst.class_name)
        for name, value in inst.attributes.items():
            if name not in declared:
                issues.append(f"{inst.instance_id}: {inst.class_name} has no attribute {name!r}")
            elif value is not None and not value_matches_type(value, declared[name].type):
                issues.append(f"{inst.instance_id}.{name}: {value!r} is not a {declared[name].type}")
        sm = model.state_machine_for(inst.class_name)
        if inst.state is not None and (sm is None or sm.state(inst.state.split(".")[-1]) is None):
            issues.append(f"{inst.instance_id}: unknown state {inst.state!r}")
        for role, peer in inst.links:
            if model.navigation(inst.class_name, role) is None:
                issues.append(f"{inst.instance_id}: no role {role!r} from {inst.class_name}")
            elif snap.get(peer) is None:
                issues.append(f"{inst.instance_id}: link {role!r} to missing instance {peer!r}")
    return issues
