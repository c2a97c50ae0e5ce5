"""Deterministic template backend producing analyzable agent programs.

Shape rules per program:

* ``setup`` handler: initialise attributes, register with the directory.
* one handler per operation: each precondition is a guard Branch whose false
  arm leaves the handler, then the operation body, then one assertion
  Statement per postcondition.
* with an ontology: an ``on_message`` handler whose Branch validates incoming
  content (rejects are answered with not-understood), and one handler per
  send/receive action. A send addressed to a many-valued association end
  becomes a fan-out loop.

Invariants are attached as guards but add no blocks: they are checked on
snapshots, not along a control path.
"""

from __future__ import annotations

from amdd.codegen.base import GenerationConfig, GenerationResult
from amdd.codegen.ir import AgentProgramIR, GraphBuilder, Guard, Handler
from amdd.errors import GenerationError
from amdd.model import Method, SystemModel
from amdd.ocl import BoundConstraints, ConstraintKind
from amdd.ontology import ActionSchema, Direction, OntologyRegistry


def program_classes(model: SystemModel) -> list[str]:
    """Classes that get a program of their own.

    Abstract classes get none. A concrete class that declares no members and
    has a concrete parent shares that parent's program.
    """
    out: list[str] = []
    for cls in model.classes:
        if cls.is_abstract:
            continue
        if not cls.attributes and not cls.methods and any(
            not model.get_class(p).is_abstract for p in model.parents(cls.name) if model.get_class(p)
        ):
            continue
        out.append(cls.name)
    return out


def _methods(model: SystemModel, name: str) -> list[Method]:
    seen: dict[str, Method] = {}
    for cls_name in model.ancestors(name):
        cls = model.get_class(cls_name)
        for m in cls.methods if cls else ():
            seen.setdefault(m.name, m)
    return list(seen.values())


def _many_valued(model: SystemModel, actor: str, peer: str) -> bool:
    """True if ``actor`` reaches ``peer`` through a many-valued association end."""
    mine, theirs = set(model.ancestors(actor)), set(model.ancestors(peer))
    for r in model.relationships:
        if r.source in mine and r.target in theirs and r.target_cardinality and r.target_cardinality.is_many:
            return True
        if r.target in mine and r.source in theirs and r.source_cardinality and r.source_cardinality.is_many:
            return True
    return False


def _operation_handler(m: Method, bound: BoundConstraints, owner: str) -> tuple[Handler, list[Guard]]:
    b = GraphBuilder()
    guards: list[Guard] = []
    contracts = bound.contracts(owner, m.name)
    for c in contracts:
        if c.kind is ConstraintKind.PRECONDITION:
            block = b.guard(f"pre {c.name}: {c.expr}")
            guards.append(Guard(c.name, f"{m.name}:{block}"))
    params = ", ".join(p.name for p in m.parameters)
    b.statement(f"{m.name}({params})")
    for c in contracts:
        if c.kind is ConstraintKind.POSTCONDITION:
            block = b.statement(f"assert post {c.name}: {c.expr}")
            guards.append(Guard(c.name, f"{m.name}:{block}"))
    return Handler(m.name, b.build()), guards


def _action_handler(model: SystemModel, a: ActionSchema) -> Handler:
    b = GraphBuilder()
    if a.direction is Direction.SEND:
        text = f"send {a.payload} to {a.counterparty}"
        if _many_valued(model, a.actor, a.counterparty):
            b.loop(f"for each addressed {a.counterparty}", [text])
        else:
            b.statement(text)
    else:
        b.statement(f"handle {a.payload} from {a.counterparty}")
    return Handler(a.name, b.build())


def build_program(model: SystemModel, name: str, bound: BoundConstraints,
                  reg: OntologyRegistry | None) -> AgentProgramIR:
    setup = GraphBuilder()
    setup.statement("initialise attributes")
    setup.statement("register with agent directory")
    handlers = [Handler("setup", setup.build())]
    guards = [Guard(c.name, "invariant") for c in bound.applicable(name) if c.kind.is_invariant]
    for m in _methods(model, name):
        handler, g = _operation_handler(m, bound, name)
        handlers.append(handler)
        guards.extend(g)
    if reg is not None:
        actions = reg.actions_of(name)
        if any(a.direction is Direction.RECEIVE for a in actions):
            inbox = GraphBuilder()
            inbox.guard("content validates against ontology", on_fail=["reply not-understood"])
            inbox.statement("dispatch on concept")
            handlers.append(Handler("on_message", inbox.build()))
        handlers.extend(_action_handler(model, a) for a in actions)
    attrs = tuple(model.all_attributes(name).values())
    return AgentProgramIR(name, attrs, tuple(handlers), tuple(guards))


def generate_template(model: SystemModel, bound: BoundConstraints, reg: OntologyRegistry | None,
                      cfg: GenerationConfig) -> GenerationResult:
    """One program per program class; a pure function of its inputs (``cfg.seed`` is unused)."""
    if bound.model_checksum != model.checksum():
        raise GenerationError("constraints were bound to a different model")
    use_reg = reg if cfg.include_ontology else None
    programs = tuple(build_program(model, name, bound, use_reg) for name in program_classes(model))
    log = f"template backend: {len(programs)} program(s), configuration {cfg.variant}\n"
    return GenerationResult(programs, None, log)
