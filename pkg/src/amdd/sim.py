"""Deterministic multi-agent runtime for the UV-fleet mission protocol.

One Operator, one MCC, one UVF manager and ``uv_count`` UVs exchange
ontology-typed messages over a FIFO delivery queue. Every message is stamped
with the next logical tick when it is sent. Operations named in the model
run under their OCL pre/postconditions; the first violation halts the run
and is kept on the trace.

The mission runs as follows:

1. Operator sends MissionBrief to MCC.
2. MCC sends DiscoverUVs (Request) to the manager, which answers with a
   UVList of available, registered UVs.
3. An empty list ends the mission with a NoAvailableUV MissionPerformance.
4. Otherwise: FleetPlan, one UVTask per selected UV, one UVPerformance
   back per UV, then FleetPerformance and MissionPerformance.
"""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

from amdd.errors import ModelError, ParseError
from amdd.model import SystemModel
from amdd.ocl import (BoundConstraints, InstanceState, ObjectSnapshot, TransitionRecord, Violation,
                      evaluate_contracts)
from amdd.ontology import ContentInstance, OntologyRegistry, check_action_conformance, validate_content

OPERATOR, MCC, MANAGER, UV = "Operator", "MCC", "UVFManager", "UV"
REQUEST, INFORM = "Request", "Inform"
PERFORMATIVES = {"DiscoverUVs": REQUEST}
IDLE = "Registered.Uncontrolled"
BUSY = "Registered.Controlled"
NO_AVAILABLE_UV = "NoAvailableUV"


def linear_mod_score(uv_index: int, seed: int) -> float:
    """Score in 50..100, a pure function of the UV's 1-based index and the seed."""
    return float(50 + (seed + 7 * uv_index) % 51)


SCORE_MODELS: dict[str, Callable[[int, int], float]] = {"linear-mod": linear_mod_score}


@dataclass(frozen=True)
class SimConfig:
    uv_count: int = 2
    availability: tuple[bool, ...] | None = None
    registration: tuple[bool, ...] | None = None
    seed: int = 0
    score_model: str = "linear-mod"
    controlled: tuple[bool, ...] | None = None
    success_threshold: float = 50.0
    mission_id: str = "m1"

    def __post_init__(self) -> None:
        if self.uv_count < 0:
            raise ValueError("uv_count must be >= 0")
        for name in ("availability", "registration", "controlled"):
            mask = getattr(self, name)
            if mask is None:
                mask = (name != "controlled",) * self.uv_count
            mask = tuple(bool(x) for x in mask)
            if len(mask) != self.uv_count:
                raise ValueError(f"{name} mask has {len(mask)} entries for {self.uv_count} UVs")
            object.__setattr__(self, name, mask)
        if self.score_model not in SCORE_MODELS:
            raise ValueError(f"unknown score model {self.score_model!r}")


@dataclass
class AgentInstance:
    role: str
    instance_id: str
    state: str | None
    attributes: dict[str, Any]


@dataclass(frozen=True)
class AclMessage:
    t: int
    performative: str
    sender: str
    receiver: str
    conversation_id: str
    content: ContentInstance

    @property
    def concept(self) -> str:
        return self.content.concept

    def to_dict(self) -> dict[str, Any]:
        return {
            "t": self.t,
            "performative": self.performative,
            "from": self.sender,
            "to": self.receiver,
            "conversation": self.conversation_id,
            "concept": self.concept,
            "slots": dict(self.content.slots),
        }


@dataclass(frozen=True)
class MessageTrace:
    messages: tuple[AclMessage, ...]
    final_states: dict[str, str | None]
    assertion_log: tuple[dict[str, Any], ...] = ()
    roles: dict[str, list[str]] = field(default_factory=dict)
    outcome: str = ""
    halted: tuple[dict[str, Any], ...] = ()

    def __len__(self) -> int:
        return len(self.messages)

    def concepts(self) -> list[str]:
        return [m.concept for m in self.messages]

    @property
    def aborted(self) -> bool:
        return self.outcome == NO_AVAILABLE_UV


def natural_key(text: str) -> list:
    return [int(p) if p.isdigit() else p for p in re.split(r"(\d+)", text)]


# --------------------------------------------------------------------------
# World


@dataclass
class _Context:
    model: SystemModel
    bound: BoundConstraints
    reg: OntologyRegistry
    cfg: SimConfig


@dataclass
class World:
    """Complete simulation state; :func:`step` never mutates its argument."""

    ctx: _Context
    agents: dict[str, AgentInstance]
    queue: list[AclMessage] = field(default_factory=list)
    clock: int = 0
    started: bool = False
    trace: list[AclMessage] = field(default_factory=list)
    log: list[dict[str, Any]] = field(default_factory=list)
    halted: list[dict[str, Any]] = field(default_factory=list)
    outcome: str = ""
    scratch: dict[str, Any] = field(default_factory=dict)

    def clone(self) -> World:
        return World(self.ctx, *copy.deepcopy(
            (self.agents, self.queue, self.clock, self.started, self.trace, self.log, self.halted,
             self.outcome, self.scratch)))

    @property
    def at_fixpoint(self) -> bool:
        return self.started and (not self.queue or bool(self.halted))

    def snapshot(self) -> ObjectSnapshot:
        return ObjectSnapshot(tuple(
            InstanceState(a.role, a.instance_id, dict(a.attributes), a.state, self._links(a))
            for a in self.agents.values()
        ))

    def _links(self, a: AgentInstance) -> tuple[tuple[str, str], ...]:
        model = self.ctx.model
        if a.instance_id == OPERATOR:
            return (("commands", MCC),) if model.navigation(OPERATOR, "commands") else ()
        if a.instance_id == MCC:
            return (("fleetManager", MANAGER),) if model.navigation(MCC, "fleetManager") else ()
        if a.instance_id == MANAGER and model.navigation(MANAGER, "manages"):
            return tuple(("manages", u) for u in self.uv_ids())
        return ()

    def uv_ids(self) -> list[str]:
        return sorted((i for i, a in self.agents.items() if a.instance_id.startswith("uv")), key=natural_key)

    def result(self) -> MessageTrace:
        model = self.ctx.model
        return MessageTrace(
            tuple(self.trace),
            {i: a.state for i, a in sorted(self.agents.items(), key=lambda kv: natural_key(kv[0]))},
            tuple(self.log),
            {i: model.ancestors(a.role) for i, a in sorted(self.agents.items(), key=lambda kv: natural_key(kv[0]))},
            self.outcome or ("halted" if self.halted else ""),
            tuple(self.halted),
        )


def _uv_roles(model: SystemModel) -> list[str]:
    concrete = [c for c in model.subclasses(UV) if not model.get_class(c).is_abstract]
    if concrete:
        return concrete
    if model.get_class(UV) is not None and not model.get_class(UV).is_abstract:
        return [UV]
    raise ModelError("the model has no concrete UV class")


def initial_world(cfg: SimConfig, model: SystemModel, bound: BoundConstraints, reg: OntologyRegistry) -> World:
    for role in (OPERATOR, MCC, MANAGER, UV):
        if model.get_class(role) is None:
            raise ModelError(f"the model lacks the {role} role")
    sm = model.state_machine_for(UV)
    if sm is None:
        raise ModelError("UV has no state machine")
    for name in ("Registered", "Uncontrolled", "Controlled", "Unregistered", "Unavailable"):
        if sm.state(name) is None:
            raise ModelError(f"UV state machine lacks state {name!r}")
    agents = {
        OPERATOR: AgentInstance(OPERATOR, OPERATOR, None,
                                {"operatorId": "op1", "pendingMissions": 1, "lastOutcome": ""}),
        MCC: AgentInstance(MCC, MCC, None, {"mccId": "mcc1", "missionActive": False, "knownUVs": 0}),
        MANAGER: AgentInstance(MANAGER, MANAGER, None,
                               {"managerId": "mgr1", "fleetSize": 0, "pendingReports": 0}),
    }
    roles = _uv_roles(model)
    for i in range(1, cfg.uv_count + 1):
        if cfg.controlled[i - 1]:
            state = BUSY
        elif not cfg.availability[i - 1]:
            state = sm.path("Unavailable")
        elif not cfg.registration[i - 1]:
            state = sm.path("Unregistered")
        else:
            state = IDLE
        uv_id = f"uv{i}"
        agents[uv_id] = AgentInstance(roles[(i - 1) % len(roles)], uv_id, state,
                                      {"uvId": uv_id, "performanceScore": 0.0, "missionId": ""})
    return World(_Context(model, bound, reg, cfg), agents)


# --------------------------------------------------------------------------
# Actions available to behaviours


def _ontology_role(w: World, instance_id: str) -> str:
    role = w.agents[instance_id].role
    actors = {a.actor for a in w.ctx.reg.actions.values()}
    return next((c for c in w.ctx.model.ancestors(role) if c in actors), role)


def _send(w: World, sender: str, receiver: str, concept: str, **slots: Any) -> None:
    if w.halted:
        return
    w.clock += 1
    content = ContentInstance(concept, slots)
    msg = AclMessage(w.clock, PERFORMATIVES.get(concept, INFORM), sender, receiver,
                     f"mission-{w.ctx.cfg.mission_id}", content)
    problems = validate_content(w.ctx.reg, content)
    w.log.append({"t": w.clock, "check": "content", "subject": concept, "instance": sender,
                  "ok": not problems, "detail": "; ".join(p.message for p in problems)})
    allowed = check_action_conformance(w.ctx.reg, _ontology_role(w, sender), _ontology_role(w, receiver), concept)
    w.log.append({"t": w.clock, "check": "action", "subject": concept, "instance": sender,
                  "ok": allowed, "detail": f"{sender} -> {receiver}"})
    w.trace.append(msg)
    w.queue.append(msg)
    if problems or not allowed:
        w.halted.append({"check": "ontology", "subject": concept, "instance": sender,
                         "detail": "; ".join(p.message for p in problems) or "action not declared"})


def _violation_dict(v: Violation) -> dict[str, Any]:
    return {"check": "constraint", "constraint": v.constraint, "kind": v.kind.value,
            "instances": list(v.instance_ids), "expression": v.expression,
            "actual": {k: _jsonable(x) for k, x in v.actual.items()}, "reason": v.reason}


def _jsonable(x: Any) -> Any:
    if isinstance(x, (str, int, float, bool)) or x is None:
        return x
    return str(x)


def _invoke(w: World, instance_id: str, operation: str, effect: Callable[[AgentInstance], None],
            event: str | None = None) -> bool:
    """Run ``operation`` on an agent under its contracts; False if the run halted."""
    if w.halted:
        return False
    agent = w.agents[instance_id]
    before = w.snapshot()
    trial = copy.deepcopy(agent)
    effect(trial)
    if event is not None and trial.state is not None:
        sm = w.ctx.model.state_machine_for(agent.role)
        target = sm.fire(trial.state, event)
        if target is not None:
            trial.state = target
    saved = w.agents[instance_id]
    w.agents[instance_id] = trial
    after = w.snapshot()
    w.agents[instance_id] = saved
    results = evaluate_contracts(w.ctx.bound, TransitionRecord(instance_id, operation, before, after))
    failed = [v for _, v in results if v is not None]
    for c, v in results:
        w.log.append({"t": w.clock, "check": c.kind.value, "subject": c.name, "instance": instance_id,
                      "ok": v is None, "detail": v.reason if v else ""})
    if failed:
        w.halted.extend(_violation_dict(v) for v in failed)
        return False
    w.agents[instance_id] = trial
    return True


# --------------------------------------------------------------------------
# Behaviours


def _operator_start(w: World) -> None:
    def effect(a: AgentInstance) -> None:
        a.attributes["pendingMissions"] -= 1

    if _invoke(w, OPERATOR, "dispatchMission", effect):
        _send(w, OPERATOR, MCC, "MissionBrief", missionId=w.ctx.cfg.mission_id, status="pending")


def _set(**values: Any) -> Callable[[AgentInstance], None]:
    def effect(a: AgentInstance) -> None:
        a.attributes.update(values)
    return effect


def _deliver(w: World, msg: AclMessage) -> None:
    slots = msg.content.slots
    mission = w.ctx.cfg.mission_id
    me = msg.receiver
    concept = msg.concept

    if me == MCC and concept == "MissionBrief":
        if _invoke(w, MCC, "receiveBrief", _set(missionActive=True)) and \
                _invoke(w, MCC, "discoverUVs", _set()):
            _send(w, MCC, MANAGER, "DiscoverUVs", missionId=slots["missionId"])

    elif me == MANAGER and concept == "DiscoverUVs":
        selected = [u for u in w.uv_ids() if w.agents[u].state is not None
                    and w.agents[u].state.split(".")[0] == "Registered"]
        if _invoke(w, MANAGER, "listUVs", _set(fleetSize=len(selected))):
            _send(w, MANAGER, MCC, "UVList", missionId=slots["missionId"], uvIds=selected)

    elif me == MCC and concept == "UVList":
        uv_ids = list(slots.get("uvIds") or [])
        w.agents[MCC].attributes["knownUVs"] = len(uv_ids)
        if not uv_ids:
            w.agents[MCC].attributes["missionActive"] = False
            w.outcome = NO_AVAILABLE_UV
            _send(w, MCC, OPERATOR, "MissionPerformance", missionId=slots["missionId"], outcome=NO_AVAILABLE_UV)
        elif _invoke(w, MCC, "planFleet", _set()):
            _send(w, MCC, MANAGER, "FleetPlan", planId=f"plan-{mission}", missionId=slots["missionId"],
                  uvIds=uv_ids)

    elif me == MANAGER and concept == "FleetPlan":
        uv_ids = list(slots["uvIds"])
        if _invoke(w, MANAGER, "assignTasks", _set(pendingReports=len(uv_ids))):
            w.scratch["scores"] = {}
            w.scratch["plan"] = uv_ids
            for u in uv_ids:
                _send(w, MANAGER, u, "UVTask", taskId=f"task-{mission}-{u}", uvId=u,
                      description=f"mission {mission} task for {u}")

    elif concept == "UVTask" and me in w.agents and me.startswith("uv"):
        index = int(me[2:])
        score = SCORE_MODELS[w.ctx.cfg.score_model](index, w.ctx.cfg.seed)
        if _invoke(w, me, "assignTask", _set(missionId=mission), event="assignTask") and \
                _invoke(w, me, "completeTask", _set(performanceScore=score), event="completeTask"):
            _send(w, me, MANAGER, "UVPerformance", uvId=me, score=score)

    elif me == MANAGER and concept == "UVPerformance":
        def collect(a: AgentInstance) -> None:
            a.attributes["pendingReports"] -= 1

        if _invoke(w, MANAGER, "collectPerformance", collect):
            w.scratch["scores"][slots["uvId"]] = slots["score"]
            if w.agents[MANAGER].attributes["pendingReports"] == 0 and _invoke(w, MANAGER, "reportFleet", _set()):
                scores = [w.scratch["scores"][u] for u in w.scratch["plan"]]
                mean = float(sum(Fraction(s) for s in scores) / len(scores))
                _send(w, MANAGER, MCC, "FleetPerformance", missionId=mission, meanScore=mean)

    elif me == MCC and concept == "FleetPerformance":
        mean = slots["meanScore"]
        outcome = "success" if mean >= w.ctx.cfg.success_threshold else "failure"
        if _invoke(w, MCC, "evaluateMission", _set(missionActive=False)):
            w.outcome = outcome
            _send(w, MCC, OPERATOR, "MissionPerformance", missionId=slots["missionId"], outcome=outcome,
                  meanScore=mean)

    elif me == OPERATOR and concept == "MissionPerformance":
        _invoke(w, OPERATOR, "receiveReport", _set(lastOutcome=slots.get("outcome", "")))


def step(world: World) -> tuple[World, list[AclMessage]]:
    """Advance by one delivery (or the initial kick-off); returns the new world and messages sent.

    A world at its fixpoint comes back unchanged with no messages.
    """
    if world.at_fixpoint:
        return world, []
    w = world.clone()
    before = len(w.trace)
    if not w.started:
        w.started = True
        _operator_start(w)
    else:
        _deliver(w, w.queue.pop(0))
    return w, w.trace[before:]


def run_mission(cfg: SimConfig, model: SystemModel, bound: BoundConstraints, reg: OntologyRegistry) -> MessageTrace:
    w = initial_world(cfg, model, bound, reg)
    while not w.at_fixpoint:
        w, _ = step(w)
    return w.result()


# --------------------------------------------------------------------------
# Persistence and rendering


def trace_to_jsonl(trace: MessageTrace) -> str:
    lines = [json.dumps(m.to_dict(), sort_keys=True) for m in trace.messages]
    footer = {
        "finalStates": trace.final_states,
        "assertionLog": list(trace.assertion_log),
        "roles": trace.roles,
        "outcome": trace.outcome,
        "halted": list(trace.halted),
    }
    lines.append(json.dumps(footer, sort_keys=True))
    return "\n".join(lines) + "\n"


def trace_from_jsonl(text: str, origin: str = "<trace>") -> MessageTrace:
    """Parse a JSON-lines trace. The footer line is optional."""
    messages: list[AclMessage] = []
    footer: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", lineno, exc.colno, origin) from None
        if not isinstance(obj, dict):
            raise ParseError("expected a JSON object", lineno, 1, origin)
        if "finalStates" in obj:
            if footer:
                raise ParseError("second footer line", lineno, 1, origin)
            footer = obj
            continue
        if footer:
            raise ParseError("message after the footer line", lineno, 1, origin)
        try:
            messages.append(AclMessage(int(obj["t"]), str(obj["performative"]), str(obj["from"]),
                                       str(obj["to"]), str(obj.get("conversation", "")),
                                       ContentInstance(str(obj["concept"]), dict(obj.get("slots") or {}))))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed message: {exc}", lineno, 1, origin) from None
    return MessageTrace(tuple(messages), dict(footer.get("finalStates", {})),
                        tuple(footer.get("assertionLog", [])), dict(footer.get("roles", {})),
                        str(footer.get("outcome", "")), tuple(footer.get("halted", [])))


def _slot_text(value: Any) -> str:
    if isinstance(value, list):
        return "[" + ", ".join(str(v) for v in value) + "]"
    return str(value)


def render_sequence_diagram(trace: MessageTrace) -> str:
    """PlantUML sequence diagram: one lifeline per instance, one arrow per message."""
    lines = ["@startuml"]
    seen: list[str] = []
    for m in trace.messages:
        for who in (m.sender, m.receiver):
            if who not in seen:
                seen.append(who)
    lines += [f"participant {who}" for who in seen]
    for m in sorted(trace.messages, key=lambda m: m.t):
        args = ", ".join(f"{k}={_slot_text(v)}" for k, v in m.content.slots.items())
        arrow = "->>" if m.performative == REQUEST else "->"
        lines.append(f"{m.sender} {arrow} {m.receiver} : {m.concept}({args})")
    lines.append("@enduml")
    return "\n".join(lines) + "\n"
