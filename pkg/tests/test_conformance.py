from __future__ import annotations

import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amdd.conformance import (ExpectedEvent, ExpectedProtocol, Multiplicity, Verdict, check_trace,
                              derive_expected)
from amdd.model import ActivityEdge, ActivityFlow, ActivityNode, NodeKind
from amdd.sim import MessageTrace, SimConfig, run_mission

REQUIRED = ["MissionBrief", "FleetPlan", "UVTask", "UVPerformance", "FleetPerformance", "MissionPerformance"]


@pytest.fixture(scope="module")
def protocol():
    from amdd.fixtures import uvf_model
    return derive_expected(uvf_model().activities[0])


@pytest.fixture
def run(model, bound, registry):
    return lambda **kw: run_mission(SimConfig(**kw), model, bound, registry)


def _without(trace: MessageTrace, pred) -> MessageTrace:
    return dataclasses.replace(trace, messages=tuple(m for m in trace.messages if not pred(m)))


def _flow(*nodes: tuple[str, NodeKind, str, str | None]) -> ActivityFlow:
    ns = tuple(ActivityNode(i, k, label, part) for i, k, label, part in nodes)
    edges = tuple(ActivityEdge(a.id, b.id) for a, b in zip(ns, ns[1:]))
    return ActivityFlow(tuple(sorted({n.partition for n in ns if n.partition})), ns, edges)


def test_derived_events(protocol):
    assert protocol.labels() == REQUIRED
    per = {e.label for e in protocol.events if e.multiplicity is Multiplicity.PER_TASKED_UV}
    assert per == {"UVTask", "UVPerformance"}
    assert protocol.event("UVTask").instance_role == "UV"
    assert protocol.before("MissionBrief", "FleetPlan")
    assert protocol.before("UVTask", "UVPerformance")
    assert not protocol.before("UVPerformance", "UVTask")
    assert protocol.warnings == ()


def test_concept_label_warnings(model, registry):
    p = derive_expected(model.activities[0], ["MissionBrief"])
    assert any("FleetPlan" in w for w in p.warnings)
    assert derive_expected(model.activities[0], registry.concepts).warnings == ()


def test_single_partition_flow():
    flow = _flow(("n0", NodeKind.INITIAL, "", None), ("n1", NodeKind.ACTION, "A", "P"),
                 ("n2", NodeKind.ACTION, "B", "P"), ("n3", NodeKind.FINAL, "", None))
    p = derive_expected(flow)
    assert p.events == () and any("empty" in w for w in p.warnings)


def test_handoff_between_partitions():
    flow = _flow(("n0", NodeKind.INITIAL, "", None), ("n1", NodeKind.ACTION, "Ping", "P"),
                 ("n2", NodeKind.DECISION, "", None), ("n3", NodeKind.ACTION, "Pong", "Q"),
                 ("n4", NodeKind.ACTION, "Done", "P"), ("n5", NodeKind.FINAL, "", None))
    p = derive_expected(flow)
    assert p.events == (ExpectedEvent("Ping", "P", "Q"), ExpectedEvent("Pong", "Q", "P"))
    assert p.order == (("Ping", "Pong"),)


def test_empty_trace_empty_protocol():
    report = check_trace(MessageTrace((), {}), ExpectedProtocol())
    assert report.verdict is Verdict.CONFORMANT and report.violations() == []


def test_empty_trace_is_missing_everything(protocol):
    report = check_trace(MessageTrace((), {}), protocol)
    assert report.verdict is Verdict.VIOLATING and list(report.missing) == REQUIRED


def test_protocol_validation():
    e = ExpectedEvent("A", "P", "Q")
    with pytest.raises(ValueError):
        ExpectedProtocol((e, e))
    with pytest.raises(ValueError):
        ExpectedProtocol((e,), (("A", "Z"),))
    with pytest.raises(ValueError, match="cyclic"):
        ExpectedProtocol((e, ExpectedEvent("B", "Q", "P")), (("A", "B"), ("B", "A")))


def test_simulated_trace_novel(protocol, run):
    report = check_trace(run(uv_count=2), protocol)
    assert report.verdict is Verdict.CONFORMANT_WITH_NOVEL
    assert report.novel_set == {"DiscoverUVs", "UVList"}
    assert dict(report.matched)["UVTask"] == 2
    strict = check_trace(run(uv_count=2), protocol, strict=True)
    assert strict.verdict is Verdict.VIOLATING
    assert strict.violations() == ["novel event DiscoverUVs", "novel event UVList"]


def test_truncated_trace(protocol, run):
    trace = _without(run(uv_count=2), lambda m: m.concept == "MissionPerformance")
    report = check_trace(trace, protocol)
    assert report.verdict is Verdict.VIOLATING and report.missing == ("MissionPerformance",)


def test_zero_uv_trace_violates(protocol, run):
    report = check_trace(run(uv_count=0), protocol)
    assert report.verdict is Verdict.VIOLATING
    assert set(report.missing) == {"FleetPlan", "UVTask", "UVPerformance", "FleetPerformance"}


def test_order_violation(protocol, run):
    trace = run(uv_count=1)
    msgs = {m.concept: m for m in trace.messages}
    swapped = tuple(dataclasses.replace(m, t=msgs["FleetPlan"].t) if m.concept == "MissionBrief"
                    else dataclasses.replace(m, t=msgs["MissionBrief"].t) if m.concept == "FleetPlan" else m
                    for m in trace.messages)
    report = check_trace(dataclasses.replace(trace, messages=swapped), protocol)
    assert ("MissionBrief", "FleetPlan") in report.order_violations
    assert report.verdict is Verdict.VIOLATING


def test_per_instance_order(protocol, run):
    # a performance report arriving before its own task is out of order
    trace = run(uv_count=2)
    task = next(m for m in trace.messages if m.concept == "UVTask" and m.receiver == "uv1")
    perf = next(m for m in trace.messages if m.concept == "UVPerformance" and m.sender == "uv1")
    moved = tuple(dataclasses.replace(m, t=task.t) if m is perf else
                  dataclasses.replace(m, t=perf.t) if m is task else m for m in trace.messages)
    report = check_trace(dataclasses.replace(trace, messages=moved), protocol)
    assert ("UVTask", "UVPerformance") in report.order_violations


def test_conflicting_roles(protocol, run):
    trace = run(uv_count=1)
    forged = tuple(dataclasses.replace(m, sender="uv1") if m.concept == "MissionBrief" else m
                   for m in trace.messages)
    report = check_trace(dataclasses.replace(trace, messages=forged), protocol)
    assert report.verdict is Verdict.VIOLATING and report.conflicting


def test_multiplicity(protocol, run):
    trace = run(uv_count=2)
    brief = trace.messages[0]
    doubled = trace.messages + (dataclasses.replace(brief, t=brief.t + 100),)
    report = check_trace(dataclasses.replace(trace, messages=doubled), protocol)
    assert any("expected once" in p for p in report.multiplicity)
    dropped = _without(trace, lambda m: m.concept == "UVPerformance" and m.sender == "uv2")
    report = check_trace(dropped, protocol)
    assert any("different instances" in p for p in report.multiplicity)


def test_report_json_and_render(protocol, run):
    report = check_trace(run(uv_count=1), protocol)
    data = report.to_dict()
    assert data["verdict"] == "ConformantWithNovelEvents" and data["matched"]["UVTask"] == 1
    assert report.render().startswith("verdict: ConformantWithNovelEvents\n")
    assert report.to_json().endswith("}\n")


# --------------------------------------------------------------------------
# properties


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(0, 1000), st.integers(-1000, 1000))
def test_time_shift_invariance(protocol, model, bound, registry, k, seed, c):
    trace = run_mission(SimConfig(uv_count=k, seed=seed), model, bound, registry)
    shifted = dataclasses.replace(trace, messages=tuple(dataclasses.replace(m, t=m.t + c) for m in trace.messages))
    assert check_trace(shifted, protocol) == check_trace(trace, protocol)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.sampled_from(REQUIRED))
def test_removing_required_event(protocol, model, bound, registry, k, label):
    trace = run_mission(SimConfig(uv_count=k), model, bound, registry)
    report = check_trace(_without(trace, lambda m: m.concept == label), protocol)
    assert report.verdict is Verdict.VIOLATING
    assert report.missing == (label,)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10_000), st.lists(st.booleans(), min_size=6, max_size=6))
def test_simulated_traces_never_violate(protocol, model, bound, registry, k, seed, mask):
    avail = tuple(mask[:k])
    if not any(avail):
        avail = (True,) + avail[1:]
    trace = run_mission(SimConfig(uv_count=k, seed=seed, availability=avail), model, bound, registry)
    assert check_trace(trace, protocol).verdict is not Verdict.VIOLATING
