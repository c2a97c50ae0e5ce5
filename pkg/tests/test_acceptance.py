"""Acceptance criteria 1-8. Each test carries ``criterion(n)``; the terminal
summary prints one PASS/FAIL line per criterion."""

from __future__ import annotations

import json
import random
import shutil
import time
from collections import Counter

import httpx
import networkx as nx
import pytest
from click.testing import CliRunner

import _gen
from amdd.cli import main
from amdd.codegen.base import GenerationConfig
from amdd.codegen.llm import LlmEndpointConfig, TOKEN_ENV, call_endpoint, generate_llm
from amdd.codegen.prompt import assemble_prompt
from amdd.complexity import (RiskBand, cyclomatic, disjoint_union, export_cfg, extract_cfg, import_cfg,
                             risk_band)
from amdd.codegen.ir import program_from_json, program_to_json
from amdd.errors import TransportError
from amdd.fixtures import data_dir, uvf_path, uvf_sources
from amdd.model import deserialize_model, serialize_model
from amdd.ocl import (ConstraintKind, InstanceState, ObjectSnapshot, check_snapshot, parse_constraints,
                      render_constraints)
from amdd.ontology import parse_ontology, render_ontology
from amdd.plantuml import parse_model, render_model
from amdd.sim import run_mission, trace_from_jsonl, trace_to_jsonl

CONFIG = str(uvf_path("amdd.toml"))
REFERENCE = {
    # class: ((E, N, P) OCL, (E, N, P) OCL + ontology)
    "Operator": ((8, 8, 1), (12, 11, 1)),
    "MCC": ((15, 13, 1), (22, 19, 1)),
    "UVFManager": ((16, 14, 1), (23, 19, 1)),
    "UV": ((8, 8, 1), (12, 11, 1)),
}
CLASS_ORDER = ("Operator", "MCC", "UVFManager", "UV")


def _cli(args, obj=None):
    return CliRunner().invoke(main, args, obj=obj, catch_exceptions=False)


# --------------------------------------------------------------------------
# 1. analyzer reproduces the reference complexity table


@pytest.mark.criterion(1)
def test_reference_fixture_graphs():
    start = time.perf_counter()
    m_values = []
    for cls in CLASS_ORDER:
        for column, variant in enumerate(("ocl", "ocl_ontology")):
            path = data_dir() / "reference_cfg" / variant / f"{cls}.dot"
            report = cyclomatic(import_cfg(path.read_text(), str(path)))
            assert (report.E, report.N, report.P) == REFERENCE[cls][column]
            assert report.label == cls
            m_values.append(report.M)
    elapsed = time.perf_counter() - start
    assert m_values == [2, 3, 4, 5, 4, 6, 2, 3]
    assert elapsed < 1.0


@pytest.mark.criterion(1)
def test_reference_analyze_command(tmp_path):
    root = data_dir() / "reference_cfg"
    result = _cli(["analyze", str(root / "ocl"), str(root / "ocl_ontology"), "--json"])
    assert result.exit_code == 0
    payload = json.loads(result.stdout)
    got = {(r["label"], r["E"], r["N"], r["P"]): r["M"] for r in payload["reports"]}
    for cls, cols in REFERENCE.items():
        for e, n, p in cols:
            assert got[(cls, e, n, p)] == e - n + 2 * p
    deltas = {row["label"]: row["dM"] for row in payload["comparison"]["rows"]}
    assert [deltas[c] for c in CLASS_ORDER] == [1, 1, 2, 1]


# --------------------------------------------------------------------------
# 2. template backend calibration


@pytest.mark.criterion(2)
def test_generate_template_calibration(tmp_path):
    result = _cli(["generate", "--config", CONFIG, "--out", str(tmp_path), "--backend", "template"])
    assert result.exit_code == 0, result.output
    root = tmp_path / "generate"
    columns = {}
    for variant in ("ocl", "ocl_ontology"):
        analysis = json.loads((root / variant / "analysis.json").read_text())
        by_label = {r["label"]: r["M"] for r in analysis}
        assert sorted(by_label) == sorted(CLASS_ORDER)
        assert sorted(p.name for p in (root / variant).glob("*.ir.json")) == sorted(
            f"{c}.ir.json" for c in CLASS_ORDER)
        columns[variant] = [by_label[c] for c in CLASS_ORDER]
        for c in CLASS_ORDER:
            program = program_from_json((root / variant / f"{c}.ir.json").read_text())
            assert cyclomatic(extract_cfg(program)).M == by_label[c]
    assert columns["ocl"] == [2, 4, 4, 2]
    assert columns["ocl_ontology"] == [3, 5, 6, 3]
    comparison = json.loads((root / "comparison.json").read_text())
    deltas = {row["label"]: row["dM"] for row in comparison["rows"]}
    assert [deltas[c] for c in CLASS_ORDER] == [1, 1, 2, 1]


# --------------------------------------------------------------------------
# 3. risk bands


@pytest.mark.criterion(3)
def test_risk_band_boundaries():
    got = [risk_band(m) for m in (1, 10, 11, 20, 21, 50, 51)]
    assert got == [RiskBand.LOW, RiskBand.LOW, RiskBand.MODERATE, RiskBand.MODERATE,
                   RiskBand.HIGH, RiskBand.HIGH, RiskBand.SEVERE]


# --------------------------------------------------------------------------
# 4. protocol reproduction


def _check_partial_order(messages: list[dict], k: int) -> None:
    pos = {}
    for i, m in enumerate(messages):
        key = m["concept"]
        if key == "UVTask":
            key = ("UVTask", m["to"])
        elif key == "UVPerformance":
            key = ("UVPerformance", m["from"])
        assert key not in pos, f"duplicate {key}"
        pos[key] = i
    fixed = ["MissionBrief", "DiscoverUVs", "UVList", "FleetPlan"]
    for a, b in zip(fixed, fixed[1:]):
        assert pos[a] < pos[b]
    uvs = sorted(k2[1] for k2 in pos if isinstance(k2, tuple) and k2[0] == "UVTask")
    assert len(uvs) == k
    assert uvs == sorted(k2[1] for k2 in pos if isinstance(k2, tuple) and k2[0] == "UVPerformance")
    for uv in uvs:
        assert pos["FleetPlan"] < pos[("UVTask", uv)] < pos[("UVPerformance", uv)] < pos["FleetPerformance"]
    assert pos["FleetPerformance"] < pos["MissionPerformance"] == len(messages) - 1


@pytest.mark.criterion(4)
@pytest.mark.parametrize("k", [1, 2, 5])
def test_simulated_protocol(tmp_path, k):
    result = _cli(["simulate", "--config", CONFIG, "--out", str(tmp_path), "--uv-count", str(k)])
    assert result.exit_code == 0, result.output
    trace = trace_from_jsonl((tmp_path / "simulate" / "trace.jsonl").read_text())
    messages = [m.to_dict() for m in trace.messages]
    assert len(messages) == 6 + 2 * k
    assert Counter(m["concept"] for m in messages) == Counter(
        {"MissionBrief": 1, "DiscoverUVs": 1, "UVList": 1, "FleetPlan": 1, "UVTask": k,
         "UVPerformance": k, "FleetPerformance": 1, "MissionPerformance": 1})
    _check_partial_order(messages, k)
    assert [m["t"] for m in messages] == sorted({m["t"] for m in messages})
    routes = {(m["concept"], m["from"], m["to"]) for m in messages}
    assert ("MissionBrief", "Operator", "MCC") in routes
    assert ("MissionPerformance", "MCC", "Operator") in routes
    summary = json.loads((tmp_path / "simulate" / "summary.json").read_text())
    uv_states = {i: s for i, s in summary["finalStates"].items() if i.startswith("uv")}
    assert len(uv_states) == k
    assert set(uv_states.values()) == {"Registered.Uncontrolled"}
    assert summary["outcome"] == "success" and not summary["aborted"]
    diagram = (tmp_path / "simulate" / "sequence.puml").read_text()
    assert sum(1 for line in diagram.splitlines() if " -> " in line or " ->> " in line) == len(messages)


# --------------------------------------------------------------------------
# 5. novel events


@pytest.mark.criterion(5)
@pytest.mark.parametrize("k,seed", [(1, 0), (2, 3), (5, 11), (3, 42)])
def test_conform_detects_enhancement(tmp_path, k, seed):
    sim = _cli(["simulate", "--config", CONFIG, "--out", str(tmp_path), "--uv-count", str(k),
                "--seed", str(seed)])
    assert sim.exit_code == 0
    trace_file = str(tmp_path / "simulate" / "trace.jsonl")
    loose = _cli(["conform", trace_file, "--config", CONFIG, "--json"])
    assert loose.exit_code == 0
    report = json.loads(loose.stdout)
    assert report["verdict"] == "ConformantWithNovelEvents"
    assert set(report["novel"]) == {"DiscoverUVs", "UVList"}
    assert report["missing"] == [] and report["orderViolations"] == []
    strict = _cli(["conform", trace_file, "--config", CONFIG, "--strict", "--json"])
    assert strict.exit_code == 4
    assert json.loads(strict.stdout)["verdict"] == "Violating"


# --------------------------------------------------------------------------
# 6. constraint enforcement


def _uv(instance_id, uv_id, score, state="Registered.Uncontrolled", cls="UV"):
    return InstanceState(cls, instance_id, {"uvId": uv_id, "performanceScore": score, "missionId": "m1"},
                         state)


@pytest.mark.criterion(6)
def test_score_out_of_range(bound):
    violations = check_snapshot(bound, ObjectSnapshot((_uv("uv1", "a", 150), _uv("uv2", "b", 70))))
    assert len(violations) == 1
    assert violations[0].kind is ConstraintKind.VALUE
    assert violations[0].constraint == "scoreRange"
    assert violations[0].instance_ids == ("uv1",)


@pytest.mark.criterion(6)
def test_duplicate_uv_id(bound):
    violations = check_snapshot(bound, ObjectSnapshot((_uv("uv1", "uv1", 50), _uv("uv2", "uv1", 60, cls="UAV"))))
    assert len(violations) == 1
    assert violations[0].kind is ConstraintKind.UNIQUENESS
    assert set(violations[0].instance_ids) == {"uv1", "uv2"}


@pytest.mark.criterion(6)
def test_task_to_controlled_uv_halts(tmp_path):
    result = _cli(["simulate", "--config", CONFIG, "--out", str(tmp_path), "--uv-count", "3",
                   "--controlled", "2"])
    assert result.exit_code == 3
    summary = json.loads((tmp_path / "simulate" / "summary.json").read_text())
    assert len(summary["halted"]) == 1
    violation = summary["halted"][0]
    assert violation["kind"] == "Precondition"
    assert violation["constraint"] == "idle"
    assert violation["instances"] == ["uv2"]
    assert (tmp_path / "simulate" / "trace.jsonl").is_file()


# --------------------------------------------------------------------------
# 7. property suites (seeded, exact example counts, each under 30 s)


def _timed(fn):
    start = time.perf_counter()
    fn()
    assert time.perf_counter() - start < 30.0


@pytest.mark.criterion(7)
def test_identity_on_random_graphs():
    def run():
        rng = random.Random(1)
        for _ in range(1000):
            g = _gen.random_graph(rng, 50)
            r = cyclomatic(g)
            nxg = nx.MultiDiGraph()
            nxg.add_nodes_from(g.nodes)
            nxg.add_edges_from(g.edges)
            assert r.P == nx.number_weakly_connected_components(nxg)
            assert (r.E, r.N) == (nxg.number_of_edges(), nxg.number_of_nodes())
            assert r.M == r.E - r.N + 2 * r.P
            assert r.band is risk_band(r.M)
    _timed(run)


@pytest.mark.criterion(7)
def test_additivity_under_disjoint_union():
    def run():
        rng = random.Random(2)
        for _ in range(300):
            parts = [_gen.random_graph(rng, 20) for _ in range(rng.randint(2, 4))]
            union = cyclomatic(disjoint_union(parts))
            assert union.M == sum(cyclomatic(p).M for p in parts)
            assert union.P == sum(cyclomatic(p).P for p in parts)
    _timed(run)


@pytest.mark.criterion(7)
def test_structured_programs_decision_count():
    def run():
        rng = random.Random(3)
        for _ in range(200):
            program, branches = _gen.random_program(rng)
            oracle = sum(b.kind.value == "Branch" for h in program.handlers for b in h.body.blocks)
            assert oracle == branches
            report = cyclomatic(extract_cfg(program))
            assert report.P == 1
            assert report.M == branches + 1
            assert program_from_json(program_to_json(program)) == program
    _timed(run)


@pytest.mark.criterion(7)
def test_round_trips_on_fixtures_and_generated_models():
    def run():
        fixture = parse_model(uvf_sources(), "UVF", "1")
        models = [fixture] + [parse_model(_gen.random_model_sources(random.Random(s)), f"M{s}", "1")
                              for s in range(200)]
        for m in models:
            assert parse_model(render_model(m), m.model_name, m.version) == m
            assert deserialize_model(serialize_model(m)) == m
        cs = parse_constraints((data_dir() / "uvf" / "uvf.ocl").read_text())
        assert parse_constraints(render_constraints(cs)) == cs
        reg = parse_ontology((data_dir() / "uvf" / "uvf.onto").read_text())
        assert parse_ontology(render_ontology(reg)) == reg
        for dot in sorted((data_dir() / "reference_cfg").rglob("*.dot")):
            g = import_cfg(dot.read_text(), str(dot))
            assert import_cfg(export_cfg(g)) == g
    _timed(run)


@pytest.mark.criterion(7)
def test_simulation_determinism(model, bound, registry):
    def run():
        rng = random.Random(4)
        for _ in range(50):
            cfg = _gen.random_sim_config(rng)
            first = trace_to_jsonl(run_mission(cfg, model, bound, registry))
            second = trace_to_jsonl(run_mission(cfg, model, bound, registry))
            assert first == second
    _timed(run)


# --------------------------------------------------------------------------
# 8. LLM path, mocked


TWO_FILES = (
    "Here are the agents.\n\n"
    "// file: OperatorAgent.java\n"
    "```java\nclass OperatorAgent extends Agent {}\n```\n\n"
    "```java\nclass MccAgent extends Agent {}\n```\n"
)
TOKEN = "sk-test-secret-0123456789"


def _completion(content: str) -> dict:
    return {"choices": [{"message": {"role": "assistant", "content": content}}]}


@pytest.fixture
def endpoint():
    return LlmEndpointConfig(base_url="http://llm.invalid/v1", model="mock", max_retries=2, backoff=0.5)


@pytest.mark.criterion(8)
def test_llm_extraction_through_cli(tmp_path, monkeypatch):
    monkeypatch.setenv(TOKEN_ENV, TOKEN)
    seen = []

    def handler(request: httpx.Request) -> httpx.Response:
        seen.append(request)
        return httpx.Response(200, json=_completion(TWO_FILES))

    project = tmp_path / "project"
    shutil.copytree(data_dir() / "uvf", project)
    config = project / "amdd.toml"
    obj = {"transport": httpx.MockTransport(handler), "sleep": lambda s: None}
    result = _cli(["generate", "--config", str(config), "--out", str(tmp_path / "out"), "--backend", "llm"],
                  obj)
    assert result.exit_code == 0, result.output
    target = tmp_path / "out" / "generate" / "llm"
    assert (target / "OperatorAgent.java").read_text() == "class OperatorAgent extends Agent {}\n"
    assert (target / "agent_mccagent.java").is_file()
    assert seen[0].headers["authorization"] == f"Bearer {TOKEN}"
    logs = list((tmp_path / "out" / "artifacts" / "llm").glob("*.log"))
    assert len(logs) == 1
    for f in [*logs, target / "backend.log"]:
        assert TOKEN not in f.read_text()


@pytest.mark.criterion(8)
def test_llm_retries_on_500(model, bound, registry, endpoint, tmp_path, monkeypatch):
    monkeypatch.setenv(TOKEN_ENV, TOKEN)
    statuses = iter([500, 503, 200])
    sleeps = []

    def handler(request):
        status = next(statuses)
        if status != 200:
            return httpx.Response(status, text=f"overloaded {TOKEN}")
        return httpx.Response(200, json=_completion(TWO_FILES))

    gen = GenerationConfig(include_ontology=True, backend="llm")
    bundle = assemble_prompt(model, bound, registry, gen)
    result = generate_llm(bundle, endpoint, gen, transport=httpx.MockTransport(handler),
                          sleep=sleeps.append, artifacts=tmp_path)
    assert sleeps == [0.5, 1.0]
    assert len(result.source_units) == 2
    assert "attempt 3: status 200" in result.backend_log
    assert TOKEN not in result.backend_log
    for f in tmp_path.rglob("*"):
        if f.is_file():
            assert TOKEN not in f.read_text()


@pytest.mark.criterion(8)
def test_llm_gives_up_after_retries(model, bound, registry, endpoint, monkeypatch):
    monkeypatch.setenv(TOKEN_ENV, TOKEN)
    calls = []

    def handler(request):
        calls.append(request)
        return httpx.Response(500)

    bundle = assemble_prompt(model, bound, registry, GenerationConfig())
    with pytest.raises(TransportError) as info:
        call_endpoint(bundle, endpoint, transport=httpx.MockTransport(handler), sleep=lambda s: None)
    assert len(calls) == endpoint.max_retries + 1
    assert TOKEN not in str(info.value)


@pytest.mark.live
def test_live_endpoint(model, bound, registry):
    """Opt-in: needs a reachable endpoint and AMDD_LLM_TOKEN."""
    import os

    url = os.environ.get("AMDD_LLM_URL")
    if not url or not os.environ.get(TOKEN_ENV):
        pytest.skip("AMDD_LLM_URL / AMDD_LLM_TOKEN not set")
    endpoint = LlmEndpointConfig(base_url=url, model=os.environ.get("AMDD_LLM_MODEL", "gpt-4"))
    bundle = assemble_prompt(model, bound, registry, GenerationConfig())
    result = generate_llm(bundle, endpoint, GenerationConfig())
    assert result.source_units
