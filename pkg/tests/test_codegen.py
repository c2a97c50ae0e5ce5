from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import _gen
from amdd.codegen.base import GenerationConfig
from amdd.codegen.ir import (BasicBlockGraph, Block, BlockEdge, BlockKind, GraphBuilder, program_from_dict,
                             program_from_json, program_to_dict, program_to_json)
from amdd.codegen.prompt import assemble_prompt
from amdd.codegen.template import generate_template, program_classes
from amdd.complexity import cyclomatic, extract_cfg
from amdd.errors import GenerationError
from amdd.model import AgentClass, Attribute, SystemModel
from amdd.ocl import ConstraintSet, bind, parse_constraints

OCL_ONLY = GenerationConfig(include_ontology=False)
WITH_ONTO = GenerationConfig(include_ontology=True)


def _m(result):
    return {p.agent_name: cyclomatic(extract_cfg(p)).M for p in result.programs}


def test_program_classes(model):
    assert program_classes(model) == ["Operator", "MCC", "UVFManager", "UV"]


def test_ocl_only_calibration(model, bound):
    result = generate_template(model, bound, None, OCL_ONLY)
    assert _m(result) == {"Operator": 2, "MCC": 4, "UVFManager": 4, "UV": 2}
    uv = next(p for p in result.programs if p.agent_name == "UV")
    e = extract_cfg(uv)
    assert (e.E, e.N) == (8, 8)


def test_ontology_calibration(model, bound, registry):
    result = generate_template(model, bound, registry, WITH_ONTO)
    assert _m(result) == {"Operator": 3, "MCC": 5, "UVFManager": 6, "UV": 3}


def test_monotone_and_deterministic(model, bound, registry):
    before = _m(generate_template(model, bound, None, OCL_ONLY))
    after = _m(generate_template(model, bound, registry, WITH_ONTO))
    assert all(after[k] >= before[k] for k in before)
    again = generate_template(model, bound, registry, GenerationConfig(seed=99))
    assert again.programs == generate_template(model, bound, registry, WITH_ONTO).programs


def test_registry_ignored_without_ontology_flag(model, bound, registry):
    assert (generate_template(model, bound, registry, OCL_ONLY).programs
            == generate_template(model, bound, None, OCL_ONLY).programs)


def test_guards_reference_bound_constraints(model, bound, registry):
    names = set(bound.constraints.names())
    for p in generate_template(model, bound, registry, WITH_ONTO).programs:
        assert {g.constraint for g in p.guards} <= names
    uv = next(p for p in generate_template(model, bound, None, OCL_ONLY).programs if p.agent_name == "UV")
    assert {g.constraint for g in uv.guards} == {"uniqueId", "scoreRange", "idle", "busy"}


def test_trivial_model():
    model = SystemModel((AgentClass("Solo", (Attribute("x", "integer"),)),))
    result = generate_template(model, bind(ConstraintSet(), model), None, OCL_ONLY)
    (program,) = result.programs
    assert cyclomatic(extract_cfg(program)).M == 1
    assert program.branch_count() == 0


def test_template_rejects_foreign_constraints(model, bound):
    other = SystemModel((AgentClass("Solo"),))
    with pytest.raises(GenerationError):
        generate_template(other, bound, None, OCL_ONLY)


def test_ir_json_round_trip(model, bound, registry):
    for p in generate_template(model, bound, registry, WITH_ONTO).programs:
        assert program_from_json(program_to_json(p)) == p
        assert program_from_dict(program_to_dict(p)) == p


@pytest.mark.parametrize("mutate", [
    lambda d: d["handlers"][0]["blocks"].append({"id": "x", "kind": "Statement", "text": ""}),
    lambda d: d["handlers"][0]["blocks"].__setitem__(0, {"id": "entry", "kind": "Loop", "text": ""}),
    lambda d: d.pop("agentName"),
])
def test_ir_from_dict_rejects(model, bound, mutate):
    data = program_to_dict(generate_template(model, bound, None, OCL_ONLY).programs[0])
    mutate(data)
    with pytest.raises(GenerationError):
        program_from_dict(data)


def test_block_graph_invariants():
    entry, ex = Block("e", BlockKind.ENTRY), Block("x", BlockKind.EXIT)
    br = Block("b", BlockKind.BRANCH, "c")
    with pytest.raises(GenerationError, match="out-degree"):
        BasicBlockGraph((entry, br, ex), (BlockEdge("e", "b"), BlockEdge("b", "x")))
    with pytest.raises(GenerationError):
        BasicBlockGraph((entry, Block("lost", BlockKind.STATEMENT), ex), (BlockEdge("e", "x"),))
    with pytest.raises(GenerationError):
        BasicBlockGraph((entry, entry, ex), (BlockEdge("e", "x"),))


def test_builder_loop_back_edge():
    b = GraphBuilder()
    header = b.loop("for each", ["send"])
    g = b.build()
    assert {(e.source, e.target) for e in g.edges} >= {(header, "b2"), ("b2", header), (header, "exit")}


# --------------------------------------------------------------------------
# prompt bundle


def test_prompt_ocl_only(model, bound):
    bundle = assemble_prompt(model, bound, None, OCL_ONLY)
    assert "scoreRange" in bundle.constraints and "uniqueId" in bundle.constraints
    assert "MissionBrief" not in bundle.constraints.replace("brief : MissionBrief", "")
    assert all(s.strip() for s in (bundle.structural, bundle.behavioral, bundle.constraints))


def test_prompt_with_ontology(model, bound, registry):
    bundle = assemble_prompt(model, bound, registry, WITH_ONTO)
    for name in [*registry.concepts, *registry.predicates, *registry.actions]:
        assert name in bundle.constraints


def test_prompt_completeness(model, bound, registry):
    bundle = assemble_prompt(model, bound, registry, WITH_ONTO)
    text = bundle.text()
    names = [c.name for c in model.classes] + [r.name for r in model.relationships if r.name]
    names += [s.name for sm in model.state_machines for s in sm.states]
    names += [n.label for f in model.activities for n in f.nodes if n.label]
    for name in names:
        assert name in bundle.structural or name in bundle.behavioral, name
    for name in bound.constraints.names():
        assert name in text


def test_prompt_deterministic(model, bound, registry):
    a = assemble_prompt(model, bound, registry, WITH_ONTO)
    b = assemble_prompt(model, bound, registry, WITH_ONTO)
    assert a == b
    assert a.checksum != assemble_prompt(model, bound, None, OCL_ONLY).checksum


def test_prompt_refuses_empty_model(bound):
    with pytest.raises(GenerationError):
        assemble_prompt(SystemModel(), bind(ConstraintSet(), SystemModel()), None, OCL_ONLY)


def test_prompt_checksum_mismatch(model):
    other = SystemModel((AgentClass("UV", (Attribute("performanceScore", "real"),)),))
    foreign = bind(parse_constraints("context UV inv s: self.performanceScore >= 0"), other)
    with pytest.raises(GenerationError, match="different model"):
        assemble_prompt(model, foreign, None, OCL_ONLY)


def test_config_validation():
    with pytest.raises(ValueError):
        GenerationConfig(dialect="")
    assert GenerationConfig(dialect="pade-like").extension == "py"
    assert OCL_ONLY.variant == "ocl" and WITH_ONTO.variant == "ocl_ontology"


# --------------------------------------------------------------------------
# properties


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_structured_programs(seed):
    program, branches = _gen.random_program(random.Random(seed))
    report = cyclomatic(extract_cfg(program))
    assert report.P == 1
    assert report.M == branches + 1 == program.branch_count() + 1
    assert program_from_json(program_to_json(program)) == program
