from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import _gen
from amdd.errors import OntologyError, ParseError
from amdd.model import SystemModel
from amdd.ontology import (ActionSchema, ConceptSchema, ContentInstance, Direction, OntologyRegistry, PredicateKind,
                           PredicateSchema, Slot, ViolationKind, bind_registry, check_action_conformance,
                           derive_predicates, parse_ontology, registry_from, registry_issues, render_ontology,
                           validate_content)
from amdd.plantuml import parse_model

CONCEPTS = ["MissionBrief", "DiscoverUVs", "UVList", "FleetPlan", "UVTask", "UVPerformance", "FleetPerformance",
            "MissionPerformance"]


def test_fixture_registry(registry):
    assert list(registry.concepts) == CONCEPTS
    assert len(registry.predicates) == 4
    assert len(registry.actions) == 16
    assert registry.concepts["MissionBrief"].mandatory == {"missionId", "status"}


def test_fixture_binds_to_model(registry, model):
    assert registry_issues(registry, model) == []
    assert bind_registry(registry, model) == registry


def test_empty_file():
    assert parse_ontology("") == OntologyRegistry()


@pytest.mark.parametrize("text,needle", [
    ("action A send GhostConcept to B", "GhostConcept"),
    ("concept C { id: id mandatory }\nconcept C { id: id mandatory }", "duplicate"),
    ("concept C { a: integer }", "mandatory"),
    ("concept C { a: id mandatory\n a: string }", "a"),
    ("concept C { a: id mandatory\n inner: concept D { } }", None),
    ("concept C { a: id mandatory\n b: colour }", "colour"),
    ("predicate Friendship(A, B)", "Friendship"),
    ("concept C { a: id mandatory }\naction A shout C to B", None),
    ("concept C { a: id mandatory }\naction A send C from B", None),
    ("concept C {\n  a: id mandatory\n", None),
])
def test_parse_errors(text, needle):
    with pytest.raises((ParseError, OntologyError)) as info:
        parse_ontology(text)
    if needle:
        assert needle in str(info.value)
    if isinstance(info.value, ParseError):
        assert info.value.line >= 1


def test_semicolon_slot_separator():
    reg = parse_ontology("concept C { a: id mandatory; b: real }")
    assert reg.concepts["C"].slot_names == {"a", "b"}


def test_missing_mandatory(registry):
    (v,) = validate_content(registry, ContentInstance("MissionBrief", {"status": "pending"}))
    assert v.kind is ViolationKind.MISSING_MANDATORY and v.slot == "missionId"


def test_fully_populated(registry):
    assert validate_content(registry, ContentInstance("MissionBrief", {"missionId": "m1", "status": "pending"})) == []


def test_type_mismatch(registry):
    (v,) = validate_content(registry, ContentInstance("UVPerformance", {"uvId": "uv1", "score": "high"}))
    assert v.kind is ViolationKind.TYPE_MISMATCH and v.slot == "score"


def test_unknown_slot_and_concept(registry):
    (v,) = validate_content(registry, ContentInstance("UVTask", {"taskId": "t", "uvId": "u", "colour": "red"}))
    assert v.kind is ViolationKind.UNKNOWN_SLOT
    (v,) = validate_content(registry, ContentInstance("Ghost", {"x": 1}))
    assert v.kind is ViolationKind.UNKNOWN_CONCEPT


def test_list_slot(registry):
    ok = ContentInstance("UVList", {"missionId": "m", "uvIds": ["uv1", "uv2"]})
    assert validate_content(registry, ok) == []
    bad = ContentInstance("UVList", {"missionId": "m", "uvIds": "uv1"})
    assert [v.kind for v in validate_content(registry, bad)] == [ViolationKind.TYPE_MISMATCH]


def test_derive_predicates(model):
    preds = derive_predicates(model)
    assert len(preds) == len(model.relationships)
    assert PredicateSchema(PredicateKind.INHERITANCE, "UAV", "UV") in preds
    assert PredicateSchema(PredicateKind.COLLABORATION, "Operator", "MCC", "commands") in preds
    keys = [(list(PredicateKind).index(p.kind), p.source, p.target) for p in preds]
    assert keys == sorted(keys)
    assert derive_predicates(SystemModel()) == []


def test_action_conformance(registry):
    assert check_action_conformance(registry, "Operator", "MCC", "MissionBrief")
    assert not check_action_conformance(registry, "UV", "Operator", "MissionBrief")
    assert not check_action_conformance(OntologyRegistry(), "Operator", "MCC", "MissionBrief")


def test_conformance_needs_mirror():
    concept = ConceptSchema("C", (Slot("id", "id", True),))
    send = ActionSchema("A", Direction.SEND, "C", "B")
    assert not check_action_conformance(registry_from([concept], [], [send]), "A", "B", "C")
    assert check_action_conformance(registry_from([concept], [], [send, send.mirror()]), "A", "B", "C")


def test_registry_issues_against_model(model):
    reg = parse_ontology("concept C { id: id mandatory }\naction Ghost send C to MCC\n"
                         "predicate Inheritance(UV, UAV)")
    issues = registry_issues(reg, model)
    assert any("Ghost" in i for i in issues)
    assert any("Inheritance" in i for i in issues)


def test_render_round_trip(registry):
    assert parse_ontology(render_ontology(registry)) == registry
    assert render_ontology(parse_ontology(render_ontology(registry))) == render_ontology(registry)


# --------------------------------------------------------------------------
# properties

values = st.one_of(st.integers(-5, 5), st.floats(allow_nan=False, allow_infinity=False), st.text(max_size=3),
                   st.booleans(), st.lists(st.text(max_size=2), max_size=2))


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(CONCEPTS),
       st.dictionaries(st.sampled_from(["missionId", "status", "uvId", "score", "uvIds", "colour", "taskId"]),
                       values, max_size=6))
def test_valid_content_slot_bounds(registry, concept, slots):
    schema = registry.concepts[concept]
    if not validate_content(registry, ContentInstance(concept, slots)):
        assert set(schema.mandatory) <= set(slots) <= set(schema.slot_names)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_derive_predicates_injective(seed):
    m = parse_model(_gen.random_model_sources(random.Random(seed))[:1])
    preds = derive_predicates(m)
    assert len(preds) == len(m.relationships) == len(set(preds))


idents = st.from_regex(r"[A-Z][a-z]{1,5}", fullmatch=True)


@st.composite
def registries(draw):
    names = draw(st.lists(idents, min_size=1, max_size=4, unique=True))
    concepts = []
    for n in names:
        slot_names = draw(st.lists(st.from_regex(r"[a-z]{1,5}", fullmatch=True), min_size=1, max_size=4,
                                   unique=True))
        slots = tuple(Slot(s, draw(st.sampled_from(_gen.TYPES + ("id*",))), i == 0 or draw(st.booleans()))
                      for i, s in enumerate(slot_names))
        concepts.append(ConceptSchema(n, slots))
    roles = draw(st.lists(idents, min_size=2, max_size=4, unique=True))
    preds = {PredicateSchema(draw(st.sampled_from(list(PredicateKind))), draw(st.sampled_from(roles)),
                             draw(st.sampled_from(roles)), draw(st.one_of(st.none(), st.just("rel"))))
             for _ in range(draw(st.integers(0, 3)))}
    actions = set()
    for _ in range(draw(st.integers(0, 4))):
        a = ActionSchema(draw(st.sampled_from(roles)), draw(st.sampled_from(list(Direction))),
                         draw(st.sampled_from(names)), draw(st.sampled_from(roles)))
        actions.add(a)
    return registry_from(concepts, sorted(preds, key=lambda p: p.name), sorted(actions, key=lambda a: a.name))


@settings(max_examples=200, deadline=None)
@given(registries())
def test_generated_round_trip(reg):
    assert parse_ontology(render_ontology(reg)) == reg


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet="concept predicate action send receive to from {}():;*,\nABCabc mandatory id", max_size=80))
def test_parser_fuzz(text):
    try:
        parse_ontology(text)
    except (ParseError, OntologyError):
        pass
