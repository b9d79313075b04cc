import copy
import json

import pytest

from olplan.foon import (FoonError, MalformedJson, ObjectLevelPlan, SchemaViolation, StateRelation, UnknownRelation,
                         make_unit, olp_to_document, parse_olp_document, parse_olp_json, serialize_olp, validate_olp)
from olplan.llm.synthetic import stack_units
from support import FIG9


def states(node):
    return {str(s) for s in node.states}


def test_fig9_document_parses(fig9_text):
    plan = parse_olp_json(fig9_text)
    assert len(plan) == 1
    unit = plan.units[0]
    assert unit.motion.verb == "pick and place"
    assert states(unit.inputs["first block"]) == {"under nothing", "on table"}
    assert states(unit.inputs["second block"]) == {"under nothing", "on table"}
    assert states(unit.outputs["first block"]) == {"under second block", "on table"}
    assert states(unit.outputs["second block"]) == {"on first block", "under nothing"}


def test_empty_plan():
    assert len(parse_olp_json('{"plan": []}')) == 0


def test_required_object_without_states_is_schema_violation():
    doc = copy.deepcopy(FIG9)
    doc["plan"][0]["required_objects"].append("third block")
    with pytest.raises(SchemaViolation):
        parse_olp_document(doc)


def test_malformed_json():
    with pytest.raises(MalformedJson):
        parse_olp_json('{"plan": [')


def test_round_trip_fig9(fig9_text):
    plan = parse_olp_json(fig9_text)
    assert parse_olp_json(serialize_olp(plan)) == plan


def test_serialize_empty_plan():
    assert json.loads(serialize_olp(parse_olp_json('{"plan": []}'))) == {"plan": []}


def test_serialize_is_byte_stable():
    plan = ObjectLevelPlan(tuple(stack_units(["first block", "second block", "third block", "fourth block"], 1)))
    assert len(plan) == 3
    assert serialize_olp(plan) == serialize_olp(parse_olp_json(serialize_olp(plan)))


def test_fig9_is_valid(fig9_text):
    assert validate_olp(parse_olp_json(fig9_text)) == []
    assert validate_olp(fig9_text) == []


def test_chain_inconsistency():
    u1 = make_unit(1, "pick and place", {
        "first block": (["under nothing", "on table"], ["on second block", "under nothing"]),
        "second block": (["under nothing", "on table"], ["under first block", "on table"]),
    })
    u2 = make_unit(2, "pick and place", {
        "first block": (["under nothing", "on table"], ["on third block"]),
        "third block": (["under nothing", "on table"], ["under first block", "on table"]),
    })
    found = validate_olp(olp_to_document(ObjectLevelPlan((u1, u2))))
    assert [v.kind for v in found] == ["ChainInconsistency"]
    assert found[0].unit == 1


def test_unknown_relation_token():
    doc = copy.deepcopy(FIG9)
    doc["plan"][0]["object_states"]["first block"]["effects"][1] = "beside table"
    found = validate_olp(doc)
    assert [v.kind for v in found] == ["UnknownRelation"]


def test_state_relation_vocabulary_is_closed():
    with pytest.raises(UnknownRelation):
        StateRelation("beside", "table")
    assert StateRelation.parse("Contains water").relation == "contains"


def test_unknown_target_and_step_order():
    doc = copy.deepcopy(FIG9)
    doc["plan"][0]["step"] = 2
    doc["plan"][0]["object_states"]["first block"]["effects"].append("under ghost block")
    assert sorted(v.kind for v in validate_olp(doc)) == ["StepOrder", "UnknownTarget"]


def test_non_object_document():
    assert [v.kind for v in validate_olp("[1, 2]")] == ["SchemaViolation"]
    with pytest.raises(FoonError):
        parse_olp_json("[1, 2]")
