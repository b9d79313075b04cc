import pytest

from olplan.grounding import Atom, SceneState, derive_predicates
from olplan.pddl import Action
from olplan.simulator import (ExecutionFailure, TaskSpec, apply_pick, apply_place, check_success, execute_plan,
                              free_table_cell, stacks, table_cells)
from support import block, piles_scene

TWO = piles_scene(["b1"], ["b2"])


def failure(fn, *args):
    with pytest.raises(ExecutionFailure) as exc:
        fn(*args)
    return exc.value.reason


def test_pick_from_table():
    after = apply_pick(TWO, "b2", "table")
    assert after.hand == "b2"
    atoms = derive_predicates(after)
    assert Atom("in", ("hand", "b2")) in atoms
    assert Atom("on", ("table", "air")) in atoms


def test_pick_buried_block():
    assert failure(apply_pick, piles_scene(["b1", "b2"]), "b1", "table") == "ObjectNotClear"


def test_pick_while_holding():
    assert failure(apply_pick, apply_pick(TWO, "b2", "table"), "b1", "table") == "HandOccupied"


def test_pick_from_wrong_surface():
    assert failure(apply_pick, TWO, "b2", "b1") == "NotOnSurface"


def test_place_height():
    after = apply_place(apply_pick(TWO, "b2", "table"), "b2", "b1")
    assert after.objects["b2"].position[2] == pytest.approx(0.075)
    assert Atom("on", ("b1", "b2")) in derive_predicates(after)
    assert after.hand == "air"


def test_place_on_occupied():
    scene = piles_scene(["b1", "b3"], ["b2"])
    assert failure(apply_place, apply_pick(scene, "b2", "table"), "b2", "b1") == "SurfaceOccupied"


def test_place_with_empty_hand():
    assert failure(apply_place, TWO, "b2", "b1") == "NotHolding"


def test_place_on_table_uses_free_cell():
    scene = apply_pick(piles_scene(["b1", "b2"]), "b2", "b1")
    after = apply_place(scene, "b2", "table")
    assert sorted(map(len, stacks(after))) == [1, 1]


def test_unknown_object():
    assert failure(apply_pick, TWO, "ghost", "table") == "UnknownObject"


def test_tower_of_three_plan():
    scene = piles_scene(["b1"], ["b2"], ["b3"])
    plan = [Action("pick", ("b2", "table")), Action("place", ("b2", "b1")),
            Action("pick", ("b3", "table")), Action("place", ("b3", "b2"))]
    trace = execute_plan(scene, plan, TaskSpec.tower(3))
    assert trace.completed and trace.succeeded
    assert stacks(trace.final_scene) == [["b1", "b2", "b3"]]


def test_trace_stops_at_failure():
    scene = piles_scene(["b1", "b2"], ["b3"])
    plan = [Action("pick", ("b1", "table")), Action("place", ("b1", "b3"))]
    trace = execute_plan(scene, plan)
    assert not trace.completed
    assert len(trace.steps) == 1
    assert trace.failure.reason == "ObjectNotClear"
    assert '"completed": false' in trace.to_jsonl()


def test_empty_plan():
    scene = piles_scene(["b1", "b2", "b3"])
    trace = execute_plan(scene, [], TaskSpec.tower(3))
    assert trace.completed
    assert trace.succeeded == check_success(scene, TaskSpec.tower(3)) is True


def test_motion_failure_injection_is_seeded():
    plan = [Action("pick", ("b2", "table")), Action("place", ("b2", "b1"))]
    a = execute_plan(TWO, plan, motion_failure_rate=0.5, seed=4)
    b = execute_plan(TWO, plan, motion_failure_rate=0.5, seed=4)
    assert [s.outcome for s in a.steps] == [s.outcome for s in b.steps]
    assert execute_plan(TWO, plan, motion_failure_rate=1.0).failure.reason == "MotionPlanningFailed"


LETTERS = dict(zip("abcdefgh", "SCHUBERT"))


def test_spelling_schubert():
    top_down = list("abcdefgh")
    spec = TaskSpec.spelling("SCHUBERT")
    assert check_success(piles_scene(top_down[::-1], letters=LETTERS), spec)
    assert not check_success(piles_scene(top_down, letters=LETTERS), spec)


def test_organize_needs_every_block_piled():
    types = {"r1": "red block", "r2": "red block", "r3": "red block", "g1": "green block", "g2": "green block",
             "u1": "blue block", "u2": "blue block"}
    spec = TaskSpec("organize", instances=2)
    done = piles_scene(["r1", "r2", "r3"], ["g1", "g2"], ["u1", "u2"], types=types)
    assert check_success(done, spec)
    loose = piles_scene(["r1", "r2"], ["g1", "g2"], ["u1", "u2"], ["r3"], types=types)
    assert not check_success(loose, spec)
    mixed = piles_scene(["r1", "r2", "r3", "g1"], ["g2"], ["u1", "u2"], types=types)
    assert not check_success(mixed, spec)


def test_tower_success_needs_exact_height():
    assert not check_success(piles_scene(["b1", "b2"], ["b3"]), TaskSpec.tower(3))
    assert not check_success(piles_scene(["b1", "b2", "b3", "b4"]), TaskSpec.tower(3))


def test_task_spec_validation():
    with pytest.raises(ValueError):
        TaskSpec.tower(2)
    with pytest.raises(ValueError):
        TaskSpec.spelling("B00K")
    assert TaskSpec.from_dict(TaskSpec.organize(3).to_dict()) == TaskSpec.organize(3)


def test_free_cell_skips_occupied():
    scene = SceneState({"b1": block(*table_cells(TWO)[0])})
    assert free_table_cell(scene, "b2") != table_cells(scene)[0]
