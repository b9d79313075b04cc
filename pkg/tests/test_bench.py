import csv
import io
import json

import pytest

from olplan.bench import (COLUMNS, Stat, TrialConfig, TrialRecord, aggregate, emit_report, gen_scene,
                          load_matrix_config, run_matrix, run_trial)
from olplan.grounding import derive_predicates
from olplan.llm.providers import ReplayProvider
from olplan.simulator import TaskSpec, stacks
from conftest import FIXTURES


def test_tower_scene():
    scene = gen_scene(TaskSpec.tower(3), 7)
    assert len(scene.objects) == 4
    assert all(len(p) == 1 for p in stacks(scene))
    boxes = [p.footprint() for p in scene.objects.values()]
    for i, a in enumerate(boxes):
        for b in boxes[i + 1:]:
            assert min(a[2], b[2]) <= max(a[0], b[0]) or min(a[3], b[3]) <= max(a[1], b[1])


def test_scene_is_deterministic():
    assert gen_scene(TaskSpec.organize(3), 5) == gen_scene(TaskSpec.organize(3), 5)
    assert gen_scene(TaskSpec.organize(3), 5) != gen_scene(TaskSpec.organize(3), 6)


def test_spelling_scene_has_letters():
    scene = gen_scene(TaskSpec.spelling("AB"), 0)
    letters = [p.letter for p in scene.objects.values()]
    assert {"A", "B"} <= set(letters)
    derive_predicates(scene)


def test_organize_scene_counts():
    scene = gen_scene(TaskSpec.organize(4), 1)
    types = [p.type for p in scene.objects.values()]
    assert sorted(set(types)) == ["blue block", "green block", "red block"]
    assert all(types.count(t) == 4 for t in set(types))


def record(completed, succeeded, length=None, tokens=10, time=1.0, error=""):
    return TrialRecord("OLP", "Tower (n=3)", 0, completed, succeeded, time, tokens, length, error)


def test_all_succeed():
    row = aggregate([record(True, True, 4) for _ in range(10)])
    assert (row.plan_complete_pct, row.success_pct) == (100.0, 100.0)


def test_eight_complete_six_succeed():
    recs = ([record(True, True, 4)] * 5 + [record(True, True, 10)] + [record(True, False, 7)] * 2
            + [record(False, False, 3)] * 2)
    row = aggregate(recs)
    assert row.plan_complete_pct == 80.0
    assert row.success_pct == 60.0
    assert row.plan_length.mean == pytest.approx((5 * 4 + 10) / 6)


def test_errors_count_as_failures():
    recs = [record(False, False, None, error="SyntaxFailure@problem")] * 3 + [record(True, True, 4)] * 7
    row = aggregate(recs)
    assert (row.plan_complete_pct, row.success_pct) == (70.0, 70.0)


def test_population_sd():
    assert Stat.of([1.0, 3.0]) == Stat(2.0, 1.0)
    assert Stat.of([]) is None


def rows():
    return [aggregate([record(True, True, 4), record(True, False, 5, tokens=20)])]


def test_report_one_row_csv():
    text = emit_report(rows(), "csv")
    parsed = list(csv.reader(io.StringIO(text)))
    assert len(parsed) == 2
    assert tuple(parsed[0]) == COLUMNS
    assert parsed[1][2:4] == ["100", "50"]
    assert parsed[1][5] == "15.0 ± 5.0"


def test_report_markdown_is_pipe_table():
    lines = emit_report(rows(), "markdown").splitlines()
    assert all(line.startswith("|") and line.endswith("|") for line in lines)
    assert set(lines[1]) <= set("|-")
    assert [c.strip() for c in lines[0].strip("|").split("|")] == list(COLUMNS)


def test_report_json():
    assert json.loads(emit_report(rows(), "json"))[0]["% Success"] == "50"
    with pytest.raises(ValueError):
        emit_report(rows(), "xlsx")


def test_unknown_approach():
    with pytest.raises(ValueError):
        TrialConfig("ReAct", TaskSpec.tower(3))


def test_matrix_config(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"approaches": ["OLP"], "tasks": [{"kind": "tower", "n": 3}], "trials": 2}))
    (config,) = load_matrix_config(path)
    assert config.approach == "OLP" and config.trials == 2


def test_replay_trial_is_deterministic(library):
    provider = ReplayProvider.from_path(FIXTURES)
    a = run_trial("OLP", TaskSpec.tower(3), 0, provider, library, clock=lambda: 0.0)
    b = run_trial("OLP", TaskSpec.tower(3), 0, provider, library, clock=lambda: 0.0)
    assert a == b
    assert a.succeeded and a.plan_length == 4


def test_missing_fixture_is_a_failed_trial(library):
    rec = run_trial("LLM-Planner", TaskSpec.tower(3), 0, ReplayProvider({}), library)
    assert not rec.completed and rec.error == "ProviderError"


def test_threaded_matrix_matches_serial(library):
    provider = ReplayProvider.from_path(FIXTURES)
    configs = [TrialConfig(a, TaskSpec.tower(3), 0, 1) for a in ("OLP", "LLM-Planner", "DELTA")]
    serial = run_matrix(configs, provider, library, clock=lambda: 0.0)
    threaded = run_matrix(configs, provider, library, jobs=3, clock=lambda: 0.0)
    assert [r.row for r in serial] == [r.row for r in threaded]
