import csv
import json
from pathlib import Path

import pytest

from olplan import cli
from olplan.foon import ObjectLevelPlan, make_unit, serialize_olp
from olplan.grounding import AliasBinding, save_scene
from olplan.llm.pipeline import PipelineResult, TokenUsage
from olplan.llm.synthetic import stack_units
from olplan.planner import format_plan
from olplan.pddl import Action
from support import FIG9, piles_scene

ROOT = Path(__file__).resolve().parents[1]
SCENE = ROOT / "scenes" / "two_red_one_blue.json"


@pytest.fixture
def two_blocks(tmp_path):
    path = tmp_path / "scene.json"
    save_scene(piles_scene(["b1"], ["b2"]), path)
    return path


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_plan_tower_of_two(tmp_path, capsys):
    code = run("plan", "Make a tower of 2 red blocks", SCENE, "--provider", "replay", "--out", tmp_path, "--json")
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["length"] == 2
    assert len(payload["plan"]) == 2
    for name in ("olp.json", "binding.json", "domain.pddl", "plan.txt", "problems/unit_1.pddl"):
        assert (tmp_path / name).exists()


def test_plan_missing_scene(tmp_path, capsys):
    code = run("plan", "Make a tower", tmp_path / "nope.json", "--provider", "replay", "--out", tmp_path)
    assert code == 2
    assert "nope.json" in capsys.readouterr().err


def test_plan_unsolvable(tmp_path, two_blocks, monkeypatch, capsys):
    unit = make_unit(1, "pick and place", {
        "first block": (["on table"], ["on second block", "under second block"]),
        "second block": (["on table"], ["on first block"]),
    })
    binding = AliasBinding({"first block": "b1", "second block": "b2"})
    fake = PipelineResult(ObjectLevelPlan((unit,)), binding, TokenUsage(1, 1), None, ["x"])
    monkeypatch.setattr(cli, "run_olp_pipeline", lambda *a, **k: fake)
    code = run("plan", "anything", two_blocks, "--provider", "replay", "--out", tmp_path)
    assert code == 3
    assert "unit 1" in capsys.readouterr().err


def write_plan(path, actions):
    path.write_text(format_plan(actions))
    return path


def test_exec_valid_tower(tmp_path, two_blocks):
    plan = write_plan(tmp_path / "p.txt", [Action("pick", ("b2", "table")), Action("place", ("b2", "b1"))])
    assert run("exec", two_blocks, plan, "--out", tmp_path) == 0
    last = json.loads((tmp_path / "trace.jsonl").read_text().splitlines()[-1])
    assert last == {"completed": True, "succeeded": None}


def test_exec_failing_plan(tmp_path, two_blocks, capsys):
    plan = write_plan(tmp_path / "p.txt", [Action("pick", ("b2", "table")), Action("place", ("b1", "b2"))])
    assert run("exec", two_blocks, plan, "--out", tmp_path) == 1
    assert "NotHolding" in capsys.readouterr().out
    steps = [json.loads(line) for line in (tmp_path / "trace.jsonl").read_text().splitlines()]
    assert steps[1]["reason"] == "NotHolding"


def test_exec_empty_plan(tmp_path, two_blocks):
    plan = write_plan(tmp_path / "p.txt", [])
    assert run("exec", two_blocks, plan, "--out", tmp_path, "--task-spec", '{"kind": "tower", "n": 3}') == 0


def report_without_time(path):
    rows = list(csv.reader(path.open()))
    col = rows[0].index("Avg. Plan Time (s)")
    return [r[:col] + r[col + 1:] for r in rows]


def test_bench_is_deterministic(tmp_path):
    matrix = ROOT / "configs" / "towers.json"
    assert run("bench", matrix, "--provider", "replay", "--out", tmp_path / "a") == 0
    assert run("bench", matrix, "--provider", "replay", "--out", tmp_path / "b") == 0
    a = report_without_time(tmp_path / "a" / "report.csv")
    assert a == report_without_time(tmp_path / "b" / "report.csv")
    assert len(a) == 9
    assert len((tmp_path / "a" / "trials.jsonl").read_text().splitlines()) == 8


def test_bench_unknown_approach(tmp_path):
    matrix = tmp_path / "m.json"
    matrix.write_text(json.dumps({"approaches": ["ReAct"], "tasks": [{"kind": "tower", "n": 3}]}))
    assert run("bench", matrix, "--provider", "replay", "--out", tmp_path) == 2


def test_bench_markdown(tmp_path, capsys):
    matrix = tmp_path / "m.json"
    matrix.write_text(json.dumps({"approaches": ["OLP"], "tasks": [{"kind": "tower", "n": 3}], "trials": 1}))
    assert run("bench", matrix, "--provider", "replay", "--out", tmp_path, "--format", "markdown") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("| Task Setting |")
    assert (tmp_path / "report.md").exists()


def test_foon2pddl_fig9(tmp_path, two_blocks):
    olp = tmp_path / "olp.json"
    olp.write_text(json.dumps(FIG9))
    binding = tmp_path / "binding.json"
    binding.write_text(json.dumps({"first block": "b1", "second block": "b2"}))
    assert run("foon2pddl", olp, two_blocks, "--binding", binding, "--out", tmp_path / "out") == 0
    (problem,) = sorted((tmp_path / "out").iterdir())
    text = problem.read_text()
    for goal in ("(on b1 b2)", "(under b2 b1)", "(on b2 air)"):
        assert goal in text.split("(:goal")[1]


def test_foon2pddl_three_units(tmp_path):
    scene = tmp_path / "scene.json"
    save_scene(piles_scene(["block_1"], ["block_2"], ["block_3"], ["block_4"]), scene)
    olp = tmp_path / "olp.json"
    names = ["first block", "second block", "third block", "fourth block"]
    olp.write_text(serialize_olp(ObjectLevelPlan(tuple(stack_units(names, 1)))))
    assert run("foon2pddl", olp, scene, "--out", tmp_path / "out") == 0
    assert sorted(p.name for p in (tmp_path / "out").iterdir()) == ["unit_1.pddl", "unit_2.pddl", "unit_3.pddl"]


def test_foon2pddl_unbound_alias(tmp_path, two_blocks):
    olp = tmp_path / "olp.json"
    olp.write_text(json.dumps(FIG9))
    binding = tmp_path / "binding.json"
    binding.write_text(json.dumps({"first block": "b1"}))
    assert run("foon2pddl", olp, two_blocks, "--binding", binding, "--out", tmp_path) == 3


def test_config_rejects_inline_key(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[provider]\nmode = replay\napi_key = sk-123\n")
    assert run("exec", SCENE, ini, "--config", ini) == 2


def test_example_config_loads():
    cfg = cli.load_config(ROOT / "configs" / "olplan.ini")
    assert cfg.mode == "replay"
    assert cfg.fixtures.exists() and cfg.library.exists()
