"""Regenerate the bundled replay fixtures and the golden bench report.

Replies come from the rule-based synthetic responder, not a live model.
Every conversation the tests and the default matrix replay is recorded:

* the bench matrices in configs/matrix.json and configs/towers.json;
* the object-level pipeline on towers of 3 to 7 blocks (seed 0 scenes);
* the two-block tower on scenes/two_red_one_blue.json.

The golden CSV is then produced by replaying the matrix with a zero clock,
so plan times are 0 and the file is bit-stable.
"""
from __future__ import annotations

import argparse
import warnings
from pathlib import Path

from olplan import bench
from olplan.grounding import PreconditionMismatch, load_scene
from olplan.llm.pipeline import run_olp_pipeline
from olplan.llm.providers import RecordingProvider, ReplayProvider, ScriptedProvider, save_fixtures
from olplan.llm.retrieval import ExemplarLibrary
from olplan.llm.synthetic import SyntheticResponder
from olplan.simulator import TaskSpec

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "src" / "olplan" / "data" / "fixtures" / "synthetic.json"
GOLDEN = ROOT / "tests" / "golden" / "bench_report.csv"
MATRIX = ROOT / "configs" / "matrix.json"
TOWERS = ROOT / "configs" / "towers.json"
TOWER2_SCENE = ROOT / "scenes" / "two_red_one_blue.json"
TOWER2_TASK = "Make a tower of 2 red blocks"


def record(lib: ExemplarLibrary) -> dict:
    rec = RecordingProvider(ScriptedProvider(SyntheticResponder()))
    for config in (MATRIX, TOWERS):
        bench.run_matrix(bench.load_matrix_config(config), rec, lib)
    for n in range(3, 8):
        spec = TaskSpec.tower(n)
        run_olp_pipeline(spec.describe(), bench.gen_scene(spec, 0).ids, lib, rec)
    run_olp_pipeline(TOWER2_TASK, load_scene(TOWER2_SCENE).ids, lib, rec)
    return rec.fixtures


def golden_report(lib: ExemplarLibrary, fixtures: Path = FIXTURES) -> str:
    results = bench.run_matrix(bench.load_matrix_config(MATRIX), ReplayProvider.from_path(fixtures), lib,
                               clock=lambda: 0.0)
    return bench.emit_report([r.row for r in results], "csv")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--fixtures", type=Path, default=FIXTURES)
    ap.add_argument("--golden", type=Path, default=GOLDEN)
    args = ap.parse_args()
    warnings.simplefilter("ignore", PreconditionMismatch)
    lib = ExemplarLibrary.load()
    fixtures = record(lib)
    save_fixtures(args.fixtures, fixtures)
    print(f"wrote {len(fixtures)} fixtures to {args.fixtures}")
    args.golden.parent.mkdir(parents=True, exist_ok=True)
    args.golden.write_text(golden_report(lib, args.fixtures))
    print(f"wrote {args.golden}")


if __name__ == "__main__":
    main()
