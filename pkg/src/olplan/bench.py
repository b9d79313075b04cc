"""Seeded scene generation, approach x task trial matrices, metrics and reports."""
from __future__ import annotations

import csv
import io
import json
import logging
import random
import statistics
import string
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .baselines import BaselineFailure, delta_baseline, llm_planner_baseline, llm_plus_p_baseline
from .grounding import DEFAULT_THRESHOLDS, GeomThresholds, ObjectPose, PreconditionMismatch, SceneState, Table
from .llm.pipeline import PipelineError, TokenUsage, run_olp_pipeline
from .llm.providers import ChatProvider
from .llm.retrieval import ExemplarLibrary, retrieve_exemplars
from .pddl import Action, builtin_blockworld_domain
from .planner import DEFAULT_MAX_EXPANSIONS, PlanningError, plan_olp
from .simulator import CELL_MARGIN, TaskSpec, execute_plan, table_cells

log = logging.getLogger(__name__)

APPROACHES = ("OLP", "LLM-Planner", "LLM+P", "DELTA")
COLUMNS = ("Task Setting", "Planning Approach", "% Plan Complete", "% Success", "Avg. Plan Time (s)",
           "Avg. Tokens", "Avg. Plan Length")
BLOCK_HALF = 0.025
SPELLING_DISTRACTORS = 2


class PlacementOverflow(ValueError):
    pass


# -- scenes -----------------------------------------------------------------------------

def _objects_for(spec: TaskSpec, rng: random.Random) -> list[tuple[str, str, str | None]]:
    """(id, type, letter) for every block of the task."""
    if spec.kind == "tower":
        return [(f"red_block_{i}", "red block", None) for i in range(1, spec.n + 2)]
    if spec.kind == "spelling":
        spare = [c for c in string.ascii_uppercase if c not in spec.word]
        letters = list(spec.word) + rng.sample(spare, SPELLING_DISTRACTORS)
        total = {L: letters.count(L) for L in letters}
        seen: dict[str, int] = {}
        out = []
        for L in letters:
            seen[L] = seen.get(L, 0) + 1
            oid = f"block_{L.lower()}_{seen[L]}" if total[L] > 1 else f"block_{L.lower()}"
            out.append((oid, "block", L))
        return out
    return [(f"{c}_block_{i}", f"{c} block", None) for c in spec.types for i in range(1, spec.instances + 1)]


def _max_pile(spec: TaskSpec) -> int:
    return {"tower": 1, "spelling": 2, "organize": 3}[spec.kind]


def gen_scene(spec: TaskSpec, seed: int, table: Table = Table()) -> SceneState:
    """Random block layout: tower blocks all on the table, other tasks with short random piles."""
    rng = random.Random(seed)
    blocks = _objects_for(spec, rng)
    rng.shuffle(blocks)
    piles: list[list[int]] = []
    max_h = _max_pile(spec)
    for i in range(len(blocks)):
        open_piles = [p for p in piles if len(p) < max_h]
        if open_piles and rng.random() < 0.4:
            rng.choice(open_piles).append(i)
        else:
            piles.append([i])
    probe = SceneState({}, table)
    cells = table_cells(probe, 2 * BLOCK_HALF + CELL_MARGIN)
    if len(piles) > len(cells):
        raise PlacementOverflow(f"{len(piles)} piles but only {len(cells)} table cells")
    chosen = rng.sample(cells, len(piles))
    objects = {}
    for (x, y), pile in zip(chosen, piles):
        for level, i in enumerate(pile):
            oid, kind, letter = blocks[i]
            z = table.height + BLOCK_HALF + 2 * BLOCK_HALF * level
            objects[oid] = ObjectPose((x, y, round(z, 6)), (BLOCK_HALF,) * 3, type=kind, letter=letter)
    return SceneState(objects, table)


# -- trials -------------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialConfig:
    approach: str
    spec: TaskSpec
    seed: int = 0
    trials: int = 10

    def __post_init__(self):
        if self.approach not in APPROACHES:
            raise ValueError(f"unknown approach {self.approach!r}; expected one of {', '.join(APPROACHES)}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")


@dataclass
class TrialRecord:
    approach: str
    task: str
    seed: int
    completed: bool
    succeeded: bool
    plan_time: float
    tokens: int
    plan_length: int | None
    error: str = ""
    failure_reason: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass(frozen=True)
class Stat:
    mean: float
    sd: float

    @classmethod
    def of(cls, values: Sequence[float]) -> "Stat | None":
        if not values:
            return None
        return cls(statistics.fmean(values), statistics.pstdev(values))


@dataclass(frozen=True)
class MetricsRow:
    task: str
    approach: str
    trials: int
    plan_complete_pct: float
    success_pct: float
    plan_time: Stat | None
    tokens: Stat | None
    plan_length: Stat | None


@dataclass
class ApproachOutcome:
    actions: list[Action] | None
    tokens: TokenUsage
    error: str = ""


def _error_name(exc: BaseException) -> str:
    if isinstance(exc, PipelineError):
        return f"{type(exc.cause).__name__}@{exc.stage}"
    if isinstance(exc, BaselineFailure) and exc.stage:
        return f"{exc.kind}@{exc.stage}"
    return type(exc).__name__


def run_approach(approach: str, spec: TaskSpec, scene: SceneState, provider: ChatProvider,
                 lib: ExemplarLibrary, thr: GeomThresholds = DEFAULT_THRESHOLDS,
                 max_expansions: int | None = DEFAULT_MAX_EXPANSIONS) -> ApproachOutcome:
    """Plan with one approach; measured failures come back in ``error``."""
    task = spec.describe()
    domain = builtin_blockworld_domain()
    if approach == "OLP":
        try:
            res = run_olp_pipeline(task, scene.ids, lib, provider)
        except PipelineError as exc:
            return ApproachOutcome(None, TokenUsage(), _error_name(exc))
        try:
            plan, _ = plan_olp(res.plan, res.binding, scene, domain, thr, max_expansions)
        except (PlanningError, ValueError) as exc:
            return ApproachOutcome(None, res.tokens, _error_name(exc))
        return ApproachOutcome(plan.actions, res.tokens)
    example = retrieve_exemplars(task, lib, k=1)[0][0]
    if approach == "LLM-Planner":
        out = llm_planner_baseline(task, scene, provider, thr)
    elif approach == "LLM+P":
        out = llm_plus_p_baseline(task, scene, provider, example.pddl_problem, domain, thr, max_expansions)
    elif approach == "DELTA":
        out = delta_baseline(task, scene, provider, example.pddl_domain, example.pddl_problem, example.subgoals,
                             thr, max_expansions)
    else:
        raise ValueError(f"unknown approach {approach!r}")
    return ApproachOutcome(out.actions, out.tokens, _error_name(out.error) if out.error else "")


def run_trial(approach: str, spec: TaskSpec, seed: int, provider: ChatProvider, lib: ExemplarLibrary,
              clock: Callable[[], float] = time.perf_counter,
              thr: GeomThresholds = DEFAULT_THRESHOLDS) -> TrialRecord:
    """Scene -> plan (timed) -> execute -> record. Plan time excludes execution."""
    scene = gen_scene(spec, seed)
    t0 = clock()
    try:
        outcome = run_approach(approach, spec, scene, provider, lib, thr)
    except Exception as exc:  # a trial never aborts the matrix
        log.warning("%s on %s (seed %d) raised %s", approach, spec.label, seed, exc)
        outcome = ApproachOutcome(None, TokenUsage(), _error_name(exc))
    elapsed = clock() - t0
    if outcome.actions is None:
        return TrialRecord(approach, spec.label, seed, False, False, elapsed, outcome.tokens.total, None,
                           outcome.error)
    trace = execute_plan(scene, outcome.actions, spec, thr)
    failure = trace.failure
    return TrialRecord(approach, spec.label, seed, trace.completed, bool(trace.succeeded), elapsed,
                       outcome.tokens.total, len(outcome.actions), outcome.error,
                       failure.reason if failure else "")


def aggregate(records: Sequence[TrialRecord]) -> MetricsRow:
    """Percentages over all trials; plan length over successful trials only."""
    if not records:
        raise ValueError("no trial records to aggregate")
    n = len(records)
    done = [r for r in records if r.completed]
    wins = [r for r in records if r.completed and r.succeeded]
    return MetricsRow(
        task=records[0].task,
        approach=records[0].approach,
        trials=n,
        plan_complete_pct=100.0 * len(done) / n,
        success_pct=100.0 * len(wins) / n,
        plan_time=Stat.of([r.plan_time for r in records]),
        tokens=Stat.of([float(r.tokens) for r in records]),
        plan_length=Stat.of([float(r.plan_length) for r in wins]),
    )


@dataclass
class MatrixResult:
    config: TrialConfig
    row: MetricsRow
    records: list[TrialRecord] = field(default_factory=list)


def run_matrix(configs: Sequence[TrialConfig], provider: ChatProvider, lib: ExemplarLibrary | None = None,
               jobs: int = 1, clock: Callable[[], float] = time.perf_counter,
               thr: GeomThresholds = DEFAULT_THRESHOLDS) -> list[MatrixResult]:
    """Run every trial of every config; trial i of a config uses seed ``config.seed + i``."""
    lib = lib or ExemplarLibrary.load()
    jobs_list = [(c, c.seed + i) for c in configs for i in range(c.trials)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PreconditionMismatch)
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                records = list(pool.map(
                    lambda cs: run_trial(cs[0].approach, cs[0].spec, cs[1], provider, lib, clock, thr), jobs_list))
        else:
            records = [run_trial(c.approach, c.spec, s, provider, lib, clock, thr) for c, s in jobs_list]
    out, pos = [], 0
    for c in configs:
        mine = records[pos:pos + c.trials]
        pos += c.trials
        out.append(MatrixResult(c, aggregate(mine), mine))
    return out


# -- matrix config ---------------------------------------------------------------------------

def load_matrix_config(path: str | Path) -> list[TrialConfig]:
    """JSON: ``{"approaches": [...], "tasks": [TaskSpec dicts], "seed": int, "trials": int}``."""
    data = json.loads(Path(path).read_text())
    approaches = data.get("approaches", list(APPROACHES))
    tasks = [TaskSpec.from_dict(t) for t in data["tasks"]]
    seed, trials = int(data.get("seed", 0)), int(data.get("trials", 10))
    return [TrialConfig(a, t, seed, trials) for t in tasks for a in approaches]


# -- reports -----------------------------------------------------------------------------------

def _fmt(stat: Stat | None, digits: int) -> str:
    if stat is None:
        return "n/a"
    return f"{stat.mean:.{digits}f} ± {stat.sd:.{digits}f}"


def report_rows(rows: Iterable[MetricsRow]) -> list[list[str]]:
    return [[r.task, r.approach, f"{r.plan_complete_pct:.0f}", f"{r.success_pct:.0f}", _fmt(r.plan_time, 2),
             _fmt(r.tokens, 1), _fmt(r.plan_length, 1)] for r in rows]


def emit_report(rows: Sequence[MetricsRow], fmt: str = "csv") -> str:
    if not rows:
        raise ValueError("no rows to report")
    body = report_rows(rows)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        writer.writerows(body)
        return buf.getvalue()
    if fmt == "markdown":
        lines = ["| " + " | ".join(COLUMNS) + " |", "|" + "|".join("---" for _ in COLUMNS) + "|"]
        lines += ["| " + " | ".join(r) + " |" for r in body]
        return "\n".join(lines) + "\n"
    if fmt == "json":
        return json.dumps([dict(zip(COLUMNS, r)) for r in body], indent=2, ensure_ascii=False) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def write_records(results: Sequence[MatrixResult], path: str | Path) -> None:
    with open(path, "w") as f:
        for res in results:
            for rec in res.records:
                f.write(rec.to_json() + "\n")
