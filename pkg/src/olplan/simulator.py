"""Deterministic kinematic block world.

Stands in for a physics simulator plus motion planner: an action succeeds
when the object-centered preconditions of the matching operator hold on the
geometry-derived state and the object is inside the reachable workspace.
Trajectories are not computed.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Iterable

from .grounding import (AIR, DEFAULT_THRESHOLDS, TABLE, Atom, GeomThresholds, ObjectPose, SceneState,
                        derive_predicates, support_map)
from .pddl import Action

HOLD_HEIGHT = 0.3
CELL_MARGIN = 0.03

OK = "ok"
FAILED = "failed"


class ExecutionFailure(Exception):
    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    n: int = 0
    word: str = ""
    instances: int = 0
    types: tuple[str, ...] = ("red", "blue", "green")

    def __post_init__(self):
        if self.kind == "tower":
            if not 3 <= self.n <= 7:
                raise ValueError(f"tower height must be in [3, 7], got {self.n}")
        elif self.kind == "spelling":
            if not self.word or not self.word.isalpha():
                raise ValueError(f"spelling needs an alphabetic word, got {self.word!r}")
            object.__setattr__(self, "word", self.word.upper())
        elif self.kind == "organize":
            if len(self.types) != 3:
                raise ValueError("organize uses exactly 3 block types")
            if not 2 <= self.instances <= 4:
                raise ValueError(f"organize instances must be in [2, 4], got {self.instances}")
        else:
            raise ValueError(f"unknown task kind {self.kind!r}")

    @classmethod
    def tower(cls, n: int) -> "TaskSpec":
        return cls("tower", n=n)

    @classmethod
    def spelling(cls, word: str) -> "TaskSpec":
        return cls("spelling", word=word)

    @classmethod
    def organize(cls, instances: int) -> "TaskSpec":
        return cls("organize", instances=instances)

    @property
    def label(self) -> str:
        if self.kind == "tower":
            return f"Tower (n={self.n})"
        if self.kind == "spelling":
            return f"Spelling ({self.word})"
        return f"Organize (m={self.instances})"

    def describe(self) -> str:
        """Natural-language task prompt."""
        if self.kind == "tower":
            return f"Make a tower of {self.n} red blocks"
        if self.kind == "spelling":
            return f"Stack the lettered blocks to spell the word {self.word} from top to bottom"
        return "Organize the table by stacking all blocks of the same colour into one pile per colour"

    def to_dict(self) -> dict:
        if self.kind == "tower":
            return {"kind": "tower", "n": self.n}
        if self.kind == "spelling":
            return {"kind": "spelling", "word": self.word}
        return {"kind": "organize", "instances": self.instances, "types": list(self.types)}

    @classmethod
    def from_dict(cls, data: dict) -> "TaskSpec":
        kind = data["kind"]
        if kind == "tower":
            return cls.tower(int(data["n"]))
        if kind == "spelling":
            return cls.spelling(data["word"])
        if kind == "organize":
            return cls("organize", instances=int(data["instances"]),
                       types=tuple(data.get("types", ("red", "blue", "green"))))
        raise ValueError(f"unknown task kind {kind!r}")


@dataclass(frozen=True)
class TraceStep:
    action: Action
    outcome: str
    reason: str = ""
    scene_digest: str = ""


@dataclass
class ExecutionTrace:
    steps: list[TraceStep] = field(default_factory=list)
    completed: bool = True
    succeeded: bool | None = None
    final_scene: SceneState | None = None

    @property
    def failure(self) -> TraceStep | None:
        return next((s for s in self.steps if s.outcome != OK), None)

    def to_jsonl(self) -> str:
        lines = []
        for i, s in enumerate(self.steps):
            rec = {"step": i + 1, "action": str(s.action), "outcome": s.outcome, "scene": s.scene_digest}
            if s.reason:
                rec["reason"] = s.reason
            lines.append(json.dumps(rec))
        lines.append(json.dumps({"completed": self.completed, "succeeded": self.succeeded}))
        return "\n".join(lines) + "\n"


# -- table free-cell grid ---------------------------------------------------------

def cell_size(scene: SceneState) -> float:
    if not scene.objects:
        return 0.05 + CELL_MARGIN
    widest = max(2 * max(p.world_half_extents[:2]) for p in scene.objects.values())
    return widest + CELL_MARGIN


def table_cells(scene: SceneState, size: float | None = None) -> list[tuple[float, float]]:
    """Cell centres over the workspace, row-major from (xmin, ymin)."""
    size = cell_size(scene) if size is None else size
    xmin, ymin, xmax, ymax = scene.table.workspace
    nx = int((xmax - xmin) // size)
    ny = int((ymax - ymin) // size)
    return [(round(xmin + (i + 0.5) * size, 6), round(ymin + (j + 0.5) * size, 6))
            for j in range(ny) for i in range(nx)]


def free_table_cell(scene: SceneState, obj: str) -> tuple[float, float] | None:
    size = cell_size(scene)
    half = size / 2
    others = [p.footprint() for o, p in scene.objects.items() if o != obj and o != scene.hand]
    for cx, cy in table_cells(scene, size):
        box = (cx - half, cy - half, cx + half, cy + half)
        if all(min(box[2], f[2]) - max(box[0], f[0]) <= 1e-9 or min(box[3], f[3]) - max(box[1], f[1]) <= 1e-9
               for f in others):
            return cx, cy
    return None


# -- actions ----------------------------------------------------------------------------

def _require_known(scene: SceneState, *names: str):
    for n in names:
        if n != TABLE and n not in scene.objects:
            raise ExecutionFailure("UnknownObject", n)


def apply_pick(scene: SceneState, obj: str, surface: str,
               thr: GeomThresholds = DEFAULT_THRESHOLDS) -> SceneState:
    """Grasp ``obj`` from ``surface``; raises ExecutionFailure with the violated condition."""
    _require_known(scene, obj, surface)
    if obj == TABLE:
        raise ExecutionFailure("NotGraspable", obj)
    if scene.hand != AIR:
        raise ExecutionFailure("HandOccupied", scene.hand)
    atoms = derive_predicates(scene, thr)
    if Atom("on", (obj, AIR)) not in atoms:
        raise ExecutionFailure("ObjectNotClear", obj)
    if Atom("on", (surface, obj)) not in atoms or Atom("under", (obj, surface)) not in atoms:
        raise ExecutionFailure("NotOnSurface", f"{obj} is not on {surface}")
    pose = scene.objects[obj]
    if not scene.table.contains_xy(pose.position[0], pose.position[1]):
        raise ExecutionFailure("OutOfWorkspace", obj)
    x, y, _ = pose.position
    lifted = ObjectPose((x, y, scene.table.height + HOLD_HEIGHT), pose.half_extents, pose.orientation,
                        pose.type, pose.letter)
    return scene.with_object(obj, lifted, hand=obj)


def apply_place(scene: SceneState, obj: str, surface: str,
                thr: GeomThresholds = DEFAULT_THRESHOLDS) -> SceneState:
    """Put the held ``obj`` on ``surface`` (centred), or on a free table cell."""
    _require_known(scene, obj, surface)
    if scene.hand != obj:
        raise ExecutionFailure("NotHolding", obj)
    if surface == obj:
        raise ExecutionFailure("SurfaceOccupied", f"{obj} cannot be placed on itself")
    pose = scene.objects[obj]
    hz = pose.world_half_extents[2]
    if surface == TABLE:
        cell = free_table_cell(scene, obj)
        if cell is None:
            raise ExecutionFailure("NoFreeTableCell")
        x, y, z = cell[0], cell[1], scene.table.height + hz
    else:
        atoms = derive_predicates(scene, thr)
        if Atom("on", (surface, AIR)) not in atoms:
            raise ExecutionFailure("SurfaceOccupied", surface)
        below = scene.objects[surface]
        x, y = below.position[0], below.position[1]
        z = below.top + hz
    placed = ObjectPose((x, y, z), pose.half_extents, pose.orientation, pose.type, pose.letter)
    return scene.with_object(obj, placed, hand=AIR)


def apply_action(scene: SceneState, action: Action, thr: GeomThresholds = DEFAULT_THRESHOLDS) -> SceneState:
    if action.name not in ("pick", "place") or len(action.args) != 2:
        raise ExecutionFailure("MalformedAction", str(action))
    fn = apply_pick if action.name == "pick" else apply_place
    return fn(scene, action.args[0], action.args[1], thr)


def execute_plan(scene: SceneState, actions: Iterable[Action], spec: TaskSpec | None = None,
                 thr: GeomThresholds = DEFAULT_THRESHOLDS, motion_failure_rate: float = 0.0,
                 seed: int = 0) -> ExecutionTrace:
    """Run actions in order, stopping at the first failure.

    ``motion_failure_rate`` injects seeded motion-planning failures for
    harness experiments; it is zero by default.
    """
    rng = random.Random(seed)
    trace = ExecutionTrace()
    current = scene
    for action in actions:
        try:
            if motion_failure_rate and rng.random() < motion_failure_rate:
                raise ExecutionFailure("MotionPlanningFailed", str(action))
            current = apply_action(current, action, thr)
        except ExecutionFailure as exc:
            trace.steps.append(TraceStep(action, FAILED, exc.reason, current.digest()))
            trace.completed = False
            break
        trace.steps.append(TraceStep(action, OK, "", current.digest()))
    trace.final_scene = current
    if spec is not None:
        trace.succeeded = trace.completed and check_success(current, spec, thr)
    return trace


# -- success ------------------------------------------------------------------------------

def stacks(scene: SceneState, thr: GeomThresholds = DEFAULT_THRESHOLDS) -> list[list[str]]:
    """Every pile standing on the table, listed bottom to top.

    A pile that branches (two objects on one support) is reported up to the
    branching object.
    """
    supports = support_map(scene, thr)
    children: dict[str, list[str]] = {}
    for obj, below in supports.items():
        if below is not None:
            children.setdefault(below, []).append(obj)
    out = []
    for base in sorted(children.get(TABLE, [])):
        chain = [base]
        while len(children.get(chain[-1], [])) == 1:
            chain.append(children[chain[-1]][0])
        out.append(chain)
    return out


def check_success(scene: SceneState, spec: TaskSpec, thr: GeomThresholds = DEFAULT_THRESHOLDS) -> bool:
    piles = stacks(scene, thr)
    if spec.kind == "tower":
        return any(len(p) == spec.n for p in piles)
    if spec.kind == "spelling":
        for p in piles:
            letters = [scene.objects[o].letter or "" for o in reversed(p)]
            if "".join(letters).upper() == spec.word:
                return True
        return False
    # organize: one homogeneous pile per type, holding every block
    if scene.hand != AIR:
        return False
    piled = [o for p in piles for o in p]
    if sorted(piled) != scene.ids:
        return False
    seen_types = set()
    for p in piles:
        kinds = {scene.objects[o].type for o in p}
        if len(kinds) != 1:
            return False
        (kind,) = kinds
        if kind in seen_types:
            return False
        seen_types.add(kind)
    return True
