"""Geometric scenes, object-centered predicates, and FOON→PDDL compilation.

Relations are written from the reference frame of the first argument:
``(on A B)`` means B rests on top of A and ``(under B A)`` that A is beneath
B. The virtual object ``air`` stands for free space, so ``(on A air)`` says
nothing rests on A and ``(in hand air)`` that the gripper is empty.
"""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from scipy.spatial.transform import Rotation

from .foon import FunctionalUnit, StateRelation
from .pddl import Atom, Domain, Literal, Problem, OBJECT

TABLE = "table"
AIR = "air"
HAND = "hand"

TABLE_CLEAR = Atom(  # the table always has free area left
    "on", (TABLE, AIR))

IDENTITY = (0.0, 0.0, 0.0, 1.0)


class GroundingError(ValueError):
    pass


class AmbiguousSupport(GroundingError):
    def __init__(self, obj: str, supports: list[str]):
        super().__init__(f"{obj} is within contact distance of several supports: {', '.join(supports)}")
        self.obj = obj
        self.supports = supports


class UnboundAlias(GroundingError):
    def __init__(self, alias: str):
        super().__init__(f"alias {alias!r} is not bound to a scene instance")
        self.alias = alias


class PreconditionMismatch(UserWarning):
    pass


@dataclass(frozen=True)
class ObjectPose:
    position: tuple[float, float, float]
    half_extents: tuple[float, float, float] = (0.025, 0.025, 0.025)
    orientation: tuple[float, float, float, float] = IDENTITY  # x, y, z, w
    type: str = "block"
    letter: str | None = None

    def __post_init__(self):
        if abs(float(np.linalg.norm(self.orientation)) - 1.0) > 1e-9:
            raise GroundingError(f"orientation {self.orientation} is not a unit quaternion")
        if min(self.half_extents) <= 0:
            raise GroundingError(f"half extents must be positive, got {self.half_extents}")

    @property
    def world_half_extents(self) -> tuple[float, float, float]:
        if self.orientation == IDENTITY:
            return self.half_extents
        r = np.abs(Rotation.from_quat(self.orientation).as_matrix())
        return tuple(float(v) for v in r @ np.asarray(self.half_extents))

    @property
    def top(self) -> float:
        return self.position[2] + self.world_half_extents[2]

    @property
    def bottom(self) -> float:
        return self.position[2] - self.world_half_extents[2]

    def footprint(self) -> tuple[float, float, float, float]:
        x, y, _ = self.position
        ex, ey, _ = self.world_half_extents
        return (x - ex, y - ey, x + ex, y + ey)


@dataclass(frozen=True)
class Table:
    height: float = 0.0
    workspace: tuple[float, float, float, float] = (0.2, -0.4, 0.8, 0.4)  # xmin, ymin, xmax, ymax

    def contains_xy(self, x: float, y: float) -> bool:
        xmin, ymin, xmax, ymax = self.workspace
        return xmin <= x <= xmax and ymin <= y <= ymax


@dataclass(frozen=True)
class SceneState:
    objects: Mapping[str, ObjectPose] = field(default_factory=dict)
    table: Table = Table()
    hand: str = AIR

    def __post_init__(self):
        if self.hand != AIR and self.hand not in self.objects:
            raise GroundingError(f"hand holds unknown object {self.hand!r}")
        for reserved in (TABLE, AIR, HAND):
            if reserved in self.objects:
                raise GroundingError(f"{reserved!r} is reserved and cannot name an object")

    @property
    def ids(self) -> list[str]:
        return sorted(self.objects)

    def with_object(self, obj: str, pose: ObjectPose, hand: str | None = None) -> "SceneState":
        objects = dict(self.objects)
        objects[obj] = pose
        return replace(self, objects=objects, hand=self.hand if hand is None else hand)

    def to_dict(self) -> dict:
        objects = {}
        for oid in self.ids:
            p = self.objects[oid]
            entry = {
                "position": list(p.position),
                "quaternion": list(p.orientation),
                "half_extents": list(p.half_extents),
                "type": p.type,
            }
            if p.letter is not None:
                entry["letter"] = p.letter
            objects[oid] = entry
        return {
            "table": {"height": self.table.height, "workspace": list(self.table.workspace)},
            "hand": self.hand,
            "objects": objects,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SceneState":
        t = data.get("table", {})
        table = Table(float(t.get("height", 0.0)), tuple(t.get("workspace", Table().workspace)))
        objects = {}
        for oid, o in data.get("objects", {}).items():
            objects[oid] = ObjectPose(
                position=tuple(float(v) for v in o["position"]),
                half_extents=tuple(float(v) for v in o.get("half_extents", (0.025,) * 3)),
                orientation=tuple(float(v) for v in o.get("quaternion", IDENTITY)),
                type=o.get("type", "block"),
                letter=o.get("letter"),
            )
        return cls(objects, table, data.get("hand", AIR))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def load_scene(path: str | Path) -> SceneState:
    return SceneState.from_dict(json.loads(Path(path).read_text()))


def save_scene(scene: SceneState, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scene.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class GeomThresholds:
    contact_eps: float = 0.01
    support_overlap_min: float = 0.5

    def __post_init__(self):
        if self.contact_eps <= 0:
            raise GroundingError("contact_eps must be positive")
        if not 0 < self.support_overlap_min <= 1:
            raise GroundingError("support_overlap_min must lie in (0, 1]")


DEFAULT_THRESHOLDS = GeomThresholds()


def _overlap_fraction(upper: ObjectPose, lower: ObjectPose) -> float:
    ax0, ay0, ax1, ay1 = upper.footprint()
    bx0, by0, bx1, by1 = lower.footprint()
    w = min(ax1, bx1) - max(ax0, bx0)
    h = min(ay1, by1) - max(ay0, by0)
    if w <= 0 or h <= 0:
        return 0.0
    return (w * h) / ((ax1 - ax0) * (ay1 - ay0))


def _rests_on(upper: ObjectPose, lower: ObjectPose, thr: GeomThresholds) -> bool:
    if abs(upper.bottom - lower.top) > thr.contact_eps:
        return False
    if _overlap_fraction(upper, lower) >= thr.support_overlap_min:
        return True
    x0, y0, x1, y1 = lower.footprint()
    x, y, _ = upper.position
    return x0 <= x <= x1 and y0 <= y <= y1


def support_map(scene: SceneState, thr: GeomThresholds = DEFAULT_THRESHOLDS) -> dict[str, str | None]:
    """Map every object not in the hand to what it rests on (``table``, an id, or None)."""
    out: dict[str, str | None] = {}
    free = [o for o in scene.ids if o != scene.hand]
    for b in free:
        pb = scene.objects[b]
        found = []
        if abs(pb.bottom - scene.table.height) <= thr.contact_eps:
            found.append(TABLE)
        found.extend(a for a in free if a != b and _rests_on(pb, scene.objects[a], thr))
        if len(found) > 1:
            raise AmbiguousSupport(b, found)
        out[b] = found[0] if found else None
    return out


def derive_predicates(scene: SceneState, thr: GeomThresholds = DEFAULT_THRESHOLDS,
                      containment: bool = False) -> frozenset[Atom]:
    """Object-centered predicates that hold in ``scene``.

    Support pairs give ``(on A B)``/``(under B A)``, clear tops give
    ``(on X air)``, the table is always placeable (``(on table air)``) and the
    gripper yields ``(in hand X)``; a held object additionally has
    ``(on X hand)`` and ``(under X air)``, matching the pick effects.
    Raises AmbiguousSupport if an object touches more than one support.
    """
    atoms = {TABLE_CLEAR}
    supports = support_map(scene, thr)
    loaded = {s for s in supports.values() if s is not None}
    for obj, below in supports.items():
        if below is not None:
            atoms.add(Atom("on", (below, obj)))
            atoms.add(Atom("under", (obj, below)))
        if obj not in loaded:
            atoms.add(Atom("on", (obj, AIR)))
    if scene.hand == AIR:
        atoms.add(Atom("in", (HAND, AIR)))
    else:
        atoms.update({
            Atom("in", (HAND, scene.hand)),
            Atom("on", (scene.hand, HAND)),
            Atom("under", (scene.hand, AIR)),
        })
    if containment:
        atoms |= _containment(scene)
    return frozenset(atoms)


def _containment(scene: SceneState) -> set[Atom]:
    out = set()
    for a in scene.ids:
        pa = scene.objects[a]
        ax0, ay0, ax1, ay1 = pa.footprint()
        for b in scene.ids:
            if a == b or b == scene.hand:
                continue
            pb = scene.objects[b]
            bx0, by0, bx1, by1 = pb.footprint()
            if (ax0 < bx0 and bx1 < ax1 and ay0 < by0 and by1 < ay1
                    and pa.bottom < pb.bottom and pb.top <= pa.top):
                out.add(Atom("in", (a, b)))
    return out


# -- alias binding --------------------------------------------------------------

_SPECIAL = {TABLE: TABLE, "nothing": AIR, AIR: AIR}


@dataclass(frozen=True)
class AliasBinding:
    mapping: Mapping[str, str]

    def __post_init__(self):
        targets = list(self.mapping.values())
        if len(set(targets)) != len(targets):
            raise GroundingError(f"alias binding is not injective: {dict(self.mapping)}")

    def __getitem__(self, alias: str) -> str:
        if alias in _SPECIAL:
            return _SPECIAL[alias]
        try:
            return self.mapping[alias]
        except KeyError:
            raise UnboundAlias(alias) from None

    def __contains__(self, alias) -> bool:
        return alias in _SPECIAL or alias in self.mapping

    def __len__(self):
        return len(self.mapping)

    def items(self):
        return self.mapping.items()

    def to_dict(self) -> dict[str, str]:
        return dict(self.mapping)


def foon_state_to_literals(alias: str, rel: StateRelation, binding: AliasBinding) -> frozenset[Atom]:
    """Translate "alias <rel> target" into object-centered atoms.

    ``contains`` is rewritten to ``in`` with the arguments swapped. ``nothing``
    maps to ``air``; atoms that would put ``air`` in the first (reference
    frame) position carry no information and are dropped.
    """
    x, t = binding[alias], binding[rel.target]
    if rel.relation == "on":
        atoms = {Atom("on", (t, x)), Atom("under", (x, t))}
    elif rel.relation == "under":
        atoms = {Atom("on", (x, t)), Atom("under", (t, x))}
    elif rel.relation == "in":
        atoms = {Atom("in", (t, x))}
    else:
        atoms = {Atom("in", (x, t))}
    return frozenset(a for a in atoms if a.args[0] != AIR)


def unit_goal(fu: FunctionalUnit, binding: AliasBinding) -> frozenset[Atom]:
    atoms: set[Atom] = set()
    for alias in fu.required_objects:
        for rel in fu.outputs[alias].states:
            atoms |= foon_state_to_literals(alias, rel, binding)
    return frozenset(atoms)


def precondition_mismatches(fu: FunctionalUnit, binding: AliasBinding, init: Iterable[Atom]) -> list[Atom]:
    state = set(init)
    missing = set()
    for alias in fu.required_objects:
        for rel in fu.inputs[alias].states:
            missing |= foon_state_to_literals(alias, rel, binding) - state
    return sorted(missing)


def make_subgoal_problem(fu: FunctionalUnit, binding: AliasBinding, scene: SceneState,
                         domain: Domain, thr: GeomThresholds = DEFAULT_THRESHOLDS,
                         init: Iterable[Atom] | None = None) -> Problem:
    """PDDL problem whose goal is the unit's effects and whose initial state is the scene.

    ``init`` replaces the geometry-derived state, for chaining units over a
    symbolic state. Input states of the unit that do not hold initially are
    reported as a PreconditionMismatch warning; they never change the problem.
    """
    for alias in fu.required_objects:
        binding[alias]
    goal = unit_goal(fu, binding)
    init_atoms = frozenset(derive_predicates(scene, thr) if init is None else init)
    missing = precondition_mismatches(fu, binding, init_atoms)
    if missing:
        warnings.warn(PreconditionMismatch(
            f"step {fu.step}: inputs not satisfied by the current state: {' '.join(map(str, missing))}"))
    constants = set(domain.constant_names)
    objects = tuple((o, OBJECT) for o in [*scene.ids, TABLE] if o not in constants)
    return Problem(
        name=f"unit_{fu.step}",
        domain_name=domain.name,
        objects=objects,
        init=init_atoms,
        goal=tuple(Literal(a) for a in sorted(goal)),
    )
