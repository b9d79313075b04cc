"""Scene and task builders shared by the test modules."""
import random

from olplan.grounding import TABLE, ObjectPose, SceneState, derive_predicates
from olplan.pddl import OBJECT, Atom, Literal, Problem, builtin_blockworld_domain

FIG9 = {
    "plan": [{
        "step": 1,
        "action": "pick and place",
        "required_objects": ["first block", "second block"],
        "object_states": {
            "first block": {"preconditions": ["under nothing", "on table"],
                            "effects": ["under second block", "on table"]},
            "second block": {"preconditions": ["under nothing", "on table"],
                             "effects": ["on first block", "under nothing"]},
        },
        "instruction": "Pick and place second block from table on first block.",
    }]
}

BLOCK = 0.05


def block(x, y=0.0, level=0, type="block", letter=None):
    """A 5 cm cube whose bottom sits ``level`` blocks above the table."""
    return ObjectPose((x, y, BLOCK / 2 + level * BLOCK), type=type, letter=letter)


def piles_scene(*piles, types=None, letters=None, hand=None):
    """Scene with each pile (bottom to top) in its own column along x."""
    types = types or {}
    letters = letters or {}
    objects = {}
    for i, pile in enumerate(piles):
        for level, obj in enumerate(pile):
            objects[obj] = block(0.25 + 0.08 * i, 0.0, level, types.get(obj, "block"), letters.get(obj))
    if hand is not None:
        objects[hand] = ObjectPose((0.7, 0.3, 0.3), type=types.get(hand, "block"), letter=letters.get(hand))
    return SceneState(objects, hand=hand or "air")


def random_piles(names, rng):
    """Random partition of ``names`` into ordered piles."""
    order = list(names)
    rng.shuffle(order)
    piles = []
    for name in order:
        if piles and rng.random() < 0.5:
            rng.choice(piles).append(name)
        else:
            piles.append([name])
    return piles


def pile_atoms(piles):
    """Support atoms of a configuration, ``(on below above)`` and ``(under above below)``."""
    out = set()
    for pile in piles:
        below = TABLE
        for obj in pile:
            out |= {Atom("on", (below, obj)), Atom("under", (obj, below))}
            below = obj
    return out


def random_task(rng: random.Random, max_blocks=6):
    """A solvable block-world problem: random start piles, goal = subset of a random target configuration."""
    n = rng.randint(1, max_blocks)
    names = [f"b{i}" for i in range(1, n + 1)]
    scene = piles_scene(*random_piles(names, rng))
    target = sorted(pile_atoms(random_piles(names, rng)))
    goal = rng.sample(target, rng.randint(1, len(target)))
    domain = builtin_blockworld_domain()
    problem = Problem("random", domain.name, tuple((o, OBJECT) for o in [*names, TABLE]),
                      derive_predicates(scene), tuple(Literal(a) for a in sorted(goal)))
    return domain, problem, scene
