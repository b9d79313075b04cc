"""Optimal forward search over grounded STRIPS tasks.

A* with the admissible h_max heuristic yields minimum-length plans; a
breadth-first search over the explicit state space serves as an independent
optimality oracle for small tasks.
"""
from __future__ import annotations

import heapq
import math
import time
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .foon import ObjectLevelPlan
from .grounding import (DEFAULT_THRESHOLDS, TABLE_CLEAR, AliasBinding, GeomThresholds, SceneState,
                        derive_predicates, make_subgoal_problem)
from .pddl import Action, Domain, GroundAction, Problem, StripsTask, ground

INF = math.inf
DEFAULT_MAX_EXPANSIONS = 200_000


class PlanningError(RuntimeError):
    pass


class SubgoalUnsolvable(PlanningError):
    def __init__(self, unit: int, reason: str = "no plan exists"):
        super().__init__(f"functional unit {unit + 1} is unsolvable: {reason}")
        self.unit = unit


class StateSpaceTooLarge(PlanningError):
    pass


@dataclass
class SearchStats:
    expanded: int = 0
    generated: int = 0
    wall_time: float = 0.0
    limit_hit: bool = False

    def __add__(self, other: "SearchStats") -> "SearchStats":
        return SearchStats(self.expanded + other.expanded, self.generated + other.generated,
                           self.wall_time + other.wall_time, self.limit_hit or other.limit_hit)


@dataclass(frozen=True)
class Plan:
    segments: tuple[tuple[int, tuple[Action, ...]], ...] = ()

    @property
    def actions(self) -> list[Action]:
        return [a for _, seg in self.segments for a in seg]

    @property
    def cost(self) -> int:
        return sum(len(seg) for _, seg in self.segments)

    def __len__(self):
        return self.cost


Heuristic = Callable[[int, StripsTask], float]


def hmax(state: int, task: StripsTask) -> float:
    """h_max for unit action costs: the first relaxed-planning-graph layer containing the goal."""
    goal = task.goal
    reached = state
    level = 0
    pending = list(task.actions)
    while reached & goal != goal:
        new = reached
        rest = []
        for a in pending:
            if a.pre & reached == a.pre:
                new |= a.add
            else:
                rest.append(a)
        if new == reached:
            return INF
        reached = new
        pending = rest
        level += 1
    return level


def blind(state: int, task: StripsTask) -> float:
    return 0


def astar(task: StripsTask, heuristic: Heuristic = hmax,
          max_expansions: int | None = DEFAULT_MAX_EXPANSIONS) -> tuple[list[GroundAction] | None, SearchStats]:
    """Minimum-cost plan, or None when the task is unsolvable (or the expansion limit is hit).

    Ties on f are broken by lower h, then by insertion order.
    """
    t0 = time.perf_counter()
    stats = SearchStats()
    h0 = heuristic(task.init, task)
    if h0 == INF:
        stats.wall_time = time.perf_counter() - t0
        return None, stats
    counter = 0
    open_heap = [(h0, h0, counter, task.init)]
    best_g = {task.init: 0}
    parent: dict[int, tuple[int, GroundAction] | None] = {task.init: None}
    closed = set()
    stats.generated = 1
    while open_heap:
        f, h, _, s = heapq.heappop(open_heap)
        if s in closed:
            continue
        g = best_g[s]
        if task.is_goal(s):
            path = []
            while parent[s] is not None:
                s, a = parent[s]
                path.append(a)
            path.reverse()
            stats.wall_time = time.perf_counter() - t0
            return path, stats
        closed.add(s)
        stats.expanded += 1
        if max_expansions is not None and stats.expanded >= max_expansions:
            stats.limit_hit = True
            break
        for a in task.actions:
            if s & a.pre != a.pre or s & a.pre_neg:
                continue
            t = (s & ~a.delete) | a.add
            ng = g + a.cost
            if t in best_g and best_g[t] <= ng:
                continue
            ht = heuristic(t, task)
            stats.generated += 1
            if ht == INF:
                continue
            best_g[t] = ng
            parent[t] = (s, a)
            closed.discard(t)
            counter += 1
            heapq.heappush(open_heap, (ng + ht, ht, counter, t))
    stats.wall_time = time.perf_counter() - t0
    return None, stats


def bfs_oracle(task: StripsTask, max_states: int = 1_000_000) -> int | None:
    """Optimal plan length by exhaustive breadth-first search (unit costs)."""
    if task.is_goal(task.init):
        return 0
    seen = {task.init}
    frontier = deque([(task.init, 0)])
    while frontier:
        s, d = frontier.popleft()
        for a in task.actions:
            if s & a.pre != a.pre or s & a.pre_neg:
                continue
            t = (s & ~a.delete) | a.add
            if t in seen:
                continue
            if task.is_goal(t):
                return d + 1
            seen.add(t)
            if len(seen) > max_states:
                raise StateSpaceTooLarge(f"more than {max_states} states")
            frontier.append((t, d + 1))
    return None


def simulate(task: StripsTask, actions: Sequence[GroundAction], state: int | None = None) -> int:
    """Apply actions symbolically, checking every precondition."""
    s = task.init if state is None else state
    for i, a in enumerate(actions):
        if not task.applicable(s, a):
            raise PlanningError(f"step {i + 1}: {a} is not applicable")
        s = task.apply(s, a)
    return s


def ground_blockworld(domain: Domain, problem: Problem, init=None) -> StripsTask:
    return ground(domain, problem, undeletable=[TABLE_CLEAR], init=init)


def solve_problem(domain: Domain, problem: Problem, *, init=None,
                  max_expansions: int | None = DEFAULT_MAX_EXPANSIONS):
    """Ground and solve; returns (actions or None, final atoms or None, stats)."""
    task = ground_blockworld(domain, problem, init)
    found, stats = astar(task, hmax, max_expansions)
    if found is None:
        return None, None, stats
    return [a.action for a in found], task.atoms(simulate(task, found)), stats


def plan_olp(plan: ObjectLevelPlan, binding: AliasBinding, scene: SceneState, domain: Domain,
             thr: GeomThresholds = DEFAULT_THRESHOLDS,
             max_expansions: int | None = DEFAULT_MAX_EXPANSIONS,
             problems: list[Problem] | None = None) -> tuple[Plan, SearchStats]:
    """Solve one subgoal problem per functional unit, chaining a symbolic state.

    The first unit starts from the predicates derived from ``scene``; each
    later unit starts where the previous segment left off. Raises
    SubgoalUnsolvable for the first unit without a plan. Every problem built,
    including an unsolvable one, is appended to ``problems`` when given.
    """
    state: Iterable = derive_predicates(scene, thr)
    segments = []
    total = SearchStats()
    for i, fu in enumerate(plan.units):
        problem = make_subgoal_problem(fu, binding, scene, domain, thr, init=state)
        if problems is not None:
            problems.append(problem)
        actions, final, stats = solve_problem(domain, problem, max_expansions=max_expansions)
        total = total + stats
        if actions is None:
            raise SubgoalUnsolvable(i, "search limit reached" if stats.limit_hit else "no plan exists")
        segments.append((i, tuple(actions)))
        state = final
    return Plan(tuple(segments)), total


def format_plan(plan: Plan | Iterable[Action]) -> str:
    """One ``(name arg ...)`` per line; segments are separated by ``; unit N`` comments."""
    if isinstance(plan, Plan):
        lines = []
        for unit, seg in plan.segments:
            lines.append(f"; unit {unit + 1}")
            lines.extend(str(a) for a in seg)
        return "\n".join(lines) + ("\n" if lines else "")
    body = "\n".join(str(a) for a in plan)
    return body + ("\n" if body else "")


def parse_plan(text: str) -> list[Action]:
    out = []
    for line in text.splitlines():
        line = line.split(";", 1)[0].strip()
        if line:
            out.append(Action.parse(line))
    return out
