"""Comparison pipelines that ask the language model for a plan or for PDDL directly.

All three share the provider, planner and simulator with the object-level
pipeline. Failures that are part of the measured behaviour (bad syntax,
unparseable plans, unsolvable goals) are returned in ``BaselineResult.error``
rather than raised; provider errors are raised.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

from .grounding import AIR, DEFAULT_THRESHOLDS, HAND, TABLE, Atom, GeomThresholds, SceneState, derive_predicates
from .llm import prompts
from .llm.pipeline import TokenUsage
from .llm.providers import Chat, ChatProvider, ChatTranscript
from .pddl import (OBJECT, Action, Domain, Literal, PddlError, Problem, builtin_blockworld_domain, parse_domain,
                   parse_problem)
from .planner import DEFAULT_MAX_EXPANSIONS, SubgoalUnsolvable, solve_problem


class BaselineFailure(Exception):
    kind = "BaselineFailure"

    def __init__(self, message: str, stage: str = ""):
        super().__init__(f"[{stage}] {message}" if stage else message)
        self.stage = stage


class SyntaxFailure(BaselineFailure):
    kind = "SyntaxFailure"


class PlanParseFailure(BaselineFailure):
    kind = "PlanParseFailure"


class PlanningFailure(BaselineFailure):
    kind = "PlanningFailure"


@dataclass
class BaselineResult:
    actions: list[Action] | None
    tokens: TokenUsage
    error: Exception | None = None
    transcripts: list[ChatTranscript] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.actions is not None


# -- state narration ------------------------------------------------------------------

def _name(scene: SceneState, obj: str) -> str:
    if obj == TABLE:
        return "the table"
    if obj == HAND:
        return "the hand"
    pose = scene.objects.get(obj)
    return f"{pose.type} {obj}" if pose is not None else obj


def _sentence(scene: SceneState, atom: Atom) -> str | None:
    a, b = atom.args
    if a not in scene.objects and b not in scene.objects:
        return None
    if atom.predicate == "on":
        if b == AIR:
            return f"nothing is on {_name(scene, a)}"
        if b == HAND:
            return f"{_name(scene, a)} is grasped by the hand"
        return f"{_name(scene, b)} is on {_name(scene, a)}"
    if atom.predicate == "under":
        if b == AIR:
            return f"nothing is under {_name(scene, a)}"
        return f"{_name(scene, b)} is under {_name(scene, a)}"
    if a == HAND:
        return f"the hand is holding {_name(scene, b)}"
    return f"{_name(scene, b)} is in {_name(scene, a)}"


@dataclass(frozen=True)
class StateNarration:
    inventory: str
    sentences: tuple[str, ...]

    @property
    def text(self) -> str:
        return "; ".join((self.inventory, *self.sentences))

    def __str__(self):
        return self.text


def narrate_state(scene: SceneState, thr: GeomThresholds = DEFAULT_THRESHOLDS) -> StateNarration:
    """Plain-text state: an object inventory, then one clause per predicate that mentions a scene object."""
    names = [_name(scene, o) for o in scene.ids]
    if not names:
        inventory = "there are no objects"
    elif len(names) == 1:
        inventory = f"there is 1 object: {names[0]}"
    else:
        inventory = f"there are {len(names)} objects: {', '.join(names[:-1])} and {names[-1]}"
    sentences = [s for a in sorted(derive_predicates(scene, thr)) if (s := _sentence(scene, a))]
    return StateNarration(inventory, tuple(sentences))


# -- reply parsing ----------------------------------------------------------------------

_FENCE_LINE = re.compile(r"^\s*```")
_PAREN = re.compile(r"\(([^()]*)\)")


def parse_action_lines(reply: str) -> list[Action]:
    """Numbered ``(pick x y)`` / ``(place x y)`` lines; any other non-empty line rejects the plan."""
    actions = []
    for line in reply.splitlines():
        if not line.strip() or _FENCE_LINE.match(line):
            continue
        m = _PAREN.search(line.replace("<", "").replace(">", ""))
        parts = m.group(1).split() if m else []
        if len(parts) != 3 or parts[0].lower() not in ("pick", "place"):
            raise PlanParseFailure(f"not an action: {line.strip()[:80]!r}", "plan")
        actions.append(Action(parts[0].lower(), (parts[1], parts[2])))
    if not actions:
        raise PlanParseFailure("reply contains no actions", "plan")
    return actions


def extract_pddl(reply: str, head: str = "define") -> str:
    """The first balanced ``(define ...)`` form in the reply, or everything from its start if unbalanced."""
    text = "\n".join(line for line in reply.splitlines() if not _FENCE_LINE.match(line))
    m = re.search(r"\(\s*" + head + r"\b", text, re.IGNORECASE)
    if m is None:
        return text
    depth = 0
    i = m.start()
    while i < len(text):
        c = text[i]
        if c == ";":
            nl = text.find("\n", i)
            if nl < 0:
                break
            i = nl
            continue
        if c == "(":
            depth += 1
        elif c == ")":
            depth -= 1
            if depth == 0:
                return text[m.start():i + 1]
        i += 1
    return text[m.start():]


_ATOM = re.compile(r"\(\s*([A-Za-z][\w-]*)((?:\s+[^\s()]+)*)\s*\)")


def parse_subgoals(reply: str, domain: Domain, objects: Sequence[str]) -> list[frozenset[Atom]]:
    """One conjunction of atoms per line that contains any; atoms are checked against the domain."""
    known = set(objects) | set(domain.constant_names)
    arities = domain.arities
    out = []
    for line in reply.splitlines():
        if _FENCE_LINE.match(line):
            continue
        atoms = set()
        for m in _ATOM.finditer(line.split(";", 1)[0]):
            pred, args = m.group(1).lower(), tuple(m.group(2).split())
            if pred == "and" and not args:
                continue
            if arities.get(pred) != len(args):
                raise SyntaxFailure(f"unknown predicate or arity: ({pred} {' '.join(args)})", "subgoals")
            unknown = [a for a in args if a not in known]
            if unknown:
                raise SyntaxFailure(f"unknown object {unknown[0]!r}", "subgoals")
            atoms.add(Atom(pred, args))
        if atoms:
            out.append(frozenset(atoms))
    if not out:
        raise SyntaxFailure("no subgoals found", "subgoals")
    return out


def _problem_objects(scene: SceneState, domain: Domain) -> tuple[tuple[str, str], ...]:
    constants = set(domain.constant_names)
    return tuple((o, OBJECT) for o in [*scene.ids, TABLE] if o not in constants)


# -- the three pipelines -----------------------------------------------------------------

def llm_planner_baseline(task: str, scene: SceneState, provider: ChatProvider,
                         thr: GeomThresholds = DEFAULT_THRESHOLDS) -> BaselineResult:
    """Ask for the action sequence directly, given the narrated state."""
    chat = Chat(provider, system=prompts.LLM_PLANNER_SYSTEM, stage="llm-planner")
    chat.ask(prompts.llm_planner_scene(scene.ids))
    chat.ask(prompts.llm_planner_goal(task))
    reply = chat.ask(prompts.llm_planner_plan(narrate_state(scene, thr).text))
    tokens = TokenUsage.of(chat.transcript)
    try:
        actions = parse_action_lines(reply)
    except PlanParseFailure as exc:
        return BaselineResult(None, tokens, exc, [chat.transcript])
    return BaselineResult(actions, tokens, None, [chat.transcript])


def llm_plus_p_baseline(task: str, scene: SceneState, provider: ChatProvider, example_problem: str,
                        domain: Domain | None = None, thr: GeomThresholds = DEFAULT_THRESHOLDS,
                        max_expansions: int | None = DEFAULT_MAX_EXPANSIONS) -> BaselineResult:
    """Ask for a problem file and solve it with the built-in domain."""
    domain = domain or builtin_blockworld_domain()
    chat = Chat(provider, stage="llm+p")
    reply = chat.ask(prompts.llm_plus_p(example_problem, scene.ids, narrate_state(scene, thr).text, task))
    tokens = TokenUsage.of(chat.transcript)
    txs = [chat.transcript]
    try:
        problem = parse_problem(extract_pddl(reply), domain)
    except PddlError as exc:
        return BaselineResult(None, tokens, SyntaxFailure(str(exc), "problem"), txs)
    try:
        actions, _, stats = solve_problem(domain, problem, max_expansions=max_expansions)
    except PddlError as exc:
        return BaselineResult(None, tokens, SyntaxFailure(str(exc), "problem"), txs)
    if actions is None:
        why = "search limit reached" if stats.limit_hit else "goal unreachable from the stated initial state"
        return BaselineResult(None, tokens, PlanningFailure(why, "plan"), txs)
    return BaselineResult(actions, tokens, None, txs)


def delta_baseline(task: str, scene: SceneState, provider: ChatProvider, domain_example: str,
                   problem_example: str, subgoal_example: str, thr: GeomThresholds = DEFAULT_THRESHOLDS,
                   max_expansions: int | None = DEFAULT_MAX_EXPANSIONS) -> BaselineResult:
    """Domain file, problem file, then subgoals; each subgoal is solved from the state the previous one left.

    The generated domain and problem are only checked for syntax. Planning
    uses the built-in operators and the geometry-derived initial state.
    """
    builtin = builtin_blockworld_domain()
    chat = Chat(provider, stage="delta")
    txs = [chat.transcript]

    def result(actions=None, error=None):
        return BaselineResult(actions, TokenUsage.of(chat.transcript), error, txs)

    reply = chat.ask(prompts.delta_domain(domain_example, scene.ids), stage="domain")
    try:
        llm_domain = parse_domain(extract_pddl(reply))
    except PddlError as exc:
        return result(error=SyntaxFailure(str(exc), "domain"))
    reply = chat.ask(prompts.delta_problem(problem_example, task, narrate_state(scene, thr).text), stage="problem")
    try:
        parse_problem(extract_pddl(reply), llm_domain)
    except PddlError as exc:
        return result(error=SyntaxFailure(str(exc), "problem"))
    reply = chat.ask(prompts.delta_subgoals(subgoal_example), stage="subgoals")
    try:
        subgoals = parse_subgoals(reply, builtin, [*scene.ids, TABLE])
    except SyntaxFailure as exc:
        return result(error=exc)

    state = derive_predicates(scene, thr)
    objects = _problem_objects(scene, builtin)
    actions: list[Action] = []
    for i, goal in enumerate(subgoals):
        problem = Problem(f"subgoal_{i + 1}", builtin.name, objects, frozenset(state),
                          tuple(Literal(a) for a in sorted(goal)))
        seg, final, stats = solve_problem(builtin, problem, max_expansions=max_expansions)
        if seg is None:
            return result(error=SubgoalUnsolvable(i, "search limit reached" if stats.limit_hit else "no plan exists"))
        actions.extend(seg)
        state = final
    return result(actions)
