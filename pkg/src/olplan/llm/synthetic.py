"""Rule-based stand-in for the chat model, used to generate offline fixtures.

It reads only the prompts it is sent, as a live model would, and answers
every turn of the four pipelines. Each conversation is assigned a mistake
profile from a hash of its first user message, so a fixed scene always
receives the same replies. The mistakes imitate the failure modes each
approach is known for:

* object-level plans occasionally spell a word in reverse and sometimes
  need one repair turn;
* direct planning assumes every block starts on the table and sometimes
  swaps the arguments of a place;
* generated problem files assume every block starts on the table and are
  sometimes unbalanced or state the goal with the relation reversed;
* generated domains are sometimes unbalanced and subgoals are sometimes
  listed in reverse.

The profile frequencies are arbitrary; fixture runs are a regression
harness, not an estimate of any real model's behaviour.
"""
from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from typing import Mapping, Sequence

from ..foon import ObjectLevelPlan, make_unit, serialize_olp
from ..pddl import OBJECT, Atom, Literal, Problem, builtin_blockworld_domain, print_domain, print_problem
from . import prompts

ORDINAL_WORDS = ("first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth")


def stack_units(names: Sequence[str], start: int = 1):
    """Units that put names[i+1] on names[i]; names[0] stays on the table."""
    units = []
    for i in range(len(names) - 1):
        lower, upper = names[i], names[i + 1]
        base = ["on table"] if i == 0 else []
        units.append(make_unit(start + i, "pick and place", {
            lower: (["under nothing"] + base, ["under " + upper] + base),
            upper: (["under nothing", "on table"], ["on " + lower, "under nothing"]),
        }, f"Pick and place {upper} from table on {lower}."))
    return units


def _fraction(key: str, salt: str) -> float:
    h = hashlib.sha256(f"{salt}:{key}".encode()).hexdigest()
    return int(h[:12], 16) / 16 ** 12


def _natural_key(name: str):
    return [(0, int(p), "") if p.isdigit() else (1, 0, p) for p in re.findall(r"\d+|\D+", name)]


def _between(text: str, before: str, after: str) -> str:
    i = text.index(before) + len(before)
    return text[i:text.index(after, i)]


def _split_objects(text: str) -> list[str]:
    return [o.strip() for o in text.split(",") if o.strip()]


# -- reading the task -------------------------------------------------------------------

class TaskReading:
    """What the responder understands of a task prompt and an object list."""

    def __init__(self, task: str, objects: Sequence[str]):
        self.task = task
        self.objects = list(objects)
        low = task.lower()
        if m := re.search(r"tower of (\d+)", low):
            self.kind, self.n = "tower", int(m.group(1))
            self.colour = (re.search(r"tower of \d+ (\w+) blocks", low) or [None, "red"])[1]
        elif m := re.search(r"word ([A-Za-z]+)", task):
            self.kind, self.word = "spelling", m.group(1).upper()
        elif "organi" in low or "pile" in low:
            self.kind = "organize"
        else:
            raise ValueError(f"responder cannot read task {task!r}")

    def colours(self) -> list[str]:
        seen: dict[str, None] = {}
        for o in sorted(self.objects, key=_natural_key):
            if m := re.match(r"([a-z]+)_block_\d+$", o):
                seen.setdefault(m.group(1), None)
        return list(seen)

    def alias_piles(self, reverse_word: bool = False) -> list[list[str]]:
        """Object names per target pile, bottom to top."""
        if self.kind == "tower":
            return [[f"{ORDINAL_WORDS[i]} {self.colour} block" for i in range(self.n)]]
        if self.kind == "spelling":
            letters = self.word if reverse_word else self.word[::-1]
            counts = Counter(letters)
            seen: Counter = Counter()
            names = []
            for L in letters:
                seen[L] += 1
                names.append(f"{ORDINAL_WORDS[seen[L] - 1]} block {L}" if counts[L] > 1 else f"block {L}")
            return [names]
        piles = []
        for c in self.colours():
            count = sum(1 for o in self.objects if re.match(rf"{c}_block_\d+$", o))
            piles.append([f"{ORDINAL_WORDS[i]} {c} block" for i in range(count)])
        return piles

    def instance_piles(self, reverse_word: bool = False) -> list[list[str]]:
        """Scene ids per target pile, bottom to top."""
        ordered = sorted(self.objects, key=_natural_key)
        if self.kind == "tower":
            return [[o for o in ordered if o.startswith(f"{self.colour}_block_")][:self.n]]
        if self.kind == "spelling":
            letters = self.word if reverse_word else self.word[::-1]
            used: set[str] = set()
            pile = []
            for L in letters:
                pick = next(o for o in ordered if o not in used and re.match(rf"block_{L.lower()}(_\d+)?$", o))
                used.add(pick)
                pile.append(pick)
            return [pile]
        return [[o for o in ordered if re.match(rf"{c}_block_\d+$", o)] for c in self.colours()]


def _olp(reading: TaskReading, reverse_word: bool) -> ObjectLevelPlan:
    units = []
    for pile in reading.alias_piles(reverse_word):
        units.extend(stack_units(pile, start=len(units) + 1))
    return ObjectLevelPlan(tuple(units), reading.task)


def _table_init(objects: Sequence[str]) -> frozenset[Atom]:
    atoms = {Atom("in", ("hand", "air")), Atom("on", ("table", "air"))}
    for o in objects:
        atoms |= {Atom("on", ("table", o)), Atom("under", (o, "table")), Atom("on", (o, "air"))}
    return frozenset(atoms)


def _stack_goal(piles: Sequence[Sequence[str]], reversed_relation: bool = False) -> list[Atom]:
    out = []
    for pile in piles:
        for lower, upper in zip(pile, pile[1:]):
            if reversed_relation:
                lower, upper = upper, lower
            out += [Atom("on", (lower, upper)), Atom("under", (upper, lower))]
    return out


def _fenced(text: str, lang: str = "") -> str:
    return f"```{lang}\n{text.rstrip()}\n```"


# -- the responder ---------------------------------------------------------------------

class SyntheticResponder:
    """Callable for ScriptedProvider: messages -> reply text."""

    def __init__(self, p_reverse_word: float = 0.25, p_repair: float = 0.15, p_swap: float = 1 / 3,
                 p_syntax: float = 1 / 3, p_reverse_goal: float = 1 / 3, p_domain_syntax: float = 0.2,
                 p_reverse_subgoals: float = 0.25):
        self.p = dict(reverse_word=p_reverse_word, repair=p_repair, swap=p_swap, syntax=p_syntax,
                      reverse_goal=p_reverse_goal, domain_syntax=p_domain_syntax, reverse_subgoals=p_reverse_subgoals)

    def _roll(self, key: str, what: str) -> bool:
        return _fraction(key, what) < self.p[what]

    def __call__(self, messages: Sequence[Mapping[str, str]]) -> str:
        users = [m["content"] for m in messages if m["role"] == "user"]
        system = messages[0]["content"] if messages and messages[0]["role"] == "system" else ""
        first, last = users[0], users[-1]
        key = hashlib.sha256(first.encode()).hexdigest()
        if system == prompts.OLP_SYSTEM:
            return self._olp(first, last, key)
        if system == prompts.LLM_PLANNER_SYSTEM:
            return self._llm_planner(users, key)
        if first.startswith("Map every object name"):
            return self._grounding(first)
        if first.startswith("I want you to generate a PDDL problem file"):
            return self._llm_plus_p(first, key)
        if first.startswith("Role: You are an excellent PDDL domain file generator"):
            return self._delta(users, key)
        return "I am not sure how to help with that."

    # object-level planning dialogue
    def _olp(self, first: str, last: str, key: str) -> str:
        task = _between(first, "following prompt: ", ". The following objects")
        objects = _split_objects(_between(first, "available in the scene: ", ". Say 'Okay!'"))
        reading = TaskReading(task, objects)
        plan = _olp(reading, reading.kind == "spelling" and self._roll(key, "reverse_word"))
        if last.startswith("Your task will be"):
            return "Okay!"
        if last.startswith("Below are a list of prototype recipes"):
            return str(self._closest_prototype(task, last))
        if last.startswith("Generate a concise plan"):
            steps = "\n".join(f"{u.step}. {u.instruction}" for u in plan.units)
            return (f"{steps}\n\nEvidence: each step places one block on the block below it, "
                    "so the pile grows from the bottom up and no block is moved twice.")
        if last.startswith("Make a Python list"):
            return json.dumps(plan.aliases())
        if last.startswith("Format your generated plan"):
            text = serialize_olp(plan)
            if self._roll(key, "repair"):
                text = text.replace('"on table"', '"beside table"', 1)
            return _fenced(text, "json")
        if last.startswith("The JSON plan above"):
            return _fenced(serialize_olp(plan), "json")
        return "Okay!"

    @staticmethod
    def _closest_prototype(task: str, prompt: str) -> int:
        words = set(re.findall(r"[a-z]+", task.lower()))
        blocks = re.split(r"Prototype (\d+):", prompt)[1:]
        best, best_score = 1, -1.0
        for num, body in zip(blocks[::2], blocks[1::2]):
            other = set(re.findall(r"[a-z]+", body.lower()))
            score = len(words & other) / max(len(words | other), 1)
            if score > best_score:
                best, best_score = int(num), score
        return best

    def _grounding(self, prompt: str) -> str:
        from .pipeline import greedy_binding
        aliases = _split_objects(_between(prompt, "Object names: ", "\n"))
        instances = _split_objects(_between(prompt, "Scene instances: ", "\n"))
        try:
            binding = greedy_binding(aliases, instances)
        except ValueError:
            return "I could not match every object name to an instance."
        return _fenced(json.dumps(binding.to_dict(), indent=2), "json")

    # direct planning
    def _llm_planner(self, users: Sequence[str], key: str) -> str:
        last = users[-1]
        if last.startswith("There is a scenario"):
            return "Understood. I will wait for your instructions."
        objects = _split_objects(_between(users[0], "following objects: ", ". Please await"))
        task = _between(users[1], "Your task is as follows: ", ". Transform")
        piles = TaskReading(task, objects).instance_piles()
        if last.startswith("Your task is as follows"):
            goal = " ".join(f"(on {u} {l})" for p in piles for l, u in zip(p, p[1:]))
            return f"(and {goal})"
        lines = []
        for pile in piles:
            for lower, upper in zip(pile, pile[1:]):
                lines += [f"(pick {upper} table)", f"(place {upper} {lower})"]
        if self._roll(key, "swap") and len(lines) >= 2:
            i = 2 * (len(lines) // 4) + 1
            name, a, b = lines[i][1:-1].split()
            lines[i] = f"({name} {b} {a})"
        return "\n".join(f"{i}. {line}" for i, line in enumerate(lines, 1))

    # problem-file generation
    def _llm_plus_p(self, prompt: str, key: str) -> str:
        objects = _split_objects(_between(prompt, "These objects are on the table: ", ". The current state"))
        task = _between(prompt, "Your goal is to achieve this task: ", ". Provide me")
        reading = TaskReading(task, objects)
        roll = _fraction(key, "llm+p")
        reverse = self.p["syntax"] <= roll < self.p["syntax"] + self.p["reverse_goal"]
        goal = _stack_goal(reading.instance_piles(), reversed_relation=reverse)
        text = self._problem_text(objects, goal)
        if roll < self.p["syntax"]:
            text = text.rstrip()[:-1]
        return _fenced(text, "pddl")

    @staticmethod
    def _problem_text(objects: Sequence[str], goal: Sequence[Atom]) -> str:
        problem = Problem("task", "blockworld", tuple((o, OBJECT) for o in [*objects, "table"]),
                          _table_init(objects), tuple(Literal(a) for a in goal))
        return print_problem(problem)

    # domain, problem and subgoal generation
    def _delta(self, users: Sequence[str], key: str) -> str:
        objects = _split_objects(_between(users[0], "includes the following objects: ", ". Please generate"))
        if len(users) == 1:
            text = print_domain(builtin_blockworld_domain())
            if self._roll(key, "domain_syntax"):
                text = text.rstrip()[:-1]
            return _fenced(text, "pddl")
        task = _between(users[1], "generate a new PDDL problem file for the task: ", ". \n")
        reading = TaskReading(task, objects)
        piles = reading.instance_piles()
        if len(users) == 2:
            return _fenced(self._problem_text(objects, _stack_goal(piles)), "pddl")
        groups = [_stack_goal([[l, u]]) for p in piles for l, u in zip(p, p[1:])]
        if self._roll(key, "reverse_subgoals"):
            groups.reverse()
        return "\n".join(f"{i}. " + " ".join(map(str, g)) for i, g in enumerate(groups, 1))
