"""Object-level plans (FOONs) and their JSON codification.

A plan is an ordered list of functional units. Each unit names a motion verb,
the objects it touches, and for every object the states before (inputs) and
after (outputs) the action. The JSON layout is the one the LLM is prompted
with::

    {"plan": [{"step": 1, "action": "pick and place",
               "required_objects": ["first block", "second block"],
               "object_states": {"first block": {"preconditions": [...],
                                                 "effects": [...]}, ...},
               "instruction": "..."}]}
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Any, Iterable, Mapping

log = logging.getLogger(__name__)

RELATIONS = ("in", "on", "under", "contains")
SPECIAL_TARGETS = ("nothing", "table", "air")

_UNIT_FIELDS = {"step", "action", "required_objects", "object_states", "instruction"}
_STATE_FIELDS = {"preconditions", "effects", "composition"}


class FoonError(ValueError):
    pass


class MalformedJson(FoonError):
    pass


class SchemaViolation(FoonError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class UnknownRelation(FoonError):
    def __init__(self, token: str, path: str = ""):
        super().__init__(f"{path + ': ' if path else ''}unknown relation {token!r}")
        self.token = token
        self.path = path


@dataclass(frozen=True)
class StateRelation:
    relation: str
    target: str

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise UnknownRelation(self.relation)
        if not self.target.strip():
            raise FoonError("state relation target must be non-empty")

    @classmethod
    def parse(cls, text: str) -> "StateRelation":
        rel, _, target = text.strip().partition(" ")
        return cls(rel.lower(), target.strip())

    def __str__(self):
        return f"{self.relation} {self.target}"


@dataclass(frozen=True)
class ObjectNode:
    alias: str
    states: tuple[StateRelation, ...] = ()
    composition: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.alias.strip():
            raise FoonError("object alias must be non-empty")
        if len(set(self.states)) != len(self.states):
            raise FoonError(f"duplicate state for {self.alias!r}")
        if len(set(self.composition)) != len(self.composition):
            raise FoonError(f"duplicate composition entry for {self.alias!r}")

    def targets(self, relation: str) -> set[str]:
        return {s.target for s in self.states if s.relation == relation}


@dataclass(frozen=True)
class MotionNode:
    verb: str

    def __post_init__(self):
        if not self.verb.strip():
            raise FoonError("motion verb must be non-empty")


@dataclass(frozen=True)
class FunctionalUnit:
    step: int
    motion: MotionNode
    required_objects: tuple[str, ...]
    inputs: Mapping[str, ObjectNode]
    outputs: Mapping[str, ObjectNode]
    instruction: str = ""

    def __post_init__(self):
        if self.step < 1:
            raise FoonError(f"step must be positive, got {self.step}")
        required = set(self.required_objects)
        if set(self.inputs) != required or set(self.outputs) != required:
            raise SchemaViolation(
                f"plan[{self.step}].object_states",
                "object_states keys must equal required_objects",
            )

    def aliases_referenced(self) -> set[str]:
        refs = set()
        for node in (*self.inputs.values(), *self.outputs.values()):
            refs.update(s.target for s in node.states)
        return refs


@dataclass(frozen=True)
class ObjectLevelPlan:
    units: tuple[FunctionalUnit, ...] = ()
    task: str = ""

    def __len__(self):
        return len(self.units)

    def __iter__(self):
        return iter(self.units)

    def aliases(self) -> list[str]:
        """Distinct required objects in order of first appearance."""
        seen: dict[str, None] = {}
        for unit in self.units:
            for alias in unit.required_objects:
                seen.setdefault(alias, None)
        return list(seen)


@dataclass(frozen=True)
class Violation:
    kind: str
    unit: int | None
    message: str

    def __str__(self):
        where = f"step {self.unit + 1}: " if self.unit is not None else ""
        return f"{self.kind}: {where}{self.message}"


# -- parsing -----------------------------------------------------------------

def _loads(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedJson(str(exc)) from exc


def _expect(value, kind, path):
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise SchemaViolation(path, f"expected {getattr(kind, '__name__', kind)}")
    return value


def _parse_states(items, path) -> tuple[StateRelation, ...]:
    _expect(items, list, path)
    states: list[StateRelation] = []
    for i, text in enumerate(items):
        _expect(text, str, f"{path}[{i}]")
        rel, _, target = text.strip().partition(" ")
        if rel.lower() not in RELATIONS:
            raise UnknownRelation(rel, f"{path}[{i}]")
        if not target.strip():
            raise SchemaViolation(f"{path}[{i}]", "missing relation target")
        state = StateRelation(rel.lower(), target.strip())
        if state in states:
            log.warning("dropping duplicate state %r at %s", text, path)
            continue
        states.append(state)
    return tuple(states)


def _parse_unit(entry, index: int) -> FunctionalUnit:
    path = f"plan[{index}]"
    _expect(entry, dict, path)
    for key in sorted(set(entry) - _UNIT_FIELDS):
        log.warning("ignoring unknown field %s.%s", path, key)
    for key in ("step", "action", "required_objects", "object_states"):
        if key not in entry:
            raise SchemaViolation(f"{path}.{key}", "missing field")
    step = _expect(entry["step"], int, f"{path}.step")
    action = _expect(entry["action"], str, f"{path}.action")
    required = _expect(entry["required_objects"], list, f"{path}.required_objects")
    for i, alias in enumerate(required):
        _expect(alias, str, f"{path}.required_objects[{i}]")
    if len(set(required)) != len(required):
        raise SchemaViolation(f"{path}.required_objects", "duplicate object")
    states = _expect(entry["object_states"], dict, f"{path}.object_states")
    missing = [a for a in required if a not in states]
    extra = [a for a in states if a not in required]
    if missing or extra:
        raise SchemaViolation(
            f"{path}.object_states",
            f"keys must match required_objects (missing {missing}, unexpected {extra})",
        )
    inputs, outputs = {}, {}
    for alias in required:
        spath = f"{path}.object_states[{alias!r}]"
        node = _expect(states[alias], dict, spath)
        for key in sorted(set(node) - _STATE_FIELDS):
            log.warning("ignoring unknown field %s.%s", spath, key)
        composition = tuple(_expect(node.get("composition", []), list, f"{spath}.composition"))
        pre = _parse_states(node.get("preconditions", []), f"{spath}.preconditions")
        eff = _parse_states(node.get("effects", []), f"{spath}.effects")
        try:
            inputs[alias] = ObjectNode(alias, pre, composition)
            outputs[alias] = ObjectNode(alias, eff, composition)
        except FoonError as exc:
            raise SchemaViolation(spath, str(exc)) from exc
    instruction = entry.get("instruction", "")
    _expect(instruction, str, f"{path}.instruction")
    try:
        return FunctionalUnit(step, MotionNode(action), tuple(required), inputs, outputs, instruction)
    except SchemaViolation:
        raise
    except FoonError as exc:
        raise SchemaViolation(path, str(exc)) from exc


def parse_olp_document(doc: Any, task: str = "") -> ObjectLevelPlan:
    _expect(doc, dict, "$")
    if "plan" not in doc:
        raise SchemaViolation("plan", "missing field")
    for key in sorted(set(doc) - {"plan", "task"}):
        log.warning("ignoring unknown top-level field %s", key)
    entries = _expect(doc["plan"], list, "plan")
    units = tuple(_parse_unit(e, i) for i, e in enumerate(entries))
    return ObjectLevelPlan(units, task or doc.get("task", ""))


def parse_olp_json(text: str, task: str = "") -> ObjectLevelPlan:
    """Parse a JSON-codified object-level plan.

    Raises MalformedJson, SchemaViolation (with the offending field path) or
    UnknownRelation.
    """
    return parse_olp_document(_loads(text), task)


# -- serialization -------------------------------------------------------------

def olp_to_document(plan: ObjectLevelPlan) -> dict:
    entries = []
    for unit in plan.units:
        states = {}
        for alias in unit.required_objects:
            node = {
                "preconditions": [str(s) for s in unit.inputs[alias].states],
                "effects": [str(s) for s in unit.outputs[alias].states],
            }
            if unit.inputs[alias].composition:
                node["composition"] = list(unit.inputs[alias].composition)
            states[alias] = node
        entries.append({
            "step": unit.step,
            "action": unit.motion.verb,
            "required_objects": list(unit.required_objects),
            "object_states": states,
            "instruction": unit.instruction,
        })
    return {"plan": entries}


def serialize_olp(plan: ObjectLevelPlan, indent: int | None = 4) -> str:
    return json.dumps(olp_to_document(plan), indent=indent, ensure_ascii=False)


# -- validation ------------------------------------------------------------------

def _raw_units(doc) -> list[tuple[int, dict]]:
    if not isinstance(doc, dict) or not isinstance(doc.get("plan"), list):
        return []
    return list(enumerate(doc["plan"]))


def _validate_document(doc) -> list[Violation]:
    out: list[Violation] = []
    if not isinstance(doc, dict) or "plan" not in doc:
        return [Violation("SchemaViolation", None, "top-level object must contain a 'plan' array")]
    if not isinstance(doc["plan"], list):
        return [Violation("SchemaViolation", None, "'plan' must be an array")]

    # per-unit structural checks; keep a normalized view for the chain check
    views: list[dict[str, tuple[list, list]] | None] = []
    for i, entry in _raw_units(doc):
        if not isinstance(entry, dict):
            out.append(Violation("SchemaViolation", i, "unit must be an object"))
            views.append(None)
            continue
        for key in ("step", "action", "required_objects", "object_states"):
            if key not in entry:
                out.append(Violation("SchemaViolation", i, f"missing field {key!r}"))
        step = entry.get("step")
        if isinstance(step, int) and not isinstance(step, bool):
            if step != i + 1:
                out.append(Violation("StepOrder", i, f"expected step {i + 1}, got {step}"))
        elif "step" in entry:
            out.append(Violation("SchemaViolation", i, "'step' must be an integer"))
        action = entry.get("action")
        if "action" in entry and (not isinstance(action, str) or not action.strip()):
            out.append(Violation("SchemaViolation", i, "'action' must be a non-empty string"))
        required = entry.get("required_objects", [])
        if not isinstance(required, list) or not all(isinstance(a, str) and a.strip() for a in required):
            out.append(Violation("SchemaViolation", i, "'required_objects' must be a list of names"))
            required = []
        elif len(set(required)) != len(required):
            out.append(Violation("SchemaViolation", i, "duplicate entries in 'required_objects'"))
        states = entry.get("object_states", {})
        if not isinstance(states, dict):
            out.append(Violation("SchemaViolation", i, "'object_states' must be an object"))
            states = {}
        for alias in required:
            if alias not in states:
                out.append(Violation("SchemaViolation", i,
                                     f"{alias!r} listed in required_objects but missing from object_states"))
        for alias in states:
            if alias not in required:
                out.append(Violation("SchemaViolation", i, f"{alias!r} in object_states but not in required_objects"))
        allowed = set(required) | set(SPECIAL_TARGETS)
        view: dict[str, tuple[list, list]] = {}
        for alias, node in states.items():
            if not isinstance(node, dict):
                out.append(Violation("SchemaViolation", i, f"states of {alias!r} must be an object"))
                continue
            parsed: list[list[tuple[str, str]]] = []
            for key in ("preconditions", "effects"):
                items = node.get(key, [])
                rels: list[tuple[str, str]] = []
                if not isinstance(items, list):
                    out.append(Violation("SchemaViolation", i, f"{alias!r}.{key} must be a list"))
                    items = []
                for text in items:
                    if not isinstance(text, str):
                        out.append(Violation("SchemaViolation", i, f"{alias!r}.{key} entries must be strings"))
                        continue
                    rel, _, target = text.strip().partition(" ")
                    rel, target = rel.lower(), target.strip()
                    if rel not in RELATIONS:
                        out.append(Violation(
                            "UnknownRelation", i,
                            f"{alias!r} uses relation {rel!r}; only in/on/under/contains are allowed",
                        ))
                        continue
                    if not target:
                        out.append(Violation("SchemaViolation", i, f"{alias!r}: {text!r} has no target"))
                        continue
                    if (rel, target) in rels:
                        out.append(Violation("DuplicateState", i, f"{alias!r}: {text!r} listed twice"))
                        continue
                    if target not in allowed:
                        out.append(Violation(
                            "UnknownTarget", i,
                            f"{alias!r}: {text!r} refers to {target!r}, which is not a required object",
                        ))
                    rels.append((rel, target))
                parsed.append(rels)
            view[alias] = (parsed[0], parsed[1])
        views.append(view)

    for i in range(len(views) - 1):
        cur, nxt = views[i], views[i + 1]
        if cur is None or nxt is None:
            continue
        for alias in cur.keys() & nxt.keys():
            effects, preconditions = cur[alias][1], nxt[alias][0]
            for rel in RELATIONS:
                before = {t for r, t in effects if r == rel}
                after = {t for r, t in preconditions if r == rel}
                if before and after and before != after:
                    out.append(Violation(
                        "ChainInconsistency", i + 1,
                        f"{alias!r} is '{rel} {', '.join(sorted(after))}' but step {i + 1} "
                        f"left it '{rel} {', '.join(sorted(before))}'",
                    ))
    return out


def validate_olp(plan: ObjectLevelPlan | Mapping | str) -> list[Violation]:
    """Return every rule violation in a plan; an empty list means valid.

    Accepts a parsed plan, a decoded JSON document or raw JSON text. The raw
    forms let malformed LLM output (unknown relation tokens, mismatched keys)
    be diagnosed without first being rejected by the parser.
    """
    if isinstance(plan, ObjectLevelPlan):
        doc = olp_to_document(plan)
    elif isinstance(plan, str):
        try:
            doc = json.loads(plan)
        except json.JSONDecodeError as exc:
            return [Violation("MalformedJson", None, str(exc))]
    else:
        doc = plan
    return _validate_document(doc)


def make_unit(step: int, verb: str, states: Mapping[str, tuple[Iterable[str], Iterable[str]]],
              instruction: str = "") -> FunctionalUnit:
    """Build a unit from ``{alias: (preconditions, effects)}`` state strings."""
    inputs = {a: ObjectNode(a, tuple(StateRelation.parse(s) for s in pre)) for a, (pre, _) in states.items()}
    outputs = {a: ObjectNode(a, tuple(StateRelation.parse(s) for s in eff)) for a, (_, eff) in states.items()}
    return FunctionalUnit(step, MotionNode(verb), tuple(states), inputs, outputs, instruction)
