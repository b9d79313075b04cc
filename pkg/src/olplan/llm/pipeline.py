"""Two-stage prompting: retrieve a prototype, sketch the steps, codify them as an object-level plan."""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Any, Sequence

from ..foon import SPECIAL_TARGETS, FoonError, ObjectLevelPlan, parse_olp_document, validate_olp
from ..grounding import AliasBinding, GroundingError
from . import prompts
from .providers import Chat, ChatProvider, ChatTranscript, ProviderError
from .retrieval import Exemplar, ExemplarLibrary, retrieve_exemplars

log = logging.getLogger(__name__)

STAGES = ("retrieve", "select", "sketch", "codify", "ground")


class UnparsableSelection(ValueError):
    pass


class EmptySketch(ValueError):
    pass


class CodificationFailed(RuntimeError):
    def __init__(self, problems: Sequence[str]):
        super().__init__("could not obtain a valid plan: " + "; ".join(problems))
        self.problems = list(problems)


class UnresolvableAlias(GroundingError):
    def __init__(self, alias: str, reason: str = "no scene instance matches its name"):
        super().__init__(f"cannot bind {alias!r}: {reason}")
        self.alias = alias


class PipelineError(RuntimeError):
    """A pipeline stage failed; ``cause`` is the original exception."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class TokenUsage:
    prompt_tokens: int = 0
    completion_tokens: int = 0

    @property
    def total(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(self.prompt_tokens + other.prompt_tokens,
                          self.completion_tokens + other.completion_tokens)

    @classmethod
    def of(cls, *transcripts: ChatTranscript) -> "TokenUsage":
        return cls(sum(t.prompt_tokens for t in transcripts), sum(t.completion_tokens for t in transcripts))


# -- reply parsing ------------------------------------------------------------------

_INT_RE = re.compile(r"\d+")
_STEP_RE = re.compile(r"^\s*(?:step\s*)?(\d+)\s*[.):-]\s*(.+?)\s*$", re.IGNORECASE)
_FENCE_RE = re.compile(r"^\s*```[\w-]*\s*$", re.MULTILINE)


def parse_selection(reply: str, n: int) -> int:
    """0-based index of the first integer in ``reply`` that is a valid 1-based choice."""
    for m in _INT_RE.finditer(reply):
        value = int(m.group())
        if 1 <= value <= n:
            return value - 1
    raise UnparsableSelection(f"no prototype number between 1 and {n} in reply {reply[:80]!r}")


def parse_sketch(reply: str) -> list[str]:
    steps = []
    for line in reply.splitlines():
        m = _STEP_RE.match(line.replace("**", ""))
        if m:
            steps.append(m.group(2))
    if not steps:
        raise EmptySketch("reply contains no numbered steps")
    return steps


def extract_json_object(reply: str) -> Any:
    """First JSON object in the reply, ignoring markdown fences and surrounding prose."""
    text = _FENCE_RE.sub("", reply)
    decoder = json.JSONDecoder()
    for m in re.finditer(r"\{", text):
        try:
            value, _ = decoder.raw_decode(text, m.start())
        except json.JSONDecodeError:
            continue
        if isinstance(value, dict):
            return value
    return None


# -- stages --------------------------------------------------------------------------

def start_chat(provider: ChatProvider, task: str, scene_objects: Sequence[str]) -> Chat:
    """Open the planning conversation with the system prompt and the task introduction."""
    if not scene_objects:
        raise ValueError("scene_objects must be non-empty")
    chat = Chat(provider, system=prompts.OLP_SYSTEM, stage="select")
    chat.ask(prompts.olp_intro(task, scene_objects), stage="select")
    return chat


def select_prototype(chat: Chat, candidates: Sequence[Exemplar]) -> Exemplar:
    """Ask which candidate is closest; raises UnparsableSelection on a reply without a valid number."""
    if not candidates:
        raise ValueError("no candidates to select from")
    reply = chat.ask(prompts.olp_select([c.steps for c in candidates]), stage="select")
    return candidates[parse_selection(reply, len(candidates))]


def stage1_sketch(chat: Chat, task: str) -> list[str]:
    """Request the step-by-step sketch, then the list of objects it uses."""
    steps = parse_sketch(chat.ask(prompts.olp_sketch(task), stage="sketch"))
    chat.ask(prompts.OLP_OBJECTS, stage="sketch")
    return steps


def _check_document(doc: Any) -> list[str]:
    if doc is None:
        return ["MalformedJson: no JSON object found in the reply"]
    return [str(v) for v in validate_olp(doc)]


def stage2_codify(chat: Chat, steps: Sequence[str], prototype_json: str, task: str = "") -> ObjectLevelPlan:
    """Ask for the JSON plan; one repair turn lists the problems if it does not validate."""
    if not steps:
        raise EmptySketch("cannot codify an empty sketch")
    doc = extract_json_object(chat.ask(prompts.olp_json(prototype_json), stage="codify"))
    problems = _check_document(doc)
    if problems:
        log.info("codified plan rejected: %s", problems)
        doc = extract_json_object(chat.ask(prompts.olp_repair(problems), stage="codify"))
        problems = _check_document(doc)
        if problems:
            raise CodificationFailed(problems)
    try:
        return parse_olp_document(doc, task)
    except FoonError as exc:
        raise CodificationFailed([str(exc)]) from exc


# -- alias grounding -------------------------------------------------------------------

_ORDINALS = {w: i for i, w in enumerate(
    ("first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth"), 1)}
_ORDINAL_NUM_RE = re.compile(r"^(\d+)(st|nd|rd|th)$")


def _words(text: str) -> list[str]:
    return re.findall(r"[a-z0-9]+", text.lower())


def _ordinal(alias: str) -> int:
    for w in _words(alias):
        if w in _ORDINALS:
            return _ORDINALS[w]
        m = _ORDINAL_NUM_RE.match(w)
        if m:
            return int(m.group(1))
    return 0


def _singular(word: str) -> str:
    if len(word) > 3 and word.endswith("s") and not word.endswith("ss"):
        return word[:-1]
    return word


def alias_tokens(alias: str) -> frozenset[str]:
    return frozenset(_singular(w) for w in _words(alias)
                     if w not in _ORDINALS and w != "the" and not w.isdigit() and not _ORDINAL_NUM_RE.match(w))


def instance_tokens(instance: str) -> frozenset[str]:
    return frozenset(_singular(w) for w in _words(instance.replace("_", " ")) if not w.isdigit())


def _natural_key(name: str):
    return [(0, int(p), "") if p.isdigit() else (1, 0, p) for p in re.findall(r"\d+|\D+", name)]


def plan_aliases(plan: ObjectLevelPlan) -> list[str]:
    """Object names needing a scene instance: required objects and state targets, by first appearance."""
    seen: dict[str, None] = {}
    for unit in plan.units:
        for alias in unit.required_objects:
            seen.setdefault(alias, None)
        for node in (*unit.inputs.values(), *unit.outputs.values()):
            for s in node.states:
                seen.setdefault(s.target, None)
    return [a for a in seen if a not in SPECIAL_TARGETS]


def greedy_binding(aliases: Sequence[str], instances: Sequence[str]) -> AliasBinding:
    """Bind each alias to the lowest-indexed free instance whose name contains all of the alias's type words.

    Aliases with an ordinal ("first", "second", ...) are served in ordinal order.
    """
    order = sorted(range(len(aliases)), key=lambda i: (_ordinal(aliases[i]), i))
    pool = sorted(instances, key=_natural_key)
    used: set[str] = set()
    mapping: dict[str, str] = {}
    for i in order:
        alias = aliases[i]
        want = alias_tokens(alias)
        if not want:
            raise UnresolvableAlias(alias, "the name has no type words")
        match = next((inst for inst in pool if inst not in used and want <= instance_tokens(inst)), None)
        if match is None:
            reason = ("every matching instance is already bound"
                      if any(want <= instance_tokens(x) for x in pool) else "no scene instance matches its name")
            raise UnresolvableAlias(alias, reason)
        used.add(match)
        mapping[alias] = match
    return AliasBinding({a: mapping[a] for a in aliases})


def _llm_binding(reply: str, aliases: Sequence[str], instances: Sequence[str]) -> AliasBinding | None:
    doc = extract_json_object(reply)
    if not isinstance(doc, dict):
        return None
    known = set(instances)
    mapping = {}
    for alias in aliases:
        value = doc.get(alias)
        if not isinstance(value, str) or value not in known:
            return None
        mapping[alias] = value
    if len(set(mapping.values())) != len(mapping):
        return None
    return AliasBinding(mapping)


def ground_aliases(plan: ObjectLevelPlan, instances: Sequence[str],
                   provider: ChatProvider | None = None) -> tuple[AliasBinding, ChatTranscript | None]:
    """Map plan aliases to scene instances.

    With a provider the model is asked for the mapping; a reply that is not a
    total, injective map onto known instances falls back to greedy name
    matching.
    """
    aliases = plan_aliases(plan)
    if len(instances) < len(aliases):
        raise UnresolvableAlias(aliases[-1], f"{len(aliases)} names but only {len(instances)} instances")
    transcript = None
    if provider is not None and aliases:
        chat = Chat(provider, stage="ground")
        reply = chat.ask(prompts.alias_grounding(aliases, instances))
        transcript = chat.transcript
        binding = _llm_binding(reply, aliases, instances)
        if binding is not None:
            return binding, transcript
        log.info("model alias mapping rejected, using name matching")
    return greedy_binding(aliases, instances), transcript


# -- full pipeline ---------------------------------------------------------------------

@dataclass
class PipelineResult:
    plan: ObjectLevelPlan
    binding: AliasBinding
    tokens: TokenUsage
    prototype: Exemplar
    sketch: list[str]
    transcripts: list[ChatTranscript] = field(default_factory=list)


def run_olp_pipeline(task: str, scene_objects: Sequence[str], lib: ExemplarLibrary, provider: ChatProvider,
                     instances: Sequence[str] | None = None, llm_grounding: bool = True) -> PipelineResult:
    """retrieve -> select -> sketch -> codify -> ground.

    ``instances`` defaults to ``scene_objects``. Failures other than provider
    errors are raised as PipelineError naming the stage.
    """
    if not scene_objects:
        raise ValueError("scene_objects must be non-empty")
    instances = list(scene_objects if instances is None else instances)
    stage = "retrieve"
    try:
        candidates = [e for e, _ in retrieve_exemplars(task, lib)]
        stage = "select"
        chat = start_chat(provider, task, scene_objects)
        try:
            prototype = select_prototype(chat, candidates)
        except UnparsableSelection as exc:
            log.info("%s; using the top-ranked prototype", exc)
            prototype = candidates[0]
        stage = "sketch"
        steps = stage1_sketch(chat, task)
        stage = "codify"
        plan = stage2_codify(chat, steps, prototype.json, task)
        stage = "ground"
        binding, ground_tx = ground_aliases(plan, instances, provider if llm_grounding else None)
    except ProviderError:
        raise
    except (ValueError, RuntimeError) as exc:
        raise PipelineError(stage, exc) from exc
    transcripts = [chat.transcript] + ([ground_tx] if ground_tx is not None else [])
    return PipelineResult(plan, binding, TokenUsage.of(*transcripts), prototype, steps, transcripts)
