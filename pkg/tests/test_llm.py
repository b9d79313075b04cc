import copy
import json
import math
import re
from collections import Counter

import numpy as np
import pytest

from olplan.foon import parse_olp_document
from olplan.grounding import load_scene
from olplan.llm import prompts
from olplan.llm.pipeline import (CodificationFailed, EmptySketch, PipelineError, TokenUsage, UnparsableSelection,
                                 UnresolvableAlias, extract_json_object, ground_aliases, greedy_binding,
                                 parse_selection, parse_sketch, run_olp_pipeline, select_prototype, stage1_sketch,
                                 stage2_codify, start_chat)
from olplan.llm.providers import (Chat, Completion, ProviderError, RecordingProvider, ReplayProvider,
                                  ScriptedProvider, approx_tokens, load_fixtures, prompt_digest, save_fixtures)
from olplan.llm.retrieval import (BackendUnavailable, ExemplarLibrary, TfidfEmbedder, cosine, make_embedder,
                                  retrieve_exemplars)
from conftest import FIXTURES
from support import FIG9

ROOT = FIXTURES.parents[3]


class Scripted:
    """Provider replying from a fixed list, one reply per call."""

    def __init__(self, *replies):
        self.replies = list(replies)
        self.calls = []

    def complete(self, messages):
        self.calls.append(list(messages))
        text = self.replies.pop(0)
        return Completion(text, 10, 5)


# -- retrieval -------------------------------------------------------------------------

def test_self_similarity_and_orthogonality():
    emb = TfidfEmbedder().fit(["red block tower", "sort the green cubes"])
    v = emb.embed("red block tower")
    assert cosine(v, v) == pytest.approx(1.0)
    assert cosine(emb.embed("red tower"), emb.embed("green cubes")) == 0.0


def test_embedder_errors():
    with pytest.raises(BackendUnavailable):
        TfidfEmbedder().embed("x")
    with pytest.raises(ValueError):
        TfidfEmbedder().fit(["a b"]).embed("  ")
    with pytest.raises(BackendUnavailable):
        make_embedder("word2vec")


def hand_tfidf(corpus, query):
    """Smoothed-idf TF-IDF with L2 norm, computed without sklearn."""
    docs = [Counter(re.findall(r"\w+", d.lower())) for d in corpus]
    vocab = sorted(set().union(*docs))
    n = len(docs)
    idf = {w: math.log((1 + n) / (1 + sum(w in d for d in docs))) + 1 for w in vocab}

    def vec(counts):
        v = np.array([counts.get(w, 0) * idf[w] for w in vocab], dtype=float)
        norm = np.linalg.norm(v)
        return v / norm if norm else v

    q = vec(Counter(re.findall(r"\w+", query.lower())))
    return [float(q @ vec(d)) for d in docs]


def three(library):
    return ExemplarLibrary([library.by_name(n) for n in ("sort_colours", "tower_two", "spell_cat")])


def test_tower_ranks_first_by_hand_computation(library):
    lib = three(library)
    task = "Make a tower of 2 red blocks"
    expected = hand_tfidf([e.text for e in lib.entries], task)
    ranked = retrieve_exemplars(task, lib)
    assert ranked[0][0].name == "tower_two"
    assert [e.name for e, _ in ranked] == [lib.entries[i].name for i in np.argsort([-s for s in expected],
                                                                                   kind="stable")]
    for e, score in ranked:
        assert score == pytest.approx(expected[lib.entries.index(e)])


def test_full_k_is_permutation(library):
    ranked = retrieve_exemplars("anything at all", library, k=len(library))
    assert sorted(e.name for e, _ in ranked) == sorted(e.name for e in library.entries)


def test_exact_text_ranks_first(library):
    for e in library.entries:
        assert retrieve_exemplars(e.text, library)[0][0].name == e.name


def test_library_round_trip(tmp_path, library):
    library.save(tmp_path / "lib.json")
    again = ExemplarLibrary.load(tmp_path / "lib.json")
    assert [e.to_dict() for e in again.entries] == [e.to_dict() for e in library.entries]


# -- parsing ---------------------------------------------------------------------------

def test_parse_selection():
    assert parse_selection("2", 3) == 1
    assert parse_selection("The best is prototype 1.", 3) == 0
    with pytest.raises(UnparsableSelection):
        parse_selection("7", 3)


def test_parse_sketch():
    assert parse_sketch("1. Pick and place second red block on first red block.") == [
        "Pick and place second red block on first red block."]
    reply = "Plan:\n1. a\n2) b\n**3.** c\nStep 4: d\nEvidence: none"
    assert parse_sketch(reply) == ["a", "b", "c", "d"]
    with pytest.raises(EmptySketch):
        parse_sketch("I would stack them.")


def test_extract_json_from_fences():
    reply = "Here you go:\n```json\n" + json.dumps(FIG9) + "\n```\nDone."
    assert extract_json_object(reply) == FIG9
    assert extract_json_object("no json {here") is None


# -- stages ----------------------------------------------------------------------------

def test_select_prototype_fallback(library):
    chat = Chat(Scripted("7"))
    with pytest.raises(UnparsableSelection):
        select_prototype(chat, library.entries[:3])


def test_stage1_sketch_two_turns():
    provider = Scripted("1. Pick and place second red block on first red block.",
                       '["first red block", "second red block"]')
    chat = Chat(provider)
    assert len(stage1_sketch(chat, "Make a tower of 2 red blocks")) == 1
    assert chat.turns == 2
    assert chat.transcript.messages[-2][1] == prompts.OLP_OBJECTS


def test_stage2_codify_fig9():
    plan = stage2_codify(Chat(Scripted(json.dumps(FIG9))), ["x"], "{}")
    assert plan == parse_olp_document(FIG9)


def test_stage2_codify_fenced():
    plan = stage2_codify(Chat(Scripted("```json\n" + json.dumps(FIG9) + "\n```")), ["x"], "{}")
    assert len(plan) == 1


def test_stage2_repair_turn():
    bad = copy.deepcopy(FIG9)
    bad["plan"][0]["object_states"]["first block"]["effects"][1] = "beside table"
    chat = Chat(Scripted(json.dumps(bad), json.dumps(FIG9)))
    plan = stage2_codify(chat, ["x"], "{}")
    assert len(plan) == 1
    assert len(chat.transcript.assistant_turns()) == 2
    assert "UnknownRelation" in chat.transcript.messages[-2][1]


def test_stage2_gives_up_after_repair():
    chat = Chat(Scripted("nope", "still nope"))
    with pytest.raises(CodificationFailed):
        stage2_codify(chat, ["x"], "{}")


# -- alias grounding --------------------------------------------------------------------

def test_grounding_worked_example():
    binding = greedy_binding(["first red block", "second red block"], ["red_block_1", "red_block_2", "blue_block_1"])
    assert binding.to_dict() == {"first red block": "red_block_1", "second red block": "red_block_2"}


def test_ordinals_are_served_in_order():
    binding = greedy_binding(["second red block", "first red block"], ["red_block_2", "red_block_1"])
    assert binding.to_dict() == {"second red block": "red_block_2", "first red block": "red_block_1"}


def test_forced_binding_and_failure():
    assert greedy_binding(["cup"], ["cup_7"]).to_dict() == {"cup": "cup_7"}
    with pytest.raises(UnresolvableAlias):
        greedy_binding(["green block"], ["red_block_1", "red_block_2"])


def test_llm_binding_with_fallback():
    plan = parse_olp_document(FIG9)
    good = '{"first block": "b2", "second block": "b1"}'
    binding, tx = ground_aliases(plan, ["b1", "b2"], Scripted(good))
    assert binding.to_dict() == {"first block": "b2", "second block": "b1"}
    assert tx.total_tokens == 15
    binding, _ = ground_aliases(plan, ["block_1", "block_2"], Scripted('{"first block": "ghost"}'))
    assert binding.to_dict() == {"first block": "block_1", "second block": "block_2"}


# -- providers --------------------------------------------------------------------------

def test_digest_ignores_whitespace_only():
    a = [{"role": "user", "content": "hello   world\n"}]
    b = [{"role": "user", "content": "hello world"}]
    c = [{"role": "system", "content": "hello world"}]
    assert prompt_digest(a) == prompt_digest(b) != prompt_digest(c)


def test_record_then_replay(tmp_path):
    rec = RecordingProvider(ScriptedProvider(lambda m: "ok " * 3), tmp_path / "f.json")
    msgs = [{"role": "user", "content": "abcdefgh"}]
    first = rec.complete(msgs)
    assert first == Completion("ok ok ok ", 2, approx_tokens("ok ok ok "))
    assert ReplayProvider.from_path(tmp_path / "f.json").complete(msgs) == first


def test_conflicting_fixture_files(tmp_path):
    save_fixtures(tmp_path / "a.json", {"d": {"reply": "x", "prompt_tokens": 1, "completion_tokens": 1}})
    save_fixtures(tmp_path / "b.json", {"d": {"reply": "y", "prompt_tokens": 1, "completion_tokens": 1}})
    with pytest.raises(ValueError):
        load_fixtures(tmp_path)


# -- full pipeline ------------------------------------------------------------------------

class Counting:
    def __init__(self, inner):
        self.inner = inner
        self.used = TokenUsage()

    def complete(self, messages):
        out = self.inner.complete(messages)
        self.used = self.used + TokenUsage(out.prompt_tokens, out.completion_tokens)
        return out


def test_tower_of_two_replay(library):
    scene = load_scene(ROOT / "scenes" / "two_red_one_blue.json")
    provider = Counting(ReplayProvider.from_path(FIXTURES))
    result = run_olp_pipeline("Make a tower of 2 red blocks", scene.ids, library, provider)
    assert len(result.plan) == 1
    assert set(result.binding.to_dict().values()) == {"red_block_1", "red_block_2"}
    assert result.tokens == provider.used
    assert result.tokens.total > 0


def test_empty_scene_objects_rejected_before_any_call(library):
    provider = Scripted()
    with pytest.raises(ValueError):
        run_olp_pipeline("Make a tower", [], library, provider)
    assert provider.calls == []


def test_missing_fixture_names_stage(library):
    with pytest.raises(ProviderError) as exc:
        run_olp_pipeline("Make a tower of 2 red blocks", ["red_block_1"], library, ReplayProvider({}))
    assert exc.value.stage == "select"


def test_pipeline_error_carries_stage(library):
    provider = Scripted("Okay!", "1", "no steps here")
    with pytest.raises(PipelineError) as exc:
        run_olp_pipeline("Make a tower of 2 red blocks", ["red_block_1", "red_block_2"], library, provider)
    assert exc.value.stage == "sketch"


def test_start_chat_layout():
    chat = start_chat(Scripted("Okay!"), "T", ["a", "b"])
    roles = [r for r, _ in chat.transcript.messages]
    assert roles == ["system", "user", "assistant"]
    chat.transcript.check()
