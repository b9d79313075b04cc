"""Few-shot exemplar library and similarity retrieval."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
from sklearn.feature_extraction.text import TfidfVectorizer

from ..foon import ObjectLevelPlan, olp_to_document, parse_olp_document, serialize_olp

DEFAULT_K = 3
TOKEN_PATTERN = r"(?u)\b\w+\b"


class BackendUnavailable(RuntimeError):
    pass


class EmptyLibrary(ValueError):
    pass


class Embedder(Protocol):
    def fit(self, corpus: Sequence[str]) -> "Embedder": ...

    def embed(self, text: str) -> np.ndarray: ...


class TfidfEmbedder:
    """Bag-of-words TF-IDF over the exemplar corpus vocabulary, L2-normalised.

    Words outside the corpus vocabulary are ignored, so a text with no known
    word embeds to the zero vector.
    """

    def __init__(self):
        self._vec = TfidfVectorizer(token_pattern=TOKEN_PATTERN, lowercase=True, smooth_idf=True, norm="l2")
        self._fitted = False

    def fit(self, corpus: Sequence[str]) -> "TfidfEmbedder":
        self._vec.fit(list(corpus))
        self._fitted = True
        return self

    @property
    def vocabulary(self) -> dict[str, int]:
        return dict(self._vec.vocabulary_)

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise ValueError("cannot embed empty text")
        if not self._fitted:
            raise BackendUnavailable("TF-IDF embedder has not been fitted on a corpus")
        return self._vec.transform([text]).toarray()[0]


class SentenceEmbedder:
    """Dense embeddings from a local sentence-transformers model (optional extra)."""

    def __init__(self, model: str = "all-MiniLM-L6-v2"):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise BackendUnavailable("sentence-transformers is not installed") from exc
        try:
            self._model = SentenceTransformer(model)
        except Exception as exc:  # model download or load failure
            raise BackendUnavailable(f"cannot load embedding model {model!r}: {exc}") from exc

    def fit(self, corpus: Sequence[str]) -> "SentenceEmbedder":
        return self

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise ValueError("cannot embed empty text")
        return np.asarray(self._model.encode([text], normalize_embeddings=True)[0], dtype=float)


def make_embedder(backend: str = "tfidf") -> Embedder:
    if backend == "tfidf":
        return TfidfEmbedder()
    if backend == "sentence-transformers":
        return SentenceEmbedder()
    raise BackendUnavailable(f"unknown embedding backend {backend!r}")


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


@dataclass(frozen=True)
class Exemplar:
    """One worked example: its plan plus the texts the baselines use as few-shot material."""

    name: str
    plan: ObjectLevelPlan
    pddl_problem: str = ""
    pddl_domain: str = ""
    subgoals: str = ""

    @property
    def steps(self) -> list[str]:
        return [u.instruction for u in self.plan.units]

    @property
    def text(self) -> str:
        """Rendering used for similarity: task prompt followed by numbered steps."""
        lines = [self.plan.task] + [f"{i}. {s}" for i, s in enumerate(self.steps, 1)]
        return "\n".join(line for line in lines if line)

    @property
    def json(self) -> str:
        return serialize_olp(self.plan)

    def to_dict(self) -> dict:
        return {"name": self.name, "task": self.plan.task, "olp": olp_to_document(self.plan),
                "pddl_problem": self.pddl_problem, "pddl_domain": self.pddl_domain, "subgoals": self.subgoals}

    @classmethod
    def from_dict(cls, data: dict) -> "Exemplar":
        return cls(name=data["name"], plan=parse_olp_document(data["olp"], data.get("task", "")),
                   pddl_problem=data.get("pddl_problem", ""), pddl_domain=data.get("pddl_domain", ""),
                   subgoals=data.get("subgoals", ""))


@dataclass
class ExemplarLibrary:
    entries: list[Exemplar]
    k: int = DEFAULT_K
    embedder: Embedder = field(default_factory=TfidfEmbedder)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be positive")
        self.k = min(self.k, max(len(self.entries), 1))
        self.embedder.fit([e.text for e in self.entries] or ["empty"])
        self.vectors = [self.embedder.embed(e.text) for e in self.entries]
        dims = {v.shape for v in self.vectors}
        if len(dims) > 1:
            raise ValueError("exemplar embeddings differ in dimensionality")

    def __len__(self):
        return len(self.entries)

    def embed(self, text: str) -> np.ndarray:
        return self.embedder.embed(text)

    @classmethod
    def load(cls, path: str | Path | None = None, k: int = DEFAULT_K,
             embedder: Embedder | None = None) -> "ExemplarLibrary":
        """Read a library file; without a path, the bundled library is used."""
        if path is None:
            text = resources.files("olplan.data").joinpath("exemplars.json").read_text(encoding="utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        data = json.loads(text)
        entries = [Exemplar.from_dict(d) for d in data["exemplars"]]
        return cls(entries, k=k, embedder=embedder or TfidfEmbedder())

    def save(self, path: str | Path) -> None:
        doc = {"exemplars": [e.to_dict() for e in self.entries]}
        Path(path).write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")

    def by_name(self, name: str) -> Exemplar:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)


def retrieve_exemplars(task: str, lib: ExemplarLibrary, k: int | None = None) -> list[tuple[Exemplar, float]]:
    """Top-k exemplars by cosine similarity to ``task``; ties keep library order."""
    if not lib.entries:
        raise EmptyLibrary("exemplar library is empty")
    k = lib.k if k is None else min(k, len(lib.entries))
    q = lib.embed(task)
    scored = [(i, cosine(q, v)) for i, v in enumerate(lib.vectors)]
    scored.sort(key=lambda p: (-p[1], p[0]))
    return [(lib.entries[i], s) for i, s in scored[:k]]
