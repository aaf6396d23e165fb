"""File-backed concept resources: recognition, graph similarity, sentiment.

These stand in for the heavyweight terminology services a production
system would call out to. Recognition is greedy longest dictionary match
over token sequences, similarity is inverse node count on the shortest
undirected path through the concept hierarchy, and sentiment is a flat
word lexicon with positivity/negativity columns.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from .textproc import ResourceFormatError, tokenize


class UnknownConceptError(KeyError):
    def __init__(self, cui):
        super().__init__(cui)
        self.cui = cui

    def __str__(self):
        return f"unknown concept identifier: {self.cui}"


@dataclass(frozen=True)
class Concept:
    cui: str
    preferred: str
    tui: str
    semantic_type: str
    synonyms: tuple[str, ...] = ()


@dataclass(frozen=True)
class ConceptMention:
    cui: str
    start: int
    end: int
    matched: str


def _normalize_surface(text: str) -> str:
    return " ".join(t.surface.lower() for t in tokenize(text))


class ConceptLexicon:
    """Concept dictionary with a surface-form index for longest match.

    When two concepts share a surface form the one listed first in the
    lexicon file wins (deterministic tie-break).
    """

    def __init__(self, concepts: list[Concept]):
        self.concepts: dict[str, Concept] = {}
        self._surface_to_cui: dict[str, str] = {}
        self._max_phrase_tokens = 1
        for concept in concepts:
            if concept.cui in self.concepts:
                raise ValueError(f"duplicate concept identifier {concept.cui}")
            if not concept.preferred:
                raise ValueError(f"concept {concept.cui} has an empty preferred name")
            self.concepts[concept.cui] = concept
            for surface in (concept.preferred, *concept.synonyms):
                key = _normalize_surface(surface)
                if not key:
                    continue
                self._surface_to_cui.setdefault(key, concept.cui)
                self._max_phrase_tokens = max(self._max_phrase_tokens, key.count(" ") + 1)

    def __len__(self):
        return len(self.concepts)

    def __contains__(self, cui):
        return cui in self.concepts

    def get(self, cui: str) -> Concept:
        try:
            return self.concepts[cui]
        except KeyError:
            raise UnknownConceptError(cui) from None

    @classmethod
    def from_file(cls, path) -> "ConceptLexicon":
        concepts = []
        for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 4:
                raise ResourceFormatError(path, i, f"expected at least 4 tab-separated fields, got {len(parts)}")
            cui, preferred, tui, semantic_type = (p.strip() for p in parts[:4])
            synonyms = ()
            if len(parts) >= 5 and parts[4].strip():
                synonyms = tuple(s.strip().lower() for s in parts[4].split("|") if s.strip())
            if not cui or not preferred:
                raise ResourceFormatError(path, i, "cui and preferred name are required")
            concepts.append(Concept(cui, preferred, tui, semantic_type, synonyms))
        return cls(concepts)


def recognize(text: str, lexicon: ConceptLexicon) -> list[ConceptMention]:
    """Greedy longest-match concept recognition, left to right.

    At each token position the longest surface form present in the lexicon
    wins and scanning resumes after it, so mentions never overlap.
    """
    tokens = tokenize(text)
    mentions = []
    i = 0
    n = len(tokens)
    while i < n:
        found = None
        max_len = min(lexicon._max_phrase_tokens, n - i)
        for length in range(max_len, 0, -1):
            window = tokens[i : i + length]
            key = " ".join(t.surface.lower() for t in window)
            cui = lexicon._surface_to_cui.get(key)
            if cui is not None:
                found = (cui, window[0].start, window[-1].end, length)
                break
        if found:
            cui, start, end, length = found
            mentions.append(ConceptMention(cui, start, end, text[start:end]))
            i += length
        else:
            i += 1
    return mentions


@dataclass
class ConceptGraph:
    """Undirected concept hierarchy used for path-length similarity."""

    adjacency: dict[str, set[str]] = field(default_factory=dict)

    @classmethod
    def from_edges(cls, edges: list[tuple[str, str]]) -> "ConceptGraph":
        graph = cls()
        for parent, child in edges:
            if parent == child:
                raise ValueError(f"self-loop on {parent}")
            graph.adjacency.setdefault(parent, set()).add(child)
            graph.adjacency.setdefault(child, set()).add(parent)
        return graph

    @classmethod
    def from_file(cls, path) -> "ConceptGraph":
        edges = []
        for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
                raise ResourceFormatError(path, i, f"expected 'parent_cui<TAB>child_cui', got {line!r}")
            if parts[0].strip() == parts[1].strip():
                raise ResourceFormatError(path, i, f"self-loop on {parts[0].strip()}")
            edges.append((parts[0].strip(), parts[1].strip()))
        return cls.from_edges(edges)

    @property
    def nodes(self) -> set[str]:
        return set(self.adjacency)

    def __contains__(self, cui):
        return cui in self.adjacency


def path_similarity(c1: str, c2: str, graph: ConceptGraph) -> float | None:
    """1 / (number of nodes on the shortest path), or None if disconnected.

    Identical concepts sit on a one-node path and score 1.0; a parent and
    child score 0.5. Reports render the None case as -1.
    """
    for cui in (c1, c2):
        if cui not in graph:
            raise UnknownConceptError(cui)
    if c1 == c2:
        return 1.0
    seen = {c1}
    queue = deque([(c1, 1)])
    while queue:
        node, nodes_so_far = queue.popleft()
        for neighbor in graph.adjacency[node]:
            if neighbor == c2:
                return 1.0 / (nodes_so_far + 1)
            if neighbor not in seen:
                seen.add(neighbor)
                queue.append((neighbor, nodes_so_far + 1))
    return None


def similarity_sum(question_cuis, title_cuis, graph: ConceptGraph) -> float:
    """Sum of path similarities over the full cross product.

    Pairs with no path contribute nothing, and concepts absent from the
    hierarchy are treated as unrelated rather than as errors so that
    arbitrary titles can be scored.
    """
    total = 0.0
    for qc in question_cuis:
        if qc not in graph:
            continue
        for tc in title_cuis:
            if tc not in graph:
                continue
            sim = path_similarity(qc, tc, graph)
            if sim is not None:
                total += sim
    return total


@dataclass(frozen=True)
class SentimentEntry:
    word: str
    tag_class: str  # n, v, a, r or any
    positivity: float
    negativity: float


_TAG_CLASSES = {"n", "v", "a", "r", "any"}


class SentimentLexicon:
    def __init__(self, entries: list[SentimentEntry]):
        self.entries = list(entries)
        self._by_key: dict[tuple[str, str], list[SentimentEntry]] = {}
        for e in self.entries:
            self._by_key.setdefault((e.word, e.tag_class), []).append(e)

    @classmethod
    def from_file(cls, path) -> "SentimentLexicon":
        entries = []
        for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ResourceFormatError(path, i, f"expected 4 tab-separated fields, got {len(parts)}")
            word, tag_class = parts[0].strip().lower(), parts[1].strip().lower()
            if tag_class not in _TAG_CLASSES:
                raise ResourceFormatError(path, i, f"tag class must be one of n/v/a/r/any, got {tag_class!r}")
            try:
                pos, neg = float(parts[2]), float(parts[3])
            except ValueError:
                raise ResourceFormatError(path, i, f"scores must be numeric: {line!r}") from None
            if not (0.0 <= pos <= 1.0 and 0.0 <= neg <= 1.0):
                raise ResourceFormatError(path, i, f"scores must lie in [0, 1]: {line!r}")
            entries.append(SentimentEntry(word, tag_class, pos, neg))
        return cls(entries)


def coarse_tag_class(tag: str) -> str:
    """Map a Penn-style tag to the sentiment lexicon's coarse classes."""
    if tag.startswith("NN"):
        return "n"
    if tag.startswith("VB") or tag == "MD":
        return "v"
    if tag.startswith("JJ"):
        return "a"
    if tag.startswith("RB"):
        return "r"
    return "any"


def word_sentiment(word: str, tag_class: str, lexicon: SentimentLexicon) -> float:
    """Mean of (positivity - negativity) over matching entries, else 0.

    Looks up (word, tag_class) first and falls back to (word, any);
    unknown words score 0 so arbitrary corpus text stays processable.
    """
    word = word.lower()
    entries = lexicon._by_key.get((word, tag_class))
    if not entries:
        entries = lexicon._by_key.get((word, "any"))
    if not entries:
        return 0.0
    return sum(e.positivity - e.negativity for e in entries) / len(entries)


def synonyms_of(cui: str, lexicon: ConceptLexicon) -> list[str]:
    """Synonym surface forms of a concept, preferred name excluded."""
    concept = lexicon.get(cui)
    preferred = concept.preferred.lower()
    return [s for s in concept.synonyms if s != preferred]
