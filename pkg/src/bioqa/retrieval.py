"""Retrieval stack: query formulation, inverted index, BM25, reranking.

Documents and sentence-length passages are indexed over Porter stems of
non-stopword tokens plus recognized concept identifiers. Document search
is conjunctive over the query's index terms with a disjunctive fallback;
reranking orders documents by summed concept-path similarity between the
question and each title.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

from .conceptlex import ConceptGraph, ConceptLexicon, recognize, similarity_sum
from .textproc import split_sentences, stem, tokenize

INDEX_FORMAT_VERSION = 1

DEFAULT_K1 = 1.2
DEFAULT_B = 0.85
DEFAULT_RETRIEVE_DEPTH = 200
DEFAULT_TOP_DOCS = 10
DEFAULT_TOP_PASSAGES = 10


class DuplicateIdError(ValueError):
    pass


class UnknownUnitError(KeyError):
    def __init__(self, unit_id):
        super().__init__(unit_id)
        self.unit_id = unit_id

    def __str__(self):
        return f"unit not in index: {self.unit_id}"


class RemoteResponseError(ValueError):
    """Malformed ID-list response; carries the byte offset of the fault."""

    def __init__(self, offset, message):
        super().__init__(f"byte {offset}: {message}")
        self.offset = offset


@dataclass(frozen=True)
class DocumentRecord:
    doc_id: str
    title: str
    abstract: str


@dataclass(frozen=True)
class Query:
    concept_terms: tuple[str, ...]
    raw_terms: tuple[str, ...]


@dataclass(frozen=True)
class ScoredDoc:
    doc_id: str
    score: float
    rank: int


@dataclass(frozen=True)
class PassageCandidate:
    text: str
    doc_id: str
    sent_index: int


@dataclass(frozen=True)
class ScoredPassage:
    passage: PassageCandidate
    score: float
    rank: int


@dataclass
class SearchResult:
    docs: list[ScoredDoc]
    relaxed: bool = False


@dataclass
class IndexedCorpus:
    """Inverted index over stems and concepts, with BM25 statistics."""

    mode: str  # "document" or "passage"
    postings: dict[str, dict[str, int]] = field(default_factory=dict)
    lengths: dict[str, int] = field(default_factory=dict)
    unit_order: list[str] = field(default_factory=list)

    @property
    def n_units(self) -> int:
        return len(self.unit_order)

    @property
    def avg_len(self) -> float:
        if not self.unit_order:
            return 0.0
        return sum(self.lengths.values()) / len(self.unit_order)


def index_terms(text: str, stopwords: set[str], lexicon: ConceptLexicon | None) -> list[str]:
    """Index terms of a text: stems of non-stopword words, then cuis.

    Tokens without any alphanumeric character are skipped. Every concept
    mention contributes one occurrence of its cui.
    """
    terms = []
    for token in tokenize(text):
        surface = token.surface.lower()
        if surface in stopwords or not any(ch.isalnum() for ch in surface):
            continue
        terms.append(stem(surface))
    if lexicon is not None:
        terms.extend(m.cui for m in recognize(text, lexicon))
    return terms


def formulate_query(question: str, lexicon: ConceptLexicon, stopwords: set[str]) -> Query:
    """Concept-based query; falls back to content tokens when nothing maps.

    Concept terms are the preferred names of recognized concepts,
    deduplicated in order of first mention (the downstream search is
    conjunctive, so the order carries no ranking weight).
    """
    concept_terms: list[str] = []
    seen = set()
    for mention in recognize(question, lexicon):
        preferred = lexicon.get(mention.cui).preferred
        if preferred not in seen:
            seen.add(preferred)
            concept_terms.append(preferred)
    raw_terms = tuple(
        t.surface
        for t in tokenize(question)
        if t.surface.lower() not in stopwords and any(ch.isalnum() for ch in t.surface)
    )
    return Query(tuple(concept_terms), raw_terms)


def build_index(
    units: list[tuple[str, str]],
    mode: str,
    stopwords: set[str],
    lexicon: ConceptLexicon | None,
) -> IndexedCorpus:
    if mode not in ("document", "passage"):
        raise ValueError(f"mode must be 'document' or 'passage', got {mode!r}")
    index = IndexedCorpus(mode=mode)
    for unit_id, text in units:
        if unit_id in index.lengths:
            raise DuplicateIdError(f"duplicate unit id {unit_id!r}")
        terms = index_terms(text, stopwords, lexicon)
        index.lengths[unit_id] = len(terms)
        index.unit_order.append(unit_id)
        for term in terms:
            index.postings.setdefault(term, {})
            index.postings[term][unit_id] = index.postings[term].get(unit_id, 0) + 1
    return index


def idf(term: str, index: IndexedCorpus) -> float:
    """ln((N - N(q) + 0.5) / (N(q) + 0.5)); negative values are clamped off
    by the caller because such terms carry no information."""
    n_q = len(index.postings.get(term, {}))
    return math.log((index.n_units - n_q + 0.5) / (n_q + 0.5))


def bm25_score(
    query_terms: list[str],
    unit_id: str,
    index: IndexedCorpus,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> float:
    """Okapi BM25 score of one unit for the given query term sequence.

    Terms whose IDF is not positive contribute nothing. Query terms are
    consumed as given; a term listed twice counts twice.
    """
    if unit_id not in index.lengths:
        raise UnknownUnitError(unit_id)
    if k1 <= 0:
        raise ValueError(f"k1 must be positive, got {k1}")
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"b must lie in [0, 1], got {b}")
    length = index.lengths[unit_id]
    avg = index.avg_len
    score = 0.0
    for term in query_terms:
        weight = idf(term, index)
        if weight <= 0.0:
            continue
        f = index.postings.get(term, {}).get(unit_id, 0)
        if f == 0:
            continue
        norm = 1.0 - b + b * (length / avg) if avg > 0 else 1.0
        score += weight * (f * (k1 + 1.0)) / (f + k1 * norm)
    return score


def _query_index_terms(query: Query, stopwords: set[str], lexicon: ConceptLexicon | None) -> list[str]:
    terms: list[str] = []
    if query.concept_terms:
        for concept_term in query.concept_terms:
            terms.extend(index_terms(concept_term, stopwords, lexicon))
    else:
        terms.extend(stem(t.lower()) for t in query.raw_terms)
    return terms


def search(
    index: IndexedCorpus,
    query: Query,
    limit: int,
    stopwords: set[str],
    lexicon: ConceptLexicon | None,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> SearchResult:
    """Conjunctive search over the query's index terms, BM25 ranked.

    When no document contains every term the search relaxes to documents
    containing any of them; the result records that it did.
    """
    if index.mode != "document":
        raise ValueError("search requires a document-mode index")
    terms = _query_index_terms(query, stopwords, lexicon)
    distinct = list(dict.fromkeys(terms))
    if not distinct or limit <= 0:
        return SearchResult([], relaxed=False)

    candidates = [
        uid
        for uid in index.unit_order
        if all(uid in index.postings.get(t, {}) for t in distinct)
    ]
    relaxed = False
    if not candidates:
        relaxed = True
        candidates = [
            uid
            for uid in index.unit_order
            if any(uid in index.postings.get(t, {}) for t in distinct)
        ]
    scored = [(bm25_score(terms, uid, index, k1, b), uid) for uid in candidates]
    scored.sort(key=lambda pair: -pair[0])  # stable: input order preserved on ties
    docs = [ScoredDoc(uid, s, rank) for rank, (s, uid) in enumerate(scored[:limit], 1)]
    return SearchResult(docs, relaxed=relaxed)


def rerank_documents(
    question: str,
    docs: list[DocumentRecord],
    lexicon: ConceptLexicon,
    graph: ConceptGraph,
    m: int,
) -> list[ScoredDoc]:
    """Order documents by summed question/title concept similarity.

    Sorting is stable, so documents with equal scores keep their incoming
    order; only the m top documents are returned.
    """
    question_cuis = [mention.cui for mention in recognize(question, lexicon)]
    scored = []
    for doc in docs:
        title_cuis = [mention.cui for mention in recognize(doc.title, lexicon)]
        scored.append((similarity_sum(question_cuis, title_cuis, graph), doc))
    scored.sort(key=lambda pair: -pair[0])
    return [ScoredDoc(doc.doc_id, score, rank) for rank, (score, doc) in enumerate(scored[:m], 1)]


def extract_passages(docs: list[DocumentRecord], abbreviations: set[str] | None = None) -> list[PassageCandidate]:
    """One candidate per abstract sentence, in document order."""
    candidates = []
    for doc in docs:
        for i, sentence in enumerate(split_sentences(doc.abstract, abbreviations)):
            candidates.append(PassageCandidate(sentence.text, doc.doc_id, i))
    return candidates


def rank_passages(
    question: str,
    candidates: list[PassageCandidate],
    stopwords: set[str],
    lexicon: ConceptLexicon | None,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    top_n: int = DEFAULT_TOP_PASSAGES,
) -> list[ScoredPassage]:
    """BM25-rank sentence candidates against the question.

    A passage-mode index is built over the candidates; the query terms are
    the question's stems and concept identifiers. Ties keep candidate
    (document, sentence) order.
    """
    if not candidates or top_n <= 0:
        return []
    units = [(f"p{i}", c.text) for i, c in enumerate(candidates)]
    index = build_index(units, "passage", stopwords, lexicon)
    terms = index_terms(question, stopwords, lexicon)
    scored = [(bm25_score(terms, f"p{i}", index, k1, b), i) for i in range(len(candidates))]
    scored.sort(key=lambda pair: -pair[0])
    return [
        ScoredPassage(candidates[i], score, rank)
        for rank, (score, i) in enumerate(scored[:top_n], 1)
    ]


# ---------------------------------------------------------------------------
# Remote ID-list responses
# ---------------------------------------------------------------------------

def parse_remote_idlist(xml_text: str) -> list[str]:
    """Ordered text contents of all <Id> elements in a search response.

    The scanner checks that element tags balance; on malformed input it
    raises with the byte offset of the offending tag.
    """
    ids: list[str] = []
    stack: list[tuple[str, int]] = []
    pos = 0
    n = len(xml_text)
    while pos < n:
        lt = xml_text.find("<", pos)
        if lt < 0:
            break
        gt = xml_text.find(">", lt)
        if gt < 0:
            raise RemoteResponseError(lt, "unterminated tag")
        raw = xml_text[lt + 1 : gt].strip()
        pos = gt + 1
        if not raw:
            raise RemoteResponseError(lt, "empty tag")
        if raw.startswith("?") or raw.startswith("!"):
            continue  # declaration, doctype or comment
        if raw.endswith("/"):
            continue  # self-closing
        if raw.startswith("/"):
            name = raw[1:].strip().lower()
            if not stack:
                raise RemoteResponseError(lt, f"unmatched closing tag </{name}>")
            open_name, open_at = stack.pop()
            if open_name != name:
                raise RemoteResponseError(lt, f"expected </{open_name}>, found </{name}>")
            continue
        name = raw.split()[0].lower()
        stack.append((name, lt))
        if name == "id":
            text_end = xml_text.find("<", pos)
            if text_end < 0:
                raise RemoteResponseError(lt, "unclosed <Id> element")
            ids.append(xml_text[pos:text_end].strip())
    if stack:
        name, at = stack[-1]
        raise RemoteResponseError(at, f"unclosed <{name}> element")
    return ids


def query_string(query: Query) -> str:
    """Conjunctive query text sent to a remote searcher."""
    terms = query.concept_terms or query.raw_terms
    return " AND ".join(terms)


class FileBackedRemoteSearcher:
    """Remote searcher stub serving canned XML responses from a directory.

    Responses are keyed by the query hash so recorded search sessions can
    be replayed offline.
    """

    def __init__(self, directory):
        self.directory = directory

    @staticmethod
    def response_key(query_text: str) -> str:
        return hashlib.sha256(query_text.encode("utf-8")).hexdigest()[:16]

    def search(self, query_text: str) -> str:
        path = Path(self.directory) / f"{self.response_key(query_text)}.xml"
        if not path.exists():
            raise FileNotFoundError(f"no canned response for query {query_text!r} ({path.name})")
        return path.read_text(encoding="utf-8")


def remote_retrieve(
    question: str,
    searcher,
    documents: dict[str, DocumentRecord],
    lexicon: ConceptLexicon,
    graph: ConceptGraph,
    stopwords: set[str],
    retrieve_depth: int = DEFAULT_RETRIEVE_DEPTH,
    keep: int = 100,
) -> list[ScoredDoc]:
    """Remote-searcher flow: fetch an ID list, then rerank the documents.

    Up to retrieve_depth identifiers are considered; identifiers missing
    from the local document store are skipped.
    """
    query = formulate_query(question, lexicon, stopwords)
    response = searcher.search(query_string(query))
    ids = parse_remote_idlist(response)[:retrieve_depth]
    docs = [documents[i] for i in ids if i in documents]
    return rerank_documents(question, docs, lexicon, graph, keep)
