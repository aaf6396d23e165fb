"""Answer extraction and the end-to-end pipeline.

Yes/no answers come from a sentiment vote over the candidate passages,
factoid and list answers from frequency-ranked concept mentions with
their synonyms, and ideal answers from the two passages ranking highest
against the question.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .conceptlex import (
    ConceptGraph,
    ConceptLexicon,
    SentimentLexicon,
    coarse_tag_class,
    recognize,
    synonyms_of,
    word_sentiment,
)
from .qclass import FeatureExtractor, LinearModel, QuestionType, classify_type
from .retrieval import (
    DEFAULT_B,
    DEFAULT_K1,
    DEFAULT_RETRIEVE_DEPTH,
    DEFAULT_TOP_DOCS,
    DEFAULT_TOP_PASSAGES,
    DocumentRecord,
    IndexedCorpus,
    PassageCandidate,
    ScoredPassage,
    extract_passages,
    formulate_query,
    rank_passages,
    rerank_documents,
    search,
)
from .textproc import TagLexicon, pos_tag, tokenize

DEFAULT_LIST_CAP = 10
FACTOID_CAP = 5


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class YesNoResult:
    value: str  # "yes" or "no"
    positives: int
    negatives: int
    empty: bool = False


@dataclass(frozen=True)
class EntityAnswer:
    name: str
    synonyms: tuple[str, ...] = ()


@dataclass(frozen=True)
class IdealAnswer:
    text: str
    sources: tuple[tuple[str, int], ...] = ()
    empty: bool = False


@dataclass
class FullAnswer:
    question: str
    question_type: QuestionType
    ideal: IdealAnswer
    exact_yesno: YesNoResult | None = None
    exact_entities: list[EntityAnswer] | None = None
    supporting: list[ScoredPassage] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    @property
    def exact(self):
        if self.question_type is QuestionType.YESNO:
            return self.exact_yesno
        if self.question_type is QuestionType.SUMMARY:
            return None
        return self.exact_entities


def passage_sentiment(text: str, sentiment: SentimentLexicon, tag_lexicon: TagLexicon) -> float:
    """Summed per-word sentiment of one passage."""
    tagged = pos_tag(tokenize(text), tag_lexicon)
    return sum(
        word_sentiment(t.token.surface.lower(), coarse_tag_class(t.tag), sentiment)
        for t in tagged
    )


def answer_yesno(
    passages: list[str],
    sentiment: SentimentLexicon,
    tag_lexicon: TagLexicon,
) -> YesNoResult:
    """Sentiment vote: a passage with non-negative score counts positive,
    and the answer is yes when positives are not outnumbered.

    An empty passage list yields yes (the 0 >= 0 branch) with a flag.
    """
    positives = negatives = 0
    for text in passages:
        if passage_sentiment(text, sentiment, tag_lexicon) >= 0.0:
            positives += 1
        else:
            negatives += 1
    value = "yes" if positives >= negatives else "no"
    return YesNoResult(value, positives, negatives, empty=not passages)


def rank_entities(
    passages: list[str],
    question: str,
    lexicon: ConceptLexicon,
) -> list[EntityAnswer]:
    """Frequency-ranked concepts of the passages, question concepts excluded.

    Exclusion happens at the concept level, so a synonym of a question
    entity is excluded too. Ties keep first-mention order.
    """
    question_cuis = {m.cui for m in recognize(question, lexicon)}
    counts: Counter = Counter()
    first_seen: dict[str, int] = {}
    order = 0
    for text in passages:
        for mention in recognize(text, lexicon):
            if mention.cui in question_cuis:
                continue
            counts[mention.cui] += 1
            if mention.cui not in first_seen:
                first_seen[mention.cui] = order
            order += 1
    ranked = sorted(counts, key=lambda cui: (-counts[cui], first_seen[cui]))
    return [
        EntityAnswer(lexicon.get(cui).preferred, tuple(synonyms_of(cui, lexicon)))
        for cui in ranked
    ]


def answer_factoid(passages: list[str], question: str, lexicon: ConceptLexicon) -> list[EntityAnswer]:
    """Up to five candidate entities, most frequent first."""
    return rank_entities(passages, question, lexicon)[:FACTOID_CAP]


def answer_list(
    passages: list[str],
    question: str,
    lexicon: ConceptLexicon,
    cap: int = DEFAULT_LIST_CAP,
) -> list[EntityAnswer]:
    """Single list of entities; same ranking as factoid, different reading."""
    return rank_entities(passages, question, lexicon)[:cap]


def ideal_answer(
    question: str,
    candidates: list[PassageCandidate],
    stopwords: set[str],
    lexicon: ConceptLexicon | None,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> IdealAnswer:
    """Concatenation of the two passages ranking highest for the question."""
    top = rank_passages(question, candidates, stopwords, lexicon, k1=k1, b=b, top_n=2)
    if not top:
        return IdealAnswer("", (), empty=True)
    text = " ".join(sp.passage.text for sp in top)
    sources = tuple((sp.passage.doc_id, sp.passage.sent_index) for sp in top)
    return IdealAnswer(text, sources)


@dataclass
class PipelineConfig:
    retrieve_depth: int = DEFAULT_RETRIEVE_DEPTH
    top_docs: int = DEFAULT_TOP_DOCS
    top_passages: int = DEFAULT_TOP_PASSAGES
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B
    list_cap: int = DEFAULT_LIST_CAP


def answer_pipeline(
    question: str,
    documents: dict[str, DocumentRecord],
    index: IndexedCorpus,
    model: LinearModel,
    resources,
    config: PipelineConfig | None = None,
) -> FullAnswer:
    """classify -> retrieve -> rerank -> passages -> type-specific answer.

    resources is a loaded ResourceBundle; everything it carries must be
    present before any retrieval starts.
    """
    config = config or PipelineConfig()
    for attr in ("concept_lexicon", "graph", "sentiment", "stopwords", "tag_lexicon", "abbreviations", "patterns"):
        if getattr(resources, attr, None) is None:
            raise ConfigurationError(f"resource bundle is missing {attr}")

    extractor = FeatureExtractor(resources.tag_lexicon, resources.patterns)
    question_type = classify_type(model, question, extractor)

    flags: list[str] = []
    query = formulate_query(question, resources.concept_lexicon, resources.stopwords)
    result = search(
        index, query, config.retrieve_depth, resources.stopwords, resources.concept_lexicon,
        k1=config.k1, b=config.b,
    )
    if result.relaxed:
        flags.append("search_relaxed")
    retrieved = [documents[sd.doc_id] for sd in result.docs if sd.doc_id in documents]
    reranked = rerank_documents(
        question, retrieved, resources.concept_lexicon, resources.graph, config.top_docs
    )
    by_id = {d.doc_id: d for d in retrieved}
    top_docs = [by_id[sd.doc_id] for sd in reranked]
    candidates = extract_passages(top_docs, resources.abbreviations)
    supporting = rank_passages(
        question, candidates, resources.stopwords, resources.concept_lexicon,
        k1=config.k1, b=config.b, top_n=config.top_passages,
    )
    if not supporting:
        flags.append("no_passages")
    passage_texts = [sp.passage.text for sp in supporting]

    ideal = ideal_answer(
        question,
        [sp.passage for sp in supporting],
        resources.stopwords,
        resources.concept_lexicon,
        k1=config.k1,
        b=config.b,
    )
    if ideal.empty:
        flags.append("empty_ideal")

    answer = FullAnswer(question, question_type, ideal, supporting=supporting, flags=flags)
    if question_type is QuestionType.YESNO:
        vote = answer_yesno(passage_texts, resources.sentiment, resources.tag_lexicon)
        if vote.empty:
            flags.append("yesno_vote_empty")
        answer.exact_yesno = vote
    elif question_type is QuestionType.FACTOID:
        answer.exact_entities = answer_factoid(passage_texts, question, resources.concept_lexicon)
    elif question_type is QuestionType.LIST:
        answer.exact_entities = answer_list(
            passage_texts, question, resources.concept_lexicon, cap=config.list_cap
        )
        if not answer.exact_entities:
            flags.append("empty_entity_list")
    return answer


def answer_to_json(answer: FullAnswer, question_id: str) -> dict:
    """Serialize a FullAnswer in the shape the question datasets use."""
    if answer.question_type is QuestionType.YESNO and answer.exact_yesno is not None:
        exact = answer.exact_yesno.value
    elif answer.exact_entities is not None:
        exact = [[e.name, *e.synonyms] for e in answer.exact_entities]
    else:
        exact = None
    snippets = [
        {"document": sp.passage.doc_id, "text": sp.passage.text, "rank": sp.rank}
        for sp in answer.supporting
    ]
    documents = list(dict.fromkeys(sp.passage.doc_id for sp in answer.supporting))
    return {
        "id": question_id,
        "type": answer.question_type.value,
        "exact_answer": exact,
        "ideal_answer": answer.ideal.text,
        "documents": documents,
        "snippets": snippets,
        "flags": answer.flags,
    }
