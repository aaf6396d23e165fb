"""Question classification: type (yesno/factoid/list/summary) and topics.

The type classifier feeds features from a handcrafted question-shape
grammar into a seeded linear max-margin model; topic classification runs
one binary model per topic over a configurable feature combination.
"""

from __future__ import annotations

import json
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .conceptlex import ConceptLexicon, recognize
from .textproc import (
    ResourceFormatError,
    TaggedToken,
    TagLexicon,
    ngrams,
    pos_tag,
    stem,
    tokenize,
)

MODEL_FORMAT_VERSION = 1

TOPICS = (
    "Device",
    "Diagnosis",
    "Epidemiology",
    "Etiology",
    "History",
    "Management",
    "Pharmacological",
    "Physical Finding",
    "Procedure",
    "Prognosis",
    "Test",
    "Treatment & Prevention",
)

FEATURE_SPACES = ("unigram", "bigram", "pos", "pos+unigram", "patterns")

# Tags assigned to punctuation tokens; excluded from the pos feature space.
_PUNCT_TAGS = frozenset({".", ",", "(", ")", ":", "''"})

_KNOWN_TAGS = frozenset({
    "NN", "NNS", "NNP", "JJ", "JJR", "JJS", "VB", "VBZ", "VBP", "VBD",
    "VBN", "VBG", "MD", "DT", "IN", "TO", "CC", "WP", "WP$", "WDT", "WRB",
    "PRP", "PRP$", "RB", "RBR", "RBS",
})


class QuestionType(Enum):
    YESNO = "yesno"
    FACTOID = "factoid"
    LIST = "list"
    SUMMARY = "summary"


# Fixed order used for argmax tie-breaking.
TYPE_ORDER = (QuestionType.YESNO, QuestionType.FACTOID, QuestionType.LIST, QuestionType.SUMMARY)


class UnknownFeatureSpaceError(ValueError):
    pass


class MissingClassError(ValueError):
    pass


class ModelFormatError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Pattern grammar
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LiteralSet:
    phrases: tuple[tuple[str, ...], ...]  # each phrase is a word tuple
    capture: bool = True


@dataclass(frozen=True)
class TagMatch:
    tag: str


class AnyTag:
    """The TAG wildcard; matches one token and emits its actual tag."""

    def __repr__(self):
        return "AnyTag()"


class Star:
    """Matches any token run, possibly empty; emits nothing."""

    def __repr__(self):
        return "Star()"


_ANY_TAG = AnyTag()
_STAR = Star()


@dataclass(frozen=True)
class Pattern:
    category: QuestionType
    elements: tuple
    source: str = ""


@dataclass(frozen=True)
class PatternMatch:
    pattern: Pattern
    shift: int
    features: tuple[tuple[str, int], ...]


# Elements are bracketed groups (which may contain spaces) or bare tokens.
_ELEMENT_RE = re.compile(r"\[[^\]]*\]|\S+")


def _parse_alternatives(body: str, synonym_sets: dict[str, list[str]], path, line_no) -> list[str]:
    alternatives = []
    for alt in body.split("|"):
        alt = alt.strip()
        if not alt:
            continue
        if alt.startswith("@"):
            name = alt[1:]
            if name not in synonym_sets:
                raise ResourceFormatError(path, line_no, f"unresolved synonym set @{name}")
            alternatives.extend(synonym_sets[name])
        else:
            alternatives.append(alt.lower())
    return alternatives


def _parse_element(raw: str, synonym_sets: dict[str, list[str]], path, line_no):
    if raw.startswith("[") and raw.endswith("]"):
        body = raw[1:-1].strip()
        if body == "*":
            return _STAR
        if body == "TAG":
            return _ANY_TAG
        if "|" not in body and not body.startswith("@") and body.upper() == body and body in _KNOWN_TAGS:
            return TagMatch(body)
        alternatives = _parse_alternatives(body, synonym_sets, path, line_no)
        if not alternatives:
            raise ResourceFormatError(path, line_no, f"empty alternation in {raw!r}")
        phrases = [tuple(a.split()) for a in alternatives]
        # Longer phrases first so "stand for" wins over a bare "stand".
        phrases.sort(key=lambda p: (-len(p), p))
        return LiteralSet(tuple(phrases), capture=True)
    # Bare token: must match but emits no feature (the trailing ? in patterns).
    return LiteralSet(((raw.lower(),),), capture=False)


def parse_patterns(text: str, path="<patterns>") -> list[Pattern]:
    """Parse the line-oriented pattern DSL; see the bundled patterns file."""
    synonym_sets: dict[str, list[str]] = {}
    patterns: list[Pattern] = []
    for line_no, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("@"):
            name, _, rhs = line.partition("=")
            name = name.strip().lstrip("@")
            if not name or not rhs.strip():
                raise ResourceFormatError(path, line_no, f"bad synonym set definition: {line!r}")
            synonym_sets[name] = _parse_alternatives(rhs, synonym_sets, path, line_no)
            continue
        head, sep, rhs = line.partition(":=")
        if not sep:
            raise ResourceFormatError(path, line_no, f"expected 'CATEGORY := elements', got {line!r}")
        try:
            category = QuestionType[head.strip().upper()]
        except KeyError:
            raise ResourceFormatError(path, line_no, f"unknown category {head.strip()!r}") from None
        raw_elements = _ELEMENT_RE.findall(rhs)
        if "".join(raw_elements).replace(" ", "") != rhs.replace(" ", ""):
            raise ResourceFormatError(path, line_no, f"malformed element list: {rhs.strip()!r}")
        elements = tuple(
            _parse_element(tok, synonym_sets, path, line_no) for tok in raw_elements
        )
        if not elements:
            raise ResourceFormatError(path, line_no, "pattern has no elements")
        patterns.append(Pattern(category, elements, source=line))
    return patterns


def load_patterns(path) -> list[Pattern]:
    return parse_patterns(Path(path).read_text(encoding="utf-8"), path=path)


def _match_at(elements, tagged: list[TaggedToken], pos: int) -> list[str] | None:
    """Try to match the element sequence starting at token pos.

    Stars take the shortest run first, so feature attribution is the
    leftmost possible alignment. Returns the captured features, or None.
    """
    if not elements:
        return []
    head, rest = elements[0], elements[1:]
    if isinstance(head, Star):
        for skip in range(len(tagged) - pos + 1):
            sub = _match_at(rest, tagged, pos + skip)
            if sub is not None:
                return sub
        return None
    if pos >= len(tagged):
        return None
    if isinstance(head, TagMatch):
        if tagged[pos].tag != head.tag:
            return None
        sub = _match_at(rest, tagged, pos + 1)
        return None if sub is None else [head.tag] + sub
    if isinstance(head, AnyTag):
        sub = _match_at(rest, tagged, pos + 1)
        return None if sub is None else [tagged[pos].tag] + sub
    # LiteralSet
    for phrase in head.phrases:
        if pos + len(phrase) > len(tagged):
            continue
        if all(tagged[pos + k].token.surface.lower() == w for k, w in enumerate(phrase)):
            sub = _match_at(rest, tagged, pos + len(phrase))
            if sub is None:
                continue
            return ([" ".join(phrase)] if head.capture else []) + sub
    return None


def pattern_matches(tagged: list[TaggedToken], patterns: list[Pattern]) -> list[PatternMatch]:
    """First (smallest-shift) match of every pattern that matches at all."""
    matches = []
    for pattern in patterns:
        for shift in range(len(tagged)):
            captured = _match_at(pattern.elements, tagged, shift)
            if captured is not None:
                feats = tuple(sorted(Counter(captured).items()))
                matches.append(PatternMatch(pattern, shift, feats))
                break
    return matches


def match_patterns(tagged: list[TaggedToken], patterns: list[Pattern]) -> dict[str, int]:
    """Feature vector from the pattern grammar.

    All patterns are anchored as far left as possible; the ones anchored at
    the earliest position contribute, and their feature multisets merge by
    maximum count so the result is independent of pattern file order.
    Questions matching no pattern fall back to unigrams plus POS tags.
    """
    matches = pattern_matches(tagged, patterns)
    if not matches:
        return _fallback_features(tagged)
    best_shift = min(m.shift for m in matches)
    merged: dict[str, int] = {}
    for m in matches:
        if m.shift != best_shift:
            continue
        for feat, count in m.features:
            merged[feat] = max(merged.get(feat, 0), count)
    return merged


def _unigram_features(tagged) -> dict[str, int]:
    return dict(Counter(t.token.surface for t in tagged))

def _bigram_features(tagged) -> dict[str, int]:
    return dict(Counter(ngrams([t.token.surface for t in tagged], 2)))

def _pos_features(tagged) -> dict[str, int]:
    return dict(Counter(t.tag for t in tagged if t.tag not in _PUNCT_TAGS))


def _merge_sum(*vectors: dict[str, int]) -> dict[str, int]:
    merged: dict[str, int] = {}
    for vec in vectors:
        for feat, count in vec.items():
            merged[feat] = merged.get(feat, 0) + count
    return merged


def _fallback_features(tagged) -> dict[str, int]:
    return _merge_sum(_unigram_features(tagged), _pos_features(tagged))


class FeatureExtractor:
    """Turns a raw question string into a sparse feature vector."""

    def __init__(self, tag_lexicon: TagLexicon, patterns: list[Pattern] | None = None):
        self.tag_lexicon = tag_lexicon
        self.patterns = patterns or []

    def tag(self, question: str) -> list[TaggedToken]:
        return pos_tag(tokenize(question), self.tag_lexicon)

    def extract(self, question: str, space: str) -> dict[str, int]:
        tagged = self.tag(question)
        if space == "unigram":
            return _unigram_features(tagged)
        if space == "bigram":
            return _bigram_features(tagged)
        if space == "pos":
            return _pos_features(tagged)
        if space == "pos+unigram":
            return _merge_sum(_pos_features(tagged), _unigram_features(tagged))
        if space == "patterns":
            return match_patterns(tagged, self.patterns)
        raise UnknownFeatureSpaceError(f"unknown feature space {space!r}; expected one of {FEATURE_SPACES}")


def extract_features(question: str, space: str, extractor: FeatureExtractor) -> dict[str, int]:
    return extractor.extract(question, space)


# ---------------------------------------------------------------------------
# Linear models
# ---------------------------------------------------------------------------

@dataclass
class LinearModel:
    """Multiclass linear model: argmax of weights . features + bias."""

    labels: tuple[str, ...]
    weights: dict[str, dict[str, float]]
    bias: dict[str, float]
    meta: dict = field(default_factory=dict)

    def scores(self, features: dict[str, int]) -> dict[str, float]:
        out = {}
        for label in self.labels:
            w = self.weights[label]
            out[label] = self.bias[label] + sum(w.get(f, 0.0) * c for f, c in features.items())
        return out

    def predict(self, features: dict[str, int]) -> str:
        scores = self.scores(features)
        # max() keeps the first of equal scores, i.e. the fixed label order.
        return max(self.labels, key=lambda lab: scores[lab])


def _sgd_multiclass(X, y, n_labels, lam, epochs, seed):
    """Pegasos-style subgradient descent on the multiclass hinge loss.

    No bias term: with sparse question features a free intercept under the
    1/(lambda t) schedule swamps the evidence, and balanced margins do not
    need one.
    """
    n, d = len(X), X[0].shape[0] if X else 0
    W = np.zeros((n_labels, d), dtype=np.float64)
    rng = np.random.default_rng(seed)
    t = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        for i in order:
            t += 1
            eta = 1.0 / (lam * t)
            x = X[i]
            scores = W @ x
            yi = y[i]
            rival_scores = scores.copy()
            rival_scores[yi] = -np.inf
            rival = int(np.argmax(rival_scores))
            W *= max(0.0, 1.0 - eta * lam)
            if scores[yi] - scores[rival] < 1.0:
                W[yi] += eta * x
                W[rival] -= eta * x
    return W, np.zeros(n_labels, dtype=np.float64)


def _vectorize(examples, vocabulary):
    index = {f: i for i, f in enumerate(vocabulary)}
    matrix = []
    for features in examples:
        x = np.zeros(len(vocabulary), dtype=np.float64)
        for f, c in features.items():
            x[index[f]] = float(c)
        matrix.append(x)
    return matrix


def train_type_classifier(
    examples: list[tuple[dict[str, int], QuestionType]],
    space: str,
    C: float = 1.01,
    seed: int = 42,
    epochs: int = 200,
    labels: tuple[QuestionType, ...] | None = None,
) -> LinearModel:
    """Train the multiclass type model on (feature vector, label) pairs.

    The label set defaults to the types present in the data, in the fixed
    YESNO < FACTOID < LIST < SUMMARY order; passing labels explicitly
    makes an absent class an error. Training is deterministic given
    (data, space, C, seed).
    """
    if not examples:
        raise ValueError("no training examples")
    present = {label for _, label in examples}
    if labels is None:
        labels = tuple(t for t in TYPE_ORDER if t in present)
    else:
        for label in labels:
            if label not in present:
                raise MissingClassError(f"no training examples for class {label.value}")

    seen: dict[tuple, QuestionType] = {}
    for features, label in examples:
        key = tuple(sorted(features.items()))
        if key in seen and seen[key] != label:
            warnings.warn(
                f"identical feature vector labeled both {seen[key].value} and {label.value}",
                stacklevel=2,
            )
        seen.setdefault(key, label)

    vocabulary = sorted({f for features, _ in examples for f in features})
    X = _vectorize([f for f, _ in examples], vocabulary)
    label_index = {lab: i for i, lab in enumerate(labels)}
    y = [label_index[label] for _, label in examples]
    lam = 1.0 / (C * len(examples))
    W, B = _sgd_multiclass(X, y, len(labels), lam, epochs, seed)

    weights = {
        lab.value: {f: float(W[i, j]) for j, f in enumerate(vocabulary) if W[i, j] != 0.0}
        for lab, i in label_index.items()
    }
    bias = {lab.value: float(B[i]) for lab, i in label_index.items()}
    meta = {"space": space, "C": C, "seed": seed, "epochs": epochs, "kind": "type"}
    return LinearModel(tuple(lab.value for lab in labels), weights, bias, meta)


def classify_type(model: LinearModel, question: str, extractor: FeatureExtractor) -> QuestionType:
    features = extractor.extract(question, model.meta.get("space", "patterns"))
    return QuestionType(model.predict(features))


def training_accuracy(model: LinearModel, examples) -> float:
    if not examples:
        return 0.0
    hits = sum(1 for f, label in examples if model.predict(f) == label.value)
    return hits / len(examples)


# ---------------------------------------------------------------------------
# Topic classification
# ---------------------------------------------------------------------------

def extract_topic_features(
    question: str,
    config: set[str],
    *,
    tag_lexicon: TagLexicon,
    stopwords: set[str],
    concept_lexicon: ConceptLexicon | None = None,
    dep_pairs: list[tuple[str, str, str]] | None = None,
) -> dict[str, int]:
    """Feature combination for topic models.

    config selects any subset of BOW (unigrams minus stopwords), BOB
    (bigrams), BOS (Porter stems), BOCST (concept cuis and tuis) and
    BOSDR (externally supplied dependency relations).
    """
    unknown = config - {"BOW", "BOB", "BOS", "BOCST", "BOSDR"}
    if unknown:
        raise UnknownFeatureSpaceError(f"unknown topic feature group(s): {sorted(unknown)}")
    tokens = tokenize(question)
    surfaces = [t.surface for t in tokens]
    content = [
        s for s in surfaces
        if s.lower() not in stopwords and any(ch.isalnum() for ch in s)
    ]
    groups = []
    if "BOW" in config:
        groups.append(Counter(content))
    if "BOB" in config:
        groups.append(Counter(ngrams(surfaces, 2)))
    if "BOS" in config:
        groups.append(Counter(stem(s.lower()) for s in content))
    if "BOCST" in config:
        if concept_lexicon is None:
            raise ValueError("BOCST features require a concept lexicon")
        counts: Counter = Counter()
        for mention in recognize(question, concept_lexicon):
            concept = concept_lexicon.get(mention.cui)
            counts[concept.cui] += 1
            counts[concept.tui] += 1
        groups.append(counts)
    if "BOSDR" in config:
        groups.append(Counter(f"{rel.lower()}({head.lower()},{dep.lower()})" for rel, head, dep in (dep_pairs or [])))
    return _merge_sum(*[dict(g) for g in groups]) if groups else {}


@dataclass
class BinaryModel:
    weights: dict[str, float]
    bias: float

    def score(self, features: dict[str, int]) -> float:
        return self.bias + sum(self.weights.get(f, 0.0) * c for f, c in features.items())


@dataclass
class TopicModelSet:
    models: dict[str, BinaryModel]
    meta: dict = field(default_factory=dict)


def _sgd_binary(X, y, lam, epochs, seed):
    # Bias-free for the same reason as the multiclass trainer: the
    # positive/negative sets are balanced by construction.
    d = X[0].shape[0] if X else 0
    w = np.zeros(d, dtype=np.float64)
    rng = np.random.default_rng(seed)
    t = 0
    for _ in range(epochs):
        order = rng.permutation(len(X))
        for i in order:
            t += 1
            eta = 1.0 / (lam * t)
            w *= max(0.0, 1.0 - eta * lam)
            if y[i] * (w @ X[i]) < 1.0:
                w += eta * y[i] * X[i]
    return w, 0.0


def train_topic_models(
    examples: list[tuple[dict[str, int], set[str]]],
    seed: int = 42,
    topics: tuple[str, ...] = TOPICS,
    C: float = 1.01,
    epochs: int = 200,
) -> TopicModelSet:
    """One balanced binary model per topic.

    Positives are the questions labeled with the topic; negatives are an
    equal-size uniform sample of the rest drawn with a per-topic seed
    (master seed + topic index). Topics with no positives are skipped
    with a warning.
    """
    models: dict[str, BinaryModel] = {}
    for topic_index, topic in enumerate(topics):
        positives = [f for f, ts in examples if topic in ts]
        rest = [f for f, ts in examples if topic not in ts]
        if not positives:
            warnings.warn(f"topic {topic!r} has no positive examples; skipped", stacklevel=2)
            continue
        rng = np.random.default_rng(seed + topic_index)
        n_neg = min(len(positives), len(rest))
        chosen = sorted(rng.choice(len(rest), size=n_neg, replace=False).tolist()) if n_neg else []
        negatives = [rest[i] for i in chosen]
        data = [(f, 1) for f in positives] + [(f, -1) for f in negatives]
        vocabulary = sorted({f for feats, _ in data for f in feats})
        X = _vectorize([f for f, _ in data], vocabulary)
        y = [lab for _, lab in data]
        lam = 1.0 / (C * len(data))
        w, b = _sgd_binary(X, y, lam, epochs, seed + topic_index)
        models[topic] = BinaryModel(
            {f: float(w[j]) for j, f in enumerate(vocabulary) if w[j] != 0.0}, float(b)
        )
    return TopicModelSet(models, meta={"seed": seed, "C": C, "epochs": epochs, "kind": "topics"})


def classify_topics(model_set: TopicModelSet, features: dict[str, int]) -> set[str]:
    """Every topic whose binary score is strictly positive."""
    return {topic for topic, model in model_set.models.items() if model.score(features) > 0.0}


# ---------------------------------------------------------------------------
# Model persistence
# ---------------------------------------------------------------------------

def save_model(model: LinearModel | TopicModelSet, path) -> None:
    if isinstance(model, LinearModel):
        payload = {
            "version": MODEL_FORMAT_VERSION,
            "kind": "type",
            "labels": list(model.labels),
            "weights": model.weights,
            "bias": model.bias,
            "meta": model.meta,
        }
    else:
        payload = {
            "version": MODEL_FORMAT_VERSION,
            "kind": "topics",
            "topics": {
                name: {"weights": m.weights, "bias": m.bias} for name, m in model.models.items()
            },
            "meta": model.meta,
        }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def load_model(path):
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    version = payload.get("version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"model format version {version!r}, expected {MODEL_FORMAT_VERSION}")
    if payload.get("kind") == "type":
        return LinearModel(tuple(payload["labels"]), payload["weights"], payload["bias"], payload.get("meta", {}))
    if payload.get("kind") == "topics":
        models = {
            name: BinaryModel(entry["weights"], entry["bias"])
            for name, entry in payload["topics"].items()
        }
        return TopicModelSet(models, payload.get("meta", {}))
    raise ModelFormatError(f"unknown model kind {payload.get('kind')!r}")
