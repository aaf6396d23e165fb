"""Loading and validation of every external file the pipeline consumes.

All loaders reject malformed input with an error naming the file and, for
line-oriented formats, the line; nothing downstream has to re-validate.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .conceptlex import ConceptGraph, ConceptLexicon, SentimentLexicon
from .qclass import Pattern, QuestionType, load_patterns
from .retrieval import INDEX_FORMAT_VERSION, DocumentRecord, DuplicateIdError, IndexedCorpus
from .textproc import TagLexicon, load_abbreviations, load_stopwords


class DatasetFormatError(ValueError):
    pass


class IndexVersionError(ValueError):
    def __init__(self, found, expected):
        super().__init__(f"index format version {found!r}, expected {expected!r}")
        self.found = found
        self.expected = expected


def load_corpus(path) -> list[DocumentRecord]:
    """JSON Lines corpus: one {doc_id, title, abstract} object per line."""
    records: list[DocumentRecord] = []
    seen: set[str] = set()
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"{path}:{line_no}: invalid JSON ({exc.msg})") from None
        for required in ("doc_id", "title", "abstract"):
            if required not in obj:
                raise DatasetFormatError(f"{path}:{line_no}: missing field {required!r}")
        doc_id = str(obj["doc_id"])
        if not obj["title"]:
            raise DatasetFormatError(f"{path}:{line_no}: empty title")
        if doc_id in seen:
            raise DuplicateIdError(f"{path}:{line_no}: duplicate doc_id {doc_id!r}")
        seen.add(doc_id)
        records.append(DocumentRecord(doc_id, obj["title"], obj["abstract"]))
    return records


@dataclass(frozen=True)
class QuestionRecord:
    id: str
    body: str
    type: QuestionType
    exact_answer: object = None
    ideal_answer: tuple[str, ...] = ()
    documents: tuple[str, ...] = ()
    snippets: tuple[dict, ...] = ()


@dataclass
class QuestionDataset:
    questions: list[QuestionRecord]

    def __len__(self):
        return len(self.questions)

    def by_id(self, qid: str) -> QuestionRecord:
        for q in self.questions:
            if q.id == qid:
                return q
        raise KeyError(qid)


def _validate_exact(qid: str, qtype: QuestionType, exact) -> object:
    if exact is None:
        return None
    if qtype is QuestionType.SUMMARY:
        raise DatasetFormatError(f"question {qid}: summary questions carry no exact answer")
    if qtype is QuestionType.YESNO:
        if not isinstance(exact, str) or exact.lower() not in ("yes", "no"):
            raise DatasetFormatError(f"question {qid}: yes/no answer must be 'yes' or 'no'")
        return exact.lower()
    if not isinstance(exact, list):
        raise DatasetFormatError(f"question {qid}: {qtype.value} answer must be a list of name lists")
    normalized = []
    for entry in exact:
        if isinstance(entry, str):
            normalized.append([entry])
        elif isinstance(entry, list) and entry and all(isinstance(n, str) for n in entry):
            normalized.append(list(entry))
        else:
            raise DatasetFormatError(f"question {qid}: malformed answer entry {entry!r}")
    return normalized


def load_questions(path) -> QuestionDataset:
    """BioASQ-shaped question file: {"questions": [{id, body, type, ...}]}."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{path}: invalid JSON ({exc.msg})") from None
    if not isinstance(payload, dict) or not isinstance(payload.get("questions"), list):
        raise DatasetFormatError(f"{path}: expected an object with a 'questions' list")
    questions = []
    seen: set[str] = set()
    for i, obj in enumerate(payload["questions"]):
        where = f"{path}: questions[{i}]"
        for required in ("id", "body", "type"):
            if required not in obj:
                raise DatasetFormatError(f"{where}: missing field {required!r}")
        qid = str(obj["id"])
        if qid in seen:
            raise DatasetFormatError(f"{where}: duplicate id {qid!r}")
        seen.add(qid)
        try:
            qtype = QuestionType(obj["type"])
        except ValueError:
            raise DatasetFormatError(f"{where}: unknown type {obj['type']!r}") from None
        exact = _validate_exact(qid, qtype, obj.get("exact_answer"))
        ideal = obj.get("ideal_answer") or []
        if isinstance(ideal, str):
            ideal = [ideal]
        snippets = tuple(obj.get("snippets") or ())
        for s in snippets:
            if not isinstance(s, dict) or "document" not in s or "text" not in s:
                raise DatasetFormatError(f"{where}: snippets need 'document' and 'text'")
        questions.append(
            QuestionRecord(
                qid,
                obj["body"],
                qtype,
                exact_answer=exact,
                ideal_answer=tuple(ideal),
                documents=tuple(str(d) for d in obj.get("documents") or ()),
                snippets=snippets,
            )
        )
    return QuestionDataset(questions)


def load_dep_pairs(path) -> dict[str, list[tuple[str, str, str]]]:
    """Dependency sidecar: question_id, relation, head, dependent per line.

    Parses are supplied externally; questions without rows simply have no
    dependency features.
    """
    pairs: dict[str, list[tuple[str, str, str]]] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 4 or not all(p.strip() for p in parts):
            raise DatasetFormatError(
                f"{path}:{line_no}: expected 'question_id<TAB>rel<TAB>head<TAB>dependent'"
            )
        qid, rel, head, dep = (p.strip() for p in parts)
        pairs.setdefault(qid, []).append((rel, head, dep))
    return pairs


def load_topic_questions(path) -> list[tuple[str, str, set[str]]]:
    """Topic-labeled questions: [{"id", "body", "topics": [...]}]."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{path}: invalid JSON ({exc.msg})") from None
    rows = []
    for i, obj in enumerate(payload.get("questions", [])):
        if "body" not in obj or "topics" not in obj:
            raise DatasetFormatError(f"{path}: questions[{i}] needs 'body' and 'topics'")
        rows.append((str(obj.get("id", i)), obj["body"], set(obj["topics"])))
    return rows


@dataclass
class ResourceBundle:
    concept_lexicon: ConceptLexicon
    graph: ConceptGraph
    sentiment: SentimentLexicon
    stopwords: set[str]
    tag_lexicon: TagLexicon
    abbreviations: set[str]
    patterns: list[Pattern]
    corpus_path: Path | None = None
    paths: dict[str, str] = field(default_factory=dict)
    hashes: dict[str, str] = field(default_factory=dict)


_MANIFEST_KEYS = ("corpus", "lexicon", "graph", "sentiment", "stopwords", "tags", "abbreviations", "patterns")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def load_resources(manifest_path) -> ResourceBundle:
    """Load every resource listed in a manifest; paths resolve relative to it.

    Cross-references are checked here: pattern synonym sets must resolve
    (enforced by the pattern parser) and every hierarchy edge must name a
    concept from the lexicon.
    """
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{manifest_path}: invalid JSON ({exc.msg})") from None
    missing = [k for k in _MANIFEST_KEYS if k not in manifest]
    if missing:
        raise DatasetFormatError(f"{manifest_path}: manifest missing entries: {', '.join(missing)}")
    base = manifest_path.parent
    paths = {k: base / manifest[k] for k in _MANIFEST_KEYS}
    for key, p in paths.items():
        if not p.exists():
            raise FileNotFoundError(f"{manifest_path}: {key} file not found: {p}")

    lexicon = ConceptLexicon.from_file(paths["lexicon"])
    graph = ConceptGraph.from_file(paths["graph"])
    for cui in sorted(graph.nodes):
        if cui not in lexicon:
            raise DatasetFormatError(f"{paths['graph']}: edge references unknown cui {cui}")
    if "model" in manifest:  # optional pretrained model reference
        model_path = base / manifest["model"]
        if model_path.exists():
            paths["model"] = model_path
    bundle = ResourceBundle(
        concept_lexicon=lexicon,
        graph=graph,
        sentiment=SentimentLexicon.from_file(paths["sentiment"]),
        stopwords=load_stopwords(paths["stopwords"]),
        tag_lexicon=TagLexicon.from_file(paths["tags"]),
        abbreviations=load_abbreviations(paths["abbreviations"]),
        patterns=load_patterns(paths["patterns"]),
        corpus_path=paths["corpus"],
        paths={k: str(p) for k, p in paths.items()},
        hashes={k: _sha256(p) for k, p in paths.items()},
    )
    return bundle


def default_manifest_path() -> Path:
    return Path(__file__).parent / "resources" / "manifest.json"


# ---------------------------------------------------------------------------
# Index persistence
# ---------------------------------------------------------------------------

def save_index(index: IndexedCorpus, path) -> None:
    """Write an index as deterministic JSON (sorted keys, fixed layout)."""
    from .retrieval import DEFAULT_B, DEFAULT_K1

    payload = {
        "version": INDEX_FORMAT_VERSION,
        "mode": index.mode,
        "k1_default": DEFAULT_K1,
        "b_default": DEFAULT_B,
        "n_units": index.n_units,
        "avg_len": index.avg_len,
        "unit_order": index.unit_order,
        "lengths": index.lengths,
        "postings": index.postings,
    }
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8"
    )


def load_index(path) -> IndexedCorpus:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    version = payload.get("version")
    if version != INDEX_FORMAT_VERSION:
        raise IndexVersionError(version, INDEX_FORMAT_VERSION)
    index = IndexedCorpus(mode=payload["mode"])
    index.unit_order = list(payload["unit_order"])
    index.lengths = {k: int(v) for k, v in payload["lengths"].items()}
    index.postings = {
        term: {uid: int(tf) for uid, tf in units.items()}
        for term, units in payload["postings"].items()
    }
    return index
