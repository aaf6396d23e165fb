"""Evaluation metrics and the run-versus-gold scorer.

Classification accuracy and P/R/F1, ranked-retrieval AP/MAP, exact-answer
accuracy/MRR/list-F1 with synonym-aware matching, and ROUGE-2/ROUGE-SU4
for ideal answers.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field

from .textproc import stem as porter_stem

DEFAULT_MAX_SKIP = 4


class UnknownQuestionError(ValueError):
    def __init__(self, ids):
        self.ids = list(ids)
        super().__init__(f"run references unknown question id(s): {', '.join(self.ids)}")


def accuracy(predictions, gold) -> float:
    """Fraction of positions where prediction equals gold."""
    if len(predictions) != len(gold):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs {len(gold)} gold")
    if not gold:
        return 0.0
    return sum(1 for p, g in zip(predictions, gold) if p == g) / len(gold)


def prf1(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Precision, recall, F1 with the 0/0 -> 0 convention."""
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be non-negative")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def average_precision(ranked_ids, gold_ids) -> float:
    """Rank-weighted precision: sum of P(r) at relevant ranks over |gold|."""
    gold = set(gold_ids)
    if not gold:
        raise ValueError("gold set must not be empty")
    hits = 0
    total = 0.0
    for r, item in enumerate(ranked_ids, 1):
        if item in gold:
            hits += 1
            total += hits / r
    return total / len(gold)


def mean_average_precision(average_precisions) -> float:
    """Arithmetic mean of per-question average precision."""
    values = list(average_precisions)
    if not values:
        raise ValueError("no questions to average over")
    return sum(values) / len(values)


def mrr(per_question_ranks) -> float:
    """Mean of 1/rank; questions where the answer never appears score 0."""
    ranks = list(per_question_ranks)
    if not ranks:
        return 0.0
    return sum(1.0 / r for r in ranks if r is not None) / len(ranks)


def _normalize_name(name: str) -> str:
    return " ".join(name.lower().split())


def _as_name_set(item) -> set[str]:
    # An answer item is either a name or a name plus synonyms.
    if isinstance(item, str):
        return {_normalize_name(item)}
    return {_normalize_name(n) for n in item}


def list_question_counts(predicted, gold) -> tuple[int, int, int]:
    """(tp, fp, fn) for one list question with synonym-aware matching.

    gold is a list of accepted-name sets; a prediction matches a gold
    entry when any of its names equals any accepted name. Matches count
    each gold entry once.
    """
    gold_sets = [_as_name_set(entry) for entry in gold]
    matched_gold: set[int] = set()
    fp = 0
    for item in predicted:
        names = _as_name_set(item)
        hit = None
        for gi, accepted in enumerate(gold_sets):
            if names & accepted:
                hit = gi
                break
        if hit is None:
            fp += 1
        else:
            matched_gold.add(hit)
    tp = len(matched_gold)
    fn = len(gold_sets) - tp
    return tp, fp, fn


def list_metrics(per_question) -> tuple[float, float, float]:
    """Mean precision, recall and F1 over (predicted, gold) list pairs."""
    rows = [prf1(*list_question_counts(pred, gold)) for pred, gold in per_question]
    if not rows:
        return 0.0, 0.0, 0.0
    n = len(rows)
    return (
        sum(r[0] for r in rows) / n,
        sum(r[1] for r in rows) / n,
        sum(r[2] for r in rows) / n,
    )


def first_answer_rank(candidates, gold) -> int | None:
    """1-based rank of the first candidate naming a gold answer, else None."""
    accepted: set[str] = set()
    for entry in gold:
        accepted |= _as_name_set(entry)
    for r, item in enumerate(candidates, 1):
        if _as_name_set(item) & accepted:
            return r
    return None


# ---------------------------------------------------------------------------
# ROUGE
# ---------------------------------------------------------------------------

_WORD_RE = re.compile(r"[a-z0-9]+")


def _rouge_tokens(text: str, stem_tokens: bool) -> list[str]:
    tokens = _WORD_RE.findall(text.lower())
    if stem_tokens:
        tokens = [porter_stem(t) for t in tokens]
    return tokens


def _score_from_counts(matches: float, ref_total: float, cand_total: float, beta) -> float:
    recall = matches / ref_total if ref_total else 0.0
    if beta is None:
        return recall
    precision = matches / cand_total if cand_total else 0.0
    if precision + recall == 0.0:
        return 0.0
    b2 = beta * beta
    return (1 + b2) * precision * recall / (recall + b2 * precision)


def _rouge_units_score(cand_units: Counter, ref_units_per_ref: list[Counter], multiref: str, beta) -> float:
    cand_total = sum(cand_units.values())
    per_ref = []
    for ref_units in ref_units_per_ref:
        matches = sum(min(c, ref_units[u]) for u, c in cand_units.items())
        per_ref.append((matches, sum(ref_units.values())))
    if multiref == "pool":
        matches = sum(m for m, _ in per_ref)
        ref_total = sum(t for _, t in per_ref)
        return _score_from_counts(matches, ref_total, cand_total * max(len(per_ref), 1), beta)
    scores = [_score_from_counts(m, t, cand_total, beta) for m, t in per_ref]
    if not scores:
        return 0.0
    if multiref == "average":
        return sum(scores) / len(scores)
    if multiref == "max":
        return max(scores)
    raise ValueError(f"multiref must be max, average or pool, got {multiref!r}")


def rouge_n(candidate: str, references, n: int = 2, *, multiref: str = "max", beta=None, stem_tokens: bool = False) -> float:
    """Recall-oriented n-gram overlap between a candidate and references.

    Clipped n-gram matches over reference n-gram counts; with several
    references the score is the best one by default. beta switches to an
    F-measure with the given recall weight.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if isinstance(references, str):
        references = [references]
    cand = _rouge_tokens(candidate, stem_tokens)
    cand_units = Counter(tuple(cand[i : i + n]) for i in range(len(cand) - n + 1))
    ref_units = [
        Counter(tuple(toks[i : i + n]) for i in range(len(toks) - n + 1))
        for toks in (_rouge_tokens(r, stem_tokens) for r in references)
    ]
    return _rouge_units_score(cand_units, ref_units, multiref, beta)


def _su_units(tokens: list[str], max_skip: int) -> Counter:
    # Skip-bigrams (at most max_skip tokens in between) plus unigrams,
    # counted together as one multiset.
    units: Counter = Counter()
    for i, tok in enumerate(tokens):
        units[("u", tok)] += 1
        for j in range(i + 1, min(i + max_skip + 2, len(tokens))):
            units[("s", tok, tokens[j])] += 1
    return units


def rouge_su(candidate: str, references, max_skip: int = DEFAULT_MAX_SKIP, *, multiref: str = "max", beta=None, stem_tokens: bool = False) -> float:
    """Skip-bigram plus unigram overlap (ROUGE-SU)."""
    if max_skip < 0:
        raise ValueError(f"max_skip must be >= 0, got {max_skip}")
    if isinstance(references, str):
        references = [references]
    cand_units = _su_units(_rouge_tokens(candidate, stem_tokens), max_skip)
    ref_units = [_su_units(_rouge_tokens(r, stem_tokens), max_skip) for r in references]
    return _rouge_units_score(cand_units, ref_units, multiref, beta)


# ---------------------------------------------------------------------------
# Run evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvalReport:
    metrics: dict[str, float]
    per_question: dict[str, dict]
    config: dict = field(default_factory=dict)

    def render_text(self) -> str:
        width = max((len(k) for k in self.metrics), default=0)
        lines = ["metric".ljust(width) + "  value", "-" * (width + 9)]
        for key in sorted(self.metrics):
            lines.append(f"{key.ljust(width)}  {self.metrics[key]:.4f}")
        return "\n".join(lines)


def _normalize_snippet(document: str, text: str) -> tuple[str, str]:
    return str(document), " ".join(text.split()).lower()


def _mean(values) -> float:
    values = list(values)
    return sum(values) / len(values) if values else 0.0


def evaluate_run(
    gold_dataset,
    run_entries: list[dict],
    *,
    max_skip: int = DEFAULT_MAX_SKIP,
    rouge_beta=None,
    rouge_stem: bool = False,
    multiref: str = "max",
) -> EvalReport:
    """Score a run (list of answer objects) against a gold dataset.

    Gold questions with no run entry count as unanswered. Run entries
    whose id is not in the gold set are an error.
    """
    gold_by_id = {q.id: q for q in gold_dataset.questions}
    unknown = [e.get("id", "<missing>") for e in run_entries if e.get("id") not in gold_by_id]
    if unknown:
        raise UnknownQuestionError(unknown)
    run_by_id = {e["id"]: e for e in run_entries}

    per_question: dict[str, dict] = {}
    yesno_pairs: list[tuple[str | None, str]] = []
    factoid_ranks: list[int | None] = []
    list_pairs = []
    rouge2_scores: list[float] = []
    rougesu_scores: list[float] = []
    doc_rows = []
    snip_rows = []

    for q in gold_dataset.questions:
        entry = run_by_id.get(q.id, {})
        detail: dict = {"type": q.type.value}

        if q.type.value == "yesno" and q.exact_answer is not None:
            predicted = entry.get("exact_answer")
            predicted = predicted.lower() if isinstance(predicted, str) else None
            yesno_pairs.append((predicted, q.exact_answer))
            detail["yesno_correct"] = predicted == q.exact_answer
        elif q.type.value == "factoid" and q.exact_answer:
            rank = first_answer_rank(entry.get("exact_answer") or [], q.exact_answer)
            factoid_ranks.append(rank)
            detail["factoid_rank"] = rank
        elif q.type.value == "list" and q.exact_answer:
            predicted = entry.get("exact_answer") or []
            list_pairs.append((predicted, q.exact_answer))
            detail["list_prf1"] = prf1(*list_question_counts(predicted, q.exact_answer))

        if q.ideal_answer:
            candidate = entry.get("ideal_answer") or ""
            if isinstance(candidate, list):
                candidate = candidate[0] if candidate else ""
            r2 = rouge_n(candidate, q.ideal_answer, 2, multiref=multiref, beta=rouge_beta, stem_tokens=rouge_stem)
            rsu = rouge_su(candidate, q.ideal_answer, max_skip, multiref=multiref, beta=rouge_beta, stem_tokens=rouge_stem)
            rouge2_scores.append(r2)
            rougesu_scores.append(rsu)
            detail["rouge_2"] = r2
            detail["rouge_su"] = rsu

        if q.documents:
            returned = list(dict.fromkeys(str(d) for d in entry.get("documents") or []))
            tp = len(set(returned) & set(q.documents))
            p, r, f1 = prf1(tp, len(set(returned)) - tp, len(set(q.documents)) - tp)
            ap = average_precision(returned, q.documents)
            doc_rows.append((p, r, f1, ap))
            detail["documents"] = {"precision": p, "recall": r, "f1": f1, "ap": ap}

        if q.snippets:
            gold_keys = [_normalize_snippet(s["document"], s["text"]) for s in q.snippets]
            returned = list(dict.fromkeys(
                _normalize_snippet(s.get("document", ""), s.get("text", ""))
                for s in entry.get("snippets") or []
            ))
            tp = len(set(returned) & set(gold_keys))
            p, r, f1 = prf1(tp, len(set(returned)) - tp, len(set(gold_keys)) - tp)
            ap = average_precision(returned, gold_keys)
            snip_rows.append((p, r, f1, ap))
            detail["snippets"] = {"precision": p, "recall": r, "f1": f1, "ap": ap}

        per_question[q.id] = detail

    metrics: dict[str, float] = {}
    if yesno_pairs:
        metrics["yesno_accuracy"] = accuracy([p for p, _ in yesno_pairs], [g for _, g in yesno_pairs])
    if factoid_ranks:
        metrics["factoid_mrr"] = mrr(factoid_ranks)
    if list_pairs:
        p, r, f1 = list_metrics(list_pairs)
        metrics["list_precision"], metrics["list_recall"], metrics["list_f1"] = p, r, f1
    if rouge2_scores:
        metrics["rouge_2"] = _mean(rouge2_scores)
        metrics["rouge_su4"] = _mean(rougesu_scores)
    if doc_rows:
        metrics["documents_precision"] = _mean(r[0] for r in doc_rows)
        metrics["documents_recall"] = _mean(r[1] for r in doc_rows)
        metrics["documents_f1"] = _mean(r[2] for r in doc_rows)
        metrics["documents_map"] = mean_average_precision(r[3] for r in doc_rows)
    if snip_rows:
        metrics["snippets_precision"] = _mean(r[0] for r in snip_rows)
        metrics["snippets_recall"] = _mean(r[1] for r in snip_rows)
        metrics["snippets_f1"] = _mean(r[2] for r in snip_rows)
        metrics["snippets_map"] = mean_average_precision(r[3] for r in snip_rows)

    config = {
        "max_skip": max_skip,
        "rouge_beta": rouge_beta,
        "rouge_stem": rouge_stem,
        "multiref": multiref,
    }
    return EvalReport(metrics, per_question, config)
