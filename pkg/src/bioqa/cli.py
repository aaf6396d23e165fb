"""Command-line surface for the pipeline.

Subcommands: validate, index, train-type, train-topics, classify,
retrieve-docs, retrieve-passages, answer, eval, repl. Every randomized
step takes --seed and defaults to 42.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import answer as answer_mod
from . import evalkit, ingest, qclass, retrieval
from .answer import PipelineConfig, answer_pipeline, answer_to_json
from .qclass import FeatureExtractor

USAGE_ERROR = 2


class CliError(Exception):
    pass


def _add_common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # The same flags are accepted before and after the subcommand; the
    # subparser copies use SUPPRESS so they never clobber earlier values.
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--manifest", default=d(str(ingest.default_manifest_path())),
                        help="resource manifest (default: bundled mini resources)")
    parser.add_argument("--index", default=d(None),
                        help="path to a saved index (built from the corpus when omitted)")
    parser.add_argument("--model", default=d(None), help="path to a saved model")
    parser.add_argument("--seed", type=int, default=d(42))
    parser.add_argument("--format", choices=("json", "text"), default=d("json"))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bioqa", description=__doc__)
    _add_common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_parser(name, **kwargs):
        p = sub.add_parser(name, **kwargs)
        _add_common(p, suppress=True)
        return p

    add_parser("validate", help="load and check every resource in the manifest")

    p = add_parser("index", help="build the document index and save it")
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("document", "passage"), default="document")

    p = add_parser("train-type", help="train the question type model")
    p.add_argument("--questions", help="typed question dataset (default: bundled)")
    p.add_argument("--space", choices=qclass.FEATURE_SPACES, default="patterns")
    p.add_argument("--C", type=float, default=1.01)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--out", required=True)

    p = add_parser("train-topics", help="train the per-topic binary models")
    p.add_argument("--questions", help="topic-labeled question dataset (default: bundled)")
    p.add_argument("--deps", help="dependency sidecar TSV for BOSDR features")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--out", required=True)

    p = add_parser("classify", help="classify questions with a saved model")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--question")
    group.add_argument("--dataset")

    p = add_parser("retrieve-docs", help="concept query + search + rerank")
    p.add_argument("--question", required=True)
    p.add_argument("--retrieve-depth", type=int, default=retrieval.DEFAULT_RETRIEVE_DEPTH)
    p.add_argument("--top-docs", type=int, default=retrieval.DEFAULT_TOP_DOCS)
    p.add_argument("--k1", type=float, default=retrieval.DEFAULT_K1)
    p.add_argument("--b", type=float, default=retrieval.DEFAULT_B)

    p = add_parser("retrieve-passages", help="sentence passages ranked for a question")
    p.add_argument("--question", required=True)
    p.add_argument("--retrieve-depth", type=int, default=retrieval.DEFAULT_RETRIEVE_DEPTH)
    p.add_argument("--top-docs", type=int, default=retrieval.DEFAULT_TOP_DOCS)
    p.add_argument("--top-passages", type=int, default=retrieval.DEFAULT_TOP_PASSAGES)
    p.add_argument("--k1", type=float, default=retrieval.DEFAULT_K1)
    p.add_argument("--b", type=float, default=retrieval.DEFAULT_B)

    p = add_parser("answer", help="full pipeline for one question or a dataset")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--question")
    group.add_argument("--dataset")
    p.add_argument("--out", help="write a run file accepted by eval")
    p.add_argument("--retrieve-depth", type=int, default=retrieval.DEFAULT_RETRIEVE_DEPTH)
    p.add_argument("--top-docs", type=int, default=retrieval.DEFAULT_TOP_DOCS)
    p.add_argument("--top-passages", type=int, default=retrieval.DEFAULT_TOP_PASSAGES)
    p.add_argument("--k1", type=float, default=retrieval.DEFAULT_K1)
    p.add_argument("--b", type=float, default=retrieval.DEFAULT_B)
    p.add_argument("--list-cap", type=int, default=answer_mod.DEFAULT_LIST_CAP)

    p = add_parser("eval", help="score a run file against gold data")
    p.add_argument("--gold", required=True)
    p.add_argument("--run", required=True)
    p.add_argument("--metrics", help="comma-separated metric name prefixes to report")
    p.add_argument("--rouge-beta", type=float, default=None)
    p.add_argument("--rouge-stem", action="store_true")
    p.add_argument("--max-skip", type=int, default=evalkit.DEFAULT_MAX_SKIP)
    p.add_argument("--out")

    add_parser("repl", help="interactive loop: one question per line")
    return parser


def _check_ranges(args) -> None:
    k1 = getattr(args, "k1", None)
    b = getattr(args, "b", None)
    C = getattr(args, "C", None)
    if k1 is not None and k1 <= 0:
        raise CliError(f"--k1 must be positive, got {k1}")
    if b is not None and not 0 <= b <= 1:
        raise CliError(f"--b must lie in [0, 1], got {b}")
    if C is not None and C <= 0:
        raise CliError(f"--C must be positive, got {C}")


def _load_bundle(args):
    return ingest.load_resources(args.manifest)


def _load_corpus_docs(bundle):
    docs = ingest.load_corpus(bundle.corpus_path)
    return {d.doc_id: d for d in docs}


def _document_index(args, bundle, documents):
    if args.index and Path(args.index).exists():
        return ingest.load_index(args.index)
    units = [(d.doc_id, f"{d.title} {d.abstract}") for d in documents.values()]
    return retrieval.build_index(units, "document", bundle.stopwords, bundle.concept_lexicon)


def _emit(args, payload, text_renderer=None):
    if args.format == "text" and text_renderer is not None:
        print(text_renderer(payload))
    else:
        print(json.dumps(payload, ensure_ascii=False))


def cmd_validate(args) -> int:
    bundle = _load_bundle(args)
    documents = ingest.load_corpus(bundle.corpus_path)
    report = {
        "manifest": str(args.manifest),
        "resources": {k: bundle.hashes[k] for k in sorted(bundle.hashes)},
        "documents": len(documents),
        "concepts": len(bundle.concept_lexicon),
        "patterns": len(bundle.patterns),
        "status": "ok",
    }
    _emit(args, report, lambda r: "\n".join(f"{k}: {v}" for k, v in r.items()))
    return 0


def cmd_index(args) -> int:
    bundle = _load_bundle(args)
    documents = _load_corpus_docs(bundle)
    if args.mode == "passage":
        candidates = retrieval.extract_passages(list(documents.values()), bundle.abbreviations)
        units = [(f"{c.doc_id}#{c.sent_index}", c.text) for c in candidates]
    else:
        units = [(d.doc_id, f"{d.title} {d.abstract}") for d in documents.values()]
    index = retrieval.build_index(units, args.mode, bundle.stopwords, bundle.concept_lexicon)
    ingest.save_index(index, args.out)
    _emit(args, {"indexed_units": index.n_units, "mode": index.mode, "out": args.out})
    return 0


def _typed_examples(bundle, dataset, space):
    extractor = FeatureExtractor(bundle.tag_lexicon, bundle.patterns)
    return [(extractor.extract(q.body, space), q.type) for q in dataset.questions]


def cmd_train_type(args) -> int:
    bundle = _load_bundle(args)
    questions_path = args.questions or Path(__file__).parent / "resources" / "questions.json"
    dataset = ingest.load_questions(questions_path)
    examples = _typed_examples(bundle, dataset, args.space)
    model = qclass.train_type_classifier(examples, args.space, C=args.C, seed=args.seed, epochs=args.epochs)
    qclass.save_model(model, args.out)
    acc = qclass.training_accuracy(model, examples)
    _emit(args, {"out": args.out, "questions": len(dataset), "space": args.space,
                 "seed": args.seed, "training_accuracy": acc})
    return 0


def cmd_train_topics(args) -> int:
    bundle = _load_bundle(args)
    questions_path = args.questions or Path(__file__).parent / "resources" / "topic_questions.json"
    rows = ingest.load_topic_questions(questions_path)
    dep_pairs = ingest.load_dep_pairs(args.deps) if args.deps else {}
    config = {"BOW", "BOB", "BOS", "BOCST"}
    if dep_pairs:
        config.add("BOSDR")
    examples = [
        (
            qclass.extract_topic_features(
                body, config, tag_lexicon=bundle.tag_lexicon,
                stopwords=bundle.stopwords, concept_lexicon=bundle.concept_lexicon,
                dep_pairs=dep_pairs.get(qid),
            ),
            topics,
        )
        for qid, body, topics in rows
    ]
    model_set = qclass.train_topic_models(examples, seed=args.seed, epochs=args.epochs)
    qclass.save_model(model_set, args.out)
    _emit(args, {"out": args.out, "questions": len(rows), "topics": len(model_set.models), "seed": args.seed})
    return 0


def _require_model(args):
    if not args.model:
        raise CliError("this command needs --model (train one with train-type)")
    if not Path(args.model).exists():
        raise CliError(f"model file not found: {args.model}")
    return qclass.load_model(args.model)


def cmd_classify(args) -> int:
    bundle = _load_bundle(args)
    model = _require_model(args)
    extractor = FeatureExtractor(bundle.tag_lexicon, bundle.patterns)
    if args.question is not None:
        rows = [("question-1", args.question)]
    else:
        rows = [(q.id, q.body) for q in ingest.load_questions(args.dataset).questions]
    for qid, body in rows:
        if isinstance(model, qclass.TopicModelSet):
            features = qclass.extract_topic_features(
                body, {"BOW", "BOB", "BOS", "BOCST"},
                tag_lexicon=bundle.tag_lexicon, stopwords=bundle.stopwords,
                concept_lexicon=bundle.concept_lexicon,
            )
            topics = sorted(qclass.classify_topics(model, features))
            _emit(args, {"id": qid, "topics": topics}, lambda r: f"{r['id']}\t{','.join(r['topics'])}")
        else:
            qtype = qclass.classify_type(model, body, extractor)
            _emit(args, {"id": qid, "type": qtype.value}, lambda r: f"{r['id']}\t{r['type']}")
    return 0


def cmd_retrieve_docs(args) -> int:
    bundle = _load_bundle(args)
    documents = _load_corpus_docs(bundle)
    index = _document_index(args, bundle, documents)
    query = retrieval.formulate_query(args.question, bundle.concept_lexicon, bundle.stopwords)
    result = retrieval.search(index, query, args.retrieve_depth, bundle.stopwords,
                              bundle.concept_lexicon, k1=args.k1, b=args.b)
    retrieved = [documents[sd.doc_id] for sd in result.docs if sd.doc_id in documents]
    reranked = retrieval.rerank_documents(args.question, retrieved, bundle.concept_lexicon,
                                          bundle.graph, args.top_docs)
    payload = {
        "question": args.question,
        "query": {"concept_terms": list(query.concept_terms), "raw_terms": list(query.raw_terms)},
        "relaxed": result.relaxed,
        "documents": [{"document": sd.doc_id, "score": sd.score, "rank": sd.rank} for sd in reranked],
    }
    _emit(args, payload, lambda r: "\n".join(f"{d['rank']:>3}  {d['document']}  {d['score']:.4f}" for d in r["documents"]))
    return 0


def _retrieve_passages(args, bundle, documents, index):
    query = retrieval.formulate_query(args.question, bundle.concept_lexicon, bundle.stopwords)
    result = retrieval.search(index, query, args.retrieve_depth, bundle.stopwords,
                              bundle.concept_lexicon, k1=args.k1, b=args.b)
    retrieved = [documents[sd.doc_id] for sd in result.docs if sd.doc_id in documents]
    reranked = retrieval.rerank_documents(args.question, retrieved, bundle.concept_lexicon,
                                          bundle.graph, args.top_docs)
    by_id = {d.doc_id: d for d in retrieved}
    top_docs = [by_id[sd.doc_id] for sd in reranked]
    candidates = retrieval.extract_passages(top_docs, bundle.abbreviations)
    return retrieval.rank_passages(args.question, candidates, bundle.stopwords,
                                   bundle.concept_lexicon, k1=args.k1, b=args.b,
                                   top_n=args.top_passages)


def cmd_retrieve_passages(args) -> int:
    bundle = _load_bundle(args)
    documents = _load_corpus_docs(bundle)
    index = _document_index(args, bundle, documents)
    ranked = _retrieve_passages(args, bundle, documents, index)
    payload = {
        "question": args.question,
        "passages": [
            {"document": sp.passage.doc_id, "text": sp.passage.text, "rank": sp.rank, "score": sp.score}
            for sp in ranked
        ],
    }
    _emit(args, payload, lambda r: "\n".join(f"{p['rank']:>3}  ({p['document']})  {p['text']}" for p in r["passages"]))
    return 0


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(
        retrieve_depth=args.retrieve_depth,
        top_docs=args.top_docs,
        top_passages=args.top_passages,
        k1=args.k1,
        b=args.b,
        list_cap=args.list_cap,
    )


def _render_answer(obj: dict) -> str:
    lines = [f"question {obj['id']}: type {obj['type']}"]
    if obj["exact_answer"] is not None:
        lines.append(f"exact: {json.dumps(obj['exact_answer'], ensure_ascii=False)}")
    lines.append(f"ideal: {obj['ideal_answer']}")
    for s in obj["snippets"][:3]:
        lines.append(f"  [{s['rank']}] ({s['document']}) {s['text']}")
    return "\n".join(lines)


def cmd_answer(args) -> int:
    if args.question is not None and not args.question.strip():
        raise CliError("empty question")
    bundle = _load_bundle(args)
    model = _require_model(args)
    if isinstance(model, qclass.TopicModelSet):
        raise CliError("answer needs a question type model, not a topics model")
    documents = _load_corpus_docs(bundle)
    index = _document_index(args, bundle, documents)
    config = _pipeline_config(args)
    if args.question is not None:
        rows = [("question-1", args.question)]
    else:
        rows = [(q.id, q.body) for q in ingest.load_questions(args.dataset).questions]
    outputs = []
    for qid, body in rows:
        full = answer_pipeline(body, documents, index, model, bundle, config)
        obj = answer_to_json(full, qid)
        outputs.append(obj)
        _emit(args, obj, _render_answer)
    if args.out:
        Path(args.out).write_text(
            json.dumps({"questions": outputs}, ensure_ascii=False, indent=1) + "\n",
            encoding="utf-8",
        )
    return 0


def _load_run_entries(path) -> list[dict]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError:
        # JSON-lines run: one answer object per line.
        try:
            return [json.loads(line) for line in text.splitlines() if line.strip()]
        except json.JSONDecodeError as exc:
            raise ingest.DatasetFormatError(f"{path}: invalid JSON ({exc.msg})") from None
    if isinstance(payload, dict) and isinstance(payload.get("questions"), list):
        return payload["questions"]
    if isinstance(payload, list):
        return payload
    raise ingest.DatasetFormatError(f"{path}: expected a run list or {{'questions': [...]}} object")


def cmd_eval(args) -> int:
    gold = ingest.load_questions(args.gold)
    run = _load_run_entries(args.run)
    report = evalkit.evaluate_run(
        gold, run, max_skip=args.max_skip, rouge_beta=args.rouge_beta, rouge_stem=args.rouge_stem
    )
    if args.metrics:
        wanted = [m.strip() for m in args.metrics.split(",") if m.strip()]
        report.metrics = {
            k: v for k, v in report.metrics.items() if any(k.startswith(w) for w in wanted)
        }
    payload = {"metrics": report.metrics, "config": report.config, "per_question": report.per_question}
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    _emit(args, payload, lambda r: report.render_text())
    return 0


def cmd_repl(args) -> int:
    bundle = _load_bundle(args)
    model = _require_model(args)
    documents = _load_corpus_docs(bundle)
    index = _document_index(args, bundle, documents)
    config = PipelineConfig()
    print("bioqa repl; one question per line, empty line or EOF quits", file=sys.stderr)
    for line in sys.stdin:
        question = line.strip()
        if not question:
            break
        full = answer_pipeline(question, documents, index, model, bundle, config)
        obj = answer_to_json(full, "repl")
        if obj["exact_answer"] is not None:
            print(f"exact: {json.dumps(obj['exact_answer'], ensure_ascii=False)}")
        print(f"ideal: {obj['ideal_answer']}")
        for s in obj["snippets"][:3]:
            print(f"  [{s['rank']}] ({s['document']}) {s['text']}")
    return 0


_COMMANDS = {
    "validate": cmd_validate,
    "index": cmd_index,
    "train-type": cmd_train_type,
    "train-topics": cmd_train_topics,
    "classify": cmd_classify,
    "retrieve-docs": cmd_retrieve_docs,
    "retrieve-passages": cmd_retrieve_passages,
    "answer": cmd_answer,
    "eval": cmd_eval,
    "repl": cmd_repl,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        _check_ranges(args)
        return _COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (ingest.DatasetFormatError, ingest.IndexVersionError, qclass.ModelFormatError,
            FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
