import warnings
from pathlib import Path

import pytest

from bioqa import ingest, qclass, retrieval
from bioqa.qclass import FeatureExtractor

RESOURCE_DIR = Path(__file__).resolve().parents[1] / "src" / "bioqa" / "resources"
DATA_DIR = Path(__file__).resolve().parent / "data"


@pytest.fixture(scope="session")
def bundle():
    return ingest.load_resources(RESOURCE_DIR / "manifest.json")


@pytest.fixture(scope="session")
def corpus(bundle):
    return {d.doc_id: d for d in ingest.load_corpus(bundle.corpus_path)}


@pytest.fixture(scope="session")
def extractor(bundle):
    return FeatureExtractor(bundle.tag_lexicon, bundle.patterns)


@pytest.fixture(scope="session")
def appendix_questions():
    return ingest.load_questions(RESOURCE_DIR / "questions.json")


@pytest.fixture(scope="session")
def typed_examples(appendix_questions, extractor):
    return [(extractor.extract(q.body, "patterns"), q.type) for q in appendix_questions.questions]


@pytest.fixture(scope="session")
def type_model(typed_examples):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return qclass.train_type_classifier(typed_examples, "patterns", C=1.01, seed=42)


@pytest.fixture(scope="session")
def doc_index(bundle, corpus):
    units = [(d.doc_id, f"{d.title} {d.abstract}") for d in corpus.values()]
    return retrieval.build_index(units, "document", bundle.stopwords, bundle.concept_lexicon)
