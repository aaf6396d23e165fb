"""bioqa: a self-contained biomedical question answering pipeline.

Question type and topic classification, concept-aware document and
passage retrieval over a local corpus, exact and ideal answer extraction,
and the evaluation metrics to score runs against gold data.
"""

__version__ = "0.1.0"
