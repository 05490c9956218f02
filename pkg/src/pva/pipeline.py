"""Text -> class probabilities for either model family.

The CLI's batch evaluation and the gateway both go through ``Classifier``
so online and offline predictions share one code path.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np

from .errors import FingerprintMismatch
from .ftclass import EmbeddingModel, doc_feature_ids, ft_probabilities
from .linclass import LinearModel, rank
from .modelstore import Model, load_model
from .textproc import Vocabulary, tfidf_vector, tokenize


class Classifier:
    def __init__(self, model: Model, vocab: Vocabulary):
        if model.vocab_fingerprint != vocab.fingerprint():
            raise FingerprintMismatch("model was trained against a different vocabulary")
        expected = model.num_features if isinstance(model, LinearModel) else model.vocab_size
        if expected != len(vocab):
            raise FingerprintMismatch(f"model expects {expected} vocabulary entries, got {len(vocab)}")
        self.model = model
        self.vocab = vocab
        self.idf = vocab.idf()
        words = (model.config or {}).get("stopwords")
        self.stopwords: Optional[frozenset[str]] = frozenset(words) if words else None

    @classmethod
    def from_file(cls, path: str | Path, expected_kind: Optional[str] = None) -> "Classifier":
        model, vocab = load_model(path, expected_kind)
        return cls(model, vocab)

    @property
    def label_names(self) -> tuple[str, ...]:
        return self.model.label_names

    @property
    def kind(self) -> str:
        return self.model.kind

    def tokens(self, text: str) -> list[str]:
        return tokenize(text, self.stopwords)

    def probabilities_from_tokens(self, tokens: list[str]) -> np.ndarray:
        if isinstance(self.model, EmbeddingModel):
            ids = doc_feature_ids(tokens, self.vocab, self.model.max_n, self.model.buckets)
            return ft_probabilities(self.model, ids)
        return self.model.probabilities(tfidf_vector(tokens, self.vocab, self.idf))

    def probabilities(self, text: str) -> np.ndarray:
        return self.probabilities_from_tokens(self.tokens(text))

    def rank(self, text: str, top_k: Optional[int] = None) -> list[tuple[int, float]]:
        return rank(self.probabilities(text), top_k)

    def predict(self, text: str) -> int:
        return self.rank(text, 1)[0][0]
