"""Hand-built statistical descriptors computed on raw (uncleaned) text."""
from __future__ import annotations

import unicodedata
from dataclasses import astuple, dataclass, fields

import numpy as np

from ..preprocess import count_sentences, is_punctuation, tokenize
from .matrix import FeatureMatrix


@dataclass(frozen=True)
class StatVector:
    char_count: float
    word_count: float
    sentence_count: float
    avg_word_length: float
    punctuation_count: float
    digit_count: float
    avg_chars_per_word: float
    punctuation_ratio: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)


STAT_COLUMNS = [f.name for f in fields(StatVector)]


def compute_stat_features(raw) -> StatVector:
    """Eight descriptors of one document; accepts a Document or a string."""
    text = raw.raw_text if hasattr(raw, "raw_text") else raw
    words = tokenize(text)
    n_chars = len(text)
    n_words = len(words)
    n_punct = sum(1 for ch in text if is_punctuation(ch))
    n_digits = sum(1 for ch in text if unicodedata.category(ch) == "Nd")
    return StatVector(
        char_count=float(n_chars),
        word_count=float(n_words),
        sentence_count=float(count_sentences(text)),
        avg_word_length=sum(len(w) for w in words) / n_words if n_words else 0.0,
        punctuation_count=float(n_punct),
        digit_count=float(n_digits),
        avg_chars_per_word=n_chars / n_words if n_words else 0.0,
        punctuation_ratio=n_punct / n_chars if n_chars else 0.0,
    )


def stat_matrix(docs) -> FeatureMatrix:
    rows = [compute_stat_features(d).as_array() for d in docs]
    values = np.vstack(rows) if rows else np.zeros((0, len(STAT_COLUMNS)))
    return FeatureMatrix("stats", list(STAT_COLUMNS), values.astype(np.float32))
