"""Word/character TF-IDF and word n-gram count vectorizers."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .matrix import FeatureMatrix

WORD_TFIDF_DEFAULTS = {"analyzer": "word", "ngram_range": (1, 2), "max_features": 5000,
                       "min_df": 3, "max_df_frac": 0.95}
CHAR_TFIDF_DEFAULTS = {"analyzer": "char", "ngram_range": (2, 4), "max_features": 1000,
                       "min_df": 3, "max_df_frac": 1.0, "cross_token": False}
NGRAM_DEFAULTS = {"analyzer": "word", "ngram_range": (1, 3), "max_features": 1000,
                  "min_df": 2, "max_df_frac": 1.0}


def word_ngrams(tokens, lo: int, hi: int) -> list:
    out = []
    n_tok = len(tokens)
    for n in range(lo, hi + 1):
        for i in range(n_tok - n + 1):
            out.append(" ".join(tokens[i:i + n]))
    return out


def char_ngrams(tokens, lo: int, hi: int, cross_token: bool = False) -> list:
    """Character n-grams of the space-joined token stream.

    By default windows never span a space, which is the same as taking the
    n-grams of each token separately.
    """
    pieces = [" ".join(tokens)] if cross_token else list(tokens)
    out = []
    for text in pieces:
        for n in range(lo, hi + 1):
            for i in range(len(text) - n + 1):
                out.append(text[i:i + n])
    return out


def _analyze(tokens, config) -> list:
    lo, hi = config["ngram_range"]
    if config["analyzer"] == "char":
        return char_ngrams(tokens, lo, hi, config.get("cross_token", False))
    return word_ngrams(tokens, lo, hi)


def _tokens_of(doc):
    return doc.tokens if hasattr(doc, "tokens") else doc


def build_vocabulary(term_lists, config) -> tuple:
    """Apply min_df / max_df / top-K and return (sorted terms, doc freq, total counts).

    Top-K keeps the most frequent terms by total count; ties go to the
    lexicographically smaller term.
    """
    n_docs = len(term_lists)
    df = Counter()
    tc = Counter()
    for terms in term_lists:
        c = Counter(terms)
        tc.update(c)
        df.update(c.keys())
    max_df = config.get("max_df_frac", 1.0) * n_docs
    kept = [t for t, d in df.items() if d >= config["min_df"] and d <= max_df]
    kept.sort(key=lambda t: (-tc[t], t))
    kept = sorted(kept[:config["max_features"]])
    return kept, df, tc


@dataclass
class TfidfModel:
    vocabulary: dict
    idf: np.ndarray
    config: dict
    n_docs: int = 0

    @property
    def terms(self):
        return sorted(self.vocabulary, key=self.vocabulary.get)


@dataclass
class CountModel:
    vocabulary: dict
    config: dict = field(default_factory=lambda: dict(NGRAM_DEFAULTS))

    @property
    def terms(self):
        return sorted(self.vocabulary, key=self.vocabulary.get)


def smoothed_idf(n_docs: int, doc_freq: int) -> float:
    return math.log((1.0 + n_docs) / (1.0 + doc_freq)) + 1.0


def _fit_tfidf(docs, config) -> TfidfModel:
    docs = list(docs)
    if not docs:
        raise ValueError("cannot fit TF-IDF on an empty corpus")
    term_lists = [_analyze(_tokens_of(d), config) for d in docs]
    terms, df, _ = build_vocabulary(term_lists, config)
    if not terms:
        raise ValueError("vocabulary is empty after document-frequency filtering")
    n = len(docs)
    idf = np.array([smoothed_idf(n, df[t]) for t in terms], dtype=np.float64)
    return TfidfModel({t: i for i, t in enumerate(terms)}, idf, dict(config), n)


def fit_word_tfidf(train_docs, **overrides) -> TfidfModel:
    return _fit_tfidf(train_docs, {**WORD_TFIDF_DEFAULTS, **overrides})


def fit_char_tfidf(train_docs, **overrides) -> TfidfModel:
    return _fit_tfidf(train_docs, {**CHAR_TFIDF_DEFAULTS, **overrides})


def apply_tfidf(model: TfidfModel, docs, set_name: str | None = None) -> FeatureMatrix:
    """TF (count / terms in document) times IDF, each row scaled to unit L2 norm."""
    docs = list(docs)
    vocab = model.vocabulary
    X = np.zeros((len(docs), len(vocab)), dtype=np.float64)
    for r, doc in enumerate(docs):
        terms = _analyze(_tokens_of(doc), model.config)
        if not terms:
            continue
        total = len(terms)
        for t, c in Counter(terms).items():
            j = vocab.get(t)
            if j is not None:
                X[r, j] = c / total
    X *= model.idf
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    np.divide(X, norms, out=X, where=norms > 0)
    if set_name is None:
        set_name = "char" if model.config["analyzer"] == "char" else "tfidf"
    return FeatureMatrix(set_name, model.terms, X.astype(np.float32), {"config": _jsonable(model.config)})


def fit_ngram_counts(train_docs, **overrides) -> CountModel:
    config = {**NGRAM_DEFAULTS, **overrides}
    docs = list(train_docs)
    if not docs:
        raise ValueError("cannot fit n-gram counts on an empty corpus")
    term_lists = [_analyze(_tokens_of(d), config) for d in docs]
    terms, _, _ = build_vocabulary(term_lists, config)
    if not terms:
        raise ValueError("vocabulary is empty after document-frequency filtering")
    return CountModel({t: i for i, t in enumerate(terms)}, config)


def apply_ngram_counts(model: CountModel, docs) -> FeatureMatrix:
    docs = list(docs)
    vocab = model.vocabulary
    X = np.zeros((len(docs), len(vocab)), dtype=np.float32)
    for r, doc in enumerate(docs):
        for t, c in Counter(_analyze(_tokens_of(doc), model.config)).items():
            j = vocab.get(t)
            if j is not None:
                X[r, j] = c
    return FeatureMatrix("ngram", model.terms, X, {"config": _jsonable(model.config)})


def _jsonable(config):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in config.items()}
