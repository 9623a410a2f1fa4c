"""CBOW word embeddings with negative sampling, plain and subword-composed.

``cbow_word`` learns one vector per vocabulary word. ``cbow_subword`` also
learns vectors for hashed character n-grams of ``<word>`` and represents a
word as its own vector plus the mean of its n-gram vectors, which lets it
embed words never seen in training.
"""
from __future__ import annotations

import logging
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from .matrix import FeatureMatrix

logger = logging.getLogger(__name__)

NEG_TABLE_SIZE = 1_000_000
DEFAULT_BUCKETS = 2 ** 21


def resolve_threads(threads=None) -> int:
    """Requested thread count, capped by ``FEATFORGE_THREADS`` when set."""
    cap = os.environ.get("FEATFORGE_THREADS")
    if threads is None:
        threads = int(cap) if cap else (os.cpu_count() or 1)
    elif cap:
        threads = min(threads, int(cap))
    return max(1, int(threads))


def fnv1a_32(text: str) -> int:
    h = 2166136261
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 16777619) & 0xFFFFFFFF
    return h


def subword_ngrams(word: str, minn: int = 3, maxn: int = 6) -> list:
    """Character n-grams of ``<word>`` with lengths minn..maxn."""
    marked = f"<{word}>"
    out = []
    for n in range(minn, maxn + 1):
        for i in range(len(marked) - n + 1):
            out.append(marked[i:i + n])
    return out


@dataclass
class EmbeddingModel:
    mode: str
    dim: int
    vocab: dict
    counts: np.ndarray
    syn0: np.ndarray
    syn1neg: np.ndarray
    config: dict
    # subword mode: global bucket id -> row of syn0, and per-word bucket rows
    bucket_rows: dict = field(default_factory=dict)
    word_subrows: list = field(default_factory=list)
    loss_trace: list = field(default_factory=list)

    def __post_init__(self):
        self._word_vectors = self._compose_vocab()

    @property
    def words(self):
        return sorted(self.vocab, key=self.vocab.get)

    def _compose_vocab(self) -> np.ndarray:
        V = len(self.vocab)
        vec = self.syn0[:V].astype(np.float64)
        if self.mode == "cbow_subword":
            for i, rows in enumerate(self.word_subrows):
                if len(rows):
                    vec[i] += self.syn0[rows].astype(np.float64).mean(axis=0)
        return vec

    @property
    def vectors(self) -> dict:
        return {w: self._word_vectors[i] for w, i in self.vocab.items()}

    def word_vector(self, word: str):
        """Vector for ``word``, or None when it cannot be embedded."""
        i = self.vocab.get(word)
        if i is not None:
            return self._word_vectors[i]
        if self.mode != "cbow_subword":
            return None
        rows = [self.bucket_rows[b] for b in self._buckets(word) if b in self.bucket_rows]
        if not rows:
            return None
        return self.syn0[rows].astype(np.float64).mean(axis=0)

    def _buckets(self, word):
        cfg = self.config
        return [fnv1a_32(g) % cfg["bucket_count"] for g in subword_ngrams(word, cfg["minn"], cfg["maxn"])]


def _tokens_of(doc):
    return doc.tokens if hasattr(doc, "tokens") else doc


def _neg_table(counts: np.ndarray, size: int = NEG_TABLE_SIZE) -> np.ndarray:
    p = counts.astype(np.float64) ** 0.75
    cum = np.cumsum(p / p.sum())
    cum[-1] = 1.0
    return np.searchsorted(cum, (np.arange(size) + 0.5) / size).astype(np.int32)


def _train(train_docs, mode, dim, window, min_count, epochs, negatives, seed, threads,
           alpha, min_alpha, minn=3, maxn=6, bucket_count=DEFAULT_BUCKETS) -> EmbeddingModel:
    sentences = [list(_tokens_of(d)) for d in train_docs]
    freq = Counter(t for s in sentences for t in s)
    kept = sorted((w for w, c in freq.items() if c >= min_count), key=lambda w: (-freq[w], w))
    if not kept:
        raise ValueError("empty token stream: nothing to train embeddings on")
    vocab = {w: i for i, w in enumerate(kept)}
    V = len(vocab)
    counts = np.array([freq[w] for w in kept], dtype=np.int64)

    bucket_rows: dict = {}
    word_subrows: list = []
    if mode == "cbow_subword":
        for w in kept:
            rows = []
            for g in subword_ngrams(w, minn, maxn):
                b = fnv1a_32(g) % bucket_count
                if b not in bucket_rows:
                    bucket_rows[b] = V + len(bucket_rows)
                rows.append(bucket_rows[b])
            word_subrows.append(np.array(rows, dtype=np.int32))
    n_rows = V + len(bucket_rows)
    sub_ptr = np.zeros(V + 1, dtype=np.int64)
    if word_subrows:
        sub_ptr[1:] = np.cumsum([len(r) for r in word_subrows])
        sub_idx = np.concatenate(word_subrows).astype(np.int32)
    else:
        sub_idx = np.zeros(0, dtype=np.int32)

    ids = [np.array([vocab[t] for t in s if t in vocab], dtype=np.int32) for s in sentences]
    ids = [s for s in ids if len(s)]
    tokens = np.concatenate(ids) if ids else np.zeros(0, dtype=np.int32)
    sent_ptr = np.zeros(len(ids) + 1, dtype=np.int64)
    sent_ptr[1:] = np.cumsum([len(s) for s in ids])

    rng = np.random.default_rng(seed)
    syn0 = ((rng.random((n_rows, dim), dtype=np.float32) - 0.5) / dim).astype(np.float32)
    syn1neg = np.zeros((V, dim), dtype=np.float32)
    table = _neg_table(counts)

    n_tok = len(tokens)
    total_work = max(1, epochs * n_tok)
    threads = resolve_threads(threads)
    n_sent = len(ids)
    state = int(seed) & 0xFFFFFFFFFFFFFFFF
    loss_trace = []
    logger.info("training %s embeddings: %d words, %d tokens, backend=%s, threads=%d",
                mode, V, n_tok, _kernels.BACKEND, threads)

    for epoch in range(epochs):
        base = epoch * n_tok
        if threads == 1 or n_sent < threads:
            state, loss, _ = _kernels.train_block(
                syn0, syn1neg, sub_ptr, sub_idx, tokens, sent_ptr, 0, n_sent, table,
                window, negatives, alpha, min_alpha, base, total_work, state)
        else:
            bounds = np.linspace(0, n_sent, threads + 1).astype(int)

            def run(k):
                lo, hi = int(bounds[k]), int(bounds[k + 1])
                chunk_seed = (int(seed) * 1_000_003 + epoch * 7919 + k) & 0xFFFFFFFFFFFFFFFF
                return _kernels.train_block(
                    syn0, syn1neg, sub_ptr, sub_idx, tokens, sent_ptr, lo, hi, table,
                    window, negatives, alpha, min_alpha, base + int(sent_ptr[lo]), total_work, chunk_seed)

            with ThreadPoolExecutor(max_workers=threads) as pool:
                loss = sum(r[1] for r in pool.map(run, range(threads)))
        loss_trace.append(loss / max(1, n_tok))

    config = {"dim": dim, "window": window, "min_count": min_count, "epochs": epochs,
              "negatives": negatives, "seed": seed, "threads": threads, "alpha": alpha,
              "min_alpha": min_alpha}
    if mode == "cbow_subword":
        config.update(minn=minn, maxn=maxn, bucket_count=bucket_count)
    return EmbeddingModel(mode, dim, vocab, counts, syn0, syn1neg, config,
                          bucket_rows, word_subrows, loss_trace)


def train_cbow_embeddings(train_docs, dim=100, window=5, min_count=1, epochs=5, negatives=5,
                          seed=42, threads=None, alpha=0.025, min_alpha=1e-4) -> EmbeddingModel:
    return _train(train_docs, "cbow_word", dim, window, min_count, epochs, negatives, seed,
                  threads, alpha, min_alpha)


def train_subword_embeddings(train_docs, dim=100, window=5, min_count=1, minn=3, maxn=6,
                             bucket_count=DEFAULT_BUCKETS, epochs=5, negatives=5, seed=42,
                             threads=None, alpha=0.025, min_alpha=1e-4) -> EmbeddingModel:
    if minn < 1 or maxn < minn:
        raise ValueError("need 1 <= minn <= maxn")
    return _train(train_docs, "cbow_subword", dim, window, min_count, epochs, negatives, seed,
                  threads, alpha, min_alpha, minn, maxn, bucket_count)


def embed_document(model: EmbeddingModel, doc) -> np.ndarray:
    """Mean of the token vectors; zeros when no token can be embedded."""
    total = np.zeros(model.dim, dtype=np.float64)
    n = 0
    for tok in _tokens_of(doc):
        v = model.word_vector(tok)
        if v is not None:
            total += v
            n += 1
    return total / n if n else total


def embed_documents(model: EmbeddingModel, docs, set_name: str | None = None) -> FeatureMatrix:
    if set_name is None:
        set_name = "fasttext" if model.mode == "cbow_subword" else "word2vec"
    rows = [embed_document(model, d) for d in docs]
    values = np.vstack(rows) if rows else np.zeros((0, model.dim))
    return FeatureMatrix(set_name, [f"d{i}" for i in range(model.dim)], values.astype(np.float32),
                         {"config": dict(model.config)})
