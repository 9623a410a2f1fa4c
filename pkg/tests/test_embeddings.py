import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featforge import _kernels
from featforge.features.embeddings import (embed_document, embed_documents, fnv1a_32, resolve_threads,
                                           subword_ngrams, train_cbow_embeddings, train_subword_embeddings)
from featforge.preprocess import CleanDocument

SMALL = dict(dim=16, epochs=3, threads=1)


def _cooccur_corpus(n=200, seed=0):
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(n):
        if i % 2 == 0:
            words = ["A", "B", "p", "q", "r"]
        else:
            words = ["C", "D", "s", "t", "u"]
        rng.shuffle(words)
        docs.append(words)
    return docs


def _cos(a, b):
    return float(a @ b / np.linalg.norm(a) / np.linalg.norm(b))


def test_fnv1a_reference_values():
    assert fnv1a_32("") == 0x811C9DC5
    assert fnv1a_32("a") == 0xE40C292C
    assert fnv1a_32("foobar") == 0xBF9CF968


def test_subword_ngrams_short_word():
    assert subword_ngrams("xy", 3, 6) == ["<xy", "xy>", "<xy>"]


def test_vocab_size_and_dim():
    docs = [["ক", "খ", "গ"], ["ক", "ঘ"], ["ঙ"]]
    m = train_cbow_embeddings(docs, threads=1)
    assert len(m.vocab) == 5
    assert all(len(v) == 100 for v in m.vectors.values())


def test_empty_stream_raises():
    with pytest.raises(ValueError, match="empty token stream"):
        train_cbow_embeddings([[], []], threads=1)


def test_cooccurring_words_closer():
    m = train_cbow_embeddings(_cooccur_corpus(), dim=32, epochs=10, threads=1)
    v = m.vectors
    assert _cos(v["A"], v["B"]) > _cos(v["A"], v["C"])
    assert _cos(v["C"], v["D"]) > _cos(v["D"], v["B"])


def test_deterministic_single_thread():
    docs = _cooccur_corpus(40)
    for train in (train_cbow_embeddings, train_subword_embeddings):
        a = train(docs, seed=42, **SMALL)
        b = train(docs, seed=42, **SMALL)
        assert np.array_equal(a.syn0, b.syn0) and np.array_equal(a.syn1neg, b.syn1neg)
        c = train(docs, seed=43, **SMALL)
        assert not np.array_equal(a.syn0, c.syn0)


def test_unseen_word_composes_from_subwords():
    m = train_subword_embeddings([["abab", "baba"]] * 5, bucket_count=2 ** 16, **SMALL)
    assert "ab" not in m.vocab
    # both trigrams of "<ab>" ("<ab", "ab>") are trigrams of the trained "<abab>"
    v = m.word_vector("ab")
    assert v is not None and np.linalg.norm(v) > 0
    row = embed_document(m, ["ab"])
    assert np.linalg.norm(row) > 0


def test_short_word_embeds():
    m = train_subword_embeddings([["xy", "ab"]] * 3, bucket_count=2 ** 16, **SMALL)
    assert len(m.word_subrows[m.vocab["xy"]]) == 3
    assert np.linalg.norm(m.word_vector("xy")) > 0


def test_subword_word_vector_is_own_plus_bucket_mean():
    m = train_subword_embeddings([["কখগ", "ঘঙ"]] * 3, bucket_count=2 ** 16, **SMALL)
    i = m.vocab["কখগ"]
    rows = m.word_subrows[i]
    expected = m.syn0[i].astype(np.float64) + m.syn0[rows].astype(np.float64).mean(axis=0)
    assert np.allclose(m.word_vector("কখগ"), expected, atol=0)


def test_word_mode_skips_oov():
    m = train_cbow_embeddings([["ক", "খ"]], **SMALL)
    assert m.word_vector("zzz") is None
    assert np.array_equal(embed_document(m, ["zzz", "ক"]), m.word_vector("ক"))


def test_embed_document_single_empty_and_mean():
    m = train_cbow_embeddings(_cooccur_corpus(20), **SMALL)
    assert np.array_equal(embed_document(m, ["A"]), m.vectors["A"])
    z = embed_document(m, [])
    assert z.shape == (16,) and not z.any()
    toks = ["A", "p", "q", "C", "u"]
    oracle = sum(m.vectors[t] for t in toks) / 5
    assert np.max(np.abs(embed_document(m, CleanDocument("d", tuple(toks), "")) - oracle)) < 1e-7


def test_embed_documents_matrix():
    m = train_subword_embeddings(_cooccur_corpus(10), bucket_count=2 ** 16, **SMALL)
    fm = embed_documents(m, [["A"], [], ["nope"]])
    assert fm.set_name == "fasttext" and fm.shape == (3, 16)
    assert np.all(np.isfinite(fm.values)) and not fm.values[1].any()


@settings(max_examples=25, deadline=None)
@given(perm_seed=st.integers(0, 10_000), n=st.integers(1, 8))
def test_embedding_mean_permutation_invariant(perm_seed, n):
    m = _shared_model()
    rng = np.random.default_rng(perm_seed)
    toks = [m.words[i] for i in rng.integers(len(m.words), size=n)]
    shuffled = list(rng.permutation(toks))
    assert np.allclose(embed_document(m, toks), embed_document(m, shuffled), atol=1e-12)


_MODEL = []


def _shared_model():
    if not _MODEL:
        _MODEL.append(train_cbow_embeddings(_cooccur_corpus(20), **SMALL))
    return _MODEL[0]


def test_resolve_threads(monkeypatch):
    monkeypatch.setenv("FEATFORGE_THREADS", "2")
    assert resolve_threads(None) == 2 and resolve_threads(4) == 2 and resolve_threads(1) == 1
    monkeypatch.delenv("FEATFORGE_THREADS")
    assert resolve_threads(3) == 3 and resolve_threads(None) >= 1


def test_multithreaded_mode_runs(monkeypatch):
    monkeypatch.delenv("FEATFORGE_THREADS", raising=False)
    m = train_cbow_embeddings(_cooccur_corpus(40), dim=8, epochs=2, threads=3)
    assert m.config["threads"] == 3 and np.all(np.isfinite(m.syn0))


@pytest.mark.skipif(_kernels.compiled_train_block is None, reason="compiled kernel not built")
@pytest.mark.parametrize("train", [train_cbow_embeddings, train_subword_embeddings])
def test_compiled_kernel_matches_fallback(monkeypatch, train):
    docs = _cooccur_corpus(30)
    kwargs = dict(SMALL, bucket_count=2 ** 12) if train is train_subword_embeddings else SMALL
    monkeypatch.setattr(_kernels, "train_block", _kernels.python_train_block)
    slow = train(docs, **kwargs)
    monkeypatch.setattr(_kernels, "train_block", _kernels.compiled_train_block)
    fast = train(docs, **kwargs)
    assert np.array_equal(slow.syn0, fast.syn0)
    assert np.array_equal(slow.syn1neg, fast.syn1neg)
    assert np.allclose(slow.loss_trace, fast.loss_trace, rtol=1e-9)


def test_backend_selected():
    assert _kernels.BACKEND in ("cython", "python")


def test_pure_python_switch():
    import os
    import subprocess
    import sys
    env = dict(os.environ, FEATFORGE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from featforge import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
