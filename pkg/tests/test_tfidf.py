import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featforge.features.tfidf import (apply_ngram_counts, apply_tfidf, char_ngrams, fit_char_tfidf,
                                      fit_ngram_counts, fit_word_tfidf, smoothed_idf)

from oracles import char_grams_by_window, ngrams_by_window, tfidf_matrix, vocabulary

WORDS = ["ক", "খ", "গ", "ঘ", "চ", "ছ", "জ", "ঝ"]


def random_docs(rng, n_docs, vocab=WORDS, lo=0, hi=12):
    return [[vocab[i] for i in rng.integers(len(vocab), size=int(rng.integers(lo, hi)))] for _ in range(n_docs)]


def test_idf_term_in_every_doc():
    docs = [["ক", "খ"], ["ক"], ["ক", "গ"]]
    model = fit_word_tfidf(docs, min_df=1, max_df_frac=1.0, ngram_range=(1, 1))
    assert model.idf[model.vocabulary["ক"]] == 1.0


def test_idf_hand_value():
    assert smoothed_idf(4, 1) == pytest.approx(math.log(5 / 2) + 1, abs=1e-12)
    assert smoothed_idf(4, 1) == pytest.approx(1.9163, abs=1e-4)


def test_single_term_row_is_one():
    model = fit_word_tfidf([["ক"]], min_df=1, max_df_frac=1.0, ngram_range=(1, 1))
    assert apply_tfidf(model, [["ক"]]).values.tolist() == [[1.0]]


def test_empty_document_zero_row():
    model = fit_word_tfidf([["ক", "খ"], ["ক"]], min_df=1, ngram_range=(1, 1))
    row = apply_tfidf(model, [[]]).values
    assert np.all(row == 0)


def test_oov_terms_ignored():
    model = fit_word_tfidf([["ক", "খ"], ["ক"]], min_df=1, max_df_frac=1.0, ngram_range=(1, 1))
    m = apply_tfidf(model, [["ক", "ঞ", "ঞ"]])
    # tf uses all terms in the document; the row is then renormalized
    assert m.values[0, model.vocabulary["ক"]] == pytest.approx(1.0)


def test_min_df_default_drops_rare_terms():
    docs = [["ক", "খ"], ["ক", "খ"], ["ক", "গ"], ["ক", "খ"], ["ঘ"]]
    model = fit_word_tfidf(docs)
    # ক sits in 4 of 5 docs (< 95%), খ in 3; গ and ঘ fall under min_df = 3
    assert "ক" in model.vocabulary and "খ" in model.vocabulary
    assert "গ" not in model.vocabulary and "ঘ" not in model.vocabulary


def test_max_df_drops_ubiquitous_terms():
    docs = [["ক", "খ"]] * 3 + [["ক"]] * 17 + [["খ"]]
    model = fit_word_tfidf(docs, ngram_range=(1, 1))
    assert "ক" not in model.vocabulary  # 20 of 21 docs > 95%
    assert "খ" in model.vocabulary


def test_empty_vocabulary_raises():
    with pytest.raises(ValueError, match="vocabulary is empty"):
        fit_word_tfidf([["ক"], ["খ"]])
    with pytest.raises(ValueError, match="empty corpus"):
        fit_word_tfidf([])


def test_brute_force_10_docs():
    rng = np.random.default_rng(0)
    docs = random_docs(rng, 10)
    model = fit_word_tfidf(docs, min_df=2)
    fit_lists = [ngrams_by_window(d, 1, 2) for d in docs]
    terms, idf, rows = tfidf_matrix(fit_lists, fit_lists, 2, 0.95, 5000)
    assert model.terms == terms
    assert np.allclose(model.idf, [idf[t] for t in terms], atol=1e-12)
    assert np.max(np.abs(apply_tfidf(model, docs).values - np.array(rows))) < 1e-6


def test_8_docs_12_terms():
    rng = np.random.default_rng(1)
    vocab = [f"w{i:02d}" for i in range(12)]
    docs = random_docs(rng, 8, vocab, 3, 15)
    model = fit_word_tfidf(docs, min_df=1, max_df_frac=1.0, ngram_range=(1, 1))
    lists = [ngrams_by_window(d, 1, 1) for d in docs]
    terms, _, rows = tfidf_matrix(lists, lists, 1, 1.0, 5000)
    assert model.terms == terms
    assert np.max(np.abs(apply_tfidf(model, docs).values - np.array(rows))) < 1e-6


def test_top_k_tie_break_lexicographic():
    docs = [["খ", "ক", "গ"]] * 3
    model = fit_word_tfidf(docs, ngram_range=(1, 1), max_features=2, max_df_frac=1.0)
    assert model.terms == ["ক", "খ"]


def test_char_ngrams_within_token():
    assert sorted(char_ngrams(["abc"], 2, 4)) == ["ab", "abc", "bc"]
    assert "c d" in char_ngrams(["abc", "de"], 2, 4, cross_token=True)
    assert all(" " not in g for g in char_ngrams(["abc", "de"], 2, 4))


def test_char_idf_all_docs_one():
    docs = [["abx"], ["ab"], ["zab"]]
    model = fit_char_tfidf(docs)
    assert model.idf[model.vocabulary["ab"]] == 1.0


def test_char_brute_force_6_docs():
    rng = np.random.default_rng(2)
    docs = random_docs(rng, 6, ["কখ", "খগা", "অআ", "কখগ", "১২৩"], 1, 8)
    model = fit_char_tfidf(docs)
    lists = [char_grams_by_window(d, 2, 4) for d in docs]
    terms, _, rows = tfidf_matrix(lists, lists, 3, 1.0, 1000)
    assert model.terms == terms
    assert np.max(np.abs(apply_tfidf(model, docs).values - np.array(rows))) < 1e-6


def test_ngram_counts_direct():
    docs = [["a", "b", "a"], ["a", "b", "a"]]
    model = fit_ngram_counts(docs)
    m = apply_ngram_counts(model, [["a", "b", "a"]])
    col = dict(zip(m.column_labels, m.values[0]))
    assert (col["a"], col["b"], col["a b"], col["b a"]) == (2, 1, 1, 1)


def test_ngram_single_document_term_excluded():
    model = fit_ngram_counts([["a", "b"], ["a", "c"]])
    assert "a" in model.vocabulary
    assert "b" not in model.vocabulary and "a b" not in model.vocabulary


def test_ngram_sliding_window_12_docs():
    rng = np.random.default_rng(3)
    docs = random_docs(rng, 12, WORDS[:4], 0, 10)
    model = fit_ngram_counts(docs)
    lists = [ngrams_by_window(d, 1, 3) for d in docs]
    terms, _ = vocabulary(lists, 2, 1.0, 1000)
    assert model.terms == terms
    expected = np.array([[lst.count(t) for t in terms] for lst in lists], dtype=np.float32)
    assert np.array_equal(apply_ngram_counts(model, docs).values, expected)


doc_lists = st.lists(st.lists(st.sampled_from(WORDS[:5]), max_size=10), min_size=3, max_size=15)


@settings(max_examples=80, deadline=None)
@given(docs=doc_lists)
def test_tfidf_invariants(docs):
    try:
        model = fit_word_tfidf(docs, min_df=1)
    except ValueError:
        return
    assert np.all(model.idf >= 1.0)
    assert len(model.vocabulary) <= 5000
    # idf is non-increasing in document frequency
    grams = [set(ngrams_by_window(d, 1, 2)) for d in docs]
    df = {t: sum(1 for g in grams if t in g) for t in model.terms}
    order = sorted(model.terms, key=lambda t: df[t])
    idfs = [model.idf[model.vocabulary[t]] for t in order]
    assert all(a >= b for a, b in zip(idfs, idfs[1:]))
    norms = np.linalg.norm(apply_tfidf(model, docs + [[]]).values.astype(np.float64), axis=1)
    assert all(n == 0 or abs(n - 1) < 1e-6 for n in norms)


@settings(max_examples=40, deadline=None)
@given(docs=doc_lists, k=st.integers(1, 6))
def test_caps_hold(docs, k):
    try:
        m = fit_ngram_counts(docs, max_features=k)
    except ValueError:
        return
    assert len(m.vocabulary) <= k
    try:
        c = fit_char_tfidf([[w * 3 for w in d] for d in docs], max_features=k)
    except ValueError:
        return
    assert len(c.vocabulary) <= k
