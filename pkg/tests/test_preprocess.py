import unicodedata

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featforge.preprocess import (StopwordList, clean_documents, clean_text, count_sentences, normalize_text,
                                  tokenize)
from featforge.corpus import Document

ALPHABET = list("কখগঘঙচছজঝঞটঠডঢণতথদধনপফবভমযরলশষসহ") + list("ািীুূেৈোৌংঃ্") + list("০১২৩৪৫৬৭৮৯") \
    + list("abcXYZ0123456789") + list(" \t\n") + list("।॥,.!?;:'\"-()[]{}") + list("+=$৳©<>&#") \
    + ["\u200c", "\u200d", "\x07", "\u00a0", "\u09dc", "\u0985"]


def _strip_tags(text):
    out, i = [], 0
    while i < len(text):
        if text[i] == "<":
            j = i + 1
            while j < len(text) and text[j] not in "<>":
                j += 1
            if j < len(text) and text[j] == ">":
                out.append(" ")
                i = j + 1
                continue
        out.append(text[i])
        i += 1
    return "".join(out)


def _is_entity_char(c):
    return ("0" <= c <= "9") or ("a" <= c <= "z") or ("A" <= c <= "Z")


def _strip_entities(text):
    out, i = [], 0
    while i < len(text):
        if text[i] == "&":
            j = i + 1
            if j < len(text) and text[j] == "#":
                j += 1
            k = j
            while k < len(text) and _is_entity_char(text[k]):
                k += 1
            if k > j and k < len(text) and text[k] == ";":
                out.append(" ")
                i = k + 1
                continue
        out.append(text[i])
        i += 1
    return "".join(out)


def oracle_tokens(raw, stopwords=()):
    text = unicodedata.normalize("NFC", _strip_entities(_strip_tags(raw)))
    kept = []
    for ch in text:
        cat = unicodedata.category(ch)
        if ch.isspace() or cat.startswith("P") or cat.startswith("S") or ch == "।":
            kept.append(" ")
        elif cat.startswith("C"):
            continue
        else:
            kept.append(ch)
    text = unicodedata.normalize("NFC", "".join(kept))
    tokens, cur = [], []
    for ch in text:
        if ch.isspace():
            if cur:
                tokens.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if cur:
        tokens.append("".join(cur))
    return [t for t in tokens if t not in stopwords]


def oracle_sentences(raw):
    segments, cur = [], []
    for ch in raw:
        if ch in "।?!.":
            segments.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    segments.append("".join(cur))
    return sum(1 for seg in segments if seg.strip())


def _random_text(rng, n):
    return "".join(ALPHABET[i] for i in rng.integers(len(ALPHABET), size=n))


def test_tag_and_punct_stripped_digits_kept():
    assert clean_text("<p>খবর ১২৩!</p>", StopwordList.empty()).tokens == ("খবর", "১২৩")


def test_only_punctuation():
    assert clean_text("।!?,.;:", StopwordList.empty()).tokens == ()
    assert clean_text("।!?", StopwordList.empty()).is_empty


def test_entities_removed_as_units():
    assert clean_text("ক&amp;খ &#2437; গ").tokens == ("ক", "খ", "গ")


def test_danda_splits_words():
    assert clean_text("এক।দুই").tokens == ("এক", "দুই")


def test_stopwords_dropped():
    sw = StopwordList.from_words(["এবং"])
    assert clean_text("রাম এবং শ্যাম", sw).tokens == ("রাম", "শ্যাম")


def test_default_stopwords_loaded():
    sw = StopwordList.default()
    assert len(sw) > 50
    assert "এবং" in sw
    assert all(unicodedata.is_normalized("NFC", w) for w in sw.words)


def test_stopword_file(tmp_path):
    p = tmp_path / "sw.txt"
    p.write_text("# comment\nক\n\nখ\n", encoding="utf-8")
    sw = StopwordList.from_file(p)
    assert sw.words == frozenset({"ক", "খ"})


def test_raw_text_retained():
    c = clean_text("ক, খ!", doc_id="z")
    assert c.raw_text == "ক, খ!" and c.id == "z"


def test_clean_documents_keeps_ids():
    docs = [Document("a", "ক!", 1), Document("b", "", 0)]
    out = clean_documents(docs)
    assert [c.id for c in out] == ["a", "b"]
    assert out[1].tokens == ()


def test_tokenize_examples():
    assert tokenize("ক খ  গ") == ["ক", "খ", "গ"]
    assert tokenize("") == []
    assert tokenize("  　x\n") == ["x"]


def test_count_sentences_examples():
    assert count_sentences("ক। খ? গ!") == 3
    assert count_sentences("") == 0
    assert count_sentences("   ") == 0
    assert count_sentences("শেষ নেই") == 1
    assert count_sentences("কি?! সত্যি...") == 2


def test_character_walk_oracle_50_docs():
    rng = np.random.default_rng(3)
    sw = StopwordList.from_words(["কখ", "ab"])
    for _ in range(50):
        raw = _random_text(rng, int(rng.integers(0, 120)))
        if rng.random() < 0.5:
            raw = f"<div class='x'>{raw}</div> &nbsp; {raw}"
        assert list(clean_text(raw, sw).tokens) == oracle_tokens(raw, sw.words)


def test_tokenize_agrees_with_clean_text_100_strings():
    rng = np.random.default_rng(4)
    for _ in range(100):
        raw = _random_text(rng, int(rng.integers(0, 80)))
        assert tokenize(normalize_text(raw)) == list(clean_text(raw).tokens)


def test_count_sentences_oracle_30():
    rng = np.random.default_rng(5)
    for _ in range(30):
        raw = _random_text(rng, int(rng.integers(0, 100)))
        assert count_sentences(raw) == oracle_sentences(raw)


text_st = st.text(alphabet=st.sampled_from(ALPHABET), max_size=80) | st.text(max_size=60)


@settings(max_examples=200, deadline=None)
@given(raw=text_st)
def test_clean_idempotent(raw):
    once = clean_text(raw).tokens
    assert clean_text(" ".join(once)).tokens == once


@settings(max_examples=200, deadline=None)
@given(raw=text_st, stop=st.lists(st.sampled_from(["ক", "খগ", "ab", "১২"]), max_size=3))
def test_no_stopword_or_forbidden_char(raw, stop):
    sw = StopwordList.from_words(stop)
    for tok in clean_text(raw, sw).tokens:
        assert tok not in sw
        for ch in tok:
            cat = unicodedata.category(ch)
            assert cat[0] not in "PSC" and ch not in "<>&।"


@settings(max_examples=200, deadline=None)
@given(raw=text_st)
def test_never_grows(raw):
    # measured against the NFC form: NFC alone may split a composition-excluded letter
    nfc = unicodedata.normalize("NFC", raw)
    assert sum(len(t) for t in clean_text(raw).tokens) <= len(nfc.replace(" ", ""))


@settings(max_examples=200, deadline=None)
@given(raw=text_st)
def test_tokenize_has_no_empty_tokens(raw):
    assert all(tokenize(raw))
    assert count_sentences(raw) == oracle_sentences(raw)


@pytest.mark.parametrize("raw", ["\u09dc", "\u09a1\u09bc"])
def test_nfc_composition_exclusion(raw):
    # U+09DC is excluded from composition, so both spellings clean to the decomposed pair
    assert clean_text(raw).tokens == ("\u09a1\u09bc",)
