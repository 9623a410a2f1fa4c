import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featforge.corpus import (CorpusError, Document, corpus_hash, count_duplicates, load_corpus, save_corpus,
                              split_dataset)


def _write_jsonl(path, records):
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records), encoding="utf-8")


def test_jsonl_three_lines(tmp_path):
    p = tmp_path / "c.jsonl"
    _write_jsonl(p, [{"text": "ক", "label": 1}, {"text": "খ", "label": 0}, {"text": "গ", "label": 1}])
    docs = load_corpus(p)
    assert [d.label for d in docs] == [1, 0, 1]
    assert [d.id for d in docs] == ["0", "1", "2"]
    assert [d.raw_text for d in docs] == ["ক", "খ", "গ"]


def test_empty_file(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text("", encoding="utf-8")
    with pytest.raises(CorpusError, match="empty corpus"):
        load_corpus(p)


def test_missing_file(tmp_path):
    with pytest.raises(CorpusError, match="not found"):
        load_corpus(tmp_path / "nope.csv")


def test_string_labels_and_ids(tmp_path):
    p = tmp_path / "c.jsonl"
    _write_jsonl(p, [{"id": "a", "text": "x", "label": "real"}, {"id": "b", "text": "y", "label": "Fake"}])
    docs = load_corpus(p)
    assert [(d.id, d.label) for d in docs] == [("a", 1), ("b", 0)]


def test_malformed_line_reports_line_number(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text('{"text": "a", "label": 1}\n{broken\n', encoding="utf-8")
    with pytest.raises(CorpusError, match=r":2:"):
        load_corpus(p)


def test_label_out_of_range(tmp_path):
    p = tmp_path / "c.jsonl"
    _write_jsonl(p, [{"text": "a", "label": 2}])
    with pytest.raises(CorpusError, match="outside"):
        load_corpus(p)


def test_csv_quoting_and_header(tmp_path):
    p = tmp_path / "c.csv"
    with p.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["text", "label"])
        w.writerow(['কমা, এবং "উদ্ধৃতি"\nনতুন লাইন', 1])
        w.writerow(["খ", 0])
    docs = load_corpus(p)
    assert docs[0].raw_text == 'কমা, এবং "উদ্ধৃতি"\nনতুন লাইন'
    assert [d.label for d in docs] == [1, 0]


def test_csv_bad_header(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("body,label\nx,1\n", encoding="utf-8")
    with pytest.raises(CorpusError, match="header"):
        load_corpus(p)


def test_full_size_csv(tmp_path):
    # same row count and class mix as the combined real + fake news file
    p = tmp_path / "c.csv"
    with p.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["text", "label"])
        for i in range(48678):
            w.writerow([f"r{i}", 1])
        for i in range(12903):
            w.writerow([f"f{i}", 0])
    docs = load_corpus(p)
    assert len(docs) == 61581
    assert sum(d.label for d in docs) == 48678


def test_empty_text_kept(tmp_path, caplog):
    p = tmp_path / "c.jsonl"
    _write_jsonl(p, [{"text": "", "label": 1}, {"text": "a", "label": 0}])
    docs = load_corpus(p)
    assert len(docs) == 2 and docs[0].raw_text == ""
    assert "empty text" in caplog.text


def test_save_load_roundtrip(tmp_path):
    docs = [Document("x1", "খবর ১২৩!", 1), Document("x2", "", 0)]
    save_corpus(docs, tmp_path / "c.jsonl")
    assert load_corpus(tmp_path / "c.jsonl") == docs


def test_count_duplicates():
    docs = [Document(str(i), t, 1) for i, t in enumerate(["a", "b", "a", "a", "c", "b"])]
    assert count_duplicates(docs) == 3


def test_corpus_hash_changes_with_label():
    a = [Document("1", "x", 1)]
    b = [Document("1", "x", 0)]
    assert corpus_hash(a) != corpus_hash(b)


def test_split_sizes_stratified(balanced_docs):
    sp = split_dataset(balanced_docs, (0.65, 0.15, 0.20), seed=42, stratified=True)
    assert (len(sp.train), len(sp.val), len(sp.test)) == (65, 15, 20)
    for part, n in ((sp.train, 65), (sp.val, 15), (sp.test, 20)):
        n_real = sum(d.label for d in part)
        assert abs(n_real - n / 2) <= 1


def test_split_deterministic(balanced_docs):
    a = split_dataset(balanced_docs, seed=42)
    b = split_dataset(balanced_docs, seed=42)
    assert [[d.id for d in p] for p in a.parts().values()] == [[d.id for d in p] for p in b.parts().values()]
    c = split_dataset(balanced_docs, seed=43)
    assert [d.id for d in a.train] != [d.id for d in c.train]


def test_split_twenty_docs_partition():
    docs = [Document(f"n{i}", "t", int(i < 8)) for i in range(20)]
    sp = split_dataset(docs, (0.5, 0.25, 0.25), seed=7)
    ids = [set(d.id for d in p) for p in (sp.train, sp.val, sp.test)]
    assert not (ids[0] & ids[1]) and not (ids[0] & ids[2]) and not (ids[1] & ids[2])
    assert ids[0] | ids[1] | ids[2] == {d.id for d in docs}


def test_split_errors(balanced_docs):
    with pytest.raises(ValueError, match="sum"):
        split_dataset(balanced_docs, (0.5, 0.3, 0.3))
    with pytest.raises(ValueError):
        split_dataset([], (0.65, 0.15, 0.20))
    tiny = [Document(str(i), "t", int(i == 0)) for i in range(10)]
    with pytest.raises(ValueError, match="class 1"):
        split_dataset(tiny, stratified=True)
    assert len(split_dataset(tiny, stratified=False).train) == 6


@settings(max_examples=60, deadline=None)
@given(labels=st.lists(st.integers(0, 1), min_size=10, max_size=200), seed=st.integers(0, 2**31),
       stratified=st.booleans())
def test_split_properties(labels, seed, stratified):
    if stratified and min(labels.count(0), labels.count(1)) in (1, 2):
        return
    docs = [Document(str(i), "t", y) for i, y in enumerate(labels)]
    sp = split_dataset(docs, (0.65, 0.15, 0.20), seed, stratified)
    ids = [d.id for p in (sp.train, sp.val, sp.test) for d in p]
    assert sorted(ids) == sorted(d.id for d in docs)
    assert len(set(ids)) == len(ids)
    n = len(docs)
    # train and val are floors; the test part absorbs both rounding deficits
    for part, r, slack in zip((sp.train, sp.val, sp.test), (0.65, 0.15, 0.20), (1, 1, 2)):
        assert abs(len(part) - n * r) < slack
        if stratified and part:
            for cls in (0, 1):
                n_c = labels.count(cls)
                got = sum(1 for d in part if d.label == cls)
                assert abs(got - n_c * r) < slack
    again = split_dataset(docs, (0.65, 0.15, 0.20), seed, stratified)
    assert [d.id for d in again.test] == [d.id for d in sp.test]


def test_split_test_remainder_arithmetic():
    docs = [Document(str(i), "t", i % 2) for i in range(61)]
    sp = split_dataset(docs)
    assert len(sp.train) == int(np.floor(61 * 0.65))
    assert len(sp.val) == int(np.floor(61 * 0.15))
    assert len(sp.test) == 61 - len(sp.train) - len(sp.val)
