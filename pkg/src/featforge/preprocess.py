"""Text cleaning and tokenization for Bangla news text.

Cleaning drops HTML tags and entities, punctuation (including the danda
``।``), symbols and control/format characters, keeps Bangla and ASCII digits,
and removes stopwords. Statistical features read the raw text instead, so the
helpers that count raw characters live here too.
"""
from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

DANDA = "।"
DOUBLE_DANDA = "॥"
SENTENCE_TERMINATORS = frozenset({DANDA, "?", "!", "."})

_TAG_RE = re.compile(r"<[^<>]*>")
_ENTITY_RE = re.compile(r"&#?[0-9A-Za-z]+;")


@dataclass(frozen=True)
class StopwordList:
    words: frozenset

    def __contains__(self, token):
        return token in self.words

    def __len__(self):
        return len(self.words)

    @classmethod
    def empty(cls) -> "StopwordList":
        return cls(frozenset())

    @classmethod
    def from_words(cls, words) -> "StopwordList":
        return cls(frozenset(unicodedata.normalize("NFC", w.strip()) for w in words if w.strip()))

    @classmethod
    def from_file(cls, path) -> "StopwordList":
        text = Path(path).read_text(encoding="utf-8")
        return cls._parse(text)

    @classmethod
    def default(cls) -> "StopwordList":
        text = resources.files("featforge").joinpath("data/stopwords_bn.txt").read_text(encoding="utf-8")
        return cls._parse(text)

    @classmethod
    def _parse(cls, text: str) -> "StopwordList":
        words = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        sw = cls.from_words(words)
        if not sw.words:
            raise ValueError("stopword file contains no words")
        return sw


@dataclass(frozen=True)
class CleanDocument:
    id: str
    tokens: tuple
    raw_text: str

    @property
    def is_empty(self) -> bool:
        return not self.tokens

    def joined(self) -> str:
        return " ".join(self.tokens)


def is_punctuation(ch: str) -> bool:
    return ch == DANDA or unicodedata.category(ch).startswith("P")


def _filter_char(ch: str) -> str:
    if ch.isspace():
        return " "
    cat = unicodedata.category(ch)
    if cat[0] in "PS" or ch == DANDA:
        return " "
    if cat[0] == "C":
        return ""
    return ch


def tokenize(text: str) -> list:
    """Split on runs of Unicode whitespace; never yields empty tokens."""
    return text.split()


def normalize_text(raw: str) -> str:
    """Everything ``clean_text`` does short of tokenizing and stopword removal."""
    text = _TAG_RE.sub(" ", raw)
    text = _ENTITY_RE.sub(" ", text)
    text = unicodedata.normalize("NFC", text)
    text = "".join(_filter_char(ch) for ch in text)
    return unicodedata.normalize("NFC", text)


def clean_text(raw: str, stopwords: StopwordList | None = None, doc_id: str = "") -> CleanDocument:
    stopwords = stopwords or StopwordList.empty()
    tokens = tuple(t for t in tokenize(normalize_text(raw)) if t not in stopwords)
    return CleanDocument(doc_id, tokens, raw)


def clean_documents(docs, stopwords: StopwordList | None = None) -> list:
    return [clean_text(d.raw_text, stopwords, d.id) for d in docs]


def count_sentences(raw: str) -> int:
    """Count segments ended by ``।``, ``?``, ``!`` or ``.``.

    A run of terminators closes one sentence; segments holding only
    whitespace are not sentences. A trailing unterminated segment with any
    non-whitespace character counts as one.
    """
    count = 0
    has_content = False
    for ch in raw:
        if ch in SENTENCE_TERMINATORS:
            if has_content:
                count += 1
            has_content = False
        elif not ch.isspace():
            has_content = True
    if has_content:
        count += 1
    return count
