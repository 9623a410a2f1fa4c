"""Synthetic Bangla-like corpora for smoke tests and demos.

Real and fake documents draw content words from two disjoint vocabularies
(plus a shared pool and a few stopwords) and differ in their statistical
profile: fake items are shorter, use more ``!``/``?`` and more digits.
"""
from __future__ import annotations

import numpy as np

from .corpus import Document

_CONSONANTS = list("কখগঘচছজঝটঠডঢণতথদধনপফবভমরলশষসহ")
_VOWEL_SIGNS = ["", "া", "ি", "ী", "ু", "ে", "ো"]
_STOPWORDS = ["এবং", "যে", "এই", "থেকে", "জন্য", "করে"]


def _make_words(rng, n, taken):
    words = []
    while len(words) < n:
        syll = rng.integers(2, 4)
        w = "".join(_CONSONANTS[rng.integers(len(_CONSONANTS))] + _VOWEL_SIGNS[rng.integers(len(_VOWEL_SIGNS))]
                    for _ in range(syll))
        if w not in taken:
            taken.add(w)
            words.append(w)
    return words


def make_vocabularies(seed=0, n_class_words=150, n_shared=100):
    rng = np.random.default_rng(seed)
    taken = set(_STOPWORDS)
    return {"real": _make_words(rng, n_class_words, taken),
            "fake": _make_words(rng, n_class_words, taken),
            "shared": _make_words(rng, n_shared, taken)}


def _sentence(rng, vocab, own, n_words, class_share):
    out = []
    for _ in range(n_words):
        u = rng.random()
        if u < class_share:
            out.append(own[rng.integers(len(own))])
        elif u < 0.93:
            out.append(vocab["shared"][rng.integers(len(vocab["shared"]))])
        else:
            out.append(_STOPWORDS[rng.integers(len(_STOPWORDS))])
    return out


def make_document(rng, vocab, label: int, class_share: float = 0.5) -> str:
    if label == 1:
        own = vocab["real"]
        n_sent = rng.integers(4, 8)
        lengths = (8, 14)
        enders = ["।"] * 9 + ["?"]
        p_digit = 0.05
    else:
        own = vocab["fake"]
        n_sent = rng.integers(2, 5)
        lengths = (4, 9)
        enders = ["!"] * 5 + ["?"] * 3 + ["।"] * 2
        p_digit = 0.4
    parts = []
    for _ in range(n_sent):
        words = _sentence(rng, vocab, own, rng.integers(*lengths), class_share)
        if rng.random() < p_digit:
            digits = "০১২৩৪৫৬৭৮৯" if rng.random() < 0.5 else "0123456789"
            words.insert(rng.integers(len(words) + 1), "".join(rng.choice(list(digits), rng.integers(1, 5))))
        if rng.random() < 0.2:
            words[rng.integers(len(words))] += ","
        parts.append(" ".join(words) + enders[rng.integers(len(enders))])
    text = " ".join(parts)
    if rng.random() < 0.1:
        text = f"<p>{text}</p>"
    return text


def make_separable_corpus(n_docs: int = 1000, fake_frac: float = 0.4, seed: int = 0,
                          class_share: float = 0.5) -> list:
    rng = np.random.default_rng(seed)
    vocab = make_vocabularies(seed)
    n_fake = int(round(n_docs * fake_frac))
    labels = np.array([0] * n_fake + [1] * (n_docs - n_fake))
    rng.shuffle(labels)
    return [Document(str(i), make_document(rng, vocab, int(y), class_share), int(y)) for i, y in enumerate(labels)]


def add_label_noise(docs, rate: float, seed: int = 0) -> list:
    """Flip the labels of ``round(rate * N)`` randomly chosen documents."""
    rng = np.random.default_rng(seed)
    n = len(docs)
    flip = set(rng.choice(n, int(round(rate * n)), replace=False).tolist())
    return [Document(d.id, d.raw_text, 1 - d.label if i in flip else d.label) for i, d in enumerate(docs)]
