"""Labeled document loading and seeded train/validation/test partitioning."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

REAL = 1
FAKE = 0

_LABEL_NAMES = {"real": REAL, "fake": FAKE, "1": REAL, "0": FAKE}

DEFAULT_RATIOS = (0.65, 0.15, 0.20)


class CorpusError(ValueError):
    """Raised for unreadable or malformed corpus files."""


@dataclass(frozen=True)
class Document:
    id: str
    raw_text: str
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise CorpusError(f"document {self.id!r}: label must be 0 or 1, got {self.label!r}")


Corpus = list  # list[Document]


@dataclass(frozen=True)
class DatasetSplit:
    train: list
    val: list
    test: list
    seed: int
    ratios: tuple

    def parts(self):
        return {"train": self.train, "val": self.val, "test": self.test}


def _parse_label(value, where: str) -> int:
    if isinstance(value, bool):
        raise CorpusError(f"{where}: boolean label not accepted")
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        if value in (0, 1) and float(value).is_integer():
            return int(value)
        raise CorpusError(f"{where}: label {value!r} outside {{0, 1}}")
    if isinstance(value, str):
        key = value.strip().lower()
        if key in _LABEL_NAMES:
            return _LABEL_NAMES[key]
    raise CorpusError(f"{where}: label {value!r} outside {{0, 1}}")


def _read_jsonl(path: Path) -> list:
    docs = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{where}: malformed JSON ({exc.msg})") from None
            if not isinstance(rec, dict) or "text" not in rec or "label" not in rec:
                raise CorpusError(f"{where}: record needs 'text' and 'label' fields")
            if not isinstance(rec["text"], str):
                raise CorpusError(f"{where}: 'text' must be a string")
            docs.append((rec.get("id"), rec["text"], _parse_label(rec["label"], where)))
    return docs


def _read_csv(path: Path) -> list:
    docs = []
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return []
        cols = [h.strip().lower() for h in header]
        if "text" not in cols or "label" not in cols:
            raise CorpusError(f"{path}:1: header must contain 'text' and 'label'")
        ti, li = cols.index("text"), cols.index("label")
        ii = cols.index("id") if "id" in cols else None
        for row in reader:
            where = f"{path}:{reader.line_num}"
            if not row:
                continue
            if len(row) != len(cols):
                raise CorpusError(f"{where}: expected {len(cols)} fields, got {len(row)}")
            ident = row[ii] if ii is not None and row[ii] != "" else None
            docs.append((ident, row[ti], _parse_label(row[li], where)))
    return docs


def load_corpus(path, format: str | None = None) -> list:
    """Read a CSV or JSONL corpus into a list of :class:`Document`.

    Input order is preserved. Records without an ``id`` get their zero-based
    position as id. Empty texts are kept but logged.
    """
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"corpus file not found: {path}")
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "jsonl":
        rows = _read_jsonl(path)
    elif fmt == "csv":
        rows = _read_csv(path)
    else:
        raise CorpusError(f"unsupported corpus format: {fmt!r}")
    if not rows:
        raise CorpusError("empty corpus")

    docs = []
    seen = set()
    for pos, (ident, text, label) in enumerate(rows):
        ident = str(ident) if ident is not None else str(pos)
        if ident in seen:
            raise CorpusError(f"duplicate document id {ident!r}")
        seen.add(ident)
        docs.append(Document(ident, text, label))
    n_empty = sum(1 for d in docs if not d.raw_text.strip())
    if n_empty:
        logger.warning("%d document(s) have empty text", n_empty)
    return docs


def save_corpus(docs: Iterable[Document], path) -> None:
    """Write documents as JSONL (the inverse of ``load_corpus(..., 'jsonl')``)."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(json.dumps({"id": d.id, "text": d.raw_text, "label": d.label}, ensure_ascii=False))
            fh.write("\n")


def count_duplicates(docs: Sequence[Document]) -> int:
    """Number of documents whose exact text already occurred earlier."""
    counts = Counter(d.raw_text for d in docs)
    return sum(c - 1 for c in counts.values() if c > 1)


def corpus_hash(docs: Sequence[Document]) -> str:
    h = hashlib.sha256()
    for d in docs:
        h.update(json.dumps([d.id, d.raw_text, d.label], ensure_ascii=False).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def _part_sizes(n: int, ratios) -> tuple:
    n_train = int(np.floor(n * ratios[0] + 1e-9))
    n_val = int(np.floor(n * ratios[1] + 1e-9))
    return n_train, n_val, n - n_train - n_val


def _allocate(total: int, class_sizes, ratio: float, room) -> list:
    """Split ``total`` over classes by largest remainder of ``n_c * ratio``."""
    exact = [n_c * ratio for n_c in class_sizes]
    alloc = [min(int(np.floor(e + 1e-9)), r) for e, r in zip(exact, room)]
    order = sorted(range(len(exact)), key=lambda c: (-(exact[c] - alloc[c]), c))
    short = total - sum(alloc)
    while short > 0:
        progressed = False
        for c in order:
            if short and alloc[c] < room[c]:
                alloc[c] += 1
                short -= 1
                progressed = True
        if not progressed:
            break
    return alloc


def split_dataset(docs: Sequence[Document], ratios=DEFAULT_RATIOS, seed: int = 42,
                  stratified: bool = True) -> DatasetSplit:
    """Shuffle with ``seed`` and cut into train/val/test.

    Part sizes are ``floor(N*r_train)``, ``floor(N*r_val)`` and the remainder.
    With ``stratified=True`` each part's total is shared between the classes
    by largest remainder, so train and val hold within one document of
    ``n_class * ratio`` per class and test takes what is left.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError("ratios must be three positive fractions")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1.0, got {sum(ratios)!r}")
    n = len(docs)
    if n == 0:
        raise ValueError("cannot split an empty corpus")

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train, n_val, _ = _part_sizes(n, ratios)
    if stratified:
        labels = np.array([docs[i].label for i in perm])
        members = [perm[labels == cls] for cls in (0, 1)]
        for cls, m in enumerate(members):
            if 0 < len(m) < 3:
                raise ValueError(f"class {cls} has {len(m)} document(s); need at least 3 to stratify")
        sizes = [len(m) for m in members]
        a_train = _allocate(n_train, sizes, ratios[0], sizes)
        a_val = _allocate(n_val, sizes, ratios[1], [s - a for s, a in zip(sizes, a_train)])
        part_of = np.empty(n, dtype=np.int8)
        for m, at, av in zip(members, a_train, a_val):
            part_of[m[:at]] = 0
            part_of[m[at:at + av]] = 1
            part_of[m[at + av:]] = 2
        parts = [[docs[i] for i in perm if part_of[i] == k] for k in range(3)]
    else:
        pick = [docs[i] for i in perm]
        parts = [pick[:n_train], pick[n_train:n_train + n_val], pick[n_train + n_val:]]
    return DatasetSplit(train=parts[0], val=parts[1], test=parts[2], seed=seed, ratios=ratios)
