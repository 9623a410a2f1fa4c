"""Dense feature matrices, concatenation, scaling and the FMAT file format."""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SET_NAMES = ("tfidf", "word2vec", "fasttext", "ngram", "char", "stats")

FMAT_MAGIC = b"FMAT"
FMAT_VERSION = 1
_HEADER = struct.Struct("<4sBII")


class FormatError(ValueError):
    pass


@dataclass
class FeatureMatrix:
    set_name: str
    column_labels: list
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 2:
            raise ValueError("feature values must be 2-D")
        if self.values.shape[1] != len(self.column_labels):
            raise ValueError(
                f"{self.set_name}: {self.values.shape[1]} columns but {len(self.column_labels)} labels")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"{self.set_name}: non-finite feature values")

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_rows(self):
        return self.values.shape[0]

    @property
    def n_cols(self):
        return self.values.shape[1]

    def take_rows(self, rows) -> "FeatureMatrix":
        return FeatureMatrix(self.set_name, list(self.column_labels), self.values[rows], dict(self.meta))

    def save(self, path, config: dict | None = None, corpus_hash: str | None = None) -> None:
        write_fmat(path, self.values)
        meta = {
            "set_name": self.set_name,
            "column_labels": list(self.column_labels),
            "source_corpus_hash": corpus_hash if corpus_hash is not None else self.meta.get("source_corpus_hash"),
            "config": config if config is not None else self.meta.get("config", {}),
        }
        Path(_meta_path(path)).write_text(json.dumps(meta, ensure_ascii=False, indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "FeatureMatrix":
        values = read_fmat(path)
        meta = json.loads(Path(_meta_path(path)).read_text(encoding="utf-8"))
        return cls(meta["set_name"], meta["column_labels"], values,
                   {"source_corpus_hash": meta.get("source_corpus_hash"), "config": meta.get("config", {})})


def _meta_path(path) -> str:
    p = str(path)
    stem = p[:-5] if p.endswith(".fmat") else p
    return stem + ".meta.json"


def write_fmat(path, values: np.ndarray) -> None:
    values = np.ascontiguousarray(values, dtype="<f4")
    rows, cols = values.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FMAT_MAGIC, FMAT_VERSION, rows, cols))
        fh.write(values.tobytes(order="C"))


def read_fmat(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise FormatError(f"{path}: truncated header")
        magic, version, rows, cols = _HEADER.unpack(head)
        if magic != FMAT_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        if version != FMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        body = fh.read()
    if len(body) != rows * cols * 4:
        raise FormatError(f"{path}: expected {rows * cols * 4} payload bytes, got {len(body)}")
    return np.frombuffer(body, dtype="<f4").reshape(rows, cols).astype(np.float32)


def concatenate(parts) -> FeatureMatrix:
    """Column-wise concatenation; labels become ``"<set>:<label>"``."""
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to concatenate")
    if len(parts) == 1:
        return parts[0]
    n = parts[0].n_rows
    for p in parts[1:]:
        if p.n_rows != n:
            raise ValueError(f"row count mismatch: {p.set_name} has {p.n_rows}, expected {n}")
    labels = [f"{p.set_name}:{lab}" for p in parts for lab in p.column_labels]
    values = np.hstack([p.values for p in parts])
    return FeatureMatrix("+".join(p.set_name for p in parts), labels, values)


def minmax_scale(m: FeatureMatrix, fit_rows=None) -> FeatureMatrix:
    """Per-column (x - min) / (max - min) with min/max taken from ``fit_rows``.

    Constant columns map to 0 and rows outside the fit set are clipped to [0, 1].
    The input dtype is kept (float32 storage stays float32).
    """
    dtype = np.float64 if m.values.dtype == np.float64 else np.float32
    X = np.asarray(m.values, dtype=np.float64)
    fit = X if fit_rows is None else X[fit_rows]
    if fit.shape[0] == 0:
        raise ValueError("fit_rows is empty")
    lo, hi = fit.min(axis=0), fit.max(axis=0)
    return FeatureMatrix(m.set_name, list(m.column_labels), _scale(X, lo, hi).astype(dtype), dict(m.meta))


class MinMaxScaler:
    """Stateful form of :func:`minmax_scale` for scaling held-out splits."""

    def fit(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[0] == 0:
            raise ValueError("cannot fit scaler on zero rows")
        self.min_, self.max_ = X.min(axis=0), X.max(axis=0)
        return self

    def transform(self, X):
        return _scale(np.asarray(X, dtype=np.float64), self.min_, self.max_)


def _scale(X, lo, hi):
    span = hi - lo
    const = span <= 0
    out = (X - lo) / np.where(const, 1.0, span)
    out[:, const] = 0.0
    return np.clip(out, 0.0, 1.0)
