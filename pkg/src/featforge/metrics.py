"""Binary classification metrics with fake (label 0) and real (label 1) breakdowns."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FAKE, REAL = 0, 1


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn


def _check(y_true, y_pred):
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    for name, arr in (("y_true", y_true), ("y_pred", y_pred)):
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError(f"{name} contains non-binary labels")
    return y_true.astype(np.int64), y_pred.astype(np.int64)


def confusion_counts(y_true, y_pred, positive_class: int = FAKE) -> ConfusionCounts:
    y_true, y_pred = _check(y_true, y_pred)
    t = y_true == positive_class
    p = y_pred == positive_class
    return ConfusionCounts(int(np.sum(t & p)), int(np.sum(~t & p)), int(np.sum(~t & ~p)), int(np.sum(t & ~p)))


def _safe_div(a, b):
    return a / b if b else 0.0


def prf(c: ConfusionCounts) -> dict:
    p = _safe_div(c.tp, c.tp + c.fp)
    r = _safe_div(c.tp, c.tp + c.fn)
    return {"precision": p, "recall": r, "f1": _safe_div(2 * p * r, p + r)}


def classification_report(y_true, y_pred) -> dict:
    """Accuracy, per-class and macro/weighted precision, recall and F1.

    Zero denominators give 0. ``confusion`` is ``[[tn, fp], [fn, tp]]`` with
    real (label 1) as the positive class, i.e. rows are true labels 0, 1.
    """
    y_true, y_pred = _check(y_true, y_pred)
    n = len(y_true)
    fake = prf(confusion_counts(y_true, y_pred, FAKE))
    real = prf(confusion_counts(y_true, y_pred, REAL))
    support = {"fake": int(np.sum(y_true == FAKE)), "real": int(np.sum(y_true == REAL))}
    macro = {k: (fake[k] + real[k]) / 2 for k in fake}
    weighted = {k: _safe_div(fake[k] * support["fake"] + real[k] * support["real"], n) for k in fake}
    cr = confusion_counts(y_true, y_pred, REAL)
    return {
        "accuracy": _safe_div(int(np.sum(y_true == y_pred)), n),
        "per_class": {"fake": fake, "real": real},
        "macro": macro,
        "weighted": weighted,
        "support": support,
        "confusion": [[cr.tn, cr.fp], [cr.fn, cr.tp]],
    }


def summary_scores(y_true, y_pred) -> dict:
    """The four numbers ranked by combination testing."""
    rep = classification_report(y_true, y_pred)
    return {"accuracy": rep["accuracy"], "f1_fake": rep["per_class"]["fake"]["f1"],
            "f1_real": rep["per_class"]["real"]["f1"], "f1_macro": rep["macro"]["f1"]}


def _short(block):
    return {"p": block["precision"], "r": block["recall"], "f1": block["f1"]}


def metrics_json(report: dict) -> dict:
    """Shape of a ``metrics.json`` file."""
    return {
        "accuracy": report["accuracy"],
        "per_class": {k: _short(v) for k, v in report["per_class"].items()},
        "macro": _short(report["macro"]),
        "weighted": _short(report["weighted"]),
        "confusion": report["confusion"],
    }


def write_metrics(report: dict, path) -> None:
    Path(path).write_text(json.dumps(metrics_json(report), indent=2, sort_keys=True), encoding="utf-8")
