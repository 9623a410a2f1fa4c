"""Column scoring and feature-set selection.

Filter scores (ANOVA F, chi-square, mutual information, Pearson correlation)
are computed per column. Wrapper methods (RFE, forward selection and the
exhaustive combination test) fit logistic regression. ``build_set_report``
rolls everything up to one row per feature set.

Undefined scores are NaN and always rank after defined ones.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .features.embeddings import resolve_threads
from .linear_models import LogisticConfig, fit_logistic, predict_logistic
from .metrics import summary_scores

logger = logging.getLogger(__name__)

METHODS = ("f_classif", "chi2", "mutual_info", "rf_importance", "correlation", "rfe")


@dataclass
class ColumnScores:
    method: str
    scores: np.ndarray
    selected: np.ndarray | None = None
    ranks: np.ndarray | None = None

    def to_rows(self, labels=None):
        n = len(self.scores)
        labels = labels if labels is not None else [str(i) for i in range(n)]
        for i in range(n):
            row = {"column": labels[i], "score": _num(self.scores[i])}
            if self.selected is not None:
                row["selected"] = bool(self.selected[i])
            if self.ranks is not None:
                row["rank"] = int(self.ranks[i])
            yield row


def _values(m):
    return np.asarray(m.values if hasattr(m, "values") else m, dtype=np.float64)


def _labels(y):
    y = np.asarray(y).astype(np.int64)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    return y


def _two_classes(y):
    y = _labels(y)
    if y.min() == y.max():
        raise ValueError("both classes must be present")
    return y


def _num(v):
    v = float(v)
    if math.isnan(v):
        return None
    return v


# ---------------------------------------------------------------- filters


def pearson_r(x, y) -> float:
    """Pearson correlation; NaN when either input has zero variance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise ValueError("need at least two samples")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return math.nan
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def pearson_columns(X, y) -> np.ndarray:
    X = _values(X)
    y = np.asarray(y, dtype=np.float64)
    dx = X - X.mean(axis=0)
    dy = y - y.mean()
    sxx = np.einsum("ij,ij->j", dx, dx)
    syy = float(dy @ dy)
    num = dx.T @ dy
    with np.errstate(invalid="ignore", divide="ignore"):
        r = num / np.sqrt(sxx * syy)
    r[(sxx == 0) | (syy == 0)] = np.nan
    return np.clip(r, -1.0, 1.0)


def anova_f_scores(X, y) -> ColumnScores:
    """Two-group one-way ANOVA F per column.

    Zero within-class variance gives 0 when the class means agree and +inf
    when they differ.
    """
    X = _values(X)
    y = _two_classes(y)
    n = len(y)
    k = 2
    grand = X.mean(axis=0)
    ssb = np.zeros(X.shape[1])
    ssw = np.zeros(X.shape[1])
    for c in (0, 1):
        Xc = X[y == c]
        mc = Xc.mean(axis=0)
        ssb += len(Xc) * (mc - grand) ** 2
        ssw += ((Xc - mc) ** 2).sum(axis=0)
    msb = ssb / (k - 1)
    msw = ssw / (n - k)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = msb / msw
    zero_w = ssw == 0
    m0, m1 = X[y == 0].mean(axis=0), X[y == 1].mean(axis=0)
    f[zero_w & (m0 == m1)] = 0.0
    f[zero_w & (m0 != m1)] = np.inf
    return ColumnScores("f_classif", f)


def chi_square_scores(X, y, labels=None) -> ColumnScores:
    """Chi-square of per-class feature sums against prevalence-proportional sums."""
    X = _values(X)
    y = _two_classes(y)
    neg = np.flatnonzero((X < 0).any(axis=0))
    if len(neg):
        j = int(neg[0])
        name = labels[j] if labels is not None else j
        raise ValueError(f"chi-square needs non-negative input; column {name!r} has negative entries")
    total = X.sum(axis=0)
    n = len(y)
    chi = np.zeros(X.shape[1])
    for c in (0, 1):
        observed = X[y == c].sum(axis=0)
        expected = total * (np.sum(y == c) / n)
        with np.errstate(divide="ignore", invalid="ignore"):
            chi += (observed - expected) ** 2 / expected
    chi[total == 0] = np.nan
    return ColumnScores("chi2", chi)


def discretize(x, n_bins: int = 16) -> np.ndarray:
    """Bin ids for one column.

    Columns with at most ``n_bins`` distinct values get one bin per value;
    otherwise bins are cut at the column's quantiles.
    """
    x = np.asarray(x, dtype=np.float64)
    uniq = np.unique(x)
    if len(uniq) <= n_bins:
        return np.searchsorted(uniq, x)
    edges = np.unique(np.quantile(x, np.linspace(0.0, 1.0, n_bins + 1)))
    return np.searchsorted(edges[1:-1], x, side="right")


def mutual_info_discrete(a, b) -> float:
    """Plug-in mutual information (nats) of two discrete label arrays."""
    a = np.asarray(a)
    b = np.asarray(b)
    n = len(a)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    joint = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(joint, (ai, bi), 1.0)
    pj = joint / n
    pa = pj.sum(axis=1, keepdims=True)
    pb = pj.sum(axis=0, keepdims=True)
    nz = pj > 0
    mi = float(np.sum(pj[nz] * np.log(pj[nz] / (pa @ pb)[nz])))
    return max(mi, 0.0)


def mutual_info_scores(X, y, n_bins: int = 16) -> ColumnScores:
    X = _values(X)
    y = _two_classes(y)
    mi = np.array([mutual_info_discrete(discretize(X[:, j], n_bins), y) for j in range(X.shape[1])])
    return ColumnScores("mutual_info", mi)


def correlation_set_score(X_set, y) -> float:
    """Mean absolute Pearson r over the set's columns, skipping degenerate ones."""
    X = _values(X_set)
    if X.shape[0] < 2:
        raise ValueError("need at least two rows")
    r = pearson_columns(X, y)
    r = r[~np.isnan(r)]
    return float(np.mean(np.abs(r))) if len(r) else math.nan


def top_k_mask(scores, k: int) -> np.ndarray:
    """Mask of the k best scores (NaN last, ties to the lower column index)."""
    scores = np.asarray(scores, dtype=np.float64)
    key = np.where(np.isnan(scores), -np.inf, scores)
    nan_last = np.isnan(scores).astype(int)
    order = np.lexsort((np.arange(len(scores)), -key, nan_last))
    mask = np.zeros(len(scores), dtype=bool)
    mask[order[:k]] = True
    return mask


# ---------------------------------------------------------------- wrappers


def rfe_select(X, y, target_k: int = 6, step: int = 1, config: LogisticConfig | None = None) -> ColumnScores:
    """Recursive elimination of the smallest-|weight| columns.

    ``ranks`` is 1 for the survivors, 2 for the last columns removed, and so
    on. ``scores`` holds each column's |weight| from the last fit it took part in.
    """
    X = _values(X)
    y = _two_classes(y)
    d = X.shape[1]
    if target_k < 1 or d < target_k:
        raise ValueError(f"need 1 <= target_k <= {d}, got {target_k}")
    if step < 1:
        raise ValueError("step must be >= 1")
    config = config or LogisticConfig()
    remaining = np.arange(d)
    scores = np.zeros(d)
    elim_round = np.zeros(d, dtype=int)
    rnd = 0
    while True:
        model = fit_logistic(X[:, remaining], y, config)
        if not model.converged:
            logger.warning("rfe: base fit on %d columns stopped before convergence; using last iterate",
                           len(remaining))
        w = np.abs(model.weights)
        scores[remaining] = w
        if len(remaining) <= target_k:
            break
        rnd += 1
        n_drop = min(step, len(remaining) - target_k)
        drop = np.argsort(w, kind="stable")[:n_drop]
        elim_round[remaining[drop]] = rnd
        remaining = np.delete(remaining, drop)
    ranks = np.where(elim_round == 0, 1, rnd - elim_round + 2)
    selected = elim_round == 0
    return ColumnScores("rfe", scores, selected, ranks)


def _as_pair(v):
    train, val = v
    return _values(train), _values(val)


def evaluate_subset(sets: dict, subset, y_train, y_val, config: LogisticConfig | None = None) -> dict:
    Xtr = np.hstack([_as_pair(sets[s])[0] for s in subset])
    Xva = np.hstack([_as_pair(sets[s])[1] for s in subset])
    model = fit_logistic(Xtr, y_train, config or LogisticConfig())
    _, pred = predict_logistic(model, Xva)
    return summary_scores(y_val, pred)


def forward_select(sets: dict, y_train, y_val, metric: str = "f1_fake",
                   config: LogisticConfig | None = None, threads=None) -> list:
    """Greedy set-level forward selection on a validation metric.

    Returns ``[(set_name, score), ...]`` for every accepted step. Stops as
    soon as no remaining set strictly improves the best score. Equal scores
    go to the lexicographically smaller name.
    """
    y_train, y_val = _labels(y_train), _labels(y_val)
    remaining = sorted(sets)
    chosen: list = []
    steps = []
    best = -math.inf
    threads = resolve_threads(threads if threads is not None else 1)
    while remaining:
        subsets = [chosen + [c] for c in remaining]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda s: evaluate_subset(sets, s, y_train, y_val, config)[metric], subsets))
        k = int(np.argmax(results))  # first max -> smallest name
        if not results[k] > best:
            break
        best = results[k]
        chosen.append(remaining.pop(k))
        steps.append((chosen[-1], float(best)))
    return steps


@dataclass
class CombinationResult:
    subset: tuple
    accuracy: float
    f1_fake: float
    f1_real: float
    f1_macro: float


def enumerate_subsets(names, k_min: int = 1):
    names = list(names)
    if not 1 <= k_min <= len(names):
        raise ValueError(f"k_min must be in [1, {len(names)}]")
    for r in range(k_min, len(names) + 1):
        yield from itertools.combinations(names, r)


def combo_test(sets: dict, y_train, y_val, k_min: int = 1, config: LogisticConfig | None = None,
               threads=None) -> list:
    """Score every subset of at least ``k_min`` sets and rank by fake-class F1.

    Subsets are visited by size, then lexicographically over the sorted set
    names; the sort is stable so that order breaks F1 ties.
    """
    y_train, y_val = _labels(y_train), _labels(y_val)
    subsets = list(enumerate_subsets(sorted(sets), k_min))
    threads = resolve_threads(threads if threads is not None else 1)

    def run(sub):
        return CombinationResult(tuple(sub), **evaluate_subset(sets, sub, y_train, y_val, config))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, subsets))
    else:
        results = [run(s) for s in subsets]
    return sorted(results, key=lambda r: -r.f1_fake)


COMBO_COLUMNS = ["subset", "accuracy", "f1_fake", "f1_real", "f1_macro"]


def combinations_csv(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMBO_COLUMNS)
    for r in results:
        w.writerow(["+".join(r.subset), repr(r.accuracy), repr(r.f1_fake), repr(r.f1_real), repr(r.f1_macro)])
    return buf.getvalue()


def parse_combinations_csv(text: str) -> list:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [CombinationResult(tuple(r["subset"].split("+")), float(r["accuracy"]), float(r["f1_fake"]),
                              float(r["f1_real"]), float(r["f1_macro"])) for r in rows]


def top_table(results, top: int = 10) -> list:
    """Rows shaped like the top-N combination table: (feature combination, fake F1)."""
    return [{"Feature Combination": ", ".join(r.subset), "F1-score": round(r.f1_fake, 3)} for r in results[:top]]


# ---------------------------------------------------------------- set report

TABLE_HEADERS = ["Feature", "F-CLASSIF", "RF Importance", "Correlation Score", "Forward Selection", "Overall Rank"]


@dataclass
class SetRow:
    name: str
    f_classif_selected: int
    rf_mean_importance: float
    mean_abs_correlation: float
    forward_step: int | None
    forward_score: float | None
    rfe_selected: int
    chi2_mean: float | None = None
    mutual_info_mean: float | None = None
    method_ranks: dict = field(default_factory=dict)
    mean_rank: float = 0.0
    overall_rank: int = 0


@dataclass
class SetLevelReport:
    rows: list
    f_classif_k: int

    def row(self, name) -> SetRow:
        return next(r for r in self.rows if r.name == name)

    def to_dict(self):
        out = []
        for r in self.rows:
            d = asdict(r)
            for key in ("rf_mean_importance", "mean_abs_correlation", "chi2_mean", "mutual_info_mean"):
                if d[key] is not None:
                    d[key] = _num(d[key])
            out.append(d)
        return {"f_classif_k": self.f_classif_k, "rows": out}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self) -> list:
        """Display rows keyed by TABLE_HEADERS, best set first."""
        rows = []
        for r in sorted(self.rows, key=lambda r: r.overall_rank):
            fwd = "Not selected" if r.forward_step is None else f"Step {r.forward_step} (F1 to {r.forward_score:.4f})"
            corr = "NaN" if math.isnan(r.mean_abs_correlation) else f"{r.mean_abs_correlation:.4f}"
            rows.append(dict(zip(TABLE_HEADERS, [
                r.name, f"{r.f_classif_selected} selected", f"{r.rf_mean_importance:.4f}", corr, fwd,
                _ordinal(r.overall_rank)])))
        return rows


def _ordinal(n):
    suffix = "th" if 10 <= n % 100 <= 20 else {1: "st", 2: "nd", 3: "rd"}.get(n % 10, "th")
    return f"{n}{suffix}"


def _rank_desc(values: dict) -> dict:
    """Competition ranks (1 = largest); NaN/None rank after every defined value."""
    def key(v):
        return math.inf if v is None or (isinstance(v, float) and math.isnan(v)) else -v
    ordered = sorted(values, key=lambda k: key(values[k]))
    ranks = {}
    for i, k in enumerate(ordered):
        prev = ordered[i - 1] if i else None
        ranks[k] = ranks[prev] if prev is not None and key(values[prev]) == key(values[k]) else i + 1
    return ranks


def build_set_report(set_names, column_sets, *, f_classif: ColumnScores, rf_importance: ColumnScores,
                     rfe: ColumnScores, correlation: dict, forward: list, chi2: ColumnScores | None = None,
                     mutual_info: ColumnScores | None = None, f_classif_k: int = 6) -> SetLevelReport:
    """Aggregate column-level outputs into one row per feature set.

    ``column_sets[j]`` names the set that column ``j`` came from. Per-method
    set ranks use: F-test top-K count, mean forest importance, mean |r|,
    forward step (earlier is better, unselected last) and RFE survivor count.
    The overall rank orders sets by their mean method rank, ties by name.
    """
    for name, value in (("f_classif", f_classif), ("rf_importance", rf_importance), ("rfe", rfe),
                        ("correlation", correlation), ("forward", forward)):
        if value is None:
            raise ValueError(f"missing method output: {name}")
    if rfe.selected is None:
        raise ValueError("rfe output carries no selection mask")
    column_sets = np.asarray(column_sets)
    set_names = list(set_names)
    fmask = top_k_mask(f_classif.scores, f_classif_k)
    step_of = {name: (i + 1, score) for i, (name, score) in enumerate(forward)}

    def set_mean(cs, name):
        if cs is None:
            return None
        vals = np.asarray(cs.scores, dtype=np.float64)[column_sets == name]
        vals = vals[np.isfinite(vals)]
        return float(vals.mean()) if len(vals) else math.nan

    rows = []
    for name in set_names:
        cols = column_sets == name
        step, score = step_of.get(name, (None, None))
        rows.append(SetRow(
            name=name,
            f_classif_selected=int(fmask[cols].sum()),
            rf_mean_importance=float(np.mean(rf_importance.scores[cols])),
            mean_abs_correlation=float(correlation.get(name, math.nan)),
            forward_step=step,
            forward_score=score,
            rfe_selected=int(np.asarray(rfe.selected)[cols].sum()),
            chi2_mean=set_mean(chi2, name),
            mutual_info_mean=set_mean(mutual_info, name),
        ))
    by_method = {
        "f_classif": _rank_desc({r.name: float(r.f_classif_selected) for r in rows}),
        "rf_importance": _rank_desc({r.name: r.rf_mean_importance for r in rows}),
        "correlation": _rank_desc({r.name: r.mean_abs_correlation for r in rows}),
        "forward": _rank_desc({r.name: (None if r.forward_step is None else -float(r.forward_step)) for r in rows}),
        "rfe": _rank_desc({r.name: float(r.rfe_selected) for r in rows}),
    }
    for r in rows:
        r.method_ranks = {m: by_method[m][r.name] for m in by_method}
        r.mean_rank = float(np.mean(list(r.method_ranks.values())))
    for i, r in enumerate(sorted(rows, key=lambda r: (r.mean_rank, r.name))):
        r.overall_rank = i + 1
    return SetLevelReport(rows, f_classif_k)
