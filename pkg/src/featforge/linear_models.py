"""Binary logistic regression and a gini random forest, both written on numpy."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"X has shape {X.shape}, y has {y.shape[0]} labels")
    if X.shape[0] < 2:
        raise ValueError("need at least two rows")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite feature values")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    if y.min() == y.max():
        raise ValueError("both classes must be present")
    return X, y.astype(np.float64)


# ---------------------------------------------------------------- logistic


@dataclass
class LogisticConfig:
    l2: float = 1.0
    lr: float = 1.0
    max_epochs: int = 200
    tol: float = 1e-6
    seed: int = 42


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    config: LogisticConfig
    converged: bool = False
    n_iter: int = 0
    loss_history: list = field(default_factory=list)

    def to_dict(self):
        return {"weights": [float(w) for w in self.weights], "bias": float(self.bias),
                "config": asdict(self.config), "converged": self.converged, "n_iter": self.n_iter}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["weights"], dtype=np.float64), float(d["bias"]),
                   LogisticConfig(**d["config"]), d.get("converged", False), d.get("n_iter", 0))


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def logistic_loss(w, b, X, y, l2):
    """Mean binary cross-entropy plus ``l2 / (2n) * ||w||^2`` (bias unpenalized)."""
    n = X.shape[0]
    z = X @ w + b
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 / n * (w @ w))


def logistic_grad(w, b, X, y, l2):
    n = X.shape[0]
    r = sigmoid(X @ w + b) - y
    return X.T @ r / n + l2 / n * w, float(r.mean())


def fit_logistic(X, y, config: LogisticConfig | None = None) -> LogisticModel:
    """Full-batch gradient descent with Armijo backtracking.

    The step doubles after every accepted move and halves until the
    sufficient-decrease test passes, so the loss never goes up.
    """
    config = config or LogisticConfig()
    X, y = _check_xy(X, y)
    w = np.zeros(X.shape[1])
    b = 0.0
    step = config.lr
    loss = logistic_loss(w, b, X, y, config.l2)
    history = [loss]
    converged = False
    it = 0
    for it in range(1, config.max_epochs + 1):
        gw, gb = logistic_grad(w, b, X, y, config.l2)
        gnorm2 = float(gw @ gw + gb * gb)
        if math.sqrt(gnorm2) < config.tol:
            converged = True
            it -= 1
            break
        for _ in range(60):
            w_new, b_new = w - step * gw, b - step * gb
            new_loss = logistic_loss(w_new, b_new, X, y, config.l2)
            if new_loss <= loss - 1e-4 * step * gnorm2:
                break
            step *= 0.5
        else:
            converged = True  # no representable descent step left
            break
        w, b, loss = w_new, b_new, new_loss
        history.append(loss)
        step = min(step * 2.0, 1e6)
    if not converged:
        gw, gb = logistic_grad(w, b, X, y, config.l2)
        converged = math.sqrt(float(gw @ gw + gb * gb)) < config.tol
        if not converged:
            logger.debug("logistic fit stopped at max_epochs=%d before gradient tolerance", config.max_epochs)
    return LogisticModel(w, b, config, converged, it, history)


def predict_logistic(model: LogisticModel, X):
    """Return (probabilities of class 1, hard labels at 0.5)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.weights.shape[0]:
        raise ValueError(f"expected {model.weights.shape[0]} features, got shape {X.shape}")
    p = sigmoid(X @ model.weights + model.bias)
    return p, (p >= 0.5).astype(np.int64)


# ---------------------------------------------------------------- forest


@dataclass
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 12
    min_leaf: int = 2
    seed: int = 42
    bootstrap: bool = True
    max_features: str | int | None = "sqrt"
    threads: int | None = None


@dataclass
class Tree:
    feature: np.ndarray    # -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray      # fraction of class 1 among node rows
    n_samples: np.ndarray
    impurity: np.ndarray

    @property
    def depth(self):
        depth = np.zeros(len(self.feature), dtype=int)
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X):
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            f = self.feature[node[idx]]
            go_left = X[idx, f] <= self.threshold[node[idx]]
            node[idx] = np.where(go_left, self.left[node[idx]], self.right[node[idx]])
            active = self.feature[node] >= 0
        return node

    def predict_proba(self, X):
        return self.value[self.apply(np.asarray(X, dtype=np.float64))]

    def importances(self, n_features):
        imp = np.zeros(n_features)
        root_n = self.n_samples[0]
        for i in np.flatnonzero(self.feature >= 0):
            l, r = self.left[i], self.right[i]
            dec = (self.n_samples[i] * self.impurity[i]
                   - self.n_samples[l] * self.impurity[l]
                   - self.n_samples[r] * self.impurity[r]) / root_n
            imp[self.feature[i]] += dec
        return imp

    def to_record(self, i=0):
        if self.feature[i] < 0:
            return {"leaf": True, "value": float(self.value[i]), "n": int(self.n_samples[i])}
        return {"leaf": False, "feature": int(self.feature[i]), "threshold": float(self.threshold[i]),
                "n": int(self.n_samples[i]), "impurity": float(self.impurity[i]),
                "left": self.to_record(int(self.left[i])), "right": self.to_record(int(self.right[i]))}


@dataclass
class RandomForest:
    trees: list
    n_features: int
    config: ForestConfig

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64)
        return np.mean([t.predict_proba(X) for t in self.trees], axis=0)

    def predict(self, X):
        return (self.predict_proba(X) >= 0.5).astype(np.int64)

    def to_dict(self):
        return {"config": asdict(self.config), "n_features": self.n_features,
                "trees": [t.to_record() for t in self.trees]}


def _gini_counts(pos, n):
    """Gini impurity from the positive count; symmetric in the two classes."""
    return 2.0 * pos * (n - pos) / (n * n)


def best_split(X, y, rows, feats, min_leaf):
    """Best gini split over ``feats`` for the node holding ``rows``.

    Returns (feature, threshold, impurity decrease) or None. Thresholds are
    midpoints between consecutive distinct values; ties go to the lowest
    feature index, then the lowest threshold.
    """
    n = len(rows)
    if n < 2 * min_leaf:
        return None
    feats = np.sort(np.asarray(feats))
    sub = X[np.ix_(rows, feats)]
    order = np.argsort(sub, axis=0, kind="stable")
    xs = np.take_along_axis(sub, order, axis=0)
    ys = y[rows][order]
    # integer class counts keep the arithmetic identical when labels are swapped
    left_pos = np.cumsum(ys, axis=0)[:-1]                 # (n-1, k)
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    n_right = n - n_left
    total_pos = ys[:, 0].sum()
    right_pos = total_pos - left_pos
    child = (2.0 * left_pos * (n_left - left_pos) / n_left
             + 2.0 * right_pos * (n_right - right_pos) / n_right) / n
    dec = _gini_counts(total_pos, n) - child
    valid = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    dec = np.where(valid, dec, -np.inf)
    flat = dec.T.ravel()                                   # feature-major, then position
    k = int(np.argmax(flat))
    fi, pos = divmod(k, n - 1)
    thr = 0.5 * (xs[pos, fi] + xs[pos + 1, fi])
    if not thr < xs[pos + 1, fi]:                          # midpoint rounded up onto the right value
        thr = xs[pos, fi]
    return int(feats[fi]), float(thr), float(flat[k])


def _n_split_features(d, max_features):
    if max_features is None or max_features == "all":
        return d
    if max_features == "sqrt":
        return max(1, math.ceil(math.sqrt(d)))
    return max(1, min(d, int(max_features)))


def build_tree(X, y, rows, config: ForestConfig, rng) -> Tree:
    d = X.shape[1]
    m = _n_split_features(d, config.max_features)
    feature, threshold, left, right, value, n_samples, impurity = [], [], [], [], [], [], []

    def new_node(node_rows):
        pos = float(y[node_rows].sum())
        n_node = len(node_rows)
        feature.append(-1); threshold.append(0.0); left.append(-1); right.append(-1)
        value.append(pos / n_node); n_samples.append(n_node); impurity.append(_gini_counts(pos, n_node))
        return len(feature) - 1

    stack = [(new_node(rows), rows, 0)]
    while stack:
        node, node_rows, depth = stack.pop()
        if depth >= config.max_depth or impurity[node] <= 0.0:
            continue
        feats = np.arange(d) if m >= d else rng.choice(d, m, replace=False)
        split = best_split(X, y, node_rows, feats, config.min_leaf)
        if split is None:
            continue
        f, thr, _ = split
        mask = X[node_rows, f] <= thr
        lrows, rrows = node_rows[mask], node_rows[~mask]
        feature[node], threshold[node] = f, thr
        li = new_node(lrows)
        ri = new_node(rrows)
        left[node], right[node] = li, ri
        stack.append((ri, rrows, depth + 1))
        stack.append((li, lrows, depth + 1))
    return Tree(np.array(feature), np.array(threshold), np.array(left), np.array(right),
                np.array(value), np.array(n_samples), np.array(impurity))


def fit_forest(X, y, config: ForestConfig | None = None) -> RandomForest:
    config = config or ForestConfig()
    X, y = _check_xy(X, y)
    n = X.shape[0]
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_trees)

    def grow(ss):
        rng = np.random.default_rng(ss)
        rows = rng.integers(0, n, n) if config.bootstrap else np.arange(n)
        return build_tree(X, y, np.sort(rows), config, rng)

    from .features.embeddings import resolve_threads
    threads = resolve_threads(config.threads if config.threads is not None else 1)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(grow, seeds))
    else:
        trees = [grow(s) for s in seeds]
    return RandomForest(trees, X.shape[1], config)


def forest_feature_importance(forest: RandomForest):
    """Mean (over trees) weighted gini decrease per column, normalized to sum 1.

    Returns (importances, degenerate); ``degenerate`` is True when no tree
    split at all and the uniform vector was returned instead.
    """
    imp = np.mean([t.importances(forest.n_features) for t in forest.trees], axis=0)
    total = imp.sum()
    if total <= 0:
        logger.warning("forest made no splits; importance is uniform")
        return np.full(forest.n_features, 1.0 / forest.n_features), True
    return imp / total, False
