"""Multi-branch 1D-CNN binary classifier on numpy.

Each feature set feeds its own branch: the feature vector is read as a
length-d, one-channel sequence, convolved (valid padding, ReLU), passed
through dropout and globally max-pooled to ``filters`` values. Branch outputs
are concatenated and classified by a dense head ending in one sigmoid unit.

Parameters live in an ordered ``dict`` of numpy arrays; gradients use the
same keys. Training runs in float32; building the model with
``dtype=np.float64`` gives the verification mode used by gradient checks.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

PROB_CLIP = 1e-7


class TrainingError(RuntimeError):
    pass


@dataclass
class BranchSpec:
    input_dim: int
    conv_filters: int = 64
    kernel_size: int = 3
    activation: str = "relu"
    dropout: float = 0.3

    def __post_init__(self):
        if self.kernel_size > self.input_dim:
            raise ValueError(f"kernel_size {self.kernel_size} exceeds input width {self.input_dim}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")


@dataclass
class CnnModel:
    branches: list
    head_units: list
    head_dropout: list
    params: dict
    seed: int = 42

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    @property
    def concat_width(self):
        return sum(b.conv_filters for b in self.branches)

    def architecture(self) -> dict:
        return {"branches": [asdict(b) for b in self.branches], "head_units": list(self.head_units),
                "head_dropout": list(self.head_dropout), "seed": self.seed,
                "dtype": np.dtype(self.dtype).name, "params": {k: list(v.shape) for k, v in self.params.items()}}

    def copy_params(self) -> dict:
        return {k: v.copy() for k, v in self.params.items()}

    def n_parameters(self) -> int:
        return int(sum(v.size for v in self.params.values()))


def _glorot(rng, shape, fan_in, fan_out, dtype):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def build_multibranch_cnn(feature_dims, filters: int = 64, kernel_size: int = 3, branch_dropout: float = 0.3,
                          head_units=(256, 128, 64), head_dropout=(0.5, 0.3, 0.0), seed: int = 42,
                          dtype=np.float32, zero_init: bool = False) -> CnnModel:
    feature_dims = list(feature_dims)
    if not feature_dims:
        raise ValueError("need at least one branch")
    if len(head_dropout) != len(head_units):
        raise ValueError("head_dropout needs one rate per hidden layer")
    branches = [BranchSpec(int(d), filters, kernel_size, "relu", branch_dropout) for d in feature_dims]
    rng = np.random.default_rng(seed)
    params = {}
    for i, b in enumerate(branches):
        k, f = b.kernel_size, b.conv_filters
        params[f"branch{i}.conv.W"] = _glorot(rng, (k, f), k, k * f, dtype)
        params[f"branch{i}.conv.b"] = np.zeros(f, dtype=dtype)
    widths = [sum(b.conv_filters for b in branches), *head_units, 1]
    for j in range(len(widths) - 1):
        name = f"dense{j}" if j < len(head_units) else "out"
        params[f"{name}.W"] = _glorot(rng, (widths[j], widths[j + 1]), widths[j], widths[j + 1], dtype)
        params[f"{name}.b"] = np.zeros(widths[j + 1], dtype=dtype)
    if zero_init:
        params = {k: np.zeros_like(v) for k, v in params.items()}
    return CnnModel(branches, list(head_units), list(head_dropout), params, seed)


def _dense_names(model):
    return [f"dense{j}" for j in range(len(model.head_units))] + ["out"]


def _sigmoid(z):
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _check_inputs(model, xs):
    if len(xs) != len(model.branches):
        raise ValueError(f"model has {len(model.branches)} branches, got {len(xs)} inputs")
    out = []
    n = None
    for i, (x, b) in enumerate(zip(xs, model.branches)):
        x = np.asarray(x, dtype=model.dtype)
        if x.ndim != 2 or x.shape[1] != b.input_dim:
            raise ValueError(f"branch {i}: expected width {b.input_dim}, got shape {x.shape}")
        if n is not None and x.shape[0] != n:
            raise ValueError("branch inputs have different row counts")
        n = x.shape[0]
        out.append(x)
    return out


def conv1d_valid(x, W, b):
    """(B, d) x (k, F) -> (B, d-k+1, F), single input channel."""
    k = W.shape[0]
    L = x.shape[1] - k + 1
    z = np.empty((x.shape[0], L, W.shape[1]), dtype=np.result_type(x, W))
    z[...] = b
    for j in range(k):
        z += x[:, j:j + L, None] * W[j]
    return z


def forward(model: CnnModel, xs, training: bool = False, rng=None, masks=None):
    """Probabilities of class 1 and a cache for :func:`backward`.

    With ``training=True`` inverted dropout masks are drawn from ``rng``
    (or taken from ``masks`` when given, e.g. a previous cache's masks).
    """
    xs = _check_inputs(model, xs)
    P = model.params
    dtype = model.dtype
    if training and masks is None and rng is None:
        rng = np.random.default_rng(model.seed)
    new_masks = {}

    def mask_for(key, shape, rate):
        if not training or rate <= 0:
            return None
        if masks is not None:
            return masks.get(key)
        m = (rng.random(shape) >= rate).astype(dtype) / dtype.type(1.0 - rate)
        new_masks[key] = m
        return m

    cache = {"xs": xs, "branch": [], "dense": []}
    pooled = []
    for i, (x, spec) in enumerate(zip(xs, model.branches)):
        z = conv1d_valid(x, P[f"branch{i}.conv.W"], P[f"branch{i}.conv.b"])
        a = np.maximum(z, 0)
        m = mask_for(f"branch{i}", a.shape, spec.dropout)
        if m is not None:
            a = a * m
        arg = a.argmax(axis=1)                                   # (B, F)
        pooled.append(np.take_along_axis(a, arg[:, None, :], axis=1)[:, 0, :])
        z_at = np.take_along_axis(z, arg[:, None, :], axis=1)[:, 0, :]
        m_at = np.take_along_axis(m, arg[:, None, :], axis=1)[:, 0, :] if m is not None else None
        cache["branch"].append((arg, z_at, m_at))
    h = np.concatenate(pooled, axis=1)
    names = _dense_names(model)
    rates = list(model.head_dropout) + [0.0]
    for j, name in enumerate(names):
        z = h @ P[f"{name}.W"] + P[f"{name}.b"]
        if name == "out":
            cache["dense"].append((h, None, None))
            h = z
            break
        a = np.maximum(z, 0)
        m = mask_for(name, a.shape, rates[j])
        cache["dense"].append((h, z, m))
        h = a * m if m is not None else a
    logits = h[:, 0]
    cache["masks"] = masks if masks is not None else new_masks
    return _sigmoid(logits), cache


def bce_loss(probs, y) -> float:
    p = np.clip(np.asarray(probs, dtype=np.float64), PROB_CLIP, 1.0 - PROB_CLIP)
    y = np.asarray(y, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def backward(model: CnnModel, cache, probs, y) -> dict:
    """Gradients of the mean BCE with respect to every parameter."""
    P = model.params
    y = np.asarray(y, dtype=model.dtype)
    B = len(y)
    g = ((probs - y) / B).astype(model.dtype)[:, None]          # dL/dlogit
    grads = {}
    names = _dense_names(model)
    for j in range(len(names) - 1, -1, -1):
        name = names[j]
        h_in, z, m = cache["dense"][j]
        if name != "out":
            if m is not None:
                g = g * m
            g = g * (z > 0)
        grads[f"{name}.W"] = h_in.T @ g
        grads[f"{name}.b"] = g.sum(axis=0)
        g = g @ P[f"{name}.W"].T
    offset = 0
    for i, (x, spec) in enumerate(zip(cache["xs"], model.branches)):
        F = spec.conv_filters
        gp = g[:, offset:offset + F]
        offset += F
        arg, z_at, m_at = cache["branch"][i]
        if m_at is not None:
            gp = gp * m_at
        gz = gp * (z_at > 0)                                     # (B, F)
        k = spec.kernel_size
        # input window feeding each pooled position: x[b, arg + j]
        win = np.stack([np.take_along_axis(x, arg + j, axis=1) for j in range(k)], axis=0)  # (k, B, F)
        grads[f"branch{i}.conv.W"] = np.einsum("kbf,bf->kf", win, gz)
        grads[f"branch{i}.conv.b"] = gz.sum(axis=0)
    return grads


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            self.m[k] = b1 * self.m[k] + (1.0 - b1) * g
            self.v[k] = b2 * self.v[k] + (1.0 - b2) * g * g
            update = self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
            params[k] -= update.astype(params[k].dtype)


def backward_and_step(model: CnnModel, xs, y, opt: AdamState, rng=None) -> float:
    """One training step; returns the loss before the update."""
    probs, cache = forward(model, xs, training=True, rng=rng)
    loss = bce_loss(probs, y)
    if not math.isfinite(loss):
        raise TrainingError(f"non-finite loss {loss} at optimizer step {opt.t + 1}")
    opt.step(model.params, backward(model, cache, probs, y))
    return loss


def predict_proba(model: CnnModel, xs, batch_size: int = 256) -> np.ndarray:
    xs = _check_inputs(model, xs)
    n = xs[0].shape[0]
    out = np.empty(n, dtype=np.float64)
    for s in range(0, n, batch_size):
        p, _ = forward(model, [x[s:s + batch_size] for x in xs], training=False)
        out[s:s + batch_size] = p
    return out


def predict_labels(model: CnnModel, xs, threshold: float = 0.5) -> np.ndarray:
    return (predict_proba(model, xs) >= threshold).astype(np.int64)


def threshold_labels(probs, threshold: float = 0.5) -> np.ndarray:
    return (np.asarray(probs) >= threshold).astype(np.int64)


# ---------------------------------------------------------------- training


@dataclass
class TrainConfig:
    epochs: int = 50
    loss: str = "binary_crossentropy"
    optimizer: str = "adam"
    lr: float = 1e-4
    batch_size: int = 16
    early_stop_patience: int = 5
    plateau_patience: int = 3
    plateau_factor: float = 0.5
    min_lr: float = 1e-7
    min_delta: float = 1e-6
    seed: int = 42

    def __post_init__(self):
        for name in ("epochs", "batch_size", "early_stop_patience", "plateau_patience"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.lr < 0 or not 0 < self.plateau_factor < 1:
            raise ValueError("lr must be >= 0 and plateau_factor in (0, 1)")


class EarlyStopping:
    """Stop once the monitored loss has not improved for ``patience`` epochs."""

    def __init__(self, patience=5, min_delta=1e-6):
        self.patience = patience
        self.min_delta = min_delta
        self.best = math.inf
        self.best_epoch = 0
        self.wait = 0

    def update(self, epoch: int, loss: float) -> bool:
        """Record ``loss`` for ``epoch``; True means stop now."""
        if loss < self.best - self.min_delta:
            self.best = loss
            self.best_epoch = epoch
            self.wait = 0
            return False
        self.wait += 1
        return self.wait >= self.patience


class ReduceLROnPlateau:
    """Multiply the rate by ``factor`` after ``patience`` epochs without improvement."""

    def __init__(self, factor=0.5, patience=3, min_lr=1e-7, min_delta=1e-6):
        self.factor = factor
        self.patience = patience
        self.min_lr = min_lr
        self.min_delta = min_delta
        self.best = math.inf
        self.wait = 0

    def update(self, loss: float, lr: float) -> float:
        if loss < self.best - self.min_delta:
            self.best = loss
            self.wait = 0
            return lr
        self.wait += 1
        if self.wait >= self.patience:
            self.wait = 0
            if lr > self.min_lr:
                return max(lr * self.factor, self.min_lr)
        return lr


HISTORY_COLUMNS = ["epoch", "lr", "train_loss", "val_loss", "train_acc", "val_acc",
                   "train_precision", "val_precision", "train_recall", "val_recall"]


@dataclass
class TrainHistory:
    epoch: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    train_precision: list = field(default_factory=list)
    val_precision: list = field(default_factory=list)
    train_recall: list = field(default_factory=list)
    val_recall: list = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0
    early_stopped: bool = False
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for i in range(len(self.epoch)):
            w.writerow([self.epoch[i]] + [repr(float(getattr(self, c)[i])) for c in HISTORY_COLUMNS[1:]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "TrainHistory":
        h = cls()
        for row in csv.DictReader(io.StringIO(text)):
            h.epoch.append(int(row["epoch"]))
            for c in HISTORY_COLUMNS[1:]:
                getattr(h, c).append(float(row[c]))
        h.stopped_epoch = h.epoch[-1] if h.epoch else 0
        return h


def _binary_monitors(y, pred):
    """Accuracy, precision and recall with label 1 as the positive class."""
    y = np.asarray(y)
    pred = np.asarray(pred)
    tp = int(np.sum((pred == 1) & (y == 1)))
    fp = int(np.sum((pred == 1) & (y == 0)))
    fn = int(np.sum((pred == 0) & (y == 1)))
    acc = float(np.mean(pred == y)) if len(y) else 0.0
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    return acc, prec, rec


def training_metadata(model: CnnModel, config: TrainConfig) -> dict:
    return {
        "epochs": config.epochs,
        "loss": config.loss,
        "optimizer": config.optimizer,
        "initial_lr": config.lr,
        "batch_size": config.batch_size,
        "early_stopping": {"monitor": "val_loss", "patience": config.early_stop_patience},
        "lr_scheduler": {"name": "ReduceLROnPlateau", "monitor": "val_loss",
                         "factor": config.plateau_factor, "patience": config.plateau_patience,
                         "min_lr": config.min_lr},
        "branch_dropout": model.branches[0].dropout,
        "dense_units": list(model.head_units),
        "dense_dropout": list(model.head_dropout),
        "output": "1 unit + sigmoid",
        "metrics": ["accuracy", "precision", "recall"],
        "seed": config.seed,
    }


def train(model: CnnModel, train_data, val_data, config: TrainConfig | None = None) -> TrainHistory:
    """Mini-batch Adam with early stopping and plateau LR halving on val loss.

    ``train_data`` and ``val_data`` are ``(xs, y)`` pairs where ``xs`` holds one
    array per branch. On early stop the best-val-loss weights are restored.
    """
    config = config or TrainConfig()
    xs_tr, y_tr = train_data
    xs_va, y_va = val_data
    xs_tr = _check_inputs(model, xs_tr)
    xs_va = _check_inputs(model, xs_va)
    y_tr = np.asarray(y_tr)
    y_va = np.asarray(y_va)
    if len(y_tr) == 0 or len(y_va) == 0:
        raise ValueError("train and validation data must be non-empty")
    rng = np.random.default_rng(config.seed)
    opt = AdamState(lr=config.lr)
    stopper = EarlyStopping(config.early_stop_patience, config.min_delta)
    plateau = ReduceLROnPlateau(config.plateau_factor, config.plateau_patience, config.min_lr, config.min_delta)
    hist = TrainHistory(metadata=training_metadata(model, config))
    best_params = model.copy_params()
    n = len(y_tr)

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        losses, preds = [], np.empty(n, dtype=np.int64)
        lr_used = opt.lr
        for s in range(0, n, config.batch_size):
            idx = order[s:s + config.batch_size]
            bx = [x[idx] for x in xs_tr]
            probs, cache = forward(model, bx, training=True, rng=rng)
            loss = bce_loss(probs, y_tr[idx])
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            opt.step(model.params, backward(model, cache, probs, y_tr[idx]))
            losses.append(loss * len(idx))
            preds[idx] = threshold_labels(probs)
        val_p = predict_proba(model, xs_va)
        val_loss = bce_loss(val_p, y_va)
        tr = _binary_monitors(y_tr, preds)
        va = _binary_monitors(y_va, threshold_labels(val_p))
        hist.epoch.append(epoch)
        hist.lr.append(lr_used)
        hist.train_loss.append(sum(losses) / n)
        hist.val_loss.append(val_loss)
        hist.train_acc.append(tr[0]); hist.val_acc.append(va[0])
        hist.train_precision.append(tr[1]); hist.val_precision.append(va[1])
        hist.train_recall.append(tr[2]); hist.val_recall.append(va[2])
        hist.stopped_epoch = epoch
        logger.debug("epoch %d lr %.2e train_loss %.4f val_loss %.4f val_acc %.4f",
                     epoch, lr_used, hist.train_loss[-1], val_loss, va[0])

        stop = stopper.update(epoch, val_loss)
        if stopper.best_epoch == epoch:
            best_params = model.copy_params()
        opt.lr = plateau.update(val_loss, opt.lr)
        if stop:
            hist.early_stopped = True
            model.params = best_params
            break
    hist.best_epoch = stopper.best_epoch
    return hist


# ---------------------------------------------------------------- verification


def numeric_gradients(model: CnnModel, xs, y, masks, h: float = 1e-5) -> dict:
    def loss_at():
        p, _ = forward(model, xs, training=True, masks=masks)
        return bce_loss(p, y)

    out = {}
    for k, arr in model.params.items():
        g = np.zeros_like(arr, dtype=np.float64)
        flat = arr.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            lp = loss_at()
            flat[i] = old - h
            lm = loss_at()
            flat[i] = old
            gf[i] = (lp - lm) / (2 * h)
        out[k] = g
    return out


def tiny_model_spec(**overrides) -> dict:
    spec = {"feature_dims": [6, 4], "filters": 3, "kernel_size": 2, "head_units": [8, 4, 2],
            "head_dropout": [0.5, 0.3, 0.0], "branch_dropout": 0.3, "batch": 5, "seed": 7}
    spec.update(overrides)
    return spec


def gradient_check(model_spec: dict | None = None, tolerance: float = 1e-5, grad_fn=None, h: float = 1e-5) -> dict:
    """Compare analytic gradients to central differences for every parameter (float64).

    Dropout masks are drawn once and held fixed so the loss is a smooth
    function of the parameters. ``grad_fn(model, cache, probs, y)`` replaces
    :func:`backward`, which lets tests feed in a broken gradient.
    """
    spec = tiny_model_spec(**(model_spec or {}))
    model = build_multibranch_cnn(spec["feature_dims"], spec["filters"], spec["kernel_size"],
                                  spec["branch_dropout"], spec["head_units"], spec["head_dropout"],
                                  seed=spec["seed"], dtype=np.float64)
    rng = np.random.default_rng(spec["seed"])
    for k in model.params:
        if k.endswith(".b"):
            model.params[k] = rng.uniform(-0.1, 0.1, model.params[k].shape)
    xs = [rng.normal(size=(spec["batch"], d)) for d in spec["feature_dims"]]
    y = (np.arange(spec["batch"]) % 2).astype(np.float64)
    probs, cache = forward(model, xs, training=True, rng=rng)
    analytic = (grad_fn or backward)(model, cache, probs, y)
    numeric = numeric_gradients(model, xs, y, cache["masks"], h)
    worst, worst_key, per_param = 0.0, None, {}
    for k in model.params:
        a = np.asarray(analytic[k], dtype=np.float64)
        nmr = numeric[k]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(nmr)), 1e-8)
        rel = np.abs(a - nmr) / denom
        rel[(np.abs(a) < 1e-12) & (np.abs(nmr) < 1e-12)] = 0.0
        per_param[k] = float(rel.max()) if rel.size else 0.0
        if per_param[k] > worst:
            worst, worst_key = per_param[k], k
    return {"max_rel_error": worst, "worst_param": worst_key, "per_param": per_param,
            "n_parameters": model.n_parameters(), "tolerance": tolerance, "passed": worst < tolerance}


# ---------------------------------------------------------------- checkpoints

CKPT_MAGIC = b"CNN1"
CKPT_VERSION = 1


def save_checkpoint(model: CnnModel, path) -> None:
    """Binary parameter dump plus an ``<path>.arch.json`` architecture sidecar."""
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<BI", CKPT_VERSION, len(model.params)))
        for name, arr in model.params.items():
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    Path(str(path) + ".arch.json").write_text(json.dumps(model.architecture(), indent=1), encoding="utf-8")


def load_checkpoint(path) -> CnnModel:
    arch = json.loads(Path(str(path) + ".arch.json").read_text(encoding="utf-8"))
    params = {}
    with open(path, "rb") as fh:
        if fh.read(4) != CKPT_MAGIC:
            raise ValueError(f"{path}: not a CNN1 checkpoint")
        version, count = struct.unpack("<BI", fh.read(5))
        if version != CKPT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        for _ in range(count):
            (nlen,) = struct.unpack("<H", fh.read(2))
            name = fh.read(nlen).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            size = int(np.prod(shape)) if shape else 1
            params[name] = np.frombuffer(fh.read(4 * size), dtype="<f4").reshape(shape).astype(np.float32)
    branches = [BranchSpec(**b) for b in arch["branches"]]
    return CnnModel(branches, arch["head_units"], arch["head_dropout"], params, arch["seed"])
