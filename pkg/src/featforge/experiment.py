"""End-to-end experiment runner with per-stage caching.

Stages, in dependency order::

    prepare -> extract/<set> -> select -> combos -> cnn/<run> -> report

Every stage writes into a scratch directory that is renamed into place only
on success; a failing stage's partial output is moved to ``quarantine/``.
A stage is skipped ("cached") when the hash of its config section and its
input artifacts matches the stamp left by the previous run.
"""
from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
import shutil
import time
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import corpus_hash, count_duplicates, load_corpus, split_dataset
from .features import embeddings as emb
from .features import tfidf as tf
from .features.matrix import SET_NAMES, FeatureMatrix, MinMaxScaler
from .features.stats import stat_matrix
from .linear_models import ForestConfig, LogisticConfig, fit_forest, forest_feature_importance
from .metrics import classification_report, metrics_json
from .nn import TrainConfig, build_multibranch_cnn, predict_proba, save_checkpoint, threshold_labels, train
from .preprocess import CleanDocument, StopwordList, clean_text
from .selection import (ColumnScores, anova_f_scores, build_set_report, chi_square_scores, combinations_csv,
                        combo_test, correlation_set_score, forward_select, mutual_info_scores, rfe_select,
                        top_table)

logger = logging.getLogger(__name__)

PARTS = ("train", "val", "test")

DEFAULT_CNN_RUNS = [
    ["fasttext"],
    ["word2vec"],
    ["char"],
    ["word2vec", "fasttext"],
    ["tfidf", "word2vec", "char"],
    ["tfidf", "word2vec", "fasttext", "char"],
    ["tfidf", "fasttext", "ngram", "char"],
    ["tfidf", "fasttext", "ngram", "char", "stats"],
    ["tfidf", "word2vec", "fasttext", "char", "stats"],
]

_EMBED = {"dim": 100, "window": 5, "min_count": 1, "epochs": 5, "negatives": 5, "seed": 42,
          "threads": None, "alpha": 0.025, "min_alpha": 1e-4}

DEFAULT_CONFIG = {
    "corpus": {"path": None, "format": None},
    "split": {"ratios": [0.65, 0.15, 0.20], "seed": 42, "stratified": True},
    "preprocess": {"stopwords_path": None, "remove_stopwords": True, "warn_duplicates": False},
    "features": {
        "sets": list(SET_NAMES),
        "tfidf": {"ngram_range": [1, 2], "max_features": 5000, "min_df": 3, "max_df_frac": 0.95},
        "word2vec": dict(_EMBED),
        "fasttext": {**_EMBED, "minn": 3, "maxn": 6, "bucket_count": 2 ** 21},
        "ngram": {"ngram_range": [1, 3], "max_features": 1000, "min_df": 2},
        "char": {"ngram_range": [2, 4], "max_features": 1000, "min_df": 3, "cross_token": False},
        "stats": {},
    },
    "selection": {
        "enabled": True,
        "f_classif_k": 6,
        "rfe_k": 6,
        "rfe_step": 0.1,
        "mi_bins": 16,
        "forward_metric": "f1_fake",
        "forest": {"n_trees": 100, "max_depth": 12, "min_leaf": 2, "seed": 42},
        "logistic": {"l2": 1.0, "lr": 1.0, "max_epochs": 200, "tol": 1e-6, "seed": 42},
    },
    "combos": {"enabled": True, "k_min": 1, "top": 10},
    "cnn": {
        "runs": copy.deepcopy(DEFAULT_CNN_RUNS),
        "filters": 64,
        "kernel_size": 3,
        "branch_dropout": 0.3,
        "head_units": [256, 128, 64],
        "head_dropout": [0.5, 0.3, 0.0],
        "train": {"epochs": 50, "lr": 1e-4, "batch_size": 16, "early_stop_patience": 5,
                  "plateau_patience": 3, "plateau_factor": 0.5, "min_lr": 1e-7, "min_delta": 1e-6, "seed": 42},
    },
    "output_dir": "featforge_out",
}


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def _merge(base, override):
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def default_config() -> dict:
    return copy.deepcopy(DEFAULT_CONFIG)


def make_config(overrides: dict | None = None) -> dict:
    cfg = _merge(DEFAULT_CONFIG, overrides or {})
    validate_config(cfg)
    return cfg


def load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    base_dir = Path(path).resolve().parent
    cfg = make_config(raw)
    # relative paths in a config file are relative to the file
    for section, key in (("corpus", "path"), ("preprocess", "stopwords_path")):
        p = cfg[section].get(key)
        if p and not Path(p).is_absolute():
            cfg[section][key] = str(base_dir / p)
    if cfg["output_dir"] and not Path(cfg["output_dir"]).is_absolute() and "output_dir" in raw:
        cfg["output_dir"] = str(base_dir / cfg["output_dir"])
    return cfg


def validate_config(cfg: dict) -> None:
    sets = cfg["features"]["sets"]
    if not sets:
        raise ConfigError("features.sets is empty")
    for s in sets:
        if s not in SET_NAMES:
            raise ConfigError(f"unknown feature set {s!r}; choose from {', '.join(SET_NAMES)}")
    if len(set(sets)) != len(sets):
        raise ConfigError("features.sets has duplicates")
    ratios = cfg["split"]["ratios"]
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError("split.ratios must be three positive numbers summing to 1")
    for run in cfg["cnn"]["runs"]:
        if not run:
            raise ConfigError("empty CNN run")
        for s in run:
            if s not in sets:
                raise ConfigError(f"CNN run {run} references feature set {s!r} that is not extracted")
    k_min = cfg["combos"]["k_min"]
    if cfg["combos"]["enabled"] and not 1 <= k_min <= len(sets):
        raise ConfigError(f"combos.k_min must be in [1, {len(sets)}]")
    if cfg["selection"]["forward_metric"] not in ("f1_fake", "f1_macro", "f1_real", "accuracy"):
        raise ConfigError("selection.forward_metric must be one of f1_fake, f1_macro, f1_real, accuracy")


def config_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, ensure_ascii=False).encode("utf-8")).hexdigest()


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def run_name(sets) -> str:
    return "+".join(sets)


# ---------------------------------------------------------------- reports


COMPARISON_COLUMNS = ["combination", "accuracy", "precision", "recall", "f1",
                      "weighted_precision", "weighted_recall", "weighted_f1"]
FAKE_CLASS_COLUMNS = ["combination", "precision", "recall", "f1"]


def emit_comparison(results, out_dir) -> dict:
    """Write CNN comparison tables sorted by macro F1 (descending).

    ``results`` is a list of ``(combination, report)`` where ``report`` is a
    :func:`classification_report` dict. Writes ``comparison.csv``,
    ``comparison.json`` and the fake-class breakout ``fake_class.csv``.
    """
    if not results:
        raise ValueError("no results to compare")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = sorted(results, key=lambda r: -r[1]["macro"]["f1"])
    table, fake = [], []
    for combo, rep in rows:
        name = ", ".join(combo) if not isinstance(combo, str) else combo
        table.append({"combination": name, "accuracy": rep["accuracy"], "precision": rep["macro"]["precision"],
                      "recall": rep["macro"]["recall"], "f1": rep["macro"]["f1"],
                      "weighted_precision": rep["weighted"]["precision"],
                      "weighted_recall": rep["weighted"]["recall"], "weighted_f1": rep["weighted"]["f1"]})
        fk = rep["per_class"]["fake"]
        fake.append({"combination": name, "precision": fk["precision"], "recall": fk["recall"], "f1": fk["f1"]})
    paths = {"comparison.csv": out_dir / "comparison.csv", "fake_class.csv": out_dir / "fake_class.csv",
             "comparison.json": out_dir / "comparison.json"}
    _write_csv(paths["comparison.csv"], COMPARISON_COLUMNS, table)
    _write_csv(paths["fake_class.csv"], FAKE_CLASS_COLUMNS, fake)
    paths["comparison.json"].write_text(json.dumps({"overall": table, "fake_class": fake}, indent=2,
                                                   ensure_ascii=False), encoding="utf-8")
    return paths


def _write_csv(path, columns, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in columns])


def read_comparison_csv(path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (v if k == "combination" else float(v)) for k, v in r.items()} for r in rows]


# ---------------------------------------------------------------- pipeline


class Pipeline:
    """Runs stages against an output directory, reusing cached stage outputs."""

    def __init__(self, config: dict, out_dir=None):
        validate_config(config)
        self.config = config
        self.out = Path(out_dir or config["output_dir"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.records = []
        self._corpus_hash = None
        self._done = {}

    # -- stage machinery

    def _stage(self, name, key_material, input_files, build):
        if name in self._done:
            return self._done[name]
        self._done[name] = self._run_stage(name, key_material, input_files, build)
        return self._done[name]

    def _run_stage(self, name, key_material, input_files, build):
        missing = [str(p) for p in input_files if not Path(p).is_file()]
        if missing:
            raise StageError(name, FileNotFoundError(f"missing input {missing[0]}"))
        key = config_hash({"stage": name, "config": key_material, "version": __version__,
                           "inputs": {str(Path(p).relative_to(self.out)) if str(p).startswith(str(self.out))
                                      else str(p): file_hash(p) for p in input_files}})
        final = self.out / name
        stamp_path = final / ".stamp.json"
        start = time.perf_counter()
        if stamp_path.is_file():
            stamp = json.loads(stamp_path.read_text(encoding="utf-8"))
            if stamp.get("key") == key and all(
                    (final / rel).is_file() and file_hash(final / rel) == h for rel, h in stamp["artifacts"].items()):
                self._record(name, "cached", start, final, stamp["artifacts"])
                return final
        tmp = self.out / ".tmp" / name
        if tmp.exists():
            shutil.rmtree(tmp)
        tmp.mkdir(parents=True)
        try:
            build(tmp)
        except Exception as exc:
            qdir = self.out / "quarantine" / name.replace("/", "__")
            if qdir.exists():
                shutil.rmtree(qdir)
            qdir.parent.mkdir(parents=True, exist_ok=True)
            shutil.move(str(tmp), str(qdir))
            logger.error("stage %s failed; partial output moved to %s", name, qdir)
            raise StageError(name, exc) from exc
        artifacts = {str(p.relative_to(tmp)): file_hash(p) for p in sorted(tmp.rglob("*")) if p.is_file()}
        (tmp / ".stamp.json").write_text(json.dumps({"key": key, "artifacts": artifacts}, indent=1, sort_keys=True),
                                         encoding="utf-8")
        if final.exists():
            shutil.rmtree(final)
        final.parent.mkdir(parents=True, exist_ok=True)
        tmp.rename(final)
        self._record(name, "ran", start, final, artifacts)
        return final

    def _record(self, name, status, start, path, artifacts):
        logger.info("stage %-28s %s", name, status)
        self.records.append({"stage": name, "status": status, "seconds": round(time.perf_counter() - start, 3),
                             "artifacts": {str((path / rel).relative_to(self.out)): h for rel, h in artifacts.items()}})

    def _seconds_free_manifest(self):
        return {"config_hash": config_hash(self.config), "corpus_hash": self._corpus_hash,
                "tool_version": __version__,
                "stages": [{k: v for k, v in r.items() if k != "seconds"} for r in self.records]}

    def write_manifest(self) -> dict:
        manifest = self._seconds_free_manifest()
        manifest["wall_clock"] = {r["stage"]: r["seconds"] for r in self.records}
        (self.out / "run_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
        return manifest

    # -- stages

    def prepare(self) -> Path:
        cfg = self.config
        path = cfg["corpus"]["path"]
        if not path:
            raise ConfigError("corpus.path is required")
        section = {"corpus_format": cfg["corpus"]["format"], "split": cfg["split"], "preprocess": cfg["preprocess"]}
        inputs = [path] + ([cfg["preprocess"]["stopwords_path"]] if cfg["preprocess"]["stopwords_path"] else [])

        def build(tmp):
            docs = load_corpus(path, cfg["corpus"]["format"])
            pp = cfg["preprocess"]
            if not pp["remove_stopwords"]:
                sw = StopwordList.empty()
            elif pp["stopwords_path"]:
                sw = StopwordList.from_file(pp["stopwords_path"])
            else:
                sw = StopwordList.default()
            dups = count_duplicates(docs)
            if pp.get("warn_duplicates") and dups:
                logger.warning("%d exact-duplicate document text(s) in corpus", dups)
            sp = split_dataset(docs, cfg["split"]["ratios"], cfg["split"]["seed"], cfg["split"]["stratified"])
            with open(tmp / "documents.jsonl", "w", encoding="utf-8") as fh:
                for part in PARTS:
                    for d in getattr(sp, part):
                        c = clean_text(d.raw_text, sw, d.id)
                        fh.write(json.dumps({"id": d.id, "part": part, "label": d.label, "raw_text": d.raw_text,
                                             "tokens": list(c.tokens)}, ensure_ascii=False) + "\n")
            info = {"corpus_hash": corpus_hash(docs), "n_documents": len(docs), "duplicates": dups,
                    "sizes": {p: len(getattr(sp, p)) for p in PARTS},
                    "empty_after_cleaning": 0}
            (tmp / "split.json").write_text(json.dumps(info, indent=1, sort_keys=True), encoding="utf-8")

        stage_dir = self._stage("prepare", section, inputs, build)
        self._corpus_hash = json.loads((stage_dir / "split.json").read_text(encoding="utf-8"))["corpus_hash"]
        return stage_dir

    def load_prepared(self):
        parts = {p: [] for p in PARTS}
        with open(self.out / "prepare" / "documents.jsonl", encoding="utf-8") as fh:
            for line in fh:
                r = json.loads(line)
                parts[r["part"]].append(r)
        return parts

    def labels(self):
        parts = self.load_prepared()
        return {p: np.array([r["label"] for r in parts[p]], dtype=np.int64) for p in PARTS}

    def extract(self) -> dict:
        prep = self.prepare()
        docs_file = prep / "documents.jsonl"
        dirs = {}
        for name in self.config["features"]["sets"]:
            section = self.config["features"][name]
            key = section
            if name in ("word2vec", "fasttext"):
                # thread count changes the result, so it belongs in the cache key
                key = {**section, "threads": emb.resolve_threads(section.get("threads"))}
            dirs[name] = self._stage(f"extract/{name}", key, [docs_file],
                                     lambda tmp, name=name, section=section: self._extract_set(tmp, name, section))
        return dirs

    def _extract_set(self, tmp, name, section):
        parts = self.load_prepared()
        clean = {p: [CleanDocument(r["id"], tuple(r["tokens"]), r["raw_text"]) for r in parts[p]] for p in PARTS}
        train = clean["train"]
        if name == "tfidf":
            model = tf.fit_word_tfidf(train, **_tuple_ranges(section))
            mats = {p: tf.apply_tfidf(model, clean[p], "tfidf") for p in PARTS}
        elif name == "char":
            model = tf.fit_char_tfidf(train, **_tuple_ranges(section))
            mats = {p: tf.apply_tfidf(model, clean[p], "char") for p in PARTS}
        elif name == "ngram":
            model = tf.fit_ngram_counts(train, **_tuple_ranges(section))
            mats = {p: tf.apply_ngram_counts(model, clean[p]) for p in PARTS}
        elif name == "word2vec":
            model = emb.train_cbow_embeddings(train, **section)
            mats = {p: emb.embed_documents(model, clean[p], "word2vec") for p in PARTS}
        elif name == "fasttext":
            model = emb.train_subword_embeddings(train, **section)
            mats = {p: emb.embed_documents(model, clean[p], "fasttext") for p in PARTS}
        elif name == "stats":
            mats = {p: stat_matrix(clean[p]) for p in PARTS}
        else:  # pragma: no cover - validated earlier
            raise ConfigError(f"unknown feature set {name}")
        for p in PARTS:
            mats[p].save(tmp / f"{name}.{p}.fmat", config=section, corpus_hash=self._corpus_hash)

    def load_sets(self, names, scaled: bool = True) -> dict:
        """``{set: {part: ndarray}}``, min-max scaled on the train rows when ``scaled``."""
        out = {}
        for name in names:
            mats = {p: FeatureMatrix.load(self.out / "extract" / name / f"{name}.{p}.fmat") for p in PARTS}
            arrays = {p: mats[p].values.astype(np.float64) for p in PARTS}
            if scaled:
                sc = MinMaxScaler().fit(arrays["train"])
                arrays = {p: sc.transform(a) for p, a in arrays.items()}
            out[name] = {"arrays": arrays, "labels": mats["train"].column_labels}
        return out

    def _set_inputs(self, names):
        return [self.out / "extract" / n / f"{n}.{p}.fmat" for n in names for p in PARTS]

    def select(self) -> Path:
        self.extract()
        names = self.config["features"]["sets"]
        sel = self.config["selection"]

        def build(tmp):
            y = self.labels()
            data = self.load_sets(names)
            Xtr = np.hstack([data[n]["arrays"]["train"] for n in names])
            column_sets = [n for n in names for _ in data[n]["labels"]]
            column_labels = [f"{n}:{lab}" for n in names for lab in data[n]["labels"]]
            logistic = LogisticConfig(**sel["logistic"])
            fscores = anova_f_scores(Xtr, y["train"])
            chi = chi_square_scores(Xtr, y["train"], column_labels)
            mi = mutual_info_scores(Xtr, y["train"], sel["mi_bins"])
            forest = fit_forest(Xtr, y["train"], ForestConfig(**sel["forest"]))
            imp, _ = forest_feature_importance(forest)
            rf = ColumnScores("rf_importance", imp)
            step = sel["rfe_step"]
            rfe = rfe_select(Xtr, y["train"], min(sel["rfe_k"], Xtr.shape[1]),
                             _rfe_step(step, Xtr.shape[1]), logistic) if step else None
            corr = {n: correlation_set_score(data[n]["arrays"]["train"], y["train"]) for n in names}
            pairs = {n: (data[n]["arrays"]["train"], data[n]["arrays"]["val"]) for n in names}
            fwd = forward_select(pairs, y["train"], y["val"], sel["forward_metric"], logistic)
            report = build_set_report(names, column_sets, f_classif=fscores, rf_importance=rf, rfe=rfe,
                                      correlation=corr, forward=fwd, chi2=chi, mutual_info=mi,
                                      f_classif_k=sel["f_classif_k"])
            (tmp / "selection_report.json").write_text(report.to_json(), encoding="utf-8")
            _write_csv(tmp / "selection_table.csv", list(report.table()[0].keys()), report.table())
            for cs in (fscores, chi, mi, rf, rfe):
                rows = list(cs.to_rows(column_labels))
                _write_csv(tmp / f"{cs.method}.csv", list(rows[0].keys()), rows)
            _write_csv(tmp / "correlation.csv", ["set", "mean_abs_r"],
                       [{"set": n, "mean_abs_r": corr[n]} for n in names])
            _write_csv(tmp / "forward.csv", ["step", "set", sel["forward_metric"]],
                       [{"step": i + 1, "set": n, sel["forward_metric"]: s} for i, (n, s) in enumerate(fwd)])

        return self._stage("select", {"selection": sel, "sets": names}, self._set_inputs(names), build)

    def combos(self) -> Path:
        self.extract()
        names = self.config["features"]["sets"]
        cc = self.config["combos"]
        logistic = self.config["selection"]["logistic"]

        def build(tmp):
            y = self.labels()
            data = self.load_sets(names)
            pairs = {n: (data[n]["arrays"]["train"], data[n]["arrays"]["val"]) for n in names}
            results = combo_test(pairs, y["train"], y["val"], cc["k_min"], LogisticConfig(**logistic))
            (tmp / "combinations.csv").write_text(combinations_csv(results), encoding="utf-8")
            top = top_table(results, cc["top"])
            _write_csv(tmp / "combinations_top.csv", ["Feature Combination", "F1-score"], top)

        return self._stage("combos", {"combos": cc, "logistic": logistic, "sets": names},
                           self._set_inputs(names), build)

    def train_cnn(self) -> dict:
        self.extract()
        cnn = self.config["cnn"]
        dirs = {}
        for run in cnn["runs"]:
            name = run_name(run)
            section = {k: v for k, v in cnn.items() if k != "runs"}
            section["sets"] = run
            dirs[name] = self._stage(f"cnn/{name}", section, self._set_inputs(run),
                                     lambda tmp, run=run, section=section: self._train_run(tmp, run, section))
        return dirs

    def _train_run(self, tmp, run, section):
        y = self.labels()
        data = self.load_sets(run)
        xs = {p: [data[n]["arrays"][p].astype(np.float32) for n in run] for p in PARTS}
        tcfg = TrainConfig(**section["train"])
        model = build_multibranch_cnn([data[n]["arrays"]["train"].shape[1] for n in run], section["filters"],
                                      section["kernel_size"], section["branch_dropout"], section["head_units"],
                                      section["head_dropout"], seed=tcfg.seed)
        hist = train(model, (xs["train"], y["train"]), (xs["val"], y["val"]), tcfg)
        probs = predict_proba(model, xs["test"])
        report = classification_report(y["test"], threshold_labels(probs))
        (tmp / "metrics.json").write_text(json.dumps(metrics_json(report), indent=2, sort_keys=True), encoding="utf-8")
        (tmp / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True), encoding="utf-8")
        (tmp / "history.csv").write_text(hist.to_csv(), encoding="utf-8")
        run_info = {"sets": run, "stopped_epoch": hist.stopped_epoch, "best_epoch": hist.best_epoch,
                    "early_stopped": hist.early_stopped, "hyperparameters": hist.metadata}
        (tmp / "run.json").write_text(json.dumps(run_info, indent=2, sort_keys=True), encoding="utf-8")
        save_checkpoint(model, tmp / "model.cnn1")

    def report(self) -> Path:
        dirs = self.train_cnn()
        inputs = [d / "report.json" for d in dirs.values()]

        def build(tmp):
            results = []
            for run in self.config["cnn"]["runs"]:
                rep = json.loads((self.out / "cnn" / run_name(run) / "report.json").read_text(encoding="utf-8"))
                results.append((run, rep))
            emit_comparison(results, tmp)

        return self._stage("report", {"runs": self.config["cnn"]["runs"]}, inputs, build)

    def run_all(self) -> dict:
        self.prepare()
        self.extract()
        if self.config["selection"]["enabled"]:
            self.select()
        if self.config["combos"]["enabled"]:
            self.combos()
        if self.config["cnn"]["runs"]:
            self.report()
        return self.write_manifest()


def _tuple_ranges(section):
    return {k: tuple(v) if k == "ngram_range" else v for k, v in section.items()}


def _rfe_step(step, n_cols):
    """Integer step, or a fraction of the column count when 0 < step < 1."""
    if isinstance(step, float) and 0 < step < 1:
        return max(1, int(step * n_cols))
    return int(step)


def run_pipeline(config: dict, out_dir=None) -> dict:
    """Run every enabled stage and return the manifest."""
    return Pipeline(config, out_dir).run_all()
