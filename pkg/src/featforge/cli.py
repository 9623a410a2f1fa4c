"""Command-line entry point: ``featforge <stage> --config cfg.json``.

Exit codes: 0 success, 1 stage failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .corpus import CorpusError, save_corpus
from .experiment import ConfigError, Pipeline, StageError, load_config, validate_config

STAGES = ("prepare", "extract", "select", "combos", "train-cnn", "report", "run-all")


def _parser():
    p = argparse.ArgumentParser(prog="featforge", description="Bangla fake-news feature pipeline")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    for name in STAGES:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON experiment config")
        s.add_argument("--seed", type=int, help="override every stage seed")
        s.add_argument("--out", help="output directory")
        s.add_argument("--top", type=int, help="rows in the top-combination table")
        s.add_argument("--no-stopwords", action="store_true", help="keep stopwords")
        s.add_argument("--warn-duplicates", action="store_true", help="log exact-duplicate texts")
    s = sub.add_parser("synth", help="write a synthetic two-class corpus")
    s.add_argument("path")
    s.add_argument("--n-docs", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise", type=float, default=0.0, help="label-flip rate")
    return p


def apply_overrides(cfg: dict, args) -> dict:
    if args.seed is not None:
        cfg["split"]["seed"] = args.seed
        for name in ("word2vec", "fasttext"):
            cfg["features"][name]["seed"] = args.seed
        cfg["selection"]["forest"]["seed"] = args.seed
        cfg["selection"]["logistic"]["seed"] = args.seed
        cfg["cnn"]["train"]["seed"] = args.seed
    if args.out:
        cfg["output_dir"] = args.out
    if args.top is not None:
        cfg["combos"]["top"] = args.top
    if args.no_stopwords:
        cfg["preprocess"]["remove_stopwords"] = False
    if args.warn_duplicates:
        cfg["preprocess"]["warn_duplicates"] = True
    validate_config(cfg)
    return cfg


def _synth(args):
    from .synthetic import add_label_noise, make_separable_corpus
    docs = make_separable_corpus(args.n_docs, seed=args.seed)
    if args.noise:
        docs = add_label_noise(docs, args.noise, args.seed)
    save_corpus(docs, args.path)
    print(f"wrote {len(docs)} documents to {args.path}")
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "synth":
        return _synth(args)
    try:
        cfg = apply_overrides(load_config(args.config), args)
        pipe = Pipeline(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    action = {
        "prepare": pipe.prepare,
        "extract": pipe.extract,
        "select": pipe.select,
        "combos": pipe.combos,
        "train-cnn": pipe.train_cnn,
        "report": pipe.report,
        "run-all": pipe.run_all,
    }[args.command]
    try:
        action()
        manifest = pipe.write_manifest()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (StageError, CorpusError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for rec in pipe.records:
        print(f"{rec['stage']:<40} {rec['status']}")
    print(f"manifest: {pipe.out / 'run_manifest.json'} ({len(manifest['stages'])} stages)")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
