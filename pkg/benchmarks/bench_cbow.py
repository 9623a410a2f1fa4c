"""Compare the compiled CBOW kernel with the numpy fallback.

    python3 benchmarks/bench_cbow.py [--docs 300] [--epochs 2] [--repeat 3]

Both backends train on the same synthetic corpus with one thread; the script
reports tokens/second for each and checks that the trained weights agree.
"""
import argparse
import time

import numpy as np

from featforge import _kernels
from featforge.features.embeddings import train_cbow_embeddings, train_subword_embeddings
from featforge.preprocess import clean_documents
from featforge.synthetic import make_separable_corpus


def _time(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--docs", type=int, default=300)
    ap.add_argument("--epochs", type=int, default=2)
    ap.add_argument("--dim", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    docs = clean_documents(make_separable_corpus(args.docs, seed=1))
    n_tok = sum(len(d.tokens) for d in docs) * args.epochs
    if _kernels.compiled_train_block is None:
        print("compiled kernel unavailable; build with `pip install -e . --no-build-isolation`")
        return 1

    original = _kernels.train_block
    print(f"{n_tok} training tokens, dim={args.dim}, best of {args.repeat}")
    print(f"{'mode':<10}{'backend':<10}{'seconds':>10}{'tokens/s':>14}{'speedup':>10}")
    try:
        for mode, trainer in (("word", train_cbow_embeddings), ("subword", train_subword_embeddings)):
            results = {}
            for backend, kernel in (("python", _kernels.python_train_block),
                                    ("cython", _kernels.compiled_train_block)):
                _kernels.train_block = kernel
                results[backend] = _time(lambda: trainer(docs, dim=args.dim, epochs=args.epochs, threads=1),
                                         args.repeat)
            base = results["python"][0]
            for backend, (sec, _) in results.items():
                print(f"{mode:<10}{backend:<10}{sec:>10.3f}{n_tok / sec:>14.0f}{base / sec:>9.1f}x")
            diff = np.max(np.abs(results["python"][1].syn0 - results["cython"][1].syn0))
            print(f"{mode:<10}max |syn0 difference| = {diff:.3g}")
    finally:
        _kernels.train_block = original
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
