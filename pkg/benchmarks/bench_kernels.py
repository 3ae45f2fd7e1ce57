"""Compare the compiled kernel backend against the pure-Python fallback.

Runs each hot kernel on an identical workload through both modules,
checks the outputs are bit-identical, and reports best-of-N wall times.

    python3 benchmarks/bench_kernels.py [--docs N] [--terms N] [--repeat N]
"""

from __future__ import annotations

import argparse
import random
import time

import numpy as np

from wpnmine._kernels import pykernels

try:
    from wpnmine._kernels import _ckern
except ImportError:
    _ckern = None


def doc_arrays(rng: random.Random, n_docs: int, n_terms: int):
    term_idx: list[int] = []
    term_wt: list[float] = []
    term_off = [0]
    path_idx: list[int] = []
    path_off = [0]
    for _ in range(n_docs):
        terms = sorted(rng.sample(range(n_terms), rng.randint(2, min(10, n_terms))))
        term_idx.extend(terms)
        term_wt.extend(rng.randint(1, 4) for _ in terms)
        term_off.append(len(term_idx))
        tokens = sorted(rng.sample(range(60), rng.randint(1, 6)))
        path_idx.extend(tokens)
        path_off.append(len(path_idx))
    return (
        np.asarray(term_idx, dtype=np.int64),
        np.asarray(term_wt, dtype=np.float64),
        np.asarray(term_off, dtype=np.int64),
        np.asarray(path_idx, dtype=np.int64),
        np.asarray(path_off, dtype=np.int64),
    )


def similarity_csr(rng: random.Random, n_terms: int):
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    neighbors: dict[int, dict[int, float]] = {i: {} for i in range(n_terms)}
    for i in range(n_terms):
        for j in range(i + 1, n_terms):
            if rng.random() < 0.05:
                neighbors[i][j] = neighbors.setdefault(j, {})[i] = round(rng.uniform(0.5, 1.0), 3)
    for i in range(n_terms):
        row = dict(neighbors[i])
        row[i] = 1.0
        for j in sorted(row):
            indices.append(j)
            data.append(row[j])
        indptr.append(len(indices))
    return (
        np.asarray(indptr, dtype=np.int64),
        np.asarray(indices, dtype=np.int64),
        np.asarray(data, dtype=np.float64),
    )


def best_of(repeat: int, fn):
    best = float("inf")
    value = None
    for _ in range(repeat):
        started = time.perf_counter()
        value = fn()
        best = min(best, time.perf_counter() - started)
    return best, value


def bench_combined(args):
    rng = random.Random(1)
    docs = doc_arrays(rng, args.docs, args.terms)
    csr = similarity_csr(rng, args.terms)

    def run(mod):
        return mod.combined_distances(*docs, *csr, args.terms, 0.5, 0.5)

    return "combined_distances", f"{args.docs} docs", run


def bench_sgns(args):
    rng = random.Random(2)
    vocab = args.terms
    dim = 64
    sent_idx: list[int] = []
    sent_off = [0]
    for _ in range(args.docs):
        sent_idx.extend(rng.randrange(vocab) for _ in range(rng.randint(4, 12)))
        sent_off.append(len(sent_idx))
    neg_table = np.asarray([rng.randrange(vocab) for _ in range(10_000)], dtype=np.int64)
    base0 = np.asarray([rng.uniform(-0.5, 0.5) / dim for _ in range(vocab * dim)], dtype=np.float64)

    arrays = {
        "sent_idx": np.asarray(sent_idx, dtype=np.int64),
        "sent_off": np.asarray(sent_off, dtype=np.int64),
    }

    def run(mod):
        syn0 = base0.copy()
        syn1 = np.zeros(vocab * dim, dtype=np.float64)
        state = mod.sgns_train(
            arrays["sent_idx"], arrays["sent_off"], syn0, syn1, neg_table,
            dim, 5, 5, 2, 0.025, 2_463_534_242,
        )
        return np.concatenate([[float(state)], syn0, syn1])

    return "sgns_train", f"{args.docs} sentences x 2 epochs", run


def bench_silhouette(args):
    rng = random.Random(3)
    n = args.docs
    condensed = np.asarray([rng.random() for _ in range(n * (n - 1) // 2)], dtype=np.float64)
    labels = np.asarray([rng.randrange(6) for _ in range(n)], dtype=np.int64)

    def run(mod):
        return mod.silhouette_samples(condensed, labels, n, 6)

    return "silhouette_samples", f"{n} points, 6 clusters", run


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--docs", type=int, default=250)
    parser.add_argument("--terms", type=int, default=300)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    print(f"workload: docs={args.docs} terms={args.terms} repeat={args.repeat}")
    if _ckern is None:
        print("compiled backend not importable; timing the fallback only")
    header = f"{'kernel':<20} {'workload':<28} {'pure':>10} {'compiled':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))

    for factory in (bench_combined, bench_sgns, bench_silhouette):
        name, workload, run = factory(args)
        pure_time, pure_out = best_of(args.repeat, lambda: run(pykernels))
        if _ckern is None:
            print(f"{name:<20} {workload:<28} {pure_time:>9.3f}s {'n/a':>10} {'n/a':>8}")
            continue
        ckern_time, ckern_out = best_of(args.repeat, lambda: run(_ckern))
        if not np.array_equal(pure_out, ckern_out):
            print(f"{name:<20} OUTPUT MISMATCH between backends")
            return 1
        print(
            f"{name:<20} {workload:<28} {pure_time:>9.3f}s {ckern_time:>9.3f}s "
            f"{pure_time / ckern_time:>7.1f}x"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
