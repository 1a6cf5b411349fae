#!/usr/bin/env python3
"""Benchmark the compiled kernel backend against the pure-Python fallback.

Times the operations that dominate real runs: raw mat-vec products, full
program embedding (fused graph kernel + convolution) and one triplet
forward/backward step, each under both backends.

Usage: python benchmarks/bench_backend.py [--repeat N]
"""

import argparse
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(
    os.path.abspath(__file__))), "src"))

from eventclone import model as mdl
from eventclone import numkernel as nk
from eventclone import train as trn
from eventclone.eventgraph import graph_from_source
from eventclone.model import ModelConfig, ModelParams
from eventclone.numkernel import Rng

SOURCES = [
    """
    int main() {
        int n;
        int s = 0;
        scanf("%d", &n);
        for (int i = 1; i <= n; i++) { s = s + i * i; }
        if (s > 100) s = s % 100;
        printf("%d", s);
        return 0;
    }
    """,
    """
    int main() {
        int a;
        int b;
        int t;
        scanf("%d %d", &a, &b);
        while (b != 0) { t = b; b = a % b; a = t; }
        printf("%d", a);
        return 0;
    }
    """,
    """
    int main() {
        int n;
        int x = 0;
        int y = 1;
        int t;
        scanf("%d", &n);
        for (int i = 1; i <= n; i++) { t = x + y; x = y; y = t; }
        printf("%d", x);
        return 0;
    }
    """,
]


def bench_matvec(repeat):
    rng = Rng(1)
    m = nk.init_params((64, 128), rng)
    v = nk.init_params((128,), rng)
    start = time.perf_counter()
    for _ in range(repeat * 200):
        nk.matvec(m, v)
    return time.perf_counter() - start


def bench_embed(repeat, flats, params):
    start = time.perf_counter()
    for _ in range(repeat):
        for flat in flats:
            mdl.program_vector(flat, params)
    return time.perf_counter() - start


def bench_triplet(repeat, flats, params):
    start = time.perf_counter()
    for _ in range(repeat):
        trn.backward(flats[0], flats[1], flats[2], params)
    return time.perf_counter() - start


def run(backend, repeat, flats, params):
    nk.use_backend(backend)
    return {
        "matvec (64x128) x200": bench_matvec(repeat),
        "program embedding x3": bench_embed(repeat, flats, params),
        "triplet fwd+bwd": bench_triplet(repeat, flats, params),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()

    config = ModelConfig()
    params = ModelParams.init(config, Rng(7))
    flats = [mdl.flatten_graph(graph_from_source(src), config)
             for src in SOURCES]

    if nk._ckernel is None:
        print("compiled kernel not built; run `python setup.py build_ext "
              "--inplace` first", file=sys.stderr)
        return 1

    results = {}
    for backend in ("python", "c"):
        results[backend] = run(backend, args.repeat, flats, params)

    sanity = []
    for backend in ("python", "c"):
        nk.use_backend(backend)
        sanity.append(mdl.program_vector(flats[0], params))
    assert sanity[0] == sanity[1], "backends disagree"

    print(f"{'operation':<24} {'python':>10} {'compiled':>10} {'speedup':>9}")
    for name in results["python"]:
        py = results["python"][name]
        cc = results["c"][name]
        print(f"{name:<24} {py:>9.3f}s {cc:>9.3f}s {py / cc:>8.1f}x")
    print("\nbackends produced bitwise-identical embeddings")
    return 0


if __name__ == "__main__":
    sys.exit(main())
