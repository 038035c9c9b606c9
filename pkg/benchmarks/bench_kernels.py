"""Compare the numba and pure-numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N] [--skip-train]

Kernel timings import both backends directly. The end-to-end row trains a
small model in a subprocess per backend, toggling PROPSPAN_DISABLE_JIT.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from propspan.bio import TagSet
from propspan.corpus import TechniqueCatalog
from propspan.tagger import _numba_kernels, _numpy_kernels

BACKENDS = {"numpy": _numpy_kernels, "numba": _numba_kernels}

TRAIN_SNIPPET = """
import time
from propspan.corpus import build_catalog
from propspan.synthetic import trigger_corpus
from propspan.tagger import TrainConfig, train
from propspan.tagger.kernels import BACKEND
tr = trigger_corpus(400, seed=1)
dev = trigger_corpus(50, seed=2, id_prefix="d")
cat = build_catalog(tr)
train(tr[:20], dev[:5], cat, TrainConfig(phase1_epochs=1, phase2_epochs=1))  # warm-up / JIT
t = time.perf_counter()
train(tr, dev, cat)
print(BACKEND, time.perf_counter() - t)
"""


def workload(rng, n_tokens=60, n_techniques=20, feats_per_token=40, hash_dim=2**20):
    ts = TagSet(TechniqueCatalog([f"t{i}" for i in range(n_techniques)]))
    t = len(ts)
    w = rng.normal(size=(hash_dim, t))
    feats = rng.integers(0, hash_dim, size=n_tokens * feats_per_token)
    offsets = np.arange(0, n_tokens * feats_per_token + 1, feats_per_token)
    e = rng.normal(size=(n_tokens, t))
    tr = rng.normal(size=(t, t))
    gold = rng.integers(0, t, size=n_tokens)
    pred = rng.integers(0, t, size=n_tokens)
    return dict(ts=ts, w=w, feats=feats, offsets=offsets, e=e, tr=tr, gold=gold, pred=pred)


def bench(repeat):
    d = workload(np.random.default_rng(0))
    allowed, start = d["ts"].allowed_transitions(), d["ts"].allowed_starts()
    acc = np.zeros_like(d["w"])
    cases = {
        "emission_scores": lambda k: k.emission_scores(d["w"], d["feats"], d["offsets"]),
        "viterbi": lambda k: k.viterbi(d["e"], d["tr"], allowed, start),
        "perceptron_update": lambda k: k.perceptron_update(d["w"], acc, d["feats"], d["offsets"], d["gold"], d["pred"], 0.0, 1.0),
    }
    rows = []
    for name, fn in cases.items():
        times = {}
        for backend, k in BACKENDS.items():
            fn(k)  # compile / warm caches
            number = 200
            times[backend] = min(timeit.repeat(lambda: fn(k), number=number, repeat=repeat)) / number
        rows.append((name, times["numpy"], times["numba"]))
    return rows


def train_times():
    out = {}
    for backend, flag in (("numpy", "1"), ("numba", "")):
        env = dict(os.environ, PROPSPAN_DISABLE_JIT=flag)
        res = subprocess.run([sys.executable, "-c", TRAIN_SNIPPET], env=env, capture_output=True, text=True, check=True)
        name, seconds = res.stdout.split()
        out[name] = float(seconds)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-train", action="store_true")
    args = ap.parse_args(argv)

    print(f"{'kernel':<22}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    for name, a, b in bench(args.repeat):
        print(f"{name:<22}{a * 1e6:>10.1f}us{b * 1e6:>10.1f}us{a / b:>9.1f}x")
    if not args.skip_train:
        t = train_times()
        a, b = t["numpy"], t["numba"]
        print(f"{'train 400x(10+5)':<22}{a:>11.2f}s{b:>11.2f}s{a / b:>9.1f}x")


if __name__ == "__main__":
    main()
