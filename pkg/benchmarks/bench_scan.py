"""Benchmark: compiled scan core vs the pure-Python fallback.

Builds the default lexicon matcher, synthesizes a corpus-like text blob,
and times `count_bytes` under both kernels. Run from the repo root:

    python benchmarks/bench_scan.py [--mb 20] [--seed 0]
"""

import argparse
import time

import numpy as np

from adscreen.lexicon import default_lexicon
from adscreen.matcher import BACKEND, KeywordMatcher

FILLER = (
    "patient reports stable condition reviewed plan followup visit today noted "
    "blood pressure medication refill discussed exam unremarkable chronic "
    "management routine labs ordered results pending tolerating therapy without "
    "acute issues feels improved daily walking exercise diet counseled education"
).split()


def synth_text(target_bytes: int, keywords, seed: int) -> bytes:
    rng = np.random.default_rng(seed)
    chunks = []
    size = 0
    while size < target_bytes:
        words = [FILLER[i] for i in rng.integers(0, len(FILLER), 14)]
        if rng.random() < 0.6:
            words.insert(int(rng.integers(0, len(words))), keywords[rng.integers(0, len(keywords))])
        chunk = " ".join(words) + "\n"
        chunks.append(chunk)
        size += len(chunk)
    return "".join(chunks).lower().encode("utf-8")


def run(matcher: KeywordMatcher, data: bytes, repeats: int) -> tuple[float, np.ndarray]:
    best = float("inf")
    counts = None
    for _ in range(repeats):
        out = np.zeros(len(matcher), dtype=np.int64)
        t0 = time.perf_counter()
        matcher.count_bytes(data, out=out)
        best = min(best, time.perf_counter() - t0)
        counts = out
    return best, counts


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--mb", type=float, default=20.0, help="text size in MiB")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    lexicon = default_lexicon()
    data = synth_text(int(args.mb * (1 << 20)), lexicon.keywords, args.seed)
    mb = len(data) / (1 << 20)
    print(f"text: {mb:.1f} MiB, {len(lexicon)} keywords, default backend: {BACKEND}")

    results = {}
    backends = ["python"] + (["compiled"] if BACKEND == "compiled" else [])
    for backend in backends:
        matcher = KeywordMatcher(lexicon, backend=backend)
        # python kernel is slow: scale the workload down, then normalize
        if backend == "python" and mb > 4:
            slice_bytes = data[: 2 << 20]
            elapsed, counts = run(matcher, slice_bytes, 1)
            rate = (len(slice_bytes) / (1 << 20)) / elapsed
        else:
            elapsed, counts = run(matcher, data, args.repeats)
            rate = mb / elapsed
        results[backend] = rate
        print(f"  {backend:9s} {rate:9.1f} MiB/s   ({counts.sum()} hits on the measured slice)")

    if "compiled" in results:
        print(f"speedup: {results['compiled'] / results['python']:.0f}x")


if __name__ == "__main__":
    main()
