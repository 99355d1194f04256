"""Time the compiled LCS kernel against the pure Python fallback.

Runs the same max-similarity workload the case selector performs: every
candidate background scored against a growing pool of selected backgrounds.

    python3 benchmarks/bench_lcs.py [--pool 120] [--length 100] [--repeat 3]
"""

import argparse
import random
import statistics
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from ciforge import _lcs_py  # noqa: E402
from ciforge.rouge import _encode, _f_measure, tokenize  # noqa: E402

try:
    from ciforge._lcskernel import lcs_length_i32
except ImportError:
    lcs_length_i32 = None

WORDS = (
    "patient doctor nurse clinic hospital record result disclosure consent "
    "treatment billing referral lab report insurer audit access request "
    "release notice purpose role subject sender recipient policy breach"
).split()


def synth_backgrounds(count, length, rng):
    texts = []
    for _ in range(count):
        texts.append(" ".join(rng.choice(WORDS) for _ in range(length)))
    return texts


def bench(kernel, encoded, repeat):
    timings = []
    for _ in range(repeat):
        start = time.perf_counter()
        total = 0.0
        for i, candidate in enumerate(encoded):
            best = 0.0
            for ref in encoded[:i]:
                score = _f_measure(
                    kernel(candidate, ref), len(candidate), len(ref)
                )
                if score > best:
                    best = score
            total += best
        timings.append(time.perf_counter() - start)
    return min(timings), statistics.mean(timings), total


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pool", type=int, default=120, help="background count")
    parser.add_argument("--length", type=int, default=100, help="words per background")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    rng = random.Random(7)
    texts = synth_backgrounds(args.pool, args.length, rng)
    vocab = {}
    encoded = [_encode(tokenize(t), vocab) for t in texts]
    pairs = args.pool * (args.pool - 1) // 2
    print(
        f"{args.pool} backgrounds x {args.length} words "
        f"({pairs} pair scores per pass, best of {args.repeat})"
    )

    py_best, py_mean, py_total = bench(_lcs_py.lcs_length, encoded, args.repeat)
    print(f"pure-python  best {py_best:8.3f}s  mean {py_mean:8.3f}s")

    if lcs_length_i32 is None:
        print("native       not built; install with the extension to compare")
        return

    nat_best, nat_mean, nat_total = bench(lcs_length_i32, encoded, args.repeat)
    print(f"native       best {nat_best:8.3f}s  mean {nat_mean:8.3f}s")
    if nat_total != py_total:
        raise SystemExit("kernel outputs diverged; benchmark is void")
    print(f"speedup      {py_best / nat_best:8.1f}x")


if __name__ == "__main__":
    main()
