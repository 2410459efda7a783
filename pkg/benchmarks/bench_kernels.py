"""Time the compiled and numpy kernels on identical batches.

    python3 benchmarks/bench_kernels.py [--docs 16] [--doc-len 24] [--repeat 50]
"""

import argparse
import time

import numpy as np

from lexst import _kernels_py
from lexst.classifier import init_params

try:
    from lexst import _kernels
except ImportError:
    _kernels = None


def _time(fn, repeat):
    fn()
    start = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - start) / repeat


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--vocab", type=int, default=2000)
    ap.add_argument("--docs", type=int, default=16)
    ap.add_argument("--doc-len", type=int, default=24)
    ap.add_argument("--emb-dim", type=int, default=64)
    ap.add_argument("--attn-dim", type=int, default=32)
    ap.add_argument("--classes", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=50)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    params = init_params(args.vocab, args.emb_dim, args.attn_dim, args.classes, 0)
    n, L = args.docs, args.doc_len
    tokens = rng.integers(0, args.vocab, n * L).astype(np.int64)
    offsets = np.arange(0, n * L + 1, L, dtype=np.int64)
    labels = rng.integers(0, args.classes, n).astype(np.int64)
    masks = (rng.random((n, args.emb_dim)) >= 0.3) / 0.7

    backends = [("numpy", _kernels_py)] + ([("cython", _kernels)] if _kernels else [])
    rows = []
    for name, mod in backends:
        grads = params.zeros_like()
        fwd = _time(lambda: mod.forward_batch(*params.arrays(), tokens, offsets, 0.1), args.repeat)
        bwd = _time(
            lambda: mod.loss_grad_batch(*params.arrays(), tokens, offsets, labels, 0.1, masks, *grads.arrays()),
            args.repeat,
        )
        rows.append((name, fwd / n * 1e6, bwd / n * 1e6))

    print(f"{'backend':<8} {'forward us/doc':>15} {'train step us/doc':>18}")
    for name, f, b in rows:
        print(f"{name:<8} {f:15.1f} {b:18.1f}")
    if len(rows) == 2:
        print(f"speedup  {rows[0][1] / rows[1][1]:15.1f}x {rows[0][2] / rows[1][2]:17.1f}x")
    else:
        print("compiled extension not built; only the numpy backend was timed")


if __name__ == "__main__":
    main()
