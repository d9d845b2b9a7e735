"""Compare the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N] [--batches N]

Prints per-call timings for each kernel at training shapes (batch 64,
hidden 32, vocabulary 643), then the time of one full forward/backward
training step with each backend (run in a subprocess so the backend
switch happens at import).
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from symrewrite import _kernels_py
from symrewrite.rng import Stream

try:
    from symrewrite import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

STEP = r"""
import time
from symrewrite import kernels
from symrewrite.datagen import DistributionSpec, Repeats, generate_dataset
from symrewrite.grammar import new_grammar
from symrewrite.model import Codec, ModelConfig, forward_loss, init_params, make_batch
from symrewrite.rng import Stream
from symrewrite.tensor import Tape
g = new_grammar()
cfg = ModelConfig.for_grammar(g)
ds = generate_dataset(g, DistributionSpec(5, 10, Repeats.FORBIDDEN, 64 * {n}), Stream(1))
pairs = Codec(g, cfg).pairs(ds.samples)
p = init_params(cfg, Stream(0))
drop = Stream(2)
batches = [make_batch(cfg, pairs[i * 64:(i + 1) * 64]) for i in range({n})]
t = time.perf_counter()
for b in batches:
    with Tape() as tape:
        tape.backward(forward_loss(p, b, drop))
print(kernels.BACKEND, (time.perf_counter() - t) / {n})
"""


def kernel_inputs(B=64, H=32, V=643, N=1400):
    rng = Stream(0)
    pre = rng.uniform(-3, 3, (B, 4 * H))
    c = rng.uniform(-1, 1, (B, H))
    dh, dc = rng.uniform(-1, 1, (B, H)), rng.uniform(-1, 1, (B, H))
    logits = rng.uniform(-3, 3, (N, V))
    targets = np.array([rng.below(V - 1) for _ in range(N)], dtype=np.int64)
    return pre, c, dh, dc, logits, targets


def time_call(fn, repeat):
    return min(timeit.repeat(fn, number=repeat, repeat=3)) / repeat


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--batches", type=int, default=20)
    args = ap.parse_args()

    pre, c, dh, dc, logits, targets = kernel_inputs()
    backends = [("python", _kernels_py)] + ([("compiled", _compiled)] if _compiled else [])
    print(f"{'kernel':16}" + "".join(f"{name:>14}" for name, _ in backends))
    rows = {}
    for name, mod in backends:
        h, c2, acts, tc = mod.lstm_forward(pre, c)
        _, probs = mod.xent_forward(logits, targets, 642)
        rows.setdefault("lstm_forward", []).append(time_call(lambda: mod.lstm_forward(pre, c), args.repeat))
        rows.setdefault("lstm_backward", []).append(
            time_call(lambda: mod.lstm_backward(dh, dc, acts, c, tc), args.repeat))
        rows.setdefault("xent_forward", []).append(
            time_call(lambda: mod.xent_forward(logits, targets, 642), max(1, args.repeat // 20)))
        rows.setdefault("xent_backward", []).append(
            time_call(lambda: mod.xent_backward(probs, targets, 642, 1.0), max(1, args.repeat // 20)))
    for k, times in rows.items():
        print(f"{k:16}" + "".join(f"{1e6 * t:12.1f}us" for t in times))
    if _compiled is None:
        print("compiled extension not built; only the fallback was timed")

    print("\nfull training step (batch 64, default-size model):")
    for pure in ("1", "0") if _compiled else ("1",):
        env = {**os.environ, "SYMREWRITE_PURE_PYTHON": pure}
        out = subprocess.run([sys.executable, "-c", STEP.format(n=args.batches)], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"  {out[0]:10} {1e3 * float(out[1]):8.1f} ms/step")


if __name__ == "__main__":
    main()
