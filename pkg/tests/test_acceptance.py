"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

Criteria 1-4 are judged on the stored ten-seed sweep in ``results/sweep10``
(produced by ``symrewrite sweep`` with default flags; see README). Set
``SYMREWRITE_SWEEP_DIR`` to judge a different sweep directory instead.
Criteria 5-10 are computed here.
"""

import itertools
import json
import math
import os
from pathlib import Path

import numpy as np
import pytest

from symrewrite import checkpoint
from symrewrite.datagen import standard_splits
from symrewrite.evaluation import TEST_NAMES, read_results, run_sweep, summarize
from symrewrite.grammar import count_valid_outputs, new_grammar, validate
from symrewrite.model import ModelConfig, forward_loss, init_params, make_batch
from symrewrite.rng import Stream
from symrewrite.tensor import grad_check
from symrewrite.training import TrainConfig, clip_global_norm, train

ROOT = Path(__file__).resolve().parent.parent
SWEEP_DIR = Path(os.environ.get("SYMREWRITE_SWEEP_DIR", ROOT / "results" / "sweep10"))
DEFAULT_HPARAMS = {"learning_rate": 0.125, "batch_size": 64, "max_grad_norm": 5.0, "dropout_p": 0.1,
          "init_range": 0.1}


@pytest.fixture(scope="module")
def sweep():
    doc = json.loads((SWEEP_DIR / "results.json").read_text())
    meta = doc["meta"]
    for k, v in DEFAULT_HPARAMS.items():
        assert meta["train"][k] == v, f"sweep was not run with the default hyperparameters ({k})"
    assert meta["model"]["embed_dim"] == meta["model"]["hidden_dim"] == 32
    assert meta["train_samples"] >= 20_000
    results = read_results(SWEEP_DIR)
    assert len(results) >= 10
    return results, meta


def pct(results, name):
    return np.array([100 * r.accuracy[name] for r in results if r.ok])


def test_criterion_1_standard_ceiling(sweep, criterion):
    results, _ = sweep
    ok = [r for r in results if r.ok]
    std = pct(results, "standard")
    worst = float(std.min()) if len(std) else float("nan")
    spread = float(std.std(ddof=1)) if len(std) > 1 else float("nan")
    passed = len(ok) > 0 and worst >= 99.0 and spread < 0.5
    criterion("1 standard ceiling", passed,
              f"{len(ok)} converged seeds, min standard {worst:.2f}% (need >= 99.0), "
              f"std {spread:.2f} (need < 0.5)")
    assert passed


def test_criterion_2_seed_sensitivity(sweep, criterion):
    results, _ = sweep
    long_, rep = pct(results, "long"), pct(results, "repeat")
    s_long, s_rep = float(long_.std(ddof=1)), float(rep.std(ddof=1))
    rng_long = float(long_.max() - long_.min())
    passed = len(long_) >= 10 and s_long >= 5.0 and rng_long >= 20.0 and s_rep >= 3.0
    criterion("2 seed sensitivity", passed,
              f"long std {s_long:.2f} (>= 5), long range {rng_long:.2f} (>= 20), "
              f"repeat std {s_rep:.2f} (>= 3), seeds {len(long_)}")
    assert passed


def test_criterion_3_difficulty_ordering(sweep, criterion):
    results, _ = sweep
    m = {n: float(pct(results, n).mean()) for n in TEST_NAMES}
    passed = m["standard"] > m["repeat"] > m["long"]
    criterion("3 difficulty ordering", passed,
              f"means standard {m['standard']:.2f} > repeat {m['repeat']:.2f} > long {m['long']:.2f}"
              f" (short {m['short']:.2f}, not gated)")
    assert passed


def test_criterion_4_correlation_reported(sweep, criterion):
    results, _ = sweep
    summary = summarize(results)
    text = (SWEEP_DIR / "summary.txt").read_text()
    corr = summary.pearson_repeat_long
    shown = "undefined (a column is constant)" if corr is None else f"{corr:.3f}"
    passed = "pearson(repeat, long)" in text
    criterion("4 repeat-long correlation reported", passed, f"pearson = {shown}; not gated")
    assert passed


def enumerate_valid(g, inputs):
    """Valid outputs built constructively, independent of the validator."""
    blocks = []
    for x in inputs:
        alphabet = g.output_alphabet(x)
        if g.policy.value == "distinct":
            blocks.append(list(itertools.permutations(alphabet, g.k)))
        else:
            blocks.append(list(itertools.product(alphabet, repeat=g.k)))
    return {sum(combo, ()) for combo in itertools.product(*blocks)}


def test_criterion_5_validity_oracle(criterion):
    checked = 0
    mismatches = []
    for policy in ("distinct", "replace"):
        for n_in, m, k in itertools.product((1, 2, 3), (1, 2, 3, 4), (1, 2)):
            if policy == "distinct" and k > m:
                continue
            g = new_grammar(n_in, m, k, policy)
            outputs = range(g.num_inputs, g.vocab_size)
            for n in (0, 1, 2):
                for inputs in itertools.product(g.input_symbols, repeat=n):
                    expected = enumerate_valid(g, inputs)
                    accepted = {y for y in itertools.product(outputs, repeat=k * n)
                                if validate(g, list(inputs), list(y))}
                    if accepted != expected or count_valid_outputs(g, list(inputs)) != len(expected):
                        mismatches.append((policy, n_in, m, k, inputs))
                    checked += 1
    passed = not mismatches
    criterion("5 validity oracle = brute force", passed,
              f"{checked} (grammar, input) cases, {len(mismatches)} mismatches")
    assert passed


def test_criterion_6_gradients(criterion):
    import test_tensor
    op_errors = {}
    for name, build in test_tensor.OPS.items():
        f, params = build()
        op_errors[name] = grad_check(lambda: f(*params), params)
    cfg = ModelConfig(input_vocab=6, output_vocab=16, embed_dim=4, hidden_dim=4, dropout_p=0.0)
    p = init_params(cfg, Stream(2), 1.0)
    batch = make_batch(cfg, [([1, 4], [0, 7, 12, 3])])
    model_err = grad_check(lambda: forward_loss(p, batch), list(p))
    worst_op = max(op_errors, key=op_errors.get)
    passed = model_err < 1e-4 and op_errors[worst_op] < 1e-6
    criterion("6 gradient correctness", passed,
              f"full model {model_err:.2e} (< 1e-4); worst op {worst_op} "
              f"{op_errors[worst_op]:.2e} (< 1e-6)")
    assert passed


def _small_setup():
    g = new_grammar(16, 4, 2)
    splits = standard_splits(g, Stream(9).split("data"), sizes={
        "train": 150, "val_standard": 30, "val_tuning": 1, "test_standard": 30,
        "test_repeat": 30, "test_short": 30, "test_long": 30})
    mc = ModelConfig.for_grammar(g, embed_dim=6, hidden_dim=6, max_decode_len=32)
    return g, splits, mc


def test_criterion_7_determinism(criterion):
    g, splits, mc = _small_setup()
    tc = TrainConfig(max_epochs=3, learning_rate=0.5, seed=5)
    blobs = []
    for _ in range(2):
        params, report = train(g, splits["train"], splits["val_standard"], mc, tc)
        blobs.append(checkpoint.dumps({"model": mc.to_dict(), "report": report.to_dict()},
                                      params.snapshot()))
    base = TrainConfig(max_epochs=3, learning_rate=0.5)
    one = run_sweep(g, splits, mc, base, range(1, 5), workers=1)
    four = run_sweep(g, splits, mc, base, range(1, 5), workers=4)
    table = lambda rs: [(r.seed, r.accuracy, r.selected_epoch, r.epochs_run, r.error)  # noqa: E731
                        for r in rs]
    passed = blobs[0] == blobs[1] and table(one) == table(four)
    criterion("7 determinism", passed,
              f"checkpoints identical: {blobs[0] == blobs[1]}; "
              f"1 vs 4 worker tables identical: {table(one) == table(four)}")
    assert passed


def test_criterion_8_dataset_contracts(criterion):
    g = new_grammar()
    splits = standard_splits(g, Stream(0).split("data"))
    bad = 0
    total = 0
    for name, ds in splits.items():
        for s in ds.samples:
            total += 1
            bad += not (ds.spec.admits(s.input) and validate(g, s.input, s.output))
    ranges = {"test_standard": (15, 30), "test_repeat": (15, 30), "test_short": (3, 12),
              "test_long": (33, 45)}
    out_of_range = {name: (min(len(s.output) for s in splits[name].samples),
                           max(len(s.output) for s in splits[name].samples))
                    for name in ranges}
    lengths_ok = all(lo <= out_of_range[n][0] and out_of_range[n][1] <= hi
                     for n, (lo, hi) in ranges.items())
    passed = bad == 0 and lengths_ok and len(splits["train"]) == 100_000
    criterion("8 dataset contracts", passed,
              f"{total} samples over 7 splits, {bad} violations; target lengths {out_of_range}")
    assert passed


def test_criterion_9_clipping(criterion):
    rng = Stream(123)
    worst = 0.0
    for trial in range(500):
        scale = 10.0 ** rng.uniform(-3, 3, ())
        grads = [rng.uniform(-scale, scale, (rng.randint(1, 40), rng.randint(1, 40)))
                 for _ in range(rng.randint(1, 13))]
        clip_global_norm(grads, 5.0)
        worst = max(worst, math.sqrt(sum(float((x * x).sum()) for x in grads)))
    passed = worst <= 5.0 + 1e-9
    criterion("9 clipping", passed, f"max post-clip norm {worst:.12f} over 500 random draws")
    assert passed


def test_criterion_10_early_stopping(criterion):
    g, splits, mc = _small_setup()
    cases = [([0.31, 0.74, 0.74, 0.80], 3, 2), ([0.1, 0.5, 0.4, 0.9], 3, 2),
             ([0.2, 0.3, 0.4, 0.5, 0.5], 5, 4), ([0.6, 0.6, 0.7], 2, 1)]
    failures = []
    for seq, stop, selected in cases:
        seen = []

        def hook(params, epoch, seq=seq, seen=seen):
            seen.append(params.snapshot())
            return seq[epoch - 1]

        params, report = train(g, splits["train"], splits["val_standard"], mc,
                               TrainConfig(max_epochs=10, seed=1), val_accuracy=hook)
        snap = params.snapshot()
        same = all(np.array_equal(snap[n], seen[selected - 1][n]) for n in snap)
        if (report.epochs_run, report.selected_epoch) != (stop, selected) or not same:
            failures.append(seq)
    passed = not failures
    criterion("10 early stopping", passed,
              f"{len(cases)} synthetic sequences, failures: {failures or 'none'}")
    assert passed
