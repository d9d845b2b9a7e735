"""Scoring, multi-seed sweeps, and cross-seed summary statistics."""

from __future__ import annotations

import json
import math
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import training
from .datagen import TEST_SETS, Dataset
from .errors import InsufficientDataError, TrainingFailure, UndefinedCorrelationError
from .grammar import Grammar, generate_output, validate
from .model import ModelConfig, ModelDecoder
from .rng import Stream

TEST_NAMES = ("standard", "repeat", "short", "long")


class OracleDecoder:
    """Answers with a fresh random valid rewrite; scores 1.0 by construction."""

    def __init__(self, grammar: Grammar, seed: int = 0):
        self.grammar = grammar
        self.rng = Stream(seed).split("oracle")

    def __call__(self, inputs: Sequence[int]) -> list[int]:
        return generate_output(self.grammar, inputs, self.rng)

    def decode_many(self, inputs: Sequence[Sequence[int]]) -> list[list[int]]:
        return [self(x) for x in inputs]


def valid_count(decoder, grammar: Grammar, dataset: Dataset) -> int:
    inputs = [s.input for s in dataset.samples]
    if hasattr(decoder, "decode_many"):
        outputs = decoder.decode_many(inputs)
    else:
        outputs = [decoder(x) for x in inputs]
    return sum(validate(grammar, x, y) for x, y in zip(inputs, outputs))


def accuracy(decoder, grammar: Grammar, dataset: Dataset) -> float:
    """Fraction of samples whose decoded output is a valid rewrite.

    The stored gold outputs are ignored: any valid rewrite counts.
    """
    if len(dataset) == 0:
        return 0.0
    return valid_count(decoder, grammar, dataset) / len(dataset)


@dataclass
class EvalResult:
    seed: int
    accuracy: dict[str, float] = field(default_factory=dict)
    selected_epoch: int = 0
    epochs_run: int = 0
    wall_time: float = 0.0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run_seed(grammar: Grammar, splits: dict[str, Dataset], model_config: ModelConfig,
             train_config: training.TrainConfig,
             log: Callable[[dict], None] | None = None) -> EvalResult:
    """Train with ``train_config.seed`` and score the selected model on the four test sets."""
    t0 = time.perf_counter()
    params, report = training.train(grammar, splits["train"], splits["val_standard"],
                                    model_config, train_config, log=log)
    decoder = ModelDecoder(params, grammar)
    acc = {name: accuracy(decoder, grammar, splits[TEST_SETS[name]]) for name in TEST_NAMES}
    return EvalResult(train_config.seed, acc, report.selected_epoch, report.epochs_run,
                      time.perf_counter() - t0)


# sweeps ------------------------------------------------------------------------

_WORKER: dict = {}


def _init_worker(grammar, splits, model_config, base_config):
    _WORKER.update(grammar=grammar, splits=splits, model_config=model_config,
                   base_config=base_config)


def _run_one(seed: int) -> EvalResult:
    w = _WORKER
    cfg = training.TrainConfig(**{**asdict(w["base_config"]), "seed": seed})
    t0 = time.perf_counter()
    try:
        return run_seed(w["grammar"], w["splits"], w["model_config"], cfg)
    except TrainingFailure as exc:
        return EvalResult(seed, wall_time=time.perf_counter() - t0, error=str(exc))


def run_sweep(grammar: Grammar, splits: dict[str, Dataset], model_config: ModelConfig,
              base_config: training.TrainConfig, seeds: Iterable[int], workers: int = 1,
              on_result: Callable[[EvalResult], None] | None = None) -> list[EvalResult]:
    """One training run per seed; results come back in seed-list order.

    Each run is self-seeded and sequential, so results do not depend on
    ``workers``. Diverged seeds are returned with ``error`` set.
    """
    seeds = list(seeds)
    results: list[EvalResult] = []
    if workers <= 1:
        _init_worker(grammar, splits, model_config, base_config)
        for s in seeds:
            results.append(_run_one(s))
            if on_result:
                on_result(results[-1])
        return results
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(workers, mp_context=ctx, initializer=_init_worker,
                             initargs=(grammar, splits, model_config, base_config)) as pool:
        for r in pool.map(_run_one, seeds):
            results.append(r)
            if on_result:
                on_result(r)
    return results


# statistics --------------------------------------------------------------------

def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Product-moment correlation of two equal-length, non-constant columns."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise InsufficientDataError("pearson needs two equal-length columns of length >= 2")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("correlation is undefined for a constant column")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


@dataclass
class SetStats:
    mean: float
    std: float
    min: float
    max: float


@dataclass
class SweepSummary:
    n: int
    stats: dict[str, SetStats]
    pearson_repeat_long: float | None
    best_seed: int
    best_nonstandard_mean: float
    failed_seeds: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "std_convention": "sample (n-1)",
            "stats": {k: asdict(v) for k, v in self.stats.items()},
            "pearson_repeat_long": self.pearson_repeat_long,
            "best_seed": self.best_seed,
            "best_nonstandard_mean": self.best_nonstandard_mean,
            "failed_seeds": self.failed_seeds,
        }


def summarize(results: Sequence[EvalResult]) -> SweepSummary:
    """Summary statistics in percent over successful seeds."""
    ok = [r for r in results if r.ok]
    if len(ok) < 2:
        raise InsufficientDataError(f"need at least 2 successful seeds, got {len(ok)}")
    cols = {name: np.array([100.0 * r.accuracy[name] for r in ok]) for name in TEST_NAMES}
    stats = {name: SetStats(float(c.mean()), float(c.std(ddof=1)), float(c.min()), float(c.max()))
             for name, c in cols.items()}
    try:
        corr = pearson(cols["repeat"], cols["long"])
    except UndefinedCorrelationError:
        corr = None
    nonstd = (cols["repeat"] + cols["short"] + cols["long"]) / 3.0
    best = int(np.argmax(nonstd))
    return SweepSummary(len(ok), stats, corr, ok[best].seed, float(nonstd[best]),
                        [r.seed for r in results if not r.ok])


# results files -------------------------------------------------------------------

RESULTS_TSV = "results.tsv"
RESULTS_JSON = "results.json"
SUMMARY_TXT = "summary.txt"
TSV_COLUMNS = ("seed", "status", *TEST_NAMES, "selected_epoch", "epochs_run", "wall_time")


def results_tsv(results: Sequence[EvalResult]) -> str:
    lines = ["\t".join(TSV_COLUMNS)]
    for r in results:
        accs = [f"{100 * r.accuracy[n]:.2f}" if r.ok else "" for n in TEST_NAMES]
        lines.append("\t".join([str(r.seed), "ok" if r.ok else "failed", *accs,
                                str(r.selected_epoch), str(r.epochs_run), f"{r.wall_time:.1f}"]))
    return "\n".join(lines) + "\n"


def summary_text(results: Sequence[EvalResult]) -> str:
    try:
        s = summarize(results)
    except InsufficientDataError as exc:
        return f"insufficient-data: {exc}\n"
    rows = [f"{'':8}" + "".join(f"{n:>10}" for n in TEST_NAMES)]
    for stat in ("mean", "std", "min", "max"):
        rows.append(f"{stat:8}" + "".join(f"{getattr(s.stats[n], stat):10.2f}" for n in TEST_NAMES))
    corr = "undefined" if s.pearson_repeat_long is None else f"{s.pearson_repeat_long:.2f}"
    rows.append(f"pearson(repeat, long) = {corr}")
    rows.append(f"best non-standard mean = {s.best_nonstandard_mean:.2f} (seed {s.best_seed})")
    rows.append(f"seeds: {s.n} ok, {len(s.failed_seeds)} failed"
                + (f" {s.failed_seeds}" if s.failed_seeds else ""))
    rows.append("std uses the n-1 denominator")
    return "\n".join(rows) + "\n"


def write_results(out_dir: str | Path, results: Sequence[EvalResult], meta: dict | None = None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / RESULTS_TSV).write_text(results_tsv(results))
    try:
        summary = summarize(results).to_dict()
    except InsufficientDataError as exc:
        summary = {"insufficient-data": str(exc)}
    doc = {"meta": meta or {}, "results": [asdict(r) for r in results], "summary": summary}
    (out / RESULTS_JSON).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    (out / SUMMARY_TXT).write_text(summary_text(results))


def read_results(out_dir: str | Path) -> list[EvalResult]:
    doc = json.loads((Path(out_dir) / RESULTS_JSON).read_text())
    return [EvalResult(**r) for r in doc["results"]]
