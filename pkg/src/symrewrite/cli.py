"""Command-line interface: ``symrewrite {gen,train,eval,sweep,report}``.

Exit codes: 0 success, 1 usage error, 2 data or compatibility error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import __version__, checkpoint, kernels
from .datagen import (STANDARD_SPLITS, TEST_SETS, content_hash, read_dataset, standard_splits,
                      write_dataset)
from .errors import (
    CompatibilityError, ConfigurationError, InsufficientDataError, NumericError, ParseError,
    SymrewriteError, TrainingFailure,
)
from .evaluation import (
    TEST_NAMES, OracleDecoder, accuracy, read_results, run_sweep, write_results,
)
from .grammar import new_grammar, read_grammar, write_grammar
from .model import ModelConfig, ModelDecoder
from .report import accuracy_csv, boxplot_svg
from .rng import Stream
from .training import TrainConfig, format_record, train

GRAMMAR_FILE = "grammar.txt"
MANIFEST_FILE = "manifest.json"

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def _log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


# data directory ------------------------------------------------------------------

def load_data_dir(data: Path, names=None):
    """Grammar plus the named splits, each checked against the manifest."""
    manifest_path = data / MANIFEST_FILE
    if not manifest_path.exists():
        raise CompatibilityError(f"{data} has no {MANIFEST_FILE}; run `symrewrite gen` first")
    manifest = json.loads(manifest_path.read_text())
    grammar = read_grammar(data / GRAMMAR_FILE)
    if grammar.fingerprint != manifest["grammar_fingerprint"]:
        raise CompatibilityError("grammar file does not match the manifest")
    splits = {}
    for name in names or STANDARD_SPLITS:
        path = data / f"{name}.tsv"
        if content_hash(path) != manifest["datasets"][name]:
            raise CompatibilityError(f"{path.name} does not match its manifest fingerprint")
        splits[name] = read_dataset(path, grammar)
    return grammar, splits, manifest


def _subset_train(splits, n: int | None):
    if n is not None:
        if n < 1 or n > len(splits["train"]):
            raise ConfigurationError(f"--train-size must be in 1..{len(splits['train'])}")
        ds = splits["train"]
        splits["train"] = type(ds)(ds.spec, ds.samples[:n], ds.grammar_fingerprint)
    return splits


# commands ------------------------------------------------------------------------

def cmd_gen(args) -> int:
    out = Path(args.out)
    grammar = new_grammar(args.inputs, args.alphabet, args.k, args.policy)
    sizes = {"train": args.train_size} if args.train_size is not None else None
    splits = standard_splits(grammar, Stream(args.seed).split("data"), sizes)
    out.mkdir(parents=True, exist_ok=True)
    write_grammar(grammar, out / GRAMMAR_FILE)
    fingerprints = {}
    for name, ds in splits.items():
        path = out / f"{name}.tsv"
        write_dataset(ds, grammar, path)
        fingerprints[name] = content_hash(path)
        _log(f"wrote {path} ({len(ds)} samples)")
    config = {"seed": args.seed, "inputs": args.inputs, "alphabet": args.alphabet, "k": args.k,
              "policy": grammar.policy.value, "train_size": len(splits["train"])}
    manifest = {
        "tool_version": __version__,
        "config": config,
        "config_digest": _digest(config),
        "grammar_fingerprint": grammar.fingerprint,
        "datasets": fingerprints,
        "timestamps": {"created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())},
    }
    (out / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return 0


def _configs(args, grammar):
    tc = TrainConfig(learning_rate=args.lr, batch_size=args.batch_size,
                     max_grad_norm=args.max_grad_norm, dropout_p=args.dropout,
                     init_range=args.init_range, max_epochs=args.max_epochs,
                     loss_normalization=args.loss_normalization,
                     seed=getattr(args, "seed", 0) or 0)
    mc = ModelConfig.for_grammar(grammar, embed_dim=args.embed_dim, hidden_dim=args.hidden_dim,
                                 dropout_p=args.dropout, max_decode_len=args.max_decode_len)
    return mc, tc


def cmd_train(args) -> int:
    data = Path(args.data)
    grammar, splits, manifest = load_data_dir(data, ["train", "val_standard"])
    splits = _subset_train(splits, args.train_size)
    mc, tc = _configs(args, grammar)
    _log(f"kernels={kernels.BACKEND} " + format_record({k: v for k, v in asdict(tc).items()}))
    t0 = time.perf_counter()
    params, report = train(grammar, splits["train"], splits["val_standard"], mc, tc,
                           log=lambda rec: _log(format_record(rec)))
    meta = {"grammar": grammar.fingerprint, "train": asdict(tc),
            "train_samples": len(splits["train"]), "report": report.to_dict()}
    checkpoint.save(args.out, params, meta)
    report_doc = {**meta, "wall_time": time.perf_counter() - t0, "kernels": kernels.BACKEND}
    Path(str(args.out) + ".report.json").write_text(json.dumps(report_doc, indent=2, sort_keys=True) + "\n")
    _log(f"stopped: {report.stopped_reason.value} after {report.epochs_run} epochs, "
         f"selected epoch {report.selected_epoch}")
    return 0


def cmd_eval(args) -> int:
    names = TEST_NAMES if args.set == "all" else (args.set,)
    grammar, splits, _ = load_data_dir(Path(args.data), [TEST_SETS[n] for n in names])
    config, params = checkpoint.load(args.ckpt)
    if config.get("grammar") != grammar.fingerprint:
        raise CompatibilityError("checkpoint was trained on a different grammar")
    decoder = OracleDecoder(grammar, config.get("seed", 0)) if params is None else ModelDecoder(params, grammar)
    for n in names:
        acc = accuracy(decoder, grammar, splits[TEST_SETS[n]])
        print(f"{n}\t{acc:.4f}\t{100 * acc:.2f}%")
    return 0


def _seed_list(args) -> list[int]:
    if args.seed_list:
        text = Path(args.seed_list).read_text()
        seeds = [int(tok) for tok in text.replace(",", " ").split()]
    else:
        seeds = list(range(1, args.seeds + 1))
    if not seeds or len(set(seeds)) != len(seeds):
        raise ConfigurationError("seed list must be non-empty and free of duplicates")
    return seeds


def cmd_sweep(args) -> int:
    grammar, splits, manifest = load_data_dir(Path(args.data))
    splits = _subset_train(splits, args.train_size)
    mc, tc = _configs(args, grammar)
    seeds = _seed_list(args)
    out = Path(args.out)
    meta = {"grammar": grammar.fingerprint, "data_config_digest": manifest["config_digest"],
            "model": mc.to_dict(), "train": {k: v for k, v in asdict(tc).items() if k != "seed"},
            "train_samples": len(splits["train"]), "seeds": seeds, "kernels": kernels.BACKEND}

    def progress(r):
        status = "ok" if r.ok else f"FAILED ({r.error})"
        accs = " ".join(f"{n}={100 * r.accuracy[n]:.2f}" for n in TEST_NAMES) if r.ok else ""
        _log(f"seed={r.seed} {status} {accs} epochs={r.epochs_run} time={r.wall_time:.0f}s")

    results = run_sweep(grammar, splits, mc, tc, seeds, args.workers, on_result=progress)
    write_results(out, results, meta)
    (out / "boxplot.csv").write_text(accuracy_csv(results) if any(r.ok for r in results) else "")
    print((out / "summary.txt").read_text(), end="")
    failed = [r.seed for r in results if not r.ok]
    if failed:
        _log(f"failed seeds: {failed}")
        return EXIT_NUMERIC
    return 0


def cmd_report(args) -> int:
    results = read_results(args.results)
    csv_text = accuracy_csv(results)
    for target in args.out:
        path = Path(target)
        if path.suffix == ".csv":
            path.write_text(csv_text)
        elif path.suffix == ".svg":
            ok = [r for r in results if r.ok]
            cols = {n: [100 * r.accuracy[n] for r in ok] for n in TEST_NAMES}
            path.write_text(boxplot_svg(cols, f"Test accuracy across {len(ok)} seeds"))
        else:
            raise UsageError(f"--out must end in .csv or .svg, got {target}")
        _log(f"wrote {path}")
    return 0


# parser --------------------------------------------------------------------------

def _add_hparams(p) -> None:
    d = TrainConfig()
    p.add_argument("--lr", type=float, default=d.learning_rate)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--max-grad-norm", type=float, default=d.max_grad_norm)
    p.add_argument("--dropout", type=float, default=d.dropout_p)
    p.add_argument("--init-range", type=float, default=d.init_range)
    p.add_argument("--max-epochs", type=int, default=d.max_epochs)
    p.add_argument("--loss-normalization", choices=["sents", "tokens", "none"],
                   default=d.loss_normalization,
                   help="divide summed token losses by batch size, token count, or nothing")
    p.add_argument("--embed-dim", type=int, default=32)
    p.add_argument("--hidden-dim", type=int, default=32)
    p.add_argument("--max-decode-len", type=int, default=47)
    p.add_argument("--train-size", type=int, default=None,
                   help="use only the first N training samples")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="symrewrite", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="write the grammar, all seven splits and a manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inputs", type=int, default=40)
    p.add_argument("--alphabet", type=int, default=16)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--policy", choices=["distinct", "replace"], default="distinct")
    p.add_argument("--train-size", type=int, default=None, help="override the 100000-sample train split")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train one model and write a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_hparams(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on the test sets")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--set", choices=[*TEST_NAMES, "all"], default="all")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="train and score one model per seed")
    p.add_argument("--data", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--seeds", type=int, default=50, help="use seeds 1..N")
    group.add_argument("--seed-list", help="file of whitespace- or comma-separated seeds")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_hparams(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="export per-seed CSV and/or an SVG box plot")
    p.add_argument("--results", required=True)
    p.add_argument("--out", required=True, action="append", help="FILE.csv or FILE.svg (repeatable)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE
    except (TrainingFailure, NumericError) as exc:
        _log(f"numeric failure: {exc}")
        return EXIT_NUMERIC
    except (ConfigurationError, CompatibilityError, ParseError, InsufficientDataError,
            SymrewriteError, OSError, KeyError) as exc:
        _log(f"error: {exc}")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
