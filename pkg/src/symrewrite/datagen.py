"""Input distributions, paired datasets, and the dataset file format."""

from __future__ import annotations

import enum
import hashlib
import re
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

from .errors import CompatibilityError, ConfigurationError, ParseError
from .grammar import Grammar, generate_output, validate
from .rng import Stream


class Repeats(str, enum.Enum):
    FORBIDDEN = "forbidden"
    ALLOWED = "allowed"
    REQUIRED = "required"  # at least one duplicated symbol


@dataclass(frozen=True)
class DistributionSpec:
    min_len: int
    max_len: int
    repeats: Repeats = Repeats.FORBIDDEN
    size: int = 0

    def __post_init__(self):
        object.__setattr__(self, "repeats", Repeats(self.repeats))
        if not 1 <= self.min_len <= self.max_len:
            raise ConfigurationError(f"bad length range {self.min_len}-{self.max_len}")
        if self.size < 0:
            raise ConfigurationError("dataset size must be non-negative")
        if self.repeats is Repeats.REQUIRED and self.min_len < 2:
            raise ConfigurationError("a required repeat needs min_len >= 2")

    def check_against(self, g: Grammar) -> None:
        if self.repeats is Repeats.FORBIDDEN and self.max_len > g.num_inputs:
            raise ConfigurationError(
                f"length {self.max_len} without repeats needs at least "
                f"{self.max_len} input symbols, grammar has {g.num_inputs}")
        if self.repeats is Repeats.REQUIRED and g.num_inputs < 1:
            raise ConfigurationError("no symbols to repeat")

    def admits(self, inputs: Sequence[int]) -> bool:
        if not self.min_len <= len(inputs) <= self.max_len:
            return False
        distinct = len(set(inputs)) == len(inputs)
        if self.repeats is Repeats.FORBIDDEN:
            return distinct
        if self.repeats is Repeats.REQUIRED:
            return not distinct
        return True


class Sample(NamedTuple):
    input: tuple[int, ...]
    output: tuple[int, ...]


@dataclass
class Dataset:
    spec: DistributionSpec
    samples: list[Sample]
    grammar_fingerprint: str

    def __len__(self) -> int:
        return len(self.samples)


def sample_input(g: Grammar, spec: DistributionSpec, rng: Stream) -> list[int]:
    spec.check_against(g)
    n = rng.randint(spec.min_len, spec.max_len)
    if spec.repeats is Repeats.FORBIDDEN:
        return rng.sample(g.input_symbols, n)
    while True:
        seq = [rng.below(g.num_inputs) for _ in range(n)]
        if spec.repeats is Repeats.ALLOWED or len(set(seq)) < n:
            return seq


def generate_dataset(g: Grammar, spec: DistributionSpec, rng: Stream) -> Dataset:
    spec.check_against(g)
    samples = []
    for _ in range(spec.size):
        x = sample_input(g, spec, rng)
        y = generate_output(g, x, rng)
        samples.append(Sample(tuple(x), tuple(y)))
    return Dataset(spec, samples, g.fingerprint)


STANDARD_SPLITS: dict[str, DistributionSpec] = {
    "train": DistributionSpec(5, 10, Repeats.FORBIDDEN, 100_000),
    "val_standard": DistributionSpec(5, 10, Repeats.FORBIDDEN, 2000),
    "val_tuning": DistributionSpec(3, 12, Repeats.ALLOWED, 5000),
    "test_standard": DistributionSpec(5, 10, Repeats.FORBIDDEN, 2000),
    "test_repeat": DistributionSpec(5, 10, Repeats.REQUIRED, 2000),
    "test_short": DistributionSpec(1, 4, Repeats.FORBIDDEN, 2000),
    "test_long": DistributionSpec(11, 15, Repeats.FORBIDDEN, 2000),
}

TEST_SETS = {"standard": "test_standard", "repeat": "test_repeat",
             "short": "test_short", "long": "test_long"}


def standard_splits(g: Grammar, rng: Stream,
                 sizes: dict[str, int] | None = None) -> dict[str, Dataset]:
    """All seven splits, each from its own named child of ``rng``.

    ``sizes`` optionally overrides split sizes (e.g. a smaller train set).
    """
    specs = dict(STANDARD_SPLITS)
    for name, size in (sizes or {}).items():
        if name not in specs:
            raise ConfigurationError(f"unknown split {name!r}")
        s = specs[name]
        specs[name] = DistributionSpec(s.min_len, s.max_len, s.repeats, size)
    for spec in specs.values():
        spec.check_against(g)
    return {name: generate_dataset(g, spec, rng.split(name))
            for name, spec in specs.items()}


# file format ----------------------------------------------------------------

_HEADER_RE = re.compile(
    r"dataset v1 size=(\d+) len=(\d+)-(\d+) repeats=(forbidden|allowed|required) "
    r"grammar=([0-9a-f]{64})")


def dumps_dataset(ds: Dataset, g: Grammar) -> str:
    s = ds.spec
    lines = [f"dataset v1 size={len(ds.samples)} len={s.min_len}-{s.max_len} "
             f"repeats={s.repeats.value} grammar={ds.grammar_fingerprint}"]
    name = g.token_name
    for smp in ds.samples:
        lines.append(" ".join(map(name, smp.input)) + "\t"
                     + " ".join(map(name, smp.output)))
    return "\n".join(lines) + "\n"


def write_dataset(ds: Dataset, g: Grammar, path: str | Path) -> None:
    if ds.grammar_fingerprint != g.fingerprint:
        raise CompatibilityError("dataset was not generated from this grammar")
    for i, smp in enumerate(ds.samples):
        if not validate(g, smp.input, smp.output) or not ds.spec.admits(smp.input):
            raise ConfigurationError(f"sample {i} violates its dataset contract")
    Path(path).write_text(dumps_dataset(ds, g), encoding="ascii")


def loads_dataset(text: str, grammar: Grammar) -> Dataset:
    """Parse a dataset and validate every sample against ``grammar``."""
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty dataset file", 1)
    m = _HEADER_RE.fullmatch(lines[0].strip())
    if m is None:
        raise ParseError(f"bad dataset header {lines[0]!r}", 1)
    size, lo, hi, mode, fp = int(m[1]), int(m[2]), int(m[3]), m[4], m[5]
    try:
        spec = DistributionSpec(lo, hi, Repeats(mode), size)
    except ConfigurationError as exc:
        raise ParseError(str(exc), 1) from None
    if grammar.fingerprint != fp:
        raise CompatibilityError(
            f"dataset grammar {fp[:12]} does not match grammar {grammar.fingerprint[:12]}")
    body = lines[1:]
    if len(body) != size:
        raise ParseError(f"header says {size} samples, found {len(body)}")
    ids = grammar.token_ids
    samples = []
    for i, line in enumerate(body):
        lineno = i + 2
        src, sep, tgt = line.partition("\t")
        if not sep:
            raise ParseError("missing tab between input and output", lineno)
        try:
            x = tuple(ids[t] for t in src.split())
            y = tuple(ids[t] for t in tgt.split())
        except KeyError as exc:
            raise ParseError(f"unknown token {exc.args[0]!r}", lineno) from None
        if len(y) != grammar.k * len(x):
            raise ParseError(
                f"output length {len(y)} is not {grammar.k} x input length {len(x)}", lineno)
        if not validate(grammar, x, y):
            raise ParseError("output is not a valid rewrite of the input", lineno)
        if not spec.admits(x):
            raise ParseError("input violates the header's length/repeat constraint", lineno)
        samples.append(Sample(x, y))
    return Dataset(spec, samples, fp)


def read_dataset(path: str | Path, grammar: Grammar) -> Dataset:
    return loads_dataset(Path(path).read_text(encoding="ascii"), grammar)


def content_hash(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
