"""The symbol-rewriting task.

Each input symbol ``x_i`` owns a private output alphabet ``Y_i`` of equal
size; an input sequence is rewritten by replacing every symbol with a block
of ``k`` tokens from its alphabet. Token ids are dense integers: inputs
occupy ``0..n-1`` and ``Y_i`` occupies ``n + i*m .. n + (i+1)*m - 1``.
"""

from __future__ import annotations

import enum
import hashlib
import math
import numbers
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

from .errors import ConfigurationError, InvalidTokenError, ParseError
from .rng import Stream


class BlockPolicy(str, enum.Enum):
    DISTINCT = "distinct"  # tokens within a block are pairwise different
    REPLACE = "replace"  # any k-sequence over the alphabet


@dataclass(frozen=True)
class Grammar:
    num_inputs: int
    alphabet_size: int
    k: int
    policy: BlockPolicy = BlockPolicy.DISTINCT

    def __post_init__(self):
        object.__setattr__(self, "policy", BlockPolicy(self.policy))
        if self.num_inputs < 1 or self.alphabet_size < 1 or self.k < 1:
            raise ConfigurationError(
                f"need num_inputs, alphabet_size, k >= 1, got "
                f"{self.num_inputs}, {self.alphabet_size}, {self.k}")
        if self.policy is BlockPolicy.DISTINCT and self.k > self.alphabet_size:
            raise ConfigurationError(
                f"k={self.k} exceeds alphabet size {self.alphabet_size} "
                "under the distinct-within-block policy")

    @property
    def input_symbols(self) -> range:
        return range(self.num_inputs)

    @property
    def num_outputs(self) -> int:
        return self.num_inputs * self.alphabet_size

    @property
    def vocab_size(self) -> int:
        return self.num_inputs + self.num_outputs

    def output_alphabet(self, symbol: int) -> range:
        self.check_input(symbol)
        start = self.num_inputs + symbol * self.alphabet_size
        return range(start, start + self.alphabet_size)

    @property
    def output_alphabets(self) -> dict[int, range]:
        return {x: self.output_alphabet(x) for x in self.input_symbols}

    def is_input(self, token: int) -> bool:
        return 0 <= token < self.num_inputs

    def check_input(self, token: int) -> None:
        if not self.is_input(token):
            raise InvalidTokenError(f"{token!r} is not an input symbol")

    def owner(self, token: int) -> int | None:
        """Input symbol whose alphabet contains ``token``, or None."""
        if not self.num_inputs <= token < self.vocab_size:
            return None
        return (token - self.num_inputs) // self.alphabet_size

    @property
    def blocks_per_symbol(self) -> int:
        m, k = self.alphabet_size, self.k
        if self.policy is BlockPolicy.DISTINCT:
            return math.perm(m, k)
        return m**k

    # rendering ------------------------------------------------------------

    def token_name(self, token: int) -> str:
        if self.is_input(token):
            return f"x{token}"
        owner = self.owner(token)
        if owner is None:
            raise InvalidTokenError(f"{token!r} is outside the vocabulary")
        j = token - self.num_inputs - owner * self.alphabet_size
        return f"y{owner}_{j}"

    @cached_property
    def token_ids(self) -> dict[str, int]:
        """Name-to-id table for every token of the vocabulary."""
        return {self.token_name(t): t for t in range(self.vocab_size)}

    def parse_token(self, name: str) -> int:
        m = _TOKEN_RE.fullmatch(name)
        if m is None:
            raise InvalidTokenError(f"unrecognized token name {name!r}")
        if m["x"] is not None:
            tok = int(m["x"])
            self.check_input(tok)
            return tok
        i, j = int(m["yi"]), int(m["yj"])
        if not (0 <= i < self.num_inputs and 0 <= j < self.alphabet_size):
            raise InvalidTokenError(f"token {name!r} is outside the vocabulary")
        return self.num_inputs + i * self.alphabet_size + j

    def dumps(self) -> str:
        lines = [f"grammar v1 |X|={self.num_inputs} |Y|={self.alphabet_size} "
                 f"k={self.k} policy={self.policy.value}"]
        for x in self.input_symbols:
            names = " ".join(self.token_name(t) for t in self.output_alphabet(x))
            lines.append(f"x{x}: {names}")
        return "\n".join(lines) + "\n"

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(self.dumps().encode("ascii")).hexdigest()


_TOKEN_RE = re.compile(r"x(?P<x>\d+)|y(?P<yi>\d+)_(?P<yj>\d+)")
_HEADER_RE = re.compile(
    r"grammar v1 \|X\|=(\d+) \|Y\|=(\d+) k=(\d+) policy=(distinct|replace)")


def new_grammar(num_inputs: int = 40, alphabet_size: int = 16, k: int = 3,
                policy: BlockPolicy | str = BlockPolicy.DISTINCT) -> Grammar:
    try:
        policy = BlockPolicy(policy)
    except ValueError:
        raise ConfigurationError(f"unknown block policy {policy!r}") from None
    return Grammar(num_inputs, alphabet_size, k, policy)


def loads(text: str) -> Grammar:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty grammar file", 1)
    m = _HEADER_RE.fullmatch(lines[0].strip())
    if m is None:
        raise ParseError(f"bad grammar header {lines[0]!r}", 1)
    try:
        g = new_grammar(int(m[1]), int(m[2]), int(m[3]), m[4])
    except ConfigurationError as exc:
        raise ParseError(str(exc), 1) from None
    body = lines[1:]
    if len(body) != g.num_inputs:
        raise ParseError(f"expected {g.num_inputs} symbol lines, found {len(body)}")
    for x, line in enumerate(body):
        expected = f"x{x}: " + " ".join(g.token_name(t) for t in g.output_alphabet(x))
        if line.rstrip() != expected:
            raise ParseError("symbol line does not match the dense token layout", x + 2)
    return g


def read_grammar(path: str | Path) -> Grammar:
    return loads(Path(path).read_text(encoding="ascii"))


def write_grammar(g: Grammar, path: str | Path) -> None:
    Path(path).write_text(g.dumps(), encoding="ascii")


# task semantics ------------------------------------------------------------

def generate_block(g: Grammar, symbol: int, rng: Stream) -> list[int]:
    alphabet = g.output_alphabet(symbol)
    if g.policy is BlockPolicy.DISTINCT:
        return rng.sample(alphabet, g.k)
    return [alphabet[rng.below(g.alphabet_size)] for _ in range(g.k)]


def generate_output(g: Grammar, inputs: Sequence[int], rng: Stream) -> list[int]:
    """A uniformly random valid rewrite of ``inputs``."""
    out: list[int] = []
    for x in inputs:
        out.extend(generate_block(g, x, rng))
    return out


def valid_block(g: Grammar, symbol: int, block: Sequence[int]) -> bool:
    if len(block) != g.k:
        return False
    lo = g.num_inputs + symbol * g.alphabet_size
    hi = lo + g.alphabet_size
    for t in block:
        if not (isinstance(t, numbers.Integral) and lo <= t < hi):
            return False
    if g.policy is BlockPolicy.DISTINCT and len(set(block)) != g.k:
        return False
    return True


def validate(g: Grammar, inputs: Sequence[int], output: Sequence[int]) -> bool:
    """True iff ``output`` is a valid rewrite of ``inputs``. Never raises."""
    k = g.k
    if len(output) != k * len(inputs):
        return False
    for i, x in enumerate(inputs):
        if not (isinstance(x, numbers.Integral) and g.is_input(x)):
            return False
        if not valid_block(g, x, output[i * k:(i + 1) * k]):
            return False
    return True


def count_valid_outputs(g: Grammar, inputs: Sequence[int]) -> int:
    for x in inputs:
        g.check_input(x)
    return g.blocks_per_symbol ** len(inputs)
