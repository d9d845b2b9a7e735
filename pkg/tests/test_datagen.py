import math
from collections import Counter

import pytest

from symrewrite.datagen import (
    STANDARD_SPLITS, DistributionSpec, Repeats, content_hash, dumps_dataset, generate_dataset,
    loads_dataset, standard_splits, read_dataset, sample_input, write_dataset,
)
from symrewrite.errors import CompatibilityError, ConfigurationError, ParseError
from symrewrite.grammar import new_grammar, validate
from symrewrite.rng import Stream

G = new_grammar()


def test_forbidden_repeats():
    spec = DistributionSpec(5, 10, Repeats.FORBIDDEN)
    rng = Stream(1)
    for _ in range(2000):
        x = sample_input(G, spec, rng)
        assert 5 <= len(x) <= 10
        assert len(set(x)) == len(x)


def test_single_symbol_spec():
    rng = Stream(1)
    for _ in range(100):
        assert len(sample_input(G, DistributionSpec(1, 1, Repeats.FORBIDDEN), rng)) == 1


def test_required_repeat_always_duplicates():
    spec = DistributionSpec(5, 10, Repeats.REQUIRED)
    rng = Stream(2)
    draws = [sample_input(G, spec, rng) for _ in range(10**4)]
    assert sum(len(set(x)) == len(x) for x in draws) == 0


def test_length_histogram_uniform():
    spec = DistributionSpec(5, 10, Repeats.FORBIDDEN)
    rng = Stream(3)
    n = 12000
    counts = Counter(len(sample_input(G, spec, rng)) for _ in range(n))
    p = 1 / 6
    sigma = math.sqrt(n * p * (1 - p))
    for length in range(5, 11):
        assert abs(counts[length] - n * p) < 3 * sigma


@pytest.mark.parametrize("spec", [
    dict(min_len=0, max_len=3), dict(min_len=4, max_len=3),
    dict(min_len=1, max_len=3, repeats=Repeats.REQUIRED), dict(min_len=1, max_len=2, size=-1),
])
def test_bad_specs(spec):
    with pytest.raises(ConfigurationError):
        DistributionSpec(**spec)


def test_infeasible_against_grammar():
    small = new_grammar(10, 16, 3)
    with pytest.raises(ConfigurationError):
        sample_input(small, DistributionSpec(11, 15, Repeats.FORBIDDEN), Stream(0))
    with pytest.raises(ConfigurationError):
        standard_splits(small, Stream(0), sizes={"train": 10})


def test_empty_dataset():
    ds = generate_dataset(G, DistributionSpec(5, 10, Repeats.FORBIDDEN, 0), Stream(0))
    assert len(ds) == 0


def test_determinism_byte_identical():
    spec = DistributionSpec(5, 10, Repeats.FORBIDDEN, 300)
    a = dumps_dataset(generate_dataset(G, spec, Stream(5)), G)
    b = dumps_dataset(generate_dataset(G, spec, Stream(5)), G)
    assert a == b


@pytest.fixture(scope="module")
def splits():
    return standard_splits(G, Stream(0).split("data"), sizes={"train": 5000})


def test_standard_split_specs():
    assert STANDARD_SPLITS["train"] == DistributionSpec(5, 10, Repeats.FORBIDDEN, 100_000)
    assert STANDARD_SPLITS["val_standard"].size == 2000
    assert STANDARD_SPLITS["val_tuning"] == DistributionSpec(3, 12, Repeats.ALLOWED, 5000)
    for name in ("test_standard", "test_repeat", "test_short", "test_long"):
        assert STANDARD_SPLITS[name].size == 2000


def test_all_splits_satisfy_contracts(splits):
    assert set(splits) == set(STANDARD_SPLITS)
    for name, ds in splits.items():
        assert len(ds) == ds.spec.size
        for s in ds.samples:
            assert ds.spec.admits(s.input), name
            assert validate(G, s.input, s.output), name


@pytest.mark.parametrize("name,lo,hi", [("test_standard", 15, 30), ("test_repeat", 15, 30),
                                         ("test_short", 3, 12), ("test_long", 33, 45)])
def test_target_lengths(splits, name, lo, hi):
    lengths = [len(s.output) for s in splits[name].samples]
    assert lo <= min(lengths) and max(lengths) <= hi


def test_splits_use_independent_streams():
    a = standard_splits(G, Stream(0).split("data"), sizes={"train": 50})
    b = standard_splits(G, Stream(0).split("data"), sizes={"train": 80})
    assert a["test_long"].samples == b["test_long"].samples
    assert a["train"].samples == b["train"].samples[:50]


def test_round_trip(tmp_path, splits):
    for name in ("test_short", "test_repeat", "val_tuning"):
        path = tmp_path / f"{name}.tsv"
        write_dataset(splits[name], G, path)
        back = read_dataset(path, G)
        assert back.spec == splits[name].spec
        assert back.samples == splits[name].samples
        assert back.grammar_fingerprint == G.fingerprint


def test_header_format(splits):
    text = dumps_dataset(splits["test_long"], G)
    assert text.splitlines()[0] == (f"dataset v1 size=2000 len=11-15 repeats=forbidden "
                                    f"grammar={G.fingerprint}")
    first = text.splitlines()[1]
    src, tgt = first.split("\t")
    assert all(t.startswith("x") for t in src.split())
    assert all(t.startswith("y") for t in tgt.split())


def test_bad_output_length_is_parse_error(splits):
    lines = dumps_dataset(splits["test_short"], G).splitlines()
    lines[3] = lines[3] + " y0_0"
    with pytest.raises(ParseError) as exc:
        loads_dataset("\n".join(lines) + "\n", G)
    assert exc.value.line == 4


def test_invalid_block_is_parse_error(splits):
    lines = dumps_dataset(splits["test_short"], G).splitlines()
    src, tgt = lines[1].split("\t")
    toks = tgt.split()
    toks[0] = "y39_0" if not src.startswith("x39") else "y0_0"
    lines[1] = src + "\t" + " ".join(toks)
    with pytest.raises(ParseError):
        loads_dataset("\n".join(lines) + "\n", G)


def test_fingerprint_mismatch(tmp_path, splits):
    path = tmp_path / "d.tsv"
    write_dataset(splits["test_short"], G, path)
    with pytest.raises(CompatibilityError):
        read_dataset(path, new_grammar(40, 16, 3, "replace"))


def test_train_file_hash_stable(tmp_path):
    ds = generate_dataset(G, STANDARD_SPLITS["train"], Stream(0).split("data").split("train"))
    assert len(ds) == 100_000
    path = tmp_path / "train.tsv"
    write_dataset(ds, G, path)
    h = content_hash(path)
    back = read_dataset(path, G)
    path2 = tmp_path / "again.tsv"
    write_dataset(back, G, path2)
    assert content_hash(path2) == h
