import re
import statistics

import numpy as np
import pytest

from symrewrite import checkpoint
from symrewrite.errors import InsufficientDataError, ParseError
from symrewrite.evaluation import EvalResult
from symrewrite.model import ModelConfig, init_params
from symrewrite.report import accuracy_csv, box_stats, boxplot_svg, read_accuracy_csv
from symrewrite.rng import Stream


def test_checkpoint_round_trip(tmp_path):
    cfg = ModelConfig(6, 10, embed_dim=3, hidden_dim=2)
    p = init_params(cfg, Stream(0))
    path = tmp_path / "m.ckpt"
    checkpoint.save(path, p, {"grammar": "abc"})
    meta, back = checkpoint.load(path)
    assert meta["grammar"] == "abc" and meta["kind"] == "model"
    assert back.config == cfg
    for a, b in zip(p, back):
        assert np.array_equal(a.data, b.data)
    assert path.read_bytes() == checkpoint.dumps(meta, back.snapshot())


def test_checkpoint_detects_corruption(tmp_path):
    cfg = ModelConfig(6, 10, embed_dim=3, hidden_dim=2)
    blob = bytearray(checkpoint.dumps({"model": cfg.to_dict()}, init_params(cfg, Stream(0)).snapshot()))
    blob[60] ^= 0xFF
    with pytest.raises(ParseError):
        checkpoint.loads(bytes(blob))
    with pytest.raises(ParseError):
        checkpoint.loads(b"not a checkpoint")


def test_oracle_stub(tmp_path):
    path = tmp_path / "o.ckpt"
    checkpoint.save_oracle(path, "fp", 3)
    meta, params = checkpoint.load(path)
    assert params is None and meta == {"kind": "oracle", "grammar": "fp", "seed": 3}


# report ----------------------------------------------------------------------------

def linear_quantile(values, q):
    """Hand-rolled linear interpolation between order statistics (rank q*(n-1))."""
    v = sorted(values)
    pos = q * (len(v) - 1)
    lo = int(pos)
    hi = min(lo + 1, len(v) - 1)
    return v[lo] + (v[hi] - v[lo]) * (pos - lo)


@pytest.mark.parametrize("values", [
    [1.0, 2.0, 3.0, 4.0], [0.15, 12.0, 30.0, 33.3, 97.6, 40.0, 41.0],
    [5.0], [50.0, 50.0, 50.0], [1, 2, 3, 4, 5, 6, 7, 8, 9, 100],
])
def test_box_stats_match_independent_quartiles(values):
    s = box_stats(values)
    assert s.q1 == pytest.approx(linear_quantile(values, 0.25))
    assert s.median == pytest.approx(statistics.median(values))
    assert s.q3 == pytest.approx(linear_quantile(values, 0.75))
    iqr = s.q3 - s.q1
    inside = [v for v in values if s.q1 - 1.5 * iqr <= v <= s.q3 + 1.5 * iqr]
    assert s.whisker_lo == min(inside) and s.whisker_hi == max(inside)
    assert len(s.outliers) + len(inside) == len(values)


def test_outlier_detected():
    assert box_stats([1, 2, 3, 4, 5, 6, 7, 8, 9, 100]).outliers == [100.0]


def results():
    out = []
    for i, row in enumerate([(99.9, 80.0, 40.0, 10.0), (99.8, 95.0, 55.5, 60.0),
                             (99.85, 70.0, 20.0, 90.0)]):
        out.append(EvalResult(i + 1, dict(zip(("standard", "repeat", "short", "long"),
                                               [v / 100 for v in row])), 2, 3, 1.0))
    out.append(EvalResult(9, {}, 0, 1, 1.0, error="diverged"))
    return out


def test_csv_rows_are_successful_seeds():
    text = accuracy_csv(results())
    lines = text.splitlines()
    assert lines[0] == "standard,repeat,short,long"
    assert len(lines) == 4
    cols = read_accuracy_csv(text)
    assert cols["long"] == [10.0, 60.0, 90.0]
    with pytest.raises(InsufficientDataError):
        accuracy_csv([results()[-1]])


def test_svg_boxes_match_csv():
    cols = read_accuracy_csv(accuracy_csv(results()))
    svg = boxplot_svg(cols, "demo")
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert "linear interpolation" in svg
    groups = re.findall(r'<g class="box" data-set="(\w+)" data-q1="([\d.]+)" '
                        r'data-median="([\d.]+)" data-q3="([\d.]+)"', svg)
    assert [g[0] for g in groups] == ["standard", "repeat", "short", "long"]
    for name, q1, med, q3 in groups:
        assert float(q1) == pytest.approx(linear_quantile(cols[name], 0.25), abs=1e-4)
        assert float(med) == pytest.approx(statistics.median(cols[name]), abs=1e-4)
        assert float(q3) == pytest.approx(linear_quantile(cols[name], 0.75), abs=1e-4)


def test_degenerate_box():
    svg = boxplot_svg({"standard": [50.0, 50.0, 50.0]})
    assert 'height="0.00"' in svg
