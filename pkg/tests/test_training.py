import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from symrewrite import checkpoint
from symrewrite.datagen import DistributionSpec, Repeats, generate_dataset
from symrewrite.errors import ConfigurationError, NumericError
from symrewrite.evaluation import accuracy
from symrewrite.grammar import new_grammar
from symrewrite.model import ModelConfig, ModelDecoder, init_params
from symrewrite.rng import Stream
from symrewrite.tensor import Parameter, Tape, matmul, mul
from symrewrite.training import (
    StopReason, TrainConfig, clip_global_norm, plateau_stop, sgd_step, train,
)


def test_clip_examples():
    g = [np.array([6.0, 8.0])]  # norm 10
    assert clip_global_norm(g, 5.0) == 0.5
    assert np.allclose(g[0], [3.0, 4.0])
    g = [np.array([3.0]), np.array([0.0])]
    assert clip_global_norm(g, 5.0) == 1.0
    assert g[0][0] == 3.0


def test_clip_rejects_bad_input():
    with pytest.raises(NumericError):
        clip_global_norm([np.array([np.inf])], 5.0)
    with pytest.raises(ConfigurationError):
        clip_global_norm([np.array([1.0])], 0.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-3, 1e3))
def test_clip_bounds_global_norm(seed, spread):
    rng = Stream(seed)
    grads = [rng.uniform(-spread, spread, (rng.randint(1, 5), rng.randint(1, 5)))
             for _ in range(rng.randint(1, 6))]
    before = math.sqrt(sum(float((x**2).sum()) for x in grads))
    factor = clip_global_norm(grads, 5.0)
    after = math.sqrt(sum(float((x**2).sum()) for x in grads))
    assert after <= 5.0 + 1e-9
    assert factor == pytest.approx(min(1.0, 5.0 / before))


def test_sgd_scalar():
    w = Parameter(np.array([1.0]), "w")
    w.grad[:] = 2.0
    sgd_step([w], 0.125)
    assert w.data[0] == 0.75
    assert w.grad[0] == 0.0
    sgd_step([w], 0.125)
    assert w.data[0] == 0.75


def test_quadratic_bowl_descends():
    w = Parameter(np.array([[3.0, -2.0]]), "w")
    losses = []
    for _ in range(20):
        with Tape() as tape:
            sq = mul(w, w)
            loss = matmul(sq, Parameter(np.ones((2, 1)), "ones"))
            tape.backward(loss)
        losses.append(float(loss.data.item()))
        sgd_step([w], 0.1)
    assert all(b < a for a, b in zip(losses, losses[1:]))


@pytest.mark.parametrize("accs,expected", [
    ([0.31, 0.74, 0.74], 2),
    ([0.5, 0.4], 1),
    ([0.1, 0.2, 0.3, 0.29], 3),
    ([0.0, 0.0], 1),
    ([0.1], None),
    ([0.1, 0.2, 0.3], None),
])
def test_plateau_rule(accs, expected):
    assert plateau_stop(accs) == expected


@pytest.mark.parametrize("bad", [
    dict(learning_rate=-1), dict(batch_size=0), dict(max_grad_norm=0), dict(dropout_p=1.0),
    dict(max_epochs=0), dict(loss_normalization="bogus"),
])
def test_bad_train_config(bad):
    with pytest.raises(ConfigurationError):
        TrainConfig(**bad)


def test_config_defaults():
    c = TrainConfig()
    assert (c.learning_rate, c.batch_size, c.max_grad_norm, c.dropout_p, c.init_range) == \
        (0.125, 64, 5.0, 0.1, 0.1)


# small end-to-end runs --------------------------------------------------------

G = new_grammar(6, 4, 2)
CFG = ModelConfig.for_grammar(G, embed_dim=8, hidden_dim=8, max_decode_len=12)
TRAIN = generate_dataset(G, DistributionSpec(2, 4, Repeats.FORBIDDEN, 150), Stream(1))
VAL = generate_dataset(G, DistributionSpec(2, 4, Repeats.FORBIDDEN, 40), Stream(2))


def scripted(seq):
    """Validation hook replaying a fixed accuracy sequence and recording snapshots."""
    seen = []

    def hook(params, epoch):
        seen.append(params.snapshot())
        return seq[epoch - 1]

    return hook, seen


@pytest.mark.parametrize("seq,stop,selected", [
    ([0.31, 0.74, 0.74, 0.9], 3, 2),
    ([0.2, 0.5, 0.6, 0.55, 0.9], 4, 3),
    ([0.4, 0.4, 0.9], 2, 1),
])
def test_training_stops_at_first_non_improving_epoch(seq, stop, selected):
    hook, seen = scripted(seq)
    params, report = train(G, TRAIN, VAL, CFG, TrainConfig(max_epochs=10, seed=3), val_accuracy=hook)
    assert report.stopped_reason is StopReason.PLATEAU
    assert report.epochs_run == stop
    assert report.selected_epoch == selected
    assert report.val_accuracy_per_epoch == seq[:stop]
    snap = params.snapshot()
    for name, arr in seen[selected - 1].items():
        assert np.array_equal(snap[name], arr)
    assert not all(np.array_equal(snap[n], seen[stop - 1][n]) for n in snap)


def test_max_epochs_when_always_improving():
    hook, _ = scripted([0.1, 0.2, 0.3])
    _, report = train(G, TRAIN, VAL, CFG, TrainConfig(max_epochs=3, seed=3), val_accuracy=hook)
    assert report.stopped_reason is StopReason.MAX_EPOCHS
    assert report.selected_epoch == 3 and report.epochs_run == 3


def test_zero_learning_rate_plateaus():
    cfg = TrainConfig(learning_rate=0.0, max_epochs=5, seed=1)
    params, report = train(G, TRAIN, VAL, CFG, cfg)
    assert report.epochs_run == 2 and report.selected_epoch == 1
    assert report.val_accuracy_per_epoch[0] == report.val_accuracy_per_epoch[1]
    fresh = init_params(CFG, Stream(1).split("init"), cfg.init_range)
    for a, b in zip(params, fresh):
        assert np.array_equal(a.data, b.data)


def test_same_seed_byte_identical_checkpoint():
    cfg = TrainConfig(max_epochs=2, seed=11)
    blobs = []
    for _ in range(2):
        p, r = train(G, TRAIN, VAL, CFG, cfg)
        blobs.append(checkpoint.dumps({"model": CFG.to_dict()}, p.snapshot()))
    assert blobs[0] == blobs[1]
    p2, _ = train(G, TRAIN, VAL, CFG, TrainConfig(max_epochs=2, seed=12))
    assert checkpoint.dumps({"model": CFG.to_dict()}, p2.snapshot()) != blobs[0]


def test_log_records():
    records = []
    train(G, TRAIN, VAL, CFG, TrainConfig(max_epochs=2, seed=4), log=records.append)
    assert [r["epoch"] for r in records] == list(range(1, len(records) + 1))
    assert all(set(r) == {"epoch", "train_loss", "val_acc"} for r in records)


def test_training_learns_small_grammar():
    # larger lr and init than the defaults so a tiny run leaves the initial plateau quickly;
    # early stopping is bypassed and the final model is scored directly
    g = new_grammar(4, 3, 1, "replace")
    cfg = ModelConfig.for_grammar(g, embed_dim=16, hidden_dim=16, max_decode_len=8)
    tr = generate_dataset(g, DistributionSpec(1, 3, Repeats.ALLOWED, 400), Stream(5))
    va = generate_dataset(g, DistributionSpec(1, 3, Repeats.ALLOWED, 60), Stream(6))
    params, report = train(g, tr, va, cfg,
                           TrainConfig(learning_rate=1.0, init_range=0.5, max_epochs=20,
                                       seed=2, dropout_p=0.0),
                           val_accuracy=lambda p, e: float(e))
    assert report.train_loss_per_epoch[-1] < report.train_loss_per_epoch[0] / 2
    assert accuracy(ModelDecoder(params, g), g, va) > 0.9
