"""SGD training with global-norm clipping and plateau early stopping."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import evaluation
from .datagen import Dataset
from .errors import ConfigurationError, NumericError, TrainingFailure
from .grammar import Grammar
from .model import Codec, ModelConfig, ModelDecoder, ModelParams, forward_loss, init_params, make_batch
from .rng import Stream
from .tensor import Parameter, Tape


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.125
    batch_size: int = 64
    max_grad_norm: float = 5.0
    dropout_p: float = 0.1
    init_range: float = 0.1
    max_epochs: int = 100
    seed: int = 0
    # gradient of the summed token losses divided by: "sents" batch size,
    # "tokens" token count, "none" 1
    loss_normalization: str = "sents"

    def __post_init__(self):
        if self.loss_normalization not in ("sents", "tokens", "none"):
            raise ConfigurationError(f"unknown loss_normalization {self.loss_normalization!r}")
        if self.learning_rate < 0 or self.batch_size < 1 or self.max_grad_norm <= 0:
            raise ConfigurationError("learning_rate >= 0, batch_size >= 1, max_grad_norm > 0 required")
        if not 0 <= self.dropout_p < 1 or self.init_range < 0 or self.max_epochs < 1:
            raise ConfigurationError("dropout_p in [0, 1), init_range >= 0, max_epochs >= 1 required")


class StopReason(str, enum.Enum):
    PLATEAU = "ValPlateauOrDrop"
    MAX_EPOCHS = "MaxEpochs"


@dataclass
class TrainReport:
    epochs_run: int
    val_accuracy_per_epoch: list[float]
    stopped_reason: StopReason
    selected_epoch: int
    train_loss_per_epoch: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stopped_reason"] = self.stopped_reason.value
        return d


def clip_global_norm(grads: Sequence[np.ndarray], max_norm: float) -> float:
    """Scale ``grads`` in place so their joint L2 norm is at most ``max_norm``.

    Returns the factor applied (1.0 when no clipping was needed).
    """
    if max_norm <= 0:
        raise ConfigurationError("max_norm must be positive")
    total = 0.0
    for g in grads:
        total += float(np.dot(g.ravel(), g.ravel()))
    norm = math.sqrt(total)
    if not math.isfinite(norm):
        raise NumericError("gradient norm is not finite")
    if norm <= max_norm:
        return 1.0
    factor = max_norm / norm
    for g in grads:
        g *= factor
    return factor


def sgd_step(params: Sequence[Parameter], learning_rate: float) -> None:
    for p in params:
        p.data -= learning_rate * p.grad
        p.zero_grad()


def plateau_stop(accuracies: Sequence[float]) -> int | None:
    """Selected epoch (1-based) if the latest epoch failed to strictly improve.

    The comparison is exact: accuracies are ratios of integer counts.
    """
    e = len(accuracies)
    if e >= 2 and accuracies[-1] <= accuracies[-2]:
        return e - 1
    return None


def format_record(record: dict) -> str:
    return " ".join(f"{k}={v:.6f}" if isinstance(v, float) else f"{k}={v}"
                    for k, v in record.items())


def train(grammar: Grammar, train_set: Dataset, val_set: Dataset,
          model_config: ModelConfig, config: TrainConfig,
          log: Callable[[dict], None] | None = None,
          val_accuracy: Callable[[ModelParams, int], float] | None = None,
          ) -> tuple[ModelParams, TrainReport]:
    """Train from scratch; returns the parameters selected by early stopping.

    The seed drives three independent streams: ``init`` (weights), ``order``
    (per-epoch shuffles) and ``dropout`` (masks). ``val_accuracy`` replaces
    the validation metric, which is otherwise greedy-decode validity on
    ``val_set``.
    """
    if len(train_set) == 0:
        raise ConfigurationError("empty training set")
    if model_config.dropout_p != config.dropout_p:
        model_config = ModelConfig(**{**model_config.to_dict(), "dropout_p": config.dropout_p})
    root = Stream(config.seed)
    params = init_params(model_config, root.split("init"), config.init_range)
    order = root.split("order")
    drop = root.split("dropout")
    codec = Codec(grammar, model_config)
    pairs = codec.pairs(train_set.samples)
    plist = list(params)
    if val_accuracy is None:
        def val_accuracy(p: ModelParams, epoch: int) -> float:
            return evaluation.accuracy(ModelDecoder(p, grammar), grammar, val_set)

    accs: list[float] = []
    losses: list[float] = []
    previous = params.snapshot()
    for epoch in range(1, config.max_epochs + 1):
        perm = order.permutation(len(pairs))
        total, steps = 0.0, 0
        for step, start in enumerate(range(0, len(pairs), config.batch_size)):
            batch = make_batch(model_config, [pairs[i] for i in perm[start:start + config.batch_size]])
            try:
                with Tape() as tape:
                    loss = forward_loss(params, batch, drop if config.dropout_p > 0 else None)
                    scale = 1.0
                    if config.loss_normalization != "tokens":
                        scale = float((batch.tgt_out != model_config.pad).sum())
                        if config.loss_normalization == "sents":
                            scale /= len(batch.src)
                    tape.backward(loss, scale)
                clip_global_norm([p.grad for p in plist], config.max_grad_norm)
            except NumericError as exc:
                raise TrainingFailure(str(exc), epoch, step) from exc
            sgd_step(plist, config.learning_rate)
            total += float(loss.data)
            steps += 1
        acc = val_accuracy(params, epoch)
        accs.append(acc)
        losses.append(total / steps)
        if log is not None:
            log({"epoch": epoch, "train_loss": total / steps, "val_acc": acc})
        selected = plateau_stop(accs)
        if selected is not None:
            params.load(previous)
            return params, TrainReport(epoch, accs, StopReason.PLATEAU, selected, losses)
        previous = params.snapshot()
    return params, TrainReport(config.max_epochs, accs, StopReason.MAX_EPOCHS,
                               config.max_epochs, losses)
