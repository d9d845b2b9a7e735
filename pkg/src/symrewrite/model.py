"""Single-layer LSTM encoder-decoder with bilinear attention.

Vocabularies are model-local. Source ids are the grammar's input symbols
``0..|X|-1`` followed by a PAD id. Target ids are grammar output tokens
shifted down by ``|X|``, followed by PAD, BOS and EOS.

Shapes: B batch, S source length, T target steps, H hidden size.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError, InvalidTokenError
from .grammar import Grammar
from .rng import Stream
from .tensor import (
    Parameter, Tensor, add_bias, batch_matvec, concat, cross_entropy, dropout,
    dropout_scale, embedding, lstm_cell, matmul, reshape, slice_last, softmax, stack,
    take_rows, tanh, weighted_sum,
)

TARGET_SPECIALS = ("PAD", "BOS", "EOS")


@dataclass(frozen=True)
class ModelConfig:
    input_vocab: int
    output_vocab: int
    embed_dim: int = 32
    hidden_dim: int = 32
    dropout_p: float = 0.1
    max_decode_len: int = 47

    def __post_init__(self):
        if self.input_vocab < 2 or self.output_vocab < 4:
            raise ConfigurationError("vocabularies must hold at least one token plus specials")
        if self.embed_dim < 1 or self.hidden_dim < 1:
            raise ConfigurationError("embed_dim and hidden_dim must be positive")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigurationError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.max_decode_len < 1:
            raise ConfigurationError("max_decode_len must be >= 1")

    @classmethod
    def for_grammar(cls, g: Grammar, **overrides) -> "ModelConfig":
        return cls(input_vocab=g.num_inputs + 1,
                   output_vocab=g.num_outputs + len(TARGET_SPECIALS), **overrides)

    @property
    def src_pad(self) -> int:
        return self.input_vocab - 1

    @property
    def pad(self) -> int:
        return self.output_vocab - 3

    @property
    def bos(self) -> int:
        return self.output_vocab - 2

    @property
    def eos(self) -> int:
        return self.output_vocab - 1

    def to_dict(self) -> dict:
        return asdict(self)


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    E, H = cfg.embed_dim, cfg.hidden_dim
    return {
        "src_embed": (cfg.input_vocab, E),
        "tgt_embed": (cfg.output_vocab, E),
        "enc_w_ih": (4 * H, E),
        "enc_w_hh": (4 * H, H),
        "enc_b": (4 * H,),
        "dec_w_ih": (4 * H, E),
        "dec_w_hh": (4 * H, H),
        "dec_b": (4 * H,),
        "attn_w": (H, H),
        "comb_w": (H, 2 * H),
        "comb_b": (H,),
        "out_w": (cfg.output_vocab, H),
        "out_b": (cfg.output_vocab,),
    }


class ModelParams:
    """All trainable weights, in a fixed canonical order."""

    def __init__(self, config: ModelConfig, arrays: dict[str, np.ndarray]):
        shapes = param_shapes(config)
        if set(arrays) != set(shapes):
            raise ConfigurationError(
                f"parameter names {sorted(arrays)} do not match {sorted(shapes)}")
        self.config = config
        self._params: dict[str, Parameter] = {}
        for name, shape in shapes.items():
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.shape != shape:
                raise ConfigurationError(f"{name}: shape {arr.shape}, expected {shape}")
            self._params[name] = Parameter(arr, name)

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._params.values())

    def zero_grad(self) -> None:
        for p in self:
            p.zero_grad()

    def snapshot(self) -> dict[str, np.ndarray]:
        return {p.name: p.data.copy() for p in self}

    def load(self, arrays: dict[str, np.ndarray]) -> None:
        for p in self:
            p.data[...] = arrays[p.name]

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, self.snapshot())


def init_params(cfg: ModelConfig, rng: Stream, init_range: float = 0.1) -> ModelParams:
    """Every entry i.i.d. uniform on ``[-init_range, init_range]``."""
    return ModelParams(cfg, {name: rng.uniform(-init_range, init_range, shape)
                             for name, shape in param_shapes(cfg).items()})


# batching --------------------------------------------------------------------

class Batch(NamedTuple):
    src: np.ndarray       # (B, S) source ids, PAD-filled
    src_mask: np.ndarray  # (B, S) True on real tokens
    tgt_in: np.ndarray    # (B, T) BOS + gold
    tgt_out: np.ndarray   # (B, T) gold + EOS, PAD-filled


def pad_sources(cfg: ModelConfig, sources: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    if not sources or min(len(s) for s in sources) == 0:
        raise ConfigurationError("every source sequence must be non-empty")
    S = max(len(s) for s in sources)
    src = np.full((len(sources), S), cfg.src_pad, dtype=np.int64)
    mask = np.zeros((len(sources), S), dtype=bool)
    for b, s in enumerate(sources):
        src[b, :len(s)] = s
        mask[b, :len(s)] = True
    if src.min() < 0 or (src[mask] >= cfg.src_pad).any():
        raise InvalidTokenError("source id outside the input vocabulary")
    return src, mask


def make_batch(cfg: ModelConfig, pairs: Sequence[tuple[Sequence[int], Sequence[int]]]) -> Batch:
    """Pads (source, target) pairs given in model ids."""
    src, src_mask = pad_sources(cfg, [s for s, _ in pairs])
    T = max(len(t) for _, t in pairs) + 1
    tgt_in = np.full((len(pairs), T), cfg.pad, dtype=np.int64)
    tgt_out = np.full((len(pairs), T), cfg.pad, dtype=np.int64)
    for b, (_, t) in enumerate(pairs):
        if len(t) and (min(t) < 0 or max(t) >= cfg.pad):
            raise InvalidTokenError("target id outside the output vocabulary")
        tgt_in[b, 0] = cfg.bos
        tgt_in[b, 1:len(t) + 1] = t
        tgt_out[b, :len(t)] = t
        tgt_out[b, len(t)] = cfg.eos
    return Batch(src, src_mask, tgt_in, tgt_out)


# network ---------------------------------------------------------------------

class Encoded(NamedTuple):
    states: Tensor      # (B, S, H) hidden state per source position
    final: Tensor       # (B, 2H) packed [h | c] after each row's last real token
    mask: np.ndarray    # (B, S)


def encode_batch(params: ModelParams, src: np.ndarray, src_mask: np.ndarray,
                 scales: np.ndarray | None = None) -> Encoded:
    """Encoder over a padded batch; ``scales`` (S, B, E) are dropout multipliers."""
    cfg = params.config
    H = cfg.hidden_dim
    B, S = src.shape
    if S == 0:
        raise ConfigurationError("cannot encode an empty source")
    p = params
    state = Tensor(np.zeros((B, 2 * H)))
    hs = []
    for t in range(S):
        col = src_mask[:, t]
        x = embedding(p["src_embed"], src[:, t])
        if scales is not None:
            x = dropout(x, cfg.dropout_p, None, scales[t])
        state = lstm_cell(x, state, p["enc_w_ih"], p["enc_w_hh"], p["enc_b"],
                          mask=None if col.all() else col)
        hs.append(slice_last(state, 0, H))
    return Encoded(stack(hs, axis=1), state, src_mask)


def encode(params: ModelParams, tokens: Sequence[int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Encode one source sequence (model ids, eval mode).

    Returns ``(states, h, c)`` with ``states`` of shape (n, H).
    """
    src, mask = pad_sources(params.config, [tokens])
    enc = encode_batch(params, src, mask)
    H = params.config.hidden_dim
    return enc.states.data[0], enc.final.data[0, :H], enc.final.data[0, H:]


def attend(params: ModelParams, h: Tensor, states: Tensor,
           mask: np.ndarray | None = None) -> tuple[Tensor, Tensor]:
    """Bilinear attention: ``score_s = h^T W_a h_s``, softmax over positions.

    Returns ``(context, weights)`` of shapes (B, H) and (B, S).
    """
    if states.shape[1] == 0:
        raise ConfigurationError("attention over an empty source")
    query = matmul(h, params["attn_w"])
    weights = softmax(batch_matvec(states, query), mask)
    return weighted_sum(weights, states), weights


def _decoder_cell(params: ModelParams, prev: np.ndarray, state: Tensor, enc: Encoded,
                  in_scale: np.ndarray | None = None, out_scale: np.ndarray | None = None,
                  ) -> tuple[Tensor, Tensor, Tensor]:
    cfg, p = params.config, params
    x = embedding(p["tgt_embed"], prev)
    if in_scale is not None:
        x = dropout(x, cfg.dropout_p, None, in_scale)
    state = lstm_cell(x, state, p["dec_w_ih"], p["dec_w_hh"], p["dec_b"])
    h = slice_last(state, 0, cfg.hidden_dim)
    context, weights = attend(params, h, enc.states, enc.mask)
    attentional = tanh(add_bias(matmul(concat([context, h]), p["comb_w"], transpose_b=True),
                                p["comb_b"]))
    if out_scale is not None:
        attentional = dropout(attentional, cfg.dropout_p, None, out_scale)
    return attentional, state, weights


def _project(params: ModelParams, attentional: Tensor) -> Tensor:
    return add_bias(matmul(attentional, params["out_w"], transpose_b=True), params["out_b"])


def decode_step(params: ModelParams, prev: np.ndarray, state: Tensor, enc: Encoded,
                drop: Stream | None = None) -> tuple[Tensor, Tensor]:
    """One decoder step. Returns ``(logits, new_state)``."""
    cfg = params.config
    prev = np.asarray(prev, dtype=np.int64)
    if prev.min() < 0 or prev.max() >= cfg.output_vocab:
        raise InvalidTokenError("previous token outside the output vocabulary")
    in_scale = out_scale = None
    if drop is not None and cfg.dropout_p > 0:
        in_scale = dropout_scale(cfg.dropout_p, (len(prev), cfg.embed_dim), drop)
        out_scale = dropout_scale(cfg.dropout_p, (len(prev), cfg.hidden_dim), drop)
    attentional, state, _ = _decoder_cell(params, prev, state, enc, in_scale, out_scale)
    return _project(params, attentional), state


def forward_loss(params: ModelParams, batch: Batch, drop: Stream | None = None) -> Tensor:
    """Teacher-forced mean cross-entropy over non-PAD target positions.

    Dropout is active iff ``drop`` is given; its multipliers for the whole
    batch are drawn up front (encoder inputs, decoder inputs, attentional
    vectors, in that order).
    """
    cfg = params.config
    B, S = batch.src.shape
    T = batch.tgt_in.shape[1]
    enc_s = dec_s = att_s = None
    if drop is not None and cfg.dropout_p > 0:
        enc_s = dropout_scale(cfg.dropout_p, (S, B, cfg.embed_dim), drop)
        dec_s = dropout_scale(cfg.dropout_p, (T, B, cfg.embed_dim), drop)
        att_s = dropout_scale(cfg.dropout_p, (T, B, cfg.hidden_dim), drop)
    enc = encode_batch(params, batch.src, batch.src_mask, enc_s)
    state = enc.final
    outs = []
    for t in range(T):
        attentional, state, _ = _decoder_cell(
            params, batch.tgt_in[:, t], state, enc,
            None if dec_s is None else dec_s[t], None if att_s is None else att_s[t])
        outs.append(attentional)
    flat = reshape(stack(outs, axis=1), (B * T, cfg.hidden_dim))
    targets = batch.tgt_out.reshape(-1)
    rows = np.nonzero(targets != cfg.pad)[0]
    logits = _project(params, take_rows(flat, rows))
    return cross_entropy(logits, targets[rows], ignore=cfg.pad)


def greedy_decode_batch(params: ModelParams, sources: Sequence[Sequence[int]]) -> list[list[int]]:
    """Greedy decoding of several sources at once (model ids, eval mode).

    Argmax ties go to the lowest id; PAD and BOS are never emitted.
    """
    cfg = params.config
    src, mask = pad_sources(cfg, sources)
    enc = encode_batch(params, src, mask)
    B = src.shape[0]
    state = enc.final
    prev = np.full(B, cfg.bos, dtype=np.int64)
    outputs: list[list[int]] = [[] for _ in range(B)]
    live = np.ones(B, dtype=bool)
    out_w, out_b = params["out_w"].data, params["out_b"].data
    for _ in range(cfg.max_decode_len):
        attentional, state, _ = _decoder_cell(params, prev, state, enc)
        logits = attentional.data @ out_w.T + out_b
        logits[:, cfg.pad] = -np.inf
        logits[:, cfg.bos] = -np.inf
        tok = logits.argmax(axis=1)
        for b in np.nonzero(live)[0]:
            if tok[b] == cfg.eos:
                live[b] = False
            else:
                outputs[b].append(int(tok[b]))
        if not live.any():
            break
        prev = tok
    return outputs


def greedy_decode(params: ModelParams, tokens: Sequence[int]) -> list[int]:
    return greedy_decode_batch(params, [tokens])[0]


# grammar <-> model ids -----------------------------------------------------------

class Codec:
    """Converts between grammar token ids and model ids."""

    def __init__(self, g: Grammar, cfg: ModelConfig):
        if cfg.input_vocab != g.num_inputs + 1 or cfg.output_vocab != g.num_outputs + 3:
            raise ConfigurationError("model vocabulary does not fit the grammar")
        self.offset = g.num_inputs

    def target(self, tokens: Sequence[int]) -> list[int]:
        return [t - self.offset for t in tokens]

    def output(self, ids: Sequence[int]) -> list[int]:
        return [i + self.offset for i in ids]

    def pairs(self, samples) -> list[tuple[Sequence[int], list[int]]]:
        return [(s.input, self.target(s.output)) for s in samples]


class ModelDecoder:
    """Maps grammar inputs to grammar outputs with greedy decoding."""

    def __init__(self, params: ModelParams, g: Grammar, chunk: int = 500):
        self.params = params
        self.codec = Codec(g, params.config)
        self.chunk = chunk

    def __call__(self, inputs: Sequence[int]) -> list[int]:
        return self.decode_many([inputs])[0]

    def decode_many(self, inputs: Sequence[Sequence[int]]) -> list[list[int]]:
        out = []
        for i in range(0, len(inputs), self.chunk):
            for ids in greedy_decode_batch(self.params, inputs[i:i + self.chunk]):
                out.append(self.codec.output(ids))
        return out
