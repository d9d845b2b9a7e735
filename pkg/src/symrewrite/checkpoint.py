"""Checkpoint files.

Layout::

    ckpt v1
    config <canonical JSON>
    param <name> <d0>x<d1>... <nbytes>
    <nbytes of little-endian float64>
    ...
    sha256 <hex digest of every preceding byte>

A config with ``"kind": "oracle"`` carries no parameters and stands for the
replay decoder used to sanity-check the evaluation path.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ParseError
from .model import ModelConfig, ModelParams

MAGIC = b"ckpt v1\n"


def dumps(config: dict, arrays: dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, b"config " + json.dumps(config, sort_keys=True).encode() + b"\n"]
    for name, arr in arrays.items():
        payload = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        shape = "x".join(str(d) for d in arr.shape) or "scalar"
        parts.append(f"param {name} {shape} {len(payload)}\n".encode())
        parts.append(payload + b"\n")
    body = b"".join(parts)
    return body + b"sha256 " + hashlib.sha256(body).hexdigest().encode() + b"\n"


def loads(blob: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    if not blob.startswith(MAGIC):
        raise ParseError("not a v1 checkpoint", 1)
    cut = blob.rfind(b"sha256 ")
    if cut < 0 or not blob.endswith(b"\n"):
        raise ParseError("missing integrity footer")
    digest = blob[cut + 7:-1].decode("ascii", "replace")
    if hashlib.sha256(blob[:cut]).hexdigest() != digest:
        raise ParseError("checkpoint content hash mismatch")
    pos = len(MAGIC)
    line_no = 2

    def next_line() -> str:
        nonlocal pos, line_no
        end = blob.index(b"\n", pos)
        text = blob[pos:end].decode("ascii")
        pos = end + 1
        line_no += 1
        return text

    head = next_line()
    if not head.startswith("config "):
        raise ParseError("expected config line", 2)
    config = json.loads(head[7:])
    arrays: dict[str, np.ndarray] = {}
    while pos < cut:
        fields = next_line().split(" ")
        if len(fields) != 4 or fields[0] != "param":
            raise ParseError("expected a param header", line_no - 1)
        _, name, shape_s, nbytes_s = fields
        shape = () if shape_s == "scalar" else tuple(int(d) for d in shape_s.split("x"))
        nbytes = int(nbytes_s)
        if nbytes != 8 * int(np.prod(shape, dtype=np.int64)):
            raise ParseError(f"payload size of {name} does not match its shape", line_no - 1)
        arrays[name] = np.frombuffer(blob[pos:pos + nbytes], dtype="<f8").reshape(shape).copy()
        pos += nbytes + 1
        line_no += 1
    return config, arrays


def save(path: str | Path, params: ModelParams, meta: dict | None = None) -> None:
    config = {"kind": "model", "model": params.config.to_dict(), **(meta or {})}
    Path(path).write_bytes(dumps(config, params.snapshot()))


def save_oracle(path: str | Path, grammar_fingerprint: str, seed: int = 0) -> None:
    config = {"kind": "oracle", "grammar": grammar_fingerprint, "seed": seed}
    Path(path).write_bytes(dumps(config, {}))


def load(path: str | Path) -> tuple[dict, ModelParams | None]:
    """Returns ``(config, params)``; params is None for an oracle checkpoint."""
    config, arrays = loads(Path(path).read_bytes())
    if config.get("kind") == "oracle":
        return config, None
    return config, ModelParams(ModelConfig(**config["model"]), arrays)
