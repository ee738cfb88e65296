"""Binary checkpoint archive.

Layout::

    jhgrf-ckpt v1
    config <ModelConfig as one JSON line>
    param <name> <dim,dim,...>
    <row-major little-endian float64 bytes>
    ...
    end
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from ..errors import CheckpointFormatError, CheckpointMismatch, ConfigError
from ..models.config import ModelConfig

log = logging.getLogger("hf.train")

MAGIC = b"jhgrf-ckpt v1"
_DTYPE = np.dtype("<f8")


def save_checkpoint(path, config: ModelConfig, state: dict) -> Path:
    """Write ``state`` (name → array, in insertion order) with its model config."""
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(MAGIC + b"\n")
        fh.write(b"config " + json.dumps(config.to_dict(), sort_keys=True).encode("utf-8") + b"\n")
        for name, values in state.items():
            arr = np.asarray(values, dtype=np.float64)
            dims = ",".join(str(s) for s in arr.shape)
            fh.write(f"param {name} {dims}\n".encode("utf-8"))
            fh.write(np.ascontiguousarray(arr, dtype=_DTYPE).tobytes(order="C"))
        fh.write(b"end\n")
    log.info("Saved checkpoint %s (%d tensors)", path, len(state))
    return path


def _line(fh, path) -> str:
    raw = fh.readline()
    if not raw.endswith(b"\n"):
        raise CheckpointFormatError(f"{path}: truncated checkpoint")
    return raw[:-1].decode("utf-8")


def load_checkpoint(path, expected: ModelConfig | None = None) -> tuple[ModelConfig, dict]:
    """Read a checkpoint; with ``expected`` the architecture fields must match."""
    path = Path(path)
    if not path.is_file():
        raise CheckpointFormatError(f"checkpoint not found: {path}")
    state = {}
    with path.open("rb") as fh:
        if fh.readline().rstrip(b"\n") != MAGIC:
            raise CheckpointFormatError(f"{path}: not a checkpoint (bad header)")
        head = _line(fh, path)
        if not head.startswith("config "):
            raise CheckpointFormatError(f"{path}: missing config line")
        try:
            config = ModelConfig.from_dict(json.loads(head[len("config "):]))
        except (ValueError, TypeError, ConfigError) as exc:
            raise CheckpointFormatError(f"{path}: unreadable config ({exc})") from exc

        while True:
            line = _line(fh, path)
            if line == "end":
                break
            parts = line.split(" ")
            if len(parts) != 3 or parts[0] != "param":
                raise CheckpointFormatError(f"{path}: malformed parameter line {line!r}")
            _, name, dims = parts
            shape = tuple(int(s) for s in dims.split(",")) if dims else ()
            count = int(np.prod(shape)) if shape else 1
            blob = fh.read(count * _DTYPE.itemsize)
            if len(blob) != count * _DTYPE.itemsize:
                raise CheckpointFormatError(f"{path}: truncated data for {name}")
            state[name] = np.frombuffer(blob, dtype=_DTYPE).astype(np.float64).reshape(shape)

    if expected is not None:
        check_compatible(config, expected)
    return config, state


def check_compatible(saved: ModelConfig, expected: ModelConfig) -> None:
    a, b = saved.architecture(), expected.architecture()
    diff = [f"{k}: checkpoint={a[k]} config={b[k]}" for k in a if a[k] != b[k]]
    if diff:
        raise CheckpointMismatch("checkpoint does not match the model config (" + "; ".join(diff) + ")")
