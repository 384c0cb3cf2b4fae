"""Parameter checkpoints: one JSON header line describing the shapes followed
by the flat little-endian float64 array. Loss traces as ``epoch,loss`` CSV."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import ModelConfig, ModelParameters, param_count

CHECKPOINT_FORMAT = "fedfleet-params"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Raised for unreadable or mismatched checkpoint files."""


def save_params(params: ModelParameters, path) -> None:
    config = params.config
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "window": config.window,
        "input_dim": config.input_dim,
        "hidden": list(config.hidden),
        "dropout_rate": config.dropout_rate,
        "seed": config.seed,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(params.flat.astype("<f8").tobytes())


def load_params(path) -> ModelParameters:
    path = Path(path)
    with open(path, "rb") as fh:
        line = fh.readline()
        blob = fh.read()
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise CheckpointError(f"{path}: unreadable checkpoint header") from None
    if not isinstance(header, dict) or header.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {header.get('version')}")
    config = ModelConfig(
        window=header["window"],
        input_dim=header["input_dim"],
        hidden=tuple(header["hidden"]),
        dropout_rate=header["dropout_rate"],
        seed=header["seed"],
    )
    flat = np.frombuffer(blob, dtype="<f8").astype(np.float64)
    if flat.size != param_count(config):
        raise CheckpointError(
            f"{path}: payload holds {flat.size} values, expected {param_count(config)}"
        )
    return ModelParameters(config, flat)


def write_loss_trace(losses, path) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for epoch, loss in enumerate(losses, start=1):
            fh.write(f"{epoch},{float(loss)!r}\n")


def read_loss_trace(path) -> list[float]:
    out = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "epoch,loss":
            raise CheckpointError(f"{path}: expected 'epoch,loss' header")
        for line in fh:
            _, loss = line.rstrip("\n").split(",")
            out.append(float(loss))
    return out
