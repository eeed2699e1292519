"""Self-describing, checksummed checkpoint container (JSON + base64 tensors)."""

from __future__ import annotations

import base64
import hashlib
import json
from pathlib import Path

import numpy as np

from ..errors import CheckpointError, FingerprintMismatchError
from .model import ConditionedNet, NetConfig, TimeNormalizer, Vocabulary, iter_params

FORMAT_VERSION = 1


def _encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode()}


def _decode_array(d: dict) -> np.ndarray:
    return np.frombuffer(base64.b64decode(d["data"]), dtype=np.float64).reshape(
        d["shape"]).copy()


def save_checkpoint(net: ConditionedNet, path: str | Path) -> None:
    tensors = {name: _encode_array(arr) for name, arr in iter_params(net.params)}
    payload = {
        "version": FORMAT_VERSION,
        "config": net.config.to_json(),
        "vocabulary": net.vocabulary.to_json(),
        "m": net.m,
        "universe_fingerprint": net.universe_fingerprint,
        "exec_normalizer": net.exec_normalizer.to_json(),
        "remaining_normalizer": net.remaining_normalizer.to_json(),
        "seed": net.seed,
        "params": tensors,
    }
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    checksum = hashlib.sha256(body.encode()).hexdigest()
    with open(path, "w") as fh:
        json.dump({"checksum": checksum, "payload": payload}, fh,
                  sort_keys=True, separators=(",", ":"))


def load_checkpoint(path: str | Path,
                    expected_universe_fingerprint: str | None = None) -> ConditionedNet:
    try:
        with open(path) as fh:
            container = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable checkpoint: {exc}") from exc
    if set(container) != {"checksum", "payload"}:
        raise CheckpointError(f"{path}: not a checkpoint container")
    payload = container["payload"]
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    if hashlib.sha256(body.encode()).hexdigest() != container["checksum"]:
        raise CheckpointError(f"{path}: checksum mismatch (corrupted file)")
    if payload.get("version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {payload.get('version')}"
        )
    if (expected_universe_fingerprint is not None
            and payload["universe_fingerprint"] != expected_universe_fingerprint):
        raise FingerprintMismatchError(
            f"checkpoint universe {payload['universe_fingerprint']} does not match "
            f"requested universe {expected_universe_fingerprint}"
        )
    config = NetConfig.from_json(payload["config"])
    vocab = Vocabulary.from_json(payload["vocabulary"])
    net = ConditionedNet(
        config, vocab, payload["m"], payload["universe_fingerprint"],
        TimeNormalizer.from_json(payload["exec_normalizer"]),
        TimeNormalizer.from_json(payload["remaining_normalizer"]),
        seed=payload["seed"],
    )
    for name, arr in iter_params(net.params):
        stored = _decode_array(payload["params"][name])
        if stored.shape != arr.shape:
            raise CheckpointError(f"{path}: tensor {name} has shape {stored.shape}, "
                                  f"expected {arr.shape}")
        arr[...] = stored
    return net
