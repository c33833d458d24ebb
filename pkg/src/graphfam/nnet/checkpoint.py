"""Versioned binary checkpoints for the encoder and classifier head."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace

import numpy as np

from ..errors import HashMismatchError, InputFormatError
from .encoder import EncoderConfig, parameter_spec, state_spec

_MAGIC = b"GFCK"
_VERSION = 1


@dataclass
class Checkpoint:
    """Encoder parameters (+ optional linear classifier head).

    ``labels`` is empty for encoder-only checkpoints; classifier
    checkpoints carry the family list whose order fixes score indices.
    """

    config: EncoderConfig
    params: dict[str, np.ndarray]
    state: dict[str, np.ndarray]
    registry_hash: str
    seed: int
    labels: tuple[str, ...] = ()
    head_w: np.ndarray | None = None
    head_b: np.ndarray | None = None

    def __post_init__(self):
        expected = {name: shape for name, shape, _ in parameter_spec(self.config)}
        got = {name: arr.shape for name, arr in self.params.items()}
        if {k: tuple(v) for k, v in got.items()} != expected:
            raise InputFormatError("checkpoint parameters do not match its config")
        if self.head_w is not None:
            if not self.labels:
                raise InputFormatError("classifier checkpoints need a label list")
            if self.head_w.shape != (len(self.labels), self.config.embed_dim):
                raise InputFormatError("classifier head shape does not match labels")

    @property
    def has_head(self) -> bool:
        return self.head_w is not None

    def with_head(self, labels, head_w, head_b) -> "Checkpoint":
        return replace(self, labels=tuple(labels), head_w=head_w, head_b=head_b)

    def clone_arrays(self) -> "Checkpoint":
        return replace(
            self,
            params={k: v.copy() for k, v in self.params.items()},
            state={k: v.copy() for k, v in self.state.items()},
            head_w=None if self.head_w is None else self.head_w.copy(),
            head_b=None if self.head_b is None else self.head_b.copy(),
        )


def save_checkpoint(ck: Checkpoint, path) -> None:
    arrays: list[tuple[str, np.ndarray]] = []
    arrays += [(f"p:{name}" , ck.params[name]) for name, _, _ in parameter_spec(ck.config)]
    arrays += [(f"s:{name}", ck.state[name]) for name, _ in state_spec(ck.config)]
    if ck.head_w is not None:
        arrays += [("h:w", ck.head_w), ("h:b", ck.head_b)]
    header = {
        "config": {
            "side": ck.config.side,
            "stem_channels": ck.config.stem_channels,
            "stage_blocks": list(ck.config.stage_blocks),
            "stage_channels": list(ck.config.stage_channels),
            "stage_strides": list(ck.config.stage_strides),
            "embed_dim": ck.config.embed_dim,
            "bn_eps": ck.config.bn_eps,
            "bn_momentum": ck.config.bn_momentum,
            "dtype": ck.config.dtype,
        },
        "config_digest": ck.config.digest(),
        "registry_hash": ck.registry_hash,
        "labels": list(ck.labels),
        "seed": ck.seed,
        "arrays": [
            {"name": name, "shape": list(arr.shape), "dtype": str(arr.dtype)}
            for name, arr in arrays
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<BxxxI", _VERSION, len(blob)) + blob)
        for _name, arr in arrays:
            fh.write(np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<")).tobytes())


def load_checkpoint(path, registry=None) -> Checkpoint:
    """Load and validate; rejects version or registry-hash mismatches."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != _MAGIC:
        raise InputFormatError(f"{path}: not a checkpoint file")
    version, header_len = struct.unpack_from("<BxxxI", blob, 4)
    if version != _VERSION:
        raise InputFormatError(f"{path}: unsupported checkpoint version {version}")
    try:
        header = json.loads(blob[12:12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputFormatError(f"{path}: corrupt checkpoint header: {exc}") from exc
    cfg_raw = header["config"]
    config = EncoderConfig(
        side=cfg_raw["side"],
        stem_channels=cfg_raw["stem_channels"],
        stage_blocks=tuple(cfg_raw["stage_blocks"]),
        stage_channels=tuple(cfg_raw["stage_channels"]),
        stage_strides=tuple(cfg_raw["stage_strides"]),
        embed_dim=cfg_raw["embed_dim"],
        bn_eps=cfg_raw["bn_eps"],
        bn_momentum=cfg_raw["bn_momentum"],
        dtype=cfg_raw["dtype"],
    )
    if config.digest() != header["config_digest"]:
        raise InputFormatError(f"{path}: config digest mismatch")
    if registry is not None and registry.content_hash != header["registry_hash"]:
        raise HashMismatchError(
            f"{path}: checkpoint was trained against a different registry"
        )
    offset = 12 + header_len
    loaded: dict[str, np.ndarray] = {}
    for meta in header["arrays"]:
        dtype = np.dtype(meta["dtype"])
        count = int(np.prod(meta["shape"])) if meta["shape"] else 1
        nbytes = count * dtype.itemsize
        if offset + nbytes > len(blob):
            raise InputFormatError(f"{path}: truncated checkpoint payload")
        arr = np.frombuffer(blob[offset:offset + nbytes], dtype=dtype.newbyteorder("<"))
        loaded[meta["name"]] = arr.astype(dtype).reshape(meta["shape"]).copy()
        offset += nbytes
    if offset != len(blob):
        raise InputFormatError(f"{path}: trailing bytes in checkpoint")
    params = {k[2:]: v for k, v in loaded.items() if k.startswith("p:")}
    state = {k[2:]: v for k, v in loaded.items() if k.startswith("s:")}
    return Checkpoint(
        config=config,
        params=params,
        state=state,
        registry_hash=header["registry_hash"],
        seed=header["seed"],
        labels=tuple(header["labels"]),
        head_w=loaded.get("h:w"),
        head_b=loaded.get("h:b"),
    )
