"""Reduced-depth residual encoder with explicit forward and backward passes.

Architecture (fixed topology, sizes from EncoderConfig):

    stem:   3x3 conv -> BN -> ReLU
    stages: residual blocks (3x3 conv BN ReLU 3x3 conv BN + shortcut, ReLU),
            first block of a stage may downsample with stride 2 and a
            projection shortcut (1x1 conv + BN)
    head:   global average pool -> affine to embed_dim -> BN

The default is six blocks over 16/32/64 channels with a 512-d embedding:
one third of the reference 18-layer residual net's depth, adapted to
single-channel square inputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import NumericError
from .ops import (
    bn_backward,
    bn_forward,
    conv2d_backward,
    conv2d_forward,
    global_avg_pool_backward,
    global_avg_pool_forward,
    linear_backward,
    linear_forward,
    relu_backward,
    relu_forward,
)


@dataclass(frozen=True)
class EncoderConfig:
    side: int
    stem_channels: int = 16
    stage_blocks: tuple[int, ...] = (2, 2, 2)
    stage_channels: tuple[int, ...] = (16, 32, 64)
    stage_strides: tuple[int, ...] = (1, 2, 2)
    embed_dim: int = 512
    bn_eps: float = 1e-5
    bn_momentum: float = 0.1
    dtype: str = "float32"

    def __post_init__(self):
        if not (len(self.stage_blocks) == len(self.stage_channels) == len(self.stage_strides)):
            raise ValueError("stage tuples must have equal length")
        if self.side < 1 or self.embed_dim < 1:
            raise ValueError("side and embed_dim must be positive")

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _blocks(config: EncoderConfig):
    """Yield (prefix, in_ch, out_ch, stride, project) over all blocks."""
    in_ch = config.stem_channels
    for s, (n_blocks, out_ch, stride) in enumerate(
        zip(config.stage_blocks, config.stage_channels, config.stage_strides)
    ):
        for b in range(n_blocks):
            blk_stride = stride if b == 0 else 1
            project = blk_stride != 1 or in_ch != out_ch
            yield f"stage{s}.block{b}", in_ch, out_ch, blk_stride, project
            in_ch = out_ch


def parameter_spec(config: EncoderConfig):
    """Ordered (name, shape, init) list; init in {'he', 'zero', 'one'}."""
    spec = [
        ("stem.conv.w", (config.stem_channels, 1, 3, 3), "he"),
        ("stem.conv.b", (config.stem_channels,), "zero"),
        ("stem.bn.g", (config.stem_channels,), "one"),
        ("stem.bn.b", (config.stem_channels,), "zero"),
    ]
    for pfx, in_ch, out_ch, _stride, project in _blocks(config):
        spec += [
            (f"{pfx}.conv1.w", (out_ch, in_ch, 3, 3), "he"),
            (f"{pfx}.conv1.b", (out_ch,), "zero"),
            (f"{pfx}.bn1.g", (out_ch,), "one"),
            (f"{pfx}.bn1.b", (out_ch,), "zero"),
            (f"{pfx}.conv2.w", (out_ch, out_ch, 3, 3), "he"),
            (f"{pfx}.conv2.b", (out_ch,), "zero"),
            (f"{pfx}.bn2.g", (out_ch,), "one"),
            (f"{pfx}.bn2.b", (out_ch,), "zero"),
        ]
        if project:
            spec += [
                (f"{pfx}.proj.w", (out_ch, in_ch, 1, 1), "he"),
                (f"{pfx}.proj.b", (out_ch,), "zero"),
                (f"{pfx}.projbn.g", (out_ch,), "one"),
                (f"{pfx}.projbn.b", (out_ch,), "zero"),
            ]
    final_ch = config.stage_channels[-1]
    spec += [
        ("head.fc.w", (config.embed_dim, final_ch), "he"),
        ("head.fc.b", (config.embed_dim,), "zero"),
        ("head.bn.g", (config.embed_dim,), "one"),
        ("head.bn.b", (config.embed_dim,), "zero"),
    ]
    return spec


def state_spec(config: EncoderConfig):
    """Ordered (name, shape) list of batch-norm running buffers."""
    spec = [("stem.bn.m", (config.stem_channels,)), ("stem.bn.v", (config.stem_channels,))]
    for pfx, _in_ch, out_ch, _stride, project in _blocks(config):
        spec += [(f"{pfx}.bn1.m", (out_ch,)), (f"{pfx}.bn1.v", (out_ch,)),
                 (f"{pfx}.bn2.m", (out_ch,)), (f"{pfx}.bn2.v", (out_ch,))]
        if project:
            spec += [(f"{pfx}.projbn.m", (out_ch,)), (f"{pfx}.projbn.v", (out_ch,))]
    spec += [("head.bn.m", (config.embed_dim,)), ("head.bn.v", (config.embed_dim,))]
    return spec


def init_params(config: EncoderConfig, seed: int):
    """He-uniform conv/affine weights, zero biases, identity batch norms.

    All randomness comes from one seeded generator so checkpoints are
    reproducible from (config, seed).
    """
    rng = np.random.default_rng(np.random.PCG64(seed))
    dtype = np.dtype(config.dtype)
    params: dict[str, np.ndarray] = {}
    for name, shape, kind in parameter_spec(config):
        if kind == "he":
            fan_in = int(np.prod(shape[1:]))
            limit = np.sqrt(6.0 / fan_in)
            params[name] = rng.uniform(-limit, limit, size=shape).astype(dtype)
        elif kind == "one":
            params[name] = np.ones(shape, dtype=dtype)
        else:
            params[name] = np.zeros(shape, dtype=dtype)
    state = {}
    for name, shape in state_spec(config):
        state[name] = (np.ones if name.endswith(".v") else np.zeros)(shape, dtype=dtype)
    return params, state


def _as_nchw(x, config: EncoderConfig) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim == 4 and x.shape[3] == 1:
        x = x[:, :, :, 0]
    if x.ndim != 3 or x.shape[1] != config.side or x.shape[2] != config.side:
        raise NumericError(
            f"batch shape {x.shape} does not match config side {config.side}"
        )
    return np.ascontiguousarray(x[:, None, :, :], dtype=np.dtype(config.dtype))


def encoder_forward(params, state, config: EncoderConfig, batch, train: bool):
    """batch: (B, side, side[, 1]) scaled to [0, 1] -> (embeddings, cache).

    The cache keeps the final convolutional feature maps (for the
    explanation pass) and everything backward needs.
    """
    x = _as_nchw(batch, config)
    bn_args = (config.bn_momentum, config.bn_eps, train)

    def bn(pfx, val):
        return bn_forward(val, params[f"{pfx}.g"], params[f"{pfx}.b"],
                          state[f"{pfx}.m"], state[f"{pfx}.v"], *bn_args)

    y, c_stem = conv2d_forward(x, params["stem.conv.w"], params["stem.conv.b"], 1, 1)
    y, c_stem_bn = bn("stem.bn", y)
    y, m_stem = relu_forward(y)

    block_caches = []
    for pfx, _in_ch, _out_ch, stride, project in _blocks(config):
        y1, c1 = conv2d_forward(y, params[f"{pfx}.conv1.w"], params[f"{pfx}.conv1.b"], stride, 1)
        y1, cb1 = bn(f"{pfx}.bn1", y1)
        y1, m1 = relu_forward(y1)
        y2, c2 = conv2d_forward(y1, params[f"{pfx}.conv2.w"], params[f"{pfx}.conv2.b"], 1, 1)
        y2, cb2 = bn(f"{pfx}.bn2", y2)
        if project:
            sc, cp = conv2d_forward(y, params[f"{pfx}.proj.w"], params[f"{pfx}.proj.b"], stride, 0)
            sc, cpb = bn(f"{pfx}.projbn", sc)
        else:
            sc, cp, cpb = y, None, None
        y, m2 = relu_forward(y2 + sc)
        block_caches.append((pfx, c1, cb1, m1, c2, cb2, cp, cpb, m2, project))

    feature_maps = y  # final convolutional activations, (B, C, h, w)
    pooled, c_gap = global_avg_pool_forward(y)
    emb, c_fc = linear_forward(pooled, params["head.fc.w"], params["head.fc.b"])
    emb, c_hbn = bn("head.bn", emb)

    if not np.isfinite(emb).all():
        raise NumericError("non-finite embeddings out of the encoder forward pass")
    cache = {
        "config": config,
        "train": train,
        "params_token": id(params),
        "stem": (c_stem, c_stem_bn, m_stem),
        "blocks": block_caches,
        "head": (c_gap, c_fc, c_hbn),
        "feature_maps": feature_maps,
        "batch_size": x.shape[0],
    }
    return emb, cache


def encoder_backward(params, cache, d_emb):
    """Exact reverse-mode pass.

    Returns (grads, d_input, d_feature_maps); d_feature_maps is the
    gradient at the final convolutional activations, which is what the
    class-activation explanation consumes.
    """
    if cache.get("params_token") != id(params):
        raise NumericError("backward called with a cache from different parameters")
    if d_emb.shape[0] != cache["batch_size"]:
        raise NumericError("upstream gradient batch size does not match the cache")
    grads = {name: None for name in params}

    def put(name, val):
        grads[name] = val if grads[name] is None else grads[name] + val

    c_gap, c_fc, c_hbn = cache["head"]
    d, dg, db = bn_backward(d_emb, c_hbn)
    put("head.bn.g", dg)
    put("head.bn.b", db)
    d, dw, db = linear_backward(d, c_fc)
    put("head.fc.w", dw)
    put("head.fc.b", db)
    d = global_avg_pool_backward(d, c_gap)
    d_feature_maps = d

    for pfx, c1, cb1, m1, c2, cb2, cp, cpb, m2, project in reversed(cache["blocks"]):
        d = relu_backward(d, m2)
        if project:
            ds, dg, db = bn_backward(d, cpb)
            put(f"{pfx}.projbn.g", dg)
            put(f"{pfx}.projbn.b", db)
            ds, dw, db = conv2d_backward(ds, cp)
            put(f"{pfx}.proj.w", dw)
            put(f"{pfx}.proj.b", db)
        else:
            ds = d
        dmain, dg, db = bn_backward(d, cb2)
        put(f"{pfx}.bn2.g", dg)
        put(f"{pfx}.bn2.b", db)
        dmain, dw, db = conv2d_backward(dmain, c2)
        put(f"{pfx}.conv2.w", dw)
        put(f"{pfx}.conv2.b", db)
        dmain = relu_backward(dmain, m1)
        dmain, dg, db = bn_backward(dmain, cb1)
        put(f"{pfx}.bn1.g", dg)
        put(f"{pfx}.bn1.b", db)
        dmain, dw, db = conv2d_backward(dmain, c1)
        put(f"{pfx}.conv1.w", dw)
        put(f"{pfx}.conv1.b", db)
        d = dmain + ds

    c_stem, c_stem_bn, m_stem = cache["stem"]
    d = relu_backward(d, m_stem)
    d, dg, db = bn_backward(d, c_stem_bn)
    put("stem.bn.g", dg)
    put("stem.bn.b", db)
    d, dw, db = conv2d_backward(d, c_stem)
    put("stem.conv.w", dw)
    put("stem.conv.b", db)

    for name, g in grads.items():
        if g is None:
            grads[name] = np.zeros_like(params[name])
    return grads, d, d_feature_maps


def normalize_embeddings(emb: np.ndarray) -> np.ndarray:
    """Unit euclidean norm per row; all-zero rows are left as zeros."""
    norms = np.sqrt((emb * emb).sum(axis=1, keepdims=True))
    return np.divide(emb, norms, out=np.zeros_like(emb), where=norms != 0.0)
