"""Residual convolutional encoder with explicit numpy forward/backward."""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .encoder import (
    EncoderConfig,
    encoder_backward,
    encoder_forward,
    init_params,
    normalize_embeddings,
    parameter_spec,
    state_spec,
)

__all__ = [
    "Checkpoint",
    "EncoderConfig",
    "encoder_backward",
    "encoder_forward",
    "init_params",
    "load_checkpoint",
    "normalize_embeddings",
    "parameter_spec",
    "save_checkpoint",
    "state_spec",
]
