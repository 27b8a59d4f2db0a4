"""Infilling duration predictor: regress masked log durations from text
and the unmasked (context) durations.

Characters and their durations are embedded, concatenated feature-wise,
projected down, run through a small convolution stack for local patterns,
then a transformer shaped like the audio model, and a scalar head per
character. Masked characters carry duration id 0.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .autodiff import ModelParams, Tensor, concat, embedding, gelu
from .errors import NumericError
from .layers import (
    block,
    conv1d,
    init_block,
    init_conv1d,
    init_linear,
    init_rmsnorm,
    linear,
    rmsnorm,
    rotary_tables,
)

__all__ = [
    "DurInfillConfig",
    "init_infill_params",
    "build_duration_inputs",
    "predict_log_durations_infill",
    "masked_log_mse",
]

MASKED_DURATION_ID = 0


@dataclass
class DurInfillConfig:
    layers: int = 2
    heads: int = 4
    model_dim: int = 32
    ffn_dim: int = 64
    conv_layers: int = 2
    conv_kernel: int = 3
    vocab: int = 8
    char_emb_dim: int = 16
    dur_emb_dim: int = 16
    max_duration: int = 64
    use_skips: bool = True

    def __post_init__(self):
        if self.model_dim % self.heads != 0:
            raise ValueError("model_dim must be divisible by heads")
        if self.use_skips and self.layers % 2 != 0:
            raise ValueError("U-Net skip pairing needs an even layer count")

    @classmethod
    def full_scale(cls, vocab: int = 64) -> "DurInfillConfig":
        return cls(layers=12, heads=16, model_dim=512, ffn_dim=512, vocab=vocab,
                   char_emb_dim=64, dur_emb_dim=64)

    def to_dict(self) -> dict:
        return asdict(self)


def init_infill_params(cfg: DurInfillConfig, seed: int) -> ModelParams:
    params = ModelParams(seed)
    params.normal("char_emb", (cfg.vocab, cfg.char_emb_dim), 1.0 / np.sqrt(cfg.char_emb_dim))
    params.normal("dur_emb", (cfg.max_duration + 1, cfg.dur_emb_dim),
                  1.0 / np.sqrt(cfg.dur_emb_dim))
    init_linear(params, "in_proj", cfg.char_emb_dim + cfg.dur_emb_dim, cfg.model_dim)
    for i in range(cfg.conv_layers):
        init_conv1d(params, f"conv.{i}", cfg.conv_kernel, cfg.model_dim, cfg.model_dim)
    half = cfg.layers // 2
    for i in range(cfg.layers):
        if cfg.use_skips and i >= half:
            init_linear(params, f"skip.{i}", 2 * cfg.model_dim, cfg.model_dim)
        init_block(params, f"layer.{i}", cfg.model_dim, cfg.ffn_dim)
    init_rmsnorm(params, "final_norm", cfg.model_dim)
    init_linear(params, "head", cfg.model_dim, 1)
    return params


def duration_ids(durations, char_mask, max_duration: int) -> np.ndarray:
    """Duration embedding ids: 0 for masked characters, clamped value otherwise."""
    durations = np.asarray(durations, dtype=np.int64)
    char_mask = np.asarray(char_mask, dtype=bool)
    ids = np.clip(durations, 1, max_duration)
    ids[char_mask] = MASKED_DURATION_ID
    return ids


def build_duration_inputs(y, durations, char_mask, params: ModelParams,
                          cfg: DurInfillConfig) -> Tensor:
    """Concatenate per-character embeddings of the char and its context duration."""
    y = np.asarray(y, dtype=np.int64)
    durations = np.asarray(durations, dtype=np.int64)
    char_mask = np.asarray(char_mask, dtype=bool)
    if not (y.size == durations.size == char_mask.size):
        raise ValueError(
            f"lengths differ: y {y.size}, durations {durations.size}, mask {char_mask.size}"
        )
    if y.size and (y.min() < 0 or y.max() >= cfg.vocab):
        raise ValueError(f"character ids must be in [0, {cfg.vocab})")
    char_part = embedding(params["char_emb"], y)
    dur_part = embedding(params["dur_emb"], duration_ids(durations, char_mask, cfg.max_duration))
    return concat([char_part, dur_part], axis=1)


def predict_log_durations_infill(dur_inputs: Tensor, params: ModelParams,
                                 cfg: DurInfillConfig) -> Tensor:
    """Projection, conv stack, transformer, scalar log-duration head."""
    m = dur_inputs.shape[0]
    h = linear(params, "in_proj", dur_inputs)
    for i in range(cfg.conv_layers):
        h = gelu(conv1d(params, f"conv.{i}", h))
    rope = rotary_tables(np.arange(m), cfg.model_dim // cfg.heads)
    half = cfg.layers // 2
    first_half_out = {}
    for i in range(cfg.layers):
        if cfg.use_skips and i >= half:
            h = linear(params, f"skip.{i}", concat([h, first_half_out[cfg.layers - 1 - i]], axis=1))
        h = block(params, f"layer.{i}", h, cfg.heads, rope=rope)
        if not np.all(np.isfinite(h.data)):
            raise NumericError(f"non-finite activation after layer {i}")
        if i < half:
            first_half_out[i] = h
    h = rmsnorm(params, "final_norm", h)
    return linear(params, "head", h).reshape(m)


def masked_log_mse(pred_log, target_durations, char_mask):
    """Mean over masked characters of (pred_log - ln target)^2; 0 if none masked."""
    char_mask = np.asarray(char_mask, dtype=bool)
    target = np.asarray(target_durations, dtype=np.float64)
    if target.shape != char_mask.shape:
        raise ValueError("target and mask lengths differ")
    n_masked = int(char_mask.sum())
    if n_masked == 0:
        return 0.0
    if np.any(target[char_mask] < 1):
        raise ValueError("masked target durations must be >= 1")
    safe = np.where(char_mask, target, 1.0)
    diff = pred_log - np.log(safe)
    return (diff * diff * char_mask.astype(np.float64)).sum() * (1.0 / n_masked)
