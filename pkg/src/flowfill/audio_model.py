"""Transformer vector-field network for masked audio infilling.

Input assembly: the flow state x_t, the zeroed context x_ctx, and the
frame-level character embedding are concatenated feature-wise, projected
to the model width, and the time embedding is appended as one extra
sequence position. The stack uses rotary positions inside self-attention,
RMS normalization, and U-Net pairing: the output of layer i (i < L/2) is
concatenated with the input of layer L-1-i and linearly recombined.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .autodiff import ModelParams, Tensor, concat, embedding
from .autodiff import backward  # noqa: F401  (re-exported training substrate)
from .errors import NumericError
from .layers import (
    block,
    init_block,
    init_linear,
    init_rmsnorm,
    linear,
    rmsnorm,
    rotary_tables,
    sinusoid_time,
)

__all__ = [
    "AudioModelConfig",
    "init_audio_params",
    "embed_transcript",
    "time_embedding",
    "assemble_input",
    "forward_vector_field",
    "backward",
]


@dataclass
class AudioModelConfig:
    layers: int = 4
    heads: int = 4
    model_dim: int = 64
    ffn_dim: int = 128
    mel_dim: int = 16
    vocab: int = 8
    char_emb_dim: int = 16
    use_rotary: bool = True
    use_rmsnorm: bool = True
    use_skips: bool = True

    def __post_init__(self):
        if self.model_dim % self.heads != 0:
            raise ValueError("model_dim must be divisible by heads")
        if self.use_skips and self.layers % 2 != 0:
            raise ValueError("U-Net skip pairing needs an even layer count")
        if self.use_rotary and (self.model_dim // self.heads) % 2 != 0:
            raise ValueError("rotary needs an even head dim")

    @classmethod
    def full_scale(cls, mel_dim: int = 80, vocab: int = 64) -> "AudioModelConfig":
        """Production-scale hyperparameters; not trained in this package."""
        return cls(layers=12, heads=16, model_dim=512, ffn_dim=512,
                   mel_dim=mel_dim, vocab=vocab, char_emb_dim=64)

    def to_dict(self) -> dict:
        return asdict(self)


def init_audio_params(cfg: AudioModelConfig, seed: int) -> ModelParams:
    params = ModelParams(seed)
    params.normal("char_emb", (cfg.vocab, cfg.char_emb_dim), 1.0 / np.sqrt(cfg.char_emb_dim))
    init_linear(params, "in_proj", 2 * cfg.mel_dim + cfg.char_emb_dim, cfg.model_dim)
    half = cfg.layers // 2
    for i in range(cfg.layers):
        if cfg.use_skips and i >= half:
            init_linear(params, f"skip.{i}", 2 * cfg.model_dim, cfg.model_dim)
        init_block(params, f"layer.{i}", cfg.model_dim, cfg.ffn_dim, norm=cfg.use_rmsnorm)
    if cfg.use_rmsnorm:
        init_rmsnorm(params, "final_norm", cfg.model_dim)
    init_linear(params, "out_proj", cfg.model_dim, cfg.mel_dim)
    return params


def embed_transcript(z, params: ModelParams) -> Tensor:
    """Per-frame character embedding lookup."""
    z = np.asarray(z, dtype=np.int64)
    vocab = params["char_emb"].shape[0]
    if z.size and (z.min() < 0 or z.max() >= vocab):
        raise ValueError(f"transcript ids must be in [0, {vocab}), got range "
                         f"[{z.min()}, {z.max()}]")
    return embedding(params["char_emb"], z)


def time_embedding(t: float, dim: int) -> np.ndarray:
    """Deterministic sinusoidal embedding of the flow time."""
    return sinusoid_time(t, dim)


def assemble_input(x_t, x_ctx, z_emb: Tensor, t: float, params: ModelParams) -> Tensor:
    """Feature-concatenate, project to model width, append the time position."""
    x_t = np.asarray(x_t, dtype=np.float64)
    x_ctx = np.asarray(x_ctx, dtype=np.float64)
    n = x_t.shape[0]
    if x_ctx.shape[0] != n or z_emb.shape[0] != n:
        raise ValueError(
            f"sequence lengths differ: x_t {n}, x_ctx {x_ctx.shape[0]}, z {z_emb.shape[0]}"
        )
    feats = concat([Tensor(x_t), Tensor(x_ctx), z_emb], axis=1)
    h = linear(params, "in_proj", feats)
    dim = h.shape[1]
    h_t = Tensor(sinusoid_time(t, dim).reshape(1, dim))
    return concat([h, h_t], axis=0)


def forward_vector_field(x_t, x_ctx, z, t: float, params: ModelParams,
                         cfg: AudioModelConfig) -> Tensor:
    """Full transformer pass; returns the length-N predicted field.

    The appended time position attends like any other token (rotary index N)
    and is dropped from the output.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    n = x_t.shape[0]
    if x_t.shape[1] != cfg.mel_dim:
        raise ValueError(f"expected {cfg.mel_dim} mel features, got {x_t.shape[1]}")
    z_emb = embed_transcript(z, params)
    h = assemble_input(x_t, x_ctx, z_emb, t, params)

    rope = None
    if cfg.use_rotary:
        rope = rotary_tables(np.arange(n + 1), cfg.model_dim // cfg.heads)

    half = cfg.layers // 2
    first_half_out = {}
    for i in range(cfg.layers):
        if cfg.use_skips and i >= half:
            h = linear(params, f"skip.{i}", concat([h, first_half_out[cfg.layers - 1 - i]], axis=1))
        h = block(params, f"layer.{i}", h, cfg.heads, rope=rope, norm=cfg.use_rmsnorm)
        if not np.all(np.isfinite(h.data)):
            raise NumericError(f"non-finite activation after layer {i}")
        if i < half:
            first_half_out[i] = h
    if cfg.use_rmsnorm:
        h = rmsnorm(params, "final_norm", h)
    out = linear(params, "out_proj", h)
    return out[:n]
