"""Speaker-prompted duration predictor.

A short mel prompt sampled from the unmasked context and the character
sequence are projected to a shared width, run jointly through a conv
prenet and a transformer (absolute positions plus a learnable segment
embedding per side), and the text-side states feed a two-layer head that
emits a log duration per character. No aligned durations are consumed at
inference time.
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
    sinusoid_positions,
)

__all__ = [
    "PromptEncoderConfig",
    "init_prompted_params",
    "sample_prompt",
    "encode_prompted",
    "predict_log_durations_prompted",
    "dur_loss",
]


@dataclass
class PromptEncoderConfig:
    layers: int = 2
    heads: int = 2
    model_dim: int = 32
    ffn_dim: int = 64
    prenet_layers: int = 3
    conv_kernel: int = 3
    prompt_frames: int = 30
    min_prompt_frames: int = 1
    mel_dim: int = 16
    vocab: int = 8
    head_hidden: int = 64
    head_style: str = "ffn"          # "ffn" (two feed-forward layers) or "conv"
    attention_mode: str = "joint"    # "joint" or "text_to_prompt"

    def __post_init__(self):
        if self.model_dim % self.heads != 0:
            raise ValueError("model_dim must be divisible by heads")
        if self.head_style not in ("ffn", "conv"):
            raise ValueError(f"unknown head_style {self.head_style!r}")
        if self.attention_mode not in ("joint", "text_to_prompt"):
            raise ValueError(f"unknown attention_mode {self.attention_mode!r}")

    @classmethod
    def full_scale(cls, mel_dim: int = 80, vocab: int = 64) -> "PromptEncoderConfig":
        return cls(layers=12, heads=8, model_dim=512, ffn_dim=512,
                   mel_dim=mel_dim, vocab=vocab, head_hidden=512)

    def to_dict(self) -> dict:
        return asdict(self)


def init_prompted_params(cfg: PromptEncoderConfig, seed: int) -> ModelParams:
    params = ModelParams(seed)
    params.normal("char_emb", (cfg.vocab, cfg.model_dim), 1.0 / np.sqrt(cfg.model_dim))
    init_linear(params, "mel_proj", cfg.mel_dim, cfg.model_dim)
    for i in range(cfg.prenet_layers):
        init_conv1d(params, f"prenet.{i}", cfg.conv_kernel, cfg.model_dim, cfg.model_dim)
    params.normal("seg_prompt", (cfg.model_dim,), 1.0 / np.sqrt(cfg.model_dim))
    params.normal("seg_text", (cfg.model_dim,), 1.0 / np.sqrt(cfg.model_dim))
    for i in range(cfg.layers):
        init_block(params, f"layer.{i}", cfg.model_dim, cfg.ffn_dim)
    init_rmsnorm(params, "final_norm", cfg.model_dim)
    if cfg.head_style == "ffn":
        init_linear(params, "head.w1", cfg.model_dim, cfg.head_hidden)
        init_linear(params, "head.w2", cfg.head_hidden, 1)
    else:
        init_conv1d(params, "head.c1", cfg.conv_kernel, cfg.model_dim, cfg.head_hidden)
        init_conv1d(params, "head.c2", cfg.conv_kernel, cfg.head_hidden, 1)
    return params


def _unmasked_runs(mask: np.ndarray):
    """Maximal runs of consecutive unmasked frames as (start, length) pairs."""
    runs = []
    start = None
    for i, m in enumerate(mask):
        if not m and start is None:
            start = i
        elif m and start is not None:
            runs.append((start, i - start))
            start = None
    if start is not None:
        runs.append((start, mask.size - start))
    return runs


def sample_prompt(x_ctx, mask, prompt_frames: int, rng: np.random.Generator,
                  min_frames: int = 1) -> np.ndarray:
    """A contiguous window of unmasked frames, uniform over valid offsets.

    Falls back to the longest unmasked run when none is long enough for the
    requested window.
    """
    x_ctx = np.asarray(x_ctx, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (x_ctx.shape[0],):
        raise ValueError("mask length does not match frame count")
    if prompt_frames < 1:
        raise ValueError("prompt_frames must be >= 1")
    runs = _unmasked_runs(mask)
    if not runs:
        raise ValueError("cannot sample a prompt from a fully masked sequence")
    starts = [s + off for s, ln in runs for off in range(ln - prompt_frames + 1)]
    if starts:
        start = starts[int(rng.integers(0, len(starts)))]
        return x_ctx[start:start + prompt_frames].copy()
    best_start, best_len = max(runs, key=lambda r: r[1])
    if best_len < min_frames:
        raise ValueError(
            f"longest unmasked run ({best_len} frames) is below the {min_frames}-frame floor"
        )
    return x_ctx[best_start:best_start + best_len].copy()


def _attention_mask(n_prompt: int, n_text: int, mode: str):
    if mode == "joint":
        return None
    allowed = np.zeros((n_prompt + n_text, n_prompt + n_text), dtype=bool)
    allowed[:n_prompt, :n_prompt] = True   # prompt attends among itself
    allowed[n_prompt:, :n_prompt] = True   # text attends to prompt only
    add = np.where(allowed, 0.0, -np.inf)
    return add


def encode_prompted(x_p, y, params: ModelParams, cfg: PromptEncoderConfig) -> Tensor:
    """Speaker-conditioned text states h_c from (prompt frames, characters)."""
    x_p = np.asarray(x_p, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise ValueError("text must be nonempty")
    if y.min() < 0 or y.max() >= cfg.vocab:
        raise ValueError(f"character ids must be in [0, {cfg.vocab})")
    if x_p.ndim != 2 or x_p.shape[1] != cfg.mel_dim:
        raise ValueError(f"prompt must be (frames, {cfg.mel_dim})")
    n_p, n_t = x_p.shape[0], y.size

    prompt_h = linear(params, "mel_proj", Tensor(x_p))
    text_h = embedding(params["char_emb"], y)
    h = concat([prompt_h, text_h], axis=0)
    for i in range(cfg.prenet_layers):
        h = gelu(conv1d(params, f"prenet.{i}", h))

    # per-segment positions restart at zero; segment embedding marks the side
    pos = np.concatenate([sinusoid_positions(n_p, cfg.model_dim),
                          sinusoid_positions(n_t, cfg.model_dim)], axis=0)
    seg = concat([
        params["seg_prompt"].reshape(1, cfg.model_dim) * np.ones((n_p, 1)),
        params["seg_text"].reshape(1, cfg.model_dim) * np.ones((n_t, 1)),
    ], axis=0)
    h = h + Tensor(pos) + seg

    add_mask = _attention_mask(n_p, n_t, cfg.attention_mode)
    for i in range(cfg.layers):
        h = block(params, f"layer.{i}", h, cfg.heads, additive_mask=add_mask)
        if not np.all(np.isfinite(h.data)):
            raise NumericError(f"non-finite activation after layer {i}")
    h = rmsnorm(params, "final_norm", h)
    return h[n_p:]


def predict_log_durations_prompted(h_c: Tensor, params: ModelParams,
                                   cfg: PromptEncoderConfig) -> Tensor:
    """Per-character log duration from the encoded text states."""
    m = h_c.shape[0]
    if cfg.head_style == "ffn":
        out = linear(params, "head.w2", gelu(linear(params, "head.w1", h_c)))
    else:
        out = conv1d(params, "head.c2", gelu(conv1d(params, "head.c1", h_c)))
    return out.reshape(m)


def dur_loss(pred_log, target_durations):
    """Mean over all characters of (pred_log - ln target)^2."""
    target = np.asarray(target_durations, dtype=np.float64)
    if np.any(target < 1):
        raise ValueError("target durations must be >= 1")
    n = target.size
    if _length_of(pred_log) != n:
        raise ValueError("prediction and target lengths differ")
    diff = pred_log - np.log(target)
    return (diff * diff).sum() * (1.0 / n)


def _length_of(v):
    return v.shape[0]
