"""Network building blocks shared by the three models.

Everything operates on 2-D (sequence, feature) Tensors; attention reshapes
to (head, sequence, head_dim) internally. Initialization is scaled-normal
with 1/sqrt(fan_in) per layer, deterministic from the ModelParams seed.
"""

from __future__ import annotations

import numpy as np

from .autodiff import ModelParams, Tensor, concat, gelu, softmax

RMS_EPS = 1e-8
ROPE_BASE = 10000.0


# -- parameter initialization ------------------------------------------------

def init_linear(params: ModelParams, name: str, d_in: int, d_out: int, bias: bool = True):
    params.normal(f"{name}.w", (d_in, d_out), 1.0 / np.sqrt(d_in))
    if bias:
        params.zeros(f"{name}.b", (d_out,))


def init_rmsnorm(params: ModelParams, name: str, dim: int):
    params.ones(f"{name}.g", (dim,))


def init_attention(params: ModelParams, name: str, dim: int):
    for part in ("q", "k", "v", "out"):
        init_linear(params, f"{name}.{part}", dim, dim)


def init_ffn(params: ModelParams, name: str, dim: int, hidden: int):
    init_linear(params, f"{name}.w1", dim, hidden)
    init_linear(params, f"{name}.w2", hidden, dim)


def init_block(params: ModelParams, name: str, dim: int, ffn_dim: int, norm: bool = True):
    if norm:
        init_rmsnorm(params, f"{name}.norm1", dim)
        init_rmsnorm(params, f"{name}.norm2", dim)
    init_attention(params, f"{name}.attn", dim)
    init_ffn(params, f"{name}.ffn", dim, ffn_dim)


def init_conv1d(params: ModelParams, name: str, kernel: int, c_in: int, c_out: int):
    if kernel % 2 != 1:
        raise ValueError(f"conv kernel must be odd, got {kernel}")
    params.normal(f"{name}.w", (kernel, c_in, c_out), 1.0 / np.sqrt(kernel * c_in))
    params.zeros(f"{name}.b", (c_out,))


# -- forward pieces ------------------------------------------------------------

def linear(params: ModelParams, name: str, x: Tensor) -> Tensor:
    out = x @ params[f"{name}.w"]
    if f"{name}.b" in params:
        out = out + params[f"{name}.b"]
    return out


def rmsnorm(params: ModelParams, name: str, x: Tensor) -> Tensor:
    ms = (x * x).mean(axis=-1, keepdims=True)
    return x * ((ms + RMS_EPS) ** -0.5) * params[f"{name}.g"]


def ffn(params: ModelParams, name: str, x: Tensor) -> Tensor:
    return linear(params, f"{name}.w2", gelu(linear(params, f"{name}.w1", x)))


def rotary_tables(positions: np.ndarray, head_dim: int):
    """cos/sin tables of shape (len(positions), head_dim // 2)."""
    if head_dim % 2 != 0:
        raise ValueError(f"rotary needs an even head dim, got {head_dim}")
    half = head_dim // 2
    inv_freq = ROPE_BASE ** (-np.arange(half) * 2.0 / head_dim)
    angles = np.asarray(positions, dtype=np.float64)[:, None] * inv_freq[None, :]
    return np.cos(angles), np.sin(angles)


def apply_rotary(x: Tensor, cos: np.ndarray, sin: np.ndarray) -> Tensor:
    """Rotate half-split feature pairs of (heads, seq, head_dim) by position."""
    half = x.shape[-1] // 2
    x1 = x[..., :half]
    x2 = x[..., half:]
    return concat([x1 * cos - x2 * sin, x2 * cos + x1 * sin], axis=-1)


def attention(params: ModelParams, name: str, x: Tensor, heads: int,
              rope=None, additive_mask=None) -> Tensor:
    """Bidirectional multi-head self-attention over a (seq, dim) Tensor."""
    seq, dim = x.shape
    head_dim = dim // heads

    def split_heads(t):
        return t.reshape(seq, heads, head_dim).transpose((1, 0, 2))

    q = split_heads(linear(params, f"{name}.q", x))
    k = split_heads(linear(params, f"{name}.k", x))
    v = split_heads(linear(params, f"{name}.v", x))
    if rope is not None:
        cos, sin = rope
        q = apply_rotary(q, cos, sin)
        k = apply_rotary(k, cos, sin)
    scores = (q @ k.transpose((0, 2, 1))) * (1.0 / np.sqrt(head_dim))
    attn = softmax(scores, additive_mask=additive_mask)
    out = (attn @ v).transpose((1, 0, 2)).reshape(seq, dim)
    return linear(params, f"{name}.out", out)


def block(params: ModelParams, name: str, x: Tensor, heads: int,
          rope=None, additive_mask=None, norm: bool = True) -> Tensor:
    """Pre-norm transformer block: attention then feed-forward, both residual."""
    h = x if not norm else rmsnorm(params, f"{name}.norm1", x)
    x = x + attention(params, f"{name}.attn", h, heads, rope=rope, additive_mask=additive_mask)
    h = x if not norm else rmsnorm(params, f"{name}.norm2", x)
    return x + ffn(params, f"{name}.ffn", h)


def conv1d(params: ModelParams, name: str, x: Tensor) -> Tensor:
    """Same-padded 1-D convolution along the sequence axis of (seq, c_in)."""
    w = params[f"{name}.w"]
    kernel, c_in, _ = w.shape
    seq = x.shape[0]
    pad = (kernel - 1) // 2
    zeros = Tensor(np.zeros((pad, c_in)))
    xp = concat([zeros, x, zeros], axis=0)
    out = None
    for dk in range(kernel):
        term = xp[dk:dk + seq] @ w[dk]
        out = term if out is None else out + term
    return out + params[f"{name}.b"]


# -- deterministic encodings ---------------------------------------------------

def sinusoid_time(t: float, dim: int) -> np.ndarray:
    """Map t in [0, 1] to interleaved sin/cos at geometric frequencies 1..1000."""
    if dim % 2 != 0:
        raise ValueError(f"time embedding dim must be even, got {dim}")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must be in [0, 1], got {t}")
    half = dim // 2
    if half == 1:
        freqs = np.array([1.0])
    else:
        freqs = 1000.0 ** (np.arange(half) / (half - 1))
    out = np.empty(dim)
    out[0::2] = np.sin(freqs * t)
    out[1::2] = np.cos(freqs * t)
    return out


def sinusoid_positions(n: int, dim: int) -> np.ndarray:
    """Standard absolute positional encoding matrix of shape (n, dim)."""
    if dim % 2 != 0:
        raise ValueError(f"positional encoding dim must be even, got {dim}")
    pos = np.arange(n, dtype=np.float64)[:, None]
    inv = ROPE_BASE ** (-np.arange(dim // 2) * 2.0 / dim)
    angles = pos * inv[None, :]
    out = np.empty((n, dim))
    out[:, 0::2] = np.sin(angles)
    out[:, 1::2] = np.cos(angles)
    return out
