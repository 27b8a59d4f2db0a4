"""Optimal-transport conditional path, CFM losses, and flow ODE integration.

The conditional path from standard-normal noise x0 to a data sample x1 is

    x_t = (1 - (1 - sigma_min) t) x0 + t x1

with target velocity

    u_t(x | x1) = (x1 - (1 - sigma_min) x) / (1 - (1 - sigma_min) t).

Along the conditional trajectory the target is the constant
x1 - (1 - sigma_min) x0, so points move with constant speed and direction.

Loss functions accept either numpy arrays or autodiff Tensors for the
prediction argument; the target is always treated as a constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .errors import NumericError

__all__ = [
    "OTPathConfig",
    "FlowState",
    "sample_conditional",
    "target_field",
    "cfm_loss",
    "masked_audio_cfm_loss",
    "integrate_flow",
]


@dataclass
class OTPathConfig:
    """Residual noise scale of the conditional path at t=1."""

    sigma_min: float = 1e-5

    def __post_init__(self):
        if not 0.0 <= self.sigma_min < 1.0:
            raise ValueError(f"sigma_min must be in [0, 1), got {self.sigma_min}")


@dataclass
class FlowState:
    """A point on the flow: frame matrix x_t at time t."""

    x_t: np.ndarray
    t: float

    def __post_init__(self):
        self.x_t = np.asarray(self.x_t, dtype=np.float64)
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"t must be in [0, 1], got {self.t}")
        if not np.all(np.isfinite(self.x_t)):
            raise ValueError("x_t has non-finite entries")


def _check_t(t: float):
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must be in [0, 1], got {t}")


def sample_conditional(x1, t: float, cfg: OTPathConfig, rng: np.random.Generator):
    """Draw (x_t, x0) from the conditional path at time t.

    x0 is standard normal elementwise; x_t = (1 - (1 - sigma_min) t) x0 + t x1.
    Returns both so the target field along the trajectory stays computable.
    """
    _check_t(t)
    x1 = np.asarray(x1, dtype=np.float64)
    x0 = rng.standard_normal(x1.shape)
    coef = 1.0 - (1.0 - cfg.sigma_min) * t
    return coef * x0 + t * x1, x0


def target_field(x, x1, t: float, cfg: OTPathConfig):
    """Conditional target velocity u_t(x | x1)."""
    denom = 1.0 - (1.0 - cfg.sigma_min) * t
    if denom <= 0.0:
        raise ValueError(f"path denominator {denom} is not positive at t={t}")
    x = np.asarray(x, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    return (x1 - (1.0 - cfg.sigma_min) * x) / denom


def _shape_of(a):
    return a.shape if isinstance(a, (Tensor, np.ndarray)) else np.asarray(a).shape


def cfm_loss(v_pred, u_target):
    """Mean over all entries of the squared prediction error."""
    if _shape_of(v_pred) != _shape_of(u_target):
        raise ValueError(
            f"shape mismatch: prediction {_shape_of(v_pred)} vs target {_shape_of(u_target)}"
        )
    diff = v_pred - u_target
    return (diff * diff).mean()


def masked_audio_cfm_loss(v_pred, u_target, mask, w_mask: float = 0.9, w_ctx: float = 0.1):
    """Region-weighted squared error: w_mask on masked frames, w_ctx on context.

    Each region contributes its own mean squared error (over member entries),
    so the weights are scale-free in the sequence length. A region with no
    members contributes zero.
    """
    shape = _shape_of(v_pred)
    if shape != _shape_of(u_target):
        raise ValueError(
            f"shape mismatch: prediction {shape} vs target {_shape_of(u_target)}"
        )
    if w_mask < 0 or w_ctx < 0:
        raise ValueError("region weights must be nonnegative")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (shape[0],):
        raise ValueError(f"mask length {mask.shape} does not match {shape[0]} frames")

    diff = v_pred - u_target
    err = diff * diff
    n_feat = shape[1] if len(shape) > 1 else 1
    m = mask.astype(np.float64).reshape(-1, *([1] * (len(shape) - 1)))

    n_mask = int(mask.sum())
    n_ctx = int(mask.size - n_mask)
    loss = None
    if n_mask > 0:
        loss = (err * m).sum() * (w_mask / (n_mask * n_feat))
    if n_ctx > 0:
        term = (err * (1.0 - m)).sum() * (w_ctx / (n_ctx * n_feat))
        loss = term if loss is None else loss + term
    if loss is None:
        raise ValueError("mask has zero length")
    return loss


def integrate_flow(field, x0, steps: int, method: str = "midpoint") -> np.ndarray:
    """Integrate dx/dt = field(x, t) from t=0 to t=1 on a uniform grid.

    Deterministic given inputs. Raises NumericError naming the offending
    step if the field produces non-finite values.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if method not in ("euler", "midpoint"):
        raise ValueError(f"unknown method {method!r}")
    x = np.array(x0, dtype=np.float64, copy=True)
    dt = 1.0 / steps
    for k in range(steps):
        t = k * dt
        v = np.asarray(field(x, t), dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise NumericError(f"non-finite field output at step {k} (t={t:.6f})")
        if method == "euler":
            x = x + dt * v
        else:
            x_half = x + 0.5 * dt * v
            v_half = np.asarray(field(x_half, t + 0.5 * dt), dtype=np.float64)
            if not np.all(np.isfinite(v_half)):
                raise NumericError(f"non-finite field output at midpoint step {k}")
            x = x + dt * v_half
    return x
