"""Training-time frame masks and context/missing views.

The default policy: with probability 0.50 mask one contiguous span covering
a uniform percentage r ~ U[30, 100] of the frames, with probability 0.45
mask everything, with probability 0.05 mask nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["MaskPolicy", "sample_mask", "apply_context", "char_mask_from_frames"]


@dataclass
class MaskPolicy:
    p_random: float = 0.50
    p_full: float = 0.45
    p_none: float = 0.05
    r_low: float = 30.0
    r_high: float = 100.0
    contiguous: bool = True

    def __post_init__(self):
        total = self.p_random + self.p_full + self.p_none
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"branch probabilities must sum to 1, got {total}")
        if min(self.p_random, self.p_full, self.p_none) < 0:
            raise ValueError("branch probabilities must be nonnegative")
        if not 0.0 <= self.r_low <= self.r_high <= 100.0:
            raise ValueError(f"need 0 <= r_low <= r_high <= 100, got ({self.r_low}, {self.r_high})")


def sample_mask(n: int, policy: MaskPolicy, rng: np.random.Generator) -> np.ndarray:
    """Draw a length-n boolean mask (True marks frames to predict)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    u = rng.random()
    if u < policy.p_random:
        r = rng.uniform(policy.r_low, policy.r_high)
        span = int(round(r * n / 100.0))
        span = min(max(span, 0), n)
        mask = np.zeros(n, dtype=bool)
        if span > 0:
            if policy.contiguous:
                start = int(rng.integers(0, n - span + 1))
                mask[start:start + span] = True
            else:
                idx = rng.choice(n, size=span, replace=False)
                mask[idx] = True
        return mask
    if u < policy.p_random + policy.p_full:
        return np.ones(n, dtype=bool)
    return np.zeros(n, dtype=bool)


def apply_context(x, mask) -> np.ndarray:
    """Zero the masked rows of x (the context view x_ctx)."""
    x = np.asarray(x, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (x.shape[0],):
        raise ValueError(f"mask length {mask.shape[0]} does not match {x.shape[0]} frames")
    out = x.copy()
    out[mask] = 0.0
    return out


def char_mask_from_frames(mask, durations) -> np.ndarray:
    """Lift a frame mask to characters: masked iff >= 50% of the char's frames are.

    A tie at exactly 50% counts as masked.
    """
    mask = np.asarray(mask, dtype=bool)
    durations = np.asarray(durations, dtype=np.int64)
    if durations.sum() != mask.size:
        raise ValueError(
            f"durations sum to {durations.sum()} but mask has {mask.size} frames"
        )
    out = np.zeros(durations.size, dtype=bool)
    pos = 0
    for j, d in enumerate(durations):
        out[j] = mask[pos:pos + d].sum() * 2 >= d
        pos += d
    return out
