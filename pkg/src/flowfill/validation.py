"""Input validation helpers shared by the estimator layer."""

from __future__ import annotations

import numpy as np
from sklearn.exceptions import NotFittedError

from .corpus import UtteranceRecord


def check_records(records) -> list:
    """A nonempty list of UtteranceRecord with one consistent mel width."""
    records = list(records)
    if not records:
        raise ValueError("expected a nonempty list of utterance records")
    for rec in records:
        if not isinstance(rec, UtteranceRecord):
            raise TypeError(f"expected UtteranceRecord, got {type(rec).__name__}")
    widths = {rec.x.shape[1] for rec in records}
    if len(widths) != 1:
        raise ValueError(f"records mix mel widths {sorted(widths)}")
    return records


def check_mel(x, mel_dim=None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D frame matrix, got ndim={x.ndim}")
    if mel_dim is not None and x.shape[1] != mel_dim:
        raise ValueError(f"expected {mel_dim} mel features, got {x.shape[1]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("frame matrix has non-finite entries")
    return x


def check_char_ids(y, vocab=None) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("expected a nonempty 1-D id sequence")
    if y.min() < 0 or (vocab is not None and y.max() >= vocab):
        raise ValueError(f"ids must lie in [0, {vocab})")
    return y


def check_durations(l, n_chars=None) -> np.ndarray:
    l = np.asarray(l, dtype=np.int64)
    if l.ndim != 1:
        raise ValueError("durations must be 1-D")
    if np.any(l < 1):
        raise ValueError("durations must be >= 1")
    if n_chars is not None and l.size != n_chars:
        raise ValueError(f"expected {n_chars} durations, got {l.size}")
    return l


def check_bool_mask(mask, length=None) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 1:
        raise ValueError("mask must be 1-D")
    if length is not None and mask.size != length:
        raise ValueError(f"expected mask of length {length}, got {mask.size}")
    return mask


def check_is_fitted(estimator, attribute: str = "params_"):
    if getattr(estimator, attribute, None) is None:
        raise NotFittedError(
            f"this {type(estimator).__name__} instance is not fitted yet; "
            "call fit before using it"
        )
