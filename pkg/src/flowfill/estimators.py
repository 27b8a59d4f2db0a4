"""Scikit-learn style estimators over the functional core.

Each estimator takes its config objects as constructor parameters (so
get_params/set_params/clone compose with the wider ecosystem), trains in
fit(records), and exposes predict plus checkpoint save/load. Fitted state
lives in trailing-underscore attributes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import duration_infill as di
from . import duration_prompted as dp
from .autodiff import no_grad
from .errors import DataError
from .evaluation import InfillRequest, infill, realize_durations
from .flow import OTPathConfig
from .masking import MaskPolicy
from .audio_model import AudioModelConfig, init_audio_params
from .storage import load_checkpoint, restore_params, save_checkpoint
from .training import TrainConfig, train_audio, train_duration
from .validation import (
    check_bool_mask,
    check_char_ids,
    check_is_fitted,
    check_mel,
    check_records,
)

__all__ = [
    "AudioInfiller",
    "InfillDurationRegressor",
    "PromptedDurationRegressor",
    "load_estimator",
]


def _data_dims(records):
    mel_dim = records[0].x.shape[1]
    vocab = int(max(rec.y.max() for rec in records)) + 1
    return mel_dim, vocab


class _CheckpointMixin:
    """Binary checkpoint round trip shared by the three estimators."""

    def _extra_header(self) -> dict:
        return {}

    def save(self, path):
        check_is_fitted(self)
        save_checkpoint(path, self._kind, self.config_.to_dict(),
                        self.seed_, self.params_, extra=self._extra_header())
        return path

    @classmethod
    def _restore(cls, path, expected_kind, config_cls, init_fn):
        kind, cfg_dict, seed, arrays, extra = load_checkpoint(path, want_extra=True)
        if kind != expected_kind:
            raise DataError(f"{path}: checkpoint kind {kind!r}, expected {expected_kind!r}")
        cfg = config_cls(**cfg_dict)
        params = restore_params(init_fn(cfg, seed), arrays, path)
        return cfg, seed, params, extra


class AudioInfiller(BaseEstimator, _CheckpointMixin):
    """Masked-audio vector-field model with flow-matching training.

    Parameters are config objects (None selects desk-scale defaults, with
    mel_dim/vocab derived from the training records).
    """

    _kind = "audio"

    def __init__(self, model=None, path=None, masking=None, training=None, seed=0):
        self.model = model
        self.path = path
        self.masking = masking
        self.training = training
        self.seed = seed
        self.params_ = None

    def fit(self, X, y=None):
        records = check_records(X)
        mel_dim, vocab = _data_dims(records)
        cfg = self.model
        if cfg is None:
            cfg = AudioModelConfig(mel_dim=mel_dim, vocab=vocab)
        if cfg.mel_dim != mel_dim:
            raise ValueError(f"config mel_dim {cfg.mel_dim} != corpus mel width {mel_dim}")
        path_cfg = self.path or OTPathConfig()
        policy = self.masking or MaskPolicy()
        tcfg = self.training or TrainConfig()
        params = init_audio_params(cfg, self.seed)
        self.trace_ = train_audio(records, params, cfg, policy, path_cfg, tcfg)
        self.config_ = cfg
        self.path_config_ = path_cfg
        self.seed_ = self.seed
        self.params_ = params
        return self

    def infill(self, request: InfillRequest, dur_model=None):
        check_is_fitted(self)
        return infill((self.params_, self.config_), request, dur_model)

    def predict(self, X):
        """X: list of InfillRequest (ground-truth durations); returns mels."""
        check_is_fitted(self)
        return [self.infill(req).mel for req in X]

    def _extra_header(self) -> dict:
        return {"sigma_min": self.path_config_.sigma_min}

    @classmethod
    def load(cls, path) -> "AudioInfiller":
        cfg, seed, params, extra = cls._restore(path, cls._kind, AudioModelConfig,
                                                init_audio_params)
        est = cls(model=cfg, seed=seed)
        est.config_ = cfg
        est.path_config_ = OTPathConfig(extra.get("sigma_min", 1e-5))
        est.seed_ = seed
        est.params_ = params
        est.trace_ = []
        return est


class InfillDurationRegressor(BaseEstimator, _CheckpointMixin):
    """Duration predictor conditioned on text and unmasked context durations."""

    _kind = "dur_infill"

    def __init__(self, model=None, masking=None, training=None, seed=0):
        self.model = model
        self.masking = masking
        self.training = training
        self.seed = seed
        self.params_ = None

    def fit(self, X, y=None):
        records = check_records(X)
        _, vocab = _data_dims(records)
        cfg = self.model or di.DurInfillConfig(vocab=vocab)
        policy = self.masking or MaskPolicy()
        tcfg = self.training or TrainConfig()
        params = di.init_infill_params(cfg, self.seed)
        self.trace_ = train_duration("infill", records, params, cfg, policy, tcfg)
        self.config_ = cfg
        self.seed_ = self.seed
        self.params_ = params
        return self

    def predict_log(self, y, ctx_durations, char_mask) -> np.ndarray:
        check_is_fitted(self)
        cfg = self.config_
        y = check_char_ids(y, cfg.vocab)
        char_mask = check_bool_mask(char_mask, y.size)
        ctx_durations = np.asarray(ctx_durations, dtype=np.int64)
        with no_grad():
            inputs = di.build_duration_inputs(y, ctx_durations, char_mask,
                                              self.params_, cfg)
            pred = di.predict_log_durations_infill(inputs, self.params_, cfg)
        return pred.data

    def predict(self, X, min_dur: int = 1):
        """X: list of (y, ctx_durations, char_mask); returns realized durations
        for the masked positions of each item."""
        out = []
        for y, ctx_durations, char_mask in X:
            pred = self.predict_log(y, ctx_durations, char_mask)
            mask = check_bool_mask(char_mask)
            out.append(realize_durations(pred, min_dur)[mask])
        return out

    @classmethod
    def load(cls, path) -> "InfillDurationRegressor":
        cfg, seed, params, _ = cls._restore(path, cls._kind, di.DurInfillConfig,
                                            di.init_infill_params)
        est = cls(model=cfg, seed=seed)
        est.config_ = cfg
        est.seed_ = seed
        est.params_ = params
        est.trace_ = []
        return est


class PromptedDurationRegressor(BaseEstimator, _CheckpointMixin):
    """Duration predictor conditioned on text and a short mel prompt."""

    _kind = "dur_prompted"

    def __init__(self, model=None, masking=None, training=None, seed=0):
        self.model = model
        self.masking = masking
        self.training = training
        self.seed = seed
        self.params_ = None

    def fit(self, X, y=None):
        records = check_records(X)
        mel_dim, vocab = _data_dims(records)
        cfg = self.model or dp.PromptEncoderConfig(mel_dim=mel_dim, vocab=vocab)
        if cfg.mel_dim != mel_dim:
            raise ValueError(f"config mel_dim {cfg.mel_dim} != corpus mel width {mel_dim}")
        policy = self.masking or MaskPolicy()
        tcfg = self.training or TrainConfig()
        params = dp.init_prompted_params(cfg, self.seed)
        self.trace_ = train_duration("prompted", records, params, cfg, policy, tcfg)
        self.config_ = cfg
        self.seed_ = self.seed
        self.params_ = params
        return self

    def predict_log(self, x_p, y) -> np.ndarray:
        check_is_fitted(self)
        cfg = self.config_
        x_p = check_mel(x_p, cfg.mel_dim)
        y = check_char_ids(y, cfg.vocab)
        with no_grad():
            h_c = dp.encode_prompted(x_p, y, self.params_, cfg)
            pred = dp.predict_log_durations_prompted(h_c, self.params_, cfg)
        return pred.data

    def predict(self, X, min_dur: int = 1):
        """X: list of (x_p, y) pairs; returns realized per-char durations."""
        return [realize_durations(self.predict_log(x_p, y), min_dur) for x_p, y in X]

    @classmethod
    def load(cls, path) -> "PromptedDurationRegressor":
        cfg, seed, params, _ = cls._restore(path, cls._kind, dp.PromptEncoderConfig,
                                            dp.init_prompted_params)
        est = cls(model=cfg, seed=seed)
        est.config_ = cfg
        est.seed_ = seed
        est.params_ = params
        est.trace_ = []
        return est


_KIND_TO_CLASS = {
    "audio": AudioInfiller,
    "dur_infill": InfillDurationRegressor,
    "dur_prompted": PromptedDurationRegressor,
}


def load_estimator(path):
    """Load whichever estimator kind the checkpoint holds."""
    kind, _, _, _ = load_checkpoint(path)
    try:
        return _KIND_TO_CLASS[kind].load(path)
    except KeyError:
        raise DataError(f"{path}: unknown checkpoint kind {kind!r}") from None
