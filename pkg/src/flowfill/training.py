"""Optimization loop: schedule, frame-capped batching, AdamW, loss traces.

Every run is fully determined by (corpus order, TrainConfig.seed): batch
assembly, masks, path times, and noise all come from one seeded generator.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import duration_infill as di
from . import duration_prompted as dp
from .autodiff import ModelParams, backward
from .corpus import UtteranceRecord, durations_to_frame_transcript
from .errors import NumericError
from .flow import OTPathConfig, masked_audio_cfm_loss, sample_conditional, target_field
from .masking import MaskPolicy, apply_context, char_mask_from_frames, sample_mask
from .audio_model import AudioModelConfig, forward_vector_field

__all__ = [
    "TrainConfig",
    "lr_at",
    "chunk_utterance",
    "AdamW",
    "train_audio",
    "train_duration",
    "write_trace",
]


@dataclass
class TrainConfig:
    total_steps: int = 1000
    warmup_steps: int = 100
    peak_lr: float = 2e-4
    batch_frames: int = 4096
    max_frames_per_utterance: int = 1000
    seed: int = 0
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.95
    eps: float = 1e-8
    clip_norm: float = 0.0      # 0 disables clipping
    w_mask: float = 0.9
    w_ctx: float = 0.1
    log_every: int = 50

    def __post_init__(self):
        if not 0 <= self.warmup_steps < self.total_steps:
            raise ValueError("need 0 <= warmup_steps < total_steps")
        if self.batch_frames < 1 or self.max_frames_per_utterance < 1:
            raise ValueError("batch_frames and max_frames_per_utterance must be >= 1")

    @classmethod
    def full_scale_audio(cls) -> "TrainConfig":
        return cls(total_steps=750_000, warmup_steps=5000, peak_lr=2e-4,
                   batch_frames=256_000, max_frames_per_utterance=1000)

    @classmethod
    def full_scale_duration(cls) -> "TrainConfig":
        return cls(total_steps=200_000, warmup_steps=5000, peak_lr=2e-4,
                   batch_frames=200_000, max_frames_per_utterance=1000)

    def to_dict(self) -> dict:
        return asdict(self)


def lr_at(step: int, cfg: TrainConfig) -> float:
    """Linear warmup to peak_lr, then linear decay to zero at total_steps."""
    if step < 0 or step > cfg.total_steps:
        raise ValueError(f"step {step} outside [0, {cfg.total_steps}]")
    if cfg.warmup_steps == 0:
        warm = cfg.peak_lr
    else:
        warm = cfg.peak_lr * step / cfg.warmup_steps
    if step <= cfg.warmup_steps:
        return warm
    return cfg.peak_lr * (cfg.total_steps - step) / (cfg.total_steps - cfg.warmup_steps)


def chunk_utterance(rec: UtteranceRecord, max_frames: int,
                    rng: np.random.Generator) -> UtteranceRecord:
    """Cap an utterance at max_frames via a uniformly random contiguous window.

    Characters cut at the window edges keep their overlap (>= 1 frame).
    """
    if max_frames < 1:
        raise ValueError("max_frames must be >= 1")
    n = rec.n_frames
    if n <= max_frames:
        return rec
    start = int(rng.integers(0, n - max_frames + 1))
    stop = start + max_frames
    bounds = np.concatenate([[0], np.cumsum(rec.durations)])
    keep = []
    new_durs = []
    for j in range(rec.y.size):
        lo, hi = bounds[j], bounds[j + 1]
        overlap = min(hi, stop) - max(lo, start)
        if overlap > 0:
            keep.append(rec.y[j])
            new_durs.append(overlap)
    return UtteranceRecord(rec.utt_id, rec.speaker_id,
                           np.array(keep, dtype=np.int64),
                           np.array(new_durs, dtype=np.int64),
                           rec.x[start:stop].copy(), rec.filter_state)


class AdamW:
    """Adaptive-moment optimizer with decoupled weight decay."""

    def __init__(self, params: ModelParams, beta1: float = 0.9, beta2: float = 0.95,
                 eps: float = 1e-8, weight_decay: float = 0.01):
        self.params = params
        self.beta1, self.beta2 = beta1, beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {name: np.zeros_like(t.data) for name, t in params.items()}
        self.v = {name: np.zeros_like(t.data) for name, t in params.items()}

    def step(self, lr: float):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for name, tensor in self.params.items():
            g = tensor.grad
            tensor.data *= 1.0 - lr * self.weight_decay
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            tensor.data -= lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def clip_gradients(params: ModelParams, max_norm: float) -> float:
    total = 0.0
    for _, tensor in params.items():
        total += float((tensor.grad ** 2).sum())
    norm = np.sqrt(total)
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for _, tensor in params.items():
            tensor.grad *= scale
    return norm


def _draw_batch(records, tcfg: TrainConfig, rng: np.random.Generator):
    """Utterances until batch_frames would be exceeded (always at least one)."""
    first = chunk_utterance(records[int(rng.integers(0, len(records)))],
                            tcfg.max_frames_per_utterance, rng)
    batch = [first]
    total = first.n_frames
    while True:
        cand = chunk_utterance(records[int(rng.integers(0, len(records)))],
                               tcfg.max_frames_per_utterance, rng)
        if total + cand.n_frames > tcfg.batch_frames:
            return batch
        batch.append(cand)
        total += cand.n_frames


def train_audio(records, params: ModelParams, model_cfg: AudioModelConfig,
                policy: MaskPolicy, path_cfg: OTPathConfig, tcfg: TrainConfig,
                progress=None):
    """Masked weighted CFM training of the audio model; returns the loss trace."""
    if not records:
        raise ValueError("training corpus is empty")
    rng = np.random.default_rng(tcfg.seed)
    opt = AdamW(params, tcfg.beta1, tcfg.beta2, tcfg.eps, tcfg.weight_decay)
    trace = []
    for step in range(1, tcfg.total_steps + 1):
        batch = _draw_batch(records, tcfg, rng)
        losses = []
        masked_vals = []
        ctx_vals = []
        for rec in batch:
            mask = sample_mask(rec.n_frames, policy, rng)
            t = float(rng.uniform(0.0, 1.0))
            x_t, x0 = sample_conditional(rec.x, t, path_cfg, rng)
            u = target_field(x_t, rec.x, t, path_cfg)
            x_ctx = apply_context(rec.x, mask)
            z = durations_to_frame_transcript(rec.y, rec.durations)
            v = forward_vector_field(x_t, x_ctx, z, t, params, model_cfg)
            losses.append(masked_audio_cfm_loss(v, u, mask, tcfg.w_mask, tcfg.w_ctx))
            err = (v.data - u) ** 2
            if mask.any():
                masked_vals.append(float(err[mask].mean()))
            if (~mask).any():
                ctx_vals.append(float(err[~mask].mean()))
        loss = losses[0]
        for extra in losses[1:]:
            loss = loss + extra
        loss = loss * (1.0 / len(losses))
        if not np.isfinite(loss.data):
            raise NumericError(f"training loss diverged at step {step}")
        params.zero_grads()
        backward(loss)
        if tcfg.clip_norm > 0:
            clip_gradients(params, tcfg.clip_norm)
        lr = lr_at(step, tcfg)
        opt.step(lr)
        if step % tcfg.log_every == 0 or step == tcfg.total_steps:
            row = {
                "step": step,
                "lr": lr,
                "loss": float(loss.data),
                "masked_loss": float(np.mean(masked_vals)) if masked_vals else 0.0,
                "ctx_loss": float(np.mean(ctx_vals)) if ctx_vals else 0.0,
            }
            trace.append(row)
            if progress:
                progress(row)
    return trace


def train_duration(style: str, records, params: ModelParams, model_cfg,
                   policy: MaskPolicy, tcfg: TrainConfig, progress=None):
    """Train a duration predictor (style 'infill' or 'prompted')."""
    if style not in ("infill", "prompted"):
        raise ValueError(f"unknown duration style {style!r}")
    if not records:
        raise ValueError("training corpus is empty")
    rng = np.random.default_rng(tcfg.seed)
    opt = AdamW(params, tcfg.beta1, tcfg.beta2, tcfg.eps, tcfg.weight_decay)
    trace = []
    for step in range(1, tcfg.total_steps + 1):
        batch = _draw_batch(records, tcfg, rng)
        losses = []
        for rec in batch:
            mask = sample_mask(rec.n_frames, policy, rng)
            if style == "infill":
                char_mask = char_mask_from_frames(mask, rec.durations)
                if not char_mask.any():
                    continue
                inputs = di.build_duration_inputs(rec.y, rec.durations, char_mask,
                                                  params, model_cfg)
                pred = di.predict_log_durations_infill(inputs, params, model_cfg)
                losses.append(di.masked_log_mse(pred, rec.durations, char_mask))
            else:
                if mask.all():
                    continue  # a fully masked utterance leaves nothing to prompt from
                prompt = dp.sample_prompt(rec.x, mask, model_cfg.prompt_frames, rng,
                                          model_cfg.min_prompt_frames)
                h_c = dp.encode_prompted(prompt, rec.y, params, model_cfg)
                pred = dp.predict_log_durations_prompted(h_c, params, model_cfg)
                losses.append(dp.dur_loss(pred, rec.durations))
        lr = lr_at(step, tcfg)
        if not losses:
            continue
        loss = losses[0]
        for extra in losses[1:]:
            loss = loss + extra
        loss = loss * (1.0 / len(losses))
        if not np.isfinite(loss.data):
            raise NumericError(f"training loss diverged at step {step}")
        params.zero_grads()
        backward(loss)
        if tcfg.clip_norm > 0:
            clip_gradients(params, tcfg.clip_norm)
        opt.step(lr)
        if step % tcfg.log_every == 0 or step == tcfg.total_steps:
            row = {
                "step": step,
                "lr": lr,
                "loss": float(loss.data),
                "masked_loss": float(loss.data),
                "ctx_loss": 0.0,
            }
            trace.append(row)
            if progress:
                progress(row)
    return trace


def write_trace(trace, path):
    """Loss trace as CSV: step, lr, loss, masked_loss, ctx_loss."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "lr", "loss", "masked_loss", "ctx_loss"])
        for row in trace:
            writer.writerow([row["step"], f"{row['lr']:.8g}", f"{row['loss']:.8g}",
                             f"{row['masked_loss']:.8g}", f"{row['ctx_loss']:.8g}"])
    return path
