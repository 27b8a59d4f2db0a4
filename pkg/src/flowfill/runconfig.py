"""Declarative run configuration for the CLI.

One JSON file covers corpus synthesis, masking, the path, the three model
configs, training, filtering, and evaluation. Unknown keys are rejected
at every level; every command writes the fully resolved config next to
its outputs so a run can be reproduced from the artifact directory alone.
"""

from __future__ import annotations

import json
import os
from copy import deepcopy
from pathlib import Path

from .corpus import SynthSpec, make_speakers
from .errors import ConfigError
from .flow import OTPathConfig
from .masking import MaskPolicy
from .audio_model import AudioModelConfig
from .duration_infill import DurInfillConfig
from .duration_prompted import PromptEncoderConfig
from .toy2d import Toy2dConfig
from .training import TrainConfig

CONFIG_DIR_ENV = "FLOWFILL_CONFIG_DIR"

DEFAULTS = {
    "seed": 0,
    "corpus": {
        "alphabet": "abcdef",
        "mel_dim": 16,
        "base_durations": None,
        "noise_std": 0.05,
        "frame_rate": 10,
        "proto_scale": 2.0,
        "prototype_seed": 0,
        "speakers": [{"speaker_id": "spk0", "stretch": 1.0}],
        "offset_scale": 0.0,
        "n_utterances": 200,
        "min_chars": 6,
        "max_chars": 12,
        "avoid_adjacent_repeats": True,
    },
    "masking": {
        "p_random": 0.50,
        "p_full": 0.45,
        "p_none": 0.05,
        "r_low": 30.0,
        "r_high": 100.0,
        "contiguous": True,
    },
    "ot_path": {"sigma_min": 1e-5},
    "audio_model": {
        "layers": 4,
        "heads": 4,
        "model_dim": 64,
        "ffn_dim": 128,
        "char_emb_dim": 16,
        "use_rotary": True,
        "use_rmsnorm": True,
        "use_skips": True,
    },
    "dur_infill": {
        "layers": 2,
        "heads": 4,
        "model_dim": 32,
        "ffn_dim": 64,
        "conv_layers": 2,
        "conv_kernel": 3,
        "char_emb_dim": 16,
        "dur_emb_dim": 16,
        "max_duration": 64,
        "use_skips": True,
    },
    "dur_prompted": {
        "layers": 2,
        "heads": 2,
        "model_dim": 32,
        "ffn_dim": 64,
        "prenet_layers": 3,
        "conv_kernel": 3,
        "prompt_frames": 30,
        "min_prompt_frames": 1,
        "head_hidden": 64,
        "head_style": "ffn",
        "attention_mode": "joint",
    },
    "train_audio": {
        "total_steps": 1000,
        "warmup_steps": 100,
        "peak_lr": 2e-4,
        "batch_frames": 4096,
        "max_frames_per_utterance": 1000,
        "weight_decay": 0.01,
        "beta1": 0.9,
        "beta2": 0.95,
        "eps": 1e-8,
        "clip_norm": 0.0,
        "w_mask": 0.9,
        "w_ctx": 0.1,
        "log_every": 50,
    },
    "train_duration": {
        "total_steps": 1000,
        "warmup_steps": 100,
        "peak_lr": 2e-4,
        "batch_frames": 2048,
        "max_frames_per_utterance": 1000,
        "weight_decay": 0.01,
        "beta1": 0.9,
        "beta2": 0.95,
        "eps": 1e-8,
        "clip_norm": 0.0,
        "w_mask": 0.9,
        "w_ctx": 0.1,
        "log_every": 50,
    },
    "filter": {"wer_threshold": 0.2, "ctc_threshold": 0.9},
    "eval": {
        "ode_steps": 32,
        "ode_method": "midpoint",
        "sources": ["ground_truth"],
        "group_by": "speaker",
    },
    "infill": {"ode_steps": 32, "ode_method": "midpoint", "min_dur": 1},
    "toy2d": {
        "mode_distance": 5.0,
        "mode_std": 0.35,
        "hidden": 64,
        "train_steps": 2500,
        "warmup_steps": 100,
        "peak_lr": 2e-3,
        "batch": 256,
        "sigma_min": 1e-5,
        "n_samples": 2000,
        "ode_steps": 32,
    },
}


def find_config(name_or_path: str) -> Path:
    """Resolve a config argument, falling back to $FLOWFILL_CONFIG_DIR."""
    p = Path(name_or_path)
    if p.exists():
        return p
    cfg_dir = os.environ.get(CONFIG_DIR_ENV)
    if cfg_dir:
        candidate = Path(cfg_dir) / name_or_path
        if candidate.exists():
            return candidate
    raise ConfigError(f"config file not found: {name_or_path}")


def _merge(defaults, given, trail: str):
    if not isinstance(given, dict):
        raise ConfigError(f"{trail or 'config'}: expected an object")
    out = deepcopy(defaults)
    for key, value in given.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key {trail + key!r}")
        if isinstance(defaults[key], dict):
            out[key] = _merge(defaults[key], value, f"{trail}{key}.")
        else:
            out[key] = deepcopy(value)
    return out


def resolve_config(raw: dict, seed_override=None) -> dict:
    """Defaults filled in, unknown keys rejected, optional seed override."""
    resolved = _merge(DEFAULTS, raw, "")
    if seed_override is not None:
        resolved["seed"] = int(seed_override)
    return resolved


def load_config(name_or_path: str, seed_override=None) -> dict:
    path = find_config(name_or_path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    return resolve_config(raw, seed_override)


def write_resolved(config: dict, out_dir) -> Path:
    path = Path(out_dir) / "resolved_config.json"
    path.write_text(json.dumps(config, sort_keys=True, indent=2) + "\n")
    return path


def build_synth_spec(config: dict) -> SynthSpec:
    c = config["corpus"]
    names_stretches = [(s["speaker_id"], s.get("stretch", 1.0)) for s in c["speakers"]]
    speakers = make_speakers(c["prototype_seed"], c["mel_dim"], names_stretches,
                             offset_scale=c["offset_scale"])
    try:
        return SynthSpec(
            alphabet=c["alphabet"],
            mel_dim=c["mel_dim"],
            base_durations=tuple(c["base_durations"]) if c["base_durations"] else (),
            noise_std=c["noise_std"],
            frame_rate=c["frame_rate"],
            proto_scale=c["proto_scale"],
            seed=c["prototype_seed"],
            speakers=speakers,
        )
    except ValueError as e:
        raise ConfigError(f"corpus: {e}") from None


def build_mask_policy(config: dict) -> MaskPolicy:
    try:
        return MaskPolicy(**config["masking"])
    except ValueError as e:
        raise ConfigError(f"masking: {e}") from None


def build_ot_path(config: dict) -> OTPathConfig:
    try:
        return OTPathConfig(**config["ot_path"])
    except ValueError as e:
        raise ConfigError(f"ot_path: {e}") from None


def build_audio_config(config: dict) -> AudioModelConfig:
    c = config["corpus"]
    try:
        return AudioModelConfig(mel_dim=c["mel_dim"], vocab=len(c["alphabet"]),
                                **config["audio_model"])
    except ValueError as e:
        raise ConfigError(f"audio_model: {e}") from None


def build_dur_infill_config(config: dict) -> DurInfillConfig:
    try:
        return DurInfillConfig(vocab=len(config["corpus"]["alphabet"]),
                               **config["dur_infill"])
    except ValueError as e:
        raise ConfigError(f"dur_infill: {e}") from None


def build_dur_prompted_config(config: dict) -> PromptEncoderConfig:
    c = config["corpus"]
    try:
        return PromptEncoderConfig(mel_dim=c["mel_dim"], vocab=len(c["alphabet"]),
                                   **config["dur_prompted"])
    except ValueError as e:
        raise ConfigError(f"dur_prompted: {e}") from None


def build_train_config(config: dict, section: str, seed: int) -> TrainConfig:
    try:
        return TrainConfig(seed=seed, **config[section])
    except ValueError as e:
        raise ConfigError(f"{section}: {e}") from None


def build_toy2d_config(config: dict, seed: int) -> Toy2dConfig:
    try:
        return Toy2dConfig(seed=seed, **config["toy2d"])
    except ValueError as e:
        raise ConfigError(f"toy2d: {e}") from None
