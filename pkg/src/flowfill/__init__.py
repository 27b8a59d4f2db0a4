"""Flow-matching speech infilling at desk scale.

The package trains a masked-audio vector-field model and two duration
predictors on synthetic character-to-spectrogram corpora, then evaluates
sentence completion with oracle transcription and a deterministic
speaker-similarity embedding. The top-level estimators follow the
scikit-learn fit/predict convention.
"""

from .corpus import (
    Speaker,
    SynthSpec,
    UtteranceRecord,
    align,
    durations_to_frame_transcript,
    filter_corpus,
    make_corpus,
    make_speakers,
    normalize_text,
    oracle_transcribe,
    synth_utterance,
)
from .errors import ConfigError, DataError, FlowfillError, NumericError
from .estimators import (
    AudioInfiller,
    InfillDurationRegressor,
    PromptedDurationRegressor,
    load_estimator,
)
from .evaluation import (
    EvalReport,
    InfillRequest,
    InfillResult,
    continuous_completion_protocol,
    infill,
    realize_durations,
    sim_o,
    speaker_embedding,
    wer,
)
from .flow import (
    FlowState,
    OTPathConfig,
    cfm_loss,
    integrate_flow,
    masked_audio_cfm_loss,
    sample_conditional,
    target_field,
)
from .masking import MaskPolicy, apply_context, char_mask_from_frames, sample_mask
from .audio_model import AudioModelConfig
from .duration_infill import DurInfillConfig
from .duration_prompted import PromptEncoderConfig, sample_prompt
from .training import TrainConfig, chunk_utterance, lr_at

__version__ = "0.1.0"

__all__ = [
    "AudioInfiller",
    "AudioModelConfig",
    "ConfigError",
    "DataError",
    "DurInfillConfig",
    "EvalReport",
    "FlowState",
    "FlowfillError",
    "InfillDurationRegressor",
    "InfillRequest",
    "InfillResult",
    "MaskPolicy",
    "NumericError",
    "OTPathConfig",
    "PromptEncoderConfig",
    "PromptedDurationRegressor",
    "Speaker",
    "SynthSpec",
    "TrainConfig",
    "UtteranceRecord",
    "align",
    "apply_context",
    "cfm_loss",
    "char_mask_from_frames",
    "chunk_utterance",
    "continuous_completion_protocol",
    "durations_to_frame_transcript",
    "filter_corpus",
    "infill",
    "integrate_flow",
    "load_estimator",
    "lr_at",
    "make_corpus",
    "make_speakers",
    "masked_audio_cfm_loss",
    "normalize_text",
    "oracle_transcribe",
    "realize_durations",
    "sample_conditional",
    "sample_mask",
    "sample_prompt",
    "sim_o",
    "speaker_embedding",
    "synth_utterance",
    "target_field",
    "wer",
]
