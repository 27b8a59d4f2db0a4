"""Synthetic character-to-spectrogram corpora with exact alignments.

Each character of a small alphabet owns a prototype spectral row; a
speaker is a (prototype offset, duration stretch) pair. Utterance frames
are prototype rows plus Gaussian noise, so transcription and alignment
have closed-form oracles: nearest prototype per frame, and monotone DP
segmentation against prototypes. The corpus filter mirrors a WER-based
discard pass with a confidence-based restore pass.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

__all__ = [
    "Speaker",
    "SynthSpec",
    "UtteranceRecord",
    "make_speakers",
    "normalize_text",
    "durations_to_frame_transcript",
    "synth_utterance",
    "make_corpus",
    "oracle_transcribe",
    "align",
    "filter_corpus",
]


@dataclass
class Speaker:
    """Ground-truth speaker identity: spectral offset plus duration stretch."""

    speaker_id: str
    stretch: float = 1.0
    offset: np.ndarray | None = None

    def __post_init__(self):
        if self.stretch <= 0:
            raise ValueError(f"stretch must be positive, got {self.stretch}")
        if self.offset is not None:
            self.offset = np.asarray(self.offset, dtype=np.float64)


@dataclass
class SynthSpec:
    """Generator for a synthetic corpus: prototypes, durations, noise."""

    alphabet: str = "abcdef"
    mel_dim: int = 16
    base_durations: tuple = ()        # per char; default 2 + (index mod 3)
    noise_std: float = 0.05
    frame_rate: int = 10              # frames per abstract second
    proto_scale: float = 2.0
    seed: int = 0
    speakers: list = field(default_factory=lambda: [Speaker("spk0")])

    def __post_init__(self):
        k = len(self.alphabet)
        if k < 2:
            raise ValueError("alphabet needs at least 2 characters")
        if len(set(self.alphabet)) != k:
            raise ValueError("alphabet characters must be unique")
        if not self.base_durations:
            self.base_durations = tuple(2 + (i % 3) for i in range(k))
        if len(self.base_durations) != k:
            raise ValueError("base_durations length must match the alphabet")
        if any(d < 1 for d in self.base_durations):
            raise ValueError("base durations must be >= 1")
        self._by_id = {}
        for sp in self.speakers:
            if sp.offset is None:
                sp.offset = np.zeros(self.mel_dim)
            if sp.offset.shape != (self.mel_dim,):
                raise ValueError(f"speaker {sp.speaker_id} offset has wrong shape")
            self._by_id[sp.speaker_id] = sp
        if len(self._by_id) != len(self.speakers):
            raise ValueError("speaker ids must be unique")
        self._base_prototypes = _make_prototypes(k, self.mel_dim, self.proto_scale, self.seed)
        gaps = _pairwise_distances(self._base_prototypes)
        if gaps.min() <= 4.0 * self.noise_std:
            raise ValueError(
                f"prototype separation {gaps.min():.4f} must exceed 4 * noise_std "
                f"({4 * self.noise_std:.4f})"
            )

    @property
    def alphabet_size(self) -> int:
        return len(self.alphabet)

    def speaker(self, speaker_id: str) -> Speaker:
        try:
            return self._by_id[speaker_id]
        except KeyError:
            raise DataError(f"unknown speaker {speaker_id!r}") from None

    def prototypes(self, speaker_id: str) -> np.ndarray:
        """K x F prototype matrix for one speaker (base plus offset)."""
        sp = self.speaker(speaker_id)
        return self._base_prototypes + sp.offset[None, :]

    def duration_rule(self, speaker_id: str) -> np.ndarray:
        """Per-character frame counts: round(base * stretch), at least 1."""
        sp = self.speaker(speaker_id)
        durs = np.rint(np.asarray(self.base_durations, dtype=np.float64) * sp.stretch)
        return np.maximum(durs, 1).astype(np.int64)

    def text_to_ids(self, text: str) -> np.ndarray:
        idx = {c: i for i, c in enumerate(self.alphabet)}
        try:
            return np.array([idx[c] for c in text], dtype=np.int64)
        except KeyError as e:
            raise DataError(f"character {e.args[0]!r} not in alphabet") from None

    def ids_to_text(self, ids) -> str:
        return "".join(self.alphabet[int(i)] for i in ids)


def _make_prototypes(k: int, mel_dim: int, scale: float, seed: int) -> np.ndarray:
    """Deterministic well-separated prototype rows.

    For k <= mel_dim the rows are orthonormal (pairwise distance
    sqrt(2) * scale exactly); otherwise plain normal draws.
    """
    rng = np.random.default_rng(seed)
    raw = rng.normal(size=(mel_dim, max(k, 1)))
    if k <= mel_dim:
        q, _ = np.linalg.qr(raw[:, :k])
        return scale * q.T[:k]
    return scale / np.sqrt(mel_dim) * rng.normal(size=(k, mel_dim))


def _pairwise_distances(protos: np.ndarray) -> np.ndarray:
    k = protos.shape[0]
    out = []
    for i in range(k):
        for j in range(i + 1, k):
            out.append(np.linalg.norm(protos[i] - protos[j]))
    return np.array(out)


def make_speakers(spec_seed: int, mel_dim: int, names_stretches,
                  offset_scale: float = 0.0) -> list:
    """Speakers with deterministic unit-direction offsets scaled to offset_scale."""
    rng = np.random.default_rng(spec_seed + 7919)
    speakers = []
    for name, stretch in names_stretches:
        direction = rng.normal(size=mel_dim)
        direction /= np.linalg.norm(direction)
        speakers.append(Speaker(name, stretch=stretch, offset=offset_scale * direction))
    return speakers


@dataclass
class UtteranceRecord:
    """One corpus item: ids, transcript, durations, frames, filter provenance."""

    utt_id: str
    speaker_id: str
    y: np.ndarray          # (M,) char ids
    durations: np.ndarray  # (M,) positive ints summing to frame count
    x: np.ndarray          # (N, F) mel-like frames
    filter_state: str = "kept"

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.int64)
        self.durations = np.asarray(self.durations, dtype=np.int64)
        self.x = np.asarray(self.x, dtype=np.float64)
        if self.y.shape != self.durations.shape:
            raise ValueError("y and durations lengths differ")
        if np.any(self.durations < 1):
            raise ValueError("durations must be >= 1")
        if int(self.durations.sum()) != self.x.shape[0]:
            raise ValueError(
                f"durations sum to {self.durations.sum()} but x has {self.x.shape[0]} frames"
            )
        if self.filter_state not in ("kept", "dropped", "restored"):
            raise ValueError(f"bad filter_state {self.filter_state!r}")

    @property
    def n_frames(self) -> int:
        return self.x.shape[0]


REJECTED = None  # normalize_text sentinel, a value rather than an error

_STRIP = set(string.punctuation) | set(string.whitespace)


def normalize_text(text: str, alphabet: str):
    """Strip punctuation and whitespace; reject foreign symbols or empty text.

    Returns the char-id sequence, or None when the text is rejected.
    """
    kept = []
    for ch in text:
        if ch in _STRIP:
            continue
        pos = alphabet.find(ch)
        if pos < 0:
            return REJECTED
        kept.append(pos)
    if not kept:
        return REJECTED
    return np.array(kept, dtype=np.int64)


def durations_to_frame_transcript(y, durations) -> np.ndarray:
    """Frame-level transcript: char j repeated durations[j] times."""
    y = np.asarray(y, dtype=np.int64)
    durations = np.asarray(durations, dtype=np.int64)
    if y.shape != durations.shape:
        raise ValueError("y and durations lengths differ")
    if np.any(durations < 1):
        raise ValueError("durations must be >= 1")
    return np.repeat(y, durations)


def synth_utterance(spec: SynthSpec, speaker_id: str, y, rng: np.random.Generator,
                    utt_id: str = "utt") -> UtteranceRecord:
    """Render y with the speaker's duration rule and noisy prototype frames."""
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise ValueError("y must be nonempty")
    if y.min() < 0 or y.max() >= spec.alphabet_size:
        raise ValueError("y contains ids outside the alphabet")
    rule = spec.duration_rule(speaker_id)
    durations = rule[y]
    z = durations_to_frame_transcript(y, durations)
    protos = spec.prototypes(speaker_id)
    x = protos[z] + rng.normal(0.0, spec.noise_std, size=(z.size, spec.mel_dim))
    return UtteranceRecord(utt_id, speaker_id, y, durations, x)


def make_corpus(spec: SynthSpec, n_utterances: int, rng: np.random.Generator,
                min_chars: int = 6, max_chars: int = 12,
                avoid_adjacent_repeats: bool = True, id_prefix: str = "utt") -> list:
    """Random utterances, speakers round-robin, ids zero-padded for stable sorts."""
    if min_chars < 1 or max_chars < min_chars:
        raise ValueError("need 1 <= min_chars <= max_chars")
    width = max(4, len(str(n_utterances)))
    records = []
    k = spec.alphabet_size
    for i in range(n_utterances):
        speaker = spec.speakers[i % len(spec.speakers)]
        m = int(rng.integers(min_chars, max_chars + 1))
        y = np.empty(m, dtype=np.int64)
        for j in range(m):
            c = int(rng.integers(0, k))
            if avoid_adjacent_repeats and j > 0 and c == y[j - 1]:
                c = (c + 1) % k
            y[j] = c
        records.append(synth_utterance(spec, speaker.speaker_id, y, rng,
                                       utt_id=f"{id_prefix}{i:0{width}d}"))
    return records


def oracle_transcribe(x, spec: SynthSpec, speaker_id: str):
    """Nearest-prototype decode with run-length collapse and a confidence score.

    The per-frame confidence is the peak-normalized Gaussian likelihood of
    the nearest prototype, exp(-d^2 / 2 tau^2) with tau the corpus noise
    std: exactly 1 on prototype frames, vanishing for frames far from every
    prototype.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("x must be a nonempty frame matrix")
    protos = spec.prototypes(speaker_id)
    d2 = ((x[:, None, :] - protos[None, :, :]) ** 2).sum(axis=2)  # (N, K)
    nearest = d2.argmin(axis=1)
    tau = max(spec.noise_std, 1e-3)
    score = float(np.exp(-d2.min(axis=1) / (2.0 * tau * tau)).mean())
    # run-length collapse to a character sequence
    chars = [int(nearest[0])]
    for c in nearest[1:]:
        if int(c) != chars[-1]:
            chars.append(int(c))
    return np.array(chars, dtype=np.int64), score


def align(x, y, spec: SynthSpec, speaker_id: str) -> np.ndarray:
    """Monotone DP alignment of frames to characters, each char >= 1 frame.

    Minimizes the total squared distance to the characters' prototypes. Ties
    prefer keeping the current character (longer early durations).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise ValueError("y must be nonempty")
    n, m = x.shape[0], y.size
    if n < m:
        raise ValueError(f"{n} frames cannot cover {m} characters")
    protos = spec.prototypes(speaker_id)
    cost = ((x[:, None, :] - protos[None, y, :]) ** 2).sum(axis=2)  # (N, M)

    big = np.inf
    dp = np.full((n, m), big)
    choice = np.zeros((n, m), dtype=np.int8)  # 1 = advanced from previous char
    dp[0, 0] = cost[0, 0]
    for i in range(1, n):
        dp[i, 0] = dp[i - 1, 0] + cost[i, 0]
        jmax = min(i, m - 1)
        js = np.arange(1, jmax + 1)
        stay = dp[i - 1, js]
        advance = dp[i - 1, js - 1]
        take_advance = advance < stay
        dp[i, js] = np.where(take_advance, advance, stay) + cost[i, js]
        choice[i, js] = take_advance
    durations = np.zeros(m, dtype=np.int64)
    j = m - 1
    for i in range(n - 1, -1, -1):
        durations[j] += 1
        if i > 0 and choice[i, j]:
            j -= 1
    return durations


def filter_corpus(records, spec: SynthSpec, wer_threshold: float = 0.2,
                  ctc_threshold: float = 0.9) -> list:
    """Set filter_state per record: drop on high WER, restore on high confidence."""
    from .evaluation import wer  # deferred: evaluation imports this module

    if not 0.0 <= wer_threshold <= 1.0 or not 0.0 <= ctc_threshold <= 1.0:
        raise ValueError("thresholds must lie in [0, 1]")
    out = []
    for rec in records:
        hyp, score = oracle_transcribe(rec.x, spec, rec.speaker_id)
        w = wer(rec.y, hyp)
        if w <= wer_threshold:
            state = "kept"
        elif score > ctc_threshold:
            state = "restored"
        else:
            state = "dropped"
        out.append(UtteranceRecord(rec.utt_id, rec.speaker_id, rec.y.copy(),
                                   rec.durations.copy(), rec.x.copy(), state))
    return out
