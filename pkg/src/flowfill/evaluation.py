"""Inference-time infilling, objective metrics, and the sentence-completion
protocol: mask each test utterance's second half, regenerate it from the
first half plus text, then score intelligibility (WER against an oracle
transcript) and speaker similarity (cosine between embeddings of the
prompt half and the generated half).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import duration_infill as di
from . import duration_prompted as dp
from .autodiff import no_grad
from .corpus import SynthSpec, durations_to_frame_transcript, oracle_transcribe
from .errors import ConfigError, DataError
from .flow import integrate_flow
from .audio_model import forward_vector_field

__all__ = [
    "InfillRequest",
    "InfillResult",
    "EvalReport",
    "realize_durations",
    "infill",
    "wer",
    "edit_distance",
    "speaker_embedding",
    "sim_o",
    "continuous_completion_protocol",
    "render_table",
    "write_report_csv",
    "read_report_csv",
]

DURATION_SOURCES = ("ground_truth", "infill", "prompted")


def realize_durations(pred_log, min_dur: int = 1) -> np.ndarray:
    """round(exp(pred_log)) with round-half-to-even, clamped below at min_dur."""
    pred_log = np.asarray(pred_log, dtype=np.float64)
    if not np.all(np.isfinite(pred_log)):
        raise ValueError("predicted log durations must be finite")
    return np.maximum(np.rint(np.exp(pred_log)), min_dur).astype(np.int64)


@dataclass
class InfillRequest:
    """One infilling job: full text, char-level mask, known context."""

    y: np.ndarray               # (M,) char ids over the full text
    char_mask: np.ndarray       # (M,) True marks chars to generate
    ctx_durations: np.ndarray   # (M,) durations; masked entries used only by
                                # the ground_truth source
    ctx_frames: np.ndarray      # frames of the unmasked chars, in order
    duration_source: str = "ground_truth"
    ode_steps: int = 32
    ode_method: str = "midpoint"
    seed: int = 0
    min_dur: int = 1

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.int64)
        self.char_mask = np.asarray(self.char_mask, dtype=bool)
        self.ctx_durations = np.asarray(self.ctx_durations, dtype=np.int64)
        self.ctx_frames = np.asarray(self.ctx_frames, dtype=np.float64)
        if self.y.size == 0:
            raise ValueError("request text must be nonempty")
        if not (self.y.shape == self.char_mask.shape == self.ctx_durations.shape):
            raise ValueError("y, char_mask and ctx_durations lengths differ")
        if np.any(self.ctx_durations[~self.char_mask] < 1):
            raise ValueError("unmasked context durations must be >= 1")
        n_ctx = int(self.ctx_durations[~self.char_mask].sum())
        if self.ctx_frames.shape[0] != n_ctx:
            raise ValueError(
                f"context has {self.ctx_frames.shape[0]} frames but unmasked "
                f"durations sum to {n_ctx}"
            )
        if self.duration_source not in DURATION_SOURCES:
            raise ValueError(f"unknown duration source {self.duration_source!r}")


@dataclass
class InfillResult:
    mel: np.ndarray          # (N, F) spliced output
    durations: np.ndarray    # (M,) realized full duration sequence
    frame_mask: np.ndarray   # (N,) True on generated frames


def _predict_masked_durations(request: InfillRequest, dur_model, prompt_frames=None):
    params, cfg = dur_model
    with no_grad():
        if request.duration_source == "infill":
            inputs = di.build_duration_inputs(request.y, request.ctx_durations,
                                              request.char_mask, params, cfg)
            pred = di.predict_log_durations_infill(inputs, params, cfg)
        else:
            window = prompt_frames if prompt_frames is not None else cfg.prompt_frames
            x_p = inference_prompt(request.ctx_frames, window)
            h_c = dp.encode_prompted(x_p, request.y, params, cfg)
            pred = dp.predict_log_durations_prompted(h_c, params, cfg)
    return realize_durations(pred.data, request.min_dur)[request.char_mask]


def inference_prompt(ctx_frames: np.ndarray, prompt_frames: int) -> np.ndarray:
    """Deterministic prompt window: the trailing frames of the context."""
    if ctx_frames.shape[0] == 0:
        raise DataError("cannot build a prompt from an empty context")
    return ctx_frames[-prompt_frames:]


def infill(audio_model, request: InfillRequest, dur_model=None) -> InfillResult:
    """Generate the masked region: realize durations, build the frame-level
    transcript, integrate the learned field from noise, splice the context
    back verbatim.

    audio_model is a (params, config) pair; dur_model likewise when the
    duration source is a learned predictor.
    """
    params, cfg = audio_model
    masked_durs = None
    if request.duration_source == "ground_truth":
        masked_durs = request.ctx_durations[request.char_mask]
        if np.any(masked_durs < 1):
            raise ValueError("ground-truth durations for masked chars must be >= 1")
    else:
        if dur_model is None:
            raise ConfigError(
                f"duration source {request.duration_source!r} needs a loaded predictor"
            )
        masked_durs = _predict_masked_durations(request, dur_model)

    durations = request.ctx_durations.copy()
    durations[request.char_mask] = masked_durs
    z = durations_to_frame_transcript(request.y, durations)
    n = z.size

    frame_mask = np.repeat(request.char_mask, durations)
    x_ctx = np.zeros((n, cfg.mel_dim))
    x_ctx[~frame_mask] = request.ctx_frames

    if not frame_mask.any():
        return InfillResult(request.ctx_frames.copy(), durations, frame_mask)

    rng = np.random.default_rng(request.seed)
    x0 = rng.standard_normal((n, cfg.mel_dim))

    def field(x, t):
        with no_grad():
            return forward_vector_field(x, x_ctx, z, t, params, cfg).data

    out = integrate_flow(field, x0, request.ode_steps, request.ode_method)
    out[~frame_mask] = request.ctx_frames
    return InfillResult(out, durations, frame_mask)


def edit_distance(ref, hyp) -> int:
    """Levenshtein distance with unit costs."""
    ref = list(ref)
    hyp = list(hyp)
    prev = list(range(len(hyp) + 1))
    for i, r in enumerate(ref, start=1):
        cur = [i]
        for j, h in enumerate(hyp, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (r != h)))
        prev = cur
    return prev[-1]


def wer(ref, hyp) -> float:
    """Edit distance divided by the reference length."""
    ref = list(ref)
    if not ref:
        raise ValueError("reference must be nonempty")
    return edit_distance(ref, hyp) / len(ref)


def speaker_embedding(x) -> np.ndarray:
    """Deterministic statistics embedding: per-feature mean, std, and mean
    absolute frame delta, concatenated (3F) and L2-normalized."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("embedding needs at least 2 frames")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    delta = np.abs(np.diff(x, axis=0)).mean(axis=0)
    e = np.concatenate([mean, std, delta])
    norm = np.linalg.norm(e)
    return e / norm if norm > 0 else e


def sim_o(e1, e2) -> float:
    """Cosine similarity between two embeddings."""
    e1 = np.asarray(e1, dtype=np.float64)
    e2 = np.asarray(e2, dtype=np.float64)
    n1 = np.linalg.norm(e1)
    n2 = np.linalg.norm(e2)
    if n1 == 0 or n2 == 0:
        raise ValueError("sim_o is undefined for zero vectors")
    return float(np.dot(e1, e2) / (n1 * n2))


@dataclass
class ReportRow:
    name: str
    n_utterances: int
    ref_tokens: int
    wer: dict = field(default_factory=dict)            # pooled edits / pooled ref
    wer_utt_mean: dict = field(default_factory=dict)   # mean of per-utterance WER
    sim_o: dict = field(default_factory=dict)          # mean similarity


@dataclass
class EvalReport:
    sources: list
    rows: list
    overall: ReportRow


def continuous_completion_protocol(records, spec: SynthSpec, audio_model,
                                   dur_models=None, sources=DURATION_SOURCES,
                                   ode_steps: int = 32, ode_method: str = "midpoint",
                                   seed: int = 0, group_by: str = "speaker"):
    """Mask each utterance's second half, regenerate per duration source,
    and aggregate WER and Sim-o per group plus an overall row.

    Returns (EvalReport, details) where details holds one dict per
    (utterance, source) with embeddings for downstream comparisons.
    """
    dur_models = dur_models or {}
    for source in sources:
        if source not in DURATION_SOURCES:
            raise ConfigError(f"unknown duration source {source!r}")
        if source != "ground_truth" and source not in dur_models:
            raise ConfigError(f"duration source {source!r} needs a loaded checkpoint")

    groups: dict = {}
    details = []
    for idx, rec in enumerate(records):
        m = rec.y.size
        if m < 2:
            raise DataError(f"{rec.utt_id}: need at least 2 chars to split in half")
        split = m // 2
        char_mask = np.zeros(m, dtype=bool)
        char_mask[split:] = True
        n_ctx = int(rec.durations[:split].sum())
        ctx_frames = rec.x[:n_ctx]
        target_y = rec.y[split:]
        if n_ctx < 2:
            raise DataError(f"{rec.utt_id}: prompt half has fewer than 2 frames")
        prompt_emb = speaker_embedding(ctx_frames)
        group = rec.speaker_id if group_by == "speaker" else group_by

        for source in sources:
            request = InfillRequest(rec.y, char_mask, rec.durations, ctx_frames,
                                    duration_source=source, ode_steps=ode_steps,
                                    ode_method=ode_method, seed=seed + idx)
            result = infill(audio_model, request, dur_models.get(source))
            gen = result.mel[result.frame_mask]
            if gen.shape[0] < 2:
                raise DataError(f"{rec.utt_id}: generated half has fewer than 2 frames")
            hyp, _ = oracle_transcribe(gen, spec, rec.speaker_id)
            edits = edit_distance(target_y, hyp)
            w = edits / target_y.size
            gen_emb = speaker_embedding(gen)
            s = sim_o(prompt_emb, gen_emb)
            stats = groups.setdefault(group, {
                "n": 0, "ref": 0,
                "edits": {src: 0 for src in sources},
                "wers": {src: [] for src in sources},
                "sims": {src: [] for src in sources},
            })
            if source == sources[0]:
                stats["n"] += 1
                stats["ref"] += target_y.size
            stats["edits"][source] += edits
            stats["wers"][source].append(w)
            stats["sims"][source].append(s)
            details.append({
                "utt_id": rec.utt_id,
                "speaker": rec.speaker_id,
                "group": group,
                "source": source,
                "wer": w,
                "sim_o": s,
                "prompt_embedding": prompt_emb,
                "generated_embedding": gen_emb,
                "generated": gen,
            })

    rows = []
    for name in sorted(groups):
        g = groups[name]
        rows.append(ReportRow(
            name=name, n_utterances=g["n"], ref_tokens=g["ref"],
            wer={s: g["edits"][s] / g["ref"] for s in sources},
            wer_utt_mean={s: float(np.mean(g["wers"][s])) for s in sources},
            sim_o={s: float(np.mean(g["sims"][s])) for s in sources},
        ))
    total_n = sum(r.n_utterances for r in rows)
    total_ref = sum(r.ref_tokens for r in rows)
    overall = ReportRow(
        name="overall", n_utterances=total_n, ref_tokens=total_ref,
        wer={s: sum(r.wer[s] * r.ref_tokens for r in rows) / total_ref for s in sources},
        wer_utt_mean={s: sum(r.wer_utt_mean[s] * r.n_utterances for r in rows) / total_n
                      for s in sources},
        sim_o={s: sum(r.sim_o[s] * r.n_utterances for r in rows) / total_n
               for s in sources},
    )
    return EvalReport(list(sources), rows, overall), details


_COLUMN_LABEL = {"ground_truth": "GT", "infill": "Infill", "prompted": "Prompted"}


def write_report_csv(report: EvalReport, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["group", "n_utterances", "ref_tokens"]
        for s in report.sources:
            header += [f"wer_{s}", f"wer_utt_mean_{s}", f"sim_o_{s}"]
        writer.writerow(header)
        for row in list(report.rows) + [report.overall]:
            vals = [row.name, row.n_utterances, row.ref_tokens]
            for s in report.sources:
                vals += [f"{row.wer[s]:.6f}", f"{row.wer_utt_mean[s]:.6f}",
                         f"{row.sim_o[s]:.6f}"]
            writer.writerow(vals)
    return path


def read_report_csv(path) -> EvalReport:
    path = Path(path)
    with path.open() as fh:
        reader = csv.reader(fh)
        header = next(reader)
        sources = [c[len("wer_"):] for c in header
                   if c.startswith("wer_") and not c.startswith("wer_utt_mean_")]
        rows = []
        overall = None
        for parts in reader:
            row = ReportRow(name=parts[0], n_utterances=int(parts[1]),
                            ref_tokens=int(parts[2]))
            for i, s in enumerate(sources):
                base = 3 + 3 * i
                row.wer[s] = float(parts[base])
                row.wer_utt_mean[s] = float(parts[base + 1])
                row.sim_o[s] = float(parts[base + 2])
            if row.name == "overall":
                overall = row
            else:
                rows.append(row)
    if overall is None:
        raise DataError(f"{path}: missing overall row")
    return EvalReport(sources, rows, overall)


def render_table(report: EvalReport) -> str:
    """Aligned text table: one block for WER, one for Sim-o."""
    lines = []
    for metric, values in (("WER", "wer"), ("Sim-o", "sim_o")):
        lines.append(metric)
        labels = [_COLUMN_LABEL.get(s, s) for s in report.sources]
        head = ["group".ljust(12), "n".rjust(6)] + [lb.rjust(10) for lb in labels]
        lines.append("  ".join(head))
        for row in list(report.rows) + [report.overall]:
            cells = [row.name.ljust(12), str(row.n_utterances).rjust(6)]
            for s in report.sources:
                cells.append(f"{getattr(row, values)[s]:.4f}".rjust(10))
            lines.append("  ".join(cells))
        lines.append("")
    return "\n".join(lines)
