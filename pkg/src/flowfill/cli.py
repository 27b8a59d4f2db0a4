"""Operator surface: deterministic batch commands over the library.

Every command resolves one declarative config, writes its artifacts plus
the resolved config into --out, and refuses to reuse a nonempty output
directory unless --force is given. Reruns with identical config and seed
produce byte-identical outputs.

Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import runconfig as rc
from .corpus import filter_corpus, make_corpus
from .errors import ConfigError, DataError, FlowfillError, NumericError
from .estimators import (
    AudioInfiller,
    InfillDurationRegressor,
    PromptedDurationRegressor,
    load_estimator,
)
from .evaluation import (
    InfillRequest,
    continuous_completion_protocol,
    infill,
    read_report_csv,
    render_table,
    write_report_csv,
)
from .storage import read_manifest, write_manifest, write_mel
from .toy2d import run_toy2d
from .training import write_trace


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 0
    try:
        args.handler(args)
        return 0
    except FlowfillError as e:
        _fail(e.code, str(e))
        return e.exit_code
    except ValueError as e:
        _fail("data", str(e))
        return DataError.exit_code
    except FloatingPointError as e:
        _fail("numeric", str(e))
        return NumericError.exit_code


def _fail(code: str, message: str):
    print(f"flowfill-error code={code} msg={json.dumps(message)}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowfill",
        description="Flow-matching speech infilling at desk scale.",
    )
    sub = parser.add_subparsers(dest="command")
    parser.set_defaults(command=None)

    def add(name, handler, help_text, needs_config=True, needs_out=True):
        p = sub.add_parser(name, help=help_text)
        if needs_config:
            p.add_argument("--config", required=True,
                           help="config file (path, or name under $FLOWFILL_CONFIG_DIR)")
            p.add_argument("--seed", type=int, default=None, help="override config seed")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")
            p.add_argument("--force", action="store_true",
                           help="allow writing into a nonempty output directory")
        p.set_defaults(handler=handler)
        return p

    add("synth-data", cmd_synth_data, "generate a synthetic corpus")

    p = add("filter", cmd_filter, "apply the WER/confidence filtering protocol")
    p.add_argument("--data", required=True, help="corpus directory or manifest file")

    p = add("train-audio", cmd_train_audio, "train the audio vector-field model")
    p.add_argument("--data", required=True)

    p = add("train-dur", cmd_train_dur, "train a duration predictor")
    p.add_argument("--data", required=True)
    p.add_argument("--style", required=True, choices=["infill", "prompted"])

    p = add("infill", cmd_infill, "regenerate a masked span of one utterance")
    p.add_argument("--data", required=True)
    p.add_argument("--audio", required=True, help="audio model checkpoint")
    p.add_argument("--dur", default=None, help="duration predictor checkpoint")
    p.add_argument("--utterance", required=True, help="utterance id")
    p.add_argument("--duration-source", default="ground_truth",
                   choices=["ground_truth", "infill", "prompted"])
    p.add_argument("--span", default=None,
                   help="char span START:STOP to regenerate (default: second half)")

    p = add("eval", cmd_eval, "continuous sentence completion report")
    p.add_argument("--data", required=True)
    p.add_argument("--audio", required=True)
    p.add_argument("--dur-infill", default=None)
    p.add_argument("--dur-prompted", default=None)

    add("toy2d", cmd_toy2d, "2-D mixture sanity run of the flow sampler")

    p = add("report", cmd_report, "render an evaluation report as an aligned table",
            needs_config=False, needs_out=False)
    p.add_argument("--report", required=True, help="report CSV file")
    p.add_argument("--out", default=None, help="also write report.txt here")
    p.add_argument("--force", action="store_true")

    return parser


def _prepare_out(args) -> Path:
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not args.force:
        raise ConfigError(f"output directory {out} is not empty (use --force)")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args):
    return rc.load_config(args.config, seed_override=args.seed)


def _find_manifest(data: str) -> Path:
    p = Path(data)
    if p.is_dir():
        p = p / "manifest.tsv"
    if not p.exists():
        raise DataError(f"manifest not found: {p}")
    return p


def _records(args, config, drop_filtered=False):
    spec = rc.build_synth_spec(config)
    records = read_manifest(_find_manifest(args.data), spec)
    if not records:
        raise DataError(f"{args.data}: empty corpus")
    if drop_filtered:
        records = [r for r in records if r.filter_state != "dropped"]
        if not records:
            raise DataError(f"{args.data}: every record is dropped")
    return spec, records


def cmd_synth_data(args):
    config = _load(args)
    out = _prepare_out(args)
    spec = rc.build_synth_spec(config)
    c = config["corpus"]
    rng = np.random.default_rng(config["seed"])
    records = make_corpus(spec, c["n_utterances"], rng, min_chars=c["min_chars"],
                          max_chars=c["max_chars"],
                          avoid_adjacent_repeats=c["avoid_adjacent_repeats"])
    write_manifest(records, spec, out)
    rc.write_resolved(config, out)
    print(f"wrote {len(records)} utterances to {out}")


def cmd_filter(args):
    config = _load(args)
    spec, records = _records(args, config)
    out = _prepare_out(args)
    filtered = filter_corpus(records, spec, config["filter"]["wer_threshold"],
                             config["filter"]["ctc_threshold"])
    write_manifest(filtered, spec, out)
    rc.write_resolved(config, out)
    counts = {state: sum(r.filter_state == state for r in filtered)
              for state in ("kept", "dropped", "restored")}
    print(f"filter states: {counts}")


def cmd_train_audio(args):
    config = _load(args)
    _, records = _records(args, config, drop_filtered=True)
    out = _prepare_out(args)
    est = AudioInfiller(
        model=rc.build_audio_config(config),
        path=rc.build_ot_path(config),
        masking=rc.build_mask_policy(config),
        training=rc.build_train_config(config, "train_audio", config["seed"]),
        seed=config["seed"],
    )
    est.fit(records)
    est.save(out / "audio.ckpt")
    write_trace(est.trace_, out / "trace.csv")
    rc.write_resolved(config, out)
    print(f"trained audio model ({est.params_.n_params()} params), "
          f"final loss {est.trace_[-1]['loss']:.6f}")


def cmd_train_dur(args):
    config = _load(args)
    _, records = _records(args, config, drop_filtered=True)
    out = _prepare_out(args)
    if args.style == "infill":
        est = InfillDurationRegressor(
            model=rc.build_dur_infill_config(config),
            masking=rc.build_mask_policy(config),
            training=rc.build_train_config(config, "train_duration", config["seed"]),
            seed=config["seed"],
        )
    else:
        est = PromptedDurationRegressor(
            model=rc.build_dur_prompted_config(config),
            masking=rc.build_mask_policy(config),
            training=rc.build_train_config(config, "train_duration", config["seed"]),
            seed=config["seed"],
        )
    est.fit(records)
    est.save(out / f"dur_{args.style}.ckpt")
    write_trace(est.trace_, out / "trace.csv")
    rc.write_resolved(config, out)
    print(f"trained {args.style} duration model, final loss {est.trace_[-1]['loss']:.6f}")


def _load_audio(path):
    est = load_estimator(path)
    if not isinstance(est, AudioInfiller):
        raise ConfigError(f"{path}: not an audio model checkpoint")
    return est


def _dur_pair(path):
    est = load_estimator(path)
    if isinstance(est, InfillDurationRegressor):
        return "infill", (est.params_, est.config_)
    if isinstance(est, PromptedDurationRegressor):
        return "prompted", (est.params_, est.config_)
    raise ConfigError(f"{path}: not a duration predictor checkpoint")


def cmd_infill(args):
    config = _load(args)
    spec, records = _records(args, config)
    out = _prepare_out(args)
    by_id = {r.utt_id: r for r in records}
    if args.utterance not in by_id:
        raise DataError(f"utterance {args.utterance!r} not in manifest")
    rec = by_id[args.utterance]
    m = rec.y.size
    if args.span is None:
        start, stop = m // 2, m
    else:
        try:
            start, stop = (int(v) for v in args.span.split(":"))
        except Exception:
            raise ConfigError(f"bad --span {args.span!r}, expected START:STOP") from None
    if not 0 <= start < stop <= m:
        raise DataError(f"span {start}:{stop} outside [0, {m}]")
    char_mask = np.zeros(m, dtype=bool)
    char_mask[start:stop] = True
    bounds = np.concatenate([[0], np.cumsum(rec.durations)])
    ctx_rows = np.concatenate([np.arange(bounds[j], bounds[j + 1])
                               for j in range(m) if not char_mask[j]]) \
        if not char_mask.all() else np.array([], dtype=np.int64)

    audio = _load_audio(args.audio)
    dur_model = None
    if args.duration_source != "ground_truth":
        if args.dur is None:
            raise ConfigError(f"--duration-source {args.duration_source} needs --dur")
        style, dur_model = _dur_pair(args.dur)
        if style != args.duration_source:
            raise ConfigError(f"--dur checkpoint is {style!r}, expected "
                              f"{args.duration_source!r}")

    request = InfillRequest(rec.y, char_mask, rec.durations, rec.x[ctx_rows],
                            duration_source=args.duration_source,
                            ode_steps=config["infill"]["ode_steps"],
                            ode_method=config["infill"]["ode_method"],
                            seed=config["seed"],
                            min_dur=config["infill"]["min_dur"])
    result = infill((audio.params_, audio.config_), request, dur_model)
    write_mel(out / f"infilled_{rec.utt_id}.mel", result.mel)
    meta = {
        "utt_id": rec.utt_id,
        "speaker": rec.speaker_id,
        "span": [start, stop],
        "duration_source": args.duration_source,
        "durations": [int(d) for d in result.durations],
        "n_generated_frames": int(result.frame_mask.sum()),
    }
    (out / "infill_meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    rc.write_resolved(config, out)
    print(f"infilled {rec.utt_id} chars {start}:{stop} "
          f"({meta['n_generated_frames']} frames)")


def cmd_eval(args):
    config = _load(args)
    spec, records = _records(args, config, drop_filtered=True)
    out = _prepare_out(args)
    audio = _load_audio(args.audio)
    dur_models = {}
    for opt, expected in ((args.dur_infill, "infill"), (args.dur_prompted, "prompted")):
        if opt is not None:
            style, pair = _dur_pair(opt)
            if style != expected:
                raise ConfigError(f"{opt}: checkpoint is {style!r}, expected {expected!r}")
            dur_models[style] = pair
    sources = config["eval"]["sources"]
    report, _ = continuous_completion_protocol(
        records, spec, (audio.params_, audio.config_), dur_models,
        sources=sources, ode_steps=config["eval"]["ode_steps"],
        ode_method=config["eval"]["ode_method"], seed=config["seed"],
        group_by=config["eval"]["group_by"])
    write_report_csv(report, out / "report.csv")
    (out / "report.txt").write_text(render_table(report))
    rc.write_resolved(config, out)
    print(render_table(report))


def cmd_toy2d(args):
    config = _load(args)
    out = _prepare_out(args)
    cfg = rc.build_toy2d_config(config, config["seed"])
    samples, diagnostics = run_toy2d(cfg)
    lines = ["x,y"] + [f"{p[0]:.8g},{p[1]:.8g}" for p in samples]
    (out / "samples.csv").write_text("\n".join(lines) + "\n")
    (out / "diagnostics.json").write_text(
        json.dumps(diagnostics, sort_keys=True, indent=2) + "\n")
    rc.write_resolved(config, out)
    print(f"toy2d: {diagnostics['fraction_within_3_sigma']:.3f} of samples within "
          f"3 sigma, occupancy {diagnostics['occupancy']}")


def cmd_report(args):
    report = read_report_csv(args.report)
    table = render_table(report)
    if args.out:
        out = _prepare_out(args)
        (out / "report.txt").write_text(table)
    print(table)


if __name__ == "__main__":
    sys.exit(main())
