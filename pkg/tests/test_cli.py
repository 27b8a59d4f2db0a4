import json
from pathlib import Path

import pytest

from flowfill.cli import main
from flowfill.runconfig import DEFAULTS, load_config, resolve_config
from flowfill.errors import ConfigError

FAST_CONFIG = {
    "seed": 4,
    "corpus": {
        "n_utterances": 10,
        "min_chars": 4,
        "max_chars": 7,
        "speakers": [{"speaker_id": "spk0", "stretch": 1.0},
                     {"speaker_id": "spk1", "stretch": 1.0}],
        "offset_scale": 1.5,
    },
    "audio_model": {"layers": 2, "heads": 2, "model_dim": 16, "ffn_dim": 24,
                    "char_emb_dim": 8},
    "dur_infill": {"layers": 2, "heads": 2, "model_dim": 16, "ffn_dim": 24,
                   "conv_layers": 1, "char_emb_dim": 8, "dur_emb_dim": 8},
    "train_audio": {"total_steps": 8, "warmup_steps": 2, "peak_lr": 1e-3,
                    "batch_frames": 128, "log_every": 4},
    "train_duration": {"total_steps": 8, "warmup_steps": 2, "peak_lr": 1e-3,
                       "batch_frames": 128, "log_every": 4},
    "eval": {"ode_steps": 2, "sources": ["ground_truth", "infill"]},
    "toy2d": {"train_steps": 40, "warmup_steps": 5, "n_samples": 50, "ode_steps": 4},
}


@pytest.fixture(scope="module")
def cfg_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "run.json"
    path.write_text(json.dumps(FAST_CONFIG))
    return str(path)


@pytest.fixture(scope="module")
def pipeline(cfg_path, tmp_path_factory):
    """synth-data + train-audio + train-dur once for the whole module."""
    root = tmp_path_factory.mktemp("pipe")
    assert main(["synth-data", "--config", cfg_path, "--out", str(root / "data")]) == 0
    assert main(["train-audio", "--config", cfg_path, "--data", str(root / "data"),
                 "--out", str(root / "audio")]) == 0
    assert main(["train-dur", "--config", cfg_path, "--data", str(root / "data"),
                 "--style", "infill", "--out", str(root / "dur")]) == 0
    return root


def _tree_bytes(root: Path) -> dict:
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_config_defaults_and_unknown_keys():
    resolved = resolve_config({})
    assert resolved == DEFAULTS
    with pytest.raises(ConfigError):
        resolve_config({"corpus": {"alphabet_size": 6}})
    with pytest.raises(ConfigError):
        resolve_config({"bogus": 1})


def test_config_seed_override():
    assert resolve_config({}, seed_override=9)["seed"] == 9


def test_config_dir_env_var(tmp_path, monkeypatch):
    (tmp_path / "named.json").write_text("{}")
    monkeypatch.setenv("FLOWFILL_CONFIG_DIR", str(tmp_path))
    assert load_config("named.json")["seed"] == 0
    with pytest.raises(ConfigError):
        load_config("missing.json")


def test_synth_data_outputs(pipeline):
    data = pipeline / "data"
    assert (data / "manifest.tsv").exists()
    assert (data / "resolved_config.json").exists()
    assert len(list((data / "mels").glob("*.mel"))) == 10
    resolved = json.loads((data / "resolved_config.json").read_text())
    assert resolved["seed"] == 4


def test_synth_data_rerun_is_byte_identical(cfg_path, pipeline, tmp_path):
    assert main(["synth-data", "--config", cfg_path, "--out", str(tmp_path / "again")]) == 0
    assert _tree_bytes(pipeline / "data") == _tree_bytes(tmp_path / "again")


def test_train_audio_rerun_is_byte_identical(cfg_path, pipeline, tmp_path):
    assert main(["train-audio", "--config", cfg_path, "--data", str(pipeline / "data"),
                 "--out", str(tmp_path / "audio2")]) == 0
    assert _tree_bytes(pipeline / "audio") == _tree_bytes(tmp_path / "audio2")


def test_refuses_nonempty_out_without_force(cfg_path, pipeline, capsys):
    code = main(["synth-data", "--config", cfg_path, "--out", str(pipeline / "data")])
    assert code == 2
    err = capsys.readouterr().err
    assert err.startswith("flowfill-error code=config")


def test_force_allows_rewrite(cfg_path, pipeline):
    assert main(["synth-data", "--config", cfg_path, "--out", str(pipeline / "data"),
                 "--force"]) == 0


def test_filter_command(cfg_path, pipeline, tmp_path):
    out = tmp_path / "filtered"
    assert main(["filter", "--config", cfg_path, "--data", str(pipeline / "data"),
                 "--out", str(out)]) == 0
    states = [line.split("\t")[5] for line in (out / "manifest.tsv").read_text().splitlines()]
    assert set(states) <= {"kept", "dropped", "restored"}


def test_infill_command_and_outputs(cfg_path, pipeline, tmp_path):
    out = tmp_path / "inf"
    manifest = (pipeline / "data" / "manifest.tsv").read_text().splitlines()
    utt = manifest[0].split("\t")[0]
    assert main(["infill", "--config", cfg_path, "--data", str(pipeline / "data"),
                 "--audio", str(pipeline / "audio" / "audio.ckpt"),
                 "--utterance", utt, "--out", str(out)]) == 0
    meta = json.loads((out / "infill_meta.json").read_text())
    assert meta["utt_id"] == utt
    assert (out / f"infilled_{utt}.mel").exists()


def test_infill_learned_source_checks_checkpoint_style(cfg_path, pipeline, tmp_path):
    manifest = (pipeline / "data" / "manifest.tsv").read_text().splitlines()
    utt = manifest[0].split("\t")[0]
    code = main(["infill", "--config", cfg_path, "--data", str(pipeline / "data"),
                 "--audio", str(pipeline / "audio" / "audio.ckpt"),
                 "--utterance", utt, "--duration-source", "prompted",
                 "--dur", str(pipeline / "dur" / "dur_infill.ckpt"),
                 "--out", str(tmp_path / "x")])
    assert code == 2


def test_eval_and_report_commands(cfg_path, pipeline, tmp_path, capsys):
    out = tmp_path / "eval"
    assert main(["eval", "--config", cfg_path, "--data", str(pipeline / "data"),
                 "--audio", str(pipeline / "audio" / "audio.ckpt"),
                 "--dur-infill", str(pipeline / "dur" / "dur_infill.ckpt"),
                 "--out", str(out)]) == 0
    assert (out / "report.csv").exists()
    table = (out / "report.txt").read_text()
    assert "overall" in table
    capsys.readouterr()
    assert main(["report", "--report", str(out / "report.csv")]) == 0
    shown = capsys.readouterr().out
    assert "overall" in shown


def test_eval_rerun_is_byte_identical(cfg_path, pipeline, tmp_path):
    outs = []
    for name in ("e1", "e2"):
        out = tmp_path / name
        assert main(["eval", "--config", cfg_path, "--data", str(pipeline / "data"),
                     "--audio", str(pipeline / "audio" / "audio.ckpt"),
                     "--dur-infill", str(pipeline / "dur" / "dur_infill.ckpt"),
                     "--out", str(out)]) == 0
        outs.append(out)
    assert _tree_bytes(outs[0]) == _tree_bytes(outs[1])


def test_toy2d_command(cfg_path, tmp_path):
    out = tmp_path / "toy"
    assert main(["toy2d", "--config", cfg_path, "--out", str(out)]) == 0
    diag = json.loads((out / "diagnostics.json").read_text())
    assert set(diag) >= {"fraction_within_3_sigma", "occupancy", "mode_means"}
    assert (out / "samples.csv").read_text().startswith("x,y")


def test_missing_manifest_is_data_error(cfg_path, tmp_path, capsys):
    code = main(["train-audio", "--config", cfg_path, "--data", str(tmp_path / "nope"),
                 "--out", str(tmp_path / "out")])
    assert code == 3
    assert capsys.readouterr().err.startswith("flowfill-error code=data")


def test_bad_json_config_is_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code = main(["synth-data", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert code == 2
