"""Acceptance suite: one test per criterion, run with `pytest -v -s`.

Each test prints a single line `ACCEPTANCE <nn> PASS <slug> <measurements>`
after its assertions; pytest -v adds the per-criterion pass/fail verdict.
The training criteria (6, 7, 8) build their corpora and train from scratch;
the whole suite stays well inside the stated runtime budgets.
"""

import json
import time
from itertools import combinations, product
from pathlib import Path

import numpy as np
import pytest

import flowfill as ff
from flowfill import duration_infill as di
from flowfill import duration_prompted as dp
from flowfill.audio_model import forward_vector_field, init_audio_params
from flowfill.autodiff import backward, no_grad
from flowfill.cli import main as cli_main
from flowfill.corpus import align, oracle_transcribe
from flowfill.evaluation import edit_distance, realize_durations, sim_o, speaker_embedding
from flowfill.flow import OTPathConfig, integrate_flow, masked_audio_cfm_loss, target_field
from flowfill.masking import MaskPolicy, sample_mask
from flowfill.toy2d import Toy2dConfig, run_toy2d


def _report(num, slug, **values):
    detail = " ".join(f"{k}={v}" for k, v in values.items())
    print(f"\nACCEPTANCE {num:02d} PASS {slug} {detail}")


# -- 1: OT-path exactness ---------------------------------------------------------

def test_criterion_01_ot_path_exactness():
    rng = np.random.default_rng(0)
    cfg = OTPathConfig(0.05)
    x0 = rng.normal(size=(8, 5))
    x1 = rng.normal(size=(8, 5))
    start = time.time()
    worst = 0.0
    for steps in (1, 4, 32):
        for method in ("euler", "midpoint"):
            out = integrate_flow(lambda x, t: target_field(x, x1, t, cfg),
                                 x0, steps, method)
            worst = max(worst, float(np.max(np.abs(out - (cfg.sigma_min * x0 + x1)))))
    elapsed = time.time() - start
    assert worst < 1e-6
    assert elapsed < 1.0
    _report(1, "ot-path-exactness", max_abs_err=f"{worst:.2e}",
            runtime=f"{elapsed:.3f}s")


# -- 2: constant-speed invariant ----------------------------------------------------

def test_criterion_02_constant_speed():
    rng = np.random.default_rng(1)
    cfg = OTPathConfig(0.05)
    x0 = rng.normal(size=(6, 4))
    x1 = rng.normal(size=(6, 4))
    values = []
    for t in np.linspace(0.0, 1.0, 100):
        x_t = (1.0 - (1.0 - cfg.sigma_min) * t) * x0 + t * x1
        values.append(target_field(x_t, x1, t, cfg))
    values = np.array(values)
    spread = float(np.max(np.abs(values - values[0])))
    assert spread < 1e-10
    _report(2, "constant-speed", max_variation=f"{spread:.2e}")


# -- 3: gradient fidelity -------------------------------------------------------------

def _sweep_gradients(params, loss_value, h=1e-4, tol=1e-3):
    loss = loss_value()
    params.zero_grads()
    backward(loss)
    analytic = {name: t.grad.copy() for name, t in params.items()}
    ok = total = 0
    for name, tensor in params.items():
        flat = tensor.data.ravel()
        an = analytic[name].ravel()
        for idx in range(flat.size):
            old = flat[idx]
            flat[idx] = old + h
            with no_grad():
                up = loss_value()
            flat[idx] = old - h
            with no_grad():
                down = loss_value()
            flat[idx] = old
            fd = (float(up.data) - float(down.data)) / (2 * h)
            rel = abs(fd - an[idx]) / max(abs(fd), abs(an[idx]), 1e-8)
            total += 1
            ok += rel < tol
    return ok, total


def test_criterion_03_gradient_fidelity():
    start = time.time()
    rng = np.random.default_rng(2)
    results = {}

    audio_cfg = ff.AudioModelConfig(layers=2, heads=2, model_dim=16, ffn_dim=24,
                                    mel_dim=6, vocab=5, char_emb_dim=8)
    audio_params = init_audio_params(audio_cfg, 0)
    n = 7
    x1 = rng.normal(size=(n, 6))
    z = rng.integers(0, 5, size=n)
    mask = rng.random(n) < 0.5
    mask[0] = True
    mask[-1] = False
    path = OTPathConfig(1e-5)
    x_t, x0 = ff.sample_conditional(x1, 0.37, path, rng)
    u = target_field(x_t, x1, 0.37, path)
    x_ctx = ff.apply_context(x1, mask)

    def audio_loss():
        v = forward_vector_field(x_t, x_ctx, z, 0.37, audio_params, audio_cfg)
        return masked_audio_cfm_loss(v, u, mask)

    results["audio"] = (audio_params.n_params(),
                        *_sweep_gradients(audio_params, audio_loss))

    infill_cfg = di.DurInfillConfig(layers=2, heads=2, model_dim=12, ffn_dim=16,
                                    conv_layers=1, vocab=5, char_emb_dim=8,
                                    dur_emb_dim=8, max_duration=12)
    infill_params = di.init_infill_params(infill_cfg, 1)
    y = rng.integers(0, 5, size=7)
    target = rng.integers(1, 9, size=7)
    char_mask = rng.random(7) < 0.5
    char_mask[0] = True

    def infill_loss():
        inputs = di.build_duration_inputs(y, target, char_mask, infill_params, infill_cfg)
        pred = di.predict_log_durations_infill(inputs, infill_params, infill_cfg)
        return di.masked_log_mse(pred, target, char_mask)

    results["dur_infill"] = (infill_params.n_params(),
                             *_sweep_gradients(infill_params, infill_loss))

    prompt_cfg = dp.PromptEncoderConfig(layers=2, heads=2, model_dim=12, ffn_dim=16,
                                        prenet_layers=1, prompt_frames=5, mel_dim=4,
                                        vocab=5, head_hidden=8)
    prompt_params = dp.init_prompted_params(prompt_cfg, 2)
    x_p = rng.normal(size=(5, 4))
    y2 = rng.integers(0, 5, size=6)
    target2 = rng.integers(1, 9, size=6)

    def prompted_loss():
        h_c = dp.encode_prompted(x_p, y2, prompt_params, prompt_cfg)
        pred = dp.predict_log_durations_prompted(h_c, prompt_params, prompt_cfg)
        return dp.dur_loss(pred, target2)

    results["dur_prompted"] = (prompt_params.n_params(),
                               *_sweep_gradients(prompt_params, prompted_loss))

    elapsed = time.time() - start
    summary = {}
    for name, (n_params, ok, total) in results.items():
        assert n_params <= 5000, f"{name}: {n_params} params exceeds the 5k budget"
        assert ok / total >= 0.99, f"{name}: only {ok}/{total} gradients agree"
        summary[name] = f"{ok}/{total}({n_params}p)"
    assert elapsed < 120.0
    _report(3, "gradient-fidelity", runtime=f"{elapsed:.1f}s", **summary)


# -- 4: mask-policy statistics -------------------------------------------------------

def test_criterion_04_mask_policy_statistics():
    rng = np.random.default_rng(3)
    policy = MaskPolicy()
    n = 200
    draws = 10_000
    full = none = 0
    fractions = []
    for _ in range(draws):
        mask = sample_mask(n, policy, rng)
        s = int(mask.sum())
        if s == n:
            full += 1
        elif s == 0:
            none += 1
        else:
            fractions.append(s / n)
    f_random = len(fractions) / draws
    f_full = full / draws
    f_none = none / draws
    frac_mean = float(np.mean(fractions))
    assert abs(f_random - 0.50) < 0.02
    assert abs(f_full - 0.45) < 0.02
    assert abs(f_none - 0.05) < 0.02
    assert abs(frac_mean - 0.65) < 0.02
    _report(4, "mask-policy-statistics",
            branches=f"({f_random:.3f},{f_full:.3f},{f_none:.3f})",
            random_fraction_mean=f"{frac_mean:.3f}")


# -- 5: loss-weighting contract -------------------------------------------------------

def test_criterion_05_loss_weighting_contract():
    v = np.array([[1.0], [1.0], [0.0], [2.0], [0.0], [0.0]])
    u = np.zeros((6, 1))
    mask = np.array([True, True, True, False, False, False])
    got = masked_audio_cfm_loss(v, u, mask)
    assert got == pytest.approx(0.9 * (2 / 3) + 0.1 * (4 / 3), abs=1e-15)

    rng = np.random.default_rng(4)
    a = rng.normal(size=(5, 3))
    b = rng.normal(size=(5, 3))
    err = (a - b) ** 2
    full = np.ones(5, dtype=bool)
    assert masked_audio_cfm_loss(a, b, full) == pytest.approx(0.9 * err.mean(), abs=1e-15)
    empty = np.zeros(5, dtype=bool)
    assert masked_audio_cfm_loss(a, b, empty) == pytest.approx(0.1 * err.mean(), abs=1e-15)
    mixed = np.array([True, False, True, False, False])
    expected = 0.9 * err[mixed].mean() + 0.1 * err[~mixed].mean()
    assert masked_audio_cfm_loss(a, b, mixed) == pytest.approx(expected, abs=1e-15)
    _report(5, "loss-weighting-contract", fixtures=4)


# -- 6: duration-rule recovery ---------------------------------------------------------

DUR_TRAIN = ff.TrainConfig(total_steps=1200, warmup_steps=100, peak_lr=2e-3,
                           batch_frames=1024, seed=2, log_every=300)


def _rule_spec(speakers=None, seed=11):
    # default base durations are exactly 2 + (char index mod 3)
    return ff.SynthSpec(alphabet="abcdef", mel_dim=16, noise_std=0.05, seed=seed,
                        speakers=speakers or [ff.Speaker("spk0")])


def test_criterion_06_duration_rule_recovery():
    spec = _rule_spec()
    rng = np.random.default_rng(5)
    records = ff.make_corpus(spec, 500, rng, min_chars=8, max_chars=14)
    eval_records = ff.make_corpus(spec, 50, np.random.default_rng(99),
                                  min_chars=8, max_chars=14, id_prefix="ev")

    t0 = time.time()
    infill = ff.InfillDurationRegressor(training=DUR_TRAIN, seed=2).fit(records)
    t_infill = time.time() - t0
    t0 = time.time()
    prompted = ff.PromptedDurationRegressor(training=DUR_TRAIN, seed=2).fit(records)
    t_prompted = time.time() - t0

    inf_sq = []
    pro_sq = []
    inf_hits = inf_total = pro_hits = pro_total = 0
    for rec in eval_records:
        m = rec.y.size
        char_mask = np.zeros(m, dtype=bool)
        char_mask[m // 2:] = True
        pred_log = infill.predict_log(rec.y, rec.durations, char_mask)
        inf_sq.extend(((pred_log - np.log(rec.durations))[char_mask] ** 2).tolist())
        realized = realize_durations(pred_log)[char_mask]
        inf_hits += int((realized == rec.durations[char_mask]).sum())
        inf_total += int(char_mask.sum())

        n_ctx = int(rec.durations[:m // 2].sum())
        x_p = rec.x[:n_ctx][-30:]
        pred_log2 = prompted.predict_log(x_p, rec.y)
        pro_sq.extend(((pred_log2 - np.log(rec.durations))[char_mask] ** 2).tolist())
        realized2 = realize_durations(pred_log2)[char_mask]
        pro_hits += int((realized2 == rec.durations[char_mask]).sum())
        pro_total += int(char_mask.sum())

    inf_mse = float(np.mean(inf_sq))
    pro_mse = float(np.mean(pro_sq))
    assert inf_mse < 0.01 and inf_hits / inf_total >= 0.99
    assert pro_mse < 0.01 and pro_hits / pro_total >= 0.99
    assert t_infill < 600 and t_prompted < 600
    _report(6, "duration-rule-recovery",
            infill=f"mse={inf_mse:.5f},acc={inf_hits / inf_total:.3f},{t_infill:.0f}s",
            prompted=f"mse={pro_mse:.5f},acc={pro_hits / pro_total:.3f},{t_prompted:.0f}s")


# -- 7: speaker-prompt sensitivity ------------------------------------------------------

def test_criterion_07_speaker_prompt_sensitivity():
    speakers = ff.make_speakers(21, 16, [("s1x", 1.0), ("s2x", 2.0)], offset_scale=2.0)
    spec = _rule_spec(speakers=speakers, seed=21)
    records = ff.make_corpus(spec, 500, np.random.default_rng(6), min_chars=8, max_chars=14)
    tcfg = ff.TrainConfig(total_steps=1500, warmup_steps=100, peak_lr=2e-3,
                          batch_frames=1024, seed=3, log_every=300)
    prompted = ff.PromptedDurationRegressor(training=tcfg, seed=3).fit(records)
    infill = ff.InfillDurationRegressor(training=tcfg, seed=3).fit(records)

    eval_rng = np.random.default_rng(77)
    texts = [ff.make_corpus(spec, 1, np.random.default_rng(1000 + i),
                            min_chars=10, max_chars=10)[0].y for i in range(10)]
    carrier = np.arange(6) % 6
    rule1 = spec.duration_rule("s1x")
    rule2 = spec.duration_rule("s2x")

    slow_total = fast_total = 0.0
    for y in texts:
        u1 = ff.synth_utterance(spec, "s1x", carrier, eval_rng)
        u2 = ff.synth_utterance(spec, "s2x", carrier, eval_rng)
        slow_total += realize_durations(prompted.predict_log(u1.x[-30:], y)).mean()
        fast_total += realize_durations(prompted.predict_log(u2.x[-30:], y)).mean()
    prompted_ratio = fast_total / slow_total
    assert prompted_ratio >= 1.8

    ctx1_total = ctx2_total = 0.0
    for y in texts:
        m = y.size
        char_mask = np.zeros(m, dtype=bool)
        char_mask[m // 2:] = True
        p1 = realize_durations(infill.predict_log(y, rule1[y], char_mask))[char_mask]
        p2 = realize_durations(infill.predict_log(y, rule2[y], char_mask))[char_mask]
        ctx1_total += p1.mean()
        ctx2_total += p2.mean()
        # without 2x-consistent context the infill predictor cannot see the
        # speaker at all: identical inputs give identical outputs
        np.testing.assert_array_equal(
            infill.predict_log(y, rule1[y], char_mask),
            infill.predict_log(y, rule1[y].copy(), char_mask))
    infill_ratio = ctx2_total / ctx1_total
    assert infill_ratio >= 1.8
    _report(7, "speaker-prompt-sensitivity",
            prompted_ratio=f"{prompted_ratio:.2f}", infill_ratio=f"{infill_ratio:.2f}")


# -- 8: end-to-end continuous completion ---------------------------------------------------

def test_criterion_08_end_to_end_completion():
    start = time.time()
    speakers = ff.make_speakers(31, 16, [("spkA", 1.0), ("spkB", 1.0)], offset_scale=2.0)
    spec = ff.SynthSpec(alphabet="abcdef", mel_dim=16, noise_std=0.05, seed=31,
                        speakers=speakers)
    rng = np.random.default_rng(7)
    records = ff.make_corpus(spec, 2700, rng, min_chars=20, max_chars=30)
    total_frames = sum(r.n_frames for r in records)
    assert 150_000 <= total_frames <= 260_000, "corpus should be ~200k frames"
    test_records = records[:24]
    train_records = records[24:]

    audio_tcfg = ff.TrainConfig(total_steps=1200, warmup_steps=100, peak_lr=2e-3,
                                batch_frames=1024, seed=8, log_every=300)
    audio = ff.AudioInfiller(training=audio_tcfg, seed=8).fit(train_records)

    dur_tcfg = ff.TrainConfig(total_steps=1200, warmup_steps=100, peak_lr=2e-3,
                              batch_frames=1024, seed=9, log_every=300)
    infill = ff.InfillDurationRegressor(training=dur_tcfg, seed=9).fit(train_records)
    prompted = ff.PromptedDurationRegressor(training=dur_tcfg, seed=9).fit(train_records)
    train_time = time.time() - start
    assert train_time < 3600, "desk training must stay under an hour"

    report, details = ff.continuous_completion_protocol(
        test_records, spec, (audio.params_, audio.config_),
        dur_models={"infill": (infill.params_, infill.config_),
                    "prompted": (prompted.params_, prompted.config_)},
        sources=("ground_truth", "infill", "prompted"), ode_steps=16, seed=41)

    wer_gt = report.overall.wer["ground_truth"]
    wer_inf = report.overall.wer["infill"]
    wer_pro = report.overall.wer["prompted"]
    assert wer_gt <= 0.10
    assert wer_inf <= 0.20
    assert wer_pro <= 0.20

    # speaker check: generated half closer to the prompt than an
    # other-speaker reference utterance is
    other = {"spkA": next(r for r in test_records if r.speaker_id == "spkB"),
             "spkB": next(r for r in test_records if r.speaker_id == "spkA")}
    wins = total = 0
    for row in details:
        if row["source"] != "ground_truth":
            continue
        ref = other[row["speaker"]]
        ref_sim = sim_o(row["prompt_embedding"], speaker_embedding(ref.x))
        gen_sim = sim_o(row["prompt_embedding"], row["generated_embedding"])
        wins += gen_sim > ref_sim
        total += 1
    assert wins / total >= 0.80
    _report(8, "end-to-end-completion",
            frames=total_frames, train_minutes=f"{train_time / 60:.1f}",
            wer=f"gt={wer_gt:.3f},infill={wer_inf:.3f},prompted={wer_pro:.3f}",
            speaker_wins=f"{wins}/{total}")


# -- 9: metric oracles ----------------------------------------------------------------------

def test_criterion_09_metric_oracles():
    # (a) wer against the recursive definition, every pair of length <= 6
    # over a 3-token alphabet
    seqs = [tuple(p) for ln in range(7) for p in product(range(3), repeat=ln)]
    memo = {}

    def recursive(r, h):
        if not r:
            return len(h)
        if not h:
            return len(r)
        key = (r, h)
        v = memo.get(key)
        if v is None:
            v = min(recursive(r[1:], h) + 1,
                    recursive(r, h[1:]) + 1,
                    recursive(r[1:], h[1:]) + (r[0] != h[0]))
            memo[key] = v
        return v

    pairs = 0
    for ref in seqs:
        if not ref:
            continue
        for hyp in seqs:
            assert edit_distance(ref, hyp) == recursive(ref, hyp)
            pairs += 1

    # (b) align against exhaustive monotone segmentation for rows <= 8
    spec = ff.SynthSpec(alphabet="abc", mel_dim=8, noise_std=0.05, seed=1)
    protos = spec.prototypes("spk0")
    checked = 0
    rng = np.random.default_rng(10)
    for n in range(2, 9):
        for m in range(1, min(n, 3) + 1):
            for _ in range(4):
                x = rng.normal(size=(n, 8))
                y = rng.integers(0, 3, size=m)
                durs = align(x, y, spec, "spk0")
                best_cost = None
                best_durs = None
                for cuts in combinations(range(1, n), m - 1):
                    edges = [0, *cuts, n]
                    cost = sum(((x[edges[j]:edges[j + 1]] - protos[y[j]]) ** 2).sum()
                               for j in range(m))
                    if best_cost is None or cost < best_cost:
                        best_cost = cost
                        best_durs = [edges[j + 1] - edges[j] for j in range(m)]
                np.testing.assert_array_equal(durs, best_durs)
                checked += 1
    _report(9, "metric-oracles", wer_pairs=pairs, align_cases=checked)


# -- 10: filtering protocol ---------------------------------------------------------------

def test_criterion_10_filtering_protocol():
    spec = ff.SynthSpec(alphabet="abc", mel_dim=8, noise_std=0.05, seed=1)
    rng = np.random.default_rng(12)
    clean = [ff.synth_utterance(spec, "spk0", [0, 1, 2, 0, 1], rng, utt_id=f"clean{i}")
             for i in range(4)]
    garbage = ff.synth_utterance(spec, "spk0", [0, 1, 2, 0, 1, 2], rng, utt_id="garbage")
    xg = garbage.x.copy()
    xg[::2] = 25.0
    garbage = ff.UtteranceRecord("garbage", "spk0", garbage.y, garbage.durations, xg)
    protos = spec.prototypes("spk0")
    inserts = ff.UtteranceRecord("inserts", "spk0", np.array([0, 1]), np.array([3, 3]),
                                 protos[np.array([0, 1, 0, 1, 0, 1])])

    out = ff.filter_corpus(clean + [garbage, inserts], spec,
                           wer_threshold=0.2, ctc_threshold=0.9)
    states = {r.utt_id: r.filter_state for r in out}
    for i in range(4):
        assert states[f"clean{i}"] == "kept"
    assert states["garbage"] == "dropped"
    assert states["inserts"] == "restored"
    assert len(out) == 6
    from flowfill.evaluation import wer as wer_fn
    for rec in out:
        hyp, _ = oracle_transcribe(rec.x, spec, rec.speaker_id)
        if rec.filter_state == "restored":
            assert wer_fn(rec.y, hyp) > 0.2
    _report(10, "filtering-protocol", states=str(sorted(states.values())))


# -- 11: toy2d distribution recovery ----------------------------------------------------------

def test_criterion_11_toy2d_distribution_recovery():
    start = time.time()
    samples, diag = run_toy2d(Toy2dConfig(seed=0))
    elapsed = time.time() - start
    assert samples.shape == (2000, 2)
    assert diag["fraction_within_3_sigma"] >= 0.95
    assert abs(diag["occupancy"][0] - 0.5) <= 0.1
    assert abs(diag["occupancy"][1] - 0.5) <= 0.1
    targets = np.asarray(diag["target_modes"])
    means = np.asarray(diag["mode_means"])
    for k in range(2):
        assert np.linalg.norm(means[k] - targets[k]) <= 0.1 * np.linalg.norm(targets[k])
    assert elapsed < 300.0
    _report(11, "toy2d-distribution-recovery",
            within_3sigma=f"{diag['fraction_within_3_sigma']:.3f}",
            occupancy=f"({diag['occupancy'][0]:.3f},{diag['occupancy'][1]:.3f})",
            runtime=f"{elapsed:.0f}s")


# -- 12: CLI determinism ------------------------------------------------------------------------

CLI_CONFIG = {
    "seed": 5,
    "corpus": {"n_utterances": 10, "min_chars": 4, "max_chars": 7,
               "speakers": [{"speaker_id": "spk0", "stretch": 1.0},
                            {"speaker_id": "spk1", "stretch": 1.0}],
               "offset_scale": 1.5},
    "audio_model": {"layers": 2, "heads": 2, "model_dim": 16, "ffn_dim": 24,
                    "char_emb_dim": 8},
    "dur_infill": {"layers": 2, "heads": 2, "model_dim": 16, "ffn_dim": 24,
                   "conv_layers": 1, "char_emb_dim": 8, "dur_emb_dim": 8},
    "dur_prompted": {"layers": 2, "heads": 2, "model_dim": 16, "ffn_dim": 24,
                     "prenet_layers": 1, "prompt_frames": 8, "head_hidden": 8},
    "train_audio": {"total_steps": 8, "warmup_steps": 2, "peak_lr": 1e-3,
                    "batch_frames": 128, "log_every": 4},
    "train_duration": {"total_steps": 8, "warmup_steps": 2, "peak_lr": 1e-3,
                       "batch_frames": 128, "log_every": 4},
    "eval": {"ode_steps": 2, "sources": ["ground_truth", "infill", "prompted"]},
    "toy2d": {"train_steps": 40, "warmup_steps": 5, "n_samples": 50, "ode_steps": 4},
}


def _tree_bytes(root: Path) -> dict:
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_12_cli_determinism(tmp_path):
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(CLI_CONFIG))
    cfg = str(cfg_path)

    def run_twice(name, extra, label=None):
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / f"{label or name}_{tag}"
            argv = [name, *extra, "--out", str(out)]
            assert cli_main(argv) == 0, f"{name} failed"
            outs.append(out)
        assert _tree_bytes(outs[0]) == _tree_bytes(outs[1]), f"{name} not byte-identical"
        return outs[0]

    data = run_twice("synth-data", ["--config", cfg])
    run_twice("filter", ["--config", cfg, "--data", str(data)])
    audio = run_twice("train-audio", ["--config", cfg, "--data", str(data)])
    dur_i = run_twice("train-dur", ["--config", cfg, "--data", str(data),
                                    "--style", "infill"], label="dur_infill")
    dur_p = run_twice("train-dur", ["--config", cfg, "--data", str(data),
                                    "--style", "prompted"], label="dur_prompted")
    utt = (data / "manifest.tsv").read_text().splitlines()[0].split("\t")[0]
    run_twice("infill", ["--config", cfg, "--data", str(data),
                         "--audio", str(audio / "audio.ckpt"), "--utterance", utt])
    ev = run_twice("eval", ["--config", cfg, "--data", str(data),
                            "--audio", str(audio / "audio.ckpt"),
                            "--dur-infill", str(dur_i / "dur_infill.ckpt"),
                            "--dur-prompted", str(dur_p / "dur_prompted.ckpt")])
    run_twice("toy2d", ["--config", cfg])
    run_twice("report", ["--report", str(ev / "report.csv")])
    _report(12, "cli-determinism", commands=8)
