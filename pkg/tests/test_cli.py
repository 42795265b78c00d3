import os

import numpy as np
import orjson

from handlers.cli import dispatch
from services.agent import init_agent, save_agent
from services.corpus import read_manifest
from services.models import AgentConfig, AudioBuffer, SalienceConfig
from services.salience import init_salience_model, save_salience
from services.signal_io import read_wav, write_wav
from utils.file_utils import file_sha256

TINY_SALIENCE = ["--set", "extractor_channels=4,4,4,4", "--set", "gru_hidden=4",
                 "--set", "predictor_channels=4", "--set", "epochs=1"]
TINY_AGENT = ["--set", "channels=4,4,4,4", "--set", "attention_dim=4", "--set", "steps=3"]
SHORT_CORPUS = ["--set", "utterance_seconds=0.5", "--set", "silence_seconds=0.05"]


def _tone(path, seconds=0.5, freq=200.0):
    t = np.arange(int(16000 * seconds)) / 16000
    write_wav(str(path), AudioBuffer(samples=0.3 * np.sin(2 * np.pi * freq * t)))
    return str(path)


def _models(tmp_path):
    salience_cfg = SalienceConfig(extractor_channels=(4, 4, 4, 4), gru_hidden=4, predictor_channels=4)
    agent_cfg = AgentConfig(channels=(4, 4, 4, 4), attention_dim=4)
    salience = init_salience_model(salience_cfg, 0)
    salience.set("mask.out.b", [10.0])
    salience_path, agent_path = str(tmp_path / "salience.prsm"), str(tmp_path / "agent.prsm")
    save_salience(salience_path, salience, salience_cfg)
    save_agent(agent_path, init_agent(agent_cfg, 0), agent_cfg)
    return salience_path, agent_path


def test_no_arguments_is_usage_error(capsys):
    assert dispatch([]) == 2
    assert "Usage" in capsys.readouterr().err


def test_unknown_subcommand():
    assert dispatch(["bogus"]) == 2


def test_help():
    assert dispatch(["--help"]) == 0


def test_selfcheck_passes(capsys):
    assert dispatch(["selfcheck"]) == 0
    out = capsys.readouterr().out
    assert "pass cola" in out and "FAIL" not in out


def test_stretch(tmp_path):
    src = _tone(tmp_path / "in.wav")
    dst = str(tmp_path / "out.wav")
    assert dispatch(["stretch", "--in", src, "--out", dst, "--factor", "1.5"]) == 0
    assert abs(len(read_wav(dst)) - 12000) <= 256


def test_stretch_rejects_bad_factor(tmp_path):
    src = _tone(tmp_path / "in.wav")
    assert dispatch(["stretch", "--in", src, "--out", str(tmp_path / "o.wav"), "--factor", "0"]) == 2


def test_malformed_wav_is_runtime_error(tmp_path, capsys):
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"this is not a wave file at all")
    assert dispatch(["stretch", "--in", str(bad), "--out", str(tmp_path / "o.wav"), "--factor", "1.2"]) == 1
    assert capsys.readouterr().err.startswith("Error:")


def test_gen_corpus(tmp_path, capsys):
    out = str(tmp_path / "corpus")
    assert dispatch(["gen-corpus", "--out", out, "--n-per-class", "1", "--seed", "4", *SHORT_CORPUS]) == 0
    manifest = capsys.readouterr().out.strip()
    assert manifest == os.path.join(out, "manifest.csv")
    assert len(read_manifest(manifest)) == 5


def test_unknown_override_is_usage_error(tmp_path):
    assert dispatch(["gen-corpus", "--out", str(tmp_path / "c"), "--set", "bogus=1"]) == 2


def test_bad_override_value_is_usage_error(tmp_path):
    assert dispatch(["gen-corpus", "--out", str(tmp_path / "c"), "--set", "utterance_seconds=long"]) == 2
    assert dispatch(["gen-corpus", "--out", str(tmp_path / "c"), "--set", "utterance_seconds=-1"]) == 2


def test_convert_single_file(tmp_path, capsys):
    salience_path, agent_path = _models(tmp_path)
    src = _tone(tmp_path / "in.wav")
    dst = str(tmp_path / "out.wav")
    report_dir = str(tmp_path / "report")
    code = dispatch(["convert", "--in", src, "--target", "happy", "--agent", agent_path, "--salience", salience_path,
                     "--out", dst, "--greedy", "--report-dir", report_dir])
    assert code == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "segment_start,segment_end,alpha,beta,gain"
    assert any(line.startswith("reward,") for line in out)
    assert os.path.exists(dst)
    assert os.path.exists(os.path.join(report_dir, "segments.csv"))
    with open(os.path.join(report_dir, "config.json"), "rb") as f:
        config = orjson.loads(f.read())
    assert config["checksums"] == {
        "in": file_sha256(src),
        "agent": file_sha256(agent_path),
        "salience": file_sha256(salience_path),
    }


def test_convert_usage_errors(tmp_path):
    salience_path, agent_path = _models(tmp_path)
    src = _tone(tmp_path / "in.wav")
    common = ["--agent", agent_path, "--salience", salience_path]
    assert dispatch(["convert", "--in", src, "--target", "happy", "--out", "o.wav", "--greedy", "--random", *common]) == 2
    assert dispatch(["convert", *common]) == 2
    assert dispatch(["convert", "--in", src, "--out", str(tmp_path / "o.wav"), *common]) == 2
    assert dispatch(["convert", "--in", src, "--target", "bored", "--out", str(tmp_path / "o.wav"), *common]) == 2


def test_wrong_model_kind_is_runtime_error(tmp_path):
    salience_path, agent_path = _models(tmp_path)
    src = _tone(tmp_path / "in.wav")
    code = dispatch(["convert", "--in", src, "--target", "sad", "--agent", salience_path, "--salience", salience_path,
                     "--out", str(tmp_path / "o.wav")])
    assert code == 1


def test_pipeline(tmp_path, capsys):
    corpus = str(tmp_path / "corpus")
    assert dispatch(["gen-corpus", "--out", corpus, "--n-per-class", "2", *SHORT_CORPUS]) == 0
    manifest = os.path.join(corpus, "manifest.csv")

    run = str(tmp_path / "salience")
    assert dispatch(["train-salience", "--manifest", manifest, "--out", run, *TINY_SALIENCE]) == 0
    salience_path = os.path.join(run, "salience.prsm")
    for name in ("salience.prsm", "checkpoint.prsm", "training_log.csv", "config.json", "README.md"):
        assert os.path.exists(os.path.join(run, name))

    evaluated = str(tmp_path / "eval")
    capsys.readouterr()
    assert dispatch(["eval-salience", "--manifest", manifest, "--model", salience_path, "--out", evaluated,
                     "--split", "all"]) == 0
    assert "top1_accuracy," in capsys.readouterr().out
    with open(os.path.join(evaluated, "confusion.csv"), encoding="utf-8") as f:
        confusion = [line.split(",") for line in f.read().splitlines()[1:]]
    assert len(confusion) == 5 and all(len(row) == 5 for row in confusion)
    assert sum(int(v) for row in confusion for v in row) == len(read_manifest(manifest))

    agent_run = str(tmp_path / "agent")
    assert dispatch(["train-agent", "--manifest", manifest, "--salience", salience_path, "--out", agent_run,
                     *TINY_AGENT]) == 0
    agent_path = os.path.join(agent_run, "agent.prsm")
    assert os.path.exists(agent_path)
    assert os.path.exists(os.path.join(agent_run, "metrics.csv"))

    report = str(tmp_path / "convert")
    capsys.readouterr()
    assert dispatch(["convert", "--manifest", manifest, "--split", "all", "--agent", agent_path,
                     "--salience", salience_path, "--random", "--report-dir", report]) == 0
    assert "mean_delta," in capsys.readouterr().out
    assert os.path.exists(os.path.join(report, "score_changes.csv"))
