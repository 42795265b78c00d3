import os

import numpy as np
import pytest

from config.settings import EMOTIONS
from logic.agent_training import AgentTraining, require_segments, salient_segments, train_agent
from logic.conversion import Converter, convert, evaluate_conversion
from logic.salience_training import SalienceEvaluation, SalienceTraining, eval_salience, train_salience
from services.agent import init_agent
from services.corpus import load_audio
from services.models import ActionGrid
from services.salience import init_salience_model, load_salience
from utils.errors import EmptyCorpusError, NoSegmentsError

IDENTITY_GRID = ActionGrid(duration=(1.0,), pitch=(1.0,), gain=(1.0,))


def _forced_salience(cfg, bias):
    """Fresh predictor whose mask is all on (bias > 0) or all off (bias < 0) outside gated frames."""
    store = init_salience_model(cfg, seed=0)
    store.set("mask.out.b", [bias])
    return store


# ---------------- Salience ----------------
def test_salience_training_bookkeeping(tiny_entries, tiny_salience_cfg, tmp_path):
    result = SalienceTraining(tiny_salience_cfg, seed=0).run(tiny_entries, tiny_entries[:2], checkpoint_dir=str(tmp_path))
    assert result.store.step_count == len(tiny_entries)
    assert len(result.log) == 1
    row = result.log[0]
    assert row["steps"] == len(tiny_entries)
    assert row["temperature"] == pytest.approx(tiny_salience_cfg.temperature_end)
    assert np.isfinite(row["val_l1"]) and np.isfinite(result.final_loss)
    assert 0.0 <= row["mask_rate"] <= 1.0
    store, cfg = load_salience(os.path.join(str(tmp_path), SalienceTraining.CHECKPOINT_NAME))
    assert cfg == tiny_salience_cfg
    assert all(np.array_equal(store[k], result.store[k]) for k in store)


def test_salience_training_is_deterministic(tiny_entries, tiny_salience_cfg):
    a = train_salience(tiny_entries[:4], tiny_salience_cfg, seed=3)
    b = train_salience(tiny_entries[:4], tiny_salience_cfg, seed=3)
    assert all(np.array_equal(a.store[k], b.store[k]) for k in a.store)
    assert a.log == b.log


def test_salience_training_needs_entries(tiny_salience_cfg):
    with pytest.raises(EmptyCorpusError):
        SalienceTraining(tiny_salience_cfg, seed=0).run([])


def test_salience_evaluation(tiny_entries, tiny_salience_cfg):
    store = init_salience_model(tiny_salience_cfg, seed=0)
    result = eval_salience(store, tiny_entries, tiny_salience_cfg)
    assert result.metrics["n"] == len(tiny_entries)
    assert 0.0 <= result.metrics["top1_accuracy"] <= result.metrics["top2_accuracy"] <= 1.0
    assert result.confusion.sum() == len(tiny_entries)
    assert len(result.ious) == len(tiny_entries)
    assert "median_iou" in result.metrics
    again = SalienceEvaluation(tiny_salience_cfg).run(store, tiny_entries)
    assert again.metrics == result.metrics


def test_salient_segments_cover_forced_mask(tiny_entries, tiny_salience_cfg):
    store = _forced_salience(tiny_salience_cfg, 10.0)
    y = load_audio(tiny_entries[0])
    hard = np.ones(25)
    assert salient_segments(hard, tiny_salience_cfg, len(y)) == [(0, len(y))]
    assert SalienceEvaluation(tiny_salience_cfg).run(store, tiny_entries[:1]).ious[0] > 0.0


def test_require_segments_raises_on_empty_mask(tiny_salience_cfg):
    assert require_segments(np.ones(25), tiny_salience_cfg, 8000) == [(0, 8000)]
    with pytest.raises(NoSegmentsError):
        require_segments(np.zeros(25), tiny_salience_cfg, 8000)


# ---------------- Agent ----------------
def test_identity_grid_gives_zero_rewards(tiny_entries, tiny_salience_cfg, tiny_agent_cfg):
    cfg = tiny_agent_cfg.model_copy(update={"grid": IDENTITY_GRID, "steps": 4})
    salience = _forced_salience(tiny_salience_cfg, 10.0)
    result = train_agent(tiny_entries, salience, tiny_salience_cfg, cfg, seed=0)
    assert result.skipped == 0
    assert len(result.log) == 4
    assert np.array_equal(result.rewards, np.zeros(4))
    assert result.log[-1]["reward_ma"] == 0.0
    assert result.store.step_count == 4


def test_agent_training_log_rows(tiny_entries, tiny_salience_cfg, tiny_agent_cfg):
    salience = _forced_salience(tiny_salience_cfg, 10.0)
    result = AgentTraining(tiny_agent_cfg, salience, tiny_salience_cfg, seed=1).run(tiny_entries)
    assert len(result.log) == tiny_agent_cfg.steps
    for row in result.log:
        source = next(e for e in tiny_entries if e.id == row["id"]).label
        assert row["target"] != EMOTIONS[source]
        assert row["span_start"] < row["span_end"]
    window = result.rewards[-tiny_agent_cfg.reward_window:]
    assert result.log[-1]["reward_ma"] == pytest.approx(window.mean())
    assert np.allclose(result.reward_curve(tiny_agent_cfg.reward_window), [row["reward_ma"] for row in result.log])


def test_agent_cache_keeps_scores_not_audio(tiny_entries, tiny_salience_cfg, tiny_agent_cfg):
    trainer = AgentTraining(tiny_agent_cfg, _forced_salience(tiny_salience_cfg, 10.0), tiny_salience_cfg, seed=1)
    trainer.run(tiny_entries)
    assert 0 < len(trainer._cache) <= len(tiny_entries)
    for utt in trainer._cache.values():
        assert set(vars(utt)) == {"scores", "segments"}
        assert utt.segments


def test_agent_training_is_deterministic(tiny_entries, tiny_salience_cfg, tiny_agent_cfg):
    salience = _forced_salience(tiny_salience_cfg, 10.0)
    a = train_agent(tiny_entries, salience, tiny_salience_cfg, tiny_agent_cfg, seed=2)
    b = train_agent(tiny_entries, salience, tiny_salience_cfg, tiny_agent_cfg, seed=2)
    assert a.log == b.log
    assert all(np.array_equal(a.store[k], b.store[k]) for k in a.store)


def test_agent_skips_utterances_without_segments(tiny_entries, tiny_salience_cfg, tiny_agent_cfg):
    salience = _forced_salience(tiny_salience_cfg, -10.0)
    result = train_agent(tiny_entries, salience, tiny_salience_cfg, tiny_agent_cfg, seed=0)
    assert result.skipped == tiny_agent_cfg.steps
    assert result.log == []
    assert result.store.step_count == 0


# ---------------- Conversion ----------------
def test_greedy_conversion_is_deterministic(tiny_entries, tiny_salience_cfg, tiny_agent_cfg):
    salience = _forced_salience(tiny_salience_cfg, 10.0)
    agent = init_agent(tiny_agent_cfg, seed=0)
    y = load_audio(tiny_entries[0])
    a, report_a = convert(y, 2, agent, tiny_agent_cfg, salience, tiny_salience_cfg, mode="greedy", seed=0)
    b, report_b = convert(y, 2, agent, tiny_agent_cfg, salience, tiny_salience_cfg, mode="greedy", seed=9)
    assert np.array_equal(a.samples, b.samples)
    assert report_a.segments == report_b.segments
    assert len(report_a.segments) >= 1
    assert report_a.reward == pytest.approx(report_a.after[2] - report_a.before[2])


def test_identity_conversion_keeps_audio(tiny_entries, tiny_salience_cfg, tiny_agent_cfg):
    cfg = tiny_agent_cfg.model_copy(update={"grid": IDENTITY_GRID})
    salience = _forced_salience(tiny_salience_cfg, 10.0)
    y = load_audio(tiny_entries[3])
    out, report = Converter(init_agent(cfg, 0), cfg, salience, tiny_salience_cfg, "sample").process(y, 1, seed=4)
    assert np.array_equal(out.samples, y.samples)
    assert report.reward == 0.0
    assert all((r["alpha"], r["beta"], r["gain"]) == (1.0, 1.0, 1.0) for r in report.segments)


def test_conversion_without_segments_returns_input(tiny_entries, tiny_salience_cfg, tiny_agent_cfg):
    salience = _forced_salience(tiny_salience_cfg, -10.0)
    y = load_audio(tiny_entries[0])
    out, report = convert(y, 1, init_agent(tiny_agent_cfg, 0), tiny_agent_cfg, salience, tiny_salience_cfg)
    assert report.no_segments
    assert report.segments == []
    assert np.array_equal(out.samples, y.samples)
    assert np.array_equal(report.after, report.before)


def test_random_mode_respects_duration_only(tiny_entries, tiny_salience_cfg, tiny_agent_cfg):
    cfg = tiny_agent_cfg.model_copy(update={"duration_only": True})
    salience = _forced_salience(tiny_salience_cfg, 10.0)
    converter = Converter(init_agent(cfg, 0), cfg, salience, tiny_salience_cfg, "random")
    _, report = converter.process(load_audio(tiny_entries[5]), 0, seed=1)
    assert all(r["beta"] == 1.0 and r["gain"] == 1.0 for r in report.segments)


def test_unknown_mode(tiny_salience_cfg, tiny_agent_cfg):
    with pytest.raises(ValueError):
        Converter(init_agent(tiny_agent_cfg, 0), tiny_agent_cfg, init_salience_model(tiny_salience_cfg, 0),
                  tiny_salience_cfg, "best")


def test_evaluate_conversion(tiny_entries, tiny_salience_cfg, tiny_agent_cfg):
    salience = _forced_salience(tiny_salience_cfg, 10.0)
    agent = init_agent(tiny_agent_cfg, 0)
    evaluation = evaluate_conversion(tiny_entries, agent, tiny_agent_cfg, salience, tiny_salience_cfg, "greedy", seed=0)
    assert len(evaluation.rows) == len(tiny_entries)
    assert all(r["source"] != r["target"] for r in evaluation.rows)
    assert evaluation.metrics["n"] == len(tiny_entries)
    assert evaluation.metrics["no_segments"] == 0.0
    assert 0.0 <= evaluation.metrics["conversion_accuracy"] <= 1.0
    counts = sum(v for k, v in evaluation.metrics.items() if k.startswith("count_"))
    assert counts == len(tiny_entries)


def test_evaluate_conversion_needs_entries(tiny_salience_cfg, tiny_agent_cfg):
    with pytest.raises(EmptyCorpusError):
        evaluate_conversion([], init_agent(tiny_agent_cfg, 0), tiny_agent_cfg,
                            init_salience_model(tiny_salience_cfg, 0), tiny_salience_cfg)
