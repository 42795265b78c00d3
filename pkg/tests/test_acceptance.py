"""End-to-end checks on a full-size synthetic corpus. Opt in with PROSODY_RUN_SLOW=1."""
from dataclasses import dataclass
from typing import Dict, List

import numpy as np
import pytest

from conftest import slow
from logic.agent_training import AgentTraining
from logic.conversion import evaluate_conversion
from logic.salience_training import SalienceEvaluation, SalienceTraining
from services.corpus import read_manifest, split_entries
from services.models import AgentConfig, SalienceConfig, SyntheticSpec
from services.synthetic import gen_corpus

SEED = 0
N_PER_CLASS = 100
HELD_OUT = 50
CURVE_FROM, CURVE_TO = 500, 3000


@dataclass
class PipelineRun:
    salience_log: List[Dict[str, float]]
    agent_log: List[Dict[str, float]]
    metrics: Dict[str, float]
    greedy: Dict[str, float]
    random: Dict[str, float]


def _pipeline(out_dir):
    entries = read_manifest(gen_corpus(SyntheticSpec(), N_PER_CLASS, out_dir, SEED))
    salience_cfg = SalienceConfig()
    train, val, test = split_entries(entries, salience_cfg.val_fraction, salience_cfg.test_fraction, SEED)
    salience_run = SalienceTraining(salience_cfg, SEED).run(train, val)
    evaluation = SalienceEvaluation(salience_cfg).run(salience_run.store, test)

    agent_cfg = AgentConfig()
    agent_run = AgentTraining(agent_cfg, salience_run.store, salience_cfg, SEED).run(train)
    held_out = test[:HELD_OUT]
    args = (held_out, agent_run.store, agent_cfg, salience_run.store, salience_cfg)
    return PipelineRun(
        salience_log=salience_run.log,
        agent_log=agent_run.log,
        metrics=evaluation.metrics,
        greedy=evaluate_conversion(*args, "greedy", SEED).metrics,
        random=evaluate_conversion(*args, "random", SEED).metrics,
    )


def _reward_ma_at(log, step):
    """Moving-average reward of the last update before ``step``."""
    return [row["reward_ma"] for row in log if row["step"] < step][-1]


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    return _pipeline(str(tmp_path_factory.mktemp("acceptance")))


@slow
def test_salience_loss_decreases_over_first_epochs(pipeline):
    losses = np.array([row["loss"] for row in pipeline.salience_log[:5]])
    assert losses.shape == (5,)
    assert np.all(np.diff(losses) < 0.0), losses


@slow
def test_salience_accuracy_and_cue_overlap(pipeline):
    assert pipeline.metrics["top1_accuracy"] >= 0.90
    assert pipeline.metrics["top2_accuracy"] >= 0.97
    assert pipeline.metrics["median_iou"] >= 0.5


@slow
def test_agent_reward_curve_does_not_fall(pipeline):
    assert AgentConfig().reward_window == 200
    early = _reward_ma_at(pipeline.agent_log, CURVE_FROM)
    late = _reward_ma_at(pipeline.agent_log, CURVE_TO)
    assert late >= early - 0.01, (early, late)


@slow
def test_greedy_conversion_beats_random(pipeline):
    assert pipeline.greedy["mean_delta"] >= 0.10
    assert pipeline.random["mean_delta"] <= 0.02


@slow
def test_rerun_reproduces_metrics(pipeline, tmp_path):
    again = _pipeline(str(tmp_path))
    for first, second in ((pipeline.metrics, again.metrics), (pipeline.greedy, again.greedy),
                          (pipeline.random, again.random)):
        assert first.keys() == second.keys()
        assert all(np.isclose(first[k], second[k], rtol=0.0, atol=1e-6) for k in first)
