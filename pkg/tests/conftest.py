import os
import pathlib
import sys

import pytest

ROOT = pathlib.Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from services.corpus import read_manifest  # noqa: E402
from services.models import AgentConfig, SalienceConfig, SyntheticSpec  # noqa: E402
from services.synthetic import gen_corpus  # noqa: E402

# Acceptance runs train full-size models and take minutes
RUN_SLOW = os.environ.get("PROSODY_RUN_SLOW") == "1"
slow = pytest.mark.skipif(not RUN_SLOW, reason="set PROSODY_RUN_SLOW=1 to run acceptance checks")

SHORT_SPEC = SyntheticSpec(utterance_seconds=0.5, silence_seconds=0.05)


@pytest.fixture
def tiny_salience_cfg():
    return SalienceConfig(extractor_channels=(4, 4, 4, 4), gru_hidden=4, predictor_channels=4, epochs=1)


@pytest.fixture
def tiny_agent_cfg():
    return AgentConfig(channels=(4, 4, 4, 4), attention_dim=4, steps=6, log_every=2, reward_window=3)


@pytest.fixture(scope="session")
def tiny_manifest(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    return gen_corpus(SHORT_SPEC, n_per_class=2, out_dir=str(out), seed=11)


@pytest.fixture
def tiny_entries(tiny_manifest):
    return read_manifest(tiny_manifest)
