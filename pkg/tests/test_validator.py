import numpy as np
import pytest

from services.models import AgentConfig, SalienceConfig
from utils.validator import (
    OverrideError,
    apply_overrides,
    is_simplex,
    parse_emotion,
    parse_overrides,
    unknown_keys,
)


def test_parse_overrides_last_wins():
    assert parse_overrides(["epochs=3", " lr = 0.01", "epochs=5"]) == {"epochs": "5", "lr": "0.01"}


@pytest.mark.parametrize("bad", ["epochs", "=3"])
def test_parse_overrides_rejects_malformed(bad):
    with pytest.raises(OverrideError):
        parse_overrides([bad])


def test_apply_overrides_coerces_types():
    cfg = apply_overrides(SalienceConfig(), {"epochs": "3", "lr": "0.01", "extractor_channels": "8,8,8,8"})
    assert cfg.epochs == 3 and cfg.lr == 0.01
    assert cfg.extractor_channels == (8, 8, 8, 8)


def test_apply_overrides_bool_and_ignored_keys():
    cfg = apply_overrides(AgentConfig(), {"duration_only": "true", "epochs": "3"})
    assert cfg.duration_only is True
    with pytest.raises(OverrideError):
        apply_overrides(AgentConfig(), {"duration_only": "maybe"})


def test_apply_overrides_revalidates():
    with pytest.raises(ValueError):
        apply_overrides(SalienceConfig(), {"epochs": "0"})


def test_unknown_keys():
    found = unknown_keys({"epochs": "1", "steps": "2", "bogus": "x"}, [SalienceConfig, AgentConfig], extra=["n_per_class"])
    assert found == ["bogus"]


def test_parse_emotion():
    assert parse_emotion("Happy") == 2
    with pytest.raises(OverrideError):
        parse_emotion("bored")


def test_is_simplex():
    assert is_simplex(np.array([0.2, 0.8]))
    assert not is_simplex(np.array([0.5, 0.6]))
    assert not is_simplex(np.array([-0.1, 1.1]))
