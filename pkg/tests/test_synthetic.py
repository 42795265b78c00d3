import numpy as np
import pytest

from config.settings import EMOTIONS
from services.corpus import read_manifest
from services.models import Archetype, SyntheticSpec
from services.signal_io import read_wav
from services.synthetic import gen_corpus, gen_synthetic_utterance, noisy_saliency
from utils.errors import InvalidSpecError
from utils.validator import is_simplex

SHORT = SyntheticSpec(utterance_seconds=0.5, silence_seconds=0.05)


def test_utterance_is_deterministic():
    a, ya, ca = gen_synthetic_utterance(SHORT, 1, seed=7)
    b, yb, cb = gen_synthetic_utterance(SHORT, 1, seed=7)
    assert np.array_equal(a.samples, b.samples)
    assert np.array_equal(ya, yb)
    assert ca == cb


def test_utterance_shape_and_cue():
    buf, y, (start, end) = gen_synthetic_utterance(SHORT, 3, seed=1)
    assert len(buf) == 8000
    assert end - start == int(round(0.3 * 8000))
    assert 800 <= start and end <= 8000 - 800
    assert np.all(np.abs(buf.samples) <= 1.0)
    assert is_simplex(y)
    assert int(np.argmax(y)) == 3


def test_zero_label_noise_is_one_hot():
    spec = SyntheticSpec(utterance_seconds=0.5, silence_seconds=0.05, label_noise_scale=0.0)
    _, y, _ = gen_synthetic_utterance(spec, 2, seed=0)
    assert y.tolist() == [0.0, 0.0, 1.0, 0.0, 0.0]


def test_noisy_saliency_keeps_mode():
    rng = np.random.default_rng(0)
    for emotion in range(len(EMOTIONS)):
        y = noisy_saliency(emotion, 0.1, rng)
        assert is_simplex(y)
        assert int(np.argmax(y)) == emotion


def test_bad_emotion_index():
    with pytest.raises(InvalidSpecError):
        gen_synthetic_utterance(SHORT, 5, seed=0)


def test_indistinct_archetypes_rejected():
    same = {name: Archetype(f0_base=140.0, rate_factor=1.0, gain_factor=1.0) for name in EMOTIONS}
    with pytest.raises(ValueError):
        SyntheticSpec(archetypes=same)


def test_cue_must_fit_voiced_region():
    with pytest.raises(ValueError):
        SyntheticSpec(utterance_seconds=0.5, silence_seconds=0.2, cue_fraction=0.5)


def test_gen_corpus_writes_manifest(tmp_path):
    manifest = gen_corpus(SHORT, 2, str(tmp_path / "corpus"), seed=3)
    entries = read_manifest(manifest)
    assert len(entries) == 10
    assert [e.id for e in entries[:2]] == ["neutral_0000", "neutral_0001"]
    for e in entries:
        assert is_simplex(np.asarray(e.saliency))
        assert e.cue_span is not None
        assert len(read_wav(e.audio_path)) == 8000
    assert [e.label for e in entries] == [i for i in range(5) for _ in range(2)]


def test_gen_corpus_is_reproducible(tmp_path):
    a = gen_corpus(SHORT, 1, str(tmp_path / "a"), seed=11)
    b = gen_corpus(SHORT, 1, str(tmp_path / "b"), seed=11)
    with open(a, "rb") as fa, open(b, "rb") as fb:
        assert fa.read() == fb.read()
    for ea, eb in zip(read_manifest(a), read_manifest(b)):
        with open(ea.audio_path, "rb") as fa, open(eb.audio_path, "rb") as fb:
            assert fa.read() == fb.read()


def test_gen_corpus_rejects_empty(tmp_path):
    with pytest.raises(InvalidSpecError):
        gen_corpus(SHORT, 0, str(tmp_path), seed=0)
