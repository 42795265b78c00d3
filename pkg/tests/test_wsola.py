import numpy as np
import pytest

from services.models import AudioBuffer, TimeStretchMap, WsolaParams
from services.pitch import estimate_f0_autocorr
from services.wsola import (
    cola_denominator,
    hann_window,
    invert_map,
    output_anchors,
    resample_linear,
    time_stretch,
    wsola_adjust,
)
from utils.errors import BadLengthError, BadRatioError, OutOfRangeError, SignalTooShortError

SR = 16000


def tone(freq, seconds, amp=0.5):
    t = np.arange(int(SR * seconds)) / SR
    return AudioBuffer(samples=amp * np.sin(2 * np.pi * freq * t))


def interior_snr_db(ref, est, margin):
    r = ref[margin:-margin]
    e = est[margin:-margin]
    return 10 * np.log10(np.sum(r ** 2) / max(np.sum((r - e) ** 2), 1e-30))


def test_hann_window_periodic():
    w = hann_window(4)
    assert w == pytest.approx([0.0, 0.5, 1.0, 0.5])


@pytest.mark.parametrize("length", [0, 1, 7])
def test_hann_window_bad_length(length):
    with pytest.raises(BadLengthError):
        hann_window(length)


@pytest.mark.parametrize("length", [64, 256, 512, 1024])
def test_cola_interior_is_one(length):
    out_len = 8 * length
    den = cola_denominator(hann_window(length), output_anchors(out_len, length // 2), out_len)
    assert np.max(np.abs(den[length:out_len - length] - 1.0)) <= 1e-6


def test_output_anchors():
    assert output_anchors(1000, 256).tolist() == [0, 256, 512, 768]
    assert output_anchors(0, 256).tolist() == []


def test_invert_map_identity_and_double():
    anchors = output_anchors(1024, 256)
    assert invert_map(TimeStretchMap.uniform(1024, 1.0), anchors).tolist() == [0, 256, 512, 768]
    half = invert_map(TimeStretchMap.uniform(1024, 2.0), output_anchors(2048, 256))
    assert half.tolist() == [0, 128, 256, 384, 512, 640, 768, 896]


def test_invert_map_out_of_range():
    with pytest.raises(OutOfRangeError):
        invert_map(TimeStretchMap.uniform(100, 1.0), [0, 200])


def test_wsola_adjust_finds_exact_continuation():
    y = AudioBuffer(samples=np.random.default_rng(0).normal(0.0, 0.1, 4000))
    params = WsolaParams()
    natural = y.samples[1040:1296]
    assert wsola_adjust(y, 1000, natural, params) == 1040
    assert wsola_adjust(y, 1000, None, params) == 1000


def test_wsola_adjust_zero_template_keeps_position():
    y = tone(200.0, 0.1)
    assert wsola_adjust(y, 900, np.zeros(256), WsolaParams()) == 900


def test_identity_stretch_without_search_is_exact():
    y = tone(220.0, 0.5)
    out = time_stretch(y, TimeStretchMap.uniform(len(y), 1.0), WsolaParams(search_radius=0))
    assert len(out) == len(y)
    assert interior_snr_db(y.samples, out.samples, 512) >= 60.0


def test_identity_stretch_with_search():
    y = tone(220.0, 0.5)
    out = time_stretch(y, TimeStretchMap.uniform(len(y), 1.0), WsolaParams(search_radius=128))
    assert interior_snr_db(y.samples, out.samples, 512) >= 25.0


@pytest.mark.parametrize("factor", [0.5, 0.75, 1.0, 1.25, 1.5, 1.9])
def test_stretch_duration(factor):
    y = tone(220.0, 0.5)
    out = time_stretch(y, TimeStretchMap.uniform(len(y), factor), WsolaParams())
    assert abs(len(out) - factor * len(y)) <= 512


def test_stretch_keeps_pitch():
    y = tone(220.0, 0.5)
    out = time_stretch(y, TimeStretchMap.uniform(len(y), 1.5), WsolaParams())
    f0 = estimate_f0_autocorr(out.with_samples(out.samples[1024:-1024]))
    assert f0 == pytest.approx(220.0, rel=0.03)


def test_stretch_too_short():
    y = AudioBuffer(samples=np.zeros(100))
    with pytest.raises(SignalTooShortError):
        time_stretch(y, TimeStretchMap.uniform(100, 1.0), WsolaParams())


def test_stretch_map_must_match_signal():
    y = tone(220.0, 0.1)
    with pytest.raises(OutOfRangeError):
        time_stretch(y, TimeStretchMap.uniform(len(y) + 10, 1.0), WsolaParams())


def test_piecewise_map():
    tmap = TimeStretchMap.piecewise(1000, [(200, 400, 2.0)])
    assert tmap.breakpoints == ((0.0, 0.0), (200.0, 200.0), (400.0, 600.0), (1000.0, 1200.0))
    assert tmap.output_length == 1200


def test_resample_scales_pitch_and_length():
    y = tone(200.0, 0.5)
    out = resample_linear(y, 1.25)
    assert len(out) == int(round(len(y) / 1.25))
    assert estimate_f0_autocorr(out) == pytest.approx(250.0, rel=0.03)


@pytest.mark.parametrize("ratio", [0.1, 4.5])
def test_resample_bad_ratio(ratio):
    with pytest.raises(BadRatioError):
        resample_linear(tone(200.0, 0.1), ratio)


def test_wsola_params_geometry():
    with pytest.raises(ValueError):
        WsolaParams(window_len=512, hop=200)
    with pytest.raises(ValueError):
        WsolaParams(window_len=512, hop=256, search_radius=256)
    assert WsolaParams.for_window(64).search_radius == 31
