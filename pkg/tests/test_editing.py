import numpy as np
import pytest

from services.editing import apply_edits, edit_segment
from services.models import AudioBuffer, SegmentEdit, WsolaParams
from services.pitch import estimate_f0_autocorr
from utils.errors import OverlappingSpansError, SpanOutOfBoundsError

SR = 16000
PARAMS = WsolaParams()


def tone(freq, seconds, amp=0.25):
    t = np.arange(int(SR * seconds)) / SR
    return AudioBuffer(samples=amp * np.sin(2 * np.pi * freq * t))


def rms(x):
    return float(np.sqrt(np.mean(x * x)))


def test_no_edits_returns_copy():
    y = tone(220.0, 0.5)
    out = apply_edits(y, [], PARAMS)
    assert np.array_equal(out.samples, y.samples)
    assert out.samples is not y.samples


def test_identity_edit_is_exact():
    y = tone(220.0, 0.5)
    out = apply_edits(y, [SegmentEdit(start=1000, end=5000)], PARAMS)
    assert np.array_equal(out.samples, y.samples)


def test_overlapping_spans():
    y = tone(220.0, 0.5)
    edits = [SegmentEdit(start=0, end=3000, gain=2.0), SegmentEdit(start=2000, end=5000, gain=2.0)]
    with pytest.raises(OverlappingSpansError):
        apply_edits(y, edits, PARAMS)


def test_span_out_of_bounds():
    y = tone(220.0, 0.5)
    with pytest.raises(SpanOutOfBoundsError):
        apply_edits(y, [SegmentEdit(start=7000, end=9000, gain=2.0)], PARAMS)


def test_edits_are_sorted_before_splicing():
    y = tone(220.0, 1.0)
    edits = [SegmentEdit(start=9000, end=12000, gain=0.5), SegmentEdit(start=1000, end=4000, gain=2.0)]
    out = apply_edits(y, edits, PARAMS)
    assert len(out) == len(y)
    assert np.array_equal(out.samples[:1000], y.samples[:1000])
    assert np.array_equal(out.samples[12000:], y.samples[12000:])


def test_gain_edit_scales_interior_rms():
    y = tone(220.0, 1.0)
    out = apply_edits(y, [SegmentEdit(start=4000, end=12000, gain=2.0)], PARAMS)
    assert len(out) == len(y)
    ramp = int(0.010 * SR)
    inner = slice(4000 + ramp, 12000 - ramp)
    assert rms(out.samples[inner]) / rms(y.samples[inner]) == pytest.approx(2.0, rel=1e-6)
    assert np.array_equal(out.samples[:4000], y.samples[:4000])
    assert np.array_equal(out.samples[12000:], y.samples[12000:])


def test_duration_edit_changes_length_only_inside_span():
    y = tone(220.0, 1.0)
    out = apply_edits(y, [SegmentEdit(start=4000, end=12000, duration_factor=1.5)], PARAMS)
    assert abs(len(out) - (len(y) + 4000)) <= 512
    assert np.array_equal(out.samples[:4000], y.samples[:4000])
    assert np.array_equal(out.samples[-4000:], y.samples[-4000:])


def test_pitch_edit_contract():
    y = tone(220.0, 1.0)
    out = edit_segment(y, SegmentEdit(start=0, end=len(y), pitch_factor=1.25), PARAMS)
    assert abs(len(out) - len(y)) <= 512
    f0 = estimate_f0_autocorr(out.with_samples(out.samples[2000:-2000]))
    assert f0 == pytest.approx(275.0, rel=0.03)


def test_output_stays_in_range():
    y = tone(220.0, 0.5, amp=0.9)
    out = apply_edits(y, [SegmentEdit(start=0, end=len(y), gain=1.9)], PARAMS)
    assert np.max(np.abs(out.samples)) <= 1.0
