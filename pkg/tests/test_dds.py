import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddsqubit import dds
from ddsqubit.pulse import PulseShape, envelope

FS = 65e9
F_Q = 4.773e9


def _tone(pulses, f=F_Q, **kw):
    return dds.ToneSpec(f, tuple(dds.ScheduledPulse(t, s) for t, s in pulses), **kw)


def _flat(amplitude, duration):
    """Very wide Gaussian: effectively constant over its middle."""
    return PulseShape(sigma=duration, truncation=1.0, amplitude=amplitude)


def test_full_scale_peak_maps_to_max_code():
    assert dds.quantize(np.array([1.0, -1.0, 0.5, -0.5 / 128]), 8).tolist() == [127, -128, 64, -1]


def test_quantization_error_bounded_by_half_code():
    x = np.random.default_rng(0).uniform(-0.99, 0.99, 10000)
    err = dds.quantize(x, 8) / 128.0 - x
    assert np.max(np.abs(err)) <= 0.5 / 128 + 1e-15


def test_rms_quantization_of_full_scale_sine():
    n = np.arange(200000)
    x = 0.999 * np.sin(2 * np.pi * 0.1234567 * n)
    err = dds.quantize(x, 8) / 128.0 - x
    expected = 2.0 ** (1 - 8) / math.sqrt(12)
    assert np.sqrt(np.mean(err ** 2)) == pytest.approx(expected, rel=0.2)


def test_nyquist_checks():
    dds.check_nyquist([dds.ToneSpec(F_Q, label="qubit")], 14.44e9)
    with pytest.raises(dds.NyquistError, match="readout"):
        dds.check_nyquist([dds.ToneSpec(10.166e9, label="readout")], 14.44e9)


def test_sample_count_is_ceiling_of_duration():
    s = PulseShape(sigma=6e-9, amplitude=0.1)
    w = dds.synthesize([_tone([(0.0, s)])], dds.DacConfig(), (0.0, 24e-9))
    assert w.n_samples == math.ceil(24e-9 * FS)


def test_clipping_detected():
    s = PulseShape(sigma=6e-9, amplitude=0.8)
    with pytest.raises(dds.ClippingError):
        dds.synthesize([_tone([(0.0, s)]), _tone([(0.0, s)], f=5.5e9)], dds.DacConfig(), (0.0, 24e-9))


@settings(max_examples=20, deadline=None)
@given(st.lists(st.integers(1, 4000), min_size=1, max_size=6))
def test_segmented_synthesis_is_bit_identical(cuts):
    pulses = [(k * 29e-9, PulseShape(sigma=6e-9, amplitude=0.3 * (-1) ** k, drag_coefficient=0.5,
                                     phase=0.7 * k)) for k in range(12)]
    tones = [_tone(pulses, phase_origin=0.3), _tone([(50e-9, PulseShape(sigma=20e-9, amplitude=0.2))], f=10.166e9)]
    dac = dds.DacConfig()
    n_total = int(12 * 29e-9 * FS)
    whole = dds.synthesize(tones, dac, (0.0, n_total / FS))
    bounds = sorted(set(min(c, n_total - 1) for c in np.cumsum(cuts)))
    edges = [0] + bounds + [n_total]
    parts = [dds.synthesize(tones, dac, (a / FS, b / FS)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    joined = parts[0]
    for p in parts[1:]:
        joined = joined.concatenate(p)
    assert np.array_equal(joined.codes, whole.codes)
    assert np.array_equal(joined.ideal, whole.ideal)


def test_segment_phase_reset_is_a_carrier_offset():
    n0 = 12345
    s = _flat(0.5, 2e-6)
    tone = _tone([(0.0, s)])
    dac = dds.DacConfig(quantize=False)
    span = (n0 / FS, (n0 + 4000) / FS)
    reset = dds.synthesize([tone], dac, span, phase_reference="segment").ideal
    ref_c = dds.synthesize([tone], dac, span).ideal
    ref_s = dds.synthesize([_tone([(0.0, s)], phase_origin=-math.pi / 2)], dac, span).ideal
    (c, sn), *_ = np.linalg.lstsq(np.column_stack([ref_c, ref_s]), reset, rcond=None)
    theta = math.atan2(sn, c) % (2 * math.pi)
    expected = (2 * math.pi * F_Q * n0 / FS) % (2 * math.pi)
    assert abs(theta - expected) < 1e-9


def test_effective_bits():
    assert dds.effective_bits(0.0447) == pytest.approx(4.52, abs=0.01)
    assert dds.effective_bits(0.0096) == pytest.approx(2.30, abs=0.01)
    assert dds.effective_bits(1.0) == 9.0
    with pytest.raises(ValueError):
        dds.effective_bits(0.0)


def _const_wave(n=20000, value=0.5):
    return dds.SampledWaveform(dds.quantize(np.full(n, value), 8), np.full(n, value), FS, 0, 8, False)


def test_disabled_distortion_is_identity():
    w = _const_wave()
    out = dds.apply_distortion(w, dds.DistortionModel(d_sat=0.0), np.ones(w.n_samples))
    assert np.array_equal(out.output(), w.output())


def test_distortion_saturates_after_long_drive():
    m = dds.DistortionModel(tau=31e-6, d_sat=0.2)
    m.relax(20 * 31e-6, activity=1.0)
    assert m.d == pytest.approx(0.2, rel=1e-8)
    w = _const_wave(1000)
    out = dds.apply_distortion(w, m, np.zeros(1000))
    assert out.output()[0] == pytest.approx(0.5 * (1 - 0.2), rel=1e-6)


def test_idle_gap_closed_form_matches_per_sample():
    tau, gap = 1e-6, 0.4e-6
    n_gap = int(round(gap * FS))
    m = dds.DistortionModel(tau=tau, d_sat=0.2, d=0.2)
    w = _const_wave(n_gap + 1)
    act = np.zeros(n_gap + 1)
    out = dds.apply_distortion(w, m, act)
    closed = 0.2 * math.exp(-n_gap / FS / tau)
    # sample k carries the state after k + 1 updates
    assert out.droop[n_gap - 1] == pytest.approx(closed, rel=1e-6)
    m2 = dds.DistortionModel(tau=tau, d_sat=0.2, d=0.2)
    assert m2.relax(gap) == pytest.approx(closed, rel=1e-12)


def test_constant_tone_demodulates_to_one():
    n = 20000
    phi = dds.carrier_phase(np.arange(n), F_Q, FS)
    w = dds.SampledWaveform(np.zeros(n, np.int8), np.cos(phi), FS, 0, 8, False)
    bb = dds.demodulate(w, F_Q, 1e9, n_range=(3000, 17000))
    assert np.max(np.abs(bb.values - 1.0)) < 1e-3


def test_unquantized_round_trip_matches_envelope():
    s = PulseShape(sigma=6e-9, amplitude=0.4, drag_coefficient=0.5)
    w = dds.synthesize([_tone([(10e-9, s)])], dds.DacConfig(quantize=False), (0.0, 50e-9))
    bb = dds.demodulate(w, F_Q, 1e9, decimation=1)
    i, q = envelope(s, bb.times - 10e-9)
    ref = i + 1j * q
    rms = np.sqrt(np.mean(np.abs(bb.values - ref) ** 2)) / np.sqrt(np.mean(np.abs(ref) ** 2))
    assert rms < 0.01


def test_quantized_small_pulse_error_scales_with_step():
    s = PulseShape(sigma=6e-9, amplitude=0.01)
    tones = [_tone([(10e-9, s)])]
    ideal = dds.demodulate(dds.synthesize(tones, dds.DacConfig(quantize=False), (0.0, 50e-9)), F_Q, 1e9)
    quant = dds.demodulate(dds.synthesize(tones, dds.DacConfig(), (0.0, 50e-9)), F_Q, 1e9)
    rel = np.max(np.abs(quant.values - ideal.values)) / 0.01
    step = (1 / 128) / 0.01
    assert 0.01 * step < rel < 2 * step


def test_demodulate_rejects_bad_cutoff():
    w = _const_wave()
    with pytest.raises(ValueError):
        dds.demodulate(w, F_Q, cutoff=6e9)
    with pytest.raises(dds.NyquistError):
        dds.demodulate(w, 40e9)


def test_waveform_file_round_trip(tmp_path):
    s = PulseShape(sigma=6e-9, amplitude=0.3)
    w = dds.synthesize([_tone([(0.0, s)])], dds.DacConfig(), (0.0, 24e-9))
    path, side = dds.write_waveform(w, tmp_path / "w.bin")
    back = dds.read_waveform(path)
    assert np.array_equal(back.codes, w.codes)
    assert back.sample_rate == FS and back.n_samples == w.n_samples
    csv_path = dds.export_csv(w, tmp_path / "w.csv")
    assert len(csv_path.read_text().splitlines()) == w.n_samples + 1


def test_nonstandard_rate_warns():
    with pytest.warns(UserWarning):
        dds.DacConfig(sample_rate=40e9)
