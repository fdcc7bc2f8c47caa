import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ddsqubit import noise as nz

TWO_PI = 2 * math.pi


@pytest.mark.parametrize("f, level, expected", [
    (1 / TWO_PI, 0.0, 0.5),
    (1e4, -100.0, 0.5 * (TWO_PI * 1e4) ** 2 * 1e-10),
])
def test_psd_spot_values(f, level, expected):
    assert nz.dephasing_psd_value(f, level) == pytest.approx(expected, rel=1e-12)


def test_psd_10khz_is_0_1974():
    assert nz.dephasing_psd_value(1e4, -100.0) == pytest.approx(0.1974, abs=5e-5)


@given(st.floats(1.0, 1e9), st.floats(-180.0, -20.0))
def test_20db_is_a_factor_100(f, level):
    assert nz.dephasing_psd_value(f, level - 20) == pytest.approx(1e-2 * nz.dephasing_psd_value(f, level), rel=1e-12)


def test_load_two_point_text():
    s = nz.load_spectrum("10,−90\n100,−100")
    assert s.points == [(10.0, -90.0), (100.0, -100.0)]


def test_load_with_header_and_comments(tmp_path):
    p = tmp_path / "clock.csv"
    p.write_text("freq_hz,dBc_per_hz\n# comment\n10,-90\n\n100,-100\n")
    s = nz.load_spectrum(p)
    assert s.label == "clock" and len(s.frequencies) == 2
    assert nz.load_spectrum(s.to_csv()) == nz.PhaseNoiseSpectrum(s.frequencies, s.levels)


@pytest.mark.parametrize("text, line", [
    ("10,-90\n10,-95\n", 2),
    ("10,-90\n100,-95\n50,-99\n", 3),
    ("f,L\n0,-90\n", 2),
    ("10,-90\n20,abc\n", 2),
    ("10,-90,1\n", 1),
])
def test_load_errors_report_line(text, line):
    with pytest.raises(nz.SpectrumError) as exc:
        nz.load_spectrum(text + "\n")
    assert exc.value.line == line


def test_extrapolate_low():
    s = nz.PhaseNoiseSpectrum((4.0, 40.0), (-60.0, -80.0))
    e = nz.extrapolate_low(s, 0.4)
    assert e.frequencies[0] == pytest.approx(0.4)
    assert e.levels[0] == pytest.approx(-40.0, abs=1e-9)
    flat = nz.extrapolate_low(nz.PhaseNoiseSpectrum((4.0, 40.0), (-70.0, -70.0)), 0.1)
    assert np.allclose(flat.levels, -70.0)
    assert nz.extrapolate_low(s, 10.0) is s
    with pytest.raises(nz.SpectrumError):
        nz.extrapolate_low(nz.PhaseNoiseSpectrum((4.0,), (-60.0,)), 1.0)


def test_psd_interpolation_and_coverage():
    psd = nz.to_dephasing_psd(nz.PhaseNoiseSpectrum((10.0, 1e3), (-80.0, -120.0)))
    w = TWO_PI * 100.0
    assert psd(w) == pytest.approx(nz.dephasing_psd_value(100.0, -100.0), rel=1e-12)
    with pytest.raises(nz.CoverageError) as exc:
        psd(TWO_PI * 1e4)
    assert exc.value.gaps


@pytest.mark.parametrize("tau", [10e-9, 1e-6, 1e-3])
def test_free_evolution_filter_function(tau):
    # beyond w tau ~ 1e3 the closed form itself loses digits to argument roundoff
    w = np.geomspace(1e-4, 1e3, 400) / tau
    f = nz.filter_function(nz.ControlSegmentList.free(tau), w)
    exact = 4 * np.sin(w * tau / 2) ** 2
    mask = exact > 1e-200
    assert np.max(np.abs(f[mask] - exact[mask]) / exact[mask]) < 1e-10


@pytest.mark.parametrize("ctrl", [
    nz.ControlSegmentList.rotation(math.pi, 29e-9),
    nz.ControlSegmentList.rotation(math.pi / 2, 20e-9, math.pi / 2),
    nz.ControlSegmentList((nz.ControlSegment(10e-9, 1e8), nz.ControlSegment(5e-9),
                           nz.ControlSegment(12e-9, -2e8, 0.7))),
])
def test_filter_function_matches_quadrature(ctrl):
    w = np.geomspace(1e5, 1e10, 60)
    a = nz.filter_function(ctrl, w)
    b = nz.filter_function_quadrature(ctrl, w)
    assert np.max(np.abs(a - b) / b) < 1e-8


def test_filter_function_vanishes_as_omega_squared():
    ctrl = nz.ControlSegmentList.rotation(math.pi, 29e-9)
    f1, f2 = nz.filter_function(ctrl, np.array([1e2, 1e3]))
    assert f2 / f1 == pytest.approx(100.0, rel=1e-4)


@pytest.mark.parametrize("tau", [10e-9, 100e-9])
def test_white_noise_chi(tau):
    s0 = 1e3
    chi = nz.dephasing_chi(nz.white_psd(s0), nz.ControlSegmentList.free(tau), band_hz=(1e-3, 1e10))
    assert chi == pytest.approx(s0 * tau, rel=1e-2)


def test_white_noise_monte_carlo():
    ctrl = nz.ControlSegmentList.rotation(math.pi, 30e-9)
    s0 = 1e3
    chi = nz.dephasing_chi(nz.white_psd(s0), ctrl, band_hz=(1e-3, 1e10))
    mc, se = nz.monte_carlo_chi(ctrl, s0, 20000, np.random.default_rng(3), n_steps=500)
    assert abs(mc - chi) < 3 * se + 0.01 * chi


def test_zero_psd_gives_zero_infidelity():
    psd = nz.DephasingPsd(np.array([1.0, 1e12]), np.zeros(2))
    assert nz.infidelity_floor(psd, nz.ControlSegmentList.free(1e-6)) == 0.0


def test_band_coverage_error():
    psd = nz.to_dephasing_psd(nz.DDS_LIKE.spectrum(f_lo=10.0))
    with pytest.raises(nz.CoverageError):
        nz.dephasing_chi(psd, nz.ControlSegmentList.free(1e-6), band_hz=(1.0, 1e8))


def test_synthetic_sources_order():
    table = nz.infidelity_table({m.label: m.spectrum() for m in (nz.DDS_LIKE, nz.GENERATOR_LIKE)},
                                [10e-9, 1e-6])
    assert np.all(table["xpi_dds-like"] > table["xpi_generator-like"])
    assert np.all(np.diff(table["idle_dds-like"]) > 0)
    assert nz.DDS_LIKE.level(1e3) > nz.GENERATOR_LIKE.level(1e3)


def test_write_columns(tmp_path):
    p = nz.write_columns(tmp_path / "c.csv", {"a": [1.0, 2.0], "b": [0.1, 0.2]})
    assert p.read_text().splitlines() == ["a,b", "1.0,0.1", "2.0,0.2"]


@pytest.mark.parametrize("bad", [dict(duration=0.0), dict(duration=-1.0)])
def test_segment_validation(bad):
    with pytest.raises(ValueError):
        nz.ControlSegment(**bad)
