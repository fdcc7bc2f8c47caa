import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddsqubit import device as dv

INF = math.inf
CLEAN2 = dv.DeviceModel(T1=INF, T2=INF, levels=2)


def test_zero_drive_is_identity():
    rho = dv.pure_state(np.array([1, 1j, 0]) / math.sqrt(2))
    out = dv.evolve(rho, np.zeros(500, complex), 4.773e9, dv.DeviceModel(T1=INF, T2=INF), 1e-10)
    assert np.allclose(out, rho, atol=1e-14)


def test_rabi_pi_rotation():
    n, dt = 1000, 1e-11
    amp = math.pi / (CLEAN2.rabi_per_fullscale * n * dt)
    out = dv.evolve(dv.ground_state(2), np.full(n, amp, complex), CLEAN2.f01, CLEAN2, dt)
    assert dv.populations(out)[1] == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("t", [1e-6, 10e-6, 51e-6])
def test_t1_decay(t):
    model = dv.DeviceModel(levels=2)
    out = dv.idle(dv.basis_state(1, 2), t, model, dt=1e-8)
    assert dv.populations(out)[1] == pytest.approx(math.exp(-t / model.T1), rel=1e-4)


def test_t2_decay_of_coherence():
    model = dv.DeviceModel(levels=2)
    plus = dv.pure_state(np.array([1, 1]) / math.sqrt(2))
    t = 10e-6
    out = dv.idle(plus, t, model, dt=1e-8)
    assert 2 * abs(out[0, 1]) == pytest.approx(math.exp(-t / model.T2), rel=1e-4)


@given(st.floats(1e-4, 0.3), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
@settings(max_examples=50, deadline=None)
def test_kraus_channels_are_trace_preserving(g1, g2, phi):
    ops = dv.amplitude_damping_kraus(g1, g2, 3)
    assert np.allclose(sum(k.conj().T @ k for k in ops), np.eye(3), atol=1e-12)
    n = np.arange(3)
    deph = np.exp(-((n[:, None] - n[None, :]) ** 2) * phi)
    dk = dv.dephasing_kraus(deph)
    assert np.allclose(sum(k.conj().T @ k for k in dk), np.eye(3), atol=1e-12)
    rho = np.full((3, 3), 1 / 3, complex)
    assert np.allclose(dv.apply_kraus(rho, dk), rho * deph, atol=1e-12)


def test_driven_state_stays_physical():
    model = dv.DeviceModel()
    env = 0.3 * np.exp(1j * np.linspace(0, 6, 3000))
    out = dv.evolve(dv.ground_state(), env, model.f01 + 20e6, model, 1e-11)
    assert np.trace(out).real == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(out, out.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(out).min() > -1e-9


def test_two_level_matches_three_level_at_weak_drive():
    m3 = dv.DeviceModel(T1=INF, T2=INF, anharmonicity=50e9)
    m2 = m3.replace(levels=2)
    env = np.full(2000, 0.05, complex)
    p3 = dv.populations(dv.evolve(dv.ground_state(3), env, m3.f01, m3, 1e-11))
    p2 = dv.populations(dv.evolve(dv.ground_state(2), env, m2.f01, m2, 1e-11))
    assert p3[2] < 1e-4
    assert p3[1] == pytest.approx(p2[1], abs=1e-3)


def test_bad_state_shape():
    with pytest.raises(ValueError):
        dv.evolve(dv.ground_state(2), np.zeros(3), 0.0, dv.DeviceModel(), 1e-9)


@pytest.mark.parametrize("kwargs", [dict(levels=4), dict(T1=-1.0), dict(T1=10e-6, T2=30e-6),
                                    dict(readout_fidelity=0.3), dict(anharmonicity=0.0)])
def test_device_validation(kwargs):
    with pytest.raises(ValueError):
        dv.DeviceModel(**kwargs)


def test_device_json_round_trip(tmp_path):
    m = dv.DeviceModel(T1=40e-6)
    m.to_json(tmp_path / "d.json")
    assert dv.DeviceModel.from_json(tmp_path / "d.json") == m


@pytest.mark.parametrize("state, fid, expected", [
    (dv.ground_state(2), 0.93, 0.93),
    (np.eye(2, dtype=complex) / 2, 0.93, 0.5),
    (np.eye(2, dtype=complex) / 2, 0.7, 0.5),
    (dv.basis_state(1, 2), 1.0, 0.0),
])
def test_reported_ground_probability(state, fid, expected):
    m = dv.DeviceModel(levels=2, readout_fidelity=fid)
    assert dv.reported_ground_probability(state, m) == pytest.approx(expected, abs=1e-15)


def test_measure_statistics():
    m = dv.DeviceModel(levels=2)
    rng = np.random.default_rng(1)
    bits = [dv.measure(dv.ground_state(2), m, rng) for _ in range(20000)]
    assert np.mean(bits) == pytest.approx(0.07, abs=0.006)
    perfect = m.replace(readout_fidelity=1.0)
    assert all(dv.measure(dv.basis_state(1, 2), perfect, rng) == 1 for _ in range(100))


@pytest.mark.parametrize("k, droop, expected", [(0, 0.0, 1.0), (1, 0.0, 0.4), (0, 0.2, 0.8)])
def test_readout_amplitude(k, droop, expected):
    assert dv.readout_amplitude(dv.basis_state(k), droop) == pytest.approx(expected, abs=1e-15)


def test_readout_amplitude_rejects_bad_droop():
    with pytest.raises(ValueError):
        dv.readout_amplitude(dv.ground_state(), 1.0)


def test_amplitude_readout_matches_fidelity():
    m = dv.DeviceModel(levels=2)
    assert dv.amplitude_ground_probability(dv.ground_state(2), 0.0, m) == pytest.approx(0.93, abs=1e-12)
    rng = np.random.default_rng(2)
    amps = dv.sample_readout_amplitudes(dv.ground_state(2), 0.0, m, rng, 40000)
    assert np.mean(dv.classify_amplitudes(amps, m) == 0) == pytest.approx(0.93, abs=0.005)


def test_coherence_limit():
    m = dv.DeviceModel()
    assert dv.coherence_limit_epg(29e-9, m) == pytest.approx(29e-9 * (1 / (3 * 32e-6) + 1 / (6 * 51e-6)), rel=1e-3)
    assert dv.coherence_limit_epg(29e-9, m) == pytest.approx(3.97e-4, rel=2e-3)
    assert dv.coherence_limit_epg(1e-15, m) < 1e-10
    assert dv.coherence_limit_epg(29e-9, m.replace(T1=INF, T2=INF)) == 0.0
    with pytest.raises(ValueError):
        dv.coherence_limit_epg(0.0, m)


def test_state_csv(tmp_path):
    p = dv.write_state_csv(dv.ground_state(), tmp_path / "s.csv")
    assert len(p.read_text().splitlines()) == 10
