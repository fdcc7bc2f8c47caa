import math

import numpy as np
import pytest

from ddsqubit import chain, dds
from ddsqubit.device import DeviceModel
from ddsqubit.pulse import CalibrationTable, PrimitiveGate as P

CLEAN = DeviceModel(T1=math.inf, T2=math.inf)
CALIB = CalibrationTable.for_gate_length(29e-9, a_pi=0.0849, a_pi_2=0.04245, beta=0.0)


def _p1(mode, gates=(P.X180,), dac=dds.DacConfig(), distortion=None):
    shapes = chain.gate_shapes(gates, CALIB)
    out = chain.simulate(shapes, CLEAN, dac, chain.ChainSettings(mode=mode), distortion, readout_delay=0.0)
    return out


def test_build_schedule_back_to_back():
    shapes = chain.gate_shapes([P.X180, P.I, P.Y90], CALIB)
    pulses, t_end = chain.build_schedule(shapes)
    assert [p.start for p in pulses] == pytest.approx([0.0, 29e-9, 58e-9])
    assert t_end == pytest.approx(87e-9)


@pytest.mark.parametrize("mode", ["upconversion", "hybrid", "full_dds"])
def test_pi_pulse_inverts(mode):
    out = _p1(mode)
    assert out.p_excited > 0.98
    assert out.leakage < 0.02


def test_hybrid_matches_upconversion():
    gates = (P.X90, P.Y180, P.XM90, P.Y90)
    a = _p1("upconversion", gates).state
    b = _p1("hybrid", gates, dds.DacConfig(quantize=False)).state
    assert np.max(np.abs(a - b)) < 5e-3


def test_readout_droop_only_with_distortion():
    assert _p1("full_dds").readout_droop == 0.0
    long = (P.X180,) * 400
    d = _p1("full_dds", long, distortion=dds.DistortionModel(tau=31e-6, d_sat=0.2)).readout_droop
    assert 0.0 < d < 0.2


def test_invalid_mode():
    with pytest.raises(ValueError):
        chain.ChainSettings(mode="mixer")
    with pytest.raises(ValueError):
        chain.ChainSettings(cutoff=0.0)


def test_full_dds_needs_nyquist_for_readout():
    with pytest.raises(dds.NyquistError):
        _p1("full_dds", dac=dds.DacConfig(sample_rate=14.44e9))
