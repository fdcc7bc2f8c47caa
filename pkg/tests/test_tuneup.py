import math

import pytest

from ddsqubit import dds
from ddsqubit.device import DeviceModel
from ddsqubit.pulse import CalibrationTable, PrimitiveGate as P, primitive_to_shape
from ddsqubit.rb import tuneup as tu

DEV = DeviceModel()
DAC = dds.DacConfig(quantize=False)


@pytest.fixture(scope="module")
def tuned_29ns():
    start = CalibrationTable.for_gate_length(29e-9, beta=0.0)
    start = start.replace(a_pi=1.2 * tu.guess_a_pi(DEV, start))
    return tu.tune_up(DEV, DAC, start, 0)


def test_converges_from_20_percent_high(tuned_29ns):
    rep = tuned_29ns.report
    assert rep.converged and rep.iterations <= 10
    for gate, target in ((P.X180, math.pi), (P.X90, math.pi / 2)):
        shape = primitive_to_shape(gate, tuned_29ns.calib)
        assert tu.pulse_angle_error(shape, target, DEV, DAC) < 1e-4


def test_drag_weights(tuned_29ns):
    rep = tuned_29ns.report
    assert -0.7 < rep.beta_phase < -0.3
    assert rep.leakage_tuned < rep.leakage_beta0


def test_tuned_table_is_a_fixed_point(tuned_29ns):
    again = tu.tune_up(DEV, DAC, tuned_29ns.calib, 1)
    assert again.calib.a_pi == pytest.approx(tuned_29ns.calib.a_pi, rel=1e-4)
    assert again.calib.beta == pytest.approx(tuned_29ns.calib.beta, abs=1e-3)
    assert again.report.coarse_scan is None


def test_two_level_leaves_beta_alone():
    dev = DEV.replace(levels=2)
    start = CalibrationTable.for_gate_length(29e-9, beta=0.7)
    start = start.replace(a_pi=1.1 * tu.guess_a_pi(dev, start))
    res = tu.tune_up(dev, DAC, start, 0)
    assert res.calib.beta == 0.7
    assert res.report.beta_leakage is None and res.report.beta_phase is None


def test_too_weak_drive_is_reported():
    dev = DEV.replace(levels=2, rabi_per_fullscale=DEV.rabi_per_fullscale / 15)
    start = CalibrationTable.for_gate_length(29e-9, a_pi=0.9)
    with pytest.raises(tu.TuneUpError) as exc:
        tu.tune_up(dev, DAC, start, 0)
    assert exc.value.report is not None


def test_needs_initial_guess():
    with pytest.raises(ValueError):
        tu.tune_up(DEV, DAC, CalibrationTable.for_gate_length(29e-9), 0)


def test_bisection_resolves_a_staircase():
    # an error signal with a flat step never reaches tol; the bracket closes instead
    def eps(a):
        x = math.pi * (a / 0.5 - 1.0)
        return (math.floor(x * 1e3) + 0.5) * 1e-3

    b = tu._Bracketed(math.pi, 1e-6, 1e-6)
    a = 0.4
    for _ in range(60):
        a, done = b.step(a, eps(a))
        if done:
            break
    assert done and abs(a - 0.5) < 1e-6
