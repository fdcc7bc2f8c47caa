import csv
import importlib
import json

import pytest

from ddsqubit import dds
from ddsqubit.device import DeviceModel
from ddsqubit.pulse import CalibrationTable
from ddsqubit.rb import RbConfig

sw = importlib.import_module("ddsqubit.rb.sweep")
CFG = RbConfig(lengths=(1, 8, 32, 64), n_seeds=2, exact_populations=True)
DAC = dds.DacConfig(quantize=False)


@pytest.fixture(scope="module")
def gate_table():
    return sw.sweep("gate_length", [20e-9, 40e-9], CFG, DeviceModel(), DAC, 0)


def test_gate_length_rows(gate_table):
    assert gate_table.values == [20e-9, 40e-9]
    r20, r40 = gate_table.rows
    assert r20.coherence_limit < r40.coherence_limit
    assert r20.a_pi > r40.a_pi
    assert all(r.effective_bits is None for r in gate_table.rows)


def test_table_outputs(gate_table, tmp_path):
    gate_table.write_csv(tmp_path / "s.csv")
    rows = list(csv.DictReader((tmp_path / "s.csv").open()))
    assert len(rows) == 2 and "gate_length" in rows[0] and rows[0]["coherence_limit"]
    d = json.loads(gate_table.to_json())
    assert d["parameter"] == "gate_length" and len(d["rows"]) == 2


def test_device_for_fraction():
    calib = CalibrationTable.for_gate_length(29e-9)
    dev = sw.device_for_fraction(DeviceModel(), calib, 0.0849)
    assert dev.rabi_per_fullscale == pytest.approx(DeviceModel().rabi_per_fullscale, rel=1e-12)
    with pytest.raises(ValueError):
        sw.device_for_fraction(DeviceModel(), calib, 1.5)


def test_failures_name_the_value():
    with pytest.raises(sw.SweepError) as exc:
        sw.sweep("full_scale_fraction", [0.0], CFG, DeviceModel(), DAC, 0)
    assert exc.value.value == 0.0 and isinstance(exc.value.__cause__, ValueError)


def test_unknown_parameter():
    with pytest.raises(ValueError):
        sw.sweep("temperature", [1.0], CFG, DeviceModel(), DAC, 0)
