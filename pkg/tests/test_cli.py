import json
import math

import numpy as np
import pytest

from ddsqubit import cli, dds
from ddsqubit.pulse import PulseShape, envelope


def _schedule(tmp_path, tones, duration=None):
    doc = {"tones": tones}
    if duration is not None:
        doc["duration"] = duration
    p = tmp_path / "schedule.json"
    p.write_text(json.dumps(doc))
    return str(p)


XPI = {"start": 0.0, "sigma": 6e-9, "truncation": 4, "amplitude": 0.5, "drag": 0.0}


def test_synth_single_pulse(tmp_path, capsys):
    out = tmp_path / "out"
    sched = _schedule(tmp_path, [{"frequency": 4.773e9, "label": "qubit", "pulses": [XPI]}], 24e-9)
    assert cli.main(["synth", sched, "--out", str(out), "--set", "dac.sample_rate=65e9"]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["waveform.bin", "waveform.csv", "waveform.json"]
    meta = json.loads((out / "waveform.json").read_text())
    assert meta["n_samples"] == math.ceil(24e-9 * 65e9 - 1e-9)
    assert json.loads(capsys.readouterr().out)["summary"]["n_samples"] == meta["n_samples"]


def test_synth_nyquist_exit_code(tmp_path, capsys):
    out = tmp_path / "out"
    sched = _schedule(tmp_path, [{"frequency": 10.166e9, "label": "readout", "pulses": [XPI]}])
    assert cli.main(["synth", sched, "--out", str(out), "--set", "dac.sample_rate=14.44e9"]) == 2
    assert "readout" in capsys.readouterr().err
    assert not out.exists() or not any(out.iterdir())


def test_synth_two_tones_round_trip(tmp_path):
    out = tmp_path / "out"
    q = dict(XPI, start=10e-9, amplitude=0.4)
    r = {"start": 0.0, "sigma": 20e-9, "truncation": 4, "amplitude": 0.4}
    sched = _schedule(tmp_path, [{"frequency": 4.773e9, "label": "qubit", "pulses": [q]},
                                 {"frequency": 10.166e9, "label": "readout", "pulses": [r]}])
    assert cli.main(["synth", sched, "--out", str(out)]) == 0
    w = dds.read_waveform(out / "waveform.bin")
    for f, pulse in ((4.773e9, q), (10.166e9, r)):
        shape = PulseShape(sigma=pulse["sigma"], truncation=pulse["truncation"], amplitude=pulse["amplitude"])
        bb = dds.demodulate(w, f, 1e9)
        i_env, _ = envelope(shape, bb.times - pulse["start"], 0.0)
        inside = (bb.times > pulse["start"]) & (bb.times < pulse["start"] + shape.envelope_duration)
        err = np.sqrt(np.mean((bb.values.real[inside] - i_env[inside]) ** 2)) / pulse["amplitude"]
        assert err < 0.03


@pytest.fixture
def ideal_args(tmp_path):
    return ["rb", "--set", "rb.mode=ideal", "--set", "rb.lengths=[1,4,16,64]", "--set", "rb.n_seeds=3"]


def test_rb_ideal(tmp_path, ideal_args):
    out = tmp_path / "a"
    assert cli.main(ideal_args + ["--out", str(out)]) == 0
    res = json.loads((out / "rb_result.json").read_text())
    assert res["epg"] <= 5e-7
    names = {p.name for p in out.iterdir()}
    assert {"rb_result.json", "rb_result.csv", "rb.png", "manifest.json"} <= names
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "rb" and "rb_result.json" in man["files"]


def test_rb_results_are_byte_identical(tmp_path, ideal_args):
    args = ideal_args + ["--set", "rb.depolarizing=0.01", "--set", "rb.exact_populations=false"]
    cli.main(args + ["--out", str(tmp_path / "a")])
    cli.main(args + ["--out", str(tmp_path / "b")])
    a = (tmp_path / "a" / "rb_result.json").read_bytes()
    assert a == (tmp_path / "b" / "rb_result.json").read_bytes()


def test_output_dir_from_environment(tmp_path, monkeypatch, ideal_args):
    monkeypatch.setenv("DDSQUBIT_OUTPUT_DIR", str(tmp_path / "env"))
    assert cli.main(ideal_args) == 0
    assert (tmp_path / "env" / "rb_result.json").exists()


@pytest.mark.parametrize("argv", [
    ["rb", "--set", "rb.bogus=1"],
    ["rb", "--set", "rb.n_seeds"],
    ["rb", "--jobs", "0"],
    ["rb", "--config", "/nonexistent/config.json"],
])
def test_usage_errors(tmp_path, argv):
    assert cli.main(argv + ["--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o").exists() or not any((tmp_path / "o").iterdir())


def test_noise_command(tmp_path):
    out = tmp_path / "n"
    assert cli.main(["noise", "--out", str(out), "--set", "noise.gate_lengths=[1e-8,1e-7]"]) == 0
    names = {p.name for p in out.iterdir()}
    for lb in ("dds-like", "generator-like"):
        assert f"phase_noise_{lb}.csv" in names and f"dephasing_psd_{lb}.csv" in names
    rows = (out / "infidelity_vs_gate_length.csv").read_text().splitlines()
    assert rows[0].startswith("gate_length_s,") and len(rows) == 3
    summary = json.loads((out / "noise_summary.json").read_text())
    assert summary["sensitivity"]["dds-like"]["chi"] > 0


def test_noise_from_csv(tmp_path):
    spec = tmp_path / "clock.csv"
    spec.write_text("freq_hz,dBc_per_hz\n10,-80\n1e3,-110\n1e5,-130\n1e8,-150\n")
    out = tmp_path / "n"
    assert cli.main(["noise", "--out", str(out), "--set", f'noise.sources=["{spec}"]',
                     "--set", "noise.gate_lengths=[1e-8]"]) == 0
    assert (out / "phase_noise_clock.csv").read_text().splitlines()[1].startswith("1.0,")


def test_tuneup_with_given_calibration(tmp_path):
    out = tmp_path / "t"
    calib = '{"a_pi": 0.085, "a_pi_2": 0.0425, "beta": -0.5}'
    assert cli.main(["tuneup", "--out", str(out), "--set", f"tuneup.calibration={calib}"]) == 0
    assert json.loads((out / "calibration.json").read_text())["a_pi"] == 0.085


def test_sweep_gate_length(tmp_path):
    out = tmp_path / "s"
    argv = ["sweep", "--out", str(out), "--set", "sweep.values=[2e-8,4e-8]", "--set", "dac.quantize=false",
            "--set", "rb.lengths=[1,8,32]", "--set", "rb.n_seeds=1", "--set", "rb.exact_populations=true"]
    assert cli.main(argv) == 0
    header = (out / "sweep.csv").read_text().splitlines()[0]
    assert "coherence_limit" in header and header.startswith("gate_length")


def test_sweep_nyquist_is_usage_error(tmp_path):
    argv = ["sweep", "--out", str(tmp_path / "s"), "--set", "sweep.parameter=sample_rate",
            "--set", "sweep.values=[9e9]", "--set", "dac.quantize=false"]
    with pytest.warns(UserWarning, match="sample rate"):
        assert cli.main(argv) == 2
