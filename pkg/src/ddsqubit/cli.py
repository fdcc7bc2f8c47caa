"""``ddsqubit`` command line: synth, rb, sweep, noise, distortion, tuneup.

Every command reads one JSON config (``--config``, optional) plus
``--set section.key=value`` overrides and writes into the output directory
(``--out``, else ``output_dir`` in the config, else ``$DDSQUBIT_OUTPUT_DIR``,
else ``./ddsqubit-out``).  Files are staged in a temporary directory and
moved into place only after the command succeeds.

Exit codes: 0 success, 1 module error, 2 usage/config error or a tone above
the Nyquist frequency.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import platform
import shutil
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import scipy

from . import __version__, dds, noise
from .config import ConfigError, ExperimentConfig, load_config
from .pulse import CalibrationTable, PulseShape
from .rb import (RbConfig, SweepError, TuneUpReport, TuneUpResult, background_subtract_run, guess_a_pi,
                 run_rb, sweep, tune_up)

log = logging.getLogger("ddsqubit")

EXIT_ERROR = 1
EXIT_USAGE = 2


# ---------------------------------------------------------------- output staging

class Staging:
    """Collects output files in a temp dir; ``commit`` moves them into place."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        out_dir.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=".partial-", dir=out_dir))
        self.names: List[str] = []

    def path(self, name: str) -> Path:
        self.names.append(name)
        return self.tmp / name

    def write_text(self, name: str, text: str) -> Path:
        p = self.path(name)
        p.write_text(text)
        return p

    def commit(self) -> List[Path]:
        final = []
        for name in self.names:
            src = self.tmp / name
            if src.exists():
                os.replace(src, self.out_dir / name)
                final.append(self.out_dir / name)
        shutil.rmtree(self.tmp, ignore_errors=True)
        return final

    def abort(self) -> None:
        shutil.rmtree(self.tmp, ignore_errors=True)


def _json(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def manifest(command: str, cfg: ExperimentConfig, files: List[str]) -> dict:
    return {
        "command": command,
        "config_hash": cfg.config_hash(),
        "master_seed": cfg.master_seed,
        "config": cfg.to_dict(),
        "files": sorted(files),
        "versions": {"ddsqubit": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


# ---------------------------------------------------------------- shared steps

def calibrate(cfg: ExperimentConfig, device=None, dac=None) -> TuneUpResult:
    """Tune-up from the linear-response guess, or the table given in the config."""
    device = device or cfg.device
    dac = dac or cfg.dac
    tu = cfg.tuneup
    if tu.calibration is not None:
        return TuneUpResult(CalibrationTable.from_dict(dict(tu.calibration)), TuneUpReport(converged=True))
    calib = CalibrationTable.for_gate_length(tu.gate_length, buffer_s=tu.buffer)
    start = calib.replace(a_pi=guess_a_pi(device, calib) * (1.0 + tu.initial_error))
    return tune_up(device, dac, start, cfg.master_seed, settings=cfg.rb.chain_settings(),
                   tol=tu.tol, max_iter=tu.max_iter)


def _schedule_tones(doc: dict, default_anharmonicity: float):
    tones = []
    end = 0.0
    for k, t in enumerate(doc.get("tones", [])):
        pulses = []
        for p in t.get("pulses", []):
            shape = PulseShape(sigma=float(p["sigma"]), truncation=float(p.get("truncation", 4.0)),
                               amplitude=float(p.get("amplitude", 0.0)),
                               drag_coefficient=float(p.get("drag", 0.0)), phase=float(p.get("phase", 0.0)))
            start = float(p.get("start", 0.0))
            pulses.append(dds.ScheduledPulse(start, shape))
            end = max(end, start + shape.envelope_duration)
        tones.append(dds.ToneSpec(float(t["frequency"]), tuple(pulses), float(t.get("phase_origin", 0.0)),
                                  float(t.get("anharmonicity", default_anharmonicity)),
                                  str(t.get("label", f"tone{k}"))))
    if not tones:
        raise ConfigError("schedule has no tones")
    duration = float(doc.get("duration", end))
    if not duration > 0:
        raise ConfigError("schedule duration must be positive")
    return tones, duration


# ---------------------------------------------------------------- commands

def cmd_synth(cfg: ExperimentConfig, args, st: Staging) -> dict:
    doc = json.loads(Path(args.schedule).read_text())
    tones, duration = _schedule_tones(doc, cfg.device.anharmonicity)
    w = dds.synthesize(tones, cfg.dac, (0.0, duration))
    stem = args.name
    info = {"config_hash": cfg.config_hash(), "tones": [t.name for t in tones], "duration_s": duration,
            "ddsqubit": __version__}
    dds.write_waveform(w, st.path(f"{stem}.bin"), extra=info)
    st.names.append(f"{stem}.json")
    dds.export_csv(w, st.path(f"{stem}.csv"))
    return {"n_samples": w.n_samples, "files": [f"{stem}.bin", f"{stem}.json", f"{stem}.csv"]}


def _write_rb(st: Staging, stem: str, res) -> None:
    st.write_text(f"{stem}.json", res.to_json() + "\n")
    res.write_csv(st.path(f"{stem}.csv"))


def cmd_rb(cfg, args, st: Staging) -> dict:
    from . import plotting
    calib = None
    if cfg.rb.mode != "ideal":
        tuned = calibrate(cfg)
        calib = tuned.calib
        st.write_text("calibration.json", calib.to_json() + "\n")
    res = run_rb(cfg.rb, cfg.device, calib, cfg.dac, cfg.master_seed, jobs=args.jobs)
    _write_rb(st, "rb_result", res)
    plotting.plot_rb(res, st.path("rb.png"))
    return {"epg": res.epg, "epg_sigma": res.epg_sigma, "B": res.B, "flags": res.flags}


def cmd_tuneup(cfg, args, st: Staging) -> dict:
    from . import plotting
    tuned = calibrate(cfg)
    st.write_text("calibration.json", tuned.calib.to_json() + "\n")
    st.write_text("tuneup_report.json", _json(tuned.report.to_dict()))
    if tuned.report.angle_errors:
        plotting.plot_tuneup(tuned.report, st.path("tuneup.png"))
    return {"iterations": tuned.report.iterations, "a_pi": tuned.calib.a_pi, "beta": tuned.calib.beta}


def cmd_sweep(cfg, args, st: Staging) -> dict:
    from . import plotting
    sw = cfg.sweep
    table = sweep(sw.parameter, sw.values, cfg.rb, cfg.device, cfg.dac, cfg.master_seed,
                  gate_length=cfg.tuneup.gate_length, buffer=cfg.tuneup.buffer, jobs=args.jobs)
    st.write_text("sweep.json", table.to_json() + "\n")
    table.write_csv(st.path("sweep.csv"))
    plotting.plot_sweep(table, st.path("sweep.png"))
    return {"parameter": sw.parameter, "epg": table.epg}


def _load_sources(ns) -> Dict[str, noise.PhaseNoiseSpectrum]:
    out = {}
    for src in ns.sources:
        if src in noise.SYNTHETIC_SOURCES:
            lo, hi = ns.band_hz
            out[src] = noise.SYNTHETIC_SOURCES[src].spectrum(min(lo, 1.0), max(hi, 1e8))
        else:
            spec = noise.extrapolate_low(noise.load_spectrum(Path(src)), ns.extrapolate_to_hz)
            out[spec.label or Path(src).stem] = spec
    return out


def cmd_noise(cfg, args, st: Staging) -> dict:
    from . import plotting
    ns = cfg.noise
    spectra = _load_sources(ns)
    labels = list(spectra)
    summary = {"band_hz": list(ns.band_hz), "sensitivity": {}}
    table = noise.infidelity_table(spectra, ns.gate_lengths, ns.band_hz)
    for lb in labels:
        spec = spectra[lb]
        noise.write_columns(st.path(f"phase_noise_{lb}.csv"), {"freq_hz": spec.frequencies, "dBc_per_hz": spec.levels})
        psd = noise.to_dephasing_psd(spec)
        noise.write_columns(st.path(f"dephasing_psd_{lb}.csv"),
                     {"freq_hz": spec.frequencies, "S_rad2_per_s": psd.values})
        ctrl = noise.ControlSegmentList.rotation(math.pi, cfg.tuneup.gate_length)
        summary["sensitivity"][lb] = noise.band_sensitivity(psd, ctrl, ns.band_hz)
    noise.write_columns(st.path("infidelity_vs_gate_length.csv"), table)
    st.write_text("noise_summary.json", _json(summary))
    same_grid = all(spectra[lb].frequencies == spectra[labels[0]].frequencies for lb in labels)
    if same_grid:
        f = spectra[labels[0]].frequencies
        plotting.plot_noise(f, {lb: spectra[lb].levels for lb in labels},
                            {lb: noise.to_dephasing_psd(spectra[lb]).values for lb in labels},
                            table, st.path("noise.png"))
    return {k: (v.tolist() if hasattr(v, "tolist") else v) for k, v in table.items()}


def distortion_configs(cfg: ExperimentConfig):
    """Device and RB settings used by the distortion study."""
    dset = cfg.distortion
    device = cfg.device.replace(readout_s0=dset.readout_s0, readout_s1=dset.readout_s1)
    rb_cfg = RbConfig(**{**cfg.rb.to_dict(), "mode": "full_dds", "lengths": list(dset.lengths)})
    return device, rb_cfg


def cmd_distortion(cfg, args, st: Staging) -> dict:
    from . import plotting
    device, rb_cfg = distortion_configs(cfg)
    dset = cfg.distortion
    calib = calibrate(cfg, device=device).calib
    raw, corrected, bg = background_subtract_run(rb_cfg, device, cfg.dac, cfg.master_seed, calib,
                                                 dset.model(), dset.background_offset, jobs=args.jobs)
    clean = run_rb(rb_cfg, device, calib, cfg.dac, cfg.master_seed, distortion=None, jobs=args.jobs)
    for stem, res in (("raw", raw), ("corrected", corrected), ("no_distortion", clean)):
        _write_rb(st, f"distortion_{stem}", res)
    summary = {
        "raw": {"B": raw.B, "sigma_B": raw.sigma_B, "epg": raw.epg, "epg_sigma": raw.epg_sigma},
        "corrected": {"B": corrected.B, "sigma_B": corrected.sigma_B, "epg": corrected.epg,
                      "epg_sigma": corrected.epg_sigma},
        "no_distortion": {"B": clean.B, "sigma_B": clean.sigma_B, "epg": clean.epg,
                          "epg_sigma": clean.epg_sigma},
        "max_background_excited": bg,
    }
    st.write_text("distortion_summary.json", _json(summary))
    plotting.plot_distortion({"raw": raw, "corrected": corrected, "no distortion": clean},
                             st.path("distortion.png"))
    return summary


COMMANDS: Dict[str, Callable] = {"synth": cmd_synth, "rb": cmd_rb, "sweep": cmd_sweep, "noise": cmd_noise,
                                 "distortion": cmd_distortion, "tuneup": cmd_tuneup}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ddsqubit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", "-c", help="JSON experiment config")
        s.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config value, e.g. rb.n_seeds=4 (repeatable)")
        s.add_argument("--out", "-o", help="output directory")
        s.add_argument("--jobs", "-j", type=int, default=1, help="parallel sequence workers")
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "synth":
            s.add_argument("schedule", help="JSON tone schedule")
            s.add_argument("--name", default="waveform", help="output file stem")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config, args.overrides)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = cfg.resolve_output_dir(args.out)
    st = Staging(out)
    try:
        summary = COMMANDS[args.command](cfg, args, st)
        if args.command != "synth":
            st.write_text("manifest.json", _json(manifest(args.command, cfg, list(st.names) + ["manifest.json"])))
    except dds.NyquistError as exc:
        st.abort()
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, KeyError, json.JSONDecodeError) as exc:
        st.abort()
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # every module error ends the run without outputs
        st.abort()
        if isinstance(exc, SweepError) and isinstance(exc.__cause__, dds.NyquistError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        log.debug("failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    files = st.commit()
    print(json.dumps({"command": args.command, "out": str(out), "files": [f.name for f in files],
                      "summary": _plain(summary)}, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
