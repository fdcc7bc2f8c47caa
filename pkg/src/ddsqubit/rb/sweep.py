"""Parameter sweeps: gate length, DAC full-scale fraction and sample rate.

Gate-length and full-scale points are re-tuned individually; the sample-rate
sweep tunes once at the base DAC setting and reuses that table.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

from .. import dds
from ..device import DeviceModel, coherence_limit_epg
from ..pulse import CalibrationTable, gaussian_area
from .campaign import RbConfig, RbResult, _jsonable, run_rb
from .tuneup import TuneUpResult, guess_a_pi, tune_up

PARAMETERS = ("gate_length", "full_scale_fraction", "sample_rate")


class SweepError(RuntimeError):
    """A sweep point failed; ``value`` names it and ``__cause__`` holds the reason."""

    def __init__(self, parameter: str, value: float, cause: BaseException):
        super().__init__(f"{parameter} = {value:g}: {cause}")
        self.parameter = parameter
        self.value = value


@dataclass
class SweepRow:
    value: float
    epg: float
    epg_sigma: float
    coherence_limit: Optional[float] = None
    a_pi: Optional[float] = None
    beta: Optional[float] = None
    tuneup_iterations: Optional[int] = None
    effective_bits: Optional[float] = None


@dataclass
class SweepTable:
    parameter: str
    rows: List[SweepRow]
    results: List[RbResult] = field(default_factory=list, repr=False)

    @property
    def values(self) -> List[float]:
        return [r.value for r in self.rows]

    @property
    def epg(self) -> List[float]:
        return [r.epg for r in self.rows]

    @property
    def epg_sigma(self) -> List[float]:
        return [r.epg_sigma for r in self.rows]

    def to_dict(self) -> dict:
        return {"parameter": self.parameter, "rows": [dataclasses.asdict(r) for r in self.rows]}

    def to_json(self, path=None) -> str:
        text = json.dumps(_jsonable(self.to_dict()), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    def write_csv(self, path) -> Path:
        path = Path(path)
        cols = [f.name for f in dataclasses.fields(SweepRow)]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([self.parameter if c == "value" else c for c in cols])
            for r in self.rows:
                w.writerow(["" if getattr(r, c) is None else getattr(r, c) for c in cols])
        return path


def device_for_fraction(device: DeviceModel, calib: CalibrationTable, fraction: float) -> DeviceModel:
    """Rescale the drive coupling so a pi pulse needs ``fraction`` of full scale."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"full-scale fraction must be in (0, 1], got {fraction}")
    rabi = math.pi / (fraction * gaussian_area(calib.sigma_s, calib.truncation))
    return device.replace(rabi_per_fullscale=rabi)


def _tune(device, dac, calib, master_seed, settings) -> TuneUpResult:
    start = calib.replace(a_pi=guess_a_pi(device, calib), a_pi_2=None)
    return tune_up(device, dac, start, master_seed, settings=settings)


def sweep(parameter: str, values: Sequence[float], cfg: RbConfig, device: DeviceModel,
          dac: dds.DacConfig, master_seed: int, gate_length: float = 29e-9,
          buffer: float = 5e-9, jobs: int = 1) -> SweepTable:
    """Tune and benchmark at each value of one parameter.

    Args:
        parameter: ``gate_length`` (s), ``full_scale_fraction`` (pi-pulse
            amplitude as a fraction of full scale) or ``sample_rate`` (S/s).
        values: Points to visit, in order.
        gate_length: Gate slot used by the fraction and sample-rate sweeps.

    Raises:
        SweepError: tune-up or RB failed at one value; raised from the cause.
    """
    if parameter not in PARAMETERS:
        raise ValueError(f"parameter must be one of {PARAMETERS}")
    settings = cfg.chain_settings()
    rows: List[SweepRow] = []
    results: List[RbResult] = []
    shared: Optional[TuneUpResult] = None
    for v in values:
        v = float(v)
        try:
            dev, d = device, dac
            calib = CalibrationTable.for_gate_length(v if parameter == "gate_length" else gate_length,
                                                     buffer_s=buffer)
            bits = None
            if parameter == "full_scale_fraction":
                dev = device_for_fraction(device, calib, v)
                bits = dds.effective_bits(v, dac.bits)
            if parameter == "sample_rate":
                d = dataclasses.replace(dac, sample_rate=v)
                if shared is None:
                    shared = _tune(dev, dac, calib, master_seed, settings)
                tuned = shared
            else:
                tuned = _tune(dev, d, calib, master_seed, settings)
            res = run_rb(cfg, dev, tuned.calib, d, master_seed, jobs=jobs)
        except Exception as exc:  # re-raised with the failing value attached
            raise SweepError(parameter, v, exc) from exc
        limit = coherence_limit_epg(v, dev) if parameter == "gate_length" else None
        rows.append(SweepRow(v, res.epg, res.epg_sigma, limit, tuned.calib.a_pi, tuned.calib.beta,
                             tuned.report.iterations, bits))
        results.append(res)
    return SweepTable(parameter, rows, results)
