"""End-to-end control chain: pulse list -> AWG samples -> baseband -> qubit.

Three signal paths are modelled:

* ``hybrid``: qubit pulses drawn by the DAC (quantized), readout generated
  elsewhere, so the readout never shares the channel.
* ``full_dds``: qubit and readout tones share one DAC channel; the channel
  droop (:class:`~ddsqubit.dds.DistortionModel`) acts on the readout pulse.
* ``upconversion``: analytic envelopes sampled directly on the baseband grid,
  standing in for an ideal IQ mixer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import dds
from .device import DeviceModel, evolve, ground_state
from .pulse import CalibrationTable, PrimitiveGate, PulseShape, envelope, primitive_to_shape

MODES = ("hybrid", "full_dds", "upconversion", "ideal")


@dataclass(frozen=True)
class ReadoutPulse:
    """Gaussian cavity pulse that follows the last gate.

    ``delay`` is measured from the end of the last gate slot to the start of
    the readout envelope.
    """

    amplitude: float = 0.05
    sigma: float = 100e-9
    truncation: float = 4.0
    delay: float = 120e-9

    def shape(self) -> PulseShape:
        return PulseShape(sigma=self.sigma, truncation=self.truncation, amplitude=self.amplitude)

    @property
    def duration(self) -> float:
        return self.sigma * self.truncation


@dataclass(frozen=True)
class ChainSettings:
    """Signal-path options shared by every simulated sequence.

    Attributes:
        mode: One of ``hybrid``, ``full_dds``, ``upconversion``, ``ideal``.
        cutoff: Demodulation low-pass corner (Hz); sets the step ``dt``.
        readout: Readout pulse placement (used by ``full_dds``).
        activity_threshold: Envelope magnitude (full scale) that counts as drive
            activity for the droop model.
    """

    mode: str = "hybrid"
    cutoff: float = 1e9
    readout: ReadoutPulse = field(default_factory=ReadoutPulse)
    activity_threshold: float = 1e-3

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.cutoff > 0:
            raise ValueError("cutoff must be positive")


@dataclass
class Drive:
    """Baseband seen by the qubit plus readout bookkeeping."""

    values: np.ndarray
    dt: float
    frame_freq: float
    t_end: float
    readout_droop: float = 0.0
    waveform: Optional[dds.SampledWaveform] = None


@dataclass
class ChainOutcome:
    state: np.ndarray
    readout_droop: float
    t_end: float

    @property
    def p_excited(self) -> float:
        return float(min(1.0, max(0.0, 1.0 - self.state[0, 0].real)))

    @property
    def leakage(self) -> float:
        return float(self.state[2, 2].real) if self.state.shape[0] > 2 else 0.0


def gate_shapes(primitives: Sequence[PrimitiveGate], calib: CalibrationTable) -> List[PulseShape]:
    return [primitive_to_shape(g, calib) for g in primitives]


def build_schedule(shapes: Sequence[PulseShape], t0: float = 0.0) -> Tuple[Tuple[dds.ScheduledPulse, ...], float]:
    """Place pulses back to back; returns the schedule and the end time."""
    t = t0
    out = []
    for s in shapes:
        out.append(dds.ScheduledPulse(t, s))
        t += s.duration
    return tuple(out), t


def _baseband_grid(t_end: float, cutoff: float, fs: Optional[float] = None) -> Tuple[int, float]:
    if fs is None:
        dt = 1.0 / (20.0 * cutoff)
    else:
        dt = dds.decimation_factor(fs, cutoff) / fs
    return max(1, int(math.ceil(t_end / dt - 1e-9))), dt


def analytic_baseband(pulses: Sequence[dds.ScheduledPulse], n_steps: int, dt: float,
                      anharmonicity: float) -> np.ndarray:
    """``I + iQ`` at step midpoints, straight from the analytic envelopes."""
    out = np.zeros(n_steps, complex)
    cache = {}
    for p in pulses:
        if p.shape.amplitude == 0.0:
            continue
        j0 = int(math.floor(p.start / dt))
        j1 = min(n_steps, int(math.ceil((p.start + p.shape.envelope_duration) / dt)) + 1)
        if j1 <= j0:
            continue
        offset = round((j0 + 0.5) * dt - p.start, 15)
        key = (p.shape, j1 - j0, offset)
        seg = cache.get(key)
        if seg is None:
            i_env, q_env = envelope(p.shape, offset + dt * np.arange(j1 - j0), anharmonicity)
            seg = i_env + 1j * q_env
            cache[key] = seg
        out[j0:j1] += seg
    return out


def drive(shapes: Sequence[PulseShape], device: DeviceModel, dac: dds.DacConfig,
          settings: ChainSettings, distortion: Optional[dds.DistortionModel] = None,
          carrier_offset: float = 0.0) -> Drive:
    """Produce the qubit-frame baseband for a pulse list.

    ``carrier_offset`` moves the qubit tone away from ``f01`` (used for the
    background twin); the returned frame follows the shifted carrier.
    """
    pulses, t_end = build_schedule(shapes)
    carrier = device.f01 + carrier_offset
    tone = dds.ToneSpec(carrier, pulses, anharmonicity=device.anharmonicity, label="qubit")
    mode = settings.mode
    if mode in ("upconversion", "ideal"):
        n, dt = _baseband_grid(t_end, settings.cutoff)
        return Drive(analytic_baseband(pulses, n, dt, device.anharmonicity), dt, carrier, t_end)

    fs = dac.sample_rate
    D = dds.decimation_factor(fs, settings.cutoff)
    n_end = dds.span_to_indices((0.0, t_end), fs)[1]
    if mode == "hybrid":
        w = dds.synthesize([tone], dac, (0.0, t_end))
        droop = 0.0
    else:
        ro = settings.readout
        t_ro = t_end + ro.delay
        ro_tone = dds.ToneSpec(device.f_readout, (dds.ScheduledPulse(t_ro, ro.shape()),),
                               label="readout")
        span = (0.0, t_ro + ro.duration)
        w, act = dds.synthesize([tone, ro_tone], dac, span, return_activity=settings.activity_threshold)
        ro_lo, ro_hi = dds.span_to_indices((t_ro, t_ro + ro.duration), fs)
        droop = 0.0
        if distortion is not None:
            mask = np.zeros(w.n_samples)
            mask[ro_lo - w.start_index:ro_hi - w.start_index] = 1.0
            distortion.reset()
            w = dds.apply_distortion(w, distortion, act, susceptibility=mask)
            droop = readout_droop(w, device.f_readout, (ro_lo, ro_hi), settings.cutoff)
    bb = dds.demodulate(w, carrier, settings.cutoff, decimation=D, n_range=(D // 2, n_end))
    return Drive(bb.values, bb.dt, carrier, t_end, droop, w)


def readout_droop(w: dds.SampledWaveform, f_readout: float, n_range: Tuple[int, int],
                  cutoff: float) -> float:
    """Effective droop of the readout pulse from matched-filter amplitudes."""
    if w.droop is None:
        return 0.0
    distorted = dds.demodulate(w, f_readout, cutoff, n_range=n_range).values
    clean = dds.demodulate(dds.SampledWaveform(w.codes, w.ideal, w.sample_rate, w.start_index,
                                               w.bits, w.quantized), f_readout, cutoff,
                           n_range=n_range).values
    ratio = np.real(np.vdot(clean, distorted)) / np.real(np.vdot(clean, clean))
    return float(min(max(1.0 - ratio, 0.0), 1.0 - 1e-12))


def simulate(shapes: Sequence[PulseShape], device: DeviceModel, dac: dds.DacConfig,
             settings: ChainSettings, distortion: Optional[dds.DistortionModel] = None,
             carrier_offset: float = 0.0, state: Optional[np.ndarray] = None,
             readout_delay: Optional[float] = None) -> ChainOutcome:
    """Run a pulse list through the chain and the transmon model.

    The qubit also idles for the readout delay before the state is returned,
    so decoherence between the last gate and readout is included.
    """
    d = drive(shapes, device, dac, settings, distortion, carrier_offset)
    rho = ground_state(device.levels) if state is None else state
    delay = settings.readout.delay if readout_delay is None else readout_delay
    n_idle = int(round(delay / d.dt))
    values = d.values
    if n_idle:
        values = np.concatenate([values, np.zeros(n_idle, complex)])
    rho = evolve(rho, values, d.frame_freq, device, d.dt)
    return ChainOutcome(rho, d.readout_droop, d.t_end)
