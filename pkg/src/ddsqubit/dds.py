"""Software model of a high-speed AWG channel used for direct synthesis.

Samples live on a global clock: sample ``n`` is emitted at ``t = n / f_s``.
Carrier phases are computed from that global index, so waveforms built from
abutting segments are bit-identical to a single-shot synthesis.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy import signal

from .pulse import DEFAULT_ANHARMONICITY, PulseShape, envelope

#: DAC core rates of the instrument (Hz); lower modes halve or quarter them.
CORE_RATE_RANGE = (57.76e9, 65e9)
RATE_DIVIDERS = (1, 2, 4)


class NyquistError(ValueError):
    """A carrier or reference frequency does not fit below half the sample rate."""


class ClippingError(ValueError):
    """The summed ideal waveform exceeds the DAC full scale."""

    def __init__(self, index: int, value: float):
        super().__init__(f"waveform clips at sample {index} (|x| = {abs(value):.6g} > full scale)")
        self.index = index
        self.value = value


def is_standard_rate(sample_rate: float) -> bool:
    lo, hi = CORE_RATE_RANGE
    return any(lo * (1 - 1e-9) <= sample_rate * d <= hi * (1 + 1e-9) for d in RATE_DIVIDERS)


@dataclass(frozen=True)
class DacConfig:
    """Sample rate and vertical resolution of one AWG channel.

    ``quantize=False`` bypasses the code grid (the waveform's output is then
    the ideal real-valued stream), which is how upconverted or ideal paths
    are modelled.
    """

    sample_rate: float = 65e9
    bits: int = 8
    full_scale: float = 1.0
    quantize: bool = True
    nonstandard_rate: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not 2 <= int(self.bits) <= 16:
            raise ValueError(f"bits must be in [2, 16], got {self.bits}")
        if not self.full_scale > 0:
            raise ValueError("full_scale must be positive")
        if not is_standard_rate(self.sample_rate):
            object.__setattr__(self, "nonstandard_rate", True)
            warnings.warn(f"sample rate {self.sample_rate / 1e9:.4g} GS/s is outside the "
                          "instrument's 57.76-65 GS/s core range and its /2, /4 modes",
                          stacklevel=2)

    @property
    def code_max(self) -> int:
        return 2 ** (self.bits - 1) - 1

    @property
    def code_min(self) -> int:
        return -(2 ** (self.bits - 1))

    @property
    def scale(self) -> float:
        """Codes per unit full scale."""
        return float(2 ** (self.bits - 1))

    @property
    def nyquist(self) -> float:
        return 0.5 * self.sample_rate

    def replace(self, **changes) -> "DacConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class ScheduledPulse:
    start: float
    shape: PulseShape


@dataclass(frozen=True)
class ToneSpec:
    """One carrier and the envelopes it carries.

    ``pulses`` are absolute-time placements; ``phase_origin`` is the carrier
    phase at global t = 0.  ``anharmonicity`` (Hz) sets the DRAG scaling.
    """

    carrier_frequency: float
    pulses: Tuple[ScheduledPulse, ...] = ()
    phase_origin: float = 0.0
    anharmonicity: float = DEFAULT_ANHARMONICITY
    label: str = ""

    @property
    def name(self) -> str:
        return self.label or f"{self.carrier_frequency / 1e9:.6g} GHz"

    def shifted(self, offset: float) -> "ToneSpec":
        """Same envelopes on a carrier moved by ``offset`` Hz."""
        return replace(self, carrier_frequency=self.carrier_frequency + offset,
                       label=(self.label + f"+{offset / 1e9:g}GHz") if self.label else "")


@dataclass
class SampledWaveform:
    """Quantized DAC stream plus its ideal pre-quantization values.

    ``ideal`` is in full-scale units.  ``droop`` is a per-sample multiplicative
    gain loss applied after the DAC (see :func:`apply_distortion`).
    """

    codes: np.ndarray
    ideal: np.ndarray
    sample_rate: float
    start_index: int
    bits: int
    quantized: bool = True
    droop: Optional[np.ndarray] = None

    @property
    def n_samples(self) -> int:
        return int(self.codes.shape[0])

    @property
    def t_start(self) -> float:
        return self.start_index / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return (self.start_index + np.arange(self.n_samples)) / self.sample_rate

    @property
    def scale(self) -> float:
        return float(2 ** (self.bits - 1))

    def levels(self) -> np.ndarray:
        """DAC output before analog distortion, in full-scale units."""
        if self.quantized:
            return self.codes / self.scale
        return self.ideal

    def output(self) -> np.ndarray:
        """Analog output in full-scale units, including any droop."""
        out = self.levels()
        if self.droop is not None:
            out = out * (1.0 - self.droop)
        return out

    def concatenate(self, other: "SampledWaveform") -> "SampledWaveform":
        if other.start_index != self.start_index + self.n_samples:
            raise ValueError("segments are not abutting")
        if other.sample_rate != self.sample_rate or other.bits != self.bits:
            raise ValueError("segments use different DAC settings")
        droop = None
        if self.droop is not None or other.droop is not None:
            d1 = self.droop if self.droop is not None else np.zeros(self.n_samples)
            d2 = other.droop if other.droop is not None else np.zeros(other.n_samples)
            droop = np.concatenate([d1, d2])
        return SampledWaveform(np.concatenate([self.codes, other.codes]),
                               np.concatenate([self.ideal, other.ideal]),
                               self.sample_rate, self.start_index, self.bits,
                               self.quantized and other.quantized, droop)


def quantize(ideal: np.ndarray, bits: int) -> np.ndarray:
    """Round half away from zero onto the signed code grid, with clamping."""
    scale = float(2 ** (bits - 1))
    x = np.asarray(ideal) * scale
    codes = np.sign(x) * np.floor(np.abs(x) + 0.5)
    codes = np.clip(codes, -scale, scale - 1)
    dtype = np.int8 if bits <= 8 else np.int16
    return codes.astype(dtype)


def span_to_indices(t_span: Tuple[float, float], sample_rate: float) -> Tuple[int, int]:
    """First sample index and exclusive end index covering ``[t0, t1)``."""
    t0, t1 = t_span
    if t1 < t0:
        raise ValueError(f"t_span end {t1} precedes start {t0}")
    n0 = int(math.ceil(t0 * sample_rate - 1e-6))
    n1 = int(math.ceil(t1 * sample_rate - 1e-6))
    return n0, n1


def _pulse_window(start: float, shape: PulseShape, fs: float) -> Tuple[int, int, float]:
    """Global sample range covering the envelope and the fractional offset.

    Returns ``(k_first, count, frac)`` with sample ``k_first + j`` sitting at
    local time ``(j + frac) / fs``.
    """
    pos = start * fs
    k_first = int(math.ceil(pos - 1e-9))
    frac = round(k_first - pos, 9)
    k_last = int(math.floor(pos + shape.envelope_duration * fs + 1e-9))
    return k_first, max(0, k_last - k_first + 1), frac


class _EnvelopeCache:
    def __init__(self, fs: float, anharmonicity: float):
        self.fs = fs
        self.anharmonicity = anharmonicity
        self._store = {}

    def get(self, shape: PulseShape, count: int, frac: float):
        key = (shape, count, frac)
        hit = self._store.get(key)
        if hit is None:
            t = (np.arange(count) + frac) / self.fs
            hit = envelope(shape, t, self.anharmonicity)
            self._store[key] = hit
        return hit


def render_envelopes(tone: ToneSpec, n0: int, n1: int, fs: float):
    """Baseband I and Q of ``tone`` on global samples ``n0 .. n1 - 1``."""
    n = n1 - n0
    i_env = np.zeros(n)
    q_env = np.zeros(n)
    cache = _EnvelopeCache(fs, tone.anharmonicity)
    for p in tone.pulses:
        k_first, count, frac = _pulse_window(p.start, p.shape, fs)
        if count == 0 or k_first >= n1 or k_first + count <= n0:
            continue
        if p.shape.amplitude == 0.0:
            continue
        ie, qe = cache.get(p.shape, count, frac)
        lo = max(k_first, n0)
        hi = min(k_first + count, n1)
        i_env[lo - n0:hi - n0] += ie[lo - k_first:hi - k_first]
        q_env[lo - n0:hi - n0] += qe[lo - k_first:hi - k_first]
    return i_env, q_env


def carrier_phase(indices: np.ndarray, frequency: float, fs: float, phase_origin: float = 0.0) -> np.ndarray:
    """Carrier phase (rad) at integer sample indices, reduced exactly per cycle."""
    cycles = np.mod(indices * (frequency / fs), 1.0)
    return 2.0 * np.pi * cycles + phase_origin


def _tone_extent(tone: ToneSpec, fs: float) -> Optional[Tuple[int, int]]:
    lo, hi = None, None
    for p in tone.pulses:
        k_first, count, _ = _pulse_window(p.start, p.shape, fs)
        if count == 0 or p.shape.amplitude == 0.0:
            continue
        lo = k_first if lo is None else min(lo, k_first)
        hi = k_first + count if hi is None else max(hi, k_first + count)
    return None if lo is None else (lo, hi)


def check_nyquist(tones: Iterable[ToneSpec], sample_rate: float) -> None:
    for tone in tones:
        if not 0 <= tone.carrier_frequency < 0.5 * sample_rate:
            raise NyquistError(
                f"tone '{tone.name}' at {tone.carrier_frequency / 1e9:.6g} GHz is at or above "
                f"the Nyquist frequency {0.5 * sample_rate / 1e9:.6g} GHz "
                f"({sample_rate / 1e9:.6g} GS/s)")


def synthesize(tones: Sequence[ToneSpec], dac: DacConfig, t_span: Tuple[float, float],
               phase_reference: str = "global", return_activity: float = None):
    """Draw the tones onto one DAC channel.

    Each sample is ``sum I cos(phi) + Q sin(phi)`` with ``phi`` the carrier
    phase at that sample.  With ``phase_reference="global"`` (the default)
    ``phi`` follows the global sample clock.  ``"segment"`` restarts the carrier
    at the first sample of this span, reproducing the phase-jump hazard of
    stitching pre-upconverted segments.

    If ``return_activity`` is a threshold (full-scale units), a boolean array
    marking samples where any tone's envelope magnitude exceeds it is returned
    alongside the waveform.
    """
    if phase_reference not in ("global", "segment"):
        raise ValueError(f"unknown phase_reference {phase_reference!r}")
    fs = dac.sample_rate
    check_nyquist(tones, fs)
    n0, n1 = span_to_indices(t_span, fs)
    n = n1 - n0
    ideal = np.zeros(n)
    activity = np.zeros(n, dtype=bool) if return_activity is not None else None
    for tone in tones:
        ext = _tone_extent(tone, fs)
        if ext is None:
            continue
        lo, hi = max(ext[0], n0), min(ext[1], n1)
        if hi <= lo:
            continue
        i_env, q_env = render_envelopes(tone, lo, hi, fs)
        idx = np.arange(lo, hi)
        if phase_reference == "segment":
            idx = idx - n0
        phi = carrier_phase(idx, tone.carrier_frequency, fs, tone.phase_origin)
        ideal[lo - n0:hi - n0] += i_env * np.cos(phi) + q_env * np.sin(phi)
        if activity is not None:
            activity[lo - n0:hi - n0] |= np.hypot(i_env, q_env) > return_activity
    ideal /= dac.full_scale
    over = np.flatnonzero(np.abs(ideal) > 1.0 + 1e-12)
    if over.size:
        raise ClippingError(int(over[0]) + n0, float(ideal[over[0]]))
    wf = SampledWaveform(quantize(ideal, dac.bits), ideal, fs, n0, dac.bits, dac.quantize)
    if activity is not None:
        return wf, activity
    return wf


def tone_activity(tones: Sequence[ToneSpec], dac: DacConfig, t_span: Tuple[float, float],
                  threshold: float = 1e-3) -> np.ndarray:
    """Per-sample flag: some tone's envelope magnitude exceeds ``threshold``."""
    fs = dac.sample_rate
    n0, n1 = span_to_indices(t_span, fs)
    act = np.zeros(n1 - n0, dtype=bool)
    for tone in tones:
        ext = _tone_extent(tone, fs)
        if ext is None:
            continue
        lo, hi = max(ext[0], n0), min(ext[1], n1)
        if hi <= lo:
            continue
        i_env, q_env = render_envelopes(tone, lo, hi, fs)
        act[lo - n0:hi - n0] |= np.hypot(i_env, q_env) / dac.full_scale > threshold
    return act


def effective_bits(full_scale_fraction: float, bits: int = 8) -> float:
    """log2 of the number of DAC codes a bipolar signal of this peak spans."""
    if not full_scale_fraction > 0:
        raise ValueError(f"full-scale fraction must be positive, got {full_scale_fraction}")
    return math.log2(full_scale_fraction * 2.0 ** (bits + 1))


@dataclass
class DistortionModel:
    """Activity-driven multiplicative droop of the AWG output.

    The droop ``d`` relaxes toward ``d_sat * activity`` with time constant
    ``tau``; it is mutable state carried from one waveform to the next.
    """

    tau: float = 31e-6
    d_sat: float = 0.2
    d: float = 0.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not 0.0 <= self.d_sat < 1.0:
            raise ValueError(f"d_sat must be in [0, 1), got {self.d_sat}")
        if self.d < 0.0:
            raise ValueError("droop state must be non-negative")

    def reset(self) -> None:
        self.d = 0.0

    def relax(self, duration: float, activity: float = 0.0) -> float:
        """Advance the state analytically over a stretch of constant activity."""
        target = self.d_sat * activity
        self.d = target + (self.d - target) * math.exp(-duration / self.tau)
        return self.d


def apply_distortion(w: SampledWaveform, model: DistortionModel, activity: np.ndarray,
                     susceptibility: Optional[np.ndarray] = None) -> SampledWaveform:
    """Scale each sample by ``1 - d_k`` with ``d`` integrated per sample.

    The per-sample update ``d <- d + alpha (d_sat a_k - d)`` uses the exact
    one-step decay ``alpha = 1 - exp(-dt / tau)``.  ``susceptibility`` (0..1
    per sample, default all ones) restricts which samples feel the droop; the
    state still evolves everywhere.  The final state is written back to
    ``model``.
    """
    a = np.asarray(activity, dtype=float)
    if a.shape[0] != w.n_samples:
        raise ValueError("activity length does not match waveform")
    alpha = -math.expm1(-1.0 / (w.sample_rate * model.tau))
    if w.n_samples == 0:
        return replace(w)
    d, _ = signal.lfilter([alpha * model.d_sat], [1.0, -(1.0 - alpha)], a,
                          zi=[(1.0 - alpha) * model.d])
    model.d = float(d[-1])
    if susceptibility is not None:
        d = d * np.asarray(susceptibility, dtype=float)
    total = d if w.droop is None else 1.0 - (1.0 - w.droop) * (1.0 - d)
    return replace(w, droop=total)


@dataclass(frozen=True)
class Baseband:
    """Complex envelope stream ``I + iQ`` on a uniform grid."""

    values: np.ndarray
    dt: float
    t_start: float

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.values.shape[0])

    def __len__(self):
        return int(self.values.shape[0])


def lowpass_taps(sample_rate: float, cutoff: float) -> np.ndarray:
    """Hann-windowed sinc low-pass with at least ``4 f_s / cutoff`` taps (odd)."""
    n = int(math.ceil(4.0 * sample_rate / cutoff))
    n += 1 - n % 2
    return signal.firwin(n, cutoff, window="hann", fs=sample_rate)


def decimation_factor(sample_rate: float, cutoff: float) -> int:
    """Largest decimation keeping ``dt <= 1 / (20 cutoff)``."""
    return max(1, int(math.floor(sample_rate / (20.0 * cutoff) + 1e-9)))


def demodulate(w: SampledWaveform, f_ref: float, cutoff: float = 1e9,
               decimation: Optional[int] = None, n_range: Optional[Tuple[int, int]] = None) -> Baseband:
    """Recover the complex envelope riding on carrier ``f_ref``.

    The output stream is mixed against the global-clock carrier, low-pass
    filtered with a Hann-windowed sinc FIR and decimated.  ``n_range`` limits
    the output to a window of global sample indices (the filter still sees
    its neighbours).
    """
    fs = w.sample_rate
    if not 0 < f_ref < 0.5 * fs:
        raise NyquistError(f"reference {f_ref / 1e9:.6g} GHz is not below Nyquist {0.5 * fs / 1e9:.6g} GHz")
    if not 0 < cutoff < f_ref:
        raise ValueError(f"cutoff {cutoff:g} Hz must lie below the reference {f_ref:g} Hz to reject the 2f image")
    if cutoff >= 0.5 * fs:
        raise NyquistError(f"cutoff {cutoff:g} Hz is not below Nyquist")
    D = decimation or decimation_factor(fs, cutoff)
    taps = lowpass_taps(fs, cutoff)
    half = taps.size // 2
    lo, hi = (w.start_index, w.start_index + w.n_samples) if n_range is None else n_range
    lo = max(lo, w.start_index)
    hi = min(hi, w.start_index + w.n_samples)
    a = max(lo - half, w.start_index)
    b = min(hi + half, w.start_index + w.n_samples)
    x = w.output()[a - w.start_index:b - w.start_index]
    idx = np.arange(a, b)
    phi = carrier_phase(idx, f_ref, fs)
    mixed = 2.0 * x * np.exp(1j * phi)
    # zero padding reproduces the silence outside the waveform
    pad_lo = half - (lo - a)
    pad_hi = half - (b - hi)
    mixed = np.concatenate([np.zeros(pad_lo, complex), mixed, np.zeros(pad_hi, complex)])
    filtered = signal.oaconvolve(mixed, taps, mode="valid")
    out = filtered[::D]
    return Baseband(out, D / fs, lo / fs)


# ---------------------------------------------------------------- file formats

def write_waveform(w: SampledWaveform, path, extra: Optional[dict] = None) -> Tuple[Path, Path]:
    """Raw little-endian signed samples plus a JSON sidecar."""
    path = Path(path)
    dtype = "<i1" if w.bits <= 8 else "<i2"
    path.write_bytes(np.asarray(w.codes).astype(dtype).tobytes())
    sidecar = {"sample_rate_hz": w.sample_rate, "bits": w.bits,
               "t_start_s": w.t_start, "n_samples": w.n_samples}
    if extra:
        sidecar.update(extra)
    side = path.with_suffix(".json")
    side.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return path, side


def read_waveform(path) -> SampledWaveform:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    bits = int(meta["bits"])
    dtype = "<i1" if bits <= 8 else "<i2"
    codes = np.frombuffer(path.read_bytes(), dtype=dtype).astype(np.int8 if bits <= 8 else np.int16)
    if codes.size != int(meta["n_samples"]):
        raise ValueError(f"{path}: expected {meta['n_samples']} samples, found {codes.size}")
    fs = float(meta["sample_rate_hz"])
    start = int(round(float(meta["t_start_s"]) * fs))
    scale = float(2 ** (bits - 1))
    return SampledWaveform(codes, codes / scale, fs, start, bits, True)


def export_csv(w: SampledWaveform, path) -> Path:
    """Columns: time, ideal (full-scale units), code, quantized (full-scale units)."""
    path = Path(path)
    t = w.times
    q = w.codes / w.scale
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_s", "ideal_fs", "code", "quantized_fs"])
        for row in zip(t, w.ideal, w.codes, q):
            writer.writerow([f"{row[0]:.12e}", f"{row[1]:.9f}", int(row[2]), f"{row[3]:.9f}"])
    return path
