"""Phase noise of the master clock turned into a gate-infidelity floor.

Pipeline: single-sideband phase noise L(f) [dBc/Hz] -> unilateral dephasing
PSD ``S(w) = 0.5 w^2 10^(L/10)`` -> first-order filter function of the gate
-> ``chi = (1/pi) int S(w) F(w) / w^2 dw`` -> infidelity ``(1 - exp(-chi)) / 2``.

The unilateral convention means a frequency-noise autocorrelation
``C(s) = (1/pi) int_0^inf S(w) cos(w s) dw``; white noise ``S0`` gives
``C(s) = S0 delta(s)`` and an accumulated phase variance ``S0 tau``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate
from scipy.linalg import expm

TWO_PI = 2.0 * math.pi
#: Default integration band (Hz): 1 Hz to 100 MHz.
DEFAULT_BAND_HZ = (1.0, 1e8)
MIN_POINTS_PER_DECADE = 200

_PAULI = (np.array([[0, 1], [1, 0]], complex),
          np.array([[0, -1j], [1j, 0]], complex),
          np.array([[1, 0], [0, -1]], complex))


class SpectrumError(ValueError):
    """Malformed phase-noise data; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class CoverageError(ValueError):
    """The PSD does not span the requested integration band."""

    def __init__(self, gaps: List[Tuple[float, float]]):
        text = ", ".join(f"[{a / TWO_PI:.4g}, {b / TWO_PI:.4g}] Hz" for a, b in gaps)
        super().__init__(f"dephasing PSD does not cover {text}")
        self.gaps = gaps


# ---------------------------------------------------------------- spectra

@dataclass(frozen=True)
class PhaseNoiseSpectrum:
    """Single-sideband phase noise ``L(f)`` in dBc/Hz at offsets ``f`` (Hz)."""

    frequencies: Tuple[float, ...]
    levels: Tuple[float, ...]
    label: str = ""

    def __post_init__(self):
        f = tuple(float(x) for x in self.frequencies)
        lv = tuple(float(x) for x in self.levels)
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "levels", lv)
        if len(f) != len(lv):
            raise SpectrumError("frequencies and levels differ in length")
        if not f:
            raise SpectrumError("empty spectrum")
        for k, (x, y) in enumerate(zip(f, lv)):
            if not (math.isfinite(x) and math.isfinite(y)):
                raise SpectrumError("non-finite value", k + 1)
            if x <= 0:
                raise SpectrumError(f"frequency {x:g} Hz is not positive", k + 1)
            if k and x <= f[k - 1]:
                raise SpectrumError(f"frequency {x:g} Hz is not above the previous point", k + 1)

    @property
    def points(self) -> List[Tuple[float, float]]:
        return list(zip(self.frequencies, self.levels))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["freq_hz", "dBc_per_hz"])
        for f, lv in self.points:
            w.writerow([repr(f), repr(lv)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def load_spectrum(source: Union[str, Path], label: str = "") -> PhaseNoiseSpectrum:
    """Read a two-column ``freq_hz, dBc_per_hz`` CSV (path or text).

    A non-numeric first row is taken as a header; blank lines and ``#``
    comments are skipped.  Rows must already be in ascending frequency order.

    Raises:
        SpectrumError: with the offending 1-based line number.
    """
    p = Path(source) if not isinstance(source, str) or "\n" not in source else None
    if p is not None and p.exists():
        text = p.read_text()
        label = label or p.stem
    else:
        text = str(source)
    freqs: List[float] = []
    levels: List[float] = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        if len(row) != 2:
            raise SpectrumError(f"expected 2 columns, got {len(row)}", lineno)
        try:
            f, lv = float(row[0]), float(row[1].replace("−", "-"))
        except ValueError:
            if not freqs and lineno == 1:
                continue
            raise SpectrumError(f"cannot parse {row!r}", lineno) from None
        if not (math.isfinite(f) and math.isfinite(lv)):
            raise SpectrumError("non-finite value", lineno)
        if f <= 0:
            raise SpectrumError(f"frequency {f:g} Hz is not positive", lineno)
        if freqs and f == freqs[-1]:
            raise SpectrumError(f"duplicate frequency {f:g} Hz", lineno)
        if freqs and f < freqs[-1]:
            raise SpectrumError(f"frequency {f:g} Hz is below the previous point", lineno)
        freqs.append(f)
        levels.append(lv)
    if not freqs:
        raise SpectrumError("no data rows")
    return PhaseNoiseSpectrum(tuple(freqs), tuple(levels), label)


def extrapolate_low(s: PhaseNoiseSpectrum, f_min: float, points_per_decade: int = 10) -> PhaseNoiseSpectrum:
    """Extend the spectrum down to ``f_min`` along the line through its two lowest points.

    The line is straight in (log10 f, dBc/Hz).  New points sit on a log grid
    from ``f_min`` up to (not including) the lowest measured offset.

    Raises:
        SpectrumError: fewer than two points.
    """
    if len(s.frequencies) < 2:
        raise SpectrumError("need at least two points to extrapolate")
    if not f_min > 0:
        raise ValueError("f_min must be positive")
    f0, f1 = s.frequencies[:2]
    if f_min >= f0:
        return s
    l0, l1 = s.levels[:2]
    slope = (l1 - l0) / (math.log10(f1) - math.log10(f0))
    n = max(1, int(math.ceil((math.log10(f0) - math.log10(f_min)) * points_per_decade)))
    new_f = np.logspace(math.log10(f_min), math.log10(f0), n + 1)[:-1]
    new_l = l0 + slope * (np.log10(new_f) - math.log10(f0))
    return PhaseNoiseSpectrum(tuple(new_f) + s.frequencies, tuple(new_l) + s.levels, s.label)


@dataclass(frozen=True)
class PowerLawModel:
    """``L(f) = 10 log10(sum_k h_k f^-k)`` for ``k = 0..3`` (coefficients in 1/Hz)."""

    h0: float
    h1: float
    h2: float
    h3: float
    label: str = ""

    def level(self, f) -> np.ndarray:
        f = np.asarray(f, float)
        return 10.0 * np.log10(self.h0 + self.h1 / f + self.h2 / f ** 2 + self.h3 / f ** 3)

    def spectrum(self, f_lo: float = 1.0, f_hi: float = 1e8, points_per_decade: int = 20) -> PhaseNoiseSpectrum:
        n = int(round((math.log10(f_hi) - math.log10(f_lo)) * points_per_decade)) + 1
        f = np.logspace(math.log10(f_lo), math.log10(f_hi), n)
        return PhaseNoiseSpectrum(tuple(f), tuple(self.level(f)), self.label)


#: Synthetic stand-ins for the two measured sources.  The DDS-like tone is
#: about 20 dB noisier close in; the far-out floors differ by 2 dB.
DDS_LIKE = PowerLawModel(h0=1.6e-15, h1=1e-10, h2=1e-3, h3=1e-4, label="dds-like")
GENERATOR_LIKE = PowerLawModel(h0=1e-15, h1=1e-12, h2=1e-5, h3=1e-6, label="generator-like")
SYNTHETIC_SOURCES = {m.label: m for m in (DDS_LIKE, GENERATOR_LIKE)}


# ---------------------------------------------------------------- dephasing PSD

@dataclass(frozen=True)
class DephasingPsd:
    """Unilateral dephasing PSD ``S(w)`` (rad^2/s) sampled at ``omega`` (rad/s).

    Between samples ``S`` is interpolated linearly in (log w, log S); when a
    sample is zero the interpolation falls back to linear in S.
    """

    omega: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        w = np.asarray(self.omega, float)
        s = np.asarray(self.values, float)
        if w.ndim != 1 or w.shape != s.shape or w.size < 2:
            raise ValueError("omega and values must be matching 1-D arrays of length >= 2")
        if np.any(w <= 0) or np.any(np.diff(w) <= 0):
            raise ValueError("omega must be positive and strictly increasing")
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise ValueError("PSD values must be finite and non-negative")
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "values", s)

    @property
    def band(self) -> Tuple[float, float]:
        return float(self.omega[0]), float(self.omega[-1])

    def __call__(self, omega) -> np.ndarray:
        w = np.asarray(omega, float)
        lo, hi = self.band
        if np.any(w < lo * (1 - 1e-12)) or np.any(w > hi * (1 + 1e-12)):
            raise CoverageError([(float(np.min(w)), lo)] if np.min(w) < lo else [(hi, float(np.max(w)))])
        w = np.clip(w, lo, hi)
        lw = np.log(self.omega)
        if np.all(self.values > 0):
            return np.exp(np.interp(np.log(w), lw, np.log(self.values)))
        return np.interp(np.log(w), lw, self.values)


def dephasing_psd_value(frequency_hz, level_dbc):
    """``0.5 w^2 10^(L/10)`` with ``w = 2 pi f``."""
    w = TWO_PI * np.asarray(frequency_hz, float)
    return 0.5 * w ** 2 * np.power(10.0, np.asarray(level_dbc, float) / 10.0)


def to_dephasing_psd(s: PhaseNoiseSpectrum) -> DephasingPsd:
    f = np.asarray(s.frequencies)
    return DephasingPsd(TWO_PI * f, dephasing_psd_value(f, s.levels), s.label)


def white_psd(s0: float, omega_min: float = TWO_PI * 1e-3, omega_max: float = TWO_PI * 1e10) -> DephasingPsd:
    return DephasingPsd(np.array([omega_min, omega_max]), np.array([s0, s0]), "white")


# ---------------------------------------------------------------- controls

@dataclass(frozen=True)
class ControlSegment:
    """Constant drive ``H = (rabi/2)(cos(phase) X + sin(phase) Y)`` for ``duration``."""

    duration: float
    rabi: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"segment duration must be positive, got {self.duration}")


@dataclass(frozen=True)
class ControlSegmentList:
    segments: Tuple[ControlSegment, ...] = field(default_factory=tuple)

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ValueError("a control needs at least one segment")
        object.__setattr__(self, "segments", segs)

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    @classmethod
    def free(cls, tau: float) -> "ControlSegmentList":
        return cls((ControlSegment(tau),))

    @classmethod
    def rotation(cls, angle: float, tau: float, phase: float = 0.0) -> "ControlSegmentList":
        """Square pulse rotating by ``angle`` about the ``phase`` axis in ``tau``."""
        return cls((ControlSegment(tau, angle / tau, phase),))


def _seg_integral(a, T):
    """``int_0^T exp(i a s) ds`` for an array of ``a``."""
    x = 0.5 * a * T
    return T * np.exp(1j * x) * np.sinc(x / math.pi)


def _rotate(n: np.ndarray, angle: float, v: np.ndarray) -> np.ndarray:
    """Heisenberg image of ``v . sigma`` under a rotation about ``n`` by ``angle``."""
    a = np.dot(n, v) * n
    return a + math.cos(angle) * (v - a) - math.sin(angle) * np.cross(n, v)


def _axis(seg: ControlSegment) -> np.ndarray:
    return np.array([math.cos(seg.phase), math.sin(seg.phase), 0.0])


def filter_function(ctrl: ControlSegmentList, omega) -> np.ndarray:
    """First-order dephasing filter function ``w^2 sum_j |int e^{iwt} R_zj(t) dt|^2``.

    Segment-analytic for piecewise-constant controls: inside segment ``k``
    the toggled noise axis is ``Q_k rot_k(s) z`` where ``Q_k`` collects the
    earlier segments.
    """
    w = np.atleast_1d(np.asarray(omega, float))
    if np.any(w <= 0):
        raise ValueError("omega must be positive")
    z = np.array([0.0, 0.0, 1.0])
    q = np.eye(3)
    t0 = 0.0
    total = np.zeros((3, w.size), complex)
    for seg in ctrl.segments:
        n = _axis(seg)
        a = np.dot(n, z) * n
        b = z - a
        c = np.cross(n, z)
        T, om = seg.duration, seg.rabi
        e0 = _seg_integral(w, T)
        ep = _seg_integral(w + om, T)
        em = _seg_integral(w - om, T)
        local = a[:, None] * e0 + b[:, None] * (0.5 * (ep + em)) - c[:, None] * ((ep - em) / 2j)
        total += np.exp(1j * w * t0) * (q @ local)
        q = q @ np.column_stack([_rotate(n, om * T, e) for e in np.eye(3)])
        t0 += T
    out = w ** 2 * np.sum(np.abs(total) ** 2, axis=0)
    return out if np.ndim(omega) else out[0]


def toggling_frame(ctrl: ControlSegmentList, t) -> np.ndarray:
    """``R_zj(t)`` from the numerically propagated control unitary (shape ``(3, n)``)."""
    t = np.atleast_1d(np.asarray(t, float))
    out = np.zeros((3, t.size))
    u0 = np.eye(2, dtype=complex)
    t_start = 0.0
    for seg in ctrl.segments:
        h = 0.5 * seg.rabi * (math.cos(seg.phase) * _PAULI[0] + math.sin(seg.phase) * _PAULI[1])
        sel = np.nonzero((t >= t_start) & (t <= t_start + seg.duration))[0]
        for k in sel:
            u = expm(-1j * h * (t[k] - t_start)) @ u0
            zt = u.conj().T @ _PAULI[2] @ u
            out[:, k] = [0.5 * np.trace(zt @ p).real for p in _PAULI]
        u0 = expm(-1j * h * seg.duration) @ u0
        t_start += seg.duration
    return out


def filter_function_quadrature(ctrl: ControlSegmentList, omega, nodes: int = 16) -> np.ndarray:
    """Brute-force filter function by composite Gauss-Legendre quadrature.

    Independent of the closed form: the toggling frame comes from matrix
    exponentials and the time integral is done numerically.
    """
    w = np.atleast_1d(np.asarray(omega, float))
    x, wt = np.polynomial.legendre.leggauss(nodes)
    out = np.empty(w.size)
    for i, om in enumerate(w):
        acc = np.zeros(3, complex)
        t0 = 0.0
        for seg in ctrl.segments:
            panels = int(math.ceil((abs(om) + abs(seg.rabi)) * seg.duration / math.pi)) + 4
            edges = t0 + seg.duration * np.arange(panels + 1) / panels
            for a, b in zip(edges[:-1], edges[1:]):
                tt = 0.5 * (b - a) * x + 0.5 * (a + b)
                r = toggling_frame(ctrl, tt)
                acc += 0.5 * (b - a) * (r * np.exp(1j * om * tt)) @ wt
            t0 += seg.duration
        out[i] = om ** 2 * np.sum(np.abs(acc) ** 2)
    return out if np.ndim(omega) else out[0]


# ---------------------------------------------------------------- infidelity

def quadrature_grid(band: Tuple[float, float], tau: float,
                    points_per_decade: int = MIN_POINTS_PER_DECADE) -> np.ndarray:
    """Log-spaced ``omega`` grid over ``band`` (rad/s).

    The density is raised above ``points_per_decade`` when needed to keep
    eight points per oscillation of ``sin^2(w tau / 2)`` at the top edge.
    """
    lo, hi = band
    if not 0 < lo < hi:
        raise ValueError("band must satisfy 0 < low < high")
    ppd = max(points_per_decade, int(math.ceil(8.0 * math.log(10.0) * hi * tau / TWO_PI)))
    n = int(math.ceil(math.log10(hi / lo) * ppd)) + 1
    return np.logspace(math.log10(lo), math.log10(hi), n)


def check_coverage(psd: DephasingPsd, band: Tuple[float, float]) -> None:
    lo, hi = psd.band
    gaps = []
    if band[0] < lo * (1 - 1e-12):
        gaps.append((band[0], lo))
    if band[1] > hi * (1 + 1e-12):
        gaps.append((hi, band[1]))
    if gaps:
        raise CoverageError(gaps)


def dephasing_chi(psd: DephasingPsd, ctrl: ControlSegmentList,
                  band_hz: Tuple[float, float] = DEFAULT_BAND_HZ,
                  points_per_decade: int = MIN_POINTS_PER_DECADE) -> float:
    """``chi = (1/pi) int S(w) F(w) / w^2 dw`` over ``band_hz`` (log-grid trapezoid).

    Raises:
        CoverageError: the PSD stops short of the band.
    """
    band = (TWO_PI * band_hz[0], TWO_PI * band_hz[1])
    check_coverage(psd, band)
    w = quadrature_grid(band, ctrl.duration, points_per_decade)
    g = psd(w) * filter_function(ctrl, w) / w ** 2
    return float(integrate.trapezoid(g * w, np.log(w)) / math.pi)


def infidelity_from_chi(chi: float) -> float:
    return 0.5 * (1.0 - math.exp(-chi))


def infidelity_floor(psd: DephasingPsd, ctrl: ControlSegmentList,
                     band_hz: Tuple[float, float] = DEFAULT_BAND_HZ,
                     points_per_decade: int = MIN_POINTS_PER_DECADE) -> float:
    """Gate infidelity ``(1 - exp(-chi)) / 2`` from phase noise alone."""
    return infidelity_from_chi(dephasing_chi(psd, ctrl, band_hz, points_per_decade))


def band_sensitivity(psd: DephasingPsd, ctrl: ControlSegmentList,
                     band_hz: Tuple[float, float] = DEFAULT_BAND_HZ) -> Dict[str, float]:
    """How much of ``chi`` comes from the lowest and the highest decade of the band."""
    lo, hi = band_hz
    chi = dephasing_chi(psd, ctrl, band_hz)
    low = dephasing_chi(psd, ctrl, (lo, min(hi, 10.0 * lo)))
    high = dephasing_chi(psd, ctrl, (max(lo, hi / 10.0), hi))
    return {"chi": chi, "band_low_hz": lo, "band_high_hz": hi,
            "lowest_decade_fraction": low / chi if chi > 0 else 0.0,
            "highest_decade_fraction": high / chi if chi > 0 else 0.0}


# ---------------------------------------------------------------- Monte Carlo check

def monte_carlo_chi(ctrl: ControlSegmentList, s0: float, n_traj: int, rng: np.random.Generator,
                    n_steps: int = 2000, batch: int = 2000) -> Tuple[float, float]:
    """``<|phi|^2>`` over white frequency-noise trajectories (two-sided ``C = s0 delta``).

    Each trajectory draws ``delta_w`` per step with variance ``s0 / dt`` and
    accumulates ``phi_j = int delta_w(t) R_zj(t) dt``.

    Returns:
        ``(chi, standard_error)``.
    """
    dt = ctrl.duration / n_steps
    r = toggling_frame(ctrl, (np.arange(n_steps) + 0.5) * dt)
    sq = []
    left = n_traj
    while left > 0:
        k = min(batch, left)
        dw = rng.normal(0.0, math.sqrt(s0 / dt), size=(k, n_steps))
        phi = dw @ r.T * dt
        sq.append(np.sum(phi ** 2, axis=1))
        left -= k
    sq = np.concatenate(sq)
    return float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(sq.size))


# ---------------------------------------------------------------- figure tables

def infidelity_table(spectra: Dict[str, PhaseNoiseSpectrum], gate_lengths: Sequence[float],
                     band_hz: Tuple[float, float] = DEFAULT_BAND_HZ) -> Dict[str, np.ndarray]:
    """Infidelity versus gate length for a constant-drive X(pi) and an idle, per source."""
    out: Dict[str, np.ndarray] = {"gate_length_s": np.asarray(gate_lengths, float)}
    for label, spec in spectra.items():
        psd = to_dephasing_psd(spec)
        out[f"xpi_{label}"] = np.array([infidelity_floor(psd, ControlSegmentList.rotation(math.pi, t), band_hz)
                                        for t in gate_lengths])
        out[f"idle_{label}"] = np.array([infidelity_floor(psd, ControlSegmentList.free(t), band_hz)
                                         for t in gate_lengths])
    return out


def write_columns(path, columns: Dict[str, Iterable[float]]) -> Path:
    """Equal-length named columns to CSV with round-trip float formatting."""
    path = Path(path)
    keys = list(columns)
    rows = zip(*(list(columns[k]) for k in keys))
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])
    return path
