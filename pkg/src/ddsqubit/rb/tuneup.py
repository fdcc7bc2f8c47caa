"""Automated gate tune-up by error amplification.

Steps:
    1. Coarse Rabi scan of a single pulse to locate ``a_pi``.
    2. Amplitude amplification: prepare with X(+pi/2) or X(-pi/2), apply an odd
       number ``n`` of X(pi) pulses.  The difference of the two excited
       populations is ``sin(n eps)`` for a per-pulse angle error ``eps``,
       independent of the preparation error, so the slope against ``n`` gives
       ``eps`` and ``a_pi <- a_pi * pi / (pi + eps)``.
    3. The same with pairs of X(pi/2) pulses for ``a_pi_2``.
    4. DRAG weight for minimum leakage: golden-section search of the |2>
       population left by one X(pi) pulse.  (Repeated [X(pi), X(-pi)] pairs
       undo most of their own leakage coherently, which flattens that signal.)
    5. DRAG weight for zero phase error: prepare with Y(+pi/2) or Y(-pi/2),
       apply ``N`` [X(pi), X(-pi)] pairs and null the slope of the difference.

Steps 4 and 5 are skipped for a two-level device.  Populations are exact
(no shot noise) unless ``shots`` is given.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq, curve_fit, minimize_scalar

from .. import chain, dds
from ..device import DeviceModel, propagator
from ..pulse import (CalibrationTable, PrimitiveGate, PulseShape, gaussian_area, primitive_to_shape,
                     rotation_shape)

ODD_REPEATS = (1, 3, 5, 7, 9, 11)
PAIR_REPEATS = (1, 2, 3)
BETA_STEP = 0.25


class TuneUpError(RuntimeError):
    """Tune-up did not converge; the partial report is attached."""

    def __init__(self, message: str, report: "TuneUpReport"):
        super().__init__(message)
        self.report = report


@dataclass
class TuneUpReport:
    converged: bool = False
    iterations: int = 0
    angle_errors: List[float] = field(default_factory=list)
    half_angle_errors: List[float] = field(default_factory=list)
    a_pi_history: List[float] = field(default_factory=list)
    coarse_scan: Optional[dict] = None
    beta_leakage: Optional[float] = None
    beta_phase: Optional[float] = None
    leakage_beta0: Optional[float] = None
    leakage_tuned: Optional[float] = None
    resolution_limited: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TuneUpResult:
    calib: CalibrationTable
    report: TuneUpReport


class _Probe:
    """Runs short pulse lists through the chain and returns populations."""

    def __init__(self, device, dac, settings, shots, rng):
        self.device = device
        self.dac = dac
        self.settings = settings
        self.shots = shots
        self.rng = rng

    def run(self, shapes):
        out = chain.simulate(shapes, self.device, self.dac, self.settings, readout_delay=0.0)
        return out

    def p1(self, shapes) -> float:
        p = self.run(shapes).p_excited
        if self.shots:
            p = self.rng.binomial(self.shots, p) / self.shots
        return p

    def leakage(self, shapes) -> float:
        return self.run(shapes).leakage


def _slope_through_origin(n, diff) -> float:
    n = np.asarray(n, float)
    x = np.arcsin(np.clip(diff, -1.0, 1.0))
    return float(np.sum(n * x) / np.sum(n * n))


def amplitude_error(probe: _Probe, calib: CalibrationTable, repeats=ODD_REPEATS) -> float:
    """Per-pulse angle error of X(pi) from the odd-repetition scheme."""
    xpi = primitive_to_shape(PrimitiveGate.X180, calib)
    plus = primitive_to_shape(PrimitiveGate.X90, calib)
    minus = primitive_to_shape(PrimitiveGate.XM90, calib)
    diff = [probe.p1([minus] + [xpi] * n) - probe.p1([plus] + [xpi] * n) for n in repeats]
    return _slope_through_origin(repeats, diff)


def half_amplitude_error(probe: _Probe, calib: CalibrationTable, repeats=ODD_REPEATS) -> float:
    """Per-pulse angle error of X(pi/2) from repeated pulse pairs."""
    plus = primitive_to_shape(PrimitiveGate.X90, calib)
    minus = primitive_to_shape(PrimitiveGate.XM90, calib)
    diff = [probe.p1([minus] + [plus] * (2 * n)) - probe.p1([plus] + [plus] * (2 * n)) for n in repeats]
    return 0.5 * _slope_through_origin(repeats, diff)


def phase_error_slope(probe: _Probe, calib: CalibrationTable, repeats=PAIR_REPEATS) -> float:
    """Slope (per [X(pi), X(-pi)] pair) of P1(Y-pi/2 prep) - P1(Y+pi/2 prep)."""
    pair = [rotation_shape(math.pi, 0.0, calib), rotation_shape(-math.pi, 0.0, calib)]
    yp = primitive_to_shape(PrimitiveGate.Y90, calib)
    ym = primitive_to_shape(PrimitiveGate.YM90, calib)
    n = np.asarray(repeats, float)
    diff = np.array([probe.p1([ym] + pair * k) - probe.p1([yp] + pair * k) for k in repeats])
    return float(np.sum(n * diff) / np.sum(n * n))


def pulse_leakage(probe: _Probe, calib: CalibrationTable, beta: float) -> float:
    """|2> population after a single X(pi) from the ground state."""
    return probe.leakage([primitive_to_shape(PrimitiveGate.X180, calib.replace(beta=beta))])


def rabi_scan(probe: _Probe, calib: CalibrationTable, guess: float, points: int = 19) -> dict:
    """Single-pulse excitation versus amplitude, fitted to ``c sin^2(pi a / 2 a_pi)``."""
    amps = guess * np.linspace(0.6, 1.5, points)
    amps = amps[np.abs(amps) <= 1.0]
    p1 = []
    for a in amps:
        shape = PulseShape(sigma=calib.sigma_s, truncation=calib.truncation, amplitude=float(a),
                           drag_coefficient=calib.beta, buffer_after=calib.buffer_s)
        p1.append(probe.p1([shape]))
    p1 = np.asarray(p1)

    def f(a, c, a_pi):
        return c * np.sin(0.5 * np.pi * a / a_pi) ** 2

    start = float(amps[np.argmax(p1)])
    (c, a_pi), _ = curve_fit(f, amps, p1, p0=(1.0, start))
    return {"amplitudes": amps.tolist(), "p1": p1.tolist(), "a_pi": float(abs(a_pi)), "contrast": float(c)}


class _Bracketed:
    """Fixed-point amplitude updates that fall back to bisection.

    With a quantized DAC the error estimate is a staircase in the amplitude,
    so the plain update ``a <- a pi / (pi + eps)`` can cycle around zero
    without ever landing inside the tolerance.  Once the sign has flipped the
    root is bisected until the bracket is narrower than ``rel_width``.
    """

    def __init__(self, target: float, tol: float, rel_width: float):
        self.target = target
        self.tol = tol
        self.rel_width = rel_width
        self.lo = None  # amplitude with eps < 0 (under-rotation)
        self.hi = None  # amplitude with eps > 0

    def step(self, a: float, eps: float) -> Tuple[float, bool]:
        if abs(eps) < self.tol:
            return a, True
        if eps > 0:
            self.hi = (a, eps) if self.hi is None or a < self.hi[0] else self.hi
        else:
            self.lo = (a, eps) if self.lo is None or a > self.lo[0] else self.lo
        guess = a * self.target / (self.target + eps)
        if self.lo is None or self.hi is None:
            return guess, False
        a_lo, a_hi = self.lo[0], self.hi[0]
        if abs(a_hi - a_lo) <= self.rel_width * abs(a):
            best = min((self.lo, self.hi), key=lambda v: abs(v[1]))
            return best[0], True
        margin = 0.1 * abs(a_hi - a_lo)
        if not min(a_lo, a_hi) + margin < guess < max(a_lo, a_hi) - margin:
            guess = 0.5 * (a_lo + a_hi)
        return guess, False


#: Relative amplitude bracket below which the error estimate is resolution limited.
RESOLUTION = 1e-6


def _amplitude_loop(probe, calib, report, tol, max_iter):
    full = _Bracketed(math.pi, tol, RESOLUTION)
    half = _Bracketed(0.5 * math.pi, tol, RESOLUTION)
    for _ in range(max_iter):
        eps = amplitude_error(probe, calib)
        a_pi, ok1 = full.step(calib.a_pi, eps)
        if abs(a_pi) > 1.0:
            raise TuneUpError(f"pi pulse needs {a_pi:.4f} of full scale", report)
        calib = calib.replace(a_pi=a_pi)
        eps2 = half_amplitude_error(probe, calib)
        a_pi_2, ok2 = half.step(calib.a_pi_2, eps2)
        calib = calib.replace(a_pi_2=a_pi_2)
        report.iterations += 1
        report.angle_errors.append(eps)
        report.half_angle_errors.append(eps2)
        report.a_pi_history.append(calib.a_pi)
        if ok1 and ok2:
            report.resolution_limited = abs(eps) >= tol or abs(eps2) >= tol
            return calib, True
    return calib, False


def leakage_beta(probe: _Probe, calib: CalibrationTable, grid) -> Tuple[float, float]:
    """Golden-section minimum of the single-pulse leakage, bracketed by a coarse grid."""
    values = [pulse_leakage(probe, calib, b) for b in grid]
    k = int(np.clip(np.argmin(values), 1, len(grid) - 2))
    if not values[k] < min(values[k - 1], values[k + 1]):
        # flat or edge minimum (coarse DAC grids): keep the grid point
        k = int(np.argmin(values))
        return float(grid[k]), float(values[k])
    res = minimize_scalar(lambda b: pulse_leakage(probe, calib, b),
                          bracket=(grid[k - 1], grid[k], grid[k + 1]), method="golden",
                          options={"xtol": 1e-4})
    return float(res.x), float(res.fun)


def phase_beta(probe: _Probe, calib: CalibrationTable, grid) -> float:
    """DRAG weight nulling the phase-error slope.

    The slope is periodic in ``beta`` once the accumulated error wraps, so the
    root is taken at the upward crossing nearest zero.
    """
    def slope(b):
        return phase_error_slope(probe, calib.replace(beta=float(b)))

    values = np.array([slope(b) for b in grid])
    ups = [k for k in range(len(grid) - 1) if values[k] <= 0.0 < values[k + 1]]
    if not ups:
        raise TuneUpError("no zero crossing of the DRAG phase slope in range", TuneUpReport())
    k = min(ups, key=lambda j: abs(grid[j] + grid[j + 1]))
    return float(brentq(slope, grid[k], grid[k + 1], xtol=1e-6))


def tune_up(device: DeviceModel, dac: dds.DacConfig, initial_calib: CalibrationTable,
            master_seed: int = 0, settings: Optional[chain.ChainSettings] = None, tol: float = 1e-4,
            max_iter: int = 20, shots: Optional[int] = None, beta_range=(-3.0, 3.0)) -> TuneUpResult:
    """Calibrate ``a_pi``, ``a_pi_2`` and ``beta`` against the simulator.

    ``initial_calib.a_pi`` is the starting guess (within about 30% of the true
    value).  The returned table carries the phase-nulling DRAG weight; the
    leakage-optimal weight is reported alongside.

    Raises:
        TuneUpError: the amplitude loop needed more than ``max_iter`` rounds,
            or a pi pulse would exceed full scale.
    """
    if initial_calib.a_pi is None:
        raise ValueError("tune-up needs an initial a_pi guess")
    settings = settings or chain.ChainSettings()
    if settings.mode in ("ideal", "full_dds"):
        settings = chain.ChainSettings(mode="hybrid", cutoff=settings.cutoff, readout=settings.readout)
    rng = np.random.default_rng(master_seed)
    probe = _Probe(device, dac, settings, shots, rng)
    report = TuneUpReport()
    calib = initial_calib
    if calib.a_pi_2 is None:
        calib = calib.replace(a_pi_2=0.5 * calib.a_pi)

    if abs(amplitude_error(probe, calib)) >= tol:
        scan = rabi_scan(probe, calib, calib.a_pi)
        report.coarse_scan = scan
        if scan["a_pi"] > 1.0:
            raise TuneUpError(f"pi pulse needs {scan['a_pi']:.4f} of full scale", report)
        calib = calib.replace(a_pi=scan["a_pi"], a_pi_2=0.5 * scan["a_pi"])

    calib, ok = _amplitude_loop(probe, calib, report, tol, max_iter)
    if not ok:
        raise TuneUpError(f"amplitude calibration did not converge in {max_iter} iterations", report)

    if device.levels == 3:
        grid = np.arange(beta_range[0], beta_range[1] + 1e-9, BETA_STEP)
        report.beta_leakage, report.leakage_tuned = leakage_beta(probe, calib, grid)
        report.leakage_beta0 = pulse_leakage(probe, calib, 0.0)
        beta = phase_beta(probe, calib, grid)
        report.beta_phase = beta
        calib = calib.replace(beta=beta)
        calib, ok = _amplitude_loop(probe, calib, report, tol, max_iter - report.iterations)
        if not ok:
            raise TuneUpError("amplitude calibration did not converge after the DRAG step", report)
    report.converged = True
    return TuneUpResult(calib, report)


def pulse_rotation_angle(shape: PulseShape, device: DeviceModel, dac: dds.DacConfig,
                         settings: Optional[chain.ChainSettings] = None) -> float:
    """Rotation angle of one pulse within the qubit subspace (ground truth).

    Taken from the coherent propagator of the demodulated drive; the
    computational block is normalised to SU(2) before reading the angle.
    """
    settings = settings or chain.ChainSettings()
    d = chain.drive([shape], device, dac, settings)
    u = propagator(d.values, d.frame_freq, device, d.dt)[:2, :2]
    det = np.linalg.det(u)
    u = u / np.sqrt(det)
    c = min(1.0, abs(np.trace(u).real) / 2.0)
    return 2.0 * math.acos(c)


def pulse_angle_error(shape: PulseShape, target: float, device: DeviceModel, dac: dds.DacConfig,
                      settings: Optional[chain.ChainSettings] = None) -> float:
    """|rotation angle - target| for ``0 <= target <= pi``."""
    return abs(pulse_rotation_angle(shape, device, dac, settings) - target)


def guess_a_pi(device: DeviceModel, calib: CalibrationTable) -> float:
    """Linear-response pi amplitude for the table's pulse width."""
    return math.pi / (device.rabi_per_fullscale * gaussian_area(calib.sigma_s, calib.truncation))
