"""Analytic control envelopes: truncated Gaussian with DRAG quadrature.

Amplitudes are expressed as signed fractions of the DAC full scale.  The
in-phase envelope is a Gaussian with its truncation baseline removed so it
starts and ends at exactly zero; the quadrature carries the first-order
DRAG correction ``Q = -beta * dI/dt / delta``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

DEFAULT_ANHARMONICITY = 375e6  # Hz


class UncalibratedGateError(KeyError):
    """Raised when a primitive needs a calibration entry that is not set."""


@dataclass(frozen=True)
class PulseShape:
    """A single truncated-Gaussian DRAG pulse.

    Attributes:
        sigma: Gaussian width in seconds.
        truncation: Envelope length in units of ``sigma``.
        amplitude: Peak in-phase amplitude as a signed full-scale fraction.
        drag_coefficient: Dimensionless DRAG weight ``beta``.
        phase: Drive axis in radians (0 is X, pi/2 is Y).
        buffer_after: Idle time appended after the envelope, in seconds.
    """

    sigma: float
    truncation: float = 4.0
    amplitude: float = 0.0
    drag_coefficient: float = 0.0
    phase: float = 0.0
    buffer_after: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.truncation > 0:
            raise ValueError(f"truncation must be positive, got {self.truncation}")
        if self.buffer_after < 0:
            raise ValueError(f"buffer_after must be >= 0, got {self.buffer_after}")
        if abs(self.amplitude) > 1.0:
            raise ValueError(f"|amplitude| must be <= 1 (full scale), got {self.amplitude}")

    @property
    def envelope_duration(self) -> float:
        return self.truncation * self.sigma

    @property
    def duration(self) -> float:
        """Total slot length: envelope plus trailing buffer."""
        return self.envelope_duration + self.buffer_after

    @property
    def center(self) -> float:
        return 0.5 * self.envelope_duration


def _gaussian_parts(shape: PulseShape, t: np.ndarray):
    T = shape.envelope_duration
    s = shape.sigma
    u = t - 0.5 * T
    g = np.exp(-(u * u) / (2.0 * s * s))
    base = math.exp(-(T * T) / (8.0 * s * s))
    norm = 1.0 - base
    inside = (t >= 0.0) & (t <= T)
    i_env = np.where(inside, (g - base) / norm, 0.0)
    di_env = np.where(inside, -(u / (s * s)) * g / norm, 0.0)
    return i_env, di_env


def envelope(shape: PulseShape, t, anharmonicity: float = DEFAULT_ANHARMONICITY):
    """Evaluate the (I, Q) envelope of ``shape`` at local time(s) ``t``.

    ``anharmonicity`` is the transmon anharmonicity magnitude in Hz; the DRAG
    quadrature divides by it in rad/s.  The returned quadratures are rotated
    onto the pulse axis, so for ``phase == 0`` they are exactly the Gaussian
    and its DRAG partner.  Both are zero outside ``[0, truncation * sigma]``.
    """
    t_arr = np.asarray(t, dtype=float)
    g, dg = _gaussian_parts(shape, t_arr)
    a = shape.amplitude
    i0 = a * g
    delta = 2.0 * math.pi * anharmonicity
    q0 = -shape.drag_coefficient * a * dg / delta if delta != 0 else np.zeros_like(i0)
    if shape.phase == 0.0:
        i_out, q_out = i0, q0
    else:
        c, s = math.cos(shape.phase), math.sin(shape.phase)
        i_out = c * i0 - s * q0
        q_out = s * i0 + c * q0
    if np.ndim(t) == 0:
        return float(i_out), float(q_out)
    return i_out, q_out


def gaussian_area(sigma: float, truncation: float = 4.0) -> float:
    """Time integral (s) of the unit-amplitude baseline-subtracted Gaussian."""
    T = truncation * sigma
    base = math.exp(-(T * T) / (8.0 * sigma * sigma))
    full = sigma * math.sqrt(2.0 * math.pi) * math.erf(T / (2.0 * math.sqrt(2.0) * sigma))
    return (full - base * T) / (1.0 - base)


def sigma_for_gate_length(gate_length: float, buffer: float = 5e-9, truncation: float = 4.0) -> float:
    """Gaussian width that fills ``gate_length`` minus the trailing buffer."""
    T = gate_length - buffer
    if T <= 0:
        raise ValueError(f"gate length {gate_length} leaves no room for a {buffer} s buffer")
    return T / truncation


class PrimitiveGate(enum.Enum):
    """The seven physical primitives that Clifford words are built from."""

    I = "I"
    X90 = "X90"
    XM90 = "Xm90"
    X180 = "X180"
    Y90 = "Y90"
    YM90 = "Ym90"
    Y180 = "Y180"

    @property
    def axis(self) -> Optional[str]:
        return None if self is PrimitiveGate.I else self.value[0]

    @property
    def angle(self) -> float:
        return {
            "I": 0.0,
            "X90": math.pi / 2, "Xm90": -math.pi / 2, "X180": math.pi,
            "Y90": math.pi / 2, "Ym90": -math.pi / 2, "Y180": math.pi,
        }[self.value]

    def unitary(self) -> np.ndarray:
        """Ideal SU(2) rotation exp(-i angle sigma_axis / 2)."""
        th = self.angle
        c, s = math.cos(th / 2), math.sin(th / 2)
        if self.axis is None:
            return np.eye(2, dtype=complex)
        if self.axis == "X":
            return np.array([[c, -1j * s], [-1j * s, c]])
        return np.array([[c, -s], [s, c]], dtype=complex)


@dataclass(frozen=True)
class CalibrationTable:
    """Tuned pulse parameters shared by every primitive gate.

    ``a_pi`` and ``a_pi_2`` may be ``None`` for an un-tuned table; asking for a
    rotation that needs them raises :class:`UncalibratedGateError`.
    """

    a_pi: Optional[float] = None
    a_pi_2: Optional[float] = None
    beta: float = 1.0
    sigma_s: float = 6e-9
    truncation: float = 4.0
    buffer_s: float = 5e-9

    @property
    def gate_length(self) -> float:
        return self.truncation * self.sigma_s + self.buffer_s

    def replace(self, **changes) -> "CalibrationTable":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "CalibrationTable":
        known = {"a_pi", "a_pi_2", "beta", "sigma_s", "truncation", "buffer_s"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown calibration keys: {sorted(unknown)}")
        return cls(**data)

    def to_json(self, path: Union[str, Path, None] = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, source: Union[str, Path]) -> "CalibrationTable":
        p = Path(source)
        text = p.read_text() if p.exists() else str(source)
        return cls.from_dict(json.loads(text))

    @classmethod
    def for_gate_length(cls, gate_length: float, a_pi: Optional[float] = None,
                        a_pi_2: Optional[float] = None, beta: float = 1.0,
                        buffer_s: float = 5e-9, truncation: float = 4.0) -> "CalibrationTable":
        sigma = sigma_for_gate_length(gate_length, buffer_s, truncation)
        return cls(a_pi=a_pi, a_pi_2=a_pi_2, beta=beta, sigma_s=sigma,
                   truncation=truncation, buffer_s=buffer_s)


_AMPLITUDE_KEYS = {
    PrimitiveGate.X180: ("a_pi", 1.0, 0.0),
    PrimitiveGate.X90: ("a_pi_2", 1.0, 0.0),
    PrimitiveGate.XM90: ("a_pi_2", -1.0, 0.0),
    PrimitiveGate.Y180: ("a_pi", 1.0, math.pi / 2),
    PrimitiveGate.Y90: ("a_pi_2", 1.0, math.pi / 2),
    PrimitiveGate.YM90: ("a_pi_2", -1.0, math.pi / 2),
}


def primitive_to_shape(gate: PrimitiveGate, calib: CalibrationTable) -> PulseShape:
    """Map a primitive gate onto a concrete pulse using ``calib``."""
    if gate is PrimitiveGate.I:
        return PulseShape(sigma=calib.sigma_s, truncation=calib.truncation, amplitude=0.0,
                          drag_coefficient=0.0, phase=0.0, buffer_after=calib.buffer_s)
    key, sign, phase = _AMPLITUDE_KEYS[gate]
    amp = getattr(calib, key)
    if amp is None:
        raise UncalibratedGateError(f"{gate.value} needs '{key}' but the calibration table has none")
    return PulseShape(sigma=calib.sigma_s, truncation=calib.truncation, amplitude=sign * amp,
                      drag_coefficient=calib.beta, phase=phase, buffer_after=calib.buffer_s)


def rotation_shape(angle: float, axis_phase: float, calib: CalibrationTable) -> PulseShape:
    """Pulse for an arbitrary rotation angle, scaled linearly from ``a_pi``.

    Used by tune-up sequences (e.g. X(-pi)) that are not part of the primitive set.
    """
    if calib.a_pi is None:
        raise UncalibratedGateError("rotation needs 'a_pi'")
    if abs(abs(angle) - math.pi / 2) < 1e-12 and calib.a_pi_2 is not None:
        amp = math.copysign(calib.a_pi_2, angle)
    else:
        amp = calib.a_pi * angle / math.pi
    return PulseShape(sigma=calib.sigma_s, truncation=calib.truncation, amplitude=amp,
                      drag_coefficient=calib.beta, phase=axis_phase, buffer_after=calib.buffer_s)
