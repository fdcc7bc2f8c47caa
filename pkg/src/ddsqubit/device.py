"""Three-level transmon in the rotating frame of a drive.

States are density matrices (``levels x levels`` complex arrays).  The drive
enters as a complex baseband stream ``I + iQ`` in full-scale units and is
converted to a Rabi rate with ``rabi_per_fullscale``.  With a real envelope
the drive rotates about X; a quadrature envelope rotates about +Y.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Union

import numpy as np
from scipy import stats

from . import _kernels
from .pulse import gaussian_area

TWO_PI = 2.0 * math.pi

#: A 24 ns (sigma = 6 ns, 4 sigma) Gaussian at 8.49% of full scale is a pi pulse.
DEFAULT_RABI_PER_FULLSCALE = math.pi / (0.0849 * gaussian_area(6e-9, 4.0))


class IntegrationError(RuntimeError):
    """The density matrix left the physical set during integration."""

    def __init__(self, step: int, message: str = ""):
        super().__init__(f"state invalid after step {step}" + (f": {message}" if message else ""))
        self.step = step


@dataclass(frozen=True)
class DeviceModel:
    """Transmon parameters.

    Attributes:
        f01: Qubit transition frequency (Hz).
        anharmonicity: Anharmonicity magnitude delta / 2pi (Hz); f12 = f01 - anharmonicity.
        f_readout: Readout resonator frequency (Hz).
        T1: Energy relaxation time (s); ``inf`` disables relaxation.
        T2: Coherence time (s); ``inf`` together with ``T1 = inf`` disables dephasing.
        levels: 2 or 3.
        rabi_per_fullscale: Rabi rate (rad/s) for a drive at full scale.
        readout_fidelity: Probability that a single shot reports the true outcome.
        readout_s0: Readout amplitude for the ground state.
        readout_s1: Readout amplitude for an excited state.
    """

    f01: float = 4.773e9
    anharmonicity: float = 375e6
    f_readout: float = 10.166e9
    T1: float = 51e-6
    T2: float = 32e-6
    levels: int = 3
    rabi_per_fullscale: float = DEFAULT_RABI_PER_FULLSCALE
    readout_fidelity: float = 0.93
    readout_s0: float = 1.0
    readout_s1: float = 0.4

    def __post_init__(self):
        if self.levels not in (2, 3):
            raise ValueError(f"levels must be 2 or 3, got {self.levels}")
        if not (self.T1 > 0 and self.T2 > 0):
            raise ValueError("T1 and T2 must be positive")
        if self.T2 > 2.0 * self.T1 * (1 + 1e-12):
            raise ValueError(f"T2 = {self.T2:g} s exceeds 2 T1 = {2 * self.T1:g} s")
        if not 0.5 <= self.readout_fidelity <= 1.0:
            raise ValueError("readout_fidelity must be in [0.5, 1]")
        if not self.rabi_per_fullscale > 0:
            raise ValueError("rabi_per_fullscale must be positive")
        if self.anharmonicity <= 0:
            raise ValueError("anharmonicity must be positive (magnitude)")

    @property
    def gamma1(self) -> float:
        return 0.0 if math.isinf(self.T1) else 1.0 / self.T1

    @property
    def gamma_phi(self) -> float:
        """Pure dephasing rate 1/T2 - 1/(2 T1)."""
        g2 = 0.0 if math.isinf(self.T2) else 1.0 / self.T2
        return max(0.0, g2 - 0.5 * self.gamma1)

    @property
    def delta(self) -> float:
        """Anharmonicity in rad/s."""
        return TWO_PI * self.anharmonicity

    def replace(self, **changes) -> "DeviceModel":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "DeviceModel":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown device keys: {sorted(unknown)}")
        return cls(**{k: float(v) if k != "levels" else int(v) for k, v in data.items()})

    def to_json(self, path: Union[str, Path, None] = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, source: Union[str, Path]) -> "DeviceModel":
        p = Path(source)
        return cls.from_dict(json.loads(p.read_text() if p.exists() else str(source)))


# ---------------------------------------------------------------- states

def basis_state(k: int, levels: int = 3) -> np.ndarray:
    rho = np.zeros((levels, levels), dtype=complex)
    rho[k, k] = 1.0
    return rho


def ground_state(levels: int = 3) -> np.ndarray:
    return basis_state(0, levels)


def pure_state(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def check_state(rho: np.ndarray, tol: float = 1e-9) -> None:
    """Raise ``ValueError`` unless ``rho`` is a valid density matrix."""
    if abs(np.trace(rho).real - 1.0) > tol:
        raise ValueError(f"trace {np.trace(rho).real!r} differs from 1")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("state is not Hermitian")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -tol:
        raise ValueError("state has a negative eigenvalue")


def populations(rho: np.ndarray) -> np.ndarray:
    return np.clip(np.real(np.diag(rho)), 0.0, 1.0)


def excited_probability(rho: np.ndarray) -> float:
    """Probability of any non-ground outcome (|2> counts as excited)."""
    return float(min(1.0, max(0.0, 1.0 - rho[0, 0].real)))


# ---------------------------------------------------------------- channels

def step_probabilities(model: DeviceModel, dt: float):
    """Per-step relaxation probabilities ``(g1, g2)`` and dephasing multiplier."""
    g1 = -math.expm1(-model.gamma1 * dt)
    g2 = -math.expm1(-2.0 * model.gamma1 * dt) if model.levels == 3 else 0.0
    n = np.arange(model.levels)
    deph = np.exp(-((n[:, None] - n[None, :]) ** 2) * model.gamma_phi * dt).astype(complex)
    return g1, g2, deph


def amplitude_damping_kraus(g1: float, g2: float = 0.0, levels: int = 3):
    """Kraus operators for |1>->|0> (probability g1) and |2>->|1> (g2)."""
    k0 = np.eye(levels, dtype=complex)
    k0[1, 1] = math.sqrt(1.0 - g1)
    k1 = np.zeros((levels, levels), complex)
    k1[0, 1] = math.sqrt(g1)
    ops = [k0, k1]
    if levels == 3:
        k0[2, 2] = math.sqrt(1.0 - g2)
        k2 = np.zeros((levels, levels), complex)
        k2[1, 2] = math.sqrt(g2)
        ops.append(k2)
    return ops


def dephasing_kraus(deph: np.ndarray):
    """Diagonal Kraus operators realising the Schur multiplier ``deph``.

    ``deph`` is a real positive semidefinite matrix with unit diagonal, so its
    eigen-decomposition ``sum_k w_k v_k v_k^T`` gives ``K_k = sqrt(w_k) diag(v_k)``.
    """
    w, v = np.linalg.eigh(np.real(deph))
    return [math.sqrt(max(wk, 0.0)) * np.diag(v[:, k]).astype(complex)
            for k, wk in enumerate(w) if wk > 1e-15]


def apply_kraus(rho: np.ndarray, ops) -> np.ndarray:
    return sum(k @ rho @ k.conj().T for k in ops)


# ---------------------------------------------------------------- dynamics

def _drive_array(envelope) -> np.ndarray:
    values = getattr(envelope, "values", envelope)
    return np.ascontiguousarray(np.asarray(values, dtype=complex))


def evolve(state: np.ndarray, envelope, frame_freq: float, model: DeviceModel, dt: float,
           tol: float = 1e-9) -> np.ndarray:
    """Integrate a piecewise-constant drive with per-step decoherence.

    Args:
        state: Initial density matrix.
        envelope: Complex baseband samples ``I + iQ`` (full-scale units), one
            per step, or a :class:`~ddsqubit.dds.Baseband`.
        frame_freq: Frequency of the rotating frame (Hz), normally the carrier.
        model: Device parameters.
        dt: Step length (s).
        tol: Allowed trace and Hermiticity drift.

    Returns:
        The final density matrix.

    Raises:
        IntegrationError: with the index of the first step that broke the
            density-matrix invariants.
    """
    rho0 = np.ascontiguousarray(np.asarray(state, dtype=complex))
    if rho0.shape != (model.levels, model.levels):
        raise ValueError(f"state shape {rho0.shape} does not match a {model.levels}-level device")
    omega = model.rabi_per_fullscale * _drive_array(envelope)
    g1, g2, deph = step_probabilities(model, dt)
    detuning = TWO_PI * (model.f01 - frame_freq)
    rho, bad = _kernels.evolve_density(rho0, omega, dt, detuning, model.delta, g1, g2, deph, tol)
    if bad >= 0:
        raise IntegrationError(int(bad))
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise IntegrationError(int(omega.shape[0]) - 1, "negative eigenvalue")
    return rho


def idle(state: np.ndarray, duration: float, model: DeviceModel, dt: float = 1e-9) -> np.ndarray:
    """Free evolution on resonance (decoherence only)."""
    n = max(0, int(round(duration / dt)))
    if n == 0:
        return np.asarray(state, dtype=complex)
    return evolve(state, np.zeros(n, complex), model.f01, model, duration / n)


def propagator(envelope, frame_freq: float, model: DeviceModel, dt: float) -> np.ndarray:
    """Coherent propagator of a drive (decoherence ignored)."""
    omega = model.rabi_per_fullscale * _drive_array(envelope)
    return _kernels.propagate_unitary(omega, dt, TWO_PI * (model.f01 - frame_freq),
                                      model.delta, model.levels)


def evolve_lab_frame(state: np.ndarray, samples: np.ndarray, sample_rate: float, t_start: float,
                     frame_freq: float, model: DeviceModel) -> np.ndarray:
    """Validation path: integrate the real DAC output without the rotating-wave step.

    ``samples`` are output levels in full-scale units starting at ``t_start``.
    The result is expressed in the frame rotating at ``frame_freq`` so it is
    directly comparable with :func:`evolve`.  Costly; meant for pulses of at
    most ~100 ns.
    """
    x = np.asarray(samples, dtype=float)
    dt = 1.0 / sample_rate
    # real drive x(t)(a + a^dag): h[1,0] = rabi * x, so omega = 2 rabi x
    omega = (2.0 * model.rabi_per_fullscale * x).astype(complex)
    g1, g2, deph = step_probabilities(model, dt)
    w01 = TWO_PI * model.f01
    # rotate the initial state from the drive frame into the lab frame at t_start
    n = np.arange(model.levels)
    u0 = np.exp(-1j * n * TWO_PI * frame_freq * t_start)
    rho = np.asarray(state, complex) * np.outer(u0, u0.conj())
    rho, bad = _kernels.evolve_density(np.ascontiguousarray(rho), omega, dt, w01, model.delta,
                                       g1, g2, deph, 1e-9)
    if bad >= 0:
        raise IntegrationError(int(bad))
    t_end = t_start + x.size * dt
    u1 = np.exp(1j * n * TWO_PI * frame_freq * t_end)
    return rho * np.outer(u1, u1.conj())


# ---------------------------------------------------------------- measurement

def reported_ground_probability(state: np.ndarray, model: DeviceModel) -> float:
    """Probability that a single shot reports 0 under the symmetric flip model."""
    p0 = 1.0 - excited_probability(state)
    f = model.readout_fidelity
    return f * p0 + (1.0 - f) * (1.0 - p0)


def measure(state: np.ndarray, model: DeviceModel, rng: np.random.Generator) -> int:
    """One projective shot: 0 for ground, 1 otherwise, then a symmetric flip."""
    bit = int(rng.random() < excited_probability(state))
    if rng.random() >= model.readout_fidelity:
        bit ^= 1
    return bit


def measure_counts(state: np.ndarray, model: DeviceModel, rng: np.random.Generator, shots: int) -> int:
    """Number of shots (out of ``shots``) reporting the ground state."""
    return int(rng.binomial(shots, reported_ground_probability(state, model)))


def readout_amplitude(state: np.ndarray, droop: float, s0: float = 1.0, s1: float = 0.4) -> float:
    """Stylised homodyne amplitude ``(1 - droop)(s0 + (s1 - s0) P_excited)``."""
    if not 0.0 <= droop < 1.0:
        raise ValueError(f"droop must be in [0, 1), got {droop}")
    return (1.0 - droop) * (s0 + (s1 - s0) * excited_probability(state))


def coherence_limit_epg(gate_length: float, model: DeviceModel) -> float:
    """Error of an idle of length ``gate_length`` under T1 and T2 alone."""
    if not gate_length > 0:
        raise ValueError("gate_length must be positive")
    # 1 - (1/2 + e^{-t/T2}/3 + e^{-t/T1}/6), written to avoid cancellation
    return -math.expm1(-gate_length / model.T2) / 3.0 - math.expm1(-gate_length / model.T1) / 6.0


def write_state_csv(rho: np.ndarray, path) -> Path:
    """Debug dump: one row per matrix element with real and imaginary parts."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", "re", "im"])
        for (i, j), z in np.ndenumerate(rho):
            w.writerow([i, j, f"{z.real:.15e}", f"{z.imag:.15e}"])
    return path


# ---------------------------------------------------------------- amplitude readout

def readout_noise_sigma(model: DeviceModel) -> float:
    """Gaussian shot-noise width that yields ``readout_fidelity`` with a midpoint threshold."""
    f = model.readout_fidelity
    if f >= 1.0:
        return 0.0
    return abs(model.readout_s1 - model.readout_s0) / (2.0 * float(stats.norm.ppf(f)))


def sample_readout_amplitudes(state: np.ndarray, droop: float, model: DeviceModel,
                              rng: np.random.Generator, shots: int) -> np.ndarray:
    """Single-shot homodyne amplitudes for ``shots`` repetitions."""
    excited = rng.random(shots) < excited_probability(state)
    level = np.where(excited, model.readout_s1, model.readout_s0) * (1.0 - droop)
    return level + rng.normal(0.0, readout_noise_sigma(model), shots)


def classify_amplitudes(amplitudes: np.ndarray, model: DeviceModel) -> np.ndarray:
    """0 where an amplitude sits on the ground side of the midpoint threshold."""
    thr = 0.5 * (model.readout_s0 + model.readout_s1)
    side = np.sign(model.readout_s1 - model.readout_s0)
    return ((np.asarray(amplitudes) - thr) * side > 0).astype(np.int8)


def amplitude_ground_probability(state: np.ndarray, droop: float, model: DeviceModel,
                                 gain: float = 1.0) -> float:
    """Exact probability of a ground report for amplitudes scaled by ``gain``."""
    s0, s1 = model.readout_s0, model.readout_s1
    thr = 0.5 * (s0 + s1)
    side = np.sign(s1 - s0)
    sigma = readout_noise_sigma(model) * gain
    pe = excited_probability(state)

    def p_ground(level):
        mu = gain * (1.0 - droop) * level
        if sigma == 0.0:
            return float((mu - thr) * side <= 0)
        return float(stats.norm.cdf(side * (thr - mu) / sigma))

    return (1.0 - pe) * p_ground(s0) + pe * p_ground(s1)
