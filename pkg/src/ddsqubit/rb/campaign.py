"""Randomized benchmarking campaigns: sequences -> waveforms -> qubit -> fit."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .. import chain, clifford, dds
from ..device import (DeviceModel, amplitude_ground_probability, classify_amplitudes,
                      excited_probability, reported_ground_probability, sample_readout_amplitudes)
from ..pulse import CalibrationTable
from .fit import N_G, DecayFit, FitError, fit_decay

DEFAULT_LENGTHS = (2, 4, 8, 16, 32, 64, 128, 256, 400)
BACKGROUND_OFFSET = 2e9


class CorrectionError(RuntimeError):
    """Background amplitude unusable for droop correction."""


@dataclass(frozen=True)
class RbConfig:
    """Campaign settings.

    Attributes:
        lengths: Strictly increasing Clifford counts ``m``.
        n_seeds: Random sequences per length.
        shots: Single-shot measurements per sequence.
        mode: ``hybrid``, ``full_dds``, ``upconversion`` or ``ideal``.
        readout_delay: Gap between the last gate and the readout pulse (s).
        exact_populations: Use exact report probabilities instead of sampled
            shots.  ``None`` picks exact for ``ideal`` mode and sampling otherwise.
        depolarizing: Per-Clifford depolarizing probability injected in
            ``ideal`` mode (the fitted EPC should be half of it).
        cutoff: Demodulation corner (Hz).
        readout_amplitude: Readout pulse peak (full-scale fraction).
        readout_sigma: Readout Gaussian width (s).
    """

    lengths: Tuple[int, ...] = DEFAULT_LENGTHS
    n_seeds: int = 20
    shots: int = 1000
    mode: str = "hybrid"
    readout_delay: float = 120e-9
    exact_populations: Optional[bool] = None
    depolarizing: float = 0.0
    cutoff: float = 1e9
    readout_amplitude: float = 0.05
    readout_sigma: float = 100e-9

    def __post_init__(self):
        lengths = tuple(int(m) for m in self.lengths)
        object.__setattr__(self, "lengths", lengths)
        if any(b <= a for a, b in zip(lengths, lengths[1:])):
            raise ValueError("lengths must be strictly increasing")
        if not lengths or lengths[0] < 0:
            raise ValueError("lengths must be non-negative and non-empty")
        if self.n_seeds < 1 or self.shots < 1:
            raise ValueError("n_seeds and shots must be >= 1")
        if self.mode not in chain.MODES:
            raise ValueError(f"mode must be one of {chain.MODES}")
        if not 0.0 <= self.depolarizing <= 1.0:
            raise ValueError("depolarizing must be a probability")
        if self.readout_delay < 0:
            raise ValueError("readout_delay must be >= 0")

    @property
    def exact(self) -> bool:
        if self.exact_populations is None:
            return self.mode == "ideal"
        return bool(self.exact_populations)

    def chain_settings(self) -> chain.ChainSettings:
        ro = chain.ReadoutPulse(amplitude=self.readout_amplitude, sigma=self.readout_sigma,
                                delay=self.readout_delay)
        return chain.ChainSettings(mode=self.mode, cutoff=self.cutoff, readout=ro)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lengths"] = list(self.lengths)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RbConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown rb keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class SequenceOutcome:
    """Per-sequence observables, in (length, seed) order within a campaign."""

    length: int
    seed_index: int
    survival: float
    p_excited: float
    leakage: float
    droop: float = 0.0
    corrected_survival: Optional[float] = None
    background_excited: Optional[float] = None


@dataclass
class RbResult:
    """Survival curve, fit and derived error rates."""

    lengths: List[int]
    survival: List[float]
    stderr: List[float]
    fit_errors: List[float]
    per_sequence: List[List[float]]
    leakage: List[float]
    A: float
    p: float
    B: float
    sigma_A: float
    sigma_p: float
    sigma_B: float
    covariance: List[List[float]]
    chi2_red: float
    epc: float
    epc_sigma: float
    epg: float
    epg_sigma: float
    n_g: float = N_G
    flags: List[str] = field(default_factory=list)
    mode: str = ""
    master_seed: Optional[int] = None
    shots: int = 0
    n_seeds: int = 0
    extras: Dict[str, list] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path=None) -> str:
        text = json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["m", "survival", "stderr", "fit_sigma", "leakage", "model"])
            for m, s, e, fe, lk in zip(self.lengths, self.survival, self.stderr, self.fit_errors,
                                       self.leakage):
                model = self.A * self.p ** m + self.B
                w.writerow([m, f"{s:.10f}", f"{e:.10f}", f"{fe:.10f}", f"{lk:.6e}", f"{model:.10f}"])
        return path


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


# ---------------------------------------------------------------- per-sequence work

@dataclass(frozen=True)
class _Context:
    cfg: RbConfig
    device: DeviceModel
    calib: Optional[CalibrationTable]
    dac: dds.DacConfig
    distortion: Optional[dds.DistortionModel]
    background: bool
    background_offset: float


def sequence_seed(master_seed: int, length_index: int, seed_index: int) -> np.random.SeedSequence:
    """Independent substream for one sequence of a campaign."""
    return np.random.SeedSequence(master_seed, spawn_key=(length_index, seed_index))


def _ideal_state(seq: clifford.RbSequence, depolarizing: float) -> np.ndarray:
    rho = np.array([[1.0, 0.0], [0.0, 0.0]], complex)
    mixed = 0.5 * np.eye(2)
    els = clifford.elements()
    for i in seq.all_indices():
        u = els[i].unitary
        rho = (1.0 - depolarizing) * (u @ rho @ u.conj().T) + depolarizing * mixed
    return rho


def _flip_survival(state, device, exact, shots, rng) -> float:
    p0 = reported_ground_probability(state, device)
    if exact:
        return p0
    return rng.binomial(shots, p0) / shots


def simulate_sequence(ctx: _Context, length_index: int, seed_index: int, master_seed: int) -> SequenceOutcome:
    """Generate, synthesize, evolve and measure one RB sequence."""
    cfg = ctx.cfg
    m = cfg.lengths[length_index]
    seq_ss, shot_ss = sequence_seed(master_seed, length_index, seed_index).spawn(2)
    seq = clifford.generate_sequence(m, seq_ss)
    rng = np.random.default_rng(shot_ss)
    exact = cfg.exact

    if cfg.mode == "ideal":
        rho = _ideal_state(seq, cfg.depolarizing)
        return SequenceOutcome(m, seed_index, _flip_survival(rho, ctx.device, exact, cfg.shots, rng),
                               excited_probability(rho), 0.0)

    settings = cfg.chain_settings()
    shapes = chain.gate_shapes(seq.primitives(), ctx.calib)
    out = chain.simulate(shapes, ctx.device, ctx.dac, settings, ctx.distortion)
    leak = out.leakage
    if cfg.mode != "full_dds":
        return SequenceOutcome(m, seed_index, _flip_survival(out.state, ctx.device, exact, cfg.shots, rng),
                               out.p_excited, leak)

    dev = ctx.device
    d = out.readout_droop
    bg_state = None
    if ctx.background:
        bg = chain.simulate(shapes, dev, ctx.dac, settings, ctx.distortion,
                            carrier_offset=ctx.background_offset)
        bg_state, bg_droop = bg.state, bg.readout_droop
    if exact:
        raw = amplitude_ground_probability(out.state, d, dev)
        corrected = None
        if bg_state is not None:
            a_bg = (1.0 - bg_droop) * (dev.readout_s0 + (dev.readout_s1 - dev.readout_s0)
                                       * excited_probability(bg_state))
            corrected = amplitude_ground_probability(out.state, d, dev, _gain(dev, a_bg))
    else:
        amps = sample_readout_amplitudes(out.state, d, dev, rng, cfg.shots)
        raw = float(np.mean(classify_amplitudes(amps, dev) == 0))
        corrected = None
        if bg_state is not None:
            bg_amps = sample_readout_amplitudes(bg_state, bg_droop, dev, rng, cfg.shots)
            gain = _gain(dev, float(np.mean(bg_amps)))
            corrected = float(np.mean(classify_amplitudes(amps * gain, dev) == 0))
    return SequenceOutcome(m, seed_index, raw, out.p_excited, leak, d, corrected,
                           None if bg_state is None else excited_probability(bg_state))


def _gain(dev: DeviceModel, a_bg: float) -> float:
    if not a_bg > 0:
        raise CorrectionError(f"background readout amplitude {a_bg:g} is not positive")
    return dev.readout_s0 / a_bg


_WORKER_CTX: Optional[_Context] = None


def _init_worker(ctx: _Context) -> None:
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _worker(task) -> SequenceOutcome:
    return simulate_sequence(_WORKER_CTX, *task)


def _run_sequences(ctx: _Context, master_seed: int, jobs: int = 1) -> List[SequenceOutcome]:
    tasks = [(i, j, master_seed) for i in range(len(ctx.cfg.lengths)) for j in range(ctx.cfg.n_seeds)]
    if jobs <= 1:
        return [simulate_sequence(ctx, *t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(ctx,)) as ex:
        return list(ex.map(_worker, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


# ---------------------------------------------------------------- reduction

def binomial_errors(survival: np.ndarray, n_total: int) -> np.ndarray:
    p = np.clip(survival, 0.5 / n_total, 1.0 - 0.5 / n_total)
    return np.sqrt(p * (1.0 - p) / n_total)


def reduce_outcomes(outcomes: Sequence[SequenceOutcome], cfg: RbConfig, master_seed=None,
                    corrected: bool = False) -> RbResult:
    """Average per-sequence survivals by length and fit the decay."""
    n_len, n_seed = len(cfg.lengths), cfg.n_seeds
    vals = np.empty((n_len, n_seed))
    leak = np.zeros((n_len, n_seed))
    droop = np.zeros((n_len, n_seed))
    for o in outcomes:
        i = cfg.lengths.index(o.length)
        v = o.corrected_survival if corrected else o.survival
        if v is None:
            raise ValueError("outcome has no corrected survival")
        vals[i, o.seed_index] = v
        leak[i, o.seed_index] = o.leakage
        droop[i, o.seed_index] = o.droop
    mean = vals.mean(axis=1)
    sem = vals.std(axis=1, ddof=1) / math.sqrt(n_seed) if n_seed > 1 else np.zeros(n_len)
    errs = binomial_errors(mean, n_seed * cfg.shots)
    m = np.asarray(cfg.lengths, float)
    fit = fit_decay(m, mean, errs)
    sA, sp, sB = fit.sigmas
    extras = {"mean_readout_droop": droop.mean(axis=1).tolist()} if cfg.mode == "full_dds" else {}
    return RbResult(
        lengths=list(cfg.lengths), survival=mean.tolist(), stderr=sem.tolist(),
        fit_errors=errs.tolist(), per_sequence=vals.tolist(), leakage=leak.mean(axis=1).tolist(),
        A=fit.A, p=fit.p, B=fit.B, sigma_A=sA, sigma_p=sp, sigma_B=sB,
        covariance=np.asarray(fit.covariance).tolist(), chi2_red=fit.chi2_red,
        epc=fit.epc, epc_sigma=fit.epc_sigma, epg=fit.epg, epg_sigma=fit.epg_sigma,
        flags=list(fit.flags), mode=cfg.mode, master_seed=master_seed, shots=cfg.shots,
        n_seeds=n_seed, extras=extras)


def run_rb(cfg: RbConfig, device: DeviceModel, calib: Optional[CalibrationTable], dac: dds.DacConfig,
           master_seed: int, distortion: Optional[dds.DistortionModel] = None, jobs: int = 1) -> RbResult:
    """Run a full RB campaign and fit ``A p^m + B``.

    Every sequence is drawn as one continuous waveform.  Results depend only
    on ``master_seed`` (not on ``jobs``).

    Raises:
        FitError: the decay fit failed; the raw survivals are attached.
    """
    if cfg.mode != "ideal" and calib is None:
        raise ValueError("a calibration table is required outside ideal mode")
    if cfg.mode in ("hybrid", "full_dds"):
        tones = [dds.ToneSpec(device.f01, label="qubit")]
        if cfg.mode == "full_dds":
            tones.append(dds.ToneSpec(device.f_readout, label="readout"))
        dds.check_nyquist(tones, dac.sample_rate)
    ctx = _Context(cfg, device, calib, dac, distortion if cfg.mode == "full_dds" else None,
                   False, BACKGROUND_OFFSET)
    outcomes = _run_sequences(ctx, master_seed, jobs)
    return reduce_outcomes(outcomes, cfg, master_seed)


def background_subtract_run(cfg: RbConfig, device: DeviceModel, dac: dds.DacConfig, master_seed: int,
                            calib: CalibrationTable, distortion: Optional[dds.DistortionModel] = None,
                            offset: float = BACKGROUND_OFFSET, jobs: int = 1):
    """Full-DDS RB with an off-resonant twin of every sequence.

    The twin carries the same envelopes on a carrier moved by ``offset``; its
    readout amplitude measures the droop, and each shot of the real sequence is
    rescaled by ``s0 / A_bg`` before thresholding.

    Returns:
        ``(raw, corrected, background_excited)`` where the last item is the
        largest excited population reached by any twin.
    """
    if cfg.mode != "full_dds":
        raise ValueError("background subtraction needs mode='full_dds'")
    dds.check_nyquist([dds.ToneSpec(device.f01 + offset, label="background"),
                       dds.ToneSpec(device.f_readout, label="readout")], dac.sample_rate)
    ctx = _Context(cfg, device, calib, dac, distortion, True, offset)
    outcomes = _run_sequences(ctx, master_seed, jobs)
    raw = reduce_outcomes(outcomes, cfg, master_seed)
    corrected = reduce_outcomes(outcomes, cfg, master_seed, corrected=True)
    bg = max(o.background_excited for o in outcomes)
    return raw, corrected, bg


def depolarizing_oracle_result(epsilon: float, cfg: RbConfig, device: DeviceModel,
                               master_seed: int, jobs: int = 1) -> RbResult:
    """Ideal Cliffords with a depolarizing channel of strength ``2 epsilon`` each."""
    cfg = RbConfig(**{**cfg.to_dict(), "mode": "ideal", "depolarizing": 2.0 * epsilon,
                      "exact_populations": bool(cfg.exact_populations)})
    return run_rb(cfg, device, None, dds.DacConfig(), master_seed, jobs=jobs)


__all__ = ["RbConfig", "RbResult", "SequenceOutcome", "CorrectionError", "FitError", "DecayFit",
           "run_rb", "background_subtract_run", "depolarizing_oracle_result", "reduce_outcomes",
           "simulate_sequence", "sequence_seed", "binomial_errors", "DEFAULT_LENGTHS"]
