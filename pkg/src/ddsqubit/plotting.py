"""Matplotlib renderings of the CLI report outputs (files only, Agg backend)."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .rb.campaign import RbResult  # noqa: E402
from .rb.fit import model  # noqa: E402
from .rb.sweep import SweepTable  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _rb_axes(ax, res: RbResult, label: str, color: str) -> None:
    m = np.asarray(res.lengths, float)
    ax.errorbar(m, res.survival, yerr=res.stderr, fmt="o", ms=4, color=color,
                label=f"{label} EPG={res.epg:.2e}({res.epg_sigma:.0e})")
    mm = np.linspace(0, m.max(), 400)
    ax.plot(mm, model(mm, res.A, res.p, res.B), "-", color=color, lw=1)


def plot_rb(res: RbResult, path, title: Optional[str] = None) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    _rb_axes(ax, res, res.mode, "C3")
    ax.set_xlabel("Clifford sequence length m")
    ax.set_ylabel("P(|0>)")
    ax.set_title(title or f"RB ({res.mode})")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_distortion(results: Dict[str, RbResult], path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for (label, res), color in zip(results.items(), ("C3", "C0", "C7")):
        _rb_axes(ax, res, f"{label} B={res.B:.3f}", color)
    ax.axhline(0.5, color="k", lw=0.5, ls=":")
    ax.set_xlabel("Clifford sequence length m")
    ax.set_ylabel("P(|0>)")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_sweep(table: SweepTable, path) -> Path:
    x = np.asarray(table.values)
    xlabel = {"gate_length": "gate length (ns)", "full_scale_fraction": "X(pi) fraction of full scale",
              "sample_rate": "sample rate (GS/s)"}[table.parameter]
    scale = {"gate_length": 1e9, "full_scale_fraction": 1.0, "sample_rate": 1e-9}[table.parameter]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(x * scale, table.epg, yerr=table.epg_sigma, fmt="o", color="C3", label="simulated EPG")
    limits = [r.coherence_limit for r in table.rows]
    if all(v is not None for v in limits):
        ax.plot(x * scale, limits, "--", color="C3", label="coherence limit")
    ax.set_yscale("log")
    if table.parameter == "full_scale_fraction":
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("error per gate")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_noise(freq_hz: Sequence[float], levels: Dict[str, Sequence[float]], psd: Dict[str, Sequence[float]],
               infidelity: Dict[str, np.ndarray], path) -> Path:
    fig, axes = plt.subplots(1, 3, figsize=(13, 4))
    for label in levels:
        axes[0].semilogx(freq_hz, levels[label], label=label)
        axes[1].loglog(freq_hz, psd[label], label=label)
    axes[0].set_xlabel("offset frequency (Hz)")
    axes[0].set_ylabel("L (dBc/Hz)")
    axes[1].set_xlabel("frequency (Hz)")
    axes[1].set_ylabel("S (rad^2/s)")
    t = np.asarray(infidelity["gate_length_s"]) * 1e9
    for k, v in infidelity.items():
        if k == "gate_length_s":
            continue
        axes[2].loglog(t, v, "--" if k.startswith("idle") else "-", label=k)
    axes[2].set_xlabel("gate length (ns)")
    axes[2].set_ylabel("infidelity")
    for ax in axes:
        ax.legend(fontsize=7)
    return _save(fig, path)


def plot_tuneup(report, path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    it = np.arange(1, len(report.angle_errors) + 1)
    ax.semilogy(it, np.abs(report.angle_errors), "o-", label="X(pi) error")
    ax.semilogy(it, np.abs(report.half_angle_errors), "s-", label="X(pi/2) error")
    ax.set_xlabel("iteration")
    ax.set_ylabel("|angle error| (rad)")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_waveform(times, values: Dict[str, np.ndarray], path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for label, v in values.items():
        ax.plot(np.asarray(times) * 1e9, v, lw=0.7, label=label)
    ax.set_xlabel("time (ns)")
    ax.set_ylabel("amplitude (full scale)")
    ax.legend(fontsize=8)
    return _save(fig, path)
