"""Weighted fit of RB survival curves to ``A p^m + B``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np
from scipy.optimize import least_squares

#: Mean number of primitives per Clifford in the shipped decomposition.
N_G = 1.875


class FitError(RuntimeError):
    """The decay fit failed; the raw data ride along for diagnosis."""

    def __init__(self, message: str, lengths=None, survivals=None, errors=None):
        super().__init__(message)
        self.lengths = None if lengths is None else list(map(float, lengths))
        self.survivals = None if survivals is None else list(map(float, survivals))
        self.errors = None if errors is None else list(map(float, errors))


@dataclass
class DecayFit:
    A: float
    p: float
    B: float
    covariance: np.ndarray
    chi2_red: float
    flags: List[str] = field(default_factory=list)

    @property
    def sigmas(self):
        return tuple(float(s) for s in np.sqrt(np.clip(np.diag(self.covariance), 0.0, None)))

    @property
    def epc(self) -> float:
        return epc_from_p(self.p)

    @property
    def epg(self) -> float:
        return epg_from_p(self.p)

    @property
    def epc_sigma(self) -> float:
        return 0.5 * self.sigmas[1]

    @property
    def epg_sigma(self) -> float:
        p = max(self.p, 1e-300)
        return 0.5 / N_G * p ** (1.0 / N_G - 1.0) * self.sigmas[1]


def epc_from_p(p: float) -> float:
    return 0.5 * (1.0 - p)


def epg_from_p(p: float, n_g: float = N_G) -> float:
    return 0.5 * (1.0 - p ** (1.0 / n_g))


def p_from_epg(epg: float, n_g: float = N_G) -> float:
    return (1.0 - 2.0 * epg) ** n_g


def model(m, A, p, B):
    return A * np.power(p, m) + B


def fit_decay(lengths: Sequence[float], survivals: Sequence[float], errors: Sequence[float],
              max_nfev: int = 500) -> DecayFit:
    """Weighted least squares of ``A p^m + B`` with ``0 < p < 1`` and ``0 <= B <= 1``.

    The covariance comes from the Jacobian at the optimum, inflated by the
    reduced chi-square when that exceeds one.  Data without any decay give
    ``p = 1`` and the flag ``"no_decay"``.

    Raises:
        FitError: fewer than three distinct lengths, non-convergence, or a
            singular Jacobian.
    """
    m = np.asarray(lengths, dtype=float)
    y = np.asarray(survivals, dtype=float)
    s = np.asarray(errors, dtype=float)
    if np.unique(m).size < 3:
        raise FitError("need at least three distinct sequence lengths", m, y, s)
    if np.any(~np.isfinite(y)) or np.any(~(s > 0)):
        raise FitError("survivals must be finite and errors positive", m, y, s)
    spread = np.max(y) - np.min(y)
    if spread < 1e-12:
        return DecayFit(0.0, 1.0, float(np.mean(y)), np.zeros((3, 3)), 0.0, ["no_decay"])

    order = np.argsort(m)
    a0 = y[order[0]] - y[order[-1]]
    b0 = min(max(y[order[-1]], 0.0), 1.0)
    x0 = np.array([a0, 0.99, b0])
    lo = np.array([-np.inf, 0.0, 0.0])
    hi = np.array([np.inf, 1.0, 1.0])
    x0 = np.clip(x0, lo + 1e-9, hi - 1e-9)

    def resid(x):
        return (model(m, *x) - y) / s

    def jac(x):
        A, p, _ = x
        pm = np.power(p, m)
        dp = A * m * np.power(p, np.maximum(m - 1.0, 0.0))
        return np.column_stack([pm, dp, np.ones_like(m)]) / s[:, None]

    res = least_squares(resid, x0, jac=jac, bounds=(lo, hi), method="trf",
                        x_scale="jac", max_nfev=max_nfev, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if res.status <= 0:
        raise FitError(f"decay fit did not converge: {res.message}", m, y, s)
    A, p, B = (float(v) for v in res.x)
    flags = []
    if p >= 1.0 - 1e-12:
        flags.append("no_decay")
    if p <= 1e-12:
        flags.append("p_at_zero")
    J = res.jac
    jtj = J.T @ J
    if np.linalg.matrix_rank(jtj) < 3:
        if flags:
            return DecayFit(A, p, B, np.full((3, 3), np.nan), float("nan"), flags)
        raise FitError("singular Jacobian at the optimum", m, y, s)
    dof = m.size - 3
    chi2 = float(np.sum(res.fun ** 2))
    chi2_red = chi2 / dof if dof > 0 else 1.0
    cov = np.linalg.inv(jtj) * max(1.0, chi2_red)
    return DecayFit(A, p, B, cov, chi2_red, flags)
