"""Compiled inner loops for density-matrix stepping.

Matrices here are at most 3x3, so products are written out by hand; calling
BLAS per step costs more than the arithmetic.
"""

import math

import numpy as np
from numba import njit

_SQRT2 = math.sqrt(2.0)


@njit(cache=True)
def _matmul(a, b, out):
    n = a.shape[0]
    for i in range(n):
        for j in range(n):
            acc = 0j
            for k in range(n):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc


@njit(cache=True)
def expm_antihermitian(h, dt, out, tmp, term):
    """``out = exp(-i h dt)`` for Hermitian ``h`` (Taylor with scaling and squaring)."""
    n = h.shape[0]
    norm = 0.0
    for j in range(n):
        col = 0.0
        for i in range(n):
            col += abs(h[i, j])
        if col > norm:
            norm = col
    norm *= dt
    s = 0
    if norm > 0.25:
        s = int(math.ceil(math.log2(norm / 0.25)))
    scale = dt / (2.0 ** s)
    # out = I, term = I
    for i in range(n):
        for j in range(n):
            out[i, j] = 1.0 + 0j if i == j else 0j
            term[i, j] = out[i, j]
    for k in range(1, 14):
        # term = term @ (-i h scale) / k
        for i in range(n):
            for j in range(n):
                acc = 0j
                for m in range(n):
                    acc += term[i, m] * h[m, j]
                tmp[i, j] = acc * (-1j * scale / k)
        small = 0.0
        for i in range(n):
            for j in range(n):
                term[i, j] = tmp[i, j]
                out[i, j] += tmp[i, j]
                a = abs(tmp[i, j])
                if a > small:
                    small = a
        if small < 1e-18:
            break
    for _ in range(s):
        _matmul(out, out, tmp)
        for i in range(n):
            for j in range(n):
                out[i, j] = tmp[i, j]


@njit(cache=True)
def _build_h(h, omega, detuning, delta, levels):
    for i in range(levels):
        for j in range(levels):
            h[i, j] = 0j
    h[1, 1] = detuning
    h[1, 0] = 0.5 * omega
    h[0, 1] = 0.5 * np.conj(omega)
    if levels == 3:
        h[2, 2] = 2.0 * detuning - delta
        h[2, 1] = _SQRT2 * 0.5 * omega
        h[1, 2] = _SQRT2 * 0.5 * np.conj(omega)


@njit(cache=True)
def evolve_density(rho0, omega, dt, detuning, delta, g1, g2, deph, tol):
    """Step a density matrix through a piecewise-constant drive.

    Each step applies the exact unitary of the step Hamiltonian, then
    amplitude damping (|1>->|0> with probability g1, |2>->|1> with g2), then
    the dephasing Schur multiplier ``deph``.  Returns ``(rho, bad_step)`` with
    ``bad_step = -1`` when every step kept trace and Hermiticity within ``tol``.
    """
    levels = rho0.shape[0]
    rho = rho0.copy()
    h = np.zeros((levels, levels), np.complex128)
    u = np.zeros((levels, levels), np.complex128)
    tmp = np.zeros((levels, levels), np.complex128)
    term = np.zeros((levels, levels), np.complex128)
    r2 = np.zeros((levels, levels), np.complex128)
    s1 = math.sqrt(1.0 - g1)
    s2 = math.sqrt(1.0 - g2)
    damp = g1 > 0.0 or g2 > 0.0
    for k in range(omega.shape[0]):
        _build_h(h, omega[k], detuning, delta, levels)
        if omega[k] == 0:
            for i in range(levels):
                for j in range(levels):
                    rho[i, j] *= np.exp(-1j * (h[i, i].real - h[j, j].real) * dt)
        else:
            expm_antihermitian(h, dt, u, tmp, term)
            # rho = u rho u^dag
            _matmul(u, rho, tmp)
            for i in range(levels):
                for j in range(levels):
                    acc = 0j
                    for m in range(levels):
                        acc += tmp[i, m] * np.conj(u[j, m])
                    r2[i, j] = acc
            for i in range(levels):
                for j in range(levels):
                    rho[i, j] = r2[i, j]
        if damp:
            # K0 = diag(1, s1, s2); K1 = sqrt(g1)|0><1|; K2 = sqrt(g2)|1><2|
            p1 = rho[1, 1].real
            if levels == 3:
                p2 = rho[2, 2].real
                r12 = rho[1, 2]
                rho[0, 2] *= s2
                rho[2, 0] *= s2
                rho[1, 2] = r12 * s1 * s2
                rho[2, 1] = np.conj(rho[1, 2])
                rho[2, 2] = p2 * (1.0 - g2)
            else:
                p2 = 0.0
            rho[0, 1] *= s1
            rho[1, 0] *= s1
            rho[0, 0] = rho[0, 0] + g1 * p1
            rho[1, 1] = p1 * (1.0 - g1) + g2 * p2
        for i in range(levels):
            for j in range(levels):
                rho[i, j] *= deph[i, j]
        tr = 0.0
        herm = 0.0
        for i in range(levels):
            tr += rho[i, i].real
            for j in range(levels):
                d = abs(rho[i, j] - np.conj(rho[j, i]))
                if d > herm:
                    herm = d
        if abs(tr - 1.0) > tol or herm > tol:
            return rho, k
    return rho, -1


@njit(cache=True)
def propagate_unitary(omega, dt, detuning, delta, levels):
    """Coherent propagator of the whole drive (no decoherence)."""
    h = np.zeros((levels, levels), np.complex128)
    u = np.zeros((levels, levels), np.complex128)
    tmp = np.zeros((levels, levels), np.complex128)
    term = np.zeros((levels, levels), np.complex128)
    total = np.eye(levels).astype(np.complex128)
    for k in range(omega.shape[0]):
        _build_h(h, omega[k], detuning, delta, levels)
        expm_antihermitian(h, dt, u, tmp, term)
        _matmul(u, total, tmp)
        for i in range(levels):
            for j in range(levels):
                total[i, j] = tmp[i, j]
    return total
