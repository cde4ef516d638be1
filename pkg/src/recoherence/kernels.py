"""Forced-mode integrators: compiled core with a NumPy fallback.

The compiled extension ``recoherence._forced`` is used when importable;
set ``RECOHERENCE_PURE_PYTHON=1`` to force the fallback.  Both backends share
the same signatures, so callers never branch on ``BACKEND``.
"""
from __future__ import annotations

import os

import numpy as np


def _rk4_forced_modes_py(omega, drive, eps_half, dt, stride, alpha0, out):
    n_steps = (eps_half.shape[0] - 1) // 2
    mi_w = -1j * omega
    a = alpha0.astype(complex).copy()
    out[0] = a
    h2, h6 = 0.5 * dt, dt / 6.0
    for n in range(n_steps):
        f0 = drive * eps_half[2 * n]
        fm = drive * eps_half[2 * n + 1]
        f1 = drive * eps_half[2 * n + 2]
        k1 = mi_w * a + f0
        k2 = mi_w * (a + h2 * k1) + fm
        k3 = mi_w * (a + h2 * k2) + fm
        k4 = mi_w * (a + dt * k3) + f1
        a = a + h6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (n + 1) % stride == 0:
            out[(n + 1) // stride] = a


def _etd_forced_modes_py(phase, c0, c1, c2, eps_half, stride, alpha0, out):
    n_steps = (eps_half.shape[0] - 1) // 2
    a = alpha0.astype(complex).copy()
    out[0] = a
    for n in range(n_steps):
        a = phase * a + c0 * eps_half[2 * n] + c1 * eps_half[2 * n + 1] + c2 * eps_half[2 * n + 2]
        if (n + 1) % stride == 0:
            out[(n + 1) // stride] = a


_py = {"rk4": _rk4_forced_modes_py, "etd": _etd_forced_modes_py}

BACKEND = "python"
if not os.environ.get("RECOHERENCE_PURE_PYTHON"):
    try:
        from . import _forced

        _compiled = {"rk4": _forced.rk4_forced_modes, "etd": _forced.etd_forced_modes}
        BACKEND = "cython"
    except ImportError:
        _compiled = None
else:
    _compiled = None


def get_kernel(name: str, backend: str | None = None):
    backend = backend or BACKEND
    if backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled extension recoherence._forced is not built")
        return _compiled[name]
    if backend == "python":
        return _py[name]
    raise ValueError(f"unknown backend {backend!r}")


def etd_moments(z: np.ndarray) -> tuple:
    """I_n(z) = int_0^1 exp(-i z (1-u)) u^n du for n = 0, 1, 2.

    Power series for |z| < 1, integration-by-parts recurrence otherwise.
    """
    z = np.asarray(z, dtype=float)
    out = [np.empty(z.shape, complex) for _ in range(3)]
    small = np.abs(z) < 1.0
    if np.any(small):
        zs = z[small]
        for n in range(3):
            acc = np.zeros(zs.shape, complex)
            fact_n = float(np.prod(np.arange(1, n + 1))) if n else 1.0
            denom = float(np.prod(np.arange(1, n + 2)))
            power = np.ones(zs.shape, complex)
            for m in range(30):
                acc += power * (fact_n / denom)
                power = power * (-1j * zs)
                denom *= n + m + 2
            out[n][small] = acc
    big = ~small
    if np.any(big):
        zb = z[big]
        iz = 1j * zb
        i0 = (1.0 - np.exp(-iz)) / iz
        i1 = (1.0 - i0) / iz
        i2 = (1.0 - 2.0 * i1) / iz
        out[0][big], out[1][big], out[2][big] = i0, i1, i2
    return tuple(out)


def etd_coefficients(omega: np.ndarray, drive: np.ndarray, h: float) -> tuple:
    """Per-mode step map alpha -> phase*alpha + c0*eps(t) + c1*eps(t+h/2) + c2*eps(t+h).

    The linear part is exact; the forcing is integrated exactly against the
    quadratic interpolant of eps through the three nodes.
    """
    z = omega * h
    i0, i1, i2 = etd_moments(z)
    # Lagrange basis on u = 0, 1/2, 1
    l0 = i0 - 3.0 * i1 + 2.0 * i2
    l1 = 4.0 * i1 - 4.0 * i2
    l2 = -i1 + 2.0 * i2
    scale = h * drive
    return np.exp(-1j * z), scale * l0, scale * l1, scale * l2


def integrate_forced_modes(omega, drive, eps_half, dt, stride, alpha0, method="rk4", backend=None):
    """Run one integrator over a block of steps; returns amplitudes every ``stride`` steps."""
    omega = np.ascontiguousarray(omega, dtype=float)
    drive = np.ascontiguousarray(drive, dtype=float)
    eps_half = np.ascontiguousarray(eps_half, dtype=float)
    alpha0 = np.ascontiguousarray(alpha0, dtype=complex)
    n_steps = (eps_half.size - 1) // 2
    if eps_half.size != 2 * n_steps + 1:
        raise ValueError("eps_half must have odd length 2*n_steps + 1")
    stride = int(stride)
    out = np.zeros((n_steps // stride + 1, omega.size), complex)
    kern = get_kernel(method, backend)
    if method == "rk4":
        kern(omega, drive, eps_half, float(dt), stride, alpha0, out)
    else:
        phase, c0, c1, c2 = (np.ascontiguousarray(x) for x in etd_coefficients(omega, drive, dt))
        kern(phase, c0, c1, c2, eps_half, stride, alpha0, out)
    return out
