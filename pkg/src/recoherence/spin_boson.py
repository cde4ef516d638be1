"""Tunnelling spin (Omega/2 sigma_1) dressed by the massive bath.

In the adiabatic, lowest-order-in-Omega regime the dressed doublet splits by
Omega*J(t), so the spin behaves like a free spin rotating at the renormalized
frequency while its transverse (1, 2) components are multiplied by J(t).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .bath import BathSpec, CouplingSchedule, decoherence_exponent, local_adiabaticity
from .dephasing import BlochState, DephasingTrace, bloch_entropy, sample_times


@dataclass(frozen=True, eq=False)
class SpinBosonSpec:
    Omega: float
    bath: BathSpec
    schedule: CouplingSchedule
    c_plus: complex = 1.0
    c_minus: complex = 0.0

    def __post_init__(self):
        if not self.Omega > 0:
            raise ValueError("Omega must be positive")
        norm = abs(self.c_plus) ** 2 + abs(self.c_minus) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"|c+|^2 + |c-|^2 = {norm}, expected 1")
        ratio = self.Omega / self.bath.mass
        if ratio > 0.2:
            raise ValueError(f"Omega/m = {ratio:.3g} > 0.2 is outside the adiabatic regime")
        if ratio > 0.05:
            warnings.warn(f"Omega/m = {ratio:.3g}: lowest-order splitting is approximate", stacklevel=2)

    @property
    def rho0(self) -> BlochState:
        return BlochState.from_amplitudes(self.c_plus, self.c_minus)

    def J(self, t) -> np.ndarray:
        eps, _ = self.schedule.values(t)
        return np.exp(decoherence_exponent(self.bath, eps))


def renormalized_splitting(spec: SpinBosonSpec, t: float) -> float:
    """Half the doublet splitting, Omega*J(t)/2 (the common offset E0 is dropped)."""
    return 0.5 * spec.Omega * float(spec.J(np.asarray([t]))[0])


def rotate_free(rho0, theta):
    """Bloch vector after exp(-i theta sigma_1 / 2): precession about axis 1."""
    r1, r2, r3 = rho0
    c, s = np.cos(theta), np.sin(theta)
    return np.column_stack([np.full_like(theta, r1), r2 * c - r3 * s, r3 * c + r2 * s])


def run_adiabatic(spec: SpinBosonSpec, sample_dt: float, times=None) -> DephasingTrace:
    if spec.schedule.has_steps:
        raise ValueError("adiabatic evolution needs a step-free schedule")
    t = sample_times(spec.schedule.T, sample_dt) if times is None else np.asarray(times, float)
    J = spec.J(t)
    if spec.Omega * J.max() * np.max(np.diff(t), initial=0.0) > 0.1 + 1e-12:
        raise ValueError("sampling too coarse: Omega*J*sample_dt must be <= 0.1")
    theta = spec.Omega * cumulative_trapezoid(J, t, initial=0.0)
    free = rotate_free(spec.rho0.rho_vec, theta)
    rho = free * np.column_stack([J, J, np.ones_like(J)])
    return DephasingTrace(
        t=t, rho=rho, J=J.astype(complex),
        adiabaticity=local_adiabaticity(spec.bath, spec.schedule, t),
        extra={"theta_R": theta},
        info={"method": "spin-boson-adiabatic", "Omega": spec.Omega},
    )


@dataclass(frozen=True)
class EntropyCycle:
    S_min: float
    S_max: float
    period: float


def _crossings(t, y, direction=+1):
    y = direction * np.asarray(y)
    idx = np.nonzero((y[:-1] < 0) & (y[1:] >= 0))[0]
    return t[idx] - y[idx] * (t[idx + 1] - t[idx]) / (y[idx + 1] - y[idx])


def entropy_cycle_stats(trace: DephasingTrace) -> EntropyCycle:
    """Entropy extrema and the rotation period, measured from the trace.

    The period is the mean spacing of same-direction zero crossings of rho_3,
    i.e. one full turn of theta_R.
    """
    t = trace.t
    # rho_2/J carries the same rotation when rho_3 never crosses (rho_0 along axis 1 plane)
    ups = _crossings(t, trace.rho[:, 2], +1)
    downs = _crossings(t, trace.rho[:, 2], -1)
    marks = ups if ups.size >= downs.size else downs
    if marks.size < 2:
        J = np.abs(trace.J)
        r2 = np.divide(trace.rho[:, 1], J, out=np.zeros_like(J), where=J > 0)
        marks = _crossings(t, r2, +1)
        if marks.size < 2:
            marks = _crossings(t, r2, -1)
    if marks.size < 2:
        raise ValueError("trace shorter than one full rotation period")
    period = float(np.mean(np.diff(marks)))
    S = trace.entropy
    return EntropyCycle(float(S.min()), float(S.max()), period)


def closed_form_entropy(length: float) -> float:
    return float(bloch_entropy(length))


def rabi_frequency_from_trace(t, rho3) -> float:
    """Angular frequency from the mean spacing of rho_3 zero crossings."""
    marks = np.sort(np.concatenate([_crossings(t, rho3, +1), _crossings(t, rho3, -1)]))
    if marks.size < 2:
        raise ValueError("fewer than two zero crossings")
    return math.pi / float(np.mean(np.diff(marks)))


def oracle_rabi_check(bath: BathSpec, Omega: float, J_target: float = 0.5, n_modes: int = 3,
                      fock_dim: int = 8, k_max: float | None = None, t_ramp: float = 30.0,
                      t_hold: float = 400.0, sample_every: int = 50) -> dict:
    """Tunnelling frequency of the dressed spin, measured in the Fock oracle.

    One run with Omega = 0 measures the branch overlap J on the plateau; a
    second run with Omega > 0 from rho = (0, 0, 1) measures the rho_3
    oscillation frequency, to be compared with Omega * J.
    """
    from .fock import OracleConfig, evolve

    probe = OracleConfig.surrogate(bath, n_modes, CouplingSchedule.constant(0.0, 1.0), k_max=k_max)
    D = sum(h * h / w for w, h in zip(probe.mode_freqs, probe.mode_couplings))
    eps = math.sqrt(-math.log(J_target) / D)
    sched = CouplingSchedule.from_points([(0, 0), (t_ramp, eps), (t_ramp + t_hold, eps)])
    kw = dict(k_max=k_max, fock_dim=fock_dim)
    dephase = evolve(OracleConfig.surrogate(bath, n_modes, sched, **kw), BlochState([1.0, 0.0, 0.0]), sample_every)
    plateau = dephase.t >= t_ramp
    J = float(np.mean(np.hypot(dephase.rho[plateau, 0], dephase.rho[plateau, 1])))
    cfg = OracleConfig.surrogate(bath, n_modes, sched, Omega=Omega, **kw)
    rabi = evolve(cfg, BlochState([0.0, 0.0, 1.0]), sample_every)
    plateau = rabi.t >= t_ramp
    freq = rabi_frequency_from_trace(rabi.t[plateau], rabi.rho[plateau, 2])
    return {
        "eps": eps,
        "J_oracle": J,
        "frequency": freq,
        "Omega_J": Omega * J,
        "relative_error": abs(freq / (Omega * J) - 1.0),
        "min_mode_freq": min(cfg.mode_freqs),
        "max_leakage": max(dephase.max_leakage, rabi.max_leakage),
        "trace": rabi,
    }
