"""Spin-1/2 dephasing by a massive scalar bath under a coupling schedule.

Three routes to the branch overlap J(t):

* ``run_analytic``: adiabatic closed form J = exp(-eps(t)^2 D).
* ``run_ode_oracle``: integrates every mode's forced amplitude equation for
  the sigma_3 = +1 branch; the -1 branch is its exact parity image.
* ``run_sudden_decouple``: adiabatic dressing, then an instantaneous eps -> 0
  after which the dressing radiates away as free modes.

In every case (rho_1 + i rho_2)(t) = (rho_1 + i rho_2)(0) * J(t) and rho_3 is
conserved.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .bath import BathSpec, CouplingSchedule, adiabaticity_metric, decoherence_exponent, local_adiabaticity
from .coherent import dressing_profile

PAULI = (
    np.array([[0, 1], [1, 0]], complex),
    np.array([[0, -1j], [1j, 0]], complex),
    np.array([[1, 0], [0, -1]], complex),
)


class IntegrationError(RuntimeError):
    pass


def bloch_entropy(length) -> np.ndarray:
    """Von Neumann entropy (nats) of a qubit with Bloch-vector length ``length``."""
    r = np.clip(np.asarray(length, dtype=float), 0.0, 1.0)
    out = np.zeros_like(r)
    for lam in ((1 + r) / 2, (1 - r) / 2):
        nz = lam > 0
        out[nz] -= lam[nz] * np.log(lam[nz])
    return out


@dataclass(frozen=True, eq=False)
class BlochState:
    rho_vec: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.rho_vec, dtype=float).reshape(3)
        if np.linalg.norm(v) > 1 + 1e-9:
            raise ValueError(f"Bloch vector {v} longer than 1")
        object.__setattr__(self, "rho_vec", v)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.rho_vec))

    @property
    def transverse(self) -> complex:
        """rho_1 + i rho_2."""
        return complex(self.rho_vec[0], self.rho_vec[1])

    def density_matrix(self) -> np.ndarray:
        return 0.5 * (np.eye(2) + sum(c * s for c, s in zip(self.rho_vec, PAULI)))

    def entropy(self) -> float:
        return float(bloch_entropy(self.length))

    @classmethod
    def from_density_matrix(cls, rho: np.ndarray, time: float = 0.0) -> "BlochState":
        v = [float(np.real(np.trace(s @ rho))) for s in PAULI]
        return cls(np.asarray(v), time)

    @classmethod
    def from_amplitudes(cls, c_plus: complex, c_minus: complex, time: float = 0.0) -> "BlochState":
        psi = np.array([c_plus, c_minus], complex)
        return cls.from_density_matrix(np.outer(psi, psi.conj()), time)


@dataclass(eq=False)
class DephasingTrace:
    t: np.ndarray
    rho: np.ndarray  # (n, 3)
    J: np.ndarray  # complex branch overlap
    adiabaticity: np.ndarray
    entropy: np.ndarray = None
    extra: dict = field(default_factory=dict)  # additional named columns
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, float)
        self.rho = np.asarray(self.rho, float).reshape(-1, 3)
        self.J = np.asarray(self.J, complex)
        self.adiabaticity = np.broadcast_to(np.asarray(self.adiabaticity, float), self.t.shape).copy()
        if self.entropy is None:
            self.entropy = bloch_entropy(np.linalg.norm(self.rho, axis=1))

    def __len__(self):
        return self.t.size

    def state(self, i: int) -> BlochState:
        return BlochState(self.rho[i], float(self.t[i]))

    @property
    def final(self) -> BlochState:
        return self.state(-1)

    def columns(self) -> dict:
        cols = {
            "t": self.t,
            "rho1": self.rho[:, 0],
            "rho2": self.rho[:, 1],
            "rho3": self.rho[:, 2],
            "reJ": self.J.real,
            "imJ": self.J.imag,
            "absJ": np.abs(self.J),
            "entropy": self.entropy,
            "adiabaticity": self.adiabaticity,
        }
        cols.update(self.extra)
        return cols

    def write_csv(self, path) -> None:
        write_columns(path, self.columns())


def write_columns(path, cols: dict) -> None:
    names = list(cols)
    data = [np.asarray(cols[n]) for n in names]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*data):
            w.writerow([repr(float(x)) for x in row])


def _assemble(t, rho0: BlochState, J, adiab, **info) -> DephasingTrace:
    J = np.asarray(J, complex)
    trans = rho0.transverse * J
    rho = np.column_stack([trans.real, trans.imag, np.full(J.shape, rho0.rho_vec[2])])
    return DephasingTrace(t=t, rho=rho, J=J, adiabaticity=adiab, info=dict(info))


def sample_times(T: float, sample_dt: float) -> np.ndarray:
    if not sample_dt > 0:
        raise ValueError("sample_dt must be positive")
    n = int(math.floor(T / sample_dt + 1e-9))
    t = np.arange(n + 1) * sample_dt
    if T - t[-1] > 1e-12 * max(T, 1.0):
        t = np.append(t, T)
    return t


def run_analytic(bath: BathSpec, s: CouplingSchedule, rho0: BlochState, sample_dt: float | None = None, times=None) -> DephasingTrace:
    if s.has_steps:
        raise ValueError("schedule contains steps; use run_sudden_decouple or run_ode_oracle")
    t = sample_times(s.T, sample_dt) if times is None else np.asarray(times, float)
    eps, _ = s.values(t)
    J = np.exp(decoherence_exponent(bath, eps))
    return _assemble(
        t, rho0, J, local_adiabaticity(bath, s, t),
        method="analytic", adiabaticity_metric=adiabaticity_metric(bath, s),
    )


def _mode_arrays(bath: BathSpec):
    k, w = bath.half_grid()
    omega = bath.omega(k)
    # d alpha/dt = -i omega alpha - eps h(k) sqrt(omega/2) for sigma_3 = +1
    drive = -bath.profile_ft(k) * np.sqrt(omega / 2.0)
    return k, w, omega, drive


def evolve_branch(bath: BathSpec, s: CouplingSchedule, dt: float, sample_dt: float | None = None,
                  method: str = "rk4", alpha0=None, backend=None):
    """Integrate the sigma_3=+1 branch amplitudes over the whole schedule.

    Returns (times, amplitudes[n_samples, n_half_modes], half-grid weights).
    Steps are exact: amplitudes are continuous, only the drive changes.
    """
    k, w, omega, drive = _mode_arrays(bath)
    if method == "rk4" and dt > 0.1 / omega.max() * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds 0.1/omega_max={0.1 / omega.max():.3e} for rk4")
    sample_dt = sample_dt or dt
    a = np.zeros(omega.size, complex) if alpha0 is None else np.asarray(alpha0, complex)
    times, snaps = [0.0], [a.copy()]
    for seg in s.segments:
        if seg.shape == "step":
            continue
        stride = max(1, int(round(sample_dt / dt)))
        n = stride * max(1, math.ceil(seg.duration / (dt * stride) - 1e-9))
        h = seg.duration / n
        th = seg.t_start + 0.5 * h * np.arange(2 * n + 1)
        eps_half, _ = seg.value(np.minimum(th, seg.t_end))
        out = kernels.integrate_forced_modes(omega, drive, eps_half, h, stride, a, method=method, backend=backend)
        times.extend(seg.t_start + h * stride * np.arange(1, out.shape[0]))
        snaps.extend(out[1:])
        a = out[-1].copy()
    return np.asarray(times), np.asarray(snaps), w


def run_ode_oracle(bath: BathSpec, s: CouplingSchedule, rho0: BlochState, dt: float,
                   sample_dt: float | None = None, method: str = "rk4", backend=None) -> DephasingTrace:
    if s.segments[0].eps_start > 0:
        raise ValueError("the ODE oracle starts from the bare vacuum; the schedule must start at eps = 0")
    t, amps, w = evolve_branch(bath, s, dt, sample_dt, method, backend=backend)
    # <+|-> with alpha_- = -alpha_+: log overlap = -2 sum w |alpha|^2
    n2 = np.sum(w * np.abs(amps) ** 2, axis=1)
    eps, _ = s.values(np.minimum(t, s.T))
    adiabatic_n2 = eps**2 * np.sum(w * dressing_profile(bath, np.abs(bath.half_grid()[0])) ** 2)
    scale = max(float(np.max(adiabatic_n2)), 1e-300)
    if not np.all(np.isfinite(n2)) or np.max(n2) > 100.0 * scale + 1e-12:
        bad = int(np.argmax(~np.isfinite(n2) | (n2 > 100.0 * scale)))
        raise IntegrationError(f"amplitude blow-up at t={t[bad]:.6g} (|alpha|^2 {n2[bad]:.3e} vs adiabatic {scale:.3e})")
    J = np.exp(-2.0 * n2)
    adiab = np.full(t.shape, math.inf) if s.has_steps else local_adiabaticity(bath, s, t)
    return _assemble(t, rho0, J, adiab, method=f"ode-{method}", dt=dt, amplitudes_final=amps[-1])


def run_sudden_decouple(bath: BathSpec, eps_max: float, t_hold: float, t_after: float, rho0: BlochState,
                        n_samples: int = 201) -> DephasingTrace:
    """Dressed hold at eps_max, instantaneous eps -> 0 at t_hold, then free radiation.

    After the step each branch amplitude rotates as exp(-i omega_k tau), so the
    overlap keeps its step-time magnitude: the coherence is gone for good.
    """
    if not t_after > 0:
        raise ValueError("t_after must be positive")
    k, w = bath.half_grid()
    omega = bath.omega(k)
    alpha = 1j * eps_max * dressing_profile(bath, k)
    t_pre = np.linspace(0.0, t_hold, max(2, n_samples // 4))
    tau = np.linspace(0.0, t_after, n_samples)
    logJ_pre = np.full(t_pre.shape, -2.0 * np.sum(w * np.abs(alpha) ** 2))
    # alpha_+(tau) = alpha e^{-i w tau}, alpha_- = -alpha_+
    rot = alpha[None, :] * np.exp(-1j * np.outer(tau, omega))
    logJ_post = -2.0 * np.sum(w * np.abs(rot) ** 2, axis=1)
    t = np.concatenate([t_pre, t_hold + tau])
    J = np.exp(np.concatenate([logJ_pre, logJ_post]))
    post = np.abs(J[t_pre.size:])
    return _assemble(
        t, rho0, J, np.concatenate([np.zeros(t_pre.size), np.full(tau.size, math.inf)]),
        method="sudden-decouple", t_step=t_hold, J_step=float(np.abs(J[t_pre.size])),
        post_min=float(post.min()), post_max=float(post.max()),
    )


def recoupling_schedule(eps_max: float, t_ramp: float, t_hold: float, t_gap: float) -> CouplingSchedule:
    """Smooth ramp up, hold, sudden drop to 0, wait, then the slow up/down cycle
    that would undo purely adiabatic dephasing."""
    t1 = t_ramp
    t2 = t1 + t_hold
    t3 = t2 + t_gap
    t4 = t3 + t_ramp
    t5 = t4 + t_hold
    t6 = t5 + t_ramp
    return CouplingSchedule.from_points(
        [(0, 0), (t1, eps_max), (t2, eps_max), (t2, 0), (t3, 0), (t4, eps_max), (t5, eps_max), (t6, 0)]
    )
