"""Brute-force reference: spin x truncated multi-mode Fock space.

Discretized Hamiltonian (one term per mode j, p_j = i sqrt(w_j/2)(a_j^+ - a_j)):

    H = sum_j w_j n_j - eps(t) sigma_3 sum_j h_j p_j + Omega/2 sigma_1

(the spin-independent eps^2 h^2 / 2 shift is a global phase and is dropped).
Stepping is a symmetric split: half free field + half tunnelling, full
coupling, half tunnelling + half free field.  The coupling factor is applied
exactly in the truncated basis through the eigendecomposition of the
truncated momentum quadrature.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .bath import BathSpec, CouplingSchedule
from .dephasing import BlochState, DephasingTrace


class OracleInvalid(RuntimeError):
    def __init__(self, message: str, time: float):
        super().__init__(f"{message} at t={time:.6g}")
        self.time = time


@dataclass(frozen=True, eq=False)
class OracleConfig:
    mode_freqs: tuple
    mode_couplings: tuple
    schedule: CouplingSchedule
    dt: float
    fock_dim: int = 8
    Omega: float = 0.0
    kicks: tuple = ()  # (t0, theta): instantaneous exp(-i theta sigma_1 / 2)
    max_leakage: float = 1e-4
    max_norm_drift: float = 1e-8

    def __post_init__(self):
        freqs = tuple(float(x) for x in self.mode_freqs)
        coup = tuple(float(x) for x in self.mode_couplings)
        object.__setattr__(self, "mode_freqs", freqs)
        object.__setattr__(self, "mode_couplings", coup)
        n = len(freqs)
        if not 1 <= n <= 4:
            raise ValueError("fock oracle supports 1 to 4 modes")
        if len(coup) != n:
            raise ValueError("need one coupling per mode")
        if not 2 <= self.fock_dim <= 40:
            raise ValueError("fock_dim out of range")
        if 2 * self.fock_dim**n > 2**16:
            raise ValueError(f"total dimension 2*{self.fock_dim}^{n} exceeds 2^16")
        if self.dt * max(freqs) > 0.05 * (1 + 1e-12):
            raise ValueError(f"dt*max(omega) = {self.dt * max(freqs):.3g} > 0.05")
        if self.Omega < 0:
            raise ValueError("Omega must be >= 0")

    @property
    def n_modes(self) -> int:
        return len(self.mode_freqs)

    def digest(self) -> str:
        payload = {
            "freqs": self.mode_freqs, "couplings": self.mode_couplings, "dt": self.dt,
            "d": self.fock_dim, "Omega": self.Omega, "kicks": list(self.kicks),
            "schedule": [list(s.__dict__.values()) for s in self.schedule.segments],
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]

    def recurrence_time(self) -> float:
        """Shortest beat period 2 pi / |w_i - w_j| among the modes (inf for one mode)."""
        f = np.asarray(self.mode_freqs)
        if f.size < 2:
            return math.inf
        gaps = np.abs(f[:, None] - f[None, :])[np.triu_indices(f.size, 1)]
        gaps = gaps[gaps > 0]
        return float(2 * math.pi / gaps.max()) if gaps.size else math.inf

    @classmethod
    def from_bath_grid(cls, bath: BathSpec, schedule, dt, **kw) -> "OracleConfig":
        """Matched discrete modes: w_j = omega(k_j), h_j = h(k_j) sqrt(weight_j)."""
        return cls(tuple(bath.omega()), tuple(bath.profile_ft() * np.sqrt(bath.weights)), schedule, dt, **kw)

    @classmethod
    def surrogate(cls, bath: BathSpec, n_modes: int, schedule, dt=None, k_max=None, **kw) -> "OracleConfig":
        """Few-mode stand-in for the continuum.

        The k >= 0 axis (up to ``k_max``) is cut into bins of equal spectral
        weight |h|^2/omega; each bin becomes one mode at its weighted mean
        frequency with h_j^2 / w_j equal to twice the bin weight, so the
        dressed overlap sum_j h_j^2 / w_j reproduces the truncated D.
        """
        k_max = k_max or 20.0 / bath.cutoff
        x, w = np.polynomial.legendre.leggauss(400)
        k = 0.5 * k_max * (x + 1)
        wk = 0.5 * k_max * w
        dens = wk * bath.profile_ft(k) ** 2 / bath.omega(k)
        cum = np.cumsum(dens)
        edges = np.searchsorted(cum, np.linspace(0, cum[-1], n_modes + 1)[1:-1])
        freqs, coup = [], []
        for sel in np.split(np.arange(k.size), edges):
            weight = dens[sel].sum()
            om = float(np.sum(dens[sel] * bath.omega(k[sel])) / weight)
            freqs.append(om)
            coup.append(math.sqrt(2.0 * weight * om))
        if dt is None:
            dt = 0.05 / max(freqs)
        return cls(tuple(freqs), tuple(coup), schedule, dt, **kw)


@dataclass(eq=False)
class FockState:
    amplitudes: np.ndarray  # shape (2, d, ..., d)
    time: float = 0.0

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def top_level_population(self) -> float:
        a2 = np.abs(self.amplitudes) ** 2
        worst = 0.0
        for ax in range(1, a2.ndim):
            worst = max(worst, float(np.take(a2, -1, axis=ax).sum()))
        return worst


def ladder(d: int):
    a = np.diag(np.sqrt(np.arange(1, d)), 1)
    return a


def coherent_vector(alpha: complex, d: int) -> np.ndarray:
    """Truncated Fock expansion of |alpha>: e^{-|a|^2/2} a^n / sqrt(n!)."""
    n = np.arange(d)
    logfact = np.cumsum(np.log(np.maximum(n, 1)))
    mag = np.exp(-0.5 * abs(alpha) ** 2 - 0.5 * logfact)
    return mag * alpha**n


def spin_vector(rho: BlochState) -> np.ndarray:
    """A pure spinor with the given unit Bloch vector."""
    vals, vecs = np.linalg.eigh(rho.density_matrix())
    return vecs[:, -1]


def partial_trace_spin(state: FockState) -> BlochState:
    psi = state.amplitudes.reshape(2, -1)
    rho = psi @ psi.conj().T
    return BlochState.from_density_matrix(rho / np.trace(rho).real, state.time)


def product_state(spin: np.ndarray, field_vectors) -> FockState:
    psi = np.asarray(spin, complex)
    for v in field_vectors:
        psi = np.multiply.outer(psi, v)
    return FockState(psi)


class _Stepper:
    def __init__(self, cfg: OracleConfig):
        d, n = cfg.fock_dim, cfg.n_modes
        self.cfg = cfg
        a = ladder(d)
        quad = 1j * (a.T - a) / math.sqrt(2.0)  # p for unit frequency
        self.lam, self.V = np.linalg.eigh(quad)
        self.Vh = self.V.conj().T
        levels = np.arange(d)
        energy = np.zeros((d,) * n)
        for j, w in enumerate(cfg.mode_freqs):
            shape = [1] * n
            shape[j] = d
            energy = energy + w * levels.reshape(shape)
        self.half_free = np.exp(-0.5j * cfg.dt * energy)[None, ...]
        th = 0.25 * cfg.Omega * cfg.dt  # half step of Omega/2 sigma_1
        self.half_tunnel = np.array([[math.cos(th), -1j * math.sin(th)], [-1j * math.sin(th), math.cos(th)]])
        self.gains = np.sqrt(np.asarray(cfg.mode_freqs)) * np.asarray(cfg.mode_couplings)

    def _apply_mode(self, psi, j, mats):
        # mats[s] acts on mode j for spin component s
        for s in (0, 1):
            sub = psi[s]
            sub = np.moveaxis(np.tensordot(mats[s], sub, axes=([1], [j])), 0, j)
            psi[s] = sub
        return psi

    def step(self, psi, eps_mid):
        dt = self.cfg.dt
        psi = psi * self.half_free
        if self.cfg.Omega:
            psi = np.tensordot(self.half_tunnel, psi, axes=([1], [0]))
        if eps_mid:
            for j, g in enumerate(self.gains):
                # exp(+i dt eps s h_j p_j), s = +1 / -1
                ph = np.exp(1j * dt * eps_mid * g * self.lam)
                up = (self.V * ph) @ self.Vh
                dn = (self.V * ph.conj()) @ self.Vh
                psi = self._apply_mode(psi, j, (up, dn))
        if self.cfg.Omega:
            psi = np.tensordot(self.half_tunnel, psi, axes=([1], [0]))
        return psi * self.half_free


def kick(psi: np.ndarray, theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    u = np.array([[c, -1j * s], [-1j * s, c]])
    return np.tensordot(u, psi, axes=([1], [0]))


@dataclass(eq=False)
class OracleRun:
    t: np.ndarray
    rho: np.ndarray
    final_state: FockState
    max_leakage: float
    max_norm_drift: float
    config_digest: str
    recurrence_time: float
    field_energy: np.ndarray = None
    info: dict = field(default_factory=dict)

    def trace(self) -> DephasingTrace:
        r0 = self.rho[0]
        t0 = complex(r0[0], r0[1])
        trans = self.rho[:, 0] + 1j * self.rho[:, 1]
        J = trans / t0 if abs(t0) > 1e-12 else np.full(self.t.shape, np.nan + 0j)
        return DephasingTrace(self.t, self.rho, J, np.full(self.t.shape, np.nan),
                              info={"method": "fock", "config": self.config_digest})


def evolve(cfg: OracleConfig, initial_spin: BlochState, sample_every: int = 10) -> OracleRun:
    """Exact (up to truncation and O(dt^2) splitting) evolution from the vacuum."""
    dm = initial_spin.density_matrix()
    vals, vecs = np.linalg.eigh(dm)
    comps = [(float(p), vecs[:, i]) for i, p in enumerate(vals) if p > 1e-14]
    vac = np.zeros(cfg.fock_dim, complex)
    vac[0] = 1.0
    runs = [_evolve_pure(cfg, product_state(v, [vac] * cfg.n_modes), sample_every) for _, v in comps]
    t = runs[0][0]
    rho_dm = sum(p * r[1] for (p, _), r in zip(comps, runs))
    rho = np.array([BlochState.from_density_matrix(m).rho_vec for m in rho_dm])
    leak = max(r[2] for r in runs)
    drift = max(r[3] for r in runs)
    final = runs[int(np.argmax([p for p, _ in comps]))][4]
    return OracleRun(t, rho, final, leak, drift, cfg.digest(), cfg.recurrence_time())


def _evolve_pure(cfg: OracleConfig, state: FockState, sample_every: int):
    s = cfg.schedule
    n_steps = int(math.ceil(s.T / cfg.dt - 1e-9))
    stepper = _Stepper(cfg)
    psi = state.amplitudes.astype(complex)
    kicks = sorted(cfg.kicks)
    ki = 0
    t_mid = (np.arange(n_steps) + 0.5) * cfg.dt
    eps_mid, _ = s.values(np.minimum(t_mid, s.T))
    times, dms = [], []
    leak, drift = 0.0, 0.0

    def record(step_idx):
        nonlocal leak, drift
        st = FockState(psi, step_idx * cfg.dt)
        nrm = st.norm()
        drift = max(drift, abs(nrm - 1.0))
        leak = max(leak, st.top_level_population())
        if drift > cfg.max_norm_drift:
            raise OracleInvalid(f"norm drift {drift:.2e}", st.time)
        if leak > cfg.max_leakage:
            raise OracleInvalid(f"truncation leakage {leak:.2e}", st.time)
        flat = psi.reshape(2, -1)
        times.append(st.time)
        dms.append(flat @ flat.conj().T)

    record(0)
    for n in range(n_steps):
        while ki < len(kicks) and kicks[ki][0] <= n * cfg.dt + 1e-12:
            psi = kick(psi, kicks[ki][1])
            ki += 1
        psi = stepper.step(psi, float(eps_mid[n]))
        if (n + 1) % sample_every == 0 or n + 1 == n_steps:
            record(n + 1)
    return np.asarray(times), np.asarray(dms), leak, drift, FockState(psi, n_steps * cfg.dt)


def calibrate_normalization(omega: float = 5.0, coupling: float = 3.0, eps: float = 1.0,
                            t_ramp: float = 20.0, t_hold: float = 4.0, fock_dim: int = 16):
    """Measure c in ln|J| = -c eps^2 h^2 / omega with a single-mode oracle.

    Returns (c, residual) where the residual is the spread of the estimate
    over the plateau samples.
    """
    sched = CouplingSchedule.from_points([(0, 0), (t_ramp, eps), (t_ramp + t_hold, eps)])
    cfg = OracleConfig((omega,), (coupling,), sched, dt=0.05 / omega, fock_dim=fock_dim)
    run = evolve(cfg, BlochState([1.0, 0.0, 0.0]), sample_every=20)
    plateau = run.t >= t_ramp
    trans = np.hypot(run.rho[plateau, 0], run.rho[plateau, 1])
    c_est = -np.log(trans) * omega / (eps**2 * coupling**2)
    return float(np.mean(c_est)), float(np.max(np.abs(c_est - np.mean(c_est))))


def fock_overlap(a, b, d: int) -> complex:
    """<a|b> for product coherent states, from truncated Fock vectors."""
    out = 1.0 + 0j
    for x, y in zip(np.atleast_1d(a), np.atleast_1d(b)):
        out *= np.vdot(coherent_vector(complex(x), d), coherent_vector(complex(y), d))
    return complex(out)


def random_amplitude_pairs(rng: np.random.Generator, n_pairs: int, max_modes: int = 3, max_abs: float = 1.0):
    """Pairs of amplitude lists, uniform in the disk |alpha| <= max_abs."""
    pairs = []
    for _ in range(n_pairs):
        n = int(rng.integers(1, max_modes + 1))
        r = max_abs * np.sqrt(rng.random((2, n)))
        phi = 2 * np.pi * rng.random((2, n))
        z = r * np.exp(1j * phi)
        pairs.append((z[0], z[1]))
    return pairs


def overlap_oracle_check(seed: int = 0, n_pairs: int = 50, max_modes: int = 3, fock_dim: int = 30,
                         max_abs: float = 1.0) -> dict:
    """Closed-form coherent overlaps against truncated Fock inner products."""
    from .coherent import log_overlap_arrays

    rng = np.random.default_rng(seed)
    errs = []
    for a, b in random_amplitude_pairs(rng, n_pairs, max_modes, max_abs):
        closed = np.exp(log_overlap_arrays(a, b, np.ones(a.size)))
        errs.append(abs(closed - fock_overlap(a, b, fock_dim)))
    errs = np.asarray(errs)
    return {"n_pairs": n_pairs, "fock_dim": fock_dim, "max_error": float(errs.max()), "errors": errs}
