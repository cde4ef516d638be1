"""Harmonic oscillator coupled linearly (through q) to the massive bath.

Adiabatically the bath dresses the oscillator in two ways:

* the mass grows to M = 1 + eps^2 K, K = int |h(k)|^2 / (k^2 + m^2) dk, so the
  frequency drops to Omega / sqrt(M);
* the field states attached to positions q and q' differ, which multiplies the
  position density matrix by exp(-kappa (q - q')^2) with kappa = eps^2 D / 4.

The free part is propagated exactly: every Gaussian packet stays Gaussian under
p^2 / 2M(t) + Omega^2 q^2 / 2.  Writing the packet as
exp(i [A (q - qc)^2 + pc (q - qc) + g]) one has A = P / 2Z where (Z, P) obey
the classical equations, and g picks up (i/2) ln Z plus half of
[p q] along the centre trajectory.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.signal import find_peaks

from .bath import BathSpec, CouplingSchedule, profile_norm, renormalization_integral


class GridError(ValueError):
    """Packets have moved (or spread) outside the q-grid."""


@dataclass(frozen=True)
class GaussianPacket:
    center: float
    momentum: float = 0.0
    width: float = 1.0  # standard deviation of |psi|^2
    weight: complex = 1.0

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("packet width must be positive")

    def initial(self) -> "PacketState":
        A = 0.25j / self.width**2
        g = 0.25j * math.log(2 * math.pi * self.width**2)
        return PacketState(self.center, self.momentum, A, g, complex(self.weight))


@dataclass(frozen=True)
class PacketState:
    q: float
    p: float
    A: complex
    g: complex
    weight: complex

    @property
    def width(self) -> float:
        return math.sqrt(1.0 / (4.0 * self.A.imag))

    def values(self, q: np.ndarray) -> np.ndarray:
        x = q - self.q
        return self.weight * np.exp(1j * (self.A * x * x + self.p * x + self.g))


@dataclass(frozen=True)
class QGrid:
    q_min: float
    q_max: float
    n_points: int

    def __post_init__(self):
        if not self.q_max > self.q_min or self.n_points < 16:
            raise ValueError("grid needs q_max > q_min and at least 16 points")

    @property
    def q(self) -> np.ndarray:
        return np.linspace(self.q_min, self.q_max, self.n_points)

    @property
    def dq(self) -> float:
        return (self.q_max - self.q_min) / (self.n_points - 1)

    def covers(self, center: float, width: float, n_sigma: float = 5.0) -> bool:
        return self.q_min <= center - n_sigma * width and center + n_sigma * width <= self.q_max


@dataclass(frozen=True, eq=False)
class OscillatorSpec:
    Omega: float
    packets: tuple
    grid: QGrid

    def __post_init__(self):
        if not self.Omega > 0:
            raise ValueError("Omega must be positive")
        if not self.packets:
            raise ValueError("at least one packet is required")
        object.__setattr__(self, "packets", tuple(self.packets))
        for pk in self.packets:
            if not self.grid.covers(pk.center, pk.width):
                raise GridError(f"grid does not cover packet at {pk.center} +- 5*{pk.width}")
        norm = self.norm()
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"superposition norm on the grid is {norm:.9f}; use OscillatorSpec.normalized")

    def psi0(self) -> np.ndarray:
        q = self.grid.q
        return sum(pk.initial().values(q) for pk in self.packets)

    def norm(self) -> float:
        return float(np.sum(np.abs(self.psi0()) ** 2) * self.grid.dq)

    @classmethod
    def normalized(cls, Omega: float, packets, grid: QGrid) -> "OscillatorSpec":
        packets = tuple(packets)
        q = grid.q
        psi = sum(pk.initial().values(q) for pk in packets)
        scale = 1.0 / math.sqrt(np.sum(np.abs(psi) ** 2) * grid.dq)
        packets = tuple(
            GaussianPacket(pk.center, pk.momentum, pk.width, pk.weight * scale) for pk in packets
        )
        return cls(Omega, packets, grid)

    @classmethod
    def two_packets(cls, Omega: float, separation: float, width: float | None = None,
                    n_points: int = 2048, margin: float = 6.0) -> "OscillatorSpec":
        """Equal-weight cat state at +-separation/2, at rest; width defaults to the ground state."""
        s = width or math.sqrt(0.5 / Omega)
        half = 0.5 * separation
        edge = half + margin * s
        grid = QGrid(-edge, edge, n_points)
        return cls.normalized(Omega, [GaussianPacket(-half, 0.0, s), GaussianPacket(half, 0.0, s)], grid)


@dataclass(frozen=True)
class RenormalizationReport:
    M: float
    Omega_tilde: float
    kernel_coeff: float
    K: float
    kernel_coeff_literal: float  # eps^2/8 int |h|^2 dk, reported for comparison only

    def __post_init__(self):
        if self.M < 1 or self.kernel_coeff < 0:
            raise ValueError("renormalization produced M < 1 or kappa < 0")


@lru_cache(maxsize=64)
def _K(mass: float, cutoff: float) -> float:
    bath = BathSpec.from_modes(mass, cutoff, [0.0], [1.0])
    return renormalization_integral(bath)[0]


def renormalization(bath: BathSpec, eps: float, Omega: float = 1.0) -> RenormalizationReport:
    if eps < 0:
        raise ValueError("eps must be >= 0")
    K = _K(bath.mass, bath.cutoff)
    M = 1.0 + eps**2 * K
    kappa = 0.25 * eps**2 * bath.spectral.D
    return RenormalizationReport(M, Omega / math.sqrt(M), kappa, K, eps**2 * profile_norm(bath) / 8.0)


def _mass_factor(bath: BathSpec, s: CouplingSchedule):
    K = _K(bath.mass, bath.cutoff)

    def M(t):
        eps, _ = s.values(np.atleast_1d(t))
        return 1.0 + K * eps**2

    return M


def _constant_eps(s: CouplingSchedule, t: float):
    eps, _ = s.values(np.linspace(0.0, min(t, s.T), 257))
    return float(eps[0]) if np.ptp(eps) == 0 else None


def _evolve_closed(state: PacketState, Omega: float, M: float, t: float) -> PacketState:
    w = Omega / math.sqrt(M)
    c, sn = math.cos(w * t), math.sin(w * t)
    q = state.q * c + state.p / (M * w) * sn
    p = state.p * c - M * w * state.q * sn
    P0 = 2.0 * state.A
    Z = c + P0 / (M * w) * sn
    P = P0 * c - M * w * sn
    # continuous branch of ln Z: Z never vanishes (Im P0 > 0), follow its phase
    n = max(2, int(8 * abs(w * t) / math.pi) + 2)
    tau = np.linspace(0.0, t, n)
    zs = np.cos(w * tau) + P0 / (M * w) * np.sin(w * tau)
    lnZ = math.log(abs(Z)) + 1j * float(np.unwrap(np.angle(zs))[-1])
    g = state.g + 0.5j * lnZ + 0.5 * (p * q - state.p * state.q)
    return PacketState(q, p, P / (2.0 * Z), g, state.weight)


def _evolve_ode(state: PacketState, Omega: float, M, t: float, shift=None) -> PacketState:
    P0 = 2.0 * state.A

    def rhs(tau, y):
        m = float(M(tau)[0])
        w2 = Omega**2 if shift is None else Omega**2 + float(shift(tau)[0])
        q, p, zr, zi, pr, pi_ = y[:6]
        z = complex(zr, zi)
        dln = complex(pr, pi_) / (m * z)
        return [p / m, -w2 * q, pr / m, pi_ / m, -w2 * zr, -w2 * zi, dln.real, dln.imag]

    y0 = [state.q, state.p, 1.0, 0.0, P0.real, P0.imag, 0.0, 0.0]
    if t == 0:
        return state
    sol = solve_ivp(rhs, (0.0, t), y0, method="DOP853", rtol=1e-12, atol=1e-13)
    if not sol.success:
        raise RuntimeError(f"packet integration failed: {sol.message}")
    q, p, zr, zi, pr, pi_, lr, li = sol.y[:, -1]
    Z, P = complex(zr, zi), complex(pr, pi_)
    g = state.g + 0.5j * complex(lr, li) + 0.5 * (p * q - state.p * state.q)
    return PacketState(q, p, P / (2.0 * Z), g, state.weight)


def evolve_packets(spec: OscillatorSpec, bath: BathSpec, s: CouplingSchedule, t: float,
                   method: str = "auto", ramp_correction: bool = False) -> list:
    """Exact Gaussian propagation under p^2 / 2M(t) + Omega^2 q^2 / 2.

    The dressing cloud carries kinetic energy K (d(eps q)/dt)^2 / 2; beyond the
    mass term this leaves a potential K eps eps'' q^2 / 2 while eps changes.
    ``ramp_correction`` adds it (it vanishes at constant coupling).
    """
    if s.has_steps:
        raise ValueError("oscillator evolution needs a step-free schedule")
    if not 0 <= t <= s.T + 1e-12:
        raise ValueError(f"t={t} outside the schedule [0, {s.T}]")
    eps_c = _constant_eps(s, t)
    if method == "auto":
        method = "closed" if eps_c is not None else "ode"
    if ramp_correction and eps_c is None:
        method = "ode"
    if method == "closed":
        if eps_c is None:
            raise ValueError("closed-form propagation needs a constant coupling")
        M = renormalization(bath, eps_c, spec.Omega).M
        return [_evolve_closed(pk.initial(), spec.Omega, M, t) for pk in spec.packets]
    Mf = _mass_factor(bath, s)
    shift = None
    if ramp_correction:
        K = _K(bath.mass, bath.cutoff)

        def shift(tau):
            eps, _ = s.values(np.atleast_1d(tau))
            return K * eps * s.curvature(np.atleast_1d(tau))

    return [_evolve_ode(pk.initial(), spec.Omega, Mf, t, shift) for pk in spec.packets]


@dataclass(frozen=True, eq=False)
class PositionDensityMatrix:
    rho: np.ndarray
    time: float
    q: np.ndarray

    @property
    def dq(self) -> float:
        return float(self.q[1] - self.q[0])

    @property
    def diagonal(self) -> np.ndarray:
        return self.rho.diagonal().real.copy()

    def trace(self) -> float:
        return float(np.sum(self.diagonal) * self.dq)

    def check(self, tol_trace: float = 1e-6) -> None:
        if not np.allclose(self.rho, self.rho.conj().T, atol=1e-10, rtol=0):
            raise ValueError("density matrix is not Hermitian")
        if abs(self.trace() - 1.0) > tol_trace:
            raise ValueError(f"trace {self.trace()} != 1")
        if self.diagonal.min() < -1e-10:
            raise ValueError("negative diagonal")

    def momentum_distribution(self, pad: int = 16):
        """P(p) = (1/2pi) int dr exp(-i p r) int dq rho(q + r, q), on a padded grid."""
        n = self.q.size
        dq = self.dq
        offsets = np.arange(-(n - 1), n)
        # C(r) = sum_q rho(q + r, q) dq; trace(offset=d) walks rho[i, i + d], i.e. r = -d
        C = np.array([np.trace(self.rho, offset=-d) for d in offsets]) * dq
        m = pad * C.size
        F = np.fft.fft(_centered_pad(C, m))
        p = 2 * np.pi * np.fft.fftfreq(m, d=dq)
        order = np.argsort(p)
        P = (F.real * dq / (2 * np.pi))[order]
        return p[order], P


def _centered_pad(C: np.ndarray, m: int) -> np.ndarray:
    """Place C (odd length, r = 0 in the middle) on an m-point periodic grid with r = 0 at index 0."""
    half = C.size // 2
    out = np.zeros(m, complex)
    out[: half + 1] = C[half:]
    out[m - half:] = C[:half]
    return out


def decoherence_kernel(q: np.ndarray, kappa: float) -> np.ndarray:
    d = q[:, None] - q[None, :]
    return np.exp(-kappa * d * d)


def evolve_reduced(spec: OscillatorSpec, bath: BathSpec, s: CouplingSchedule, t: float,
                   coherent: bool = True, method: str = "auto") -> PositionDensityMatrix:
    """rho(q, q') = rho_free(t, q, q') exp(-kappa(t) (q - q')^2).

    With ``coherent=False`` the packets form a classical mixture (cross terms dropped).
    """
    states = evolve_packets(spec, bath, s, t, method)
    g = spec.grid
    for st in states:
        if not g.covers(st.q, st.width):
            raise GridError(f"packet at q={st.q:.4g} (width {st.width:.3g}) left the grid at t={t}")
    q = g.q
    waves = [st.values(q) for st in states]
    if coherent:
        psi = np.sum(waves, axis=0)
        rho = np.outer(psi, psi.conj())
    else:
        rho = sum(np.outer(w, w.conj()) for w in waves)
    eps, _ = s.values(np.asarray([min(t, s.T)]))
    kappa = renormalization(bath, float(eps[0]), spec.Omega).kernel_coeff
    if kappa > 0:
        rho = rho * decoherence_kernel(q, kappa)
    return PositionDensityMatrix(rho, float(t), q)


def recombination_time(spec: OscillatorSpec, bath: BathSpec, eps: float) -> float:
    """First time the two packet centres meet under constant coupling eps."""
    if len(spec.packets) != 2:
        raise ValueError("recombination is defined for two packets")
    a, b = spec.packets
    M = renormalization(bath, eps, spec.Omega).M
    w = spec.Omega / math.sqrt(M)
    # relative coordinate d(t) = d0 cos wt + (dp / M w) sin wt
    d0, dp = b.center - a.center, (b.momentum - a.momentum) / (M * w)
    phi = math.atan2(dp, d0)
    t = (math.pi / 2 + phi) / w
    while t <= 0:
        t += math.pi / w
    return t


@dataclass(frozen=True)
class FringeVisibility:
    value: float
    detected: bool
    n_fringes: int = 0

    def __float__(self):
        return self.value


def visibility_1d(x: np.ndarray, P: np.ndarray, min_periods: float = 2.0) -> FringeVisibility:
    """(P_max - P_min) / (P_max + P_min) at the fringe nearest the centre of mass.

    Returns 0 with ``detected=False`` when fewer than ``min_periods`` fringes
    fall within two standard deviations of the centre.
    """
    P = np.asarray(P, float)
    top = P.max()
    if not top > 0:
        return FringeVisibility(0.0, False)
    mean = float(np.sum(x * P) / np.sum(P))
    sd = float(np.sqrt(np.sum((x - mean) ** 2 * P) / np.sum(P)))
    region = np.abs(x - mean) <= 2.0 * sd
    prom = 1e-6 * top
    peaks, _ = find_peaks(P, prominence=prom)
    troughs, _ = find_peaks(-P, prominence=prom)
    peaks = peaks[region[peaks]]
    troughs = troughs[region[troughs]]
    if peaks.size < min_periods or troughs.size < 2:
        return FringeVisibility(0.0, False, int(peaks.size))
    centre = peaks[np.argmin(np.abs(x[peaks] - mean))]
    left, right = troughs[troughs < centre], troughs[troughs > centre]
    if not left.size or not right.size:
        return FringeVisibility(0.0, False, int(peaks.size))
    # compare the maximum and the minima relative to a Gaussian envelope of the
    # distribution's own spread, so a sloping envelope does not pose as contrast
    lo, hi = left[-1], right[0]
    env = np.exp(-0.5 * ((x[[lo, hi]] - x[centre]) / sd) ** 2)
    pmax = P[centre]
    pmin = 0.5 * (P[lo] / env[0] + P[hi] / env[1])
    v = (pmax - pmin) / (pmax + pmin)
    return FringeVisibility(float(np.clip(v, 0.0, 1.0)), True, int(peaks.size))


def fringe_visibility(rho: PositionDensityMatrix, domain: str = "position") -> FringeVisibility:
    """Fringe contrast of the position distribution.

    ``domain="momentum"`` uses the far-field (momentum) distribution instead,
    which shows the coherence of packets that are still separated in q.
    """
    if domain == "position":
        return visibility_1d(rho.q, rho.diagonal)
    if domain == "momentum":
        p, P = rho.momentum_distribution()
        return visibility_1d(p, P)
    raise ValueError(f"unknown domain {domain!r}")


def write_diagonals(path, mats) -> None:
    """Long-format CSV: t, q, P."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "q", "P"])
        for m in mats:
            for qi, pi_ in zip(m.q, m.diagonal):
                w.writerow([repr(float(m.time)), repr(float(qi)), repr(float(pi_))])


def write_matrix(path, mat: PositionDensityMatrix) -> None:
    """Row-major dump, each CSV row holding re/im pairs of one matrix row."""
    n = mat.q.size
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"{part}{j}" for j in range(n) for part in ("re", "im")])
        for row in mat.rho:
            w.writerow([repr(float(v)) for z in row for v in (z.real, z.imag)])


# ---------------------------------------------------------------------------
# exact linear model, for the size of the neglected bath back-reaction

def _mode_couplings(bath: BathSpec, n_modes: int):
    """Equal-D bins of the half line: (omega_j, c_j) with sum c_j^2 / omega_j = D."""
    k, w = bath.half_grid()
    om = bath.omega(k)
    dens = w * bath.profile_ft(k) ** 2
    cum = np.cumsum(dens / om)
    edges = np.searchsorted(cum, np.linspace(0, cum[-1], n_modes + 1)[1:-1])
    omegas, cs = [], []
    for idx in np.split(np.arange(k.size), edges):
        if not idx.size:
            continue
        c2 = dens[idx].sum()
        omegas.append(c2 / np.sum(dens[idx] / om[idx]))
        cs.append(math.sqrt(c2))
    return np.asarray(omegas), np.asarray(cs)


def _linear_generator(Omega: float, om: np.ndarray, c: np.ndarray, eps: float):
    """J H for z = (q, p, phi_1..n, pi_1..n) with H = z^T H z / 2, dz/dt = J H z."""
    n = om.size
    dim = 2 + 2 * n
    H = np.zeros((dim, dim))
    H[0, 0] = Omega**2 + eps**2 * np.sum(c * c)
    H[1, 1] = 1.0
    H[2:2 + n, 2:2 + n] = np.diag(om**2)
    H[2 + n:, 2 + n:] = np.eye(n)
    H[0, 2 + n:] = H[2 + n:, 0] = -eps * c
    Jm = np.zeros((dim, dim))
    Jm[0, 1], Jm[1, 0] = 1.0, -1.0
    Jm[2:2 + n, 2 + n:] = np.eye(n)
    Jm[2 + n:, 2:2 + n] = -np.eye(n)
    return Jm @ H, Jm


def linear_bath_moments(center: float, Omega: float, bath: BathSpec, eps: float, times,
                        n_modes: int = 200) -> dict:
    """<q> and <q^2> in the full quadratic model
    H = p^2/2 + Omega^2 q^2/2 + sum_j [(pi_j - eps c_j q)^2 + omega_j^2 phi_j^2] / 2.

    The state is the exact interacting ground state with its mean moved to
    q = center and the field relaxed around it (pi_j = eps c_j center, at
    rest).  Its covariance is stationary; the mean follows the linear flow.
    """
    om, c = _mode_couplings(bath, n_modes)
    n = om.size
    A, Jm = _linear_generator(Omega, om, c, eps)
    lam, V = np.linalg.eig(A)
    Vinv = np.linalg.inv(V)
    # ground-state covariance (i/2) sign(i A) J
    sgn = (V * np.sign((1j * lam).real)) @ Vinv
    cov = (0.5j * sgn @ Jm).real
    z0 = np.zeros(2 + 2 * n)
    z0[0] = center
    z0[2 + n:] = eps * c * center
    times = np.asarray(times, float)
    coeff = Vinv @ z0
    q = np.array([(V[0] * np.exp(lam * t) * coeff).sum().real for t in times])
    return {
        "q": q,
        "q2": q * q + cov[0, 0],
        "var_q": float(cov[0, 0]),
        "K": float(np.sum(c * c / om**2)),
        "D": float(np.sum(c * c / om)),
    }
