"""Massive 1-D scalar bath: coupling profile, mode grids, spectral integrals and
coupling schedules.

Conventions (natural units, hbar = c = 1):

* ``profile_ft(k)`` is the unitary Fourier transform of the interaction range
  function, ``exp(-cutoff*|k|/2)`` for the exponential profile.
* ``D = int_{-inf}^{inf} |h(k)|^2 / omega_k dk`` and the decoherence factor of
  the two sigma_3 branches is ``ln J = -c * eps**2 * D`` with
  ``c = DECOHERENCE_NORMALIZATION``.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate

# c in ln J = -c eps^2 D.  Fixed by the single-mode Fock oracle
# (fock.calibrate_normalization); the value is checked in the test suite.
DECOHERENCE_NORMALIZATION = 1.0

PROFILES = ("exponential",)


class QuadratureError(RuntimeError):
    """Adaptive quadrature missed its tolerance; carries the best estimate."""

    def __init__(self, estimate: float, error: float, tol: float):
        super().__init__(
            f"quadrature did not converge: estimate={estimate!r}, "
            f"error={error:.3e} > tol={tol:.3e}"
        )
        self.estimate = estimate
        self.error = error
        self.tol = tol


@dataclass(frozen=True)
class SpectralReport:
    D: float
    phi2: float
    quadrature_error: float


def _gauss_legendre_panels(edges: np.ndarray, nodes_per_panel: int):
    x, w = np.polynomial.legendre.leggauss(nodes_per_panel)
    a, b = edges[:-1, None], edges[1:, None]
    k = 0.5 * (b - a) * x[None, :] + 0.5 * (b + a)
    wk = 0.5 * (b - a) * w[None, :]
    return k.ravel(), wk.ravel()


@dataclass(frozen=True, eq=False)
class BathSpec:
    """Massive scalar bath with a discretized (mirrored) mode grid.

    ``k`` and ``weights`` hold the quadrature grid used by time-domain
    calculations; static integrals go through :func:`spectral_integral`.
    """

    mass: float
    cutoff: float
    k: np.ndarray
    weights: np.ndarray
    profile: str = "exponential"

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"mass must be > 0, got {self.mass}")
        if not self.cutoff > 0:
            raise ValueError(f"cutoff must be > 0, got {self.cutoff}")
        if self.profile not in PROFILES:
            raise ValueError(f"unknown coupling profile {self.profile!r}")
        k = np.ascontiguousarray(self.k, dtype=float)
        w = np.ascontiguousarray(self.weights, dtype=float)
        if k.ndim != 1 or k.shape != w.shape or k.size == 0:
            raise ValueError("mode grid must be two equal-length 1-D arrays")
        if np.any(np.diff(k) <= 0):
            raise ValueError("mode grid must be strictly increasing in k")
        if np.any(w <= 0):
            raise ValueError("quadrature weights must be positive")
        k.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "weights", w)

    @classmethod
    def build(
        cls,
        mass: float,
        cutoff: float,
        nodes_per_panel: int = 12,
        k_max: float | None = None,
        resolve_time: float | None = None,
        profile: str = "exponential",
    ) -> "BathSpec":
        """Composite Gauss-Legendre grid on [0, k_max], mirrored to -k.

        ``k_max`` defaults to the point where ``|h(k)|^2 < 1e-8``.  Panels
        double in width above the knee at ``k = mass``; ``resolve_time`` caps
        the panel width at ``pi / resolve_time`` so that phases
        ``exp(-i omega_k t)`` stay resolved up to that time.
        """
        if not (mass > 0 and cutoff > 0):
            raise ValueError(f"mass and cutoff must be > 0, got {mass}, {cutoff}")
        if k_max is None:
            k_max = math.log(1e8) / cutoff
        knee = min(mass, 0.5 * k_max)
        n_geo = max(1, math.ceil(math.log2(k_max / knee)))
        edges = np.concatenate(
            [[0.0, 0.5 * knee], np.geomspace(knee, k_max, n_geo + 1)]
        )
        if resolve_time is not None:
            max_width = math.pi / resolve_time
            fine = [edges[0]]
            for a, b in zip(edges[:-1], edges[1:]):
                n = max(1, math.ceil((b - a) / max_width))
                fine.extend(np.linspace(a, b, n + 1)[1:])
            edges = np.asarray(fine)
        kp, wp = _gauss_legendre_panels(edges, nodes_per_panel)
        k = np.concatenate([-kp[::-1], kp])
        w = np.concatenate([wp[::-1], wp])
        return cls(mass=float(mass), cutoff=float(cutoff), k=k, weights=w, profile=profile)

    @classmethod
    def from_modes(cls, mass: float, cutoff: float, k: Sequence[float], weights: Sequence[float]) -> "BathSpec":
        """Bath with an explicit (possibly tiny) grid, e.g. to match a Fock oracle."""
        return cls(mass=float(mass), cutoff=float(cutoff), k=np.asarray(k, float), weights=np.asarray(weights, float))

    def omega(self, k=None) -> np.ndarray:
        k = self.k if k is None else np.asarray(k, float)
        return np.sqrt(k * k + self.mass**2)

    def profile_ft(self, k=None) -> np.ndarray:
        k = self.k if k is None else np.asarray(k, float)
        return np.exp(-0.5 * self.cutoff * np.abs(k))

    def half_grid(self):
        """Distinct |k| nodes with summed weights (the profile is even in k)."""
        k = np.abs(self.k)
        uniq, inv = np.unique(k, return_inverse=True)
        w = np.zeros_like(uniq)
        np.add.at(w, inv, self.weights)
        return uniq, w

    @cached_property
    def grid_key(self) -> str:
        h = hashlib.sha1()
        h.update(np.asarray([self.mass, self.cutoff]).tobytes())
        h.update(self.k.tobytes())
        h.update(self.weights.tobytes())
        return h.hexdigest()[:16]

    @cached_property
    def spectral(self) -> SpectralReport:
        return spectral_integral(self, 1e-11)

    def grid_D(self) -> float:
        """Mode-grid estimate of D (should match ``spectral.D``)."""
        return float(np.sum(self.weights * self.profile_ft() ** 2 / self.omega()))

    def describe(self) -> dict:
        return {
            "mass": self.mass,
            "cutoff": self.cutoff,
            "profile": self.profile,
            "n_modes": int(self.k.size),
            "k_max": float(self.k[-1]),
            "grid_key": self.grid_key,
        }


def spectral_integral(bath: BathSpec, tol: float = 1e-10, limit: int = 400) -> SpectralReport:
    """D = 2 int_0^inf e^{-Gamma k} / sqrt(k^2+m^2) dk by adaptive quadrature.

    The range is split at the knee k = m and at the decay scale 1/Gamma.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    m, g = bath.mass, bath.cutoff

    def f(k):
        return math.exp(-g * k) / math.sqrt(k * k + m * m)

    cuts = sorted({0.0, m, 1.0 / g, 40.0 / g})
    total, err = 0.0, 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        val, e = integrate.quad(f, a, b, epsabs=tol / 8, epsrel=0.0, limit=limit)
        total += val
        err += e
    val, e = integrate.quad(f, cuts[-1], np.inf, epsabs=tol / 8, epsrel=0.0, limit=limit)
    total += val
    err += e
    D, err = 2.0 * total, 2.0 * err
    if err > tol:
        raise QuadratureError(D, err, tol)
    return SpectralReport(D=D, phi2=0.5 * D, quadrature_error=err)


def renormalization_integral(bath: BathSpec, tol: float = 1e-10, limit: int = 400):
    """K = int |h(k)|^2 / (k^2 + m^2) dk over the full line; returns (K, error)."""
    m, g = bath.mass, bath.cutoff
    cuts = sorted({0.0, m, 1.0 / g})
    total, err = 0.0, 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        v, e = integrate.quad(lambda k: math.exp(-g * k) / (k * k + m * m), a, b, epsabs=tol / 4, epsrel=0.0, limit=limit)
        total, err = total + v, err + e
    v, e = integrate.quad(lambda k: math.exp(-g * k) / (k * k + m * m), cuts[-1], np.inf, epsabs=tol / 4, epsrel=0.0, limit=limit)
    total, err = 2.0 * (total + v), 2.0 * (err + e)
    if err > tol:
        raise QuadratureError(total, err, tol)
    return total, err


def profile_norm(bath: BathSpec) -> float:
    """int |h(k)|^2 dk over the full line (= 2/Gamma for the exponential profile)."""
    return 2.0 / bath.cutoff


def decoherence_exponent(bath: BathSpec, eps) -> float | np.ndarray:
    """ln J = -c eps^2 D for an adiabatically dressed spin."""
    eps = np.asarray(eps, dtype=float)
    if np.any(eps < 0):
        raise ValueError("coupling must be >= 0")
    out = -DECOHERENCE_NORMALIZATION * eps**2 * bath.spectral.D
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# coupling schedules

SHAPES = ("linear", "smooth", "plateau", "step")


def _smooth(u):
    # quintic smootherstep: C2 at both ends
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


def _smooth_d(u):
    return 30.0 * u * u * (1.0 - u) ** 2


def _smooth_dd(u):
    return 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)


@dataclass(frozen=True)
class Segment:
    t_start: float
    t_end: float
    shape: str
    eps_start: float
    eps_end: float

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    def max_rate(self) -> float:
        if self.shape == "step":
            return math.inf
        if self.shape == "plateau" or self.duration == 0:
            return 0.0
        slope = abs(self.eps_end - self.eps_start) / self.duration
        return slope * (1.875 if self.shape == "smooth" else 1.0)

    def value(self, t):
        if self.shape in ("plateau", "step"):
            return np.full_like(t, self.eps_end), np.zeros_like(t)
        u = (t - self.t_start) / self.duration
        d = self.eps_end - self.eps_start
        if self.shape == "linear":
            return np.maximum(self.eps_start + d * u, 0.0), np.full_like(t, d / self.duration)
        return np.maximum(self.eps_start + d * _smooth(u), 0.0), d * _smooth_d(u) / self.duration

    def curvature(self, t):
        """Second time derivative of eps (zero except on smooth ramps)."""
        if self.shape != "smooth" or self.duration == 0:
            return np.zeros_like(t)
        u = (t - self.t_start) / self.duration
        return (self.eps_end - self.eps_start) * _smooth_dd(u) / self.duration**2


@dataclass(frozen=True)
class CouplingSchedule:
    """Piecewise coupling eps(t) on [0, T].

    A ``step`` segment has zero duration and jumps from ``eps_start`` to
    ``eps_end``; everywhere else eps(t) is continuous.
    """

    segments: tuple

    def __post_init__(self):
        segs = tuple(s if isinstance(s, Segment) else Segment(*s) for s in self.segments)
        if not segs:
            raise ValueError("schedule needs at least one segment")
        if segs[0].t_start != 0.0:
            raise ValueError("schedule must start at t = 0")
        prev = None
        for s in segs:
            if s.shape not in SHAPES:
                raise ValueError(f"unknown segment shape {s.shape!r}")
            if s.eps_start < 0 or s.eps_end < 0:
                raise ValueError("coupling must be >= 0 everywhere")
            if s.shape == "step":
                if s.duration != 0:
                    raise ValueError("step segments have zero duration")
            elif not s.duration > 0:
                raise ValueError("non-step segments need positive duration")
            if s.shape == "plateau" and s.eps_start != s.eps_end:
                raise ValueError("plateau must keep eps constant")
            if prev is not None:
                if s.t_start != prev.t_end:
                    raise ValueError(f"segments not contiguous at t={s.t_start}")
                if s.eps_start != prev.eps_end:
                    raise ValueError(f"eps discontinuous at t={s.t_start} without a step segment")
            prev = s
        object.__setattr__(self, "segments", segs)

    @property
    def T(self) -> float:
        return self.segments[-1].t_end

    @property
    def has_steps(self) -> bool:
        return any(s.shape == "step" for s in self.segments)

    @property
    def eps_max(self) -> float:
        return max(max(s.eps_start, s.eps_end) for s in self.segments)

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_points(cls, points: Iterable, shape: str = "smooth") -> "CouplingSchedule":
        """From (t, eps) knots; equal eps gives a plateau, equal t a step."""
        pts = [(float(t), float(e)) for t, e in points]
        segs = []
        for (t0, e0), (t1, e1) in zip(pts[:-1], pts[1:]):
            if t1 == t0 and e1 == e0:
                continue  # repeated knot
            if t1 == t0:
                kind = "step"
            elif e1 == e0:
                kind = "plateau"
            else:
                kind = shape
            segs.append(Segment(t0, t1, kind, e0, e1))
        return cls(tuple(segs))

    @classmethod
    def constant(cls, eps: float, T: float) -> "CouplingSchedule":
        return cls((Segment(0.0, float(T), "plateau", float(eps), float(eps)),))

    @classmethod
    def round_trip(cls, eps_max: float, t_ramp: float, t_hold: float, shape: str = "smooth") -> "CouplingSchedule":
        return cls.from_points(
            [(0, 0), (t_ramp, eps_max), (t_ramp + t_hold, eps_max), (2 * t_ramp + t_hold, 0)], shape
        )

    # -- evaluation -------------------------------------------------------
    def segment_at(self, t: float) -> Segment:
        if t < 0 or t > self.T:
            raise ValueError(f"t={t} outside schedule domain [0, {self.T}]")
        chosen = None
        for s in self.segments:
            if s.t_start <= t <= s.t_end:
                chosen = s  # last match = right limit at a boundary
        return chosen

    def values(self, t) -> tuple:
        """Vectorized (eps, eps_dot); right limits at boundaries, finite slopes only."""
        t = np.asarray(t, dtype=float)
        if t.size and (t.min() < 0 or t.max() > self.T * (1 + 1e-12)):
            raise ValueError("times outside schedule domain")
        eps = np.empty_like(t)
        rate = np.empty_like(t)
        idx = np.searchsorted([s.t_start for s in self.segments], t, side="right") - 1
        idx = np.clip(idx, 0, len(self.segments) - 1)
        for i, s in enumerate(self.segments):
            sel = idx == i
            if np.any(sel):
                e, r = s.value(np.minimum(t[sel], s.t_end))
                eps[sel], rate[sel] = e, r
        return eps, rate

    def curvature(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        idx = np.searchsorted([s.t_start for s in self.segments], t, side="right") - 1
        idx = np.clip(idx, 0, len(self.segments) - 1)
        for i, s in enumerate(self.segments):
            sel = idx == i
            if np.any(sel):
                out[sel] = s.curvature(np.minimum(t[sel], s.t_end))
        return out


def eval_schedule(s: CouplingSchedule, t: float) -> tuple:
    """(eps, eps_dot) at time t; eps_dot is +inf (flag) on a step."""
    seg = s.segment_at(t)
    for st in s.segments:
        if st.shape == "step" and st.t_start == t:
            return st.eps_end, math.inf
    e, r = seg.value(np.asarray([t], dtype=float))
    return float(e[0]), float(r[0])


def adiabaticity_metric(bath: BathSpec, s: CouplingSchedule) -> float:
    """Neglected-term estimate max_seg eps_dot^2 * T_seg * (1/m) * <Phi^2>.

    Infinite for schedules with steps.
    """
    if s.has_steps:
        return math.inf
    phi2 = bath.spectral.phi2
    return max(seg.max_rate() ** 2 * seg.duration * phi2 / bath.mass for seg in s.segments)


def local_adiabaticity(bath: BathSpec, s: CouplingSchedule, t) -> np.ndarray:
    """Per-sample version of the neglected-term estimate, using the local rate."""
    _, rate = s.values(t)
    durations = np.array([seg.duration for seg in s.segments])
    idx = np.searchsorted([seg.t_start for seg in s.segments], t, side="right") - 1
    idx = np.clip(idx, 0, len(s.segments) - 1)
    return rate**2 * durations[idx] * bath.spectral.phi2 / bath.mass
