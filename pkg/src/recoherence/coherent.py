"""Multi-mode coherent-state bookkeeping.

Amplitudes are density-normalized: the discrete mode amplitude on grid node
``j`` is ``alpha_j * sqrt(w_j)``, so ``sum_j w_j |alpha_j|^2`` approximates
``int |alpha(k)|^2 dk``.  Overlaps are accumulated in log space.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bath import BathSpec


@dataclass(frozen=True, eq=False)
class BranchAmplitudes:
    amplitudes: np.ndarray
    grid_ref: str
    branch_label: int = +1

    def __post_init__(self):
        a = np.ascontiguousarray(self.amplitudes, dtype=complex)
        if a.ndim != 1:
            raise ValueError("amplitudes must be 1-D")
        if not np.all(np.isfinite(a)):
            raise ValueError("amplitudes must be finite")
        object.__setattr__(self, "amplitudes", a)

    def __len__(self):
        return self.amplitudes.size

    def __neg__(self):
        return BranchAmplitudes(-self.amplitudes, self.grid_ref, -self.branch_label)

    def norm2(self, weights) -> float:
        return float(np.sum(weights * np.abs(self.amplitudes) ** 2))


@dataclass(frozen=True)
class OverlapFactor:
    log_overlap: complex

    @property
    def J(self) -> complex:
        return complex(np.exp(self.log_overlap))

    @property
    def magnitude(self) -> float:
        return float(np.exp(self.log_overlap.real))


def _check_pair(a: BranchAmplitudes, b: BranchAmplitudes, n: int | None = None):
    if a.grid_ref != b.grid_ref or len(a) != len(b):
        raise ValueError(f"grid mismatch: {a.grid_ref}/{len(a)} vs {b.grid_ref}/{len(b)}")
    if n is not None and len(a) != n:
        raise ValueError(f"weights length {n} does not match {len(a)} amplitudes")


def log_overlap_arrays(a: np.ndarray, b: np.ndarray, weights: np.ndarray) -> complex:
    """sum_k w_k (conj(a_k) b_k - (|a_k|^2 + |b_k|^2)/2)."""
    return complex(np.sum(weights * (np.conj(a) * b - 0.5 * (np.abs(a) ** 2 + np.abs(b) ** 2))))


def pairwise_log_overlap(a: BranchAmplitudes, b: BranchAmplitudes, weights) -> OverlapFactor:
    """<a|b> for product coherent states, as a log."""
    weights = np.asarray(weights, dtype=float)
    _check_pair(a, b, weights.size)
    return OverlapFactor(log_overlap_arrays(a.amplitudes, b.amplitudes, weights))


def displace(a: BranchAmplitudes, shift) -> BranchAmplitudes:
    shift = np.asarray(shift, dtype=complex)
    if shift.shape != a.amplitudes.shape:
        raise ValueError(f"shift shape {shift.shape} does not match {a.amplitudes.shape}")
    return BranchAmplitudes(a.amplitudes + shift, a.grid_ref, a.branch_label)


def vacuum(bath: BathSpec) -> BranchAmplitudes:
    return BranchAmplitudes(np.zeros(bath.k.size, complex), bath.grid_key, +1)


def dressing_profile(bath: BathSpec, k=None) -> np.ndarray:
    """Real profile h(k)/sqrt(2 omega_k); the dressed amplitude is i*branch*eps times this."""
    return bath.profile_ft(k) / np.sqrt(2.0 * bath.omega(k))


def adiabatic_branch_amplitudes(bath: BathSpec, eps: float, branch: int) -> BranchAmplitudes:
    """Instantaneous ground state of the field for sigma_3 = branch.

    alpha_k = branch * i * eps * h(k) / sqrt(2 omega_k).  The overlap of the
    two branches is then exp(-eps^2 D) (DECOHERENCE_NORMALIZATION = 1).
    """
    if eps < 0:
        raise ValueError("coupling must be >= 0")
    if branch not in (+1, -1):
        raise ValueError("branch must be +1 or -1")
    amps = branch * 1j * eps * dressing_profile(bath)
    return BranchAmplitudes(amps, bath.grid_key, branch)
