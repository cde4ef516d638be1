"""Spin and oscillator dephasing by a massive scalar bath: adiabatic dressing,
real vs reversible coherence loss, and brute-force oracles."""
from .bath import (
    DECOHERENCE_NORMALIZATION,
    BathSpec,
    CouplingSchedule,
    QuadratureError,
    adiabaticity_metric,
    decoherence_exponent,
    renormalization_integral,
    spectral_integral,
)
from .coherent import BranchAmplitudes, adiabatic_branch_amplitudes, pairwise_log_overlap
from .dephasing import BlochState, DephasingTrace, IntegrationError, run_analytic, run_ode_oracle, run_sudden_decouple
from .fock import OracleConfig, OracleInvalid, calibrate_normalization, evolve as evolve_oracle
from .kernels import BACKEND
from .oscillator import GaussianPacket, GridError, OscillatorSpec, evolve_reduced, fringe_visibility, renormalization
from .spin_boson import SpinBosonSpec, entropy_cycle_stats, run_adiabatic
from .sudden import RotationEvent, apply_sudden_rotation, branch_density_matrix, overlap_table

__version__ = "0.1.0"
