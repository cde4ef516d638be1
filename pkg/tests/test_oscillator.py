import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from recoherence import BathSpec, CouplingSchedule, GaussianPacket, GridError, OscillatorSpec
from recoherence.oscillator import (
    QGrid, evolve_packets, evolve_reduced, fringe_visibility, linear_bath_moments, recombination_time,
    renormalization, visibility_1d,
)

OMEGA, SEP = 0.1, 20.0


@pytest.fixture(scope="module")
def spec():
    return OscillatorSpec.two_packets(OMEGA, SEP)


def test_renormalization_limits(bath10):
    r0 = renormalization(bath10, 0.0, OMEGA)
    assert r0.M == 1.0 and r0.kernel_coeff == 0.0 and r0.Omega_tilde == OMEGA
    r = renormalization(bath10, 1.0, OMEGA)
    assert r.M == pytest.approx(1 + r.K)
    assert r.kernel_coeff == pytest.approx(bath10.spectral.D / 4)
    assert r.Omega_tilde == pytest.approx(OMEGA / math.sqrt(r.M))


def test_closed_form_matches_ode(spec, bath10):
    s = CouplingSchedule.constant(1.0, 40.0)
    a = evolve_packets(spec, bath10, s, 33.0, method="closed")
    b = evolve_packets(spec, bath10, s, 33.0, method="ode")
    q = spec.grid.q
    for x, y in zip(a, b):
        np.testing.assert_allclose(x.values(q), y.values(q), atol=1e-9)


def test_reduced_matrix_physical(spec, bath10):
    rho = evolve_reduced(spec, bath10, CouplingSchedule.constant(1.0, 40.0), 12.0)
    rho.check()
    np.testing.assert_allclose(rho.rho, rho.rho.conj().T, atol=1e-14)
    assert rho.trace() == pytest.approx(1.0, abs=1e-6)


def test_kernel_leaves_diagonal_alone(spec, bath10):
    s = CouplingSchedule.constant(1.0, 40.0)
    rho = evolve_reduced(spec, bath10, s, 7.0)
    psi = sum(st.values(spec.grid.q) for st in evolve_packets(spec, bath10, s, 7.0))
    np.testing.assert_allclose(rho.diagonal, np.abs(psi) ** 2, rtol=1e-12, atol=1e-300)


def test_separated_fringes_hidden_then_revived(spec, bath10):
    s = CouplingSchedule.constant(1.0, 60.0)
    zero = CouplingSchedule.constant(0.0, 60.0)
    sep = fringe_visibility(evolve_reduced(spec, bath10, s, 0.0), "momentum")
    assert renormalization(bath10, 1.0, OMEGA).kernel_coeff * SEP**2 >= 5
    assert sep.value <= 0.01
    assert fringe_visibility(evolve_reduced(spec, bath10, zero, 0.0), "momentum").value > 0.99
    v = fringe_visibility(evolve_reduced(spec, bath10, s, recombination_time(spec, bath10, 1.0)))
    v0 = fringe_visibility(evolve_reduced(spec, bath10, zero, recombination_time(spec, bath10, 0.0)))
    assert v.detected and abs(v.value - v0.value) / v0.value < 0.05


def test_partial_kernel_matches_two_packet_formula(spec, bath10):
    # kappa * dq^2 = 1: the far-field contrast drops by
    # (1 + 8 kappa s^2)^(-1/2) exp(-kappa dq^2 / (1 + 8 kappa s^2))
    eps = math.sqrt(4.0 / (bath10.spectral.D * SEP**2))
    kap = renormalization(bath10, eps, OMEGA).kernel_coeff
    s2 = spec.packets[0].width ** 2
    expect = (1 + 8 * kap * s2) ** -0.5 * math.exp(-kap * SEP**2 / (1 + 8 * kap * s2))
    v = fringe_visibility(evolve_reduced(spec, bath10, CouplingSchedule.constant(eps, 1.0), 0.0), "momentum")
    v0 = fringe_visibility(evolve_reduced(spec, bath10, CouplingSchedule.constant(0.0, 1.0), 0.0), "momentum")
    assert v.value / v0.value == pytest.approx(expect, rel=0.05)


def test_mixture_has_no_fringes(spec, bath10):
    s = CouplingSchedule.constant(0.0, 60.0)
    t = recombination_time(spec, bath10, 0.0)
    assert not fringe_visibility(evolve_reduced(spec, bath10, s, t, coherent=False)).detected


@given(st.floats(0.1, 0.95), st.floats(1.5, 4.0))
def test_visibility_estimator_on_synthetic_fringes(V, k):
    x = np.linspace(-30, 30, 6001)
    P = np.exp(-0.5 * (x / 8.0) ** 2) * (1 + V * np.cos(k * x))
    est = visibility_1d(x, P)
    assert est.detected
    assert est.value == pytest.approx(V, abs=0.03)


def test_linear_bath_oracle_bound():
    bath = BathSpec.build(10.0, 0.01)
    eps, center = 1.0, 3.0
    ren = renormalization(bath, eps, OMEGA)
    t = np.linspace(0.0, 2 * math.pi / ren.Omega_tilde, 41)
    mom = linear_bath_moments(center, OMEGA, bath, eps, t, n_modes=200)
    q2_ren = (center * np.cos(ren.Omega_tilde * t)) ** 2 + 1.0 / (2 * ren.M * ren.Omega_tilde)
    dev = np.max(np.abs(mom["q2"] - q2_ren) / q2_ren)
    assert dev <= ren.Omega_tilde / bath.mass


def test_grid_checks(bath10):
    with pytest.raises(ValueError):
        OscillatorSpec(OMEGA, (GaussianPacket(40.0, width=2.0, weight=1.0),), QGrid(-30, 30, 512))
    spec = OscillatorSpec.normalized(OMEGA, (GaussianPacket(0.0, momentum=2.0, width=1.0),), QGrid(-8, 8, 512))
    with pytest.raises(GridError):
        evolve_reduced(spec, bath10, CouplingSchedule.constant(0.0, 10.0), 5.0)


def test_steps_rejected(spec, bath10):
    s = CouplingSchedule.from_points([(0, 0), (1, 1), (1, 0), (2, 0)])
    with pytest.raises(ValueError):
        evolve_packets(spec, bath10, s, 1.5)


def test_ramp_correction_vanishes_at_constant_coupling(spec, bath10):
    s = CouplingSchedule.constant(0.5, 10.0)
    a = evolve_packets(spec, bath10, s, 8.0, method="ode")
    b = evolve_packets(spec, bath10, s, 8.0, ramp_correction=True)
    for x, y in zip(a, b):
        assert x.q == pytest.approx(y.q, abs=1e-10) and x.p == pytest.approx(y.p, abs=1e-10)


def test_renormalization_scales_with_eps_squared(bath10):
    a, b = renormalization(bath10, 0.4, OMEGA), renormalization(bath10, 0.8, OMEGA)
    assert (b.M - 1) == pytest.approx(4 * (a.M - 1), rel=1e-12)
    assert b.kernel_coeff == pytest.approx(4 * a.kernel_coeff, rel=1e-12)


def test_cross_term_suppressed_by_kernel(spec, bath10):
    eps = 0.3
    rho = evolve_reduced(spec, bath10, CouplingSchedule.constant(eps, 1.0), 0.0).rho
    free = evolve_reduced(spec, bath10, CouplingSchedule.constant(0.0, 1.0), 0.0).rho
    q = spec.grid.q
    i, j = np.argmin(np.abs(q + SEP / 2)), np.argmin(np.abs(q - SEP / 2))
    kap = renormalization(bath10, eps, OMEGA).kernel_coeff
    assert abs(rho[i, j] / free[i, j]) == pytest.approx(math.exp(-kap * (q[i] - q[j]) ** 2), rel=1e-12)


def test_weak_coupling_limit_is_free_evolution(spec, bath10):
    t = 9.0
    weak = evolve_reduced(spec, bath10, CouplingSchedule.constant(1e-7, 20.0), t).rho
    free = evolve_reduced(spec, bath10, CouplingSchedule.constant(0.0, 20.0), t).rho
    assert np.max(np.abs(weak - free)) <= 1e-10


@settings(max_examples=8)
@given(st.floats(0.0, 2 * math.pi))
def test_visibility_ignores_global_phase(phase):
    grid = QGrid(-22.0, 22.0, 1024)
    bath = BathSpec.build(10.0, 0.01)
    s = CouplingSchedule.constant(0.0, 1.0)
    w = np.exp(1j * phase)
    base = OscillatorSpec.normalized(OMEGA, [GaussianPacket(-10.0, 0.0, 2.0), GaussianPacket(10.0, 0.0, 2.0)], grid)
    turned = OscillatorSpec.normalized(
        OMEGA, [GaussianPacket(-10.0, 0.0, 2.0, w), GaussianPacket(10.0, 0.0, 2.0, w)], grid
    )
    v = [fringe_visibility(evolve_reduced(x, bath, s, 0.0), "momentum").value for x in (base, turned)]
    assert v[1] == pytest.approx(v[0], abs=1e-12)
