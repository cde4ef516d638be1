import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from recoherence import BathSpec, BlochState, CouplingSchedule, run_analytic, run_ode_oracle, run_sudden_decouple
from recoherence.dephasing import IntegrationError, bloch_entropy, recoupling_schedule, sample_times
from recoherence import kernels

bloch = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(
    lambda v: 0 < math.hypot(*v) <= 1
)


def test_analytic_trace_follows_exp_minus_eps2D(bath10):
    s = CouplingSchedule.round_trip(1.0, 5.0, 2.0)
    tr = run_analytic(bath10, s, BlochState([1.0, 0.0, 0.0]), 0.1)
    eps, _ = s.values(tr.t)
    np.testing.assert_allclose(tr.J.real, np.exp(-(eps**2) * bath10.spectral.D), rtol=1e-12)
    np.testing.assert_allclose(tr.rho[:, 0], tr.J.real, rtol=1e-12)


@given(bloch, st.floats(0.0, 2.0))
def test_bloch_vector_stays_physical(v, eps):
    b = BathSpec.from_modes(10.0, 0.01, [-1.0, 1.0], [0.5, 0.5])
    tr = run_analytic(b, CouplingSchedule.constant(eps, 1.0), BlochState(np.array(v)), 0.25)
    L = np.linalg.norm(tr.rho, axis=1)
    assert np.all(L <= 1 + 1e-12)
    assert np.all(tr.rho[:, 2] == v[2])  # populations untouched by pure dephasing
    assert np.all((tr.entropy >= -1e-15) & (tr.entropy <= math.log(2) + 1e-12))


def test_ode_matches_analytic_slow_ramp(bath10):
    s = CouplingSchedule.round_trip(2.0, 15.0, 10.0)
    rho0 = BlochState([1.0, 0.0, 0.0])
    ode = run_ode_oracle(bath10, s, rho0, 0.005, 0.1, method="etd")
    ana = run_analytic(bath10, s, rho0, times=ode.t)
    assert np.max(np.abs(ode.J - ana.J)) < 1e-3
    assert np.linalg.norm(ode.rho[-1] - rho0.rho_vec) < 1e-6


def test_rk4_and_etd_agree():
    b = BathSpec.build(2.0, 0.5)
    s = CouplingSchedule.round_trip(1.0, 4.0, 1.0)
    rho0 = BlochState([0.0, 1.0, 0.0])
    omax = float(b.omega().max())
    rk = run_ode_oracle(b, s, rho0, 0.1 / omax, 0.05, method="rk4")
    et = run_ode_oracle(b, s, rho0, 0.005, 0.05, method="etd")
    assert rk.t[-1] == pytest.approx(et.t[-1])
    assert abs(rk.J[-1] - et.J[-1]) < 1e-6
    assert np.max(np.abs(np.interp(et.t, rk.t, np.abs(rk.J)) - np.abs(et.J))) < 1e-3


def test_rk4_step_limit_enforced(bath10):
    with pytest.raises(ValueError):
        run_ode_oracle(bath10, CouplingSchedule.constant(1.0, 1.0), BlochState([1, 0, 0]), 1.0, method="rk4")


@pytest.mark.skipif(kernels._compiled is None, reason="compiled core not built")
@pytest.mark.parametrize("method", ["rk4", "etd"])
def test_backends_identical(method):
    rng = np.random.default_rng(3)
    omega = np.sqrt(rng.uniform(0, 30, 200) ** 2 + 4.0)
    drive = -rng.uniform(0.1, 1.0, 200)
    eps = np.sin(np.linspace(0, 3, 2 * 400 + 1)) ** 2
    dt = 0.1 / omega.max() if method == "rk4" else 0.01
    a0 = np.zeros(200, complex)
    py = kernels.integrate_forced_modes(omega, drive, eps, dt, 7, a0, method, "python")
    cy = kernels.integrate_forced_modes(omega, drive, eps, dt, 7, a0, method, "cython")
    np.testing.assert_allclose(cy, py, rtol=0, atol=1e-13)


def test_etd_exact_for_constant_drive():
    # alpha' = -i w alpha + f  =>  alpha(t) = f (1 - e^{-i w t}) / (i w)
    omega, f = np.array([0.3, 5.0, 40.0]), np.array([-1.0, 0.5, 2.0])
    n = 50
    out = kernels.integrate_forced_modes(omega, f, np.ones(2 * n + 1), 0.07, n, np.zeros(3, complex), "etd")
    t = 0.07 * n
    np.testing.assert_allclose(out[-1], f * (1 - np.exp(-1j * omega * t)) / (1j * omega), atol=1e-13)


def test_sudden_decoupling_is_permanent(bath10):
    tr = run_sudden_decouple(bath10, 2.0, 10.0, 5.0, BlochState([1, 0, 0]))
    post = np.abs(tr.J[tr.t > 10.0])
    J_step = tr.info["J_step"]
    assert J_step <= 0.05
    assert np.all((post >= 0.5 * J_step) & (post <= 1.5 * J_step))
    assert post.max() <= 0.5


def test_recoupling_does_not_restore(bath10):
    s = recoupling_schedule(2.0, 15.0, 10.0, 5.0)
    tr = run_ode_oracle(bath10, s, BlochState([1, 0, 0]), 0.005, 0.1, method="etd")
    assert np.abs(tr.J[-1]) < 0.5
    assert math.isinf(tr.adiabaticity[-1])


def test_sample_times_include_end():
    t = sample_times(1.0, 0.3)
    assert t[0] == 0.0 and t[-1] == 1.0
    with pytest.raises(ValueError):
        sample_times(1.0, 0.0)


def test_entropy_limits():
    assert bloch_entropy(1.0) == pytest.approx(0.0, abs=1e-15)
    assert bloch_entropy(0.0) == pytest.approx(math.log(2))


def test_blowup_detected(monkeypatch, bath10):
    real = kernels.integrate_forced_modes

    def broken(*a, **k):
        return real(*a, **k) * 1e6

    monkeypatch.setattr(kernels, "integrate_forced_modes", broken)
    with pytest.raises(IntegrationError):
        run_ode_oracle(bath10, CouplingSchedule.round_trip(1.0, 2.0, 1.0), BlochState([1, 0, 0]), 0.005, method="etd")


def test_zero_coupling_is_inert(bath10):
    rho0 = BlochState([0.6, 0.0, 0.8])
    flat = CouplingSchedule.constant(0.0, 5.0)
    for tr in (run_analytic(bath10, flat, rho0, 0.5), run_ode_oracle(bath10, flat, rho0, 0.01, 0.5, method="etd"),
               run_sudden_decouple(bath10, 0.0, 2.0, 3.0, rho0)):
        np.testing.assert_allclose(tr.J, 1.0, atol=1e-15)
        np.testing.assert_allclose(tr.rho, np.tile(rho0.rho_vec, (len(tr), 1)), atol=1e-15)


def test_plateau_value_example(bath10):
    eps = math.sqrt(5.0 / bath10.spectral.D)
    tr = run_analytic(bath10, CouplingSchedule.round_trip(eps, 10.0, 10.0), BlochState([1, 0, 0]), times=[15.0])
    assert abs(tr.J[0]) == pytest.approx(math.exp(-5.0), rel=1e-12)


def test_full_dephasing_reaches_max_entropy(bath10):
    tr = run_analytic(bath10, CouplingSchedule.constant(3.0, 1.0), BlochState([1, 0, 0]), 0.5)
    assert tr.entropy[-1] == pytest.approx(math.log(2), abs=1e-3)


def test_ode_agrees_with_analytic_within_metric():
    b = BathSpec.build(2.0, 0.5)
    rng = np.random.default_rng(11)
    rho0 = BlochState([0.0, 0.6, 0.8])
    for _ in range(10):
        s = CouplingSchedule.round_trip(rng.uniform(0.2, 1.5), rng.uniform(5.0, 20.0), rng.uniform(0.0, 10.0))
        ode = run_ode_oracle(b, s, rho0, 0.01, 0.1, method="etd")
        ana = run_analytic(b, s, rho0, times=ode.t)
        bound = max(ana.info["adiabaticity_metric"], 1e-6)
        assert np.max(np.abs(ode.J - ana.J)) <= bound
        # dephasing never touches populations or grows the Bloch vector
        assert np.max(np.abs(ode.rho[:, 2] - 0.8)) <= 1e-12
        assert np.all(np.linalg.norm(ode.rho, axis=1) <= 1.0 + 1e-12)


def test_ode_requires_uncoupled_start(bath10):
    with pytest.raises(ValueError):
        run_ode_oracle(bath10, CouplingSchedule.constant(0.5, 1.0), BlochState([1, 0, 0]), 0.01, method="etd")
