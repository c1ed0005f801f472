"""The compiled kernels must agree with the numpy fallback."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import preset_system
from semelec import _kernels_py as py
from semelec import kernels

compiled = pytest.importorskip("semelec._kernels")


def test_backend_selection():
    assert kernels.BACKEND in ("compiled", "python")
    assert kernels.fallback is py


def _perturbed(system, rng, illuminated=False):
    st_ = system.initial_state(2.0, 1.0)
    rho_S, rho_E = st_.stacked()
    rho_S *= rng.uniform(0.5, 1.5, rho_S.shape)
    rho_E *= rng.uniform(0.8, 1.2, rho_E.shape)
    system.apply_dirichlet(rho_S, rho_E)
    phi = py.solve_potential(system, rho_S, rho_E)
    return rho_S, rho_E, phi


@pytest.mark.parametrize("preset", ["case_I_a_dark", "case_I_b_illuminated", "case_II_b"])
def test_rates_potential_and_dt_agree(preset, rng):
    _, system = preset_system(preset, n_per_region=30, grading_ratio=5.0)
    rho_S, rho_E, phi = _perturbed(system, rng)
    for a, b in zip(py.rates(system, rho_S, rho_E, phi), compiled.rates(system, rho_S, rho_E, phi)):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-300)
    np.testing.assert_allclose(
        py.solve_potential(system, rho_S, rho_E), compiled.solve_potential(system, rho_S, rho_E), rtol=1e-12, atol=1e-12
    )
    assert py.stable_dt(system, rho_S, rho_E, phi) == pytest.approx(compiled.stable_dt(system, rho_S, rho_E, phi), rel=1e-13)


def test_butler_volmer_rates_agree(rng):
    _, system = preset_system("case_I_a_dark", n_per_region=20, grading_ratio=3.0)
    system.interface_model = 1
    system.bv_k0 = -1e-3
    system.bv_phi_e = 10.0
    rho_S, rho_E, phi = _perturbed(system, rng)
    for a, b in zip(py.rates(system, rho_S, rho_E, phi), compiled.rates(system, rho_S, rho_E, phi)):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-300)


def test_euler_run_agrees(rng):
    _, system = preset_system("case_I_a_illuminated", n_per_region=30, grading_ratio=5.0)
    rho_S, rho_E, phi = _perturbed(system, rng)
    results = []
    for mod in (py, compiled):
        S, E, ph = rho_S.copy(), rho_E.copy(), phi.copy()
        out = mod.euler_run(system, S, E, ph, 0.0, 1e-3, 10_000, 0.0)
        results.append((out, S, E, ph))
    (o1, S1, E1, p1), (o2, S2, E2, p2) = results
    assert o1[1] == o2[1] and o1[4] == o2[4]
    assert o1[0] == pytest.approx(o2[0], rel=1e-14)
    for a, b in ((S1, S2), (E1, E2), (p1, p2)):
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-300)


def test_euler_run_step_cap():
    _, system = preset_system("case_I_a_dark", n_per_region=10, grading_ratio=2.0)
    st_ = system.initial_state(2.0, 1.0)
    for mod in (py, compiled):
        S, E = st_.stacked()
        t, steps, _, _, status = mod.euler_run(system, S, E, st_.phi.copy(), 0.0, 10.0, 3, 0.0)
        assert steps == 3 and status == kernels.STATUS_MAX_STEPS and t < 10.0


coef = st.floats(0.0, 1e3)


@given(
    data=st.data(),
    n=st.integers(2, 40),
    ends=st.sampled_from([(None, None), (1.0, None), (None, 2.0), (0.5, 3.0)]),
)
@settings(max_examples=150, deadline=None)
def test_mmatrix_solve_agrees_and_solves(data, n, ends):
    a = np.array(data.draw(st.lists(coef, min_size=n - 1, max_size=n - 1))) + 1e-3
    b = np.array(data.draw(st.lists(coef, min_size=n - 1, max_size=n - 1))) + 1e-3
    extra = np.array(data.draw(st.lists(st.floats(0.0, 10.0), min_size=n, max_size=n)))
    extra[n // 2] += 1.0  # nonsingular even without Dirichlet ends
    rhs = np.array(data.draw(st.lists(st.floats(0.0, 100.0), min_size=n, max_size=n)))
    left, right = ends
    x_py = py.mmatrix_solve(a, b, extra, rhs, left, right)
    x_c = compiled.mmatrix_solve(a, b, extra, rhs, left, right)
    np.testing.assert_allclose(x_py, x_c, rtol=1e-12, atol=1e-300)
    assert np.all(x_py >= 0)
    # check against a dense solve of the same system
    A = np.diag(extra.astype(float))
    for f in range(n - 1):
        A[f, f] += a[f]
        A[f, f + 1] -= b[f]
        A[f + 1, f] -= a[f]
        A[f + 1, f + 1] += b[f]
    r = rhs.astype(float).copy()
    if left is not None:
        A[0] = 0
        A[0, 0] = 1
        r[0] = left
    if right is not None:
        A[-1] = 0
        A[-1, -1] = 1
        r[-1] = right
    # componentwise backward error
    assert np.all(np.abs(A @ x_py - r) <= 1e-10 * (np.abs(A) @ np.abs(x_py) + np.abs(r)) + 1e-300)


def test_mmatrix_solve_keeps_relative_accuracy_under_cancellation():
    # strongly drift-dominated chain: a/b ratio 1e6 per face gives a solution
    # spanning many decades; each entry must still be accurate
    n = 30
    a = np.full(n - 1, 1e3)
    b = np.full(n - 1, 1e-3)
    extra = np.zeros(n)
    rhs = np.zeros(n)
    x = compiled.mmatrix_solve(a, b, extra, rhs, None, 1.0)
    expected = (b / a)[0] ** np.arange(n - 1, -1, -1)
    np.testing.assert_allclose(x, expected, rtol=1e-12)
    np.testing.assert_allclose(py.mmatrix_solve(a, b, extra, rhs, None, 1.0), expected, rtol=1e-12)


def test_tridiag_solvers_agree(rng):
    n = 50
    lower, upper = rng.uniform(-1, 0, n), rng.uniform(-1, 0, n)
    diag = 2.5 + rng.uniform(0, 1, n)
    rhs = rng.normal(size=n)
    np.testing.assert_allclose(py.tridiag_solve(lower, diag, upper, rhs), compiled.tridiag_solve(lower, diag, upper, rhs), rtol=1e-12)


@given(
    rho=st.lists(st.floats(0, 1e3), min_size=6, max_size=6),
    phi=st.lists(st.floats(-50, 50), min_size=6, max_size=6),
    alpha=st.sampled_from([-1.0, 0.0, 1.0]),
)
@settings(max_examples=100, deadline=None)
def test_upwind_flux_agrees(rho, phi, alpha):
    h = np.linspace(0.1, 0.3, 5)
    a = py.upwind_flux(np.array(rho), np.array(phi), h, 0.7, 0.7, alpha)
    b = compiled.upwind_flux(np.array(rho), np.array(phi), h, 0.7, 0.7, alpha)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-12)
