import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import preset_system
from semelec import poisson
from semelec.mesh import build_mesh
from semelec.transport import CarrierState


def _solve_bands(mesh, lam_S, lam_E, load):
    fc = poisson.face_coefficients(mesh, lam_S, lam_E)
    lower, diag, upper = poisson.operator_bands(mesh, fc)
    from semelec._kernels_py import tridiag_solve

    return tridiag_solve(lower, diag, upper, load)


def _state(mesh, n, p, r, o):
    s = mesh.interface_index
    return CarrierState(
        t=0.0,
        rho_n=np.full(s + 1, n),
        rho_p=np.full(s + 1, p),
        rho_r=np.full(mesh.n_nodes - s, r),
        rho_o=np.full(mesh.n_nodes - s, o),
        phi=np.zeros(mesh.n_nodes),
    )


def mms_error(n, grading, lam2=0.7):
    m = build_mesh(-1.0, 1.0, n, grading)
    load = lam2 * np.pi**2 * np.sin(np.pi * m.nodes) * m.volumes()
    load[0], load[-1] = np.sin(np.pi * m.nodes[[0, -1]])
    phi = _solve_bands(m, lam2, lam2, load)
    return np.abs(phi - np.sin(np.pi * m.nodes)).max()


@pytest.mark.parametrize("grading", [1.0, 1.15, 30.0])
def test_manufactured_solution_second_order(grading):
    ratio = mms_error(100, grading) / mms_error(200, grading)
    assert 3.2 <= ratio <= 4.8


def test_linear_solution_for_zero_charge():
    m = build_mesh(-1.0, 1.0, 20, 3.0)
    load = np.zeros(m.n_nodes)
    load[-1] = 1.0
    phi = _solve_bands(m, 0.5, 0.5, load)
    np.testing.assert_allclose(phi, (m.nodes + 1.0) / 2.0, atol=1e-12)


def test_piecewise_coefficients_give_slope_ratio():
    m = build_mesh(-1.0, 1.0, 20, 3.0)
    lam_S, lam_E = 0.01, 0.4
    load = np.zeros(m.n_nodes)
    load[-1] = 1.0
    phi = _solve_bands(m, lam_S, lam_E, load)
    s = m.interface_index
    slope_S = np.diff(phi[: s + 1]) / m.h_semi
    slope_E = np.diff(phi[s:]) / m.h_elec
    np.testing.assert_allclose(slope_S, slope_S[0], rtol=1e-10)
    np.testing.assert_allclose(slope_E, slope_E[0], rtol=1e-10)
    assert slope_S[0] / slope_E[0] == pytest.approx(lam_E / lam_S, rel=1e-10)


def test_assemble_charges():
    spec, system = preset_system("case_I_a_dark", n_per_region=16, grading_ratio=2.0)
    dev, m = system.device, system.mesh
    n_e, p_e = system.rne_C, system.rpe_C
    prob = poisson.assemble(_state(m, n_e, p_e, 3.0, 3.0), dev, m, bc_left=system.phi_C)
    np.testing.assert_allclose(prob.charge_S, 0.0, atol=1e-15)
    # alpha_r = -1, alpha_o = 0
    np.testing.assert_allclose(prob.charge_E, -3.0)
    flipped = poisson.assemble(_state(m, p_e + 2, n_e, 0.0, 3.0), dev, m, bc_left=0.0)
    assert flipped.charge_S[0] == pytest.approx(dev.doping_at(m.x_semi)[0] + n_e - p_e - 2)
    assert prob.bc_right == dev.contacts.phi_app_A
    lower, diag, upper = prob.matrix()
    assert np.all(prob.coeff > 0)
    with pytest.raises(ValueError):
        poisson.assemble(_state(build_mesh(-1, 1, 8, 1.0), 1, 1, 1, 1), dev, m, 0.0)


def test_solve_residual_and_interface_jump():
    spec, system = preset_system("case_I_a_dark", n_per_region=40, grading_ratio=5.0)
    m = system.mesh
    st_ = system.initial_state(2.0, 1.0)
    prob = poisson.assemble(st_, system.device, m, bc_left=system.phi_C)
    phi = poisson.solve(prob)
    assert np.abs(poisson.residual(prob, phi)).max() <= 1e-12 * (np.abs(prob.load).max() + 1)
    np.testing.assert_allclose(phi, st_.phi, rtol=1e-12, atol=1e-12)
    # the jump equals the charge in the interface control volume
    s = m.interface_index
    expected = prob.charge_S[-1] * m.volumes_semi()[-1] + prob.charge_E[0] * m.volumes_elec()[0]
    assert poisson.interface_flux_jump(prob, phi) == pytest.approx(expected, rel=1e-8, abs=1e-12)


def test_apply_operator_matches_bands():
    m = build_mesh(-1.0, 1.0, 12, 2.0)
    fc = poisson.face_coefficients(m, 0.1, 0.3)
    phi = np.cos(m.nodes)
    out = poisson.apply_operator(m, fc, phi)
    assert out[0] == phi[0] and out[-1] == phi[-1]
    g = fc / m.spacings
    i = 5
    assert out[i] == pytest.approx(g[i - 1] * (phi[i] - phi[i - 1]) + g[i] * (phi[i] - phi[i + 1]))


def test_electric_field_examples():
    m = build_mesh(-1.0, 1.0, 15, 4.0)
    np.testing.assert_allclose(poisson.electric_field(3.0 * m.nodes + 1, m), -3.0, rtol=1e-12)
    np.testing.assert_allclose(poisson.electric_field(np.full(m.n_nodes, 2.0), m), 0.0, atol=1e-12)
    e = poisson.electric_field(m.nodes**2, m)
    np.testing.assert_allclose(e[1:-1], -2 * m.nodes[1:-1], atol=1e-12)


@given(
    bc=st.tuples(st.floats(-50, 50), st.floats(-50, 50)),
    lam=st.tuples(st.floats(1e-4, 10), st.floats(1e-4, 10)),
    grading=st.floats(1.0, 50.0),
)
@settings(max_examples=60, deadline=None)
def test_discrete_maximum_principle(bc, lam, grading):
    m = build_mesh(-1.0, 1.0, 30, grading)
    load = np.zeros(m.n_nodes)
    load[0], load[-1] = bc
    phi = _solve_bands(m, *lam, load)
    tol = 1e-10 * (1 + max(abs(b) for b in bc))
    assert phi.min() >= min(bc) - tol and phi.max() <= max(bc) + tol
