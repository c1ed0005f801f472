import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import preset_system, steady
from semelec import _kernels_py as py
from semelec.errors import StepFailure
from semelec.harness.config import from_preset
from semelec.transport import (
    CarrierState,
    TransportSystem,
    butler_volmer_equilibrium_oxidant,
    butler_volmer_flux,
    equilibrium_state,
    interface_fluxes,
    relative_change,
    run_transient,
    species_flux,
    state_change,
)


def test_flux_zero_field_is_central_diffusion():
    rho = np.array([1.0, 3.0, 2.0, 5.0])
    h = np.array([0.1, 0.2, 0.4])
    np.testing.assert_allclose(species_flux(rho, np.zeros(4), h, 2.0, 2.0, -1), -2.0 * np.diff(rho) / h)


@pytest.mark.parametrize("alpha", [-1, 1])
def test_flux_constant_density_is_drift(alpha):
    x = np.array([0.0, 0.1, 0.3, 0.7])
    phi = 3.0 * x
    w = -alpha * 0.5 * 3.0
    np.testing.assert_allclose(species_flux(np.full(4, 2.0), phi, np.diff(x), 0.5, 0.5, alpha), w * 2.0, rtol=1e-13)


def test_flux_vanishes_on_boltzmann_profile_first_order():
    def max_flux(n):
        x = np.linspace(0.0, 1.0, n + 1)
        phi = np.sin(2 * x)
        rho = np.exp(phi)  # alpha = -1 equilibrium: drho/dx = rho dphi/dx
        return np.abs(species_flux(rho, phi, np.diff(x), 1.0, 1.0, -1)).max()

    ratio = max_flux(100) / max_flux(200)
    assert 1.8 < ratio < 2.2


def test_interface_fluxes_vanish_at_equilibrium(small_system):
    st_ = small_system.initial_state(small_system.rne_I, small_system.rpe_I)
    assert all(v == 0.0 for v in interface_fluxes(small_system, st_).values())


@given(
    n=st.floats(0, 10), p=st.floats(0, 10), r=st.floats(0, 50), o=st.floats(0, 50),
    k_et=st.floats(0, 1e-3), k_ht=st.floats(0, 1e-3),
)
@settings(max_examples=200, deadline=None)
def test_interface_identities(n, p, r, o, k_et, k_ht):
    sys_ = preset_system("case_I_a_dark", n_per_region=8, grading_ratio=1.0)[1]
    sys_.k_et, sys_.k_ht = -k_et, -k_ht
    rho_S = np.array([[1.0, n], [1.0, p]])
    rho_E = np.array([[r, 1.0], [o, 1.0]])
    F_S, F_E = py.interface_fluxes(sys_, rho_S, rho_E, 0.0)
    assert F_E[0] + F_E[1] == 0.0
    # charge conservation across the interface with alpha_o - alpha_r = 1
    assert sys_.alpha_S @ F_S == pytest.approx(sys_.alpha_E @ F_E, rel=1e-12, abs=1e-300)
    # rate laws as stored: the interface-normal sign is folded into k
    assert F_S[0] == pytest.approx(-sys_.k_et * (n - sys_.rne_I) * o, rel=1e-12, abs=1e-300)
    expected_r = sys_.k_ht * (p - sys_.rpe_I) * r - sys_.k_et * (n - sys_.rne_I) * o
    assert F_E[0] == pytest.approx(expected_r, rel=1e-12, abs=1e-300)


def test_single_channel_limit(small_system):
    small_system.k_et = 0.0
    rho_S = np.array([[1.0, 2.0], [1.0, 0.3]])
    rho_E = np.array([[4.0, 1.0], [5.0, 1.0]])
    F_S, F_E = py.interface_fluxes(small_system, rho_S, rho_E, 0.0)
    assert F_S[0] == 0.0
    assert F_E[0] == pytest.approx(small_system.k_ht * (0.3 - small_system.rpe_I) * 4.0)


def test_butler_volmer_examples():
    assert butler_volmer_flux(1.5, 1.5, 2.0, 2.0, 0.3, 0.5) == 0.0
    assert butler_volmer_flux(1.5, 1.5, 2.0, 4.0, 0.3, 0.4) == pytest.approx(0.3 * 2.0, rel=1e-15)
    phi = np.linspace(-5, 5, 101)
    assert np.all(np.diff(butler_volmer_flux(phi, 0.2, 2.0, 3.0, 1.0, 0.3)) < 0)
    with pytest.raises(ValueError):
        butler_volmer_flux(0, 0, 1, 1, 1, 1.0)


@given(phi=st.floats(-10, 10), phi_e=st.floats(-10, 10), r=st.floats(1e-3, 1e3), a=st.floats(0.01, 0.99))
def test_butler_volmer_equilibrium_zeroes_flux(phi, phi_e, r, a):
    o = butler_volmer_equilibrium_oxidant(phi, phi_e, r)
    scale = np.exp(-a * 2 * (phi - phi_e)) * o
    assert abs(butler_volmer_flux(phi, phi_e, r, o, 1.0, a)) <= 1e-13 * scale


@pytest.fixture(scope="module")
def equilibrium():
    spec = from_preset("case_I_a_dark", solver={"n_per_region": 60, "grading_ratio": 10.0})
    dev, state = equilibrium_state(spec.device(), spec.mesh())
    return TransportSystem(dev, spec.mesh()), state


def test_equilibrium_rates_vanish(equilibrium):
    system, state = equilibrium
    phi = system.solve_potential(state)
    np.testing.assert_allclose(phi, state.phi, atol=1e-10)
    for name, r in system.rates(state).items():
        assert np.abs(r).max() <= 1e-10, name


def test_equilibrium_step_unchanged(equilibrium):
    system, state = equilibrium
    dt = system.stable_time_step(state)
    new = system.step(state, dt)
    assert max(state_change(system, new, state).values()) <= 1e-10
    assert new.t == pytest.approx(dt)


def test_zero_step_is_identity(small_system):
    st_ = small_system.initial_state(2.0, 1.0)
    new = small_system.step(st_, 0.0)
    for name, v in st_.fields().items():
        np.testing.assert_array_equal(new.fields()[name], v)
    with pytest.raises(ValueError):
        small_system.step(st_, -1.0)


def test_generation_adds_to_both_carriers():
    dark = preset_system("case_I_a_dark", n_per_region=20, grading_ratio=3.0)[1]
    lit = preset_system("case_I_a_illuminated", n_per_region=20, grading_ratio=3.0)[1]
    st_ = dark.initial_state(2.0, 1.0)
    r_dark, r_lit = dark.rates(st_), lit.rates(st_)
    for k in ("n", "p"):
        np.testing.assert_allclose((r_lit[k] - r_dark[k])[1:], lit.gen[1:], rtol=1e-9, atol=1e-18)
    np.testing.assert_array_equal(r_lit["r"], r_dark["r"])


def test_uniform_state_without_sources_is_stationary(small_system):
    p = small_system
    p.k_et = p.k_ht = 0.0
    p.A_n = p.A_p = 0.0
    rho_S = np.ones((2, p.s + 1))
    rho_E = np.ones((2, p.n_nodes - p.s))
    r_S, r_E, _, _ = py.rates(p, rho_S, rho_E, np.zeros(p.n_nodes))
    assert not r_S.any() and not r_E.any()


def test_pair_sources_cancel_in_difference(small_system, rng):
    p = small_system
    p.k_et = p.k_ht = 0.0
    rho_S = np.vstack([np.full(p.s + 1, 1.3), np.full(p.s + 1, 1.3)])
    rho_E = np.ones((2, p.n_nodes - p.s))
    p.gen = rng.uniform(0, 1e-3, p.s + 1)
    r_S, _, _, _ = py.rates(p, rho_S, rho_E, np.zeros(p.n_nodes))
    np.testing.assert_array_equal(r_S[0], r_S[1])
    assert np.abs(r_S[0][1:]).max() > 0


def test_redox_mass_changes_only_through_electrode(small_system, rng):
    p = small_system
    st_ = p.initial_state(2.0, 1.0)
    rho_S, rho_E = st_.stacked()
    rho_E *= rng.uniform(0.5, 1.5, rho_E.shape)
    rho_S[:, -1] *= 3.0
    phi = py.solve_potential(p, rho_S, rho_E)
    _, r_E, _, _ = py.rates(p, rho_S, rho_E, phi)
    total = (p.vol_E[:-1] * (r_E[0] + r_E[1])[:-1]).sum()
    J = [species_flux(rho_E[k], phi[p.s:], p.h_E, p.D_E[k], p.mu_E[k], p.alpha_E[k]) for k in range(2)]
    electrode_outflow = J[0][-1] + J[1][-1]
    assert total == pytest.approx(-electrode_outflow, rel=1e-8, abs=1e-14)


def test_extra_species_conserved():
    spec = from_preset(
        "case_I_a_dark",
        device={"extra_species": [{"name": "k", "alpha": 1, "mu": 0.1, "bulk": 2.0}]},
        solver={"n_per_region": 20, "grading_ratio": 3.0},
    )
    p = TransportSystem(spec.device(), spec.mesh())
    st_ = p.initial_state(2.0, 1.0)
    rho_S, rho_E = st_.stacked()
    rho_E[2, :-1] = np.linspace(1.0, 3.0, rho_E.shape[1] - 1)
    phi = py.solve_potential(p, rho_S, rho_E)
    _, r_E, _, F_E = py.rates(p, rho_S, rho_E, phi)
    assert F_E[2] == 0.0
    J = species_flux(rho_E[2], phi[p.s:], p.h_E, p.D_E[2], p.mu_E[2], p.alpha_E[2])
    assert (p.vol_E[:-1] * r_E[2][:-1]).sum() == pytest.approx(-J[-1], rel=1e-10)


def test_two_half_steps_match_one_step_to_second_order():
    p = preset_system("case_I_a_dark", n_per_region=20, grading_ratio=3.0)[1]
    st_ = p.advance(p.initial_state(2.0, 1.0), 1e-3)[0]
    dt0 = p.stable_time_step(st_)

    def gap(dt):
        one = p.step(st_, dt)
        two = p.step(p.step(st_, dt / 2), dt / 2)
        return max(state_change(p, two, one).values())

    ratio = gap(dt0) / gap(dt0 / 2)
    assert 3.5 < ratio < 4.5


def test_nonfinite_step_raises(small_system):
    st_ = small_system.initial_state(2.0, 1.0)
    st_.rho_n[3] = np.nan
    with pytest.raises(StepFailure):
        small_system.step(st_, 1e-6)
    with pytest.raises(StepFailure):
        small_system.advance(st_, 1e-3)


def test_run_transient_snapshots_and_positivity():
    p = preset_system("case_I_b_illuminated", n_per_region=40, grading_ratio=5.0)[1]
    final, snaps, stats = run_transient(p, p.initial_state(2.5, 1.0), 0.01, snapshot_times=[0.0, 0.005, 0.02])
    assert sorted(snaps) == [0.0, 0.005]
    assert final.t == 0.01 and stats.reached_end
    assert stats.clamps == 0
    assert all(np.all(v >= 0) for v in final.densities().values())
    assert stats.max_redox_antisymmetry == 0.0


def test_total_flux_parts(small_system):
    st_ = small_system.initial_state(small_system.rne_C, small_system.rpe_C)
    flat = CarrierState.from_stacked(0.0, *st_.stacked(), np.zeros(small_system.n_nodes))
    fx = small_system.fluxes(flat)
    assert not fx.total[: small_system.s].any()
    np.testing.assert_allclose(
        fx.total[small_system.s :], -fx.species["r"], atol=0
    )


@pytest.mark.parametrize("preset, illuminated", [("case_I_a_dark", False), ("case_I_a_illuminated", True), ("case_I_b_dark", False)])
def test_steady_total_flux_is_constant(preset, illuminated):
    system, state, report = steady(preset, illuminated)
    assert report.converged
    fx = system.fluxes(state)
    J = fx.total
    # in the dark the total is a tiny difference of large drift and
    # diffusion terms, so its face-to-face spread is bounded by round-off
    # in those terms rather than by the total itself
    terms = 0.0
    for k in range(2):
        rho = state.stacked()[0][k]
        w = system.mu_S[k] * np.abs(np.diff(state.phi[: system.s + 1])) / system.h_S
        terms = max(terms, np.max(system.D_S[k] * (rho[:-1] + rho[1:]) / system.h_S + w * np.maximum(rho[:-1], rho[1:])))
    scale = max(np.abs(J).max(), 1e-12)
    assert np.ptp(J) <= max(1e-6 * scale, 16 * np.finfo(float).eps * terms)
    assert fx.interface_S == pytest.approx(fx.interface_E, rel=1e-12, abs=1e-300)


def test_state_helpers(small_system):
    st_ = small_system.initial_state(2.0, 1.0)
    cp = st_.copy()
    cp.rho_n[0] = 99.0
    assert st_.rho_n[0] != 99.0
    assert st_.is_finite()
    assert relative_change(np.ones(3), np.ones(3)) == 0.0
    assert relative_change(np.ones(4), np.zeros(4)) == 1.0
    rho_S, rho_E = st_.stacked()
    back = CarrierState.from_stacked(st_.t, rho_S, rho_E, st_.phi)
    np.testing.assert_array_equal(back.rho_o, st_.rho_o)


def test_transport_system_validation():
    spec = from_preset("case_I_a_dark")
    with pytest.raises(ValueError):
        TransportSystem(spec.device(), spec.mesh(), safety=1.5)
    other = from_preset("case_II_a").mesh()
    with pytest.raises(ValueError):
        TransportSystem(spec.device(), other)
