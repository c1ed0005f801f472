"""Semiconductor-only model with the electrolyte replaced by a Schottky contact.

The reduced device keeps the semiconductor half of a full device. At
``x' = 0`` the interface conditions become absorbing Robin conditions
``J . nu = v (rho - rho_e)`` and the potential is pinned to the barrier plus
applied bias, matched to the counter-electrode potential of the full
device. :func:`compare` quantifies how far the two steady states differ.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels_py
from .mesh import Mesh1D
from .scales import ScaledDevice
from .stationary import (
    _TAU_OFF,
    ConvergenceReport,
    IterationControl,
    boltzmann_scale,
    potential_update,
    semiconductor_solve,
)
from .transport import CarrierState, TransportSystem, relative_change, species_flux


@dataclass(frozen=True, eq=False)
class SchottkyReducedDevice:
    """Semiconductor half of ``device`` with a Schottky contact at ``x' = 0``.

    ``barrier + bias`` is the contact potential; :func:`reduce` picks the
    barrier so that it equals the counter-electrode potential of the full
    device.
    """

    device: ScaledDevice
    mesh: Mesh1D
    v_n: float
    v_p: float
    barrier: float
    bias: float

    def __post_init__(self):
        if self.v_n < 0 or self.v_p < 0:
            raise ValueError("contact velocities must be nonnegative")

    @property
    def contact_potential(self):
        return self.barrier + self.bias

    @property
    def nodes(self):
        return self.mesh.x_semi

    def equilibrium_densities(self):
        """Contact densities in equilibrium with the metal: ``rho_isc exp(+-barrier)``.

        Same rule as the Ohmic contact, whose barrier is the built-in potential.
        """
        rho_isc = self.device.recomb.rho_isc
        return rho_isc * np.exp(self.barrier), rho_isc * np.exp(-self.barrier)


def reduce(device: ScaledDevice, mesh: Mesh1D, v_n=None, v_p=None) -> SchottkyReducedDevice:
    """Drop the electrolyte and install the matched Schottky contact.

    The velocities default to the device's contact velocities.
    """
    c = device.contacts
    v_n = c.v_n if v_n is None else float(v_n)
    v_p = c.v_p if v_p is None else float(v_p)
    return SchottkyReducedDevice(
        device=device, mesh=mesh, v_n=v_n, v_p=v_p, barrier=c.phi_app_A - c.phi_app, bias=c.phi_app
    )


class ReducedSystem:
    """Discretization of a :class:`SchottkyReducedDevice`.

    Carries the attributes :func:`semiconductor_solve` and the potential
    update read. The electrolyte is represented by the single contact node
    with zero volume and no charge, so the Poisson machinery of the full
    model applies unchanged with ``phi`` pinned at both ends.
    """

    def __init__(self, reduced: SchottkyReducedDevice, safety=0.9):
        full = TransportSystem(reduced.device, reduced.mesh, safety)
        self.reduced = reduced
        self.full = full
        s = full.s
        self.s = s
        self.n_nodes = s + 1
        for name in (
            "h_S", "vol_S", "D_S", "mu_S", "alpha_S", "doping", "gen", "A_n", "A_p",
            "rho_isc", "rho_isc2", "contact_kind", "rne_C", "rpe_C", "v_n", "v_p", "phi_C",
        ):
            setattr(self, name, getattr(full, name))
        self.phi_A = reduced.contact_potential
        self.eq_n, self.eq_p = reduced.equilibrium_densities()
        self.vol_E = np.zeros(1)
        self.alpha_E = np.zeros(2)
        lower, diag, upper = full.pois_lower[: s + 1].copy(), full.pois_diag[: s + 1].copy(), full.pois_upper[: s + 1].copy()
        lower[s], diag[s], upper[s] = 0.0, 1.0, 0.0
        self.pois_lower, self.pois_diag, self.pois_upper = lower, diag, upper
        self.pois_lu = _kernels_py.tridiag_factor(lower, diag, upper)

    def contact_condition(self):
        r = self.reduced
        return ("robin", self.eq_n, self.eq_p, r.v_n, r.v_p)

    def apply_dirichlet(self, rho_S, rho_E=None):
        if self.contact_kind == 0:
            rho_S[0, 0] = self.rne_C
            rho_S[1, 0] = self.rpe_C

    def solve_potential(self, rho_S):
        return _kernels_py.tridiag_solve_factored(self.pois_lu, _kernels_py.poisson_charge(self, rho_S, self._empty))

    @property
    def _empty(self):
        return np.zeros((2, 1))

    def total_flux(self, rho_S, phi):
        """Signed total flux on every semiconductor face."""
        out = np.zeros(self.s)
        for k in range(2):
            out += self.alpha_S[k] * species_flux(rho_S[k], phi, self.h_S, self.D_S[k], self.mu_S[k], self.alpha_S[k])
        return out

    def contact_flux(self, rho_S):
        """Outward ``(J_n, J_p)`` at ``x' = 0`` from the Robin law."""
        r = self.reduced
        return r.v_n * (rho_S[0, -1] - self.eq_n), r.v_p * (rho_S[1, -1] - self.eq_p)


@dataclass
class SemiconductorProfile:
    """Steady semiconductor fields, ready for :func:`compare`."""

    x: np.ndarray
    vol: np.ndarray
    rho_n: np.ndarray
    rho_p: np.ndarray
    phi: np.ndarray
    collector_flux: float
    tags: dict = field(default_factory=dict)

    def fields(self):
        return {"n": self.rho_n, "p": self.rho_p, "phi": self.phi}


def full_profile(system: TransportSystem, state: CarrierState) -> SemiconductorProfile:
    """Semiconductor part of a full-model state."""
    s = system.s
    total = system.fluxes(state).total
    bulk = dict(zip(("r", "o"), system.bulk_E[:2]))
    return SemiconductorProfile(
        x=system.mesh.x_semi.copy(),
        vol=system.vol_S.copy(),
        rho_n=state.rho_n.copy(),
        rho_p=state.rho_p.copy(),
        phi=state.phi[: s + 1].copy(),
        collector_flux=float(total[0]),
        tags={"model": "full", "rho_r_bulk": float(bulk["r"]), "rho_o_bulk": float(bulk["o"])},
    )


@dataclass
class ReducedResult:
    rho_S: np.ndarray
    phi: np.ndarray
    report: ConvergenceReport
    profile: SemiconductorProfile


def solve_reduced(system: ReducedSystem, rho_n0, rho_p0, control: IterationControl = IterationControl()):
    """Steady state of the reduced model by Gummel iteration from uniform densities."""
    s = system.s
    rho_S = np.vstack([np.full(s + 1, float(rho_n0)), np.full(s + 1, float(rho_p0))])
    system.apply_dirichlet(rho_S)
    empty = system._empty
    phi = system.solve_potential(rho_S)
    report = ConvergenceReport()
    tau = control.pseudo_time
    right = system.contact_condition()
    for k in range(1, control.max_gummel + 1):
        old_S, old_phi = rho_S, phi
        delta = control.damping * potential_update(system, phi, rho_S, empty, control.poisson_step)
        phi = phi + delta
        if control.poisson_step == "nonlinear":
            rho_S, _ = boltzmann_scale(system, rho_S, empty, delta)
        inv_tau = 1.0 / tau if tau < _TAU_OFF else 0.0
        rho_S = semiconductor_solve(system, phi, rho_S, right, recomb_ref=rho_S, anchor=rho_S, inv_tau=inv_tau)
        tau *= control.pseudo_growth
        norm = max(
            relative_change(rho_S[0], old_S[0], system.vol_S),
            relative_change(rho_S[1], old_S[1], system.vol_S),
            relative_change(phi, old_phi, system.vol_S),
        )
        report.update_norms.append(norm)
        report.schwarz_iterations.append(1)
        report.iterations = k
        if not np.isfinite(norm):
            report.message = f"non-finite update at Gummel iteration {k}"
            break
        if norm < control.gummel_tol:
            report.converged = True
            report.message = f"converged in {k} Gummel iterations"
            break
    else:
        report.message = f"no convergence within {control.max_gummel} Gummel iterations (last update {norm:.3e})"
    total = system.total_flux(rho_S, phi)
    r = system.reduced
    profile = SemiconductorProfile(
        x=system.reduced.nodes.copy(),
        vol=system.vol_S.copy(),
        rho_n=rho_S[0].copy(),
        rho_p=rho_S[1].copy(),
        phi=phi.copy(),
        collector_flux=float(total[0]),
        tags={"model": "schottky", "v_n": r.v_n, "v_p": r.v_p, "barrier": r.barrier},
    )
    return ReducedResult(rho_S=rho_S, phi=phi, report=report, profile=profile)


@dataclass
class Discrepancy:
    """Relative differences of the reduced model from the reference."""

    rel_l2: dict
    rel_max: dict
    flux_rel: float
    tags: dict

    def rows(self):
        rows = [(name, self.rel_l2[name], self.rel_max[name]) for name in self.rel_l2]
        rows.append(("collector_flux", self.flux_rel, self.flux_rel))
        return rows


def compare(reference: SemiconductorProfile, other: SemiconductorProfile) -> Discrepancy:
    """Volume-weighted relative L2 and max differences over the semiconductor."""
    if reference.x.shape != other.x.shape or not np.array_equal(reference.x, other.x):
        raise ValueError("profiles live on different meshes")
    rel_l2, rel_max = {}, {}
    for name, a in reference.fields().items():
        b = other.fields()[name]
        rel_l2[name] = relative_change(a, b, reference.vol)
        rel_max[name] = float(np.abs(a - b).max() / max(np.abs(a).max(), 1e-300))
    ja, jb = reference.collector_flux, other.collector_flux
    flux_rel = abs(ja - jb) / max(abs(ja), 1e-12)
    tags = {k: v for k, v in reference.tags.items() if k.startswith("rho_")}
    return Discrepancy(rel_l2=rel_l2, rel_max=rel_max, flux_rel=float(flux_rel), tags=tags)


__all__ = [
    "Discrepancy",
    "ReducedResult",
    "ReducedSystem",
    "SchottkyReducedDevice",
    "SemiconductorProfile",
    "compare",
    "full_profile",
    "reduce",
    "solve_reduced",
]
