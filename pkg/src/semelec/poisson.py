"""Piecewise-coefficient Poisson problem on the two-region mesh.

The operator is the conservative three-point discretization of
``-d/dx (lambda^2 dPhi/dx)`` on dual control volumes. Every face lies
inside one region, so each face carries its region's ``lambda^2``; the
interface node's control volume is the union of its two half cells, which
makes the flux ``lambda^2 dPhi/dx`` continuous across ``x' = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels_py
from .mesh import Mesh1D, face_average


@dataclass(frozen=True, eq=False)
class PoissonProblem:
    """Assembled linear system ``A Phi = load``.

    ``charge_S`` / ``charge_E`` are the nodal net charge densities of the
    two regions (both defined at the interface node); ``load`` is their
    control-volume integral with the Dirichlet values in the end rows.
    """

    mesh: Mesh1D
    face_coeff: np.ndarray
    charge_S: np.ndarray
    charge_E: np.ndarray
    bc_left: float
    bc_right: float

    @property
    def coeff(self):
        """Nodal lambda^2 (semiconductor value at the interface node)."""
        s = self.mesh.interface_index
        c = np.empty(self.mesh.n_nodes)
        c[: s + 1] = self.face_coeff[0]
        c[s + 1 :] = self.face_coeff[-1]
        return c

    @property
    def load(self):
        m = self.mesh
        s = m.interface_index
        q = np.zeros(m.n_nodes)
        q[: s + 1] += self.charge_S * m.volumes_semi()
        q[s:] += self.charge_E * m.volumes_elec()
        q[0] = self.bc_left
        q[-1] = self.bc_right
        return q

    def matrix(self):
        """Tridiagonal bands ``(lower, diag, upper)`` with Dirichlet end rows."""
        return operator_bands(self.mesh, self.face_coeff)


def face_coefficients(mesh: Mesh1D, lambda_S_sq, lambda_E_sq):
    """Per-face ``lambda^2``: every face belongs to exactly one region."""
    s = mesh.interface_index
    c = np.empty(mesh.n_nodes - 1)
    c[:s] = lambda_S_sq
    c[s:] = lambda_E_sq
    return c


def operator_bands(mesh: Mesh1D, face_coeff):
    g = np.asarray(face_coeff, dtype=float) / mesh.spacings
    n = mesh.n_nodes
    lower = np.zeros(n)
    diag = np.zeros(n)
    upper = np.zeros(n)
    lower[1:-1] = -g[:-1]
    upper[1:-1] = -g[1:]
    diag[1:-1] = g[:-1] + g[1:]
    diag[0] = diag[-1] = 1.0
    return lower, diag, upper


def apply_operator(mesh: Mesh1D, face_coeff, phi):
    """Interior rows of ``A phi`` (boundary rows return ``phi`` itself)."""
    lower, diag, upper = operator_bands(mesh, face_coeff)
    out = diag * phi
    out[1:] += lower[1:] * phi[:-1]
    out[:-1] += upper[:-1] * phi[1:]
    return out


def semiconductor_charge(doping, rho_n, rho_p):
    return doping + rho_p - rho_n


def electrolyte_charge(alphas, rho_E):
    """``sum_z alpha_z rho_z`` over electrolyte species (rows of ``rho_E``)."""
    return np.asarray(alphas, dtype=float) @ np.asarray(rho_E, dtype=float)


def assemble(state, device, mesh: Mesh1D, bc_left, bc_right=None) -> PoissonProblem:
    """Build the Poisson problem for ``state`` (a CarrierState).

    ``bc_left`` is the contact potential at the current collector and
    ``bc_right`` defaults to the counter-electrode potential of ``device``.
    """
    s = mesh.interface_index
    doping = device.doping_at(mesh.x_semi)
    q_S = semiconductor_charge(doping, state.rho_n, state.rho_p)
    ele = device.electrolyte_species
    rho_E = np.vstack([state.densities()[sp.name] for sp in ele])
    q_E = electrolyte_charge([sp.alpha for sp in ele], rho_E)
    if bc_right is None:
        bc_right = device.contacts.phi_app_A
    if q_S.size != s + 1 or q_E.size != mesh.n_nodes - s:
        raise ValueError("state fields do not match the mesh regions")
    return PoissonProblem(
        mesh=mesh,
        face_coeff=face_coefficients(mesh, device.lambda_S_sq, device.lambda_E_sq),
        charge_S=q_S,
        charge_E=q_E,
        bc_left=float(bc_left),
        bc_right=float(bc_right),
    )


def solve(problem: PoissonProblem):
    """Direct tridiagonal solve; returns the nodal potential."""
    lower, diag, upper = problem.matrix()
    return _kernels_py.tridiag_solve(lower, diag, upper, problem.load)


def residual(problem: PoissonProblem, phi):
    lower, diag, upper = problem.matrix()
    r = diag * phi - problem.load
    r[1:] += lower[1:] * phi[:-1]
    r[:-1] += upper[:-1] * phi[1:]
    return r


def interface_flux_jump(problem: PoissonProblem, phi):
    """``lambda_S^2 dPhi/dx(0-) - lambda_E^2 dPhi/dx(0+)`` from the two adjacent faces."""
    s = problem.mesh.interface_index
    h = problem.mesh.spacings
    left = problem.face_coeff[s - 1] * (phi[s] - phi[s - 1]) / h[s - 1]
    right = problem.face_coeff[s] * (phi[s + 1] - phi[s]) / h[s]
    return left - right


def electric_field(phi, mesh: Mesh1D):
    """``-dPhi/dx`` by centered differences on the nonuniform grid (one-sided at the ends)."""
    return -np.gradient(np.asarray(phi, dtype=float), mesh.nodes)


__all__ = [
    "PoissonProblem",
    "apply_operator",
    "assemble",
    "electric_field",
    "face_average",
    "face_coefficients",
    "interface_flux_jump",
    "operator_bands",
    "residual",
    "solve",
]
