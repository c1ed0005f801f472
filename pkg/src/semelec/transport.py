"""Upwind drift-diffusion discretization and forward-Euler time stepping.

A :class:`TransportSystem` freezes everything about a (device, mesh) pair
that the kernels need: spacings, control volumes, species coefficients,
boundary data and the factorized Poisson operator. States are plain
:class:`CarrierState` values.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from . import _kernels_py, poisson
from .errors import StepFailure
from .kernels import STATUS_MAX_STEPS, STATUS_NONFINITE, backend
from .mesh import Mesh1D
from .physics import ContactKind, built_in_potential, generation_profile, ohmic_equilibrium
from .scales import ScaledDevice

log = logging.getLogger(__name__)


@dataclass
class CarrierState:
    """Nodal fields at one instant.

    ``rho_n``/``rho_p`` live on semiconductor nodes (interface last),
    ``rho_r``/``rho_o``/``rho_extra`` on electrolyte nodes (interface first)
    and ``phi`` on the whole mesh.
    """

    t: float
    rho_n: np.ndarray
    rho_p: np.ndarray
    rho_r: np.ndarray
    rho_o: np.ndarray
    phi: np.ndarray
    rho_extra: tuple = ()
    extra_names: tuple = ()

    def densities(self):
        d = {"n": self.rho_n, "p": self.rho_p, "r": self.rho_r, "o": self.rho_o}
        d.update(zip(self.extra_names, self.rho_extra))
        return d

    def fields(self):
        """Every field including the potential, keyed by name."""
        d = self.densities()
        d["phi"] = self.phi
        return d

    def copy(self):
        return replace(
            self,
            rho_n=self.rho_n.copy(),
            rho_p=self.rho_p.copy(),
            rho_r=self.rho_r.copy(),
            rho_o=self.rho_o.copy(),
            phi=self.phi.copy(),
            rho_extra=tuple(a.copy() for a in self.rho_extra),
        )

    def stacked(self):
        """``(rho_S, rho_E)`` arrays in kernel layout (fresh copies)."""
        rho_S = np.ascontiguousarray(np.vstack([self.rho_n, self.rho_p]), dtype=float)
        rho_E = np.ascontiguousarray(np.vstack([self.rho_r, self.rho_o, *self.rho_extra]), dtype=float)
        return rho_S, rho_E

    @classmethod
    def from_stacked(cls, t, rho_S, rho_E, phi, extra_names=()):
        return cls(
            t=float(t),
            rho_n=rho_S[0].copy(),
            rho_p=rho_S[1].copy(),
            rho_r=rho_E[0].copy(),
            rho_o=rho_E[1].copy(),
            phi=np.array(phi, dtype=float),
            rho_extra=tuple(r.copy() for r in rho_E[2:]),
            extra_names=tuple(extra_names),
        )

    def is_finite(self):
        return all(np.all(np.isfinite(v)) for v in self.fields().values())


@dataclass(frozen=True, eq=False)
class FluxField:
    """Face fluxes per species and the signed total flux.

    ``total`` has one entry per mesh face; ``interface_S`` / ``interface_E``
    are the total flux through ``x' = 0`` evaluated from each side's
    interface conditions.
    """

    species: dict
    total: np.ndarray
    interface_species: dict
    interface_S: float
    interface_E: float


class TransportSystem:
    """Discretization data for one device on one mesh.

    Attribute names follow what the kernels read; see ``_kernels_py``.
    """

    def __init__(self, device: ScaledDevice, mesh: Mesh1D, safety: float = 0.9):
        if not (0.0 < safety <= 1.0):
            raise ValueError("safety factor must lie in (0, 1]")
        if not np.isclose(mesh.nodes[0], device.x_left) or not np.isclose(mesh.nodes[-1], device.x_right):
            raise ValueError("mesh does not span the device")
        self.device = device
        self.mesh = mesh
        self.safety = float(safety)
        s = mesh.interface_index
        self.s = s
        self.n_nodes = mesh.n_nodes
        self.h_S = np.ascontiguousarray(mesh.h_semi)
        self.h_E = np.ascontiguousarray(mesh.h_elec)
        self.vol_S = mesh.volumes_semi()
        self.vol_E = mesh.volumes_elec()

        semi = {sp.name: sp for sp in device.semiconductor_species}
        self.semi_species = (semi["n"], semi["p"])
        ele = device.electrolyte_species
        by = {sp.name: sp for sp in ele}
        self.elec_species = (by["r"], by["o"]) + tuple(sp for sp in ele if sp.name not in ("r", "o"))
        self.extra_names = tuple(sp.name for sp in self.elec_species[2:])
        self.D_S = np.array([sp.D for sp in self.semi_species])
        self.mu_S = np.array([sp.mu for sp in self.semi_species])
        self.alpha_S = np.array([float(sp.alpha) for sp in self.semi_species])
        self.D_E = np.array([sp.D for sp in self.elec_species])
        self.mu_E = np.array([sp.mu for sp in self.elec_species])
        self.alpha_E = np.array([float(sp.alpha) for sp in self.elec_species])
        self.bulk_E = np.array([sp.bulk_density for sp in self.elec_species])

        x_S = mesh.x_semi
        self.doping = device.doping_at(x_S)
        self.gen = generation_profile(x_S, device.illumination, device.x_left, 0.0)
        self.A_n = device.recomb.A_n
        self.A_p = device.recomb.A_p
        self.rho_isc = device.recomb.rho_isc
        self.rho_isc2 = self.rho_isc**2

        c = device.contacts
        self.contact_kind = 1 if c.kind is ContactKind.SCHOTTKY else 0
        self.rne_C, self.rpe_C = ohmic_equilibrium(self.doping[0], self.rho_isc)
        self.rne_I, self.rpe_I = ohmic_equilibrium(self.doping[-1], self.rho_isc)
        self.v_n = c.v_n
        self.v_p = c.v_p
        if self.contact_kind == 0:
            self.phi_bi = built_in_potential(self.rne_C, self.rho_isc)
            self.phi_C = self.phi_bi + c.phi_app
        else:
            self.phi_bi = 0.0
            self.phi_C = device.phi_stky + c.phi_app
        self.phi_A = c.phi_app_A
        itf = device.interface
        # rate constants carry the orientation, so the kernels always see
        # fluxes towards the electrolyte
        self.interface_sign = itf.sign
        self.k_et = itf.sign * itf.k_et
        self.k_ht = itf.sign * itf.k_ht
        self.interface_model = 1 if itf.model == "butler_volmer" else 0
        self.bv_k0 = itf.sign * itf.bv_k0
        self.bv_alpha = itf.bv_alpha
        self.bv_eta = 2.0
        self.bv_phi_e = itf.bv_phi_e
        self.lam2_S = device.lambda_S_sq
        self.lam2_E = device.lambda_E_sq

        self.face_coeff = poisson.face_coefficients(mesh, self.lam2_S, self.lam2_E)
        self.pois_lower, self.pois_diag, self.pois_upper = poisson.operator_bands(mesh, self.face_coeff)
        self.pois_lu = _kernels_py.tridiag_factor(self.pois_lower, self.pois_diag, self.pois_upper)

    # state plumbing

    def initial_state(self, rho_n0, rho_p0, rho_E0=None, t=0.0):
        """Uniform initial densities with boundary values imposed and Phi from Poisson."""
        s, m = self.s + 1, self.n_nodes - self.s
        rho_S = np.vstack([np.full(s, float(rho_n0)), np.full(s, float(rho_p0))])
        bulk = self.bulk_E if rho_E0 is None else np.asarray(rho_E0, dtype=float)
        rho_E = np.repeat(bulk[:, None], m, axis=1).astype(float)
        return self.make_state(rho_S, rho_E, t=t)

    def make_state(self, rho_S, rho_E, t=0.0):
        rho_S = np.array(rho_S, dtype=float)
        rho_E = np.array(rho_E, dtype=float)
        self.apply_dirichlet(rho_S, rho_E)
        phi = backend.solve_potential(self, rho_S, rho_E)
        return CarrierState.from_stacked(t, rho_S, rho_E, phi, self.extra_names)

    def apply_dirichlet(self, rho_S, rho_E):
        if self.contact_kind == 0:
            rho_S[0, 0] = self.rne_C
            rho_S[1, 0] = self.rpe_C
        rho_E[:, -1] = self.bulk_E

    def solve_potential(self, state: CarrierState):
        rho_S, rho_E = state.stacked()
        return backend.solve_potential(self, rho_S, rho_E)

    # fluxes and rates

    def rates(self, state: CarrierState):
        """Time derivatives as a dict keyed by species name."""
        rho_S, rho_E = state.stacked()
        r_S, r_E, _, _ = backend.rates(self, rho_S, rho_E, state.phi)
        names = ("n", "p") + tuple(sp.name for sp in self.elec_species)
        return dict(zip(names, list(r_S) + list(r_E)))

    def fluxes(self, state: CarrierState) -> FluxField:
        rho_S, rho_E = state.stacked()
        s = self.s
        phi_S, phi_E = state.phi[: s + 1], state.phi[s:]
        species = {}
        total = np.zeros(self.n_nodes - 1)
        for k, name in enumerate(("n", "p")):
            J = species_flux(rho_S[k], phi_S, self.h_S, self.D_S[k], self.mu_S[k], self.alpha_S[k])
            species[name] = J
            total[:s] += self.alpha_S[k] * J
        for k, sp in enumerate(self.elec_species):
            J = species_flux(rho_E[k], phi_E, self.h_E, self.D_E[k], self.mu_E[k], self.alpha_E[k])
            species[sp.name] = J
            total[s:] += self.alpha_E[k] * J
        F_S, F_E = _kernels_py.interface_fluxes(self, rho_S, rho_E, state.phi[s])
        iface = {"n": F_S[0], "p": F_S[1]}
        iface.update({sp.name: F_E[k] for k, sp in enumerate(self.elec_species)})
        return FluxField(
            species=species,
            total=total,
            interface_species=iface,
            interface_S=float(self.alpha_S @ F_S),
            interface_E=float(self.alpha_E @ F_E),
        )

    def stable_time_step(self, state: CarrierState):
        rho_S, rho_E = state.stacked()
        return float(backend.stable_dt(self, rho_S, rho_E, state.phi))

    # time stepping

    def step(self, state: CarrierState, dt):
        """One forward-Euler step of size ``dt``; raises StepFailure on NaN/Inf."""
        if dt < 0:
            raise ValueError("dt must be nonnegative")
        if dt == 0:
            return state.copy()
        rho_S, rho_E = state.stacked()
        self.apply_dirichlet(rho_S, rho_E)
        phi = state.phi.copy()
        t, steps, clamps, antisym, status = backend.euler_run(
            self, rho_S, rho_E, phi, state.t, state.t + dt, 1, dt
        )
        if status == STATUS_NONFINITE:
            raise StepFailure(f"non-finite density after a step of dt'={dt:g} at t'={state.t:g}")
        if clamps:
            log.warning("clamped %d negative densities at t'=%g", clamps, t)
        return CarrierState.from_stacked(t, rho_S, rho_E, phi, self.extra_names)

    def advance(self, state: CarrierState, t_end, max_steps=10**9, dt=0.0, chunk=None):
        """Integrate to ``t_end`` with the adaptive stable step (or a fixed ``dt``).

        Returns ``(state, TransientStats)``.
        """
        rho_S, rho_E = state.stacked()
        self.apply_dirichlet(rho_S, rho_E)
        phi = state.phi.copy()
        t = state.t
        stats = TransientStats()
        if t_end < t:
            raise ValueError("t_end lies before the current time")
        t, steps, clamps, antisym, status = backend.euler_run(
            self, rho_S, rho_E, phi, t, float(t_end), int(max_steps), float(dt)
        )
        stats.record(steps, clamps, antisym)
        out = CarrierState.from_stacked(t, rho_S, rho_E, phi, self.extra_names)
        if status == STATUS_NONFINITE:
            raise StepFailure(f"non-finite density at t'={t:g} after {stats.steps} steps")
        stats.reached_end = status != STATUS_MAX_STEPS
        if clamps:
            log.warning("clamped %d negative densities before t'=%g", clamps, t)
        return out, stats


@dataclass
class TransientStats:
    steps: int = 0
    clamps: int = 0
    max_redox_antisymmetry: float = 0.0
    reached_end: bool = True

    def record(self, steps, clamps, antisym):
        self.steps += int(steps)
        self.clamps += int(clamps)
        self.max_redox_antisymmetry = max(self.max_redox_antisymmetry, float(antisym))


# module-level operations on states


def species_flux(rho, phi, h, D, mu, alpha):
    """Upwind face fluxes ``-D drho/dx + w rho_up`` with ``w = -alpha mu dphi/dx``.

    At ``w == 0`` the drift term vanishes, so the tie rule (mean of the two
    nodes) needs no special case.
    """
    return _kernels_py.upwind_flux(
        np.asarray(rho, dtype=float), np.asarray(phi, dtype=float), np.asarray(h, dtype=float), D, mu, alpha
    )


def interface_fluxes(system: TransportSystem, state: CarrierState):
    """Rate-law normal fluxes at ``x' = 0`` as a dict ``{n, p, r, o, extras}``.

    These are the values of the transfer (or Butler-Volmer) laws themselves;
    multiply by ``system.interface_sign`` for fluxes towards the electrolyte.
    """
    sign = system.interface_sign
    return {k: sign * v for k, v in system.fluxes(state).interface_species.items()}


def butler_volmer_flux(phi, phi_e, rho_r, rho_o, k0, alpha_sym, eta=2.0):
    """Oxidant flux towards the electrolyte under the Butler-Volmer law.

    ``k0 [exp(-a eta (phi - phi_e)) rho_o - exp((1 - a) eta (phi - phi_e)) rho_r]``;
    the reductant flux is its negative.
    """
    if not 0.0 < alpha_sym < 1.0:
        raise ValueError("symmetry factor must lie in (0, 1)")
    d = eta * (np.asarray(phi, dtype=float) - phi_e)
    # factored so the flux vanishes exactly at the equilibrium oxidant density
    return k0 * np.exp(-alpha_sym * d) * (rho_o - np.exp(d) * rho_r)


def butler_volmer_equilibrium_oxidant(phi, phi_e, rho_r, eta=2.0):
    """Oxidant density that zeroes the Butler-Volmer flux: ``rho_r exp(eta (phi - phi_e))``."""
    return rho_r * np.exp(eta * (np.asarray(phi, dtype=float) - phi_e))


def assemble_rhs(system: TransportSystem, state: CarrierState):
    return system.rates(state)


def forward_euler_step(system: TransportSystem, state: CarrierState, dt):
    return system.step(state, dt)


def total_flux(system: TransportSystem, state: CarrierState):
    return system.fluxes(state).total


def stable_time_step(system: TransportSystem, state: CarrierState):
    return system.stable_time_step(state)


def run_transient(system: TransportSystem, state: CarrierState, t_end, snapshot_times=(), max_steps=10**9):
    """Integrate to ``t_end`` and return ``(final, {t: snapshot}, stats)``."""
    snaps = {}
    stats = TransientStats()
    cur = state
    for ts in sorted(set(float(t) for t in snapshot_times if t <= t_end)):
        if ts > cur.t:
            cur, st = system.advance(cur, ts, max_steps=max_steps - stats.steps)
            _merge(stats, st)
            if not st.reached_end:
                return cur, snaps, stats
        snaps[ts] = cur.copy()
    if t_end > cur.t:
        cur, st = system.advance(cur, t_end, max_steps=max_steps - stats.steps)
        _merge(stats, st)
    return cur, snaps, stats


def _merge(total: TransientStats, part: TransientStats):
    total.record(part.steps, part.clamps, part.max_redox_antisymmetry)
    total.reached_end = part.reached_end


def relative_change(a, b, weights=None):
    """Weighted relative L2 difference ``|a - b| / max(|a|, tiny)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    w = np.ones_like(a) if weights is None else np.asarray(weights, dtype=float)
    num = np.sqrt(np.sum(w * (a - b) ** 2))
    den = np.sqrt(np.sum(w * a * a))
    return float(num / max(den, 1e-300))


def state_change(system: TransportSystem, new: CarrierState, old: CarrierState):
    """Per-field relative L2 change, volume weighted on each field's region."""
    vol = system.mesh.volumes()
    out = {}
    for name, a in new.fields().items():
        b = old.fields()[name]
        if name in ("n", "p"):
            w = system.vol_S
        elif name == "phi":
            w = vol
        else:
            w = system.vol_E
        out[name] = relative_change(a, b, w)
    return out


def equilibrium_state(device: ScaledDevice, mesh: Mesh1D):
    """Exact discrete thermal equilibrium of the upwind scheme at zero applied bias.

    The semiconductor is flat at its Ohmic equilibrium densities, which
    zeroes every interface rate. The electrolyte profile is then obtained
    by marching the discrete Poisson rows and the zero-flux upwind relation
    away from the interface, shooting on the interface density of the
    charged species so the counter-electrode node carries the bulk values.
    The counter-electrode potential that results is returned in the
    adjusted device. Returns ``(device, state)``.
    """
    dev = device.with_contacts(phi_app=0.0)
    system = TransportSystem(dev, mesh)
    if system.contact_kind != 0:
        raise ValueError("the equilibrium fixture needs an Ohmic contact")
    doping = system.doping
    if not np.allclose(doping, doping[0]):
        raise ValueError("the equilibrium fixture needs uniform doping")
    s = system.s
    m = system.n_nodes - s
    h = system.h_E
    vol = system.vol_E
    lam2 = system.lam2_E
    alpha = system.alpha_E
    bulk = system.bulk_E
    charged = np.flatnonzero(alpha != 0.0)
    if charged.size != 1:
        raise ValueError("shooting supports exactly one charged electrolyte species")
    kc = int(charged[0])
    ac = alpha[kc]
    Dc, muc = system.D_E[kc], system.mu_E[kc]
    phi0 = system.phi_C

    def march(log_r0):
        phi = np.empty(m)
        logr = np.empty(m)
        phi[0] = phi0
        logr[0] = log_r0
        flux_left = 0.0  # lambda^2 dphi/dx on the face left of the current node
        for i in range(m - 1):
            if logr[i] > 700.0:
                # the profile blew up before reaching the electrode: overshoot
                logr[-1] = np.inf
                return phi, logr
            q = ac * np.exp(logr[i]) * vol[i]
            # row i: flux_left - lam2 (phi[i+1]-phi[i])/h[i] = q
            phi[i + 1] = phi[i] + (flux_left - q) * h[i] / lam2
            flux_left = lam2 * (phi[i + 1] - phi[i]) / h[i]
            w = -ac * muc * (phi[i + 1] - phi[i]) / h[i]
            dh = Dc / h[i]
            logr[i + 1] = logr[i] + np.log(dh + max(w, 0.0)) - np.log(dh + max(-w, 0.0))
        return phi, logr

    target = np.log(bulk[kc])
    def f(lr):
        val = march(lr)[1][-1] - target
        return 1e300 if not np.isfinite(val) else val

    lo, hi = target - 1.0, target + 1.0
    while f(lo) > 0:
        lo -= 20.0
    while f(hi) < 0:
        hi += 20.0
    log_r0 = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    phi_E, logr = march(log_r0)

    rho_E = np.repeat(bulk[:, None], m, axis=1).astype(float)
    rho_E[kc] = np.exp(logr)
    rho_E[kc, -1] = bulk[kc]
    n_e, p_e = system.rne_C, system.rpe_C
    rho_S = np.vstack([np.full(s + 1, n_e), np.full(s + 1, p_e)])
    dev_eq = dev.with_contacts(phi_app_A=float(phi_E[-1]))
    sys_eq = TransportSystem(dev_eq, mesh)
    state = sys_eq.make_state(rho_S, rho_E)
    return dev_eq, state


__all__ = [
    "CarrierState",
    "FluxField",
    "TransientStats",
    "TransportSystem",
    "assemble_rhs",
    "butler_volmer_equilibrium_oxidant",
    "butler_volmer_flux",
    "equilibrium_state",
    "forward_euler_step",
    "interface_fluxes",
    "relative_change",
    "run_transient",
    "species_flux",
    "stable_time_step",
    "state_change",
    "total_flux",
]
