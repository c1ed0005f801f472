"""Steady states by Gummel-Schwarz iteration.

Outer (Gummel) loop: update the potential from the current densities.
Inner (Schwarz) loop: solve the steady semiconductor system with the
electrolyte's interface values frozen, then the electrolyte system with the
fresh semiconductor values, until the two regions agree.

Every region matrix is built from the same upwind face coefficients and
interface rates as the explicit time stepper, so a converged fixed point is
a discrete steady state of the transient scheme.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels_py
from .kernels import backend
from .errors import ConfigError
from .transport import CarrierState, TransportSystem, state_change

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IterationControl:
    """Stopping rules and stabilization for :func:`gummel_schwarz`.

    ``poisson_step`` selects the potential update (see
    :func:`potential_update`). ``pseudo_time`` is the initial pseudo time
    step of the region solves, multiplied by ``pseudo_growth`` every Gummel
    iteration (``inf`` gives plain Gummel-Schwarz from the start).
    """

    gummel_tol: float = 1e-8
    schwarz_tol: float = 1e-8
    max_gummel: int = 500
    max_schwarz: int = 50
    damping: float = 1.0
    warm_start_time: float = 0.05
    poisson_step: str = "nonlinear"
    max_steps: int = 50_000_000
    pseudo_time: float = 1.0
    pseudo_growth: float = 2.0

    def __post_init__(self):
        if not (self.gummel_tol > 0 and self.schwarz_tol > 0):
            raise ConfigError("tolerances must be positive")
        if self.max_gummel < 1 or self.max_schwarz < 1:
            raise ConfigError("iteration caps must be >= 1")
        if not 0.0 < self.damping <= 1.0:
            raise ConfigError("damping must lie in (0, 1]")
        if self.warm_start_time < 0:
            raise ConfigError("warm-start time must be >= 0")
        if self.poisson_step not in ("nonlinear", "newton", "linear"):
            raise ConfigError("poisson_step must be 'nonlinear', 'newton' or 'linear'")
        if not self.pseudo_time > 0:
            raise ConfigError("pseudo_time must be positive (inf disables it)")
        if not self.pseudo_growth >= 1.0:
            raise ConfigError("pseudo_growth must be >= 1")


@dataclass
class ConvergenceReport:
    converged: bool = False
    iterations: int = 0
    update_norms: list = field(default_factory=list)
    schwarz_iterations: list = field(default_factory=list)
    warm_start_time: float = 0.0
    warm_start_steps: int = 0
    rejections: int = 0
    message: str = ""

    def rows(self):
        """``(iteration, update_norm)`` pairs for CSV output."""
        return [(i + 1, v) for i, v in enumerate(self.update_norms)]


# region matrices


def upwind_coefficients(phi, h, D, mu, alpha):
    """Face fluxes read ``J_f = a_f rho_f - b_f rho_{f+1}``; returns ``(a, b)``."""
    w = -alpha * mu * np.diff(phi) / h
    dh = D / h
    return dh + np.maximum(w, 0.0), dh + np.maximum(-w, 0.0)


def divergence_bands(a, b):
    """Bands of the node outflow ``J_i - J_{i-1}`` over interior faces."""
    n = a.size + 1
    lower = np.zeros(n)
    diag = np.zeros(n)
    upper = np.zeros(n)
    diag[:-1] += a
    diag[1:] += b
    upper[:-1] = -b
    lower[1:] = -a
    return lower, diag, upper


def add_source(extra, rhs, idx, self_coef, const, rho_lag, split=True):
    """Add a node inflow ``self_coef * rho + const`` keeping an M-matrix.

    Growth (``self_coef > 0``) always goes to the right-hand side at the
    lagged density. With ``split`` a constant sink becomes a rate
    proportional to the density (Patankar), so the solve cannot go
    negative; without it the sink stays on the right-hand side, which is
    exact for the frozen partners but may undershoot zero. Either way the
    fixed point is unchanged.
    """
    self_coef = np.asarray(self_coef, dtype=float)
    const = np.asarray(const, dtype=float)
    lag = np.maximum(np.asarray(rho_lag, dtype=float), 0.0)
    extra[idx] += np.maximum(-self_coef, 0.0)
    rhs[idx] += np.maximum(self_coef, 0.0) * lag
    if split:
        extra[idx] += np.maximum(-const, 0.0) / np.maximum(lag, _RHO_FLOOR)
        rhs[idx] += np.maximum(const, 0.0)
    else:
        rhs[idx] += const


_RHO_FLOOR = 1e-300
# pseudo time steps beyond this are treated as infinite
_TAU_OFF = 1e30
_TAU_MIN = 1e-8
_TAU_CUT = 8.0


def _positive_solve(a, b, build, left=None, right=None):
    """Solve with ``build(split) -> (extra, rhs)``: unsplit first, split if that goes negative."""
    extra, rhs = build(False)
    x = backend.mmatrix_solve(a, b, extra, rhs, left, right)
    if np.all(x >= 0.0):
        return x
    extra, rhs = build(True)
    return np.maximum(backend.mmatrix_solve(a, b, extra, rhs, left, right), 0.0)


def semiconductor_solve(system, phi_S, rho_S, right, recomb_ref=None, anchor=None, inv_tau=0.0):
    """Steady electron then hole densities for a frozen potential.

    ``right`` describes the condition at the interface end:
    ``("transfer", r0, o0)``, ``("butler_volmer", F_n)`` or
    ``("robin", eq_n, eq_p, v_n, v_p)`` (absorbing contact).
    Recombination and generation are lagged (Picard) as a fixed source
    evaluated at ``recomb_ref`` (default: ``rho_S``), so a frozen-potential
    solve cannot feed on its own growth. A positive ``inv_tau`` adds the
    implicit pseudo-time term ``vol * inv_tau * (rho - anchor)``.
    """
    s = rho_S.shape[1] - 1
    vol = system.vol_S
    out = rho_S.copy()
    kind = right[0]
    if kind not in ("transfer", "butler_volmer", "robin"):
        raise ValueError(f"unknown interface condition {kind!r}")
    ohmic = system.contact_kind == 0
    ref = rho_S if recomb_ref is None else recomb_ref
    n, p = ref[0], ref[1]
    # -R + G with R = (A_n n + A_p p)(rho_isc^2 - n p)
    source = vol * (system.gen - (system.A_n * n + system.A_p * p) * (system.rho_isc2 - n * p))
    for k in range(2):
        a, b = upwind_coefficients(phi_S, system.h_S, system.D_S[k], system.mu_S[k], system.alpha_S[k])
        lag = rho_S[k]
        eq_C = system.rne_C if k == 0 else system.rpe_C

        def build(split, k=k, lag=lag, eq_C=eq_C):
            extra = vol * inv_tau
            rhs = vol * inv_tau * anchor[k] if inv_tau > 0 else np.zeros(s + 1)
            add_source(extra, rhs, slice(None), 0.0, source, lag, split)
            if not ohmic:
                v = system.v_n if k == 0 else system.v_p
                add_source(extra, rhs, 0, -v, v * eq_C, lag[0], split)
            if kind == "transfer":
                _, r0, o0 = right
                if k == 0:
                    c, eq = system.k_et * o0, system.rne_I
                else:
                    c, eq = system.k_ht * r0, system.rpe_I
                # outflow F = -c (rho_s - eq)
                add_source(extra, rhs, s, c, -c * eq, lag[s], split)
            elif kind == "butler_volmer":
                if k == 0:
                    add_source(extra, rhs, s, 0.0, -right[1], lag[s], split)
            else:
                v = right[3 + k]
                add_source(extra, rhs, s, -v, v * right[1 + k], lag[s], split)
            return extra, rhs

        out[k] = _positive_solve(a, b, build, left=eq_C if ohmic else None)
    return out


def electrolyte_solve(system, phi_E, rho_E, n_s, p_s, anchor=None, inv_tau=0.0):
    """Steady electrolyte densities given the semiconductor interface values.

    The reductant is solved with the oxidant lagged, then the oxidant with
    the fresh reductant; extras see an insulating interface. ``anchor`` and
    ``inv_tau`` add a pseudo-time term as in :func:`semiconductor_solve`.
    """
    out = rho_E.copy()
    m = rho_E.shape[1]
    phi_I = phi_E[0]
    if system.interface_model == 0:
        dn = n_s - system.rne_I
        dp = p_s - system.rpe_I
        self_r = system.k_ht * dp  # r-coefficient of the reductant inflow
        cross_r = -system.k_et * dn  # o-coefficient of the reductant inflow
    else:
        d = system.bv_eta * (phi_I - system.bv_phi_e)
        self_r = system.bv_k0 * np.exp((1.0 - system.bv_alpha) * d)
        cross_r = -system.bv_k0 * np.exp(-system.bv_alpha * d)
    for k in range(out.shape[0]):
        a, b = upwind_coefficients(phi_E, system.h_E, system.D_E[k], system.mu_E[k], system.alpha_E[k])
        # node 0 balances J_0 against the inflow; the oxidant inflow is the
        # negative of the reductant inflow
        if k == 0:
            coef, const = self_r, cross_r * out[1, 0]
        elif k == 1:
            coef, const = -cross_r, -self_r * out[0, 0]
        else:
            coef, const = 0.0, 0.0

        def build(split, k=k, coef=coef, const=const):
            extra = system.vol_E * inv_tau
            rhs = system.vol_E * inv_tau * anchor[k] if inv_tau > 0 else np.zeros(m)
            add_source(extra, rhs, 0, coef, const, rho_E[k, 0], split)
            return extra, rhs

        out[k] = _positive_solve(a, b, build, right=system.bulk_E[k])
    return out


def stationary_region_solve(region, system: TransportSystem, state: CarrierState):
    """One steady solve of ``region`` ("S" or "E") with everything else frozen."""
    rho_S, rho_E = state.stacked()
    s = system.s
    if region == "S":
        new = semiconductor_solve(system, state.phi[: s + 1], rho_S, _interface_condition(system, rho_E, state.phi[s]))
        return CarrierState.from_stacked(state.t, new, rho_E, state.phi, system.extra_names)
    if region == "E":
        new = electrolyte_solve(system, state.phi[s:], rho_E, rho_S[0, -1], rho_S[1, -1])
        return CarrierState.from_stacked(state.t, rho_S, new, state.phi, system.extra_names)
    raise ValueError("region must be 'S' or 'E'")


def _interface_condition(system, rho_E, phi_I):
    if system.interface_model == 0:
        return ("transfer", rho_E[0, 0], rho_E[1, 0])
    d = system.bv_eta * (phi_I - system.bv_phi_e)
    bv = system.bv_k0 * np.exp(-system.bv_alpha * d) * (rho_E[1, 0] - np.exp(d) * rho_E[0, 0])
    return ("butler_volmer", -bv)


# potential update


def _residual(system, phi, rho_S, rho_E):
    load = _kernels_py.poisson_charge(system, rho_S, rho_E)
    Aphi = system.pois_diag * phi
    Aphi[1:] += system.pois_lower[1:] * phi[:-1]
    Aphi[:-1] += system.pois_upper[:-1] * phi[1:]
    return load - Aphi


def _charge_jacobian(system, rho_S, rho_E):
    s = system.s
    jac = np.zeros(system.n_nodes)
    jac[: s + 1] += system.vol_S * (system.alpha_S**2 @ rho_S)
    jac[s:] += system.vol_E * (system.alpha_E**2 @ rho_E)
    jac[0] = jac[-1] = 0.0
    return jac


_EXP_CAP = 600.0


def boltzmann_scale(system, rho_S, rho_E, delta):
    """Densities after a potential change ``delta`` at frozen quasi-Fermi levels.

    Each density is multiplied by ``exp(-alpha delta)``; Dirichlet nodes
    keep their values.
    """
    s = system.s
    out_S = rho_S * np.exp(np.clip(-np.outer(system.alpha_S, delta[: s + 1]), -_EXP_CAP, _EXP_CAP))
    out_E = rho_E * np.exp(np.clip(-np.outer(system.alpha_E, delta[s:]), -_EXP_CAP, _EXP_CAP))
    system.apply_dirichlet(out_S, out_E)
    return out_S, out_E


def potential_update(system, phi, rho_S, rho_E, mode="newton", tol=1e-12, max_iter=100, max_step=5.0):
    """Correction ``delta`` to ``phi`` from the Poisson residual.

    ``"linear"``: Poisson with the densities frozen, in correction form.
    ``"newton"``: one Newton step with the space charge linearized as
    ``q(phi + delta) ~ q(phi) - sum(alpha^2 rho) delta``.
    ``"nonlinear"``: the densities respond to ``delta`` as Boltzmann factors
    (see :func:`boltzmann_scale`) and the resulting nonlinear Poisson problem
    is solved by Newton iteration, each step capped at ``max_step``.
    """
    lower, diag, upper = system.pois_lower, system.pois_diag, system.pois_upper
    if mode == "linear":
        return _kernels_py.tridiag_solve(lower, diag, upper, _residual(system, phi, rho_S, rho_E))
    if mode == "newton":
        jac = _charge_jacobian(system, rho_S, rho_E)
        return _kernels_py.tridiag_solve(lower, diag + jac, upper, _residual(system, phi, rho_S, rho_E))
    if mode != "nonlinear":
        raise ValueError(f"unknown potential step {mode!r}")
    delta = np.zeros_like(phi)
    for _ in range(max_iter):
        nS, nE = boltzmann_scale(system, rho_S, rho_E, delta)
        jac = _charge_jacobian(system, nS, nE)
        step = _kernels_py.tridiag_solve(lower, diag + jac, upper, _residual(system, phi + delta, nS, nE))
        big = np.abs(step).max()
        if big > max_step:
            step *= max_step / big
        delta += step
        if big < tol * (1.0 + np.abs(delta).max()):
            break
    return delta


# driver


def _schwarz(system, phi, rho_S, rho_E, control, inv_tau=0.0):
    s = system.s
    vol_S, vol_E = system.vol_S, system.vol_E
    anchor_S, anchor_E = rho_S.copy(), rho_E.copy()
    for it in range(1, control.max_schwarz + 1):
        new_S = semiconductor_solve(
            system,
            phi[: s + 1],
            rho_S,
            _interface_condition(system, rho_E, phi[s]),
            recomb_ref=anchor_S,
            anchor=anchor_S,
            inv_tau=inv_tau,
        )
        new_E = electrolyte_solve(
            system, phi[s:], rho_E, new_S[0, -1], new_S[1, -1], anchor=anchor_E, inv_tau=inv_tau
        )
        change = max(
            _rel(new_S, rho_S, vol_S),
            _rel(new_E, rho_E, vol_E),
        )
        rho_S, rho_E = new_S, new_E
        if change < control.schwarz_tol:
            break
    return rho_S, rho_E, it


def _rel(new, old, vol):
    worst = 0.0
    for a, b in zip(new, old):
        num = np.sqrt(np.sum(vol * (a - b) ** 2))
        den = np.sqrt(np.sum(vol * a * a))
        worst = max(worst, num / max(den, 1e-300))
    return worst


def gummel_schwarz(system: TransportSystem, initial: CarrierState, control: IterationControl = IterationControl()):
    """Iterate to a steady state; returns ``(state, ConvergenceReport)``.

    On hitting the iteration cap the last iterate is returned with
    ``report.converged == False``.
    """
    report = ConvergenceReport()
    rho_S, rho_E = initial.stacked()
    system.apply_dirichlet(rho_S, rho_E)
    phi = initial.phi.copy()
    phi[0], phi[-1] = system.phi_C, system.phi_A
    prev = CarrierState.from_stacked(initial.t, rho_S, rho_E, phi, system.extra_names)
    tau = control.pseudo_time
    growth = control.pseudo_growth
    for k in range(1, control.max_gummel + 1):
        inv_tau = 1.0 / tau if tau < _TAU_OFF else 0.0
        try:
            delta = control.damping * potential_update(system, phi, rho_S, rho_E, control.poisson_step)
            new_phi = phi + delta
            new_S, new_E = rho_S, rho_E
            if control.poisson_step == "nonlinear":
                new_S, new_E = boltzmann_scale(system, rho_S, rho_E, delta)
            new_S, new_E, inner = _schwarz(system, new_phi, new_S, new_E, control, inv_tau)
            cur = CarrierState.from_stacked(initial.t, new_S, new_E, new_phi, system.extra_names)
            norm = max(state_change(system, cur, prev).values())
        except (np.linalg.LinAlgError, FloatingPointError, ZeroDivisionError) as exc:
            failure, norm = str(exc), np.inf
        else:
            failure = "non-finite update"
        report.iterations = k
        if not np.isfinite(norm):
            # reject the step and retry with a shorter pseudo time
            report.rejections += 1
            if inv_tau == 0.0:
                tau = control.pseudo_time
            tau /= _TAU_CUT
            growth = np.sqrt(growth)
            if tau < _TAU_MIN:
                report.message = f"{failure} at Gummel iteration {k}"
                return prev, report
            continue
        report.update_norms.append(norm)
        report.schwarz_iterations.append(inner)
        tau *= growth
        phi, rho_S, rho_E, prev = new_phi, new_S, new_E, cur
        if norm < control.gummel_tol:
            report.converged = True
            report.message = f"converged in {k} Gummel iterations"
            return cur, report
    report.message = f"no convergence within {control.max_gummel} Gummel iterations (last update {norm:.3e})"
    return prev, report


def warm_start(system: TransportSystem, initial: CarrierState, duration, max_steps=50_000_000):
    """Transient pre-roll of length ``duration``; returns ``(state, TransientStats)``."""
    if duration < 0:
        raise ValueError("warm-start duration must be >= 0")
    return system.advance(initial, initial.t + duration, max_steps=max_steps)


def solve_steady(system: TransportSystem, initial: CarrierState, control: IterationControl = IterationControl()):
    """Warm start by ``control.warm_start_time`` then Gummel-Schwarz."""
    start, stats = warm_start(system, initial, control.warm_start_time, control.max_steps)
    state, report = gummel_schwarz(system, start, control)
    report.warm_start_time = control.warm_start_time
    report.warm_start_steps = stats.steps
    return state, report


__all__ = [
    "ConvergenceReport",
    "IterationControl",
    "electrolyte_solve",
    "gummel_schwarz",
    "potential_update",
    "semiconductor_solve",
    "solve_steady",
    "stationary_region_solve",
    "warm_start",
]
