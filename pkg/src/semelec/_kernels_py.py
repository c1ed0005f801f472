"""Pure numpy implementations of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable, and as the
reference the compiled versions are tested against. Array layout is
shared with the extension:

* ``rho_S``: shape ``(2, s + 1)`` holding electrons then holes on
  semiconductor nodes (interface node last);
* ``rho_E``: shape ``(nE, m)`` holding reductant, oxidant, extras on
  electrolyte nodes (interface node first).
"""

from __future__ import annotations

import numpy as np
from scipy.linalg.lapack import dgttrf as _gttrf, dgttrs as _gttrs

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_MAX_STEPS = 2


def tridiag_factor(lower, diag, upper):
    """LU factors (LAPACK ``gttrf``) for repeated solves with one matrix.

    Row ``i`` reads ``lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1]``.
    """
    dl, d, du, du2, ipiv, info = _gttrf(
        np.asarray(lower[1:], dtype=float), np.asarray(diag, dtype=float), np.asarray(upper[:-1], dtype=float)
    )
    if info != 0:
        raise np.linalg.LinAlgError(f"singular tridiagonal matrix (gttrf info={info})")
    return dl, d, du, du2, ipiv


def tridiag_solve_factored(lu, rhs):
    x, info = _gttrs(*lu, np.asarray(rhs, dtype=float))
    return x


def tridiag_solve(lower, diag, upper, rhs):
    """Solve one tridiagonal system (``lower[0]`` and ``upper[-1]`` ignored)."""
    return tridiag_solve_factored(tridiag_factor(lower, diag, upper), rhs)


def mmatrix_solve(a, b, extra, rhs, left=None, right=None):
    """Solve a conservative upwind system without cancellation.

    The matrix is the node outflow ``J_i - J_{i-1}`` with face fluxes
    ``J_f = a_f x_f - b_f x_{f+1}`` (``a, b >= 0``) plus ``diag(extra)``
    (``extra >= 0``); ``left`` / ``right`` fix the end values. Columns of the
    flux part sum to zero, so ordinary elimination recovers each pivot's
    small excess over its off-diagonal as a difference of nearly equal
    numbers. Here that excess is carried explicitly (as in the
    Grassmann-Taksar-Heyman algorithm), so every pivot is a sum of
    non-negative terms and a non-negative ``rhs`` gives a non-negative
    solution to full relative accuracy.
    """
    n = len(rhs)
    x = np.zeros(n)
    piv = np.zeros(n)
    y = np.zeros(n)
    lo = 0 if left is None else 1
    hi = n - 1 if right is None else n - 2
    exc = 0.0
    for i in range(lo, hi + 1):
        if i == lo:
            exc = extra[i] + (b[i - 1] if i > 0 else 0.0)
            yi = rhs[i] + (a[i - 1] * left if i > 0 else 0.0)
        else:
            exc = extra[i] + b[i - 1] * exc / piv[i - 1]
            yi = rhs[i] + a[i - 1] * y[i - 1] / piv[i - 1]
        if i == hi and right is not None:
            yi += b[i] * right
        piv[i] = (a[i] if i < n - 1 else 0.0) + exc
        y[i] = yi
    if hi >= lo:  # otherwise both ends are fixed and nothing is free
        x[hi] = y[hi] / piv[hi]
    for i in range(hi - 1, lo - 1, -1):
        x[i] = (y[i] + b[i] * x[i + 1]) / piv[i]
    if left is not None:
        x[0] = left
    if right is not None:
        x[-1] = right
    return x


def upwind_flux(rho, phi, h, D, mu, alpha):
    """Face fluxes ``-D drho/dx + w rho_up`` with ``w = -alpha mu dphi/dx``."""
    w = -alpha * mu * np.diff(phi) / h
    wp = np.maximum(w, 0.0)
    wm = np.minimum(w, 0.0)
    return -D * np.diff(rho) / h + wp * rho[:-1] + wm * rho[1:]


def interface_fluxes(p, rho_S, rho_E, phi_I):
    """Normal fluxes at the interface, positive towards the electrolyte.

    Returns ``(F_S, F_E)`` with ``F_S = [F_n, F_p]`` and ``F_E`` one entry
    per electrolyte species (zero for the non-redox extras). With
    ``p.interface_model == 1`` the redox pair follows the Butler-Volmer
    law and the electron channel carries the matching charge.
    """
    F_E = np.zeros(rho_E.shape[0])
    if p.interface_model == 1:
        d = p.bv_eta * (phi_I - p.bv_phi_e)
        bv = p.bv_k0 * np.exp(-p.bv_alpha * d) * (rho_E[1, 0] - np.exp(d) * rho_E[0, 0])
        F_E[1] = bv
        F_E[0] = -bv
        return np.array([-bv, 0.0]), F_E
    dn = rho_S[0, -1] - p.rne_I
    dp = rho_S[1, -1] - p.rpe_I
    et = p.k_et * dn * rho_E[1, 0]
    ht = p.k_ht * dp * rho_E[0, 0]
    F_S = np.array([-et, -ht])
    F_E[0] = ht - et
    F_E[1] = -F_E[0]
    return F_S, F_E


def rates(p, rho_S, rho_E, phi):
    """Time derivatives of every density (zero on Dirichlet nodes)."""
    s = p.s
    phi_S = phi[: s + 1]
    phi_E = phi[s:]
    F_S, F_E = interface_fluxes(p, rho_S, rho_E, phi[s])
    n, pp = rho_S[0], rho_S[1]
    src = -(p.A_n * n + p.A_p * pp) * (p.rho_isc2 - n * pp) + p.gen

    out_S = np.empty_like(rho_S)
    for k in range(2):
        J = upwind_flux(rho_S[k], phi_S, p.h_S, p.D_S[k], p.mu_S[k], p.alpha_S[k])
        if p.contact_kind == 1:
            eq = p.rne_C if k == 0 else p.rpe_C
            v = p.v_n if k == 0 else p.v_p
            left = -v * (rho_S[k, 0] - eq)
        else:
            left = 0.0
        Jext = np.concatenate(([left], J, [F_S[k]]))
        r = -(Jext[1:] - Jext[:-1]) / p.vol_S + src
        if p.contact_kind == 0:
            r[0] = 0.0
        out_S[k] = r

    out_E = np.empty_like(rho_E)
    for k in range(rho_E.shape[0]):
        J = upwind_flux(rho_E[k], phi_E, p.h_E, p.D_E[k], p.mu_E[k], p.alpha_E[k])
        Jext = np.concatenate(([F_E[k]], J, [0.0]))
        r = -(Jext[1:] - Jext[:-1]) / p.vol_E
        r[-1] = 0.0
        out_E[k] = r
    return out_S, out_E, F_S, F_E


def poisson_charge(p, rho_S, rho_E):
    """Right-hand side of the discrete Poisson system (charge times volume)."""
    s = p.s
    q = np.zeros(p.n_nodes)
    q[: s + 1] += (p.doping + rho_S[1] - rho_S[0]) * p.vol_S
    q[s:] += (p.alpha_E @ rho_E) * p.vol_E
    q[0] = p.phi_C
    q[-1] = p.phi_A
    return q


def solve_potential(p, rho_S, rho_E):
    return tridiag_solve_factored(p.pois_lu, poisson_charge(p, rho_S, rho_E))


def interface_drain(p, rho_S, phi_I):
    """Largest coefficient by which the interface removes a redox density."""
    if p.interface_model == 1:
        d = p.bv_eta * (phi_I - p.bv_phi_e)
        return abs(p.bv_k0) * max(np.exp(-p.bv_alpha * d), np.exp((1.0 - p.bv_alpha) * d))
    dn = rho_S[0, -1] - p.rne_I
    dp = rho_S[1, -1] - p.rpe_I
    return max(-p.k_et * dn, 0.0, -p.k_ht * dp)


def stable_dt(p, rho_S, rho_E, phi):
    """Largest explicit step keeping the update monotone, times ``p.safety``.

    Each node's outflow coefficient ``a_ii`` collects ``D/h`` plus the
    outgoing upwind velocity on each face, plus absorbing boundary terms;
    positivity needs ``dt a_ii <= 1``. The Poisson coupling adds the
    dielectric-relaxation limit ``2 lambda^2 / sum(alpha^2 mu rho)``.
    """
    s = p.s
    worst = 0.0
    for k in range(2):
        w = -p.alpha_S[k] * p.mu_S[k] * np.diff(phi[: s + 1]) / p.h_S
        dh = p.D_S[k] / p.h_S
        a = np.zeros(s + 1)
        a[:-1] += dh + np.maximum(w, 0.0)
        a[1:] += dh + np.maximum(-w, 0.0)
        if p.contact_kind == 1:
            a[0] += p.v_n if k == 0 else p.v_p
        a /= p.vol_S
        if p.contact_kind == 0:
            a[0] = 0.0
        worst = max(worst, a.max())
    for k in range(rho_E.shape[0]):
        w = -p.alpha_E[k] * p.mu_E[k] * np.diff(phi[s:]) / p.h_E
        dh = p.D_E[k] / p.h_E
        a = np.zeros(rho_E.shape[1])
        a[:-1] += dh + np.maximum(w, 0.0)
        a[1:] += dh + np.maximum(-w, 0.0)
        a /= p.vol_E
        a[-1] = 0.0
        worst = max(worst, a.max())
    # interface transfer only drains the electrolyte half-cell
    worst = max(worst, interface_drain(p, rho_S, phi[s]) / p.vol_E[0])
    dt = p.safety / worst if worst > 0 else np.inf

    cond_S = (p.mu_S[0] * rho_S[0] + p.mu_S[1] * rho_S[1]).max()
    cond_E = ((p.alpha_E**2 * p.mu_E) @ rho_E).max() if rho_E.size else 0.0
    if cond_S > 0:
        dt = min(dt, p.safety * 2.0 * p.lam2_S / cond_S)
    if cond_E > 0:
        dt = min(dt, p.safety * 2.0 * p.lam2_E / cond_E)
    return dt


def euler_run(p, rho_S, rho_E, phi, t, t_end, max_steps, dt_fixed):
    """Advance in place with forward Euler until ``t_end`` or ``max_steps``.

    Returns ``(t, steps, clamps, antisym, status)``; ``antisym`` is the
    largest ``|F_r + F_o|`` seen. With ``dt_fixed > 0`` that step is used
    (truncated at ``t_end``), otherwise :func:`stable_dt` each step.
    """
    steps = 0
    clamps = 0
    antisym = 0.0
    status = STATUS_OK
    while t < t_end:
        if steps >= max_steps:
            status = STATUS_MAX_STEPS
            break
        dt = dt_fixed if dt_fixed > 0 else stable_dt(p, rho_S, rho_E, phi)
        if t + dt > t_end:
            dt = t_end - t
        r_S, r_E, F_S, F_E = rates(p, rho_S, rho_E, phi)
        antisym = max(antisym, abs(F_E[0] + F_E[1]))
        rho_S += dt * r_S
        rho_E += dt * r_E
        if not (np.all(np.isfinite(rho_S)) and np.all(np.isfinite(rho_E))):
            status = STATUS_NONFINITE
            break
        neg_S = rho_S < 0.0
        neg_E = rho_E < 0.0
        nneg = int(neg_S.sum() + neg_E.sum())
        if nneg:
            clamps += nneg
            rho_S[neg_S] = 0.0
            rho_E[neg_E] = 0.0
        phi[:] = solve_potential(p, rho_S, rho_E)
        t = t_end if t + dt >= t_end else t + dt
        steps += 1
    return t, steps, clamps, antisym, status
