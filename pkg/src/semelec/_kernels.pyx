# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the transport kernels.

Same signatures and array layout as ``_kernels_py``; the fused
``euler_run`` keeps the whole explicit loop (rates, update, clamping,
Poisson solve, step-size control) in C.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, isfinite, INFINITY

cnp.import_array()

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_MAX_STEPS = 2


cdef inline double _max(double a, double b) nogil:
    return a if a > b else b


cdef inline double _min(double a, double b) nogil:
    return a if a < b else b


cdef void _thomas(const double[:] lower, const double[:] diag, const double[:] upper,
                  const double[:] rhs, double[:] x, double[:] cp) noexcept nogil:
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t i
    cdef double den = diag[0]
    cp[0] = upper[0] / den
    x[0] = rhs[0] / den
    for i in range(1, n):
        den = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / den
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / den
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]


def tridiag_solve(lower, diag, upper, rhs):
    """Thomas algorithm (no pivoting; intended for M-matrices)."""
    cdef double[:] lo = np.ascontiguousarray(lower, dtype=np.float64)
    cdef double[:] d = np.ascontiguousarray(diag, dtype=np.float64)
    cdef double[:] up = np.array(upper, dtype=np.float64)
    cdef double[:] b = np.ascontiguousarray(rhs, dtype=np.float64)
    up[up.shape[0] - 1] = 0.0
    out = np.empty(d.shape[0])
    cdef double[:] x = out
    cdef double[:] cp = np.empty(d.shape[0])
    _thomas(lo, d, up, b, x, cp)
    return out


def mmatrix_solve(a, b, extra, rhs, left=None, right=None):
    """Compiled twin of ``_kernels_py.mmatrix_solve``."""
    cdef const double[:] A = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:] B = np.ascontiguousarray(b, dtype=np.float64)
    cdef const double[:] E = np.ascontiguousarray(extra, dtype=np.float64)
    cdef const double[:] R = np.ascontiguousarray(rhs, dtype=np.float64)
    cdef Py_ssize_t n = R.shape[0], i
    out = np.zeros(n)
    cdef double[:] x = out
    cdef double[:] piv = np.zeros(n)
    cdef double[:] y = np.zeros(n)
    cdef bint has_l = left is not None, has_r = right is not None
    cdef double lv = left if has_l else 0.0
    cdef double rv = right if has_r else 0.0
    cdef Py_ssize_t lo = 1 if has_l else 0
    cdef Py_ssize_t hi = n - 2 if has_r else n - 1
    cdef double exc = 0.0, yi
    with nogil:
        for i in range(lo, hi + 1):
            if i == lo:
                exc = E[i] + (B[i - 1] if i > 0 else 0.0)
                yi = R[i] + (A[i - 1] * lv if i > 0 else 0.0)
            else:
                exc = E[i] + B[i - 1] * exc / piv[i - 1]
                yi = R[i] + A[i - 1] * y[i - 1] / piv[i - 1]
            if i == hi and has_r:
                yi = yi + B[i] * rv
            piv[i] = (A[i] if i < n - 1 else 0.0) + exc
            y[i] = yi
        if hi >= lo:  # otherwise both ends are fixed and nothing is free
            x[hi] = y[hi] / piv[hi]
        i = hi - 1
        while i >= lo:
            x[i] = (y[i] + B[i] * x[i + 1]) / piv[i]
            i -= 1
        if has_l:
            x[0] = lv
        if has_r:
            x[n - 1] = rv
    return out


cdef void _flux(const double[:] rho, const double[:] phi, Py_ssize_t off,
                const double[:] h, double D, double mu_alpha, double[:] J) noexcept nogil:
    # J[f] between nodes f, f+1 of rho; phi indexed with offset ``off``
    cdef Py_ssize_t f
    cdef double w
    for f in range(h.shape[0]):
        w = -mu_alpha * (phi[off + f + 1] - phi[off + f]) / h[f]
        J[f] = -D * (rho[f + 1] - rho[f]) / h[f]
        if w > 0.0:
            J[f] += w * rho[f]
        elif w < 0.0:
            J[f] += w * rho[f + 1]


def upwind_flux(rho, phi, h, double D, double mu, double alpha):
    """Face fluxes ``-D drho/dx + w rho_up`` with ``w = -alpha mu dphi/dx``."""
    cdef double[:] r = np.ascontiguousarray(rho, dtype=np.float64)
    cdef double[:] ph = np.ascontiguousarray(phi, dtype=np.float64)
    cdef double[:] hh = np.ascontiguousarray(h, dtype=np.float64)
    out = np.empty(hh.shape[0])
    _flux(r, ph, 0, hh, D, mu * alpha, out)
    return out


cdef class _Pack:
    """Typed snapshot of a TransportSystem for the compiled loop."""
    cdef public Py_ssize_t s, m, nE, n_nodes
    cdef public int contact_kind
    cdef double[:] h_S, h_E, vol_S, vol_E, D_S, mu_S, alpha_S, D_E, mu_E, alpha_E
    cdef double[:] doping, gen, p_lower, p_diag, p_upper
    cdef double A_n, A_p, rho_isc2, rne_C, rpe_C, v_n, v_p, rne_I, rpe_I
    cdef double k_et, k_ht, phi_C, phi_A, lam2_S, lam2_E, safety
    cdef int interface_model
    cdef double bv_k0, bv_alpha, bv_eta, bv_phi_e
    # work buffers
    cdef double[:] J, rhsP, cpP, src
    cdef double[:, :] r_S, r_E
    cdef double F_S[2]
    cdef double F_E0, F_E1

    def __init__(self, p, Py_ssize_t nE):
        f = lambda a: np.ascontiguousarray(a, dtype=np.float64)
        self.s = p.s
        self.m = p.n_nodes - p.s
        self.nE = nE
        self.n_nodes = p.n_nodes
        self.contact_kind = p.contact_kind
        self.h_S = f(p.h_S); self.h_E = f(p.h_E)
        self.vol_S = f(p.vol_S); self.vol_E = f(p.vol_E)
        self.D_S = f(p.D_S); self.mu_S = f(p.mu_S); self.alpha_S = f(p.alpha_S)
        self.D_E = f(p.D_E); self.mu_E = f(p.mu_E); self.alpha_E = f(p.alpha_E)
        self.doping = f(p.doping); self.gen = f(p.gen)
        self.p_lower = f(p.pois_lower); self.p_diag = f(p.pois_diag)
        up = np.array(p.pois_upper, dtype=np.float64)
        up[-1] = 0.0
        self.p_upper = up
        self.A_n = p.A_n; self.A_p = p.A_p; self.rho_isc2 = p.rho_isc2
        self.rne_C = p.rne_C; self.rpe_C = p.rpe_C; self.v_n = p.v_n; self.v_p = p.v_p
        self.rne_I = p.rne_I; self.rpe_I = p.rpe_I
        self.k_et = p.k_et; self.k_ht = p.k_ht
        self.phi_C = p.phi_C; self.phi_A = p.phi_A
        self.lam2_S = p.lam2_S; self.lam2_E = p.lam2_E
        self.safety = p.safety
        self.interface_model = p.interface_model
        self.bv_k0 = p.bv_k0; self.bv_alpha = p.bv_alpha
        self.bv_eta = p.bv_eta; self.bv_phi_e = p.bv_phi_e
        self.J = np.empty(p.n_nodes)
        self.rhsP = np.empty(p.n_nodes)
        self.cpP = np.empty(p.n_nodes)
        self.src = np.empty(p.s + 1)
        self.r_S = np.empty((2, p.s + 1))
        self.r_E = np.empty((nE, self.m))


cdef void _interface(_Pack p, double[:, :] rho_S, double[:, :] rho_E, double phi_I) noexcept nogil:
    cdef Py_ssize_t s = p.s
    cdef double d, bv, dn, dp, et, ht
    if p.interface_model == 1:
        d = p.bv_eta * (phi_I - p.bv_phi_e)
        bv = p.bv_k0 * exp(-p.bv_alpha * d) * (rho_E[1, 0] - exp(d) * rho_E[0, 0])
        p.F_S[0] = -bv
        p.F_S[1] = 0.0
        p.F_E0 = -bv
        p.F_E1 = bv
        return
    dn = rho_S[0, s] - p.rne_I
    dp = rho_S[1, s] - p.rpe_I
    et = p.k_et * dn * rho_E[1, 0]
    ht = p.k_ht * dp * rho_E[0, 0]
    p.F_S[0] = -et
    p.F_S[1] = -ht
    p.F_E0 = ht - et
    p.F_E1 = -p.F_E0


cdef double _interface_drain(_Pack p, double[:, :] rho_S, double phi_I) noexcept nogil:
    cdef Py_ssize_t s = p.s
    cdef double d
    if p.interface_model == 1:
        d = p.bv_eta * (phi_I - p.bv_phi_e)
        return fabs(p.bv_k0) * _max(exp(-p.bv_alpha * d), exp((1.0 - p.bv_alpha) * d))
    return _max(_max(-p.k_et * (rho_S[0, s] - p.rne_I), 0.0), -p.k_ht * (rho_S[1, s] - p.rpe_I))


cdef void _rates(_Pack p, double[:, :] rho_S, double[:, :] rho_E, double[:] phi) noexcept nogil:
    cdef Py_ssize_t s = p.s, m = p.m, i, k
    cdef double left, eq, v, Fk, n, pp
    _interface(p, rho_S, rho_E, phi[s])

    for i in range(s + 1):
        n = rho_S[0, i]
        pp = rho_S[1, i]
        p.src[i] = -(p.A_n * n + p.A_p * pp) * (p.rho_isc2 - n * pp) + p.gen[i]

    for k in range(2):
        _flux(rho_S[k], phi, 0, p.h_S, p.D_S[k], p.mu_S[k] * p.alpha_S[k], p.J)
        if p.contact_kind == 1:
            if k == 0:
                eq = p.rne_C
                v = p.v_n
            else:
                eq = p.rpe_C
                v = p.v_p
            left = -v * (rho_S[k, 0] - eq)
            p.r_S[k, 0] = -(p.J[0] - left) / p.vol_S[0] + p.src[0]
        else:
            p.r_S[k, 0] = 0.0
        for i in range(1, s):
            p.r_S[k, i] = -(p.J[i] - p.J[i - 1]) / p.vol_S[i] + p.src[i]
        p.r_S[k, s] = -(p.F_S[k] - p.J[s - 1]) / p.vol_S[s] + p.src[s]

    for k in range(p.nE):
        _flux(rho_E[k], phi, s, p.h_E, p.D_E[k], p.mu_E[k] * p.alpha_E[k], p.J)
        if k == 0:
            Fk = p.F_E0
        elif k == 1:
            Fk = p.F_E1
        else:
            Fk = 0.0
        p.r_E[k, 0] = -(p.J[0] - Fk) / p.vol_E[0]
        for i in range(1, m - 1):
            p.r_E[k, i] = -(p.J[i] - p.J[i - 1]) / p.vol_E[i]
        p.r_E[k, m - 1] = 0.0


cdef void _solve_potential(_Pack p, double[:, :] rho_S, double[:, :] rho_E, double[:] phi) noexcept nogil:
    cdef Py_ssize_t s = p.s, m = p.m, i, k
    cdef double q
    for i in range(s + 1):
        p.rhsP[i] = (p.doping[i] + rho_S[1, i] - rho_S[0, i]) * p.vol_S[i]
    for i in range(s + 1, p.n_nodes):
        p.rhsP[i] = 0.0
    for i in range(m):
        q = 0.0
        for k in range(p.nE):
            q += p.alpha_E[k] * rho_E[k, i]
        p.rhsP[s + i] += q * p.vol_E[i]
    p.rhsP[0] = p.phi_C
    p.rhsP[p.n_nodes - 1] = p.phi_A
    _thomas(p.p_lower, p.p_diag, p.p_upper, p.rhsP, phi, p.cpP)


cdef double _stable_dt(_Pack p, double[:, :] rho_S, double[:, :] rho_E, double[:] phi) noexcept nogil:
    cdef Py_ssize_t s = p.s, m = p.m, i, k
    cdef double worst = 0.0, w, dh, a, dt, cond, cmax_S = 0.0, cmax_E = 0.0
    for k in range(2):
        for i in range(s + 1):
            a = 0.0
            if i < s:
                w = -p.alpha_S[k] * p.mu_S[k] * (phi[i + 1] - phi[i]) / p.h_S[i]
                a += p.D_S[k] / p.h_S[i] + _max(w, 0.0)
            if i > 0:
                w = -p.alpha_S[k] * p.mu_S[k] * (phi[i] - phi[i - 1]) / p.h_S[i - 1]
                a += p.D_S[k] / p.h_S[i - 1] + _max(-w, 0.0)
            if i == 0:
                if p.contact_kind == 0:
                    continue
                a += p.v_n if k == 0 else p.v_p
            a /= p.vol_S[i]
            worst = _max(worst, a)
    for k in range(p.nE):
        for i in range(m - 1):
            a = 0.0
            w = -p.alpha_E[k] * p.mu_E[k] * (phi[s + i + 1] - phi[s + i]) / p.h_E[i]
            a += p.D_E[k] / p.h_E[i] + _max(w, 0.0)
            if i > 0:
                w = -p.alpha_E[k] * p.mu_E[k] * (phi[s + i] - phi[s + i - 1]) / p.h_E[i - 1]
                a += p.D_E[k] / p.h_E[i - 1] + _max(-w, 0.0)
            a /= p.vol_E[i]
            worst = _max(worst, a)
    worst = _max(worst, _interface_drain(p, rho_S, phi[s]) / p.vol_E[0])
    dt = p.safety / worst if worst > 0.0 else INFINITY

    for i in range(s + 1):
        cond = p.mu_S[0] * rho_S[0, i] + p.mu_S[1] * rho_S[1, i]
        cmax_S = _max(cmax_S, cond)
    for i in range(m):
        cond = 0.0
        for k in range(p.nE):
            cond += p.alpha_E[k] * p.alpha_E[k] * p.mu_E[k] * rho_E[k, i]
        cmax_E = _max(cmax_E, cond)
    if cmax_S > 0.0:
        dt = _min(dt, p.safety * 2.0 * p.lam2_S / cmax_S)
    if cmax_E > 0.0:
        dt = _min(dt, p.safety * 2.0 * p.lam2_E / cmax_E)
    return dt


def rates(p, rho_S, rho_E, phi):
    """Time derivatives of every density; see ``_kernels_py.rates``."""
    cdef double[:, :] rS = np.ascontiguousarray(rho_S, dtype=np.float64)
    cdef double[:, :] rE = np.ascontiguousarray(rho_E, dtype=np.float64)
    cdef double[:] ph = np.ascontiguousarray(phi, dtype=np.float64)
    cdef _Pack pk = _Pack(p, rE.shape[0])
    _rates(pk, rS, rE, ph)
    F_E = np.zeros(rE.shape[0])
    F_E[0] = pk.F_E0
    F_E[1] = pk.F_E1
    return (np.asarray(pk.r_S).copy(), np.asarray(pk.r_E).copy(),
            np.array([pk.F_S[0], pk.F_S[1]]), F_E)


def solve_potential(p, rho_S, rho_E):
    cdef double[:, :] rS = np.ascontiguousarray(rho_S, dtype=np.float64)
    cdef double[:, :] rE = np.ascontiguousarray(rho_E, dtype=np.float64)
    cdef _Pack pk = _Pack(p, rE.shape[0])
    out = np.empty(p.n_nodes)
    _solve_potential(pk, rS, rE, out)
    return out


def stable_dt(p, rho_S, rho_E, phi):
    cdef double[:, :] rS = np.ascontiguousarray(rho_S, dtype=np.float64)
    cdef double[:, :] rE = np.ascontiguousarray(rho_E, dtype=np.float64)
    cdef double[:] ph = np.ascontiguousarray(phi, dtype=np.float64)
    cdef _Pack pk = _Pack(p, rE.shape[0])
    return _stable_dt(pk, rS, rE, ph)


def euler_run(p, rho_S, rho_E, phi, double t, double t_end, long max_steps, double dt_fixed):
    """Advance in place; same contract as ``_kernels_py.euler_run``."""
    cdef double[:, :] rS = rho_S
    cdef double[:, :] rE = rho_E
    cdef double[:] ph = phi
    cdef _Pack pk = _Pack(p, rE.shape[0])
    cdef long steps = 0, clamps = 0
    cdef int status = 0
    cdef double antisym = 0.0, dt, val
    cdef Py_ssize_t i, k, s = pk.s, m = pk.m
    cdef bint bad
    with nogil:
        while t < t_end:
            if steps >= max_steps:
                status = 2
                break
            if dt_fixed > 0.0:
                dt = dt_fixed
            else:
                dt = _stable_dt(pk, rS, rE, ph)
            if t + dt > t_end:
                dt = t_end - t
            _rates(pk, rS, rE, ph)
            antisym = _max(antisym, fabs(pk.F_E0 + pk.F_E1))
            bad = False
            for k in range(2):
                for i in range(s + 1):
                    val = rS[k, i] + dt * pk.r_S[k, i]
                    if not isfinite(val):
                        bad = True
                    elif val < 0.0:
                        val = 0.0
                        clamps += 1
                    rS[k, i] = val
            for k in range(pk.nE):
                for i in range(m):
                    val = rE[k, i] + dt * pk.r_E[k, i]
                    if not isfinite(val):
                        bad = True
                    elif val < 0.0:
                        val = 0.0
                        clamps += 1
                    rE[k, i] = val
            if bad:
                status = 1
                break
            _solve_potential(pk, rS, rE, ph)
            if t + dt >= t_end:
                t = t_end
            else:
                t = t + dt
            steps += 1
    return t, steps, clamps, antisym, status
