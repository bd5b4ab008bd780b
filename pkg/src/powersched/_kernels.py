"""Compiled inner loops for the forward RK4 sweep and the backward adjoint.

All arrays are real: the reduced admittance of each mode is passed as its
conductance ``G`` and susceptance ``B`` parts.  Phase vectors exclude the
reference machine, which sits at index ``ref`` with zero phase.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _phasors(delta, E, ref, c, s):
    k = 0
    for i in range(E.shape[0]):
        if i == ref:
            c[i] = E[i]
            s[i] = 0.0
        else:
            c[i] = E[i] * np.cos(delta[k])
            s[i] = E[i] * np.sin(delta[k])
            k += 1


@njit(cache=True)
def _rhs(x, G, B, E, Pm, scale, ref, out, c, s):
    n = E.shape[0]
    K = n - 1
    _phasors(x[:K], E, ref, c, s)
    k = 0
    for i in range(n):
        if i == ref:
            continue
        ir = 0.0
        ii = 0.0
        for j in range(n):
            ir += G[i, j] * c[j] - B[i, j] * s[j]
            ii += G[i, j] * s[j] + B[i, j] * c[j]
        pe = c[i] * ir + s[i] * ii
        out[k] = x[K + k]
        out[K + k] = scale[k] * (Pm[i] - pe)
        k += 1


@njit(cache=True)
def rk4_sweep(x0, hs, G, B, E, Pm, scale, ref, bound):
    """RK4 over consecutive steps ``hs``; stops early past ``bound``.

    Returns the states after each completed step and how many completed.
    """
    dim = x0.shape[0]
    n = E.shape[0]
    out = np.empty((hs.shape[0], dim))
    c = np.empty(n)
    s = np.empty(n)
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    tmp = np.empty(dim)
    x = x0.copy()
    for m in range(hs.shape[0]):
        h = hs[m]
        _rhs(x, G, B, E, Pm, scale, ref, k1, c, s)
        for q in range(dim):
            tmp[q] = x[q] + 0.5 * h * k1[q]
        _rhs(tmp, G, B, E, Pm, scale, ref, k2, c, s)
        for q in range(dim):
            tmp[q] = x[q] + 0.5 * h * k2[q]
        _rhs(tmp, G, B, E, Pm, scale, ref, k3, c, s)
        for q in range(dim):
            tmp[q] = x[q] + h * k3[q]
        _rhs(tmp, G, B, E, Pm, scale, ref, k4, c, s)
        norm2 = 0.0
        for q in range(dim):
            x[q] = x[q] + (h / 6.0) * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q])
            norm2 += x[q] * x[q]
        if not (norm2 <= bound * bound):
            return out, m
        out[m] = x
    return out, hs.shape[0]


@njit(cache=True)
def _accel_matrix(delta, G, B, E, scale, ref, c, s, A):
    """d omega_dot / d delta over non-reference machines, written into ``A``."""
    n = E.shape[0]
    _phasors(delta, E, ref, c, s)
    ki = 0
    for i in range(n):
        if i == ref:
            continue
        diag = 0.0
        kj = 0
        for j in range(n):
            if j == i:
                if j != ref:
                    kj += 1
                continue
            kij = G[i, j] * (s[i] * c[j] - c[i] * s[j]) - B[i, j] * (c[i] * c[j] + s[i] * s[j])
            diag -= kij
            if j != ref:
                A[ki, kj] = -scale[ki] * kij
                kj += 1
        A[ki, ki] = -scale[ki] * diag
        ki += 1


@njit(cache=True)
def _adj_rhs(A, g, p, K, out):
    # out = -(Df^T p) - g with Df = [[0, I], [A, 0]]
    for j in range(K):
        acc = 0.0
        for i in range(K):
            acc += A[i, j] * p[K + i]
        out[j] = -acc - g[j]
        out[K + j] = -p[j] - g[K + j]


@njit(cache=True)
def adjoint_sweep(t, X, step_modes, Gs, Bs, E, scale, ref, lgrad):
    """Backward RK4 for the costate from a zero terminal value.

    The state at step midpoints is the average of the neighbouring samples.
    """
    n_t, dim = X.shape
    K = dim // 2
    n = E.shape[0]
    rho = np.zeros((n_t, dim))
    c = np.empty(n)
    s = np.empty(n)
    Ar = np.zeros((K, K))
    Am = np.zeros((K, K))
    Al = np.zeros((K, K))
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    tmp = np.empty(dim)
    gm = np.empty(dim)
    dmid = np.empty(K)
    r = np.zeros(dim)
    right_mode = -1
    for i in range(n_t - 2, -1, -1):
        sig = step_modes[i] - 1
        h = t[i + 1] - t[i]
        G = Gs[sig]
        B = Bs[sig]
        if sig != right_mode:
            _accel_matrix(X[i + 1, :K], G, B, E, scale, ref, c, s, Ar)
        for q in range(K):
            dmid[q] = 0.5 * (X[i, q] + X[i + 1, q])
        _accel_matrix(dmid, G, B, E, scale, ref, c, s, Am)
        _accel_matrix(X[i, :K], G, B, E, scale, ref, c, s, Al)
        for q in range(dim):
            gm[q] = 0.5 * (lgrad[i, q] + lgrad[i + 1, q])
        _adj_rhs(Ar, lgrad[i + 1], r, K, k1)
        for q in range(dim):
            tmp[q] = r[q] - 0.5 * h * k1[q]
        _adj_rhs(Am, gm, tmp, K, k2)
        for q in range(dim):
            tmp[q] = r[q] - 0.5 * h * k2[q]
        _adj_rhs(Am, gm, tmp, K, k3)
        for q in range(dim):
            tmp[q] = r[q] - h * k3[q]
        _adj_rhs(Al, lgrad[i], tmp, K, k4)
        for q in range(dim):
            r[q] = r[q] - (h / 6.0) * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q])
        rho[i] = r
        # left-end Jacobian becomes the next step's right end
        Ar, Al = Al, Ar
        right_mode = sig
    return rho
