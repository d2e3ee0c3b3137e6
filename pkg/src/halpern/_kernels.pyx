# cython: language_level=3
"""Compiled scalar recursions; see ``_kernels_py`` for the reference twin."""
import numpy as np

from libc.math cimport fabs, pow


def mopt_recursion(double rho, Py_ssize_t n_max):
    cdef double[::1] betas
    cdef double[::1] bounds
    cdef double inv = 1.0 / rho
    cdef double thr = inv - 1.0
    cdef double r = 1.0
    cdef double bu
    cdef Py_ssize_t n
    b_arr = np.empty(n_max + 1)
    r_arr = np.empty(n_max + 1)
    betas = b_arr
    bounds = r_arr
    betas[0] = 0.0
    bounds[0] = 1.0
    for n in range(1, n_max + 1):
        bu = 0.5 * (inv + 1.0 - r)
        betas[n] = bu if bu < 1.0 else 1.0
        if r >= thr:
            r = 1.0 - rho * bu * bu
        else:
            r = rho * r
        bounds[n] = r
    return b_arr, r_arr


def flat_recursion(double rho, Py_ssize_t n_max):
    cdef double[::1] betas
    cdef double[::1] bounds
    cdef double inv = 1.0 / rho
    cdef double lo = inv - 1.0
    cdef double hi = inv + 3.0
    cdef double top = 1.0 + rho
    cdef double r = top
    cdef double beta
    cdef Py_ssize_t n
    b_arr = np.empty(n_max + 1)
    r_arr = np.empty(n_max + 1)
    betas = b_arr
    bounds = r_arr
    betas[0] = 0.0
    bounds[0] = top
    for n in range(1, n_max + 1):
        if r <= lo:
            beta = 1.0
            r = rho * r
        elif r >= hi:
            beta = 0.0
            r = top
        else:
            beta = (inv + 3.0 - r) / 4.0
            r = top - 2.0 * rho * beta * beta
        betas[n] = beta
        bounds[n] = r
    return b_arr, r_arr


def halpern_recursion(double rho, betas_in):
    cdef double[::1] betas = np.ascontiguousarray(betas_in, dtype=np.float64)
    cdef Py_ssize_t size = betas.shape[0]
    cdef Py_ssize_t n
    cdef double b, lo, dn, cn
    cdef double b_prev = 0.0
    cdef double c_prev = 0.0
    d_arr = np.empty(size)
    c_arr = np.empty(size)
    R_arr = np.empty(size)
    cdef double[::1] d = d_arr
    cdef double[::1] c = c_arr
    cdef double[::1] R = R_arr
    d[0] = 0.0
    c[0] = 0.0
    R[0] = 1.0
    for n in range(1, size):
        b = betas[n]
        lo = b if b < b_prev else b_prev
        dn = fabs(b_prev - b) + lo * c_prev
        cn = rho * dn
        if cn > 1.0:
            cn = 1.0
        d[n] = dn
        c[n] = cn
        R[n] = 1.0 - b * (1.0 - cn)
        b_prev = b
        c_prev = cn
    return d_arr, c_arr, R_arr


def flat_general_recursion(double rho, betas_in):
    cdef double[::1] betas = np.ascontiguousarray(betas_in, dtype=np.float64)
    cdef Py_ssize_t size = betas.shape[0]
    cdef Py_ssize_t n
    cdef double top = 1.0 + rho
    cdef double a1 = 1.0 + 3.0 * rho
    cdef double mu_prev = 1.0
    cdef double nu_prev = top
    cdef double d_prev = 0.0
    cdef double b_prev = 0.0
    cdef double r_prev = top
    cdef double b, m, v, dn
    mu_arr = np.empty(size)
    nu_arr = np.empty(size)
    d_arr = np.empty(size)
    rf_arr = np.empty(size)
    rr_arr = np.empty(size)
    cdef double[::1] mu = mu_arr
    cdef double[::1] nu = nu_arr
    cdef double[::1] dfl = d_arr
    cdef double[::1] rfl = rf_arr
    cdef double[::1] rrec = rr_arr
    for n in range(size):
        b = betas[n]
        m = 1.0 - b + rho * b * mu_prev
        v = 1.0 + rho * m
        dn = (b - b_prev) * nu_prev + rho * b_prev * d_prev
        mu[n] = m
        nu[n] = v
        dfl[n] = dn
        rfl[n] = (1.0 - b) * v + rho * b * dn
        r_prev = top - a1 * b + 2.0 * rho * b * b + rho * b * r_prev
        rrec[n] = r_prev
        mu_prev = m
        nu_prev = v
        d_prev = dn
        b_prev = b
    return mu_arr, nu_arr, d_arr, rf_arr, rr_arr


def rho_sequences(Py_ssize_t n_max):
    cdef double zn = 0.0
    cdef double rn = 0.5
    cdef double sn = 0.5
    cdef Py_ssize_t n
    z_arr = np.empty(n_max + 1)
    r_arr = np.empty(n_max + 1)
    s_arr = np.empty(n_max + 1)
    cdef double[::1] z = z_arr
    cdef double[::1] r = r_arr
    cdef double[::1] s = s_arr
    z[0] = zn
    r[0] = rn
    s[0] = sn
    for n in range(1, n_max + 1):
        zn = 0.25 * (1.0 + zn) * (1.0 + zn)
        rn = 0.5 * (1.0 + rn * rn)
        sn = sn - 0.5 * sn * sn
        z[n] = zn
        r[n] = rn
        s[n] = sn
    return z_arr, r_arr, s_arr


def logistic(Py_ssize_t n_max):
    cdef double en = 0.25
    cdef Py_ssize_t n
    e_arr = np.empty(n_max + 1)
    cdef double[::1] e = e_arr
    e[0] = en
    for n in range(1, n_max + 1):
        en = en * (1.0 - en)
        e[n] = en
    return e_arr


cdef double _affine_residual(double rho, double[::1] betas, Py_ssize_t n, double[::1] B):
    cdef Py_ssize_t i
    cdef double total = 0.0
    cdef double bm, b0
    B[n + 1] = 1.0
    B[n + 2] = 1.0
    for i in range(n, 0, -1):
        B[i] = betas[i] * B[i + 1]
    for i in range(0, n + 2):
        bm = B[i - 1] if i >= 2 else 0.0
        b0 = B[i] if i >= 1 else 0.0
        total += fabs(B[i + 1] - 2.0 * b0 + bm) * pow(rho, <double>(n + 1 - i))
    return total


def affine_residual(double rho, betas_in, Py_ssize_t n):
    cdef double[::1] betas = np.ascontiguousarray(betas_in, dtype=np.float64)
    cdef double[::1] B = np.zeros(n + 3)
    return _affine_residual(rho, betas, n, B)


def affine_residuals(double rho, betas_in):
    cdef double[::1] betas = np.ascontiguousarray(betas_in, dtype=np.float64)
    cdef Py_ssize_t size = betas.shape[0]
    cdef Py_ssize_t n
    cdef double[::1] B = np.zeros(size + 3)
    out_arr = np.empty(size)
    cdef double[::1] out = out_arr
    for n in range(size):
        out[n] = _affine_residual(rho, betas, n, B)
    return out_arr
