"""Pure-Python scalar recursions.

Reference implementation of the hot loops, and the fallback used when the
compiled ``halpern._kernels`` extension is not available. Both modules
expose the same functions and perform the same floating-point operations in
the same order, so their outputs agree bitwise.
"""
import numpy as np


def mopt_recursion(rho, n_max):
    """Betas and bounds of the minimax-optimal schedule, steps 0..n_max."""
    betas = np.empty(n_max + 1)
    bounds = np.empty(n_max + 1)
    betas[0] = 0.0
    bounds[0] = 1.0
    inv = 1.0 / rho
    thr = inv - 1.0
    r = 1.0
    for n in range(1, n_max + 1):
        bu = 0.5 * (inv + 1.0 - r)
        beta = bu if bu < 1.0 else 1.0
        if r >= thr:
            r = 1.0 - rho * bu * bu
        else:
            r = rho * r
        betas[n] = beta
        bounds[n] = r
    return betas, bounds


def flat_recursion(rho, n_max):
    """Betas and bounds of the flat-bound optimal schedule, steps 0..n_max."""
    betas = np.empty(n_max + 1)
    bounds = np.empty(n_max + 1)
    inv = 1.0 / rho
    lo = inv - 1.0
    hi = inv + 3.0
    top = 1.0 + rho
    betas[0] = 0.0
    bounds[0] = top
    r = top
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
    return betas, bounds


def halpern_recursion(rho, betas):
    """Distance, capped-distance and residual multipliers for a Halpern schedule."""
    size = len(betas)
    d = np.empty(size)
    c = np.empty(size)
    R = np.empty(size)
    d[0] = 0.0
    c[0] = 0.0
    R[0] = 1.0
    b_prev = 0.0
    c_prev = 0.0
    for n in range(1, size):
        b = float(betas[n])
        lo = b if b < b_prev else b_prev
        dn = abs(b_prev - b) + lo * c_prev
        cn = rho * dn
        if cn > 1.0:
            cn = 1.0
        d[n] = dn
        c[n] = cn
        R[n] = 1.0 - b * (1.0 - cn)
        b_prev = b
        c_prev = cn
    return d, c, R


def flat_general_recursion(rho, betas):
    """The four flat-bound sequences plus the collapsed one-line recursion."""
    size = len(betas)
    mu = np.empty(size)
    nu = np.empty(size)
    dfl = np.empty(size)
    rfl = np.empty(size)
    rrec = np.empty(size)
    top = 1.0 + rho
    a1 = 1.0 + 3.0 * rho
    mu_prev = 1.0
    nu_prev = top
    d_prev = 0.0
    b_prev = 0.0
    r_prev = top
    for n in range(size):
        b = float(betas[n])
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
    return mu, nu, dfl, rfl, rrec


def rho_sequences(n_max):
    """z_n, rho_n and the complement 1 - rho_n, steps 0..n_max.

    The complement is advanced by its own recursion ``s -> s - s**2/2`` so it
    keeps full relative precision when rho_n is within ulps of 1.
    """
    z = np.empty(n_max + 1)
    r = np.empty(n_max + 1)
    s = np.empty(n_max + 1)
    zn, rn, sn = 0.0, 0.5, 0.5
    z[0], r[0], s[0] = zn, rn, sn
    for n in range(1, n_max + 1):
        zn = 0.25 * (1.0 + zn) * (1.0 + zn)
        rn = 0.5 * (1.0 + rn * rn)
        sn = sn - 0.5 * sn * sn
        z[n], r[n], s[n] = zn, rn, sn
    return z, r, s


def logistic(n_max):
    """e_n = e_{n-1} (1 - e_{n-1}) from e_0 = 1/4."""
    e = np.empty(n_max + 1)
    en = 0.25
    e[0] = en
    for n in range(1, n_max + 1):
        en = en * (1.0 - en)
        e[n] = en
    return e


def affine_residual(rho, betas, n):
    """Affine residual multiplier at step n (uses betas[1..n])."""
    # B[i] = prod_{j=i}^{n} beta_j for 1 <= i <= n+1, B[n+1] = 1
    B = [0.0] * (n + 3)
    B[n + 1] = 1.0
    B[n + 2] = 1.0
    for i in range(n, 0, -1):
        B[i] = float(betas[i]) * B[i + 1]
    total = 0.0
    for i in range(0, n + 2):
        bm = B[i - 1] if i >= 2 else 0.0
        b0 = B[i] if i >= 1 else 0.0
        total += abs(B[i + 1] - 2.0 * b0 + bm) * rho ** (n + 1 - i)
    return total


def affine_residuals(rho, betas):
    """Affine residual multipliers for every step 0..len(betas)-1."""
    size = len(betas)
    out = np.empty(size)
    for n in range(size):
        out[n] = affine_residual(rho, betas, n)
    return out
