"""Derived quantities of the minimax-optimal schedule.

Transition index to the Banach-Picard phase, the ratio against the
Hilbert-space optimal bound for contractions, the sequences that locate the
transitions, and the logistic rate for expansive maps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .report import Report, check_le
from .schedules import N_MAX_CAP, check_rho, r_limit

E2 = 7.3890560989306502272
EM2 = 0.13533528323661269189
FIG2_NS = (0, 1, 2, 3, 4, 6, 9, 13, 19, 32, 64)
INF = math.inf


def _contractive(rho: float) -> float:
    rho = check_rho(rho)
    if not rho < 1.0:
        raise ValueError(f"needs rho in (0, 1), got {rho!r}")
    return rho


def _one_minus_pow(rho: float, k: int) -> float:
    """1 - rho**k without cancellation."""
    return -math.expm1(k * math.log(rho))


def pr_bound(rho: float, n: int, delta0: float = 1.0) -> float:
    """Optimal Hilbert-space residual bound for contractions after n steps."""
    rho = _contractive(rho)
    if n < 0:
        raise ValueError("n must be >= 0")
    lr = math.log(rho)
    return delta0 * math.exp(n * lr) * (-math.expm1(2.0 * lr)) / _one_minus_pow(rho, n + 1)


def _mopt_bounds(rho: float, n_max: int) -> np.ndarray:
    return kernels.mopt_recursion(rho, n_max)[1]


def _n0_scan(rho: float) -> tuple[int, float]:
    thr = 1.0 / rho - 1.0
    size = 64
    while True:
        bounds = _mopt_bounds(rho, size)
        hit = np.flatnonzero(bounds <= thr)
        if hit.size:
            n0 = int(hit[0])
            return n0, float(bounds[n0])
        if size > N_MAX_CAP:
            raise RuntimeError(f"no transition found up to n = {size}")
        size *= 4


def n0_bracket(rho: float) -> int:
    """n such that rho lies in (rho_{n-1}, rho_n], via the complements 1 - rho_n."""
    rho = _contractive(rho)
    gap = 1.0 - rho
    size = 64
    while True:
        s = kernels.rho_sequences(size)[2]
        # rho <= rho_n  <=>  1 - rho >= 1 - rho_n
        hit = np.flatnonzero(gap >= s)
        if hit.size:
            return int(hit[0])
        if size > N_MAX_CAP:
            raise RuntimeError(f"no bracket found up to n = {size}")
        size *= 4


def n0_transition(rho: float) -> int:
    """First step at which the optimal bound reaches 1/rho - 1; from then on
    the optimal schedule is the Banach-Picard iteration."""
    return _n0_scan(_contractive(rho))[0]


def q_inf(rho: float) -> float:
    """Limit of the ratio between the normed-space and Hilbert-space bounds."""
    rho = _contractive(rho)
    n0, r0 = _n0_scan(rho)
    return r0 / ((1.0 - rho) * math.exp(n0 * math.log(rho)))


def q_n_array(rho: float, n_max: int) -> np.ndarray:
    """Q_n(rho) for n = 0..n_max."""
    rho = _contractive(rho)
    n0, r0 = _n0_scan(rho)
    lr = math.log(rho)
    m = min(n_max, n0)
    bounds = _mopt_bounds(rho, m)
    ns = np.arange(n_max + 1)
    scaled = np.empty(n_max + 1)  # R*_n / rho^n
    scaled[:m + 1] = bounds[:m + 1] * np.exp(-ns[:m + 1] * lr)
    if n_max > n0:
        scaled[n0 + 1:] = r0 * math.exp(-n0 * lr)
    head = -np.expm1((ns + 1) * lr) / -math.expm1(lr)
    return head * scaled


def q_n(rho: float, n: int) -> float:
    if n < 0:
        raise ValueError("n must be >= 0")
    return float(q_n_array(rho, n)[n])


@dataclass(frozen=True)
class RhoZ:
    z: np.ndarray
    rho: np.ndarray
    gap: np.ndarray  # 1 - rho_n, kept at full relative precision

    def rho_pow_n(self) -> np.ndarray:
        """rho_n ** n computed from the complement."""
        ns = np.arange(len(self.gap))
        return np.exp(ns * np.log1p(-self.gap))


def rho_z_sequences(n_max: int) -> RhoZ:
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    z, r, s = kernels.rho_sequences(int(n_max))
    return RhoZ(z, r, s)


@dataclass(frozen=True)
class Sandwich:
    e: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def logistic_sandwich(n_max: int) -> Sandwich:
    """e_n = e_{n-1}(1 - e_{n-1}) from 1/4, with 1/((n+3) + ln(n+3)) <= e_n <= 1/(n+3).

    Raises AssertionError at the first step where the envelope fails.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    e = kernels.logistic(int(n_max))
    m = np.arange(n_max + 1) + 3.0
    lower = 1.0 / (m + np.log(m))
    upper = 1.0 / m
    bad = np.flatnonzero((e < lower) | (e > upper))
    if bad.size:
        n = int(bad[0])
        raise AssertionError(f"logistic envelope fails at n={n}: {lower[n]!r} <= {e[n]!r} <= {upper[n]!r}")
    return Sandwich(e, lower, upper)


def logistic_identity_gap(rho: float, n_max: int) -> float:
    """max_n |e_n - (rho/4)(R*_n - r_limit)| for an expansive rho."""
    rho = check_rho(rho)
    if rho <= 1.0:
        raise ValueError("identity holds for rho > 1")
    e = kernels.logistic(n_max)
    rs = _mopt_bounds(rho, n_max)
    return float(np.max(np.abs(e - rho / 4.0 * (rs - r_limit(rho)))))


def minimal_displacement(rho: float, diam: float) -> float:
    """Upper bound diam * (1 - 1/rho) on inf ||x - Tx|| for rho >= 1."""
    rho = check_rho(rho)
    if rho < 1.0:
        raise ValueError("minimal displacement bound needs rho >= 1")
    if not diam > 0.0:
        raise ValueError("diam must be positive")
    return diam * (1.0 - 1.0 / rho)


@dataclass(frozen=True)
class Speedup:
    rho: float
    n0: int
    ratio: float
    report: Report


def speedup_certificate(rho: float) -> Speedup:
    """Asymptotic gain rho^n / R*_n of the optimal schedule over Banach-Picard.

    Checks ratio >= rho^(n0+1)/(1-rho) and rho^n0 >= rho e^-2, which together
    give ratio >= rho^2 e^-2 / (1-rho).
    """
    rho = _contractive(rho)
    n0, r0 = _n0_scan(rho)
    pn0 = math.exp(n0 * math.log(rho))
    ratio = pn0 / r0
    rep = Report()
    rep.add(check_le("ratio_lower", rho * pn0 / (1.0 - rho), ratio, rel=1e-12))
    rep.add(check_le("power_lower", rho * EM2, pn0, rel=1e-12))
    rep.add(check_le("ratio_chain", rho * rho * EM2 / (1.0 - rho), ratio, rel=1e-12))
    return Speedup(rho, n0, ratio, rep)


@dataclass(frozen=True)
class ComparisonRow:
    """Ratio of the normed-space bound to the Hilbert-space bound; n = INF for the limit."""

    rho: float
    n: float
    q: float
    pr: float
    r_star: float


def comparison_rows(rho: float, ns=FIG2_NS) -> list:
    rho = _contractive(rho)
    ns = list(ns)
    qs = q_n_array(rho, max(ns))
    bounds = _mopt_bounds(rho, max(ns))
    rows = [ComparisonRow(rho, n, float(qs[n]), pr_bound(rho, n), float(bounds[n])) for n in ns]
    rows.append(ComparisonRow(rho, INF, q_inf(rho), 0.0, r_limit(rho)))
    return rows


def fig2_grid(points: int = 500, top: float = 0.9999) -> np.ndarray:
    """Contraction factors used for the ratio curves: top * k / points, k = 1..points."""
    return top * np.arange(1, points + 1) / points
