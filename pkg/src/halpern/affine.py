"""Residual bounds and optimal schedules for affine maps Tx = Ax + b."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .schedules import N_MAX_CAP, Schedule, ScheduleKind, _as_betas, _check_n_max, check_rho

_INV_E = math.exp(-1.0)
_INV_E_LO = -1.2428753672788363e-17  # 1/e - _INV_E
# W0(-1/e + q) as a series in p = sqrt(2 e q)
_BRANCH_SERIES = (-1.0, 1.0, -1.0 / 3.0, 11.0 / 72.0, -43.0 / 540.0, 769.0 / 17280.0,
                  -221.0 / 8505.0, 680863.0 / 43545600.0, -1963.0 / 204120.0)


class LambertDomainError(ValueError):
    pass


class HorizonMismatchError(RuntimeError):
    """The scanned horizon and the Lambert closed form disagree."""


@dataclass(frozen=True)
class BetaProducts:
    """Tail products B_i^n = beta_i * ... * beta_n.

    Stored as ``table[i, n]`` for 0 <= i <= n_max + 1; B is 0 for i <= 0 and
    1 for i > n.
    """

    table: np.ndarray

    @classmethod
    def from_betas(cls, betas: Sequence[float]) -> "BetaProducts":
        arr = np.asarray(betas, dtype=np.float64)
        n_max = len(arr) - 1
        t = np.zeros((n_max + 2, n_max + 1))
        for n in range(n_max + 1):
            t[n + 1:, n] = 1.0
            for i in range(n, 0, -1):
                t[i, n] = arr[i] * t[i + 1, n]
        return cls(t)

    def __call__(self, i: int, n: int) -> float:
        if i <= 0:
            return 0.0
        if i > n:
            return 1.0
        return float(self.table[i, n])


def affine_residual_bound(rho: float, betas: Sequence[float], n: int) -> float:
    """Worst-case residual multiplier L_n(beta) over affine rho-Lipschitz maps."""
    rho = check_rho(rho)
    arr = np.asarray(betas, dtype=np.float64)
    if n < 0 or n >= len(arr):
        raise ValueError(f"betas must be defined through step {n}")
    if not np.all((arr[1:n + 1] >= 0.0) & (arr[1:n + 1] <= 1.0)):
        raise ValueError("betas must lie in [0, 1]")
    return kernels.affine_residual(rho, arr, n)


def affine_residual_bounds(rho: float, betas: Sequence[float]) -> np.ndarray:
    """L_n(beta) for every n covered by ``betas``."""
    return kernels.affine_residuals(check_rho(rho), _as_betas(betas))


def lambert_w0(x: float) -> float:
    """Principal branch of the Lambert W function (Halley iteration)."""
    x = float(x)
    if math.isnan(x) or x < -_INV_E:
        raise LambertDomainError(f"W0 is undefined below -1/e, got {x!r}")
    if x == 0.0:
        return 0.0
    if x == -_INV_E:
        return -1.0
    if math.isinf(x):
        return math.inf
    if x < -0.3:
        # distance to the branch point in double-double, exact when x is near -1/e
        q = (x + _INV_E) + _INV_E_LO
        p = math.sqrt(max(2.0 * math.e * q, 0.0))
        if q < 1e-5:
            # Halley's residual is rounding-bound here; the series is accurate to ~1e-20
            return sum(c * p**k for k, c in reversed(list(enumerate(_BRANCH_SERIES))))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    elif abs(x) <= 0.1:
        w = x - x * x + 1.5 * x ** 3
    elif x <= math.e:
        w = math.log1p(x)
    else:
        l1 = math.log(x)
        l2 = math.log(l1)
        w = l1 - l2 + l2 / l1
    for _ in range(50):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom == 0.0:
            break
        step = f / denom
        w -= step
        if abs(step) <= 1e-15 * (1.0 + abs(w)):
            break
    return w


def _step_ok(rho: float, k: int) -> bool:
    """Whether step k of the i/(i+1) schedule still improves the bound."""
    lhs = (1.0 + rho ** (k + 1)) / (k + 1)
    rhs = min(rho, 1.0) * (1.0 + rho ** k) / k
    return lhs <= rhs


def _n0_scan(rho: float) -> int:
    k = 1
    while k <= N_MAX_CAP and _step_ok(rho, k):
        k += 1
    return k - 1


def n0_lambert(rho: float) -> float:
    """The real number whose floor is the horizon n0 (before flooring)."""
    rho = check_rho(rho)
    if rho == 1.0:
        raise ValueError("no finite horizon at rho = 1")
    lr = math.log(rho)
    w = lambert_w0(lr / (rho - 1.0) * rho ** (1.0 / (1.0 - rho)))
    if rho < 1.0:
        return rho / (1.0 - rho) - w / lr
    return 1.0 / (rho - 1.0) + w / lr


def affine_n0(rho: float) -> int:
    """Last step at which the i/(i+1) schedule is optimal for affine maps.

    Computed by scanning the defining inequality and cross-checked against
    the Lambert-W closed form. When the closed form lands within 1e-9 of an
    integer the two are allowed to round differently and the scan wins.
    """
    rho = check_rho(rho)
    if rho == 1.0:
        raise ValueError("no finite horizon at rho = 1 (the i/(i+1) schedule is used throughout)")
    n0 = _n0_scan(rho)
    real = n0_lambert(rho)
    closed = math.floor(real)
    if closed != n0:
        near_tie = abs(real - round(real)) <= 1e-9 * max(1.0, abs(real)) and abs(n0 - real) <= 1.0
        if not near_tie:
            raise HorizonMismatchError(f"rho={rho!r}: scan gives n0={n0}, closed form gives {closed} ({real!r})")
    return n0


def _l_star_with(rho: float, n: int, n0: int) -> float:
    if n <= n0:
        return (1.0 + rho ** (n + 1)) / (n + 1)
    base = (1.0 + rho ** (n0 + 1)) / (n0 + 1)
    if rho < 1.0:
        return base * rho ** (n - n0)
    return base


def l_star(rho: float, n: int) -> float:
    """Optimal worst-case affine residual multiplier after n steps.

    At rho = 1 this is the limit value 2/(n+1).
    """
    rho = check_rho(rho)
    if n < 0:
        raise ValueError("n must be >= 0")
    if rho == 1.0:
        return 2.0 / (n + 1)
    return _l_star_with(rho, n, affine_n0(rho))


def l_star_bruteforce(rho: float, n: int) -> float:
    """Minimum over the extreme points of the relaxed affine problem."""
    rho = check_rho(rho)
    if not 0 <= n <= 30:
        raise ValueError("enumeration limited to 0 <= n <= 30")
    if rho < 1.0:
        vals = [rho ** (n - k) * (1.0 + rho ** (k + 1)) / (k + 1) for k in range(n + 1)]
    else:
        vals = [(1.0 + rho ** (k + 1)) / (k + 1) for k in range(n + 1)]
    return min(vals)


def aff_schedule(rho: float, n_max: int) -> Schedule:
    """Optimal affine schedule: beta_n = n/(n+1) up to n0, then beta = 1
    (contractive) or frozen steps x^n = x^{n-1} (expansive).

    Bounds are the optimal multipliers L*_n. At rho = 1 the limit schedule
    n/(n+1) is used for every step and the result is flagged ``limit_case``.
    """
    rho = check_rho(rho)
    n_max = _check_n_max(n_max)
    idx = np.arange(n_max + 1, dtype=np.float64)
    betas = idx / (idx + 1.0)
    frozen = np.zeros(n_max + 1, dtype=bool)
    if rho == 1.0:
        bounds = 2.0 / (idx + 1.0)
        return Schedule(ScheduleKind.AFFINE, rho, betas, bounds, {"l_star": bounds}, frozen, limit_case=True)
    n0 = affine_n0(rho)
    tail = slice(n0 + 1, None)
    if rho < 1.0:
        betas[tail] = 1.0
    else:
        betas[tail] = np.nan
        frozen[tail] = True
    bounds = np.array([_l_star_with(rho, n, n0) for n in range(n_max + 1)])
    return Schedule(ScheduleKind.AFFINE, rho, betas, bounds, {"l_star": bounds}, frozen)
