"""Closed-form recursions for anchoring schedules and their residual bounds.

Every bound here is a dimensionless multiple of a scale constant: the orbit
bound kappa for the minimax-optimal family, the distance estimate delta0 for
the flat family.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Sequence

import numpy as np

from . import kernels

N_MAX_CAP = 10**7
SQRT2 = math.sqrt(2.0)


class _Freeze:
    """Schedule marker: the step copies the previous iterate."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "FREEZE"

    def __reduce__(self):
        return (_Freeze, ())


FREEZE = _Freeze()


class ScheduleKind(str, Enum):
    MOPT = "mopt"
    ADA = "ada"
    FLAT_OPT = "flat"
    AFFINE = "affine"
    BANACH_PICARD = "bp"
    FIXED_SEQUENCE = "fixed"


@dataclass(frozen=True)
class ScheduleRow:
    n: int
    beta: float
    bound: float
    aux: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Schedule:
    """Eagerly computed schedule: one entry per step n = 0..n_max.

    ``betas[n]`` is NaN where ``frozen[n]`` is set (affine expansive tail).
    ``limit_case`` marks schedules defined by a limit rather than optimality.
    Behaves as a read-only sequence of :class:`ScheduleRow`.
    """

    kind: ScheduleKind
    rho: float
    betas: np.ndarray
    bounds: np.ndarray
    aux: dict = field(default_factory=dict)
    frozen: np.ndarray | None = None
    limit_case: bool = False

    def __len__(self) -> int:
        return len(self.betas)

    def __getitem__(self, n: int) -> ScheduleRow:
        if n < 0:
            n += len(self)
        if not 0 <= n < len(self):
            raise IndexError(n)
        aux = {k: float(v[n]) for k, v in self.aux.items()}
        return ScheduleRow(n, float(self.betas[n]), float(self.bounds[n]), aux)

    def __iter__(self) -> Iterator[ScheduleRow]:
        for n in range(len(self)):
            yield self[n]

    @property
    def n_max(self) -> int:
        return len(self) - 1

    def plan(self) -> list:
        """Per-step anchoring actions for the engine: a float or FREEZE."""
        out = self.betas.tolist()
        if self.frozen is not None:
            for n in np.flatnonzero(self.frozen):
                out[n] = FREEZE
        return out


def check_rho(rho: float) -> float:
    rho = float(rho)
    if not (rho > 0.0 and math.isfinite(rho)):
        raise ValueError(f"Lipschitz constant must be positive and finite, got {rho!r}")
    return rho


def _check_n_max(n_max: int) -> int:
    n_max = int(n_max)
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    if n_max > N_MAX_CAP:
        raise ValueError(f"n_max capped at {N_MAX_CAP}, got {n_max}")
    return n_max


# --- minimax-optimal family -------------------------------------------------

def beta_unconstrained(rho: float, r: float) -> float:
    """Unconstrained minimizer of the one-step quadratic in beta."""
    rho = check_rho(rho)
    return 0.5 * (1.0 / rho + 1.0 - r)


def b_opt(rho: float, r: float) -> float:
    """Optimal anchoring weight given the previous bound ``r``."""
    bu = beta_unconstrained(rho, r)
    return bu if bu < 1.0 else 1.0


def v_opt(rho: float, r: float) -> float:
    """Optimal next bound given the previous bound ``r``."""
    rho = check_rho(rho)
    if r >= 1.0 / rho - 1.0:
        bu = 0.5 * (1.0 / rho + 1.0 - r)
        return 1.0 - rho * bu * bu
    return rho * r


def r_limit(rho: float) -> float:
    """Fixed point of ``v_opt``: max(0, 1 - 1/rho)."""
    rho = check_rho(rho)
    return max(0.0, 1.0 - 1.0 / rho)


def m_opt_schedule(rho: float, n_max: int) -> Schedule:
    rho = check_rho(rho)
    n_max = _check_n_max(n_max)
    betas, bounds = kernels.mopt_recursion(rho, n_max)
    d, c, _ = kernels.halpern_recursion(rho, betas)
    return Schedule(ScheduleKind.MOPT, rho, betas, bounds, {"d": d, "c": c})


def m_opt_betas_closed(rho: float, n_max: int) -> np.ndarray:
    """The same optimal betas via beta_{n+1} = min(1, (1 + (rho beta_n)^2) / (2 rho))."""
    rho = check_rho(rho)
    out = np.zeros(_check_n_max(n_max) + 1)
    for n in range(1, n_max + 1):
        rb = rho * out[n - 1]
        out[n] = min(1.0, (1.0 + rb * rb) / (2.0 * rho))
    return out


def _as_betas(betas: Sequence[float]) -> np.ndarray:
    arr = np.asarray(betas, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("betas must be a non-empty 1-d sequence")
    if not np.all((arr >= 0.0) & (arr <= 1.0)):
        bad = int(np.flatnonzero(~((arr >= 0.0) & (arr <= 1.0)))[0])
        raise ValueError(f"beta[{bad}] = {arr[bad]!r} outside [0, 1]")
    if arr[0] != 0.0:
        raise ValueError(f"beta[0] must be 0, got {arr[0]!r}")
    return arr


def halpern_recursive_bounds(rho: float, betas: Sequence[float]) -> Schedule:
    """Tight residual multipliers R_n for an arbitrary Halpern schedule.

    ``betas[0]`` must be 0; non-monotone schedules are allowed.
    """
    rho = check_rho(rho)
    arr = _as_betas(betas)
    d, c, R = kernels.halpern_recursion(rho, arr)
    return Schedule(ScheduleKind.FIXED_SEQUENCE, rho, arr, R, {"d": d, "c": c})


def banach_picard_schedule(rho: float, n_max: int) -> Schedule:
    rho = check_rho(rho)
    betas = np.ones(_check_n_max(n_max) + 1)
    betas[0] = 0.0
    d, c, R = kernels.halpern_recursion(rho, betas)
    return Schedule(ScheduleKind.BANACH_PICARD, rho, betas, R, {"d": d, "c": c})


# --- flat (distance-to-fixed-point) family ----------------------------------

def flat_beta_unconstrained(rho: float, r: float) -> float:
    rho = check_rho(rho)
    return (1.0 / rho + 3.0 - r) / 4.0


def b_flat(rho: float, r: float) -> float:
    rho = check_rho(rho)
    if r <= 1.0 / rho - 1.0:
        return 1.0
    if r >= 1.0 / rho + 3.0:
        return 0.0
    return (1.0 / rho + 3.0 - r) / 4.0


def v_flat(rho: float, r: float) -> float:
    rho = check_rho(rho)
    if r <= 1.0 / rho - 1.0:
        return rho * r
    if r >= 1.0 / rho + 3.0:
        return 1.0 + rho
    beta = (1.0 / rho + 3.0 - r) / 4.0
    return (1.0 + rho) - 2.0 * rho * beta * beta


def flat_limits(rho: float) -> tuple[float, float]:
    """Limit bound and limit weight of the flat-optimal schedule."""
    rho = check_rho(rho)
    if rho < 1.0:
        return 0.0, 1.0
    if rho <= SQRT2 + 1.0:
        return (SQRT2 + 1.0) ** 2 * (1.0 - 1.0 / rho), (SQRT2 + 1.0 - rho) / (rho * SQRT2)
    return 1.0 + rho, 0.0


def flat_schedule(rho: float, n_max: int) -> Schedule:
    rho = check_rho(rho)
    n_max = _check_n_max(n_max)
    betas, bounds = kernels.flat_recursion(rho, n_max)
    mu, nu, dfl, _, _ = kernels.flat_general_recursion(rho, betas)
    return Schedule(ScheduleKind.FLAT_OPT, rho, betas, bounds, {"mu": mu, "nu": nu, "d_flat": dfl})


@dataclass(frozen=True)
class FlatBounds:
    """Flat-family multipliers scaled by delta0.

    ``R_flat`` is the direct definition, ``R_rec`` the collapsed recursion;
    the two agree up to rounding.
    """

    mu: np.ndarray
    nu: np.ndarray
    d_flat: np.ndarray
    R_flat: np.ndarray
    R_rec: np.ndarray

    def __len__(self):
        return len(self.mu)

    def __getitem__(self, n):
        return (float(self.mu[n]), float(self.nu[n]), float(self.d_flat[n]), float(self.R_flat[n]))


def flat_general_bounds(rho: float, betas: Sequence[float], delta0: float = 1.0) -> FlatBounds:
    rho = check_rho(rho)
    arr = _as_betas(betas)
    if np.any(np.diff(arr) < 0.0):
        bad = int(np.flatnonzero(np.diff(arr) < 0.0)[0]) + 1
        raise ValueError(f"flat bounds need non-decreasing betas; beta[{bad}] < beta[{bad - 1}]")
    if not delta0 > 0.0:
        raise ValueError(f"delta0 must be positive, got {delta0!r}")
    seqs = kernels.flat_general_recursion(rho, arr)
    return FlatBounds(*(delta0 * s for s in seqs))


def make_schedule(kind: ScheduleKind | str, rho: float, n_max: int, betas: Sequence[float] | None = None) -> Schedule:
    """Build any operator-independent schedule by kind."""
    kind = ScheduleKind(kind)
    if kind is ScheduleKind.MOPT:
        return m_opt_schedule(rho, n_max)
    if kind is ScheduleKind.FLAT_OPT:
        return flat_schedule(rho, n_max)
    if kind is ScheduleKind.BANACH_PICARD:
        return banach_picard_schedule(rho, n_max)
    if kind is ScheduleKind.AFFINE:
        from .affine import aff_schedule

        return aff_schedule(rho, n_max)
    if kind is ScheduleKind.FIXED_SEQUENCE:
        if betas is None:
            raise ValueError("fixed schedule needs an explicit beta list")
        return halpern_recursive_bounds(rho, betas)
    raise ValueError("the adaptive schedule depends on the operator; use engine.ada_halpern_run")
