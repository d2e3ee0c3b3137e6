"""Finite-dimensional Lipschitz maps used as test operators."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .schedules import check_rho


class DomainError(ValueError):
    """A point lies outside the operator's domain."""


class LipschitzAuditError(ValueError):
    """The declared Lipschitz constant is violated."""


class NormKind(str, Enum):
    LINF = "linf"
    L1 = "l1"
    L2 = "l2"

    def __call__(self, v: np.ndarray) -> float:
        v = np.asarray(v)
        if self is NormKind.LINF:
            return float(np.max(np.abs(v))) if v.size else 0.0
        if self is NormKind.L1:
            return float(np.sum(np.abs(v)))
        return float(np.linalg.norm(v))

    def operator_norm(self, A: np.ndarray) -> float:
        """Induced matrix norm."""
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        if self is NormKind.LINF:
            return float(np.max(np.sum(np.abs(A), axis=1)))
        if self is NormKind.L1:
            return float(np.max(np.sum(np.abs(A), axis=0)))
        return float(np.linalg.norm(A, 2))


@dataclass(frozen=True)
class OperatorSpec:
    """A map T: C -> C with a declared Lipschitz constant in a given norm.

    ``residual_fn`` overrides how ``||x - Tx||`` is measured (used by maps on
    sampled function spaces); ``sampler`` draws random domain points;
    ``diameter`` is diam(C) when the domain is bounded.
    """

    name: str
    dim: int
    rho: float
    norm: NormKind
    eval: Callable[[np.ndarray], np.ndarray]
    fixed_point: Optional[np.ndarray] = None
    domain_check: Optional[Callable[[np.ndarray], bool]] = None
    residual_fn: Optional[Callable[[np.ndarray, np.ndarray], float]] = None
    sampler: Optional[Callable[[np.random.Generator], np.ndarray]] = None
    diameter: Optional[float] = None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        self.check_domain(x)
        return self.eval(x)

    def check_domain(self, x: np.ndarray) -> None:
        if x.shape != (self.dim,):
            raise DomainError(f"{self.name}: expected shape ({self.dim},), got {x.shape}")
        if self.domain_check is not None and not self.domain_check(x):
            raise DomainError(f"{self.name}: point outside the domain")

    def residual(self, x: np.ndarray, tx: np.ndarray | None = None) -> float:
        if tx is None:
            tx = self(x)
        if self.residual_fn is not None:
            return self.residual_fn(x, tx)
        return self.norm(x - tx)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        if self.sampler is not None:
            return self.sampler(rng)
        return rng.uniform(-1.0, 1.0, size=self.dim)


def lipschitz_audit(op: OperatorSpec, n_pairs: int = 10_000, seed: int = 0, rel_tol: float = 1e-12) -> float:
    """Largest observed ratio ||Tx - Ty|| / ||x - y|| over random pairs.

    Raises LipschitzAuditError if any pair exceeds rho * (1 + rel_tol).
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        x = op.sample(rng)
        y = op.sample(rng)
        dxy = op.norm(x - y)
        if dxy == 0.0:
            continue
        dt = op.norm(op(x) - op(y))
        if dt > op.rho * dxy * (1.0 + rel_tol):
            raise LipschitzAuditError(f"{op.name}: ||Tx-Ty|| = {dt!r} > rho ||x-y|| = {op.rho * dxy!r}")
        worst = max(worst, dt / dxy)
    return worst


def random_x0(dim: int, seed: int) -> np.ndarray:
    """Uniform[-1, 1] start point from a counter-based generator (Philox4x64)."""
    rng = np.random.Generator(np.random.Philox(int(seed)))
    return rng.uniform(-1.0, 1.0, size=int(dim))


def rotation_contraction(rho: float, theta: float) -> OperatorSpec:
    """Rotation by theta, rescaled to be rho-Lipschitz in the sup-norm."""
    rho = check_rho(rho)
    if not math.isfinite(theta):
        raise ValueError("theta must be finite")
    c, s = math.cos(theta), math.sin(theta)
    A = np.array([[c, -s], [s, c]]) / (abs(c) + abs(s))
    M = rho * A
    return OperatorSpec(
        name=f"rotation(rho={rho:g},theta={theta:g})",
        dim=2,
        rho=rho,
        norm=NormKind.LINF,
        eval=lambda x: M @ x,
        fixed_point=np.zeros(2),
    )


def cyclic_shift(rho: float, d: int, norm: NormKind | str = NormKind.LINF) -> OperatorSpec:
    """T(x_1, ..., x_d) = rho (x_d, x_1, ..., x_{d-1})."""
    rho = check_rho(rho)
    if d < 2:
        raise ValueError("cyclic shift needs d >= 2")
    return OperatorSpec(
        name=f"cyclic(rho={rho:g},d={d})",
        dim=int(d),
        rho=rho,
        norm=NormKind(norm),
        eval=lambda x: rho * np.roll(x, 1),
        fixed_point=np.zeros(d),
    )


def l1_right_shift(rho: float, trunc: int) -> OperatorSpec:
    """rho-scaled right shift on l1, truncated to ``trunc`` coordinates.

    Truncation is lossless for runs of fewer than trunc - 1 steps from e_0.
    """
    rho = check_rho(rho)
    if trunc < 2:
        raise ValueError("trunc must be >= 2")

    def shift(x):
        out = np.zeros_like(x)
        out[1:] = rho * x[:-1]
        return out

    return OperatorSpec(
        name=f"l1shift(rho={rho:g},trunc={trunc})",
        dim=int(trunc),
        rho=rho,
        norm=NormKind.L1,
        eval=shift,
        fixed_point=np.zeros(trunc),
    )


_GOEBEL_TOL = 1e-12


def goebel_map(rho: float, grid: int = 101) -> OperatorSpec:
    """Goebel's map Tx(t) = rho max(x(t) - 1 + 1/rho, 0) on sampled C[0, 1].

    The domain is continuous x with x(0) = 0 <= x(t) <= x(1) = 1, stored as
    samples on a uniform grid including both endpoints. Residuals are sup-norms
    of the underlying continuous functions: x takes every value between
    adjacent samples, and T acts pointwise, so the sup of |x - Tx| is found
    exactly from the sample values.
    """
    rho = check_rho(rho)
    if rho <= 1.0:
        raise ValueError("Goebel's map needs rho > 1")
    if grid < 2:
        raise ValueError("grid must have at least 2 points")
    shift = rho - 1.0
    kink = 1.0 - 1.0 / rho

    def T(x):
        # rho*x - (rho-1) keeps T(1) == 1 exactly
        return np.maximum(rho * x - shift, 0.0)

    def inside(x):
        return (
            abs(x[0]) <= _GOEBEL_TOL
            and abs(x[-1] - 1.0) <= _GOEBEL_TOL
            and bool(np.all((x >= -_GOEBEL_TOL) & (x <= 1.0 + _GOEBEL_TOL)))
        )

    def sup_residual(x, tx):
        lo = np.minimum(x[:-1], x[1:])
        hi = np.maximum(x[:-1], x[1:])
        best = float(np.max(np.abs(x - tx)))
        if np.any((lo <= kink) & (kink <= hi)):
            best = max(best, kink)
        return best

    def sampler(rng):
        x = rng.uniform(0.0, 1.0, size=grid)
        x[0], x[-1] = 0.0, 1.0
        return x

    return OperatorSpec(
        name=f"goebel(rho={rho:g},grid={grid})",
        dim=int(grid),
        rho=rho,
        norm=NormKind.LINF,
        eval=T,
        domain_check=inside,
        residual_fn=sup_residual,
        sampler=sampler,
        diameter=1.0,
    )


def affine_operator(A, b, rho: float, norm: NormKind | str = NormKind.LINF, name: str = "affine") -> OperatorSpec:
    """Tx = A x + b; the declared rho must dominate the induced norm of A."""
    rho = check_rho(rho)
    norm = NormKind(norm)
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    b = np.asarray(b, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise ValueError(f"shape mismatch: A {A.shape}, b {b.shape}")
    opnorm = norm.operator_norm(A)
    if opnorm > rho * (1.0 + 1e-12):
        raise LipschitzAuditError(f"{name}: ||A|| = {opnorm!r} exceeds declared rho = {rho!r}")
    fp = None
    try:
        cand = np.linalg.solve(np.eye(n) - A, b)
    except np.linalg.LinAlgError:
        cand = None
    if cand is not None and np.all(np.isfinite(cand)):
        fp = cand
    return OperatorSpec(name=name, dim=n, rho=rho, norm=norm, eval=lambda x: A @ x + b, fixed_point=fp)


def beta_products(betas: Sequence[float], n: int) -> np.ndarray:
    """B[i] = prod_{j=i}^{n} beta_j for i = -1..n+2 (stored at offset 1).

    Conventions: B_i = 0 for i <= 0 and B_i = 1 for i > n.
    """
    B = np.zeros(n + 4)
    B[n + 2] = 1.0
    B[n + 3] = 1.0
    for i in range(n, 0, -1):
        B[i + 1] = float(betas[i]) * B[i + 2]
    return B


def sign_init_x0(rho: float, betas: Sequence[float], n: int) -> np.ndarray:
    """Start point in dimension n+2 at which the cyclic shift attains the affine bound at step n."""
    check_rho(rho)
    B = beta_products(betas, n)
    x0 = np.empty(n + 2)
    x0[0] = -1.0
    x0[n + 1] = 1.0
    for i in range(1, n + 1):
        coef = -B[i + 2] + 2.0 * B[i + 1] - B[i]
        x0[i] = 1.0 if coef >= 0.0 else -1.0
    return x0
