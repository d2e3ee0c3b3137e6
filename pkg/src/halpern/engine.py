"""Halpern, Banach-Picard, adaptive Halpern and general Mann iterations.

Every run executes exactly ``n_max`` steps and records a trace; bound
checking is a separate pass over the trace.
"""
from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .operators import DomainError, OperatorSpec
from .report import Report, check_le
from .schedules import FREEZE, SQRT2, FlatBounds, Schedule, b_opt, flat_limits, flat_schedule, r_limit, v_opt

CSV_HEADER = "n,beta,residual,kappa_hat,dist_x0,dist_fp,bound"


class BoundViolation(RuntimeError):
    """An inequality that holds for every rho-Lipschitz map failed on a run."""


@dataclass
class IterationTrace:
    """Per-step record of a run; index n holds step n.

    ``beta`` is NaN on frozen steps; ``dist_fp`` and ``bound`` are NaN when
    unavailable. ``anchor_gap`` is ||x0 - Tx^n|| and ``step_len`` is
    ||x^n - x^{n-1}||. ``R`` holds the adaptive multipliers of ada runs.
    ``iterates`` and ``images`` (x^n and Tx^n) are kept only on request.
    """

    beta: np.ndarray
    residual: np.ndarray
    kappa_hat: np.ndarray
    dist_x0: np.ndarray
    dist_fp: np.ndarray
    anchor_gap: np.ndarray
    step_len: np.ndarray
    bound: np.ndarray
    frozen: np.ndarray
    delta0: float | None = None
    kappa0: float | None = None
    converged: bool = False
    R: np.ndarray | None = None
    iterates: list | None = None
    images: list | None = None
    header: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.residual)

    @property
    def n(self) -> np.ndarray:
        return np.arange(len(self))

    @property
    def steps(self) -> list:
        fp = [None if math.isnan(v) else float(v) for v in self.dist_fp]
        return [
            (n, float(self.beta[n]), float(self.residual[n]), float(self.kappa_hat[n]), float(self.dist_x0[n]), fp[n])
            for n in range(len(self))
        ]

    def to_csv(self, target=None) -> str:
        """Write the trace CSV; returns the text. ``target`` may be a path or a stream."""
        buf = io.StringIO()
        for line in self.header:
            buf.write(f"# {line}\n")
        buf.write(CSV_HEADER + "\n")
        for n in range(len(self)):
            beta = "freeze" if self.frozen[n] else _fmt(self.beta[n])
            row = [str(n), beta, _fmt(self.residual[n]), _fmt(self.kappa_hat[n]), _fmt(self.dist_x0[n]),
                   _fmt(self.dist_fp[n]), _fmt(self.bound[n])]
            buf.write(",".join(row) + "\n")
        text = buf.getvalue()
        if target is not None:
            if hasattr(target, "write"):
                target.write(text)
            else:
                atomic_write(target, text)
        return text


def _fmt(v: float) -> str:
    v = float(v)
    if math.isnan(v):
        return ""
    return f"{v:.17g}"


def atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


class _Recorder:
    def __init__(self, op: OperatorSpec, x0: np.ndarray, n_max: int, keep: bool | str):
        self.op = op
        self.x0 = x0
        self.size = n_max + 1
        self.cols = {k: np.full(self.size, np.nan) for k in
                     ("beta", "residual", "kappa_hat", "dist_x0", "dist_fp", "anchor_gap", "step_len", "bound")}
        self.frozen = np.zeros(self.size, dtype=bool)
        self.kappa = 0.0
        self.iterates = [] if keep else None
        self.images = [] if keep == "all" else None

    def record(self, n: int, beta: float, x: np.ndarray, tx: np.ndarray, x_prev: np.ndarray | None) -> None:
        op, c = self.op, self.cols
        gap = op.norm(self.x0 - tx)
        self.kappa = max(self.kappa, gap)
        c["beta"][n] = beta
        c["residual"][n] = op.residual(x, tx)
        c["kappa_hat"][n] = self.kappa
        c["dist_x0"][n] = op.norm(x - self.x0)
        c["anchor_gap"][n] = gap
        c["step_len"][n] = 0.0 if x_prev is None else op.norm(x - x_prev)
        if op.fixed_point is not None:
            c["dist_fp"][n] = op.norm(x - op.fixed_point)
        if self.iterates is not None:
            self.iterates.append(x.copy())
        if self.images is not None:
            self.images.append(tx.copy())

    def trace(self, upto: int | None = None, **kw) -> IterationTrace:
        m = self.size if upto is None else upto
        cols = {k: v[:m].copy() for k, v in self.cols.items()}
        delta0 = float(self.cols["dist_fp"][0]) if self.op.fixed_point is not None else None
        return IterationTrace(frozen=self.frozen[:m].copy(), delta0=delta0, iterates=self.iterates,
                              images=self.images, **cols, **kw)


def _eval(op: OperatorSpec, x: np.ndarray, n: int) -> np.ndarray:
    try:
        return op(x)
    except DomainError as exc:
        raise DomainError(f"step {n}: {exc}") from exc


def _start(op: OperatorSpec, x0) -> np.ndarray:
    x0 = np.array(x0, dtype=np.float64)
    op.check_domain(x0)
    return x0


def _plan(betas, n_max: int | None) -> tuple[list, int]:
    plan = betas.plan() if isinstance(betas, Schedule) else list(betas)
    if n_max is None:
        n_max = len(plan) - 1
    if len(plan) < n_max + 1:
        raise ValueError(f"schedule covers steps 0..{len(plan) - 1}, run needs 0..{n_max}")
    for n in range(1, n_max + 1):
        b = plan[n]
        if b is FREEZE:
            continue
        if not 0.0 <= b <= 1.0:
            raise ValueError(f"beta[{n}] = {b!r} outside [0, 1]")
    return plan, n_max


def halpern_run(op: OperatorSpec, x0, betas, n_max: int | None = None, keep_iterates: bool | str = False) -> IterationTrace:
    """x^n = (1 - beta_n) x^0 + beta_n T x^{n-1}; FREEZE entries copy x^{n-1}.

    ``betas`` is a list indexed by step (entry 0 ignored) or a Schedule.
    ``keep_iterates`` may be True (keep x^n) or "all" (also keep Tx^n).
    """
    plan, n_max = _plan(betas, n_max)
    x0 = _start(op, x0)
    rec = _Recorder(op, x0, n_max, keep_iterates)
    x = x0.copy()
    tx = _eval(op, x, 0)
    rec.record(0, 0.0, x, tx, None)
    for n in range(1, n_max + 1):
        b = plan[n]
        if b is FREEZE:
            rec.frozen[n] = True
            rec.record(n, math.nan, x, tx, x)
            continue
        b = float(b)
        x_prev = x
        x = (1.0 - b) * x0 + b * tx
        tx = _eval(op, x, n)
        rec.record(n, b, x, tx, x_prev)
    return rec.trace()


def banach_picard_run(op: OperatorSpec, x0, n_max: int, keep_iterates: bool | str = False) -> IterationTrace:
    """x^n = T x^{n-1}. Raises BoundViolation if a residual grows faster than rho."""
    betas = np.ones(n_max + 1)
    betas[0] = 0.0
    trace = halpern_run(op, x0, betas, n_max, keep_iterates)
    res = trace.residual
    for n in range(1, len(res)):
        if res[n] > op.rho * res[n - 1] * (1.0 + 1e-12) + 1e-300:
            raise BoundViolation(f"step {n}: residual {res[n]!r} > rho * {res[n - 1]!r}")
    return trace


class AdaSandwichError(BoundViolation):
    pass


def ada_halpern_run(op: OperatorSpec, x0, n_max: int, tol: float = 1e-9, keep_iterates: bool | str = False) -> IterationTrace:
    """Adaptive Halpern: beta_n = b_opt(R_{n-1}) with R_n measured online.

    Checks at every step that beta is non-decreasing, that
    r_limit <= R_n <= v_opt(R_{n-1}) <= R*_n, and that the residual is at most
    kappa_hat_n R_n; any failure raises AdaSandwichError. ``tol`` is the
    relative slack for rounding. R_n itself is never clamped.
    """
    rho = op.rho
    x0 = _start(op, x0)
    rec = _Recorder(op, x0, n_max, keep_iterates)
    R = np.full(n_max + 1, np.nan)
    x = x0.copy()
    tx = _eval(op, x, 0)
    rec.record(0, 0.0, x, tx, None)
    R[0] = 1.0
    rec.cols["bound"][0] = rec.kappa
    if rec.kappa == 0.0:
        tr = rec.trace(upto=1, converged=True, R=R[:1].copy())
        tr.kappa0 = 0.0
        return tr
    _, r_star = kernels.mopt_recursion(rho, n_max)
    r_lim = r_limit(rho)
    b_prev = 0.0
    for n in range(1, n_max + 1):
        b = b_opt(rho, R[n - 1])
        x_prev, tx_prev = x, tx
        x = (1.0 - b) * x0 + b * tx
        tx = _eval(op, x, n)
        rec.record(n, b, x, tx, x_prev)
        kap = rec.kappa
        R[n] = 1.0 - b + b * op.norm(tx - tx_prev) / kap
        rec.cols["bound"][n] = kap * R[n]
        ceiling = v_opt(rho, R[n - 1])
        res = rec.cols["residual"][n]
        if b < b_prev:
            raise AdaSandwichError(f"step {n}: beta decreased from {b_prev!r} to {b!r}")
        if not r_lim <= R[n] * (1.0 + tol) + tol * 1e-3:
            raise AdaSandwichError(f"step {n}: R_n = {R[n]!r} below r_limit = {r_lim!r}")
        if not R[n] <= ceiling * (1.0 + tol):
            raise AdaSandwichError(f"step {n}: R_n = {R[n]!r} above v_opt(R_n-1) = {ceiling!r}")
        if not ceiling <= r_star[n] * (1.0 + tol):
            raise AdaSandwichError(f"step {n}: v_opt(R_n-1) = {ceiling!r} above R*_n = {r_star[n]!r}")
        if not res <= kap * R[n] * (1.0 + tol):
            raise AdaSandwichError(f"step {n}: residual {res!r} above kappa_hat R_n = {kap * R[n]!r}")
        b_prev = b
    tr = rec.trace(R=R)
    tr.kappa0 = float(rec.cols["kappa_hat"][0])
    return tr


# --- general Mann iterations --------------------------------------------------

@dataclass(frozen=True)
class MannArray:
    """Lower-triangular averaging weights: row n is a distribution on 0..n
    with positive last entry. Weight i of row n multiplies Tx^{i-1}
    (with Tx^{-1} = x^0)."""

    rows: tuple

    def __post_init__(self):
        for n, row in enumerate(self.rows):
            if len(row) != n + 1:
                raise ValueError(f"row {n} must have {n + 1} entries, got {len(row)}")
            if np.any(row < 0.0):
                raise ValueError(f"row {n} has negative weights")
            if abs(float(np.sum(row)) - 1.0) > 1e-12:
                raise ValueError(f"row {n} sums to {float(np.sum(row))!r}")
            if not row[n] > 0.0:
                raise ValueError(f"row {n} has zero last weight")

    @property
    def N(self) -> int:
        return len(self.rows) - 1

    def __getitem__(self, n: int) -> np.ndarray:
        return self.rows[n]

    def __len__(self) -> int:
        return len(self.rows)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "MannArray":
        return cls(tuple(np.asarray(r, dtype=np.float64) for r in rows))

    @classmethod
    def halpern(cls, betas: Sequence[float]) -> "MannArray":
        rows = [np.array([1.0])]
        for n in range(1, len(betas)):
            b = float(betas[n])
            row = np.zeros(n + 1)
            row[0] = 1.0 - b
            row[n] = b
            rows.append(row)
        return cls(tuple(rows))

    @classmethod
    def uniform(cls, N: int) -> "MannArray":
        return cls(tuple(np.full(n + 1, 1.0 / (n + 1)) for n in range(N + 1)))

    @classmethod
    def banach_picard(cls, N: int) -> "MannArray":
        rows = []
        for n in range(N + 1):
            row = np.zeros(n + 1)
            row[n] = 1.0
            rows.append(row)
        return cls(tuple(rows))


def mann_run(op: OperatorSpec, x0, pi: MannArray, n_max: int | None = None, keep_iterates: bool | str = False) -> IterationTrace:
    """x^n = sum_i pi^n_i T x^{i-1}, accumulated in index order over nonzero weights."""
    if n_max is None:
        n_max = pi.N
    if pi.N < n_max:
        raise ValueError(f"Mann array defined through row {pi.N}, run needs {n_max}")
    x0 = _start(op, x0)
    rec = _Recorder(op, x0, n_max, keep_iterates)
    pts = [x0]  # pts[i] = T x^{i-1}
    x = x0.copy()
    tx = _eval(op, x, 0)
    rec.record(0, math.nan, x, tx, None)
    pts.append(tx)
    for n in range(1, n_max + 1):
        row = pi[n]
        acc = None
        for i in np.flatnonzero(row):
            term = row[i] * pts[i]
            acc = term if acc is None else acc + term
        x_prev = x
        x = acc
        tx = _eval(op, x, n)
        rec.record(n, float(row[n]), x, tx, x_prev)
        pts.append(tx)
    return rec.trace()


# --- bound checks -------------------------------------------------------------

def orbit_kappa(trace: IterationTrace, x0, norm) -> float:
    """Observed orbit bound: max ||Tx^m - Tx^n|| over m, n >= -1 with Tx^-1 = x^0.

    Needs a trace run with ``keep_iterates="all"``.
    """
    if trace.images is None:
        raise ValueError("trace has no stored images; run with keep_iterates='all'")
    pts = np.vstack([np.asarray(x0, dtype=np.float64)] + list(trace.images))
    best = 0.0
    for i in range(len(pts) - 1):
        diff = pts[i + 1:] - pts[i]
        best = max(best, max(norm(row) for row in diff))
    return best


def check_bounds(trace: IterationTrace, bound_rows, scale: float, flat: FlatBounds | None = None, rel: float = 1e-9) -> Report:
    """Compare a trace with a bound sequence scaled by kappa or delta0.

    ``bound_rows`` is a Schedule, a list of ScheduleRow, or a plain array.
    For the flat family pass ``flat`` (already scaled by delta0) to also
    check the distance-to-solution, anchor-gap and step-length bounds.
    Never raises on a violated bound.
    """
    if isinstance(bound_rows, Schedule):
        bounds = bound_rows.bounds
    else:
        bounds = np.array([getattr(r, "bound", r) for r in bound_rows], dtype=np.float64)
    rep = Report()
    m = min(len(trace), len(bounds))
    for n in range(m):
        rep.add(check_le("residual", trace.residual[n], scale * bounds[n], rel=rel, step=n))
    if flat is not None:
        m = min(m, len(flat))
        for n in range(m):
            if not math.isnan(trace.dist_fp[n]):
                rep.add(check_le("dist_fp", trace.dist_fp[n], flat.mu[n], rel=rel, step=n))
            rep.add(check_le("anchor_gap", trace.anchor_gap[n], flat.nu[n], rel=rel, step=n))
            rep.add(check_le("step_len", trace.step_len[n], flat.d_flat[n], rel=rel, abs_tol=1e-15, step=n))
            rep.add(check_le("residual_flat", trace.residual[n], flat.R_flat[n], rel=rel, step=n))
    return rep


def banach_fixed_point(f, x: np.ndarray, norm, contraction: float, tol: float = 1e-13, max_iter: int = 10_000_000) -> np.ndarray:
    for _ in range(max_iter):
        y = f(x)
        if norm(y - x) < tol:
            return y
        x = y
    raise RuntimeError(f"no convergence in {max_iter} iterations (contraction {contraction!r})")


def flat_convergence_check(op: OperatorSpec, x0, n_max: int, rel: float = 1e-9) -> Report:
    """Check the iterates of the flat-optimal schedule against the envelope
    ||x^n - x_flat|| <= ||x^0 - x_flat|| (n+1) L^n, where x_flat is the fixed
    point of x -> (1 - b) x^0 + b T x with b the limit weight and L = rho b.
    Also checks ||x^0 - x_flat|| <= (sqrt 2 + 1) delta0 / rho.
    """
    rho = op.rho
    if not 1.0 < rho < SQRT2 + 1.0:
        raise ValueError(f"flat convergence needs rho in (1, sqrt(2)+1), got {rho!r}")
    if op.fixed_point is None:
        raise ValueError("flat convergence check needs a known fixed point")
    x0 = _start(op, x0)
    _, b_lim = flat_limits(rho)
    L = rho * b_lim
    x_flat = banach_fixed_point(lambda x: (1.0 - b_lim) * x0 + b_lim * op(x), x0.copy(), op.norm, L)
    # the computed x_flat is within ~tol/(1-L) of the true one
    slack = 1e-13 / (1.0 - L) * 4.0
    sched = flat_schedule(rho, n_max)
    trace = halpern_run(op, x0, sched, n_max, keep_iterates=True)
    e0 = op.norm(x0 - x_flat)
    delta0 = op.norm(x0 - op.fixed_point)
    rep = Report()
    rep.add(check_le("start_gap", e0, (SQRT2 + 1.0) * delta0 / rho, rel=rel, abs_tol=slack))
    log_l = math.log(L) if L > 0.0 else -math.inf
    for n, xn in enumerate(trace.iterates):
        env = e0 * (n + 1) * math.exp(n * log_l) if n else e0
        rep.add(check_le("envelope", op.norm(xn - x_flat), env, rel=rel, abs_tol=2.0 * slack, step=n))
    return rep
