"""Nested optimal-transport bounds for Mann iterations and tight instances.

For a triangular array of averaging weights pi, the distance bound between
iterates m and n is the optimal transport cost from pi^m to pi^n with ground
cost c_{i-1,j-1} = min(1, rho d_{i-1,j-1}), computed recursively. The dual
potentials of each transport problem give explicit points in a sup-norm cube
on which the bounds are attained.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .engine import MannArray
from .report import Report, check_eq, check_le
from .schedules import check_rho

_MARGINAL_TOL = 1e-12
_SUPPORT_EPS = 1e-15
_REDUCED_COST_EPS = 1e-12


class InfeasibleMarginals(ValueError):
    pass


class DualInfeasible(RuntimeError):
    pass


@dataclass(frozen=True)
class TransportSolution:
    """Optimal plan, one potential per index (u_i - u_j <= cost_ij), and value."""

    plan: np.ndarray
    duals: np.ndarray
    value: float
    pivots: int = 0

    def dual_objective(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.dot(self.duals, a - b))


def _tree_potentials(p: int, q: int, basis: list, C: np.ndarray):
    adj = [[] for _ in range(p + q)]
    for i, j in basis:
        adj[i].append(p + j)
        adj[p + j].append(i)
    pot = np.full(p + q, np.nan)
    pot[0] = 0.0
    queue = deque([0])
    while queue:
        node = queue.popleft()
        for nb in adj[node]:
            if np.isnan(pot[nb]):
                if node < p:  # row -> column: u_i + v_j = C_ij
                    pot[nb] = C[node, nb - p] - pot[node]
                else:
                    pot[nb] = C[nb, node - p] - pot[node]
                queue.append(nb)
    return pot[:p], pot[p:], adj


def _tree_path(adj: list, start: int, goal: int) -> list:
    parent = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nb in adj[node]:
            if nb not in parent:
                parent[nb] = node
                queue.append(nb)
    path = [goal]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    return path[::-1]


def _transport_simplex(s: np.ndarray, t: np.ndarray, C: np.ndarray, max_pivots: int = 100_000):
    """Balanced transportation problem by the primal simplex on spanning trees.

    Returns (flows, u, v, pivots) with u_i + v_j <= C_ij and equality on the
    final basis. Degenerate bases carry zero-flow basic cells; Bland's rule
    (first improving cell, lowest-index leaving cell) prevents cycling.
    """
    p, q = len(s), len(t)
    sr, tr = s.astype(np.float64).copy(), t.astype(np.float64).copy()
    flow: dict = {}
    i = j = 0
    while True:
        amt = min(sr[i], tr[j])
        flow[(i, j)] = amt
        sr[i] -= amt
        tr[j] -= amt
        if i == p - 1 and j == q - 1:
            break
        if i == p - 1:
            j += 1
        elif j == q - 1:
            i += 1
        elif sr[i] <= tr[j]:
            i += 1
        else:
            j += 1
    pivots = 0
    while True:
        basis = sorted(flow)
        u, v, adj = _tree_potentials(p, q, basis, C)
        red = C - u[:, None] - v[None, :]
        for cell in basis:
            red[cell] = 0.0
        cand = np.flatnonzero(red.ravel() < -_REDUCED_COST_EPS)
        if cand.size == 0:
            break
        if pivots >= max_pivots:
            raise RuntimeError(f"transport simplex did not terminate in {max_pivots} pivots")
        ei, ej = divmod(int(cand[0]), q)
        path = _tree_path(adj, p + ej, ei)
        minus = []
        for k in range(len(path) - 1):
            a, b = path[k], path[k + 1]
            cell = (b, a - p) if a >= p else (a, b - p)
            if k % 2 == 0:
                minus.append(cell)
        theta = min(flow[c] for c in minus)
        leaving = min(c for c in minus if flow[c] == theta)
        for k in range(len(path) - 1):
            a, b = path[k], path[k + 1]
            cell = (b, a - p) if a >= p else (a, b - p)
            flow[cell] += -theta if k % 2 == 0 else theta
        del flow[leaving]
        flow[(ei, ej)] = theta
        pivots += 1
    z = np.zeros((p, q))
    for (a, b), f in flow.items():
        z[a, b] = f
    return z, u, v, pivots


def solve_transport(pi_m, pi_n, cost) -> TransportSolution:
    """Exact optimal transport between two distributions on 0..K-1.

    The cost must be a K x K semimetric (zero diagonal, triangle inequality);
    both are needed for the diagonal pre-fix and for the single-potential dual.
    """
    a = np.asarray(pi_m, dtype=np.float64)
    b = np.asarray(pi_n, dtype=np.float64)
    C = np.asarray(cost, dtype=np.float64)
    K = len(a)
    if len(b) != K or C.shape != (K, K):
        raise ValueError(f"shape mismatch: {a.shape}, {b.shape}, cost {C.shape}")
    if np.any(a < 0) or np.any(b < 0):
        raise InfeasibleMarginals("negative mass")
    if abs(float(a.sum()) - float(b.sum())) > _MARGINAL_TOL:
        raise InfeasibleMarginals(f"total mass differs: {a.sum()!r} vs {b.sum()!r}")
    if not np.all(np.isfinite(C)) or np.any(C < 0):
        raise ValueError("cost must be finite and non-negative")
    diag = np.minimum(a, b)
    plan = np.diag(diag)
    ra, rb = a - diag, b - diag
    S = np.flatnonzero(ra > _SUPPORT_EPS)
    D = np.flatnonzero(rb > _SUPPORT_EPS)
    pivots = 0
    if S.size and D.size:
        z, u, v, pivots = _transport_simplex(ra[S], rb[D], C[np.ix_(S, D)])
        plan[np.ix_(S, D)] += z
        # c-transform of the demand potentials: U_k = min_j C_kj + psi_j
        psi = -v
        duals = np.min(C[:, D] + psi[None, :], axis=1)
    else:
        duals = np.zeros(K)
    value = float(np.sum(plan * C))
    return TransportSolution(plan, duals, value, pivots)


@dataclass
class BoundTable:
    """Distance and capped-distance bounds indexed by -1..N (offset by one).

    ``d[m + 1, n + 1]`` is d_{m,n}; use :meth:`d_at` / :meth:`c_at` for the
    natural indices. ``R[n]`` is the residual multiplier at step n.
    """

    rho: float
    N: int
    d: np.ndarray
    c: np.ndarray
    R: np.ndarray
    solutions: dict = field(default_factory=dict)

    def d_at(self, m: int, n: int) -> float:
        return float(self.d[m + 1, n + 1])

    def c_at(self, m: int, n: int) -> float:
        return float(self.c[m + 1, n + 1])


def _padded(row: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros(size)
    out[:len(row)] = row
    return out


def ot_bounds(rho: float, pi: MannArray, N: int) -> BoundTable:
    """Fill the bound table for steps 0..N in order of increasing n."""
    rho = check_rho(rho)
    if N < 0 or pi.N < N:
        raise ValueError(f"need Mann rows 0..{N}, have 0..{pi.N}")
    size = N + 2
    d = np.zeros((size, size))
    c = np.zeros((size, size))
    d[0, 1:] = d[1:, 0] = 1.0 / rho
    c[0, 1:] = c[1:, 0] = 1.0  # min(1, rho / rho)
    sols = {}
    R = np.zeros(N + 1)
    for n in range(N + 1):
        cost = c[:n + 1, :n + 1]
        for m in range(n):
            sol = solve_transport(_padded(pi[m], n + 1), pi[n], cost)
            sols[(m, n)] = sol
            d[m + 1, n + 1] = d[n + 1, m + 1] = sol.value
            cv = min(1.0, rho * sol.value)
            c[m + 1, n + 1] = c[n + 1, m + 1] = cv
        R[n] = float(np.dot(pi[n], c[:n + 1, n + 1]))
    return BoundTable(rho, N, d, c, R, sols)


@dataclass(frozen=True)
class AdversarialInstance:
    """Points y^0..y^{N+1} and Mann iterates x^0..x^N in the sup-norm cube
    indexed by the pairs (m, n), -1 <= m <= n <= N; the map is Tx^k = y^{k+1}."""

    index_set: tuple
    y: np.ndarray
    x: np.ndarray
    rho: float
    kappa: float
    pi: MannArray

    @property
    def N(self) -> int:
        return len(self.x) - 1

    def T(self, k: int) -> np.ndarray:
        return self.y[k + 1]


def build_adversarial_instance(rho: float, kappa: float, pi: MannArray, N: int, table: BoundTable | None = None) -> AdversarialInstance:
    """Realize the bound table by explicit points.

    Coordinate (-1, n) of y^k is c_{k-1,n}; coordinate (m, n) with m >= 0 is
    the optimal dual potential of cell (m, n) at index k, extended beyond n by
    u_i = min_k u_k + c_{k-1,i-1} and shifted so its minimum is 0.
    """
    rho = check_rho(rho)
    if not kappa > 0.0:
        raise ValueError("kappa must be positive")
    if table is None:
        table = ot_bounds(rho, pi, N)
    c = table.c  # c[a, b] = c_{a-1, b-1}
    index = tuple((m, n) for m in range(-1, N + 1) for n in range(m, N + 1))
    K = N + 2  # number of y points, indices 0..N+1
    y = np.zeros((K, len(index)))
    for col, (m, n) in enumerate(index):
        if m == -1:
            y[:, col] = c[:K, n + 1]
            continue
        if m == n:
            continue
        u = np.empty(K)
        u[:n + 1] = table.solutions[(m, n)].duals
        for i in range(n + 1, K):
            u[i] = np.min(u[:n + 1] + c[:n + 1, i])
        Cn = c[:K, :K]
        gap = u[:, None] - u[None, :] - Cn
        if np.max(gap) > 1e-9:
            a, b = np.unravel_index(int(np.argmax(gap)), gap.shape)
            raise DualInfeasible(f"cell ({m},{n}): u_{a} - u_{b} exceeds c by {gap[a, b]!r}")
        y[:, col] = u - u.min()
    y *= kappa
    x = np.zeros((N + 1, len(index)))
    for k in range(N + 1):
        acc = np.zeros(len(index))
        for i in np.flatnonzero(pi[k]):
            acc += pi[k][i] * y[i]
        x[k] = acc
    return AdversarialInstance(index, y, x, rho, float(kappa), pi)


def _sup(v: np.ndarray) -> float:
    return float(np.max(np.abs(v)))


def verify_tightness(inst: AdversarialInstance, table: BoundTable, tol: float = 1e-9) -> Report:
    """Check that the instance attains the table in the sup-norm."""
    k, rho = inst.kappa, inst.rho
    rep = Report()
    N = inst.N
    for n in range(N + 1):
        for m in range(n + 1):
            dist = _sup(inst.x[m] - inst.x[n])
            rep.add(check_eq(f"dist({m},{n})", dist, k * table.d_at(m, n), tol * max(1.0, k), step=n))
            img = _sup(inst.T(m) - inst.T(n))
            rep.add(check_eq(f"image_dist({m},{n})", img, k * table.c_at(m, n), tol * max(1.0, k), step=n))
            rep.add(check_le(f"orbit_lipschitz({m},{n})", img, rho * dist, rel=tol, abs_tol=tol * k, step=n))
        rep.add(check_eq(f"residual({n})", _sup(inst.x[n] - inst.T(n)), k * table.R[n], tol * max(1.0, k), step=n))
        rep.add(check_eq(f"anchor({n})", _sup(inst.y[0] - inst.T(n)), k, tol * max(1.0, k), step=n))
    return rep
