import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from halpern import schedules as S
from halpern import transport as T
from halpern.engine import MannArray


def random_metric(k, rng):
    pts = rng.uniform(size=(k, 2))
    return np.minimum(1.0, np.linalg.norm(pts[:, None] - pts[None], axis=2))


def random_simplex(k, rng, zeros=0.0):
    w = rng.exponential(size=k)
    w[rng.uniform(size=k) < zeros] = 0.0
    if w.sum() == 0:
        w[0] = 1.0
    return w / w.sum()


def lp_value(a, b, C):
    k = len(a)
    A_eq = np.zeros((2 * k, k * k))
    for i in range(k):
        A_eq[i, i * k:(i + 1) * k] = 1.0
        A_eq[k + i, i::k] = 1.0
    res = linprog(C.ravel(), A_eq=A_eq, b_eq=np.r_[a, b], bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def vertex_enumeration(a, b, C):
    """Minimum over all basic feasible plans of the 3 x 3 transportation polytope."""
    k = len(a)
    cells = list(itertools.product(range(k), range(k)))
    A = np.zeros((2 * k, k * k))
    for i, j in cells:
        A[i, i * k + j] = 1.0
        A[k + j, i * k + j] = 1.0
    rhs = np.r_[a, b]
    best = np.inf
    for basis in itertools.combinations(range(k * k), 2 * k - 1):
        sub = A[:, basis]
        if np.linalg.matrix_rank(sub) < 2 * k - 1:
            continue
        z, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
        if np.max(np.abs(sub @ z - rhs)) > 1e-12 or np.min(z) < -1e-12:
            continue
        best = min(best, float(np.dot(C.ravel()[list(basis)], z)))
    return best


def assert_solution_valid(sol, a, b, C):
    np.testing.assert_allclose(sol.plan.sum(axis=1), a, atol=1e-12)
    np.testing.assert_allclose(sol.plan.sum(axis=0), b, atol=1e-12)
    assert np.all(sol.plan >= -1e-15)
    u = sol.duals
    assert np.max(u[:, None] - u[None, :] - C) <= 1e-9
    slack = sol.plan * (C - (u[:, None] - u[None, :]))
    assert np.max(np.abs(slack)) <= 1e-9
    assert sol.value - sol.dual_objective(a, b) <= 1e-10


def test_equal_marginals_zero_cost():
    a = np.array([0.2, 0.5, 0.3])
    C = random_metric(3, np.random.default_rng(0))
    sol = T.solve_transport(a, a, C)
    assert sol.value == 0.0
    np.testing.assert_array_equal(sol.plan, np.diag(a))


def test_two_atom_halpern_case():
    # rows (1 - bm) at 0, bm at m vs (1 - bn) at 0, bn at n, on indices 0..n
    bm, bn, m, n = 0.7, 0.4, 1, 2
    C = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 0.35], [1.0, 0.35, 0.0]])
    a = np.array([1 - bm, bm, 0.0])
    b = np.array([1 - bn, 0.0, bn])
    sol = T.solve_transport(a, b, C)
    assert sol.value == pytest.approx(abs(bm - bn) * C[m, 0] + min(bm, bn) * C[m, n], abs=1e-15)
    assert_solution_valid(sol, a, b, C)


@pytest.mark.parametrize("seed", range(25))
def test_3x3_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    C = random_metric(3, rng)
    a, b = random_simplex(3, rng), random_simplex(3, rng)
    sol = T.solve_transport(a, b, C)
    assert sol.value == pytest.approx(vertex_enumeration(a, b, C), abs=1e-12)
    assert_solution_valid(sol, a, b, C)


@pytest.mark.parametrize("seed", range(25))
def test_against_linprog_with_degenerate_marginals(seed):
    rng = np.random.default_rng(100 + seed)
    k = int(rng.integers(2, 12))
    C = random_metric(k, rng)
    a, b = random_simplex(k, rng, zeros=0.4), random_simplex(k, rng, zeros=0.4)
    sol = T.solve_transport(a, b, C)
    assert sol.value == pytest.approx(lp_value(a, b, C), abs=1e-10)
    assert_solution_valid(sol, a, b, C)


def test_solve_transport_errors():
    C = np.zeros((2, 2))
    with pytest.raises(T.InfeasibleMarginals):
        T.solve_transport([0.5, 0.5], [0.5, 0.6], C)
    with pytest.raises(T.InfeasibleMarginals):
        T.solve_transport([1.5, -0.5], [0.5, 0.5], C)
    with pytest.raises(ValueError):
        T.solve_transport([1.0], [0.5, 0.5], C)
    with pytest.raises(ValueError):
        T.solve_transport([0.5, 0.5], [0.5, 0.5], [[0.0, np.inf], [1.0, 0.0]])


def check_table_invariants(tab):
    d, c, rho = tab.d, tab.c, tab.rho
    np.testing.assert_array_equal(d, d.T)
    assert np.all(np.diag(d)[1:] == 0)
    np.testing.assert_allclose(d[0, 1:], 1 / rho)
    np.testing.assert_allclose(c, np.minimum(1.0, rho * d), atol=1e-15)
    assert np.all((c >= 0) & (c <= 1))
    for M in (d, c):
        for p in range(len(M)):
            assert np.all(M <= M[:, p][:, None] + M[p, :][None, :] + 1e-9)


def test_ot_bounds_halpern_closed_form():
    rng = np.random.default_rng(5)
    for t in range(20):
        rho = float(rng.uniform(0.3, 2.0))
        betas = np.r_[0.0, rng.uniform(0.01, 1.0, 8)]
        if t % 2:
            betas[1:] = np.sort(betas[1:])
        tab = T.ot_bounds(rho, MannArray.halpern(betas), 8)
        np.testing.assert_allclose(tab.R, S.halpern_recursive_bounds(rho, betas).bounds, atol=1e-12)
        check_table_invariants(tab)
        for sol in tab.solutions.values():
            assert sol.value >= 0


def test_ot_bounds_no_clamp_for_contractions():
    tab = T.ot_bounds(0.8, MannArray.uniform(6), 6)
    np.testing.assert_allclose(tab.c[1:, 1:], 0.8 * tab.d[1:, 1:], atol=1e-15)


def test_ot_bounds_banach_picard_geometric():
    tab = T.ot_bounds(0.5, MannArray.banach_picard(3), 3)
    np.testing.assert_allclose(tab.R, [1, 0.5, 0.25, 0.125], atol=1e-15)


def test_ot_bounds_rejects_short_array():
    with pytest.raises(ValueError):
        T.ot_bounds(1.0, MannArray.uniform(2), 3)


def test_adversarial_base_case_and_small():
    pi = MannArray.halpern([0.0])
    tab = T.ot_bounds(1.0, pi, 0)
    inst = T.build_adversarial_instance(1.0, 2.5, pi, 0, tab)
    assert np.max(np.abs(inst.x[0] - inst.T(0))) == pytest.approx(2.5 * tab.R[0])
    pi = MannArray.halpern([0.0, 0.5])
    tab = T.ot_bounds(1.0, pi, 1)
    inst = T.build_adversarial_instance(1.0, 1.0, pi, 1, tab)
    assert np.max(np.abs(inst.x[1] - inst.T(1))) == pytest.approx(0.75, abs=1e-15)
    assert inst.N == 1 and len(inst.index_set) == 6 and inst.index_set[0] == (-1, -1)


@pytest.mark.parametrize("rho,pi,N", [
    (1.0, MannArray.halpern(S.m_opt_schedule(1.0, 10).betas), 10),
    (1.2, MannArray.halpern([0, 0.8, 0.3, 0.9]), 3),
    (0.7, MannArray.uniform(5), 5),
    (0.5, MannArray.banach_picard(6), 6),
])
def test_verify_tightness_cases(rho, pi, N):
    tab = T.ot_bounds(rho, pi, N)
    inst = T.build_adversarial_instance(rho, 1.0, pi, N, tab)
    rep = T.verify_tightness(inst, tab)
    assert rep.ok, rep.summary()
    assert np.all(inst.y >= -1e-12) and np.all(inst.y <= 1 + 1e-12)


def test_verify_tightness_scaled_kappa():
    pi = MannArray.halpern(S.m_opt_schedule(1.3, 6).betas)
    tab = T.ot_bounds(1.3, pi, 6)
    inst = T.build_adversarial_instance(1.3, 7.0, pi, 6, tab)
    assert T.verify_tightness(inst, tab).ok


def test_verify_tightness_detects_mismatch():
    pi = MannArray.halpern([0, 0.5, 0.7])
    tab = T.ot_bounds(1.0, pi, 2)
    inst = T.build_adversarial_instance(1.0, 1.0, pi, 2, tab)
    other = T.ot_bounds(1.0, MannArray.halpern([0, 0.9, 0.95]), 2)
    assert not T.verify_tightness(inst, other).ok


def test_adversarial_rejects_bad_kappa():
    with pytest.raises(ValueError):
        T.build_adversarial_instance(1.0, 0.0, MannArray.halpern([0, 0.5]), 1)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.3, 2.0), st.lists(st.floats(0.01, 1.0), min_size=1, max_size=7))
def test_random_mann_tightness_property(rho, tail):
    rng = np.random.default_rng(len(tail))
    N = len(tail)
    rows = [np.array([1.0])]
    for n in range(1, N + 1):
        w = rng.exponential(size=n + 1)
        w[n] = tail[n - 1] * w.sum() + 1e-3
        rows.append(w / w.sum())
    rows = [r / r.sum() for r in rows]
    pi = MannArray.from_rows(rows)
    tab = T.ot_bounds(rho, pi, N)
    check_table_invariants(tab)
    inst = T.build_adversarial_instance(rho, 1.0, pi, N, tab)
    assert T.verify_tightness(inst, tab).ok
