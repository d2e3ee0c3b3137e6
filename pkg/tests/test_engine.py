import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from halpern import engine as E
from halpern import operators as O
from halpern import schedules as S
from halpern import transport
from halpern.schedules import FREEZE

X10 = np.array([1.0, 0.0])


def test_betas_one_equals_banach_picard():
    op = O.rotation_contraction(0.9, 0.7)
    a = E.halpern_run(op, X10, np.r_[0.0, np.ones(30)])
    b = E.banach_picard_run(op, X10, 30)
    np.testing.assert_array_equal(a.residual, b.residual)


def test_betas_zero_keep_anchor():
    op = O.cyclic_shift(1.3, 5)
    x0 = O.random_x0(5, 1)
    tr = E.halpern_run(op, x0, np.zeros(11), keep_iterates=True)
    for x in tr.iterates:
        np.testing.assert_array_equal(x, x0)
    np.testing.assert_array_equal(tr.residual, tr.residual[0])
    assert tr.residual[0] <= tr.kappa_hat[-1]


@pytest.mark.parametrize("kind", ["mopt", "flat", "bp", "affine"])
def test_goebel_constant_residual(kind):
    op = O.goebel_map(2.0, 101)
    x0 = np.linspace(0.0, 1.0, 101) ** 2
    sched = S.make_schedule(kind, 2.0, 80)
    tr = E.halpern_run(op, x0, sched)
    np.testing.assert_allclose(tr.residual, 0.5, atol=1e-14)


def test_goebel_random_betas_constant_residual():
    op = O.goebel_map(1.7)
    rng = np.random.default_rng(3)
    x0 = op.sample(rng)
    tr = E.halpern_run(op, x0, np.r_[0.0, rng.uniform(size=200)])
    assert np.max(np.abs(tr.residual - (1 - 1 / 1.7))) <= 1e-14


def test_banach_picard_examples():
    op = O.rotation_contraction(0.98, math.pi / 2)
    tr = E.banach_picard_run(op, X10, 100)
    n = np.arange(101)
    assert np.all(tr.residual <= 0.98**n * tr.residual[0] * (1 + 1e-12))
    v = np.array([2.0, -1.0])
    tr = E.banach_picard_run(O.affine_operator(np.zeros((2, 2)), v, 0.5), X10, 3)
    assert tr.residual[1] == 0.0
    e1 = np.eye(4)[0]
    tr = E.banach_picard_run(O.cyclic_shift(1.0, 4), e1, 20)
    np.testing.assert_array_equal(tr.residual, tr.residual[0])


def test_banach_picard_detects_misdeclared_rho():
    op = O.OperatorSpec("liar", 2, 0.5, O.NormKind.LINF, eval=lambda x: np.array([x[1], x[0]]) * 0.9)
    with pytest.raises(E.BoundViolation):
        E.banach_picard_run(op, X10, 5)


def test_domain_violation_reports_step():
    op = O.OperatorSpec("half", 1, 2.0, O.NormKind.LINF, eval=lambda x: 2 * x,
                        domain_check=lambda x: abs(x[0]) <= 3)
    with pytest.raises(O.DomainError, match="step 2"):
        E.banach_picard_run(op, np.array([1.0]), 5)


def test_schedule_validation():
    op = O.cyclic_shift(1.0, 3)
    with pytest.raises(ValueError):
        E.halpern_run(op, np.ones(3), [0.0, 1.5])
    with pytest.raises(ValueError):
        E.halpern_run(op, np.ones(3), [0.0, 0.5], n_max=4)


def test_freeze_copies_previous_iterate():
    op = O.cyclic_shift(2.0, 4)
    x0 = O.random_x0(4, 5)
    tr = E.halpern_run(op, x0, [0.0, 0.5, FREEZE, FREEZE, 0.25], keep_iterates=True)
    np.testing.assert_array_equal(tr.iterates[2], tr.iterates[1])
    np.testing.assert_array_equal(tr.iterates[3], tr.iterates[1])
    assert tr.frozen.tolist() == [False, False, True, True, False]
    assert math.isnan(tr.beta[2])
    text = tr.to_csv()
    assert "\n2,freeze," in text


@pytest.mark.parametrize("theta", [math.pi / 2, math.pi / 4])
def test_ada_sandwich_rotations(theta):
    tr = E.ada_halpern_run(O.rotation_contraction(0.98, theta), X10, 2000)
    assert len(tr) == 2001 and np.all(np.diff(tr.beta) >= 0)


def test_ada_sandwich_cyclic_expansive():
    tr = E.ada_halpern_run(O.cyclic_shift(1.5, 10), O.random_x0(10, 0), 2000)
    assert np.all(tr.R >= S.r_limit(1.5) * (1 - 1e-9))


def test_ada_switches_earlier_than_mopt():
    tr = E.ada_halpern_run(O.rotation_contraction(0.98, math.pi / 4), X10, 300)
    m = S.m_opt_schedule(0.98, 300)
    ada_switch = int(np.flatnonzero(tr.beta >= 1.0)[0])
    mopt_switch = int(np.flatnonzero(m.betas >= 1.0)[0])
    assert ada_switch < mopt_switch


def test_ada_fixed_start_converges_at_zero():
    op = O.cyclic_shift(0.9, 3)
    tr = E.ada_halpern_run(op, np.zeros(3), 50)
    assert tr.converged and len(tr) == 1 and tr.residual[0] == 0.0


def test_ada_raises_on_misdeclared_rho():
    # a map that is 1.2-Lipschitz declared as a contraction breaks the sandwich
    op = O.OperatorSpec("liar", 2, 0.5, O.NormKind.LINF, eval=lambda x: 1.2 * np.array([-x[1], x[0]]))
    with pytest.raises(E.AdaSandwichError):
        E.ada_halpern_run(op, X10, 200)


def test_kappa_hat_realism_contractions():
    for seed in range(5):
        op = O.cyclic_shift(0.8, 6)
        x0 = O.random_x0(6, seed)
        tr = E.halpern_run(op, x0, S.m_opt_schedule(0.8, 100))
        assert np.all(np.diff(tr.kappa_hat) >= 0)
        assert tr.kappa_hat[-1] <= (1 + 0.8) * op.norm(x0) + 1e-9


def test_mann_halpern_rows_equal_halpern_run():
    op = O.rotation_contraction(0.95, 0.3)
    betas = S.m_opt_schedule(0.95, 60).betas
    a = E.halpern_run(op, X10, betas)
    b = E.mann_run(op, X10, E.MannArray.halpern(betas))
    np.testing.assert_array_equal(a.residual, b.residual)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(1e-3, 1.0), min_size=1, max_size=30), st.floats(0.3, 1.7))
def test_mann_halpern_equivalence_property(tail, rho):
    betas = [0.0] + tail
    op = O.cyclic_shift(rho, 5)
    x0 = O.random_x0(5, 9)
    a = E.halpern_run(op, x0, betas)
    b = E.mann_run(op, x0, E.MannArray.halpern(betas))
    np.testing.assert_array_equal(a.residual, b.residual)


def test_mann_point_mass_is_banach_picard():
    op = O.cyclic_shift(0.9, 4)
    x0 = O.random_x0(4, 2)
    a = E.mann_run(op, x0, E.MannArray.banach_picard(20))
    b = E.banach_picard_run(op, x0, 20)
    np.testing.assert_array_equal(a.residual, b.residual)


@pytest.mark.parametrize("rho", [0.7, 1.0, 1.4])
def test_mann_uniform_rows_within_transport_bound(rho):
    N = 15
    pi = E.MannArray.uniform(N)
    table = transport.ot_bounds(rho, pi, N)
    op = O.cyclic_shift(rho, 7)
    x0 = O.random_x0(7, 4)
    tr = E.mann_run(op, x0, pi, keep_iterates="all")
    kappa = E.orbit_kappa(tr, x0, op.norm)
    assert np.all(tr.residual <= kappa * table.R * (1 + 1e-9))


def test_mann_array_validation():
    with pytest.raises(ValueError):
        E.MannArray.from_rows([[1.0], [0.6, 0.6]])
    with pytest.raises(ValueError):
        E.MannArray.from_rows([[1.0], [1.0, 0.0]])
    with pytest.raises(ValueError):
        E.MannArray.from_rows([[1.0], [0.5, 0.25, 0.25]])
    with pytest.raises(ValueError):
        E.MannArray.from_rows([[1.0], [1.5, -0.5]])


def test_check_bounds_mopt_cyclic_expansive():
    op = O.cyclic_shift(1.5, 10)
    x0 = O.random_x0(10, 11)
    sched = S.m_opt_schedule(1.5, 400)
    tr = E.halpern_run(op, x0, sched, keep_iterates="all")
    rep = E.check_bounds(tr, sched, E.orbit_kappa(tr, x0, op.norm))
    assert rep.ok and len(rep) == 401


def test_check_bounds_flat_on_l1_shift():
    rho, n = 0.8, 60
    op = O.l1_right_shift(rho, n + 2)
    x0 = np.eye(n + 2)[0]
    sched = S.flat_schedule(rho, n)
    tr = E.halpern_run(op, x0, sched)
    fb = S.flat_general_bounds(rho, sched.betas, delta0=1.0)
    rep = E.check_bounds(tr, sched, 1.0, flat=fb)
    assert rep.ok
    assert {c.name for c in rep.checks} == {"residual", "dist_fp", "anchor_gap", "step_len", "residual_flat"}


def test_check_bounds_zero_betas_and_rows():
    op = O.cyclic_shift(1.0, 3)
    x0 = np.array([1.0, -1.0, 0.5])
    s = S.halpern_recursive_bounds(1.0, np.zeros(6))
    tr = E.halpern_run(op, x0, s, keep_iterates="all")
    assert E.check_bounds(tr, list(s), E.orbit_kappa(tr, x0, op.norm)).ok


def test_check_bounds_reports_without_raising():
    op = O.cyclic_shift(1.0, 3)
    tr = E.halpern_run(op, np.array([1.0, -1.0, 0.5]), S.m_opt_schedule(1.0, 5))
    rep = E.check_bounds(tr, np.full(6, 1e-6), 1.0)
    assert not rep.ok and rep.failures[0].step == 0
    assert "failed" in rep.summary()


def test_orbit_kappa_requires_images():
    op = O.cyclic_shift(1.0, 3)
    tr = E.halpern_run(op, np.ones(3), [0.0, 0.5])
    with pytest.raises(ValueError):
        E.orbit_kappa(tr, np.ones(3), op.norm)


def test_flat_convergence_cyclic_rho2():
    rep = E.flat_convergence_check(O.cyclic_shift(2.0, 5), O.random_x0(5, 0), 500)
    assert rep.ok, rep.summary()


def test_flat_convergence_start_gap_random_starts():
    op = O.cyclic_shift(2.0, 5)
    for seed in range(100):
        rep = E.flat_convergence_check(op, O.random_x0(5, seed), 5)
        assert rep.ok, rep.summary()


def test_flat_convergence_from_limit_point():
    op = O.cyclic_shift(2.0, 5)
    # x0 = 0 is the fixed point of both T and the limit map
    rep = E.flat_convergence_check(op, np.zeros(5), 50)
    assert rep.ok


def test_flat_convergence_rejects_rho_range():
    with pytest.raises(ValueError):
        E.flat_convergence_check(O.cyclic_shift(0.9, 3), np.ones(3), 5)
    with pytest.raises(ValueError):
        E.flat_convergence_check(O.cyclic_shift(2.5, 3), np.ones(3), 5)


def test_trace_csv_format(tmp_path):
    op = O.rotation_contraction(0.98, math.pi / 2)
    tr = E.halpern_run(op, X10, S.m_opt_schedule(0.98, 3))
    tr.header = ["note"]
    path = tmp_path / "t.csv"
    text = tr.to_csv(path)
    assert path.read_text() == text
    lines = text.splitlines()
    assert lines[0] == "# note" and lines[1] == E.CSV_HEADER
    first = lines[2].split(",")
    assert first[0] == "0" and first[-1] == ""
    assert float(first[2]) == tr.residual[0]
    buf = io.StringIO()
    tr.to_csv(buf)
    assert buf.getvalue() == text


def test_trace_steps_tuple():
    op = O.l1_right_shift(0.5, 4)
    tr = E.halpern_run(op, np.eye(4)[0], [0.0, 0.5])
    n, beta, res, kap, dx0, dfp = tr.steps[1]
    assert (n, beta) == (1, 0.5) and dfp == pytest.approx(op.norm(0.5 * np.eye(4)[0] + 0.5 * 0.5 * np.eye(4)[1]))
