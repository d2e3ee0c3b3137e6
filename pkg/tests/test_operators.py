import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from halpern import affine, engine
from halpern import operators as O

vec = arrays(np.float64, 6, elements=st.floats(-1e3, 1e3, allow_nan=False))
scalar = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(vec, vec, scalar, st.sampled_from(list(O.NormKind)))
def test_norm_axioms(x, y, a, norm):
    assert norm(x + y) <= norm(x) + norm(y) + 1e-9 * (1 + norm(x) + norm(y))
    assert norm(a * x) == pytest.approx(abs(a) * norm(x), rel=1e-12, abs=1e-12)
    assert norm(x) >= 0
    assert (norm(x) == 0) == (not np.any(x))


def test_operator_norms():
    A = np.array([[1.0, -2.0], [3.0, 0.5]])
    assert O.NormKind.LINF.operator_norm(A) == 3.5
    assert O.NormKind.L1.operator_norm(A) == 4.0
    assert O.NormKind.L2.operator_norm(A) == pytest.approx(np.linalg.svd(A)[1][0])


def test_rotation_examples():
    op = O.rotation_contraction(0.98, math.pi / 2)
    np.testing.assert_allclose(op(np.array([1.0, 0.0])), [0.0, 0.98], atol=1e-15)
    ident = O.rotation_contraction(1.0, 0.0)
    x = np.array([0.3, -0.7])
    np.testing.assert_array_equal(ident(x), x)
    op = O.rotation_contraction(0.98, math.pi / 4)
    M = np.column_stack([op(np.array([1.0, 0.0])), op(np.array([0.0, 1.0]))])
    assert np.linalg.norm(M, 2) == pytest.approx(0.98 / math.sqrt(2), rel=1e-12)
    assert O.NormKind.LINF.operator_norm(M) == pytest.approx(0.98, rel=1e-12)
    np.testing.assert_array_equal(op.fixed_point, [0.0, 0.0])
    with pytest.raises(ValueError):
        O.rotation_contraction(0.9, math.inf)


def test_cyclic_examples():
    op = O.cyclic_shift(0.98, 3)
    np.testing.assert_allclose(op(np.array([1.0, 2.0, 3.0])), 0.98 * np.array([3.0, 1.0, 2.0]), rtol=1e-15)
    op = O.cyclic_shift(2.0, 2)
    rng = np.random.default_rng(1)
    for _ in range(50):
        x = rng.normal(size=2)
        assert op.norm(op(x)) == 2 * op.norm(x)
    assert O.cyclic_shift(0.98, 4, "l1").norm is O.NormKind.L1
    with pytest.raises(ValueError):
        O.cyclic_shift(0.98, 1)


def test_goebel_examples():
    op = O.goebel_map(2.0, 11)
    t = np.linspace(0.0, 1.0, 11)
    np.testing.assert_allclose(op(t), 2 * np.maximum(t - 0.5, 0), atol=1e-15)
    assert op.residual(t) == 0.5
    assert op.diameter == 1.0
    x = op.sample(np.random.default_rng(0))
    tx = op(x)
    assert tx[0] == 0.0 and tx[-1] == 1.0
    with pytest.raises(O.DomainError):
        op(np.full(11, 0.5))
    with pytest.raises(ValueError):
        O.goebel_map(1.0)


@pytest.mark.parametrize("rho", [1.1, 1.5, 2.0, 3.7])
def test_goebel_residual_exact_on_random_points(rho):
    op = O.goebel_map(rho)
    rng = np.random.default_rng(7)
    for _ in range(100):
        x = op.sample(rng)
        assert abs(op.residual(x) - (1 - 1 / rho)) <= 1e-14


def test_l1_shift_examples():
    op = O.l1_right_shift(0.5, 3)
    np.testing.assert_array_equal(op(np.array([1.0, 0.0, 0.0])), [0.0, 0.5, 0.0])
    e0 = np.zeros(6)
    e0[0] = 1.0
    assert op.norm is O.NormKind.L1
    assert O.l1_right_shift(0.7, 6).norm(e0 - O.l1_right_shift(0.7, 6).fixed_point) == 1.0


def test_affine_operator_examples():
    v = np.array([0.3, -2.0])
    op = O.affine_operator(np.zeros((2, 2)), v, 0.5)
    np.testing.assert_array_equal(op.fixed_point, v)
    P = np.roll(np.eye(4), 1, axis=0)
    cyc, aff = O.cyclic_shift(0.9, 4), O.affine_operator(0.9 * P, np.zeros(4), 0.9)
    x = np.arange(4.0)
    np.testing.assert_allclose(cyc(x), aff(x), rtol=1e-15)
    with pytest.raises(O.LipschitzAuditError):
        O.affine_operator(np.eye(2), np.zeros(2), 0.5)
    assert O.affine_operator(np.eye(2), np.ones(2), 1.0).fixed_point is None
    with pytest.raises(ValueError):
        O.affine_operator(np.eye(2), np.ones(3), 1.0)


@pytest.mark.parametrize("make", [
    lambda: O.rotation_contraction(0.98, math.pi / 2),
    lambda: O.rotation_contraction(0.98, math.pi / 4),
    lambda: O.rotation_contraction(0.7, 1.0),
    lambda: O.cyclic_shift(1.5, 10),
    lambda: O.cyclic_shift(0.98, 7, "l1"),
    lambda: O.goebel_map(2.0),
    lambda: O.l1_right_shift(0.8, 12),
    lambda: O.affine_operator([[0.2, -0.3], [0.1, 0.4]], [1.0, 2.0], 0.5),
])
def test_lipschitz_audit_builtins(make):
    op = make()
    assert O.lipschitz_audit(op, 10_000) <= op.rho * (1 + 1e-12)
    if op.fixed_point is not None:
        assert op.norm(op(op.fixed_point) - op.fixed_point) <= 1e-9


def test_lipschitz_audit_catches_misdeclared_rho():
    bad = O.OperatorSpec("bad", 2, 0.5, O.NormKind.LINF, eval=lambda x: 2.0 * x)
    with pytest.raises(O.LipschitzAuditError):
        O.lipschitz_audit(bad, 10)


def test_shape_is_checked():
    with pytest.raises(O.DomainError):
        O.cyclic_shift(1.0, 3)(np.zeros(4))


def test_random_x0_reproducible():
    a, b = O.random_x0(100, 42), O.random_x0(100, 42)
    np.testing.assert_array_equal(a, b)
    assert np.all(np.abs(a) <= 1) and not np.array_equal(a, O.random_x0(100, 43))


def test_sign_init_endpoints_and_zero_convention():
    betas = [0.0, 1.0, 1.0, 1.0]
    x0 = O.sign_init_x0(1.0, betas, 3)
    assert x0[0] == -1 and x0[-1] == 1 and O.NormKind.LINF(x0) == 1
    # coefficients vanish in the interior for betas = 1, so sign(0) gives +1
    assert np.all(x0[1:-1] == 1.0)


@pytest.mark.parametrize("n", [1, 2, 5, 10, 25])
def test_sign_init_attains_affine_bound(n):
    betas = np.array([i / (i + 1) for i in range(n + 1)])
    rho = 1.0
    op = O.cyclic_shift(rho, n + 2)
    x0 = O.sign_init_x0(rho, betas, n)
    tr = engine.halpern_run(op, x0, betas, n)
    assert tr.residual[n] == pytest.approx(affine.affine_residual_bound(rho, betas, n), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.2, 1.8), st.integers(1, 20), st.data())
def test_sign_init_attains_affine_bound_random(rho, n, data):
    tail = data.draw(st.lists(st.floats(0.0, 1.0), min_size=n, max_size=n))
    betas = np.array([0.0] + tail)
    op = O.cyclic_shift(rho, n + 2)
    tr = engine.halpern_run(op, O.sign_init_x0(rho, betas, n), betas, n)
    assert tr.residual[n] == pytest.approx(affine.affine_residual_bound(rho, betas, n), abs=1e-12, rel=1e-12)
