import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse.linalg import LinearOperator

from saddlebounds.errors import DimensionCap, NoConvergence, NotPositiveDefinite, ShapeMismatch
from saddlebounds.linalg import (
    LDLFactor,
    cholesky,
    extremal_eigs,
    gen_eig_extremes,
    lanczos,
    minres,
    spectrum_edges,
    sym_eig,
    tridiag_eig,
)
from saddlebounds.config import Tolerances


def random_spd(rng, n, cond=100.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = np.geomspace(1.0, cond, n)
    return (Q * w) @ Q.T


def test_cholesky_examples():
    np.testing.assert_array_equal(cholesky(np.eye(3)).L, np.eye(3))
    L = cholesky([[4.0, 2.0], [2.0, 3.0]]).L
    np.testing.assert_allclose(L, [[2, 0], [1, np.sqrt(2)]], atol=1e-15)
    with pytest.raises(NotPositiveDefinite):
        cholesky([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ShapeMismatch):
        cholesky(np.ones((2, 3)))


def test_cholesky_pivot_floor():
    m = np.diag([1.0, 1e-16])
    with pytest.raises(NotPositiveDefinite):
        cholesky(m)
    cholesky(m, Tolerances(pivot_rel=1e-18))


@given(st.integers(1, 200), st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_cholesky_round_trip(n, seed):
    m = random_spd(np.random.default_rng(seed), n)
    f = cholesky(m)
    assert np.linalg.norm(f.reconstruct() - m) <= 1e-12 * np.linalg.norm(m)
    b = np.arange(n, dtype=float)
    np.testing.assert_allclose(m @ f.solve(b), b, atol=1e-9 * np.linalg.norm(b) + 1e-12)


def test_sym_eig_examples(rng):
    np.testing.assert_allclose(sym_eig(np.diag([3.0, 1.0, 2.0]), vectors=False), [1, 2, 3])
    T = np.diag(np.ones(3), 1) + np.diag(np.ones(3), -1)
    np.testing.assert_allclose(
        sym_eig(T, vectors=False), [-1.618034, -0.618034, 0.618034, 1.618034], atol=1e-6
    )
    a = rng.standard_normal((30, 30))
    a = a + a.T
    w, V = sym_eig(a)
    assert abs(w.sum() - np.trace(a)) <= 1e-10 * np.abs(w).sum()
    np.testing.assert_allclose(V.T @ V, np.eye(30), atol=1e-12)
    with pytest.raises(DimensionCap):
        sym_eig(np.eye(5), tol=Tolerances(dense_cap=4))


def test_tridiag_eig_examples():
    np.testing.assert_allclose(tridiag_eig([-1, 0], [1]), [-1.618034, 0.618034], atol=1e-6)
    np.testing.assert_allclose(tridiag_eig([2.5], []), [2.5])
    for k in (2, 5, 9):
        j = np.arange(1, k + 1)
        expect = np.sort(2 * np.cos(j * np.pi / (k + 1)))
        got = tridiag_eig(np.zeros(k), np.ones(k - 1))
        np.testing.assert_allclose(got, expect, atol=1e-12)
        T = np.diag(np.ones(k - 1), 1) + np.diag(np.ones(k - 1), -1)
        np.testing.assert_allclose(got, sym_eig(T, vectors=False), atol=1e-12)
    with pytest.raises(ShapeMismatch):
        tridiag_eig([1, 2], [1, 2])


def test_gen_eig_extremes_examples(rng):
    s = random_spd(rng, 6)
    assert gen_eig_extremes(s, s) == pytest.approx((1, 1), abs=1e-12)
    assert gen_eig_extremes(2 * s, s) == pytest.approx((2, 2), abs=1e-12)
    assert gen_eig_extremes(np.diag([1.0, 4.0]), np.diag([1.0, 2.0])) == pytest.approx((1, 2))


@given(st.integers(1, 40), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_ldl_inertia_matches_eigenvalues(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    a = a + a.T
    w = np.linalg.eigvalsh(a)
    f = LDLFactor(a)
    pos, neg, zero = f.inertia()
    assert (pos, neg, zero) == (int(np.sum(w > 0)), int(np.sum(w < 0)), 0)
    b = rng.standard_normal(n)
    np.testing.assert_allclose(a @ f.solve(b), b, atol=1e-8 * np.linalg.cond(a))


def test_extremal_eigs_examples(rng):
    d = np.arange(1.0, 11.0)
    op = LinearOperator((10, 10), matvec=lambda v: d * v, dtype=float)
    assert extremal_eigs(op, "largest") == pytest.approx(10.0)
    assert extremal_eigs(op, "both") == pytest.approx((1.0, 10.0))
    assert extremal_eigs(np.diag(d), "smallest") == 1.0

    m = random_spd(rng, 200, cond=50.0)
    w = np.linalg.eigvalsh(m)
    op = LinearOperator(m.shape, matvec=lambda v: m @ v, dtype=float)
    lo, hi = extremal_eigs(op, "both")
    assert lo == pytest.approx(w[0], rel=1e-8)
    assert hi == pytest.approx(w[-1], rel=1e-8)
    with pytest.raises(ValueError):
        extremal_eigs(op, "middle")


def test_extremal_eigs_reports_no_convergence(rng):
    m = np.diag(np.linspace(1, 2, 500) ** 8)
    op = LinearOperator(m.shape, matvec=lambda v: m @ v, dtype=float)
    with pytest.raises(NoConvergence) as exc:
        extremal_eigs(op, "smallest", max_dim=5)
    assert exc.value.estimate is not None and exc.value.estimate >= 1.0


def test_lanczos_inner_product_gives_preconditioned_spectrum(rng):
    n = 60
    a = rng.standard_normal((n, n))
    a = a + a.T
    p = random_spd(rng, n)
    pinv = np.linalg.inv(p)
    r = lanczos(a, max_dim=n, inner=pinv)
    w = np.sort(np.linalg.eigvals(pinv @ a).real)
    assert r.ritz[0] == pytest.approx(w[0], rel=1e-8)
    assert r.ritz[-1] == pytest.approx(w[-1], rel=1e-8)


def test_spectrum_edges_indefinite(rng):
    d = np.r_[-np.linspace(1, 2, 40), np.linspace(0.5, 3, 40)]
    Q, _ = np.linalg.qr(rng.standard_normal((80, 80)))
    a = (Q * d) @ Q.T
    e, _ = spectrum_edges(a, max_dim=80)
    assert e == pytest.approx((-2, -1, 0.5, 3), abs=1e-8)


def test_minres_examples(rng):
    b = rng.standard_normal(7)
    r = minres(np.eye(7), b, precond=np.eye(7))
    assert r.iterations == 1 and r.converged
    np.testing.assert_allclose(r.solution, b)

    r = minres(np.diag([1.0, -1.0]), np.array([1.0, 1.0]))
    np.testing.assert_allclose(r.solution, [1, -1], atol=1e-12)

    Q, _ = np.linalg.qr(rng.standard_normal((50, 50)))
    d = np.r_[-np.linspace(1, 5, 25), np.linspace(1, 5, 25)]
    a = (Q * d) @ Q.T
    b = rng.standard_normal(50)
    r = minres(a, b, rel_tol=1e-10)
    assert r.converged
    assert np.linalg.norm(b - a @ r.solution) <= 1e-10 * np.linalg.norm(b)
    x = np.linalg.solve(a, b)
    np.testing.assert_allclose(r.solution, x, atol=1e-8 * np.linalg.norm(x))


def test_minres_preconditioned_and_stopping_norms(rng):
    n = 80
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    d = np.r_[-np.geomspace(1, 1e3, 40), np.geomspace(1, 1e3, 40)]
    a = (Q * d) @ Q.T
    # |A| up to a modest SPD perturbation
    p = (Q * np.abs(d)) @ Q.T + random_spd(rng, n, cond=10.0)
    pinv = np.linalg.inv(p)
    b = rng.standard_normal(n)
    true = minres(a, b, precond=pinv, rel_tol=1e-10, max_iter=500)
    pre = minres(a, b, precond=pinv, rel_tol=1e-10, max_iter=500, stopping_norm="preconditioned")
    assert true.converged and pre.converged
    assert true.true_relative_residual <= 1e-10
    assert true.relative_residuals[0] == 1.0
    assert np.all(np.diff(pre.preconditioned_residuals) <= 1e-12)
    with pytest.raises(ValueError):
        minres(a, b, stopping_norm="other")
    with pytest.raises(ShapeMismatch):
        minres(a, b[:-1])


def test_minres_max_iter_flag(rng):
    a = np.diag(np.linspace(-1, 1, 101) + 1e-3)
    r = minres(a, np.ones(101), max_iter=3)
    assert not r.converged and r.iterations == 3
