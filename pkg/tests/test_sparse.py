import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tumorfem.errors import InvalidOperator, NumericalBreakdown, ShapeError
from tumorfem.sparse import Pattern, cg_solve, diags, from_triplets, identity, matvec


def _random_spd(rng, n, density=0.3):
    B = rng.normal(size=(n, n)) * (rng.random((n, n)) < density)
    return B @ B.T + n * np.eye(n)


def _csr(dense):
    r, c = np.nonzero(dense)
    return from_triplets(r, c, dense[r, c], dense.shape)


def test_triplets_sum_duplicates():
    A = from_triplets([0, 0, 1, 0], [1, 1, 0, 0], [1.0, 2.0, 5.0, 4.0], (2, 2))
    np.testing.assert_array_equal(A.to_dense(), [[4.0, 3.0], [5.0, 0.0]])
    assert A.nnz == 3


def test_pattern_reassembly_is_deterministic(rng):
    rows = rng.integers(0, 6, 50)
    cols = rng.integers(0, 6, 50)
    p = Pattern(rows, cols, (6, 6))
    vals = rng.normal(size=50)
    a, b = p.assemble(vals), p.assemble(vals)
    np.testing.assert_array_equal(a.values, b.values)
    dense = np.zeros((6, 6))
    np.add.at(dense, (rows, cols), vals)
    np.testing.assert_allclose(a.to_dense(), dense, atol=1e-14)


def test_matvec_and_shape_error(rng):
    D = _random_spd(rng, 7)
    A = _csr(D)
    x = rng.normal(size=7)
    np.testing.assert_allclose(matvec(A, x), D @ x)
    np.testing.assert_allclose(A @ x, D @ x)
    with pytest.raises(ShapeError):
        matvec(A, np.ones(6))


def test_matrix_algebra(rng):
    D = _random_spd(rng, 5)
    A = _csr(D)
    np.testing.assert_allclose((A + identity(5)).to_dense(), D + np.eye(5))
    np.testing.assert_allclose((2.0 * A).to_dense(), 2 * D)
    np.testing.assert_allclose(A.add_diagonal(np.arange(5.0)).to_dense(), D + np.diag(np.arange(5.0)))
    np.testing.assert_allclose(A.diagonal(), np.diag(D))
    np.testing.assert_allclose(diags([1.0, 2.0]).to_dense(), np.diag([1.0, 2.0]))
    keep = np.array([0, 2, 4])
    np.testing.assert_allclose(A.submatrix(keep).to_dense(), D[np.ix_(keep, keep)])


def test_cg_two_by_two():
    A = from_triplets([0, 0, 1, 1], [0, 1, 0, 1], [4.0, 1.0, 1.0, 3.0], (2, 2))
    x, report = cg_solve(A, np.array([1.0, 2.0]), tol=1e-14)
    np.testing.assert_allclose(x, [1 / 11, 7 / 11], rtol=1e-12)
    assert report.converged
    assert report.iterations <= 2


def test_cg_zero_rhs():
    x, report = cg_solve(identity(4), np.zeros(4))
    assert report.iterations == 0 and report.converged
    np.testing.assert_array_equal(x, 0.0)


def test_cg_rejects_nonsymmetric():
    A = from_triplets([0, 0, 1, 1], [0, 1, 0, 1], [2.0, 1.0, 0.0, 2.0], (2, 2))
    with pytest.raises(InvalidOperator):
        cg_solve(A, np.ones(2))


def test_cg_rejects_indefinite():
    with pytest.raises(InvalidOperator):
        cg_solve(diags([1.0, -1.0]), np.ones(2))
    A = from_triplets([0, 0, 1, 1], [0, 1, 0, 1], [1.0, 3.0, 3.0, 1.0], (2, 2))
    with pytest.raises(InvalidOperator):
        cg_solve(A, np.array([1.0, -1.0]))


def test_cg_nan():
    with pytest.raises(NumericalBreakdown):
        cg_solve(identity(3), np.array([1.0, np.nan, 0.0]))


def test_cg_reports_unconverged(rng):
    D = _random_spd(rng, 30, density=0.8)
    _, report = cg_solve(_csr(D), rng.normal(size=30), tol=1e-14, max_iter=2)
    assert not report.converged
    assert report.iterations == 2


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 25), seed=st.integers(0, 2**31 - 1))
def test_cg_matches_dense_solve(n, seed):
    rng = np.random.default_rng(seed)
    D = _random_spd(rng, n)
    b = rng.normal(size=n)
    x, report = cg_solve(_csr(D), b, tol=1e-12)
    assert report.converged
    assert np.linalg.norm(D @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_asymmetry_measure():
    A = from_triplets([0, 1], [1, 0], [1.0, 1.0 + 1e-6], (2, 2))
    assert A.asymmetry() == pytest.approx(1e-6, rel=1e-3)
    assert not A.is_symmetric()
