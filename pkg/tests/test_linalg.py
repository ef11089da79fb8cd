import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from deimkit._constants import EPS
from deimkit.exceptions import NonFiniteError, SingularMatrixError
from deimkit.linalg import (
    IceState,
    haar_orthonormal,
    ice_append,
    qr_column_pivoted,
    smallest_singular_value,
    solve_upper_triangular,
    thin_svd,
)


def check_factor(A, f, pivots=True):
    m, n = A.shape
    R = f.r_factor
    assert np.allclose(np.tril(R[:, : min(m, n)], -1), 0.0)
    recon = f.apply_q(np.vstack([R, np.zeros((m - R.shape[0], n))]) if R.shape[0] < m else R)
    assert np.linalg.norm(A[:, f.perm] - recon) <= 50 * n * EPS * max(np.linalg.norm(A), 1e-300)
    if pivots:
        d = np.abs(np.diag(R))
        assert np.all(d[:-1] >= d[1:] * (1 - 1e-12))
        k = min(m, n)
        for i in range(k):
            tail = np.sum(R[i : k, i:] ** 2, axis=0)
            assert np.all(R[i, i] ** 2 >= tail * (1 - 8 * EPS) - 8 * EPS * R[i, i] ** 2)


class TestQr:
    def test_identity(self):
        f = qr_column_pivoted(np.eye(3))
        assert list(f.perm) == [0, 1, 2]
        assert np.allclose(np.abs(f.r_factor), np.eye(3))

    def test_forced_pivot(self):
        f = qr_column_pivoted(np.array([[0.0, 2.0], [0.0, 0.0]]))
        assert f.perm[0] == 1
        assert abs(f.r_factor[0, 0]) == 2.0

    def test_row_orthonormal_input(self):
        W = haar_orthonormal(200, 20, 3).T
        f = qr_column_pivoted(W)
        R = f.r_factor
        assert np.abs(R @ R.T - np.eye(20)).max() < 1e-12
        assert np.abs(np.diag(R)).min() >= 1 / np.sqrt(181) - 1e-12
        check_factor(W, f)

    @pytest.mark.parametrize("shape", [(5, 9), (9, 5), (7, 7), (1, 4), (4, 1)])
    def test_random_shapes(self, shape):
        A = np.random.default_rng(0).standard_normal(shape)
        check_factor(A, qr_column_pivoted(A))

    def test_kahan_like(self):
        m, th = 12, 1.2
        s, c = np.sin(th), np.cos(th)
        K = np.diag(s ** np.arange(m)) @ (np.eye(m) + np.triu(-c * np.ones((m, m)), 1))
        check_factor(K, qr_column_pivoted(K))

    def test_rank_deficient(self):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((8, 3)) @ rng.standard_normal((3, 10))
        f = qr_column_pivoted(A)
        d = np.abs(np.diag(f.r_factor))
        assert d[3] < 1e-13 * d[0]
        check_factor(A, f)

    def test_tie_breaks_to_smallest_index(self):
        A = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        assert qr_column_pivoted(A).perm[0] == 0

    def test_unpivoted(self):
        A = np.random.default_rng(2).standard_normal((6, 4))
        f = qr_column_pivoted(A, pivoting=False)
        assert list(f.perm) == [0, 1, 2, 3]
        check_factor(A, f, pivots=False)

    def test_q_orthonormal(self):
        A = np.random.default_rng(3).standard_normal((6, 10))
        Q = qr_column_pivoted(A).q()
        assert np.abs(Q.T @ Q - np.eye(Q.shape[1])).max() < 1e-14

    def test_rejects_nonfinite(self):
        with pytest.raises(NonFiniteError):
            qr_column_pivoted(np.array([[1.0, np.nan]]))

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 8)),
                  elements=st.floats(-1e3, 1e3, allow_subnormal=False)))
    def test_property_invariants(self, A):
        check_factor(A, qr_column_pivoted(A))


class TestTriangular:
    def test_identity(self):
        B = np.arange(6.0).reshape(3, 2)
        assert np.array_equal(solve_upper_triangular(np.eye(3), B), B)

    def test_hand_solve(self):
        X = solve_upper_triangular(np.array([[2.0, 1.0], [0.0, 1.0]]), np.array([[3.0], [1.0]]))
        assert np.allclose(X, [[1.0], [1.0]])

    def test_random_vs_inverse(self):
        rng = np.random.default_rng(4)
        T = np.triu(rng.standard_normal((30, 30))) + 5 * np.eye(30)
        B = rng.standard_normal((30, 3))
        X = solve_upper_triangular(T, B)
        Tinv = solve_upper_triangular(T, np.eye(30))
        assert np.linalg.norm(X - Tinv @ B) / np.linalg.norm(X) <= 1e-12

    def test_zero_diagonal(self):
        T = np.array([[1.0, 2.0], [0.0, 0.0]])
        with pytest.raises(SingularMatrixError) as exc:
            solve_upper_triangular(T, np.ones(2))
        assert exc.value.index == 1


def check_svd(A, Z, s, Y):
    k = min(A.shape)
    assert Z.shape == (A.shape[0], k) and Y.shape == (A.shape[1], k)
    assert np.abs(Z.T @ Z - np.eye(k)).max() < 1e-12
    assert np.abs(Y.T @ Y - np.eye(k)).max() < 1e-12
    assert np.all(s >= 0) and np.all(np.diff(s) <= 0)
    assert np.linalg.norm(A - (Z * s) @ Y.T) <= 100 * k * EPS * max(np.linalg.norm(A), 1e-300)


class TestSvd:
    def test_diag(self):
        Z, s, Y = thin_svd(np.diag([3.0, 1.0]))
        assert np.allclose(s, [3, 1])
        assert np.allclose(np.abs(Z), np.eye(2)) and np.allclose(np.abs(Y), np.eye(2))

    def test_rank_one(self):
        u, v = np.array([1.0, 2.0, 2.0]), np.array([3.0, 4.0])
        Z, s, Y = thin_svd(np.outer(u, v))
        assert s[0] == pytest.approx(15.0, rel=1e-14)
        assert abs(s[1]) < 1e-14
        check_svd(np.outer(u, v), Z, s, Y)

    def test_energy_identity(self):
        A = np.random.default_rng(5).standard_normal((50, 20))
        Z, s, Y = thin_svd(A)
        assert np.sum(s**2) == pytest.approx(np.linalg.norm(A) ** 2, rel=1e-10)
        assert np.allclose(s, np.linalg.svd(A, compute_uv=False), rtol=1e-12)
        check_svd(A, Z, s, Y)

    @pytest.mark.parametrize("deflate", [True, False])
    @pytest.mark.parametrize("shape", [(30, 60), (1, 5), (5, 1), (4, 3)])
    def test_shapes(self, shape, deflate):
        A = np.random.default_rng(6).standard_normal(shape)
        check_svd(A, *thin_svd(A, deflate=deflate))

    def test_zero_and_low_rank(self):
        check_svd(np.zeros((4, 3)), *thin_svd(np.zeros((4, 3))))
        rng = np.random.default_rng(7)
        A = rng.standard_normal((40, 5)) @ rng.standard_normal((5, 25))
        for deflate in (True, False):
            Z, s, Y = thin_svd(A, deflate=deflate)
            check_svd(A, Z, s, Y)
            assert s[5] < 1e-13 * s[0]

    @settings(max_examples=30, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 7), st.integers(1, 7)),
                  elements=st.floats(-1e2, 1e2, allow_subnormal=False)))
    def test_property(self, A):
        check_svd(A, *thin_svd(A))


class TestSmallestSingularValue:
    def test_simple(self):
        assert smallest_singular_value(np.eye(4)) == pytest.approx(1.0, abs=1e-15)
        assert smallest_singular_value(np.diag([5.0, 0.2])) == pytest.approx(0.2, rel=1e-14)

    def test_kahan_two_paths(self):
        m, th = 10, 1.2
        s, c = np.sin(th), np.cos(th)
        K = np.diag(s ** np.arange(m)) @ (np.eye(m) + np.triu(-c * np.ones((m, m)), 1))
        T = qr_column_pivoted(K).r_factor
        a = smallest_singular_value(T)
        b = thin_svd(T.T, deflate=False)[1][-1]
        assert abs(a - b) <= 1e-12 * max(a, 1e-300) + 1e-300
        assert a == pytest.approx(np.linalg.svd(T, compute_uv=False)[-1], rel=1e-8)


def ice_run(T):
    st_ = IceState(0, np.zeros(0), np.zeros(0), 0.0)
    gammas = []
    for j in range(T.shape[0]):
        st_ = ice_append(st_, T[:j, j], T[j, j])
        gammas.append(st_.gamma)
    return st_, np.array(gammas)


class TestIce:
    def test_identity(self):
        _, g = ice_run(np.eye(6))
        assert np.allclose(g, 1.0)

    def test_diagonal_exact(self):
        st_, _ = ice_run(np.diag([1.0, 1e-3]))
        assert st_.gamma >= 1000 * (1 - 1e-12)

    def test_zero_diagonal(self):
        st_ = ice_append(IceState(0, np.zeros(0), np.zeros(0), 0.0), np.zeros(0), 2.0)
        with pytest.raises(SingularMatrixError):
            ice_append(st_, np.ones(1), 0.0)

    def test_factor_ten_contract(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            T = qr_column_pivoted(rng.standard_normal((40, 40))).r_factor
            st_, g = ice_run(T)
            true = 1.0 / smallest_singular_value(T)
            assert true / 10 <= st_.gamma <= true * (1 + 1e-12)
            assert np.all(np.diff(g) >= 0)
            # the left vector realizes the estimate
            assert np.linalg.norm(st_.approx_left_vector) == pytest.approx(1.0, rel=1e-12)
            z = solve_upper_triangular(T.T[::-1, ::-1], st_.approx_left_vector[::-1])[::-1]
            assert np.linalg.norm(z) == pytest.approx(st_.gamma, rel=1e-8)


class TestHaar:
    def test_one_by_one(self):
        # Haar on O(1) puts equal mass on +1 and -1
        vals = {haar_orthonormal(1, 1, s)[0, 0] for s in range(20)}
        assert vals == {1.0, -1.0}

    def test_orthonormal(self):
        U = haar_orthonormal(100, 10, 42)
        assert np.abs(U.T @ U - np.eye(10)).max() <= 1e-13
        assert np.array_equal(U, haar_orthonormal(100, 10, 42))

    def test_seeds_differ(self):
        from deimkit.selection import qdeim_select

        sels = {tuple(qdeim_select(haar_orthonormal(50, 5, s)).indices) for s in range(5)}
        assert len(sels) > 1

    def test_rejects_wide(self):
        with pytest.raises(ValueError):
            haar_orthonormal(3, 4, 0)
