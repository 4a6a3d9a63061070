import numpy as np
import pytest

from corp_lab import matlib
from corp_lab.errors import AssumptionError, RankDeficiencyError


def test_vecv_basic():
    assert np.array_equal(matlib.vecv([1, 2, 3]), [1, 2, 3, 4, 6, 9])
    assert np.array_equal(matlib.vecv([1]), [1])
    assert np.array_equal(matlib.vecv([0, 0]), [0, 0, 0])


def test_vecs_and_unvecs():
    p = np.array([[1.0, 2.0], [2.0, 5.0]])
    assert np.array_equal(matlib.vecs(p), [1, 4, 5])
    assert np.array_equal(matlib.vecs(np.eye(2)), [1, 0, 1])
    assert np.array_equal(matlib.unvecs([1, 4, 5], 2), p)


def test_vecs_roundtrip_is_exact():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = rng.integers(1, 7)
        q = rng.standard_normal((n, n))
        q = q + q.T
        assert np.array_equal(matlib.unvecs(matlib.vecs(q), n), q)


def test_vecs_rejects_asymmetric():
    with pytest.raises(ValueError, match="asymmetric"):
        matlib.vecs([[1.0, 2.0], [1.0, 1.0]])


def test_duplication_small():
    assert np.array_equal(matlib.duplication(1), [[1.0]])
    m2 = matlib.duplication(2)
    assert np.array_equal(m2, [[1, 0, 0], [0, 0.5, 0], [0, 0.5, 0], [0, 0, 1]])


def test_duplication_identities():
    rng = np.random.default_rng(1)
    for n in (2, 3, 5):
        m = matlib.duplication(n)
        for _ in range(10):
            q = rng.standard_normal((n, n))
            q = q + q.T
            assert np.max(np.abs(m @ matlib.vecs(q) - matlib.vec(q))) < 1e-12
            a = rng.standard_normal(n)
            assert np.max(np.abs(np.kron(a, a) @ m - matlib.vecv(a))) < 1e-12


def test_quadratic_form_identity():
    rng = np.random.default_rng(2)
    for _ in range(30):
        n = rng.integers(1, 8)
        a = rng.standard_normal(n)
        q = rng.standard_normal((n, n))
        q = q + q.T
        lhs = a @ q @ a
        rhs = matlib.vecv(a) @ matlib.vecs(q)
        assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))


def test_kron():
    assert np.array_equal(matlib.kron(np.eye(2), [[5.0]]), np.diag([5.0, 5.0]))
    assert np.array_equal(matlib.kron([[1, 2]], [[3], [4]]), [[3, 6], [4, 8]])
    rng = np.random.default_rng(3)
    a, b, c, d = (rng.standard_normal((2, 2)) for _ in range(4))
    mixed = matlib.kron(a, b) @ matlib.kron(c, d)
    direct = matlib.kron(a @ c, b @ d)
    assert np.max(np.abs(mixed - direct)) < 1e-12


def test_lstsq():
    assert np.allclose(matlib.lstsq(np.eye(3), [1, 2, 3]), [1, 2, 3])
    assert np.allclose(matlib.lstsq([[1.0], [1.0]], [2.0, 2.0]), [2.0])
    assert np.allclose(matlib.lstsq([[1.0], [1.0]], [1.0, 3.0]), [2.0])


def test_lstsq_rank_deficiency():
    psi = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    with pytest.raises(RankDeficiencyError) as err:
        matlib.lstsq(psi, [1.0, 2.0, 3.0])
    assert err.value.achieved == 1
    assert err.value.required == 2
    with pytest.raises(ValueError, match="underdetermined"):
        matlib.lstsq(np.ones((1, 2)), [1.0])


def test_eig():
    spec = matlib.eig([[0.0, 1.0], [-1.0, 0.0]])
    assert np.allclose(sorted(spec.imag), [-1.0, 1.0], atol=1e-12)
    assert np.allclose(spec.real, 0.0, atol=1e-12)
    assert np.allclose(sorted(matlib.eig(np.diag([-1.0, -2.0])).real), [-2, -1])


def test_eig_conjugate_closed():
    rng = np.random.default_rng(4)
    for _ in range(10):
        a = rng.standard_normal((6, 6))
        spec = matlib.eig(a)
        conj = np.sort_complex(np.conj(spec))
        assert np.allclose(np.sort_complex(spec), conj, atol=1e-9)


def test_is_hurwitz():
    assert matlib.is_hurwitz(np.diag([-1.0, -2.0]))
    assert not matlib.is_hurwitz([[0.0, 1.0], [-1.0, 0.0]])
    assert not matlib.is_hurwitz(np.diag([-1.0, -2.0]), margin=1.5)


def test_solve_lyapunov():
    assert np.allclose(matlib.solve_lyapunov([[-1.0]], [[1.0]]), [[0.5]])
    p = matlib.solve_lyapunov(np.diag([-1.0, -2.0]), np.eye(2))
    assert np.allclose(p, np.diag([0.5, 0.25]))


def test_solve_lyapunov_random_residual():
    rng = np.random.default_rng(5)
    for _ in range(10):
        n = rng.integers(2, 7)
        a = rng.standard_normal((n, n)) - (2.0 + n) * np.eye(n)
        q = rng.standard_normal((n, n))
        q = q @ q.T + np.eye(n)
        p = matlib.solve_lyapunov(a, q)
        residual = np.linalg.norm(a.T @ p + p @ a + q)
        assert residual < 1e-9 * (1.0 + np.linalg.norm(q))
        assert np.array_equal(p, p.T)


def test_solve_lyapunov_requires_hurwitz():
    with pytest.raises(AssumptionError):
        matlib.solve_lyapunov([[1.0]], [[1.0]])


def test_rank_tol():
    assert matlib.rank_tol(np.eye(3))[0] == 3
    rank, gap = matlib.rank_tol([[1.0, 2.0], [2.0, 4.0]])
    assert rank == 1
    assert gap == np.inf or gap > 1e6
    assert matlib.rank_tol(np.zeros((3, 3)))[0] == 0
