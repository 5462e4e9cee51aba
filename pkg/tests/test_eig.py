import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from robinstrip import (
    SingularShift,
    SymmetricBandedMatrix,
    banded_inertia,
    factorize_shifted,
    shift_inertia,
    smallest_eigenpairs,
)
from robinstrip.eig import _ldlt_inertia_numpy


def dirichlet_tridiagonal(n: int, h: float) -> SymmetricBandedMatrix:
    """Central-difference Dirichlet Laplacian on n interior points."""
    band = np.zeros((2, n))
    band[0] = 2.0 / h**2
    band[1, :-1] = -1.0 / h**2
    return SymmetricBandedMatrix(band)


def identity_banded(n: int) -> SymmetricBandedMatrix:
    band = np.ones((1, n))
    return SymmetricBandedMatrix(band)


def random_banded(rng, n: int, bw: int) -> SymmetricBandedMatrix:
    dense = np.zeros((n, n))
    for i in range(n):
        for j in range(max(0, i - bw), i + 1):
            dense[i, j] = dense[j, i] = rng.normal()
    return SymmetricBandedMatrix.from_dense(dense)


class TestBandedStorage:
    def test_roundtrip_dense(self):
        rng = np.random.default_rng(0)
        m = random_banded(rng, 12, 3)
        dense = m.to_dense()
        again = SymmetricBandedMatrix.from_dense(dense)
        assert np.allclose(again.to_dense(), dense)
        assert np.allclose(dense, dense.T)

    def test_from_coo_matches_dense(self):
        # both triangles supplied, duplicates summing as in FEM scatter
        rows = [0, 1, 2, 1, 0, 2, 1, 1]
        cols = [0, 1, 2, 0, 1, 1, 2, 1]
        vals = [2.0, 1.0, 2.0, -1.0, -1.0, -1.0, -1.0, 1.0]
        m = SymmetricBandedMatrix.from_coo(rows, cols, vals, 3)
        expect = np.array([[2, -1, 0], [-1, 2, -1], [0, -1, 2.0]])
        assert np.allclose(m.to_dense(), expect)
        assert np.allclose(m.to_sparse().toarray(), expect)

    def test_from_coo_lower_only(self):
        rows = [0, 1, 2, 1, 2]
        cols = [0, 1, 2, 0, 1]
        vals = [2.0, 2.0, 2.0, -1.0, -1.0]
        m = SymmetricBandedMatrix.from_coo(rows, cols, vals, 3)
        expect = np.array([[2, -1, 0], [-1, 2, -1], [0, -1, 2.0]])
        assert np.allclose(m.to_dense(), expect)
        assert np.allclose(m.to_sparse().toarray(), expect)

    def test_from_coo_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            SymmetricBandedMatrix.from_coo([0, 1], [1, 1], [5.0, 1.0], 2)

    def test_bandwidth_invariant(self):
        with pytest.raises(ValueError):
            SymmetricBandedMatrix(np.ones((4, 3)))

    def test_triplet_dump(self, tmp_path):
        m = dirichlet_tridiagonal(4, 1.0)
        path = tmp_path / "mat.txt"
        m.dump_triplets(path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 4 + 2 * 3  # diagonal plus both off-diagonals
        i, j, v = lines[0].split()
        assert float(v) != 0.0


class TestInertia:
    def test_trivial_diagonals(self):
        a = SymmetricBandedMatrix(np.array([[1.0, 2.0]]))
        m = identity_banded(2)
        assert factorize_shifted(a, m, 0.0).inertia == 0
        b = SymmetricBandedMatrix(np.array([[-1.0, 2.0]]))
        assert factorize_shifted(b, m, 0.0).inertia == 1

    @pytest.mark.parametrize("seed", range(6))
    def test_random_counts_match_eigvalsh(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 40))
        bw = int(rng.integers(1, min(n - 1, 6)))
        a = random_banded(rng, n, bw)
        shift = float(rng.normal())
        expected = int(np.sum(np.linalg.eigvalsh(a.to_dense()) < shift))
        got = shift_inertia(a, identity_banded(n), shift)
        assert got == expected

    def test_numpy_fallback_agrees(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            n = int(rng.integers(4, 30))
            bw = int(rng.integers(1, min(n - 1, 5)))
            a = random_banded(rng, n, bw)
            band = a.band
            scale = float(np.max(np.abs(band)))
            neg_np, _ = _ldlt_inertia_numpy(band, 1e-14, scale)
            assert neg_np == banded_inertia(band)

    def test_singular_shift_detected(self):
        a = SymmetricBandedMatrix(np.array([[1.0, 1.0]]))
        with pytest.raises(SingularShift):
            banded_inertia(np.array([[0.0, 1.0]]))
        # factorize at an exact eigenvalue must report the singularity
        with pytest.raises(SingularShift):
            factorize_shifted(a, identity_banded(2), 1.0)

    def test_inertia_consistency_with_returned_pairs(self):
        # count below any probe equals the factorization inertia there
        n, h = 120, 1.0 / 121
        a = dirichlet_tridiagonal(n, h)
        m = identity_banded(n)
        res = smallest_eigenpairs(a, m, k=5, tol=1e-8)
        for probe in ((res.eigenvalues[1] + res.eigenvalues[2]) / 2,
                      res.eigenvalues[4] * 1.000001):
            count = int(np.sum(res.eigenvalues < probe))
            assert shift_inertia(a, m, probe) == count


class TestSmallestEigenpairs:
    def test_diag_example(self):
        a = SymmetricBandedMatrix(np.array([[1.0, 2.0, 3.0]]))
        res = smallest_eigenpairs(a, identity_banded(3), k=2, tol=1e-12)
        assert np.allclose(res.eigenvalues, [1.0, 2.0])

    @pytest.mark.parametrize("n", [50, 400])
    def test_dirichlet_oracle(self, n):
        # lambda_k = (2/h^2)(1 - cos(k pi h)) for the tridiagonal Toeplitz;
        # the eigenvalues must match the closed form to 1e-10 relative
        h = 1.0 / (n + 1)
        a = dirichlet_tridiagonal(n, h)
        res = smallest_eigenpairs(a, identity_banded(n), k=4, tol=1e-9)
        k = np.arange(1, 5)
        exact = (2.0 / h**2) * (1.0 - np.cos(k * np.pi * h))
        assert np.allclose(res.eigenvalues, exact, rtol=1e-10)

    def test_mass_scaling_identity(self):
        n, h = 80, 1.0 / 81
        a = dirichlet_tridiagonal(n, h)
        m_band = np.zeros((1, n))
        m_band[0] = h
        m = SymmetricBandedMatrix(m_band)
        res_plain = smallest_eigenpairs(a, identity_banded(n), k=3, tol=1e-9)
        res_scaled = smallest_eigenpairs(a, m, k=3, tol=1e-9)
        assert np.allclose(res_scaled.eigenvalues * h, res_plain.eigenvalues,
                           rtol=1e-10)

    def test_sparse_path_certified(self):
        n = 2500
        h = 1.0 / (n + 1)
        a = dirichlet_tridiagonal(n, h)
        res = smallest_eigenpairs(a, identity_banded(n), k=3, tol=1e-8)
        assert res.meta["method"] == "shift-invert"
        assert res.meta["certified"]
        k = np.arange(1, 4)
        exact = (2.0 / h**2) * (1.0 - np.cos(k * np.pi * h))
        assert np.allclose(res.eigenvalues, exact, rtol=1e-9)

    def test_degenerate_pair_resolved(self):
        # block-diagonal pencil with an exactly double eigenvalue
        dense = np.diag([1.0, 1.0, 3.0, 4.0, 5.0, 6.0])
        a = SymmetricBandedMatrix.from_dense(dense)
        res = smallest_eigenpairs(a, identity_banded(6), k=2, tol=1e-12)
        assert np.allclose(res.eigenvalues, [1.0, 1.0])

    def test_m_orthonormality(self):
        rng = np.random.default_rng(1)
        n = 60
        a = random_banded(rng, n, 2)
        m_dense = np.eye(n) * 0.5
        m = SymmetricBandedMatrix.from_dense(m_dense)
        res = smallest_eigenpairs(a, m, k=4, tol=1e-8)
        gram = res.eigenvectors.T @ (m.to_sparse() @ res.eigenvectors)
        assert np.max(np.abs(gram - np.eye(4))) < 1e-10

    def test_determinism(self):
        n = 1600
        h = 1.0 / (n + 1)
        a = dirichlet_tridiagonal(n, h)
        m = identity_banded(n)
        r1 = smallest_eigenpairs(a, m, k=3, tol=1e-8, seed=42)
        r2 = smallest_eigenpairs(a, m, k=3, tol=1e-8, seed=42)
        assert np.array_equal(r1.eigenvalues, r2.eigenvalues)
        assert np.array_equal(r1.eigenvectors, r2.eigenvectors)

    def test_residual_contract(self):
        n = 300
        a = dirichlet_tridiagonal(n, 1.0 / (n + 1))
        res = smallest_eigenpairs(a, identity_banded(n), k=2, tol=1e-9)
        assert np.all(res.residuals <= 1e-9)

    def test_k_validation(self):
        a = dirichlet_tridiagonal(5, 0.1)
        with pytest.raises(ValueError):
            smallest_eigenpairs(a, identity_banded(5), k=0)
        with pytest.raises(ValueError):
            smallest_eigenpairs(a, identity_banded(5), k=9)


@given(
    seed=st.integers(min_value=0, max_value=10_000),
    n=st.integers(min_value=4, max_value=40),
    bw=st.integers(min_value=1, max_value=4),
    k=st.integers(min_value=1, max_value=4),
)
@settings(max_examples=60, deadline=None)
def test_random_pencil_matches_lapack(seed, n, bw, k):
    """Random banded pencils with SPD mass: values match dense LAPACK and
    vectors are M-orthonormal."""
    bw = min(bw, n - 1)
    k = min(k, n)
    rng = np.random.default_rng(seed)
    a = random_banded(rng, n, bw)
    m_dense = np.zeros((n, n))
    for i in range(n):
        for j in range(max(0, i - bw), i + 1):
            m_dense[i, j] = m_dense[j, i] = 0.1 * rng.normal()
    m_dense += np.eye(n) * (np.abs(m_dense).sum(axis=1).max() + 1.0)
    m = SymmetricBandedMatrix.from_dense(m_dense)

    res = smallest_eigenpairs(a, m, k=k, tol=1e-8, seed=0)
    exact = scipy.linalg.eigh(a.to_dense(), m_dense, eigvals_only=True)
    assert np.allclose(res.eigenvalues, exact[:k], rtol=1e-9, atol=1e-9)
    gram = res.eigenvectors.T @ (m_dense @ res.eigenvectors)
    assert np.max(np.abs(gram - np.eye(k))) < 1e-10
