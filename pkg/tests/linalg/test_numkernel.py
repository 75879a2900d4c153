from unittest import mock

import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st
from scipy import linalg

from src.errors import DecompositionError, NotPositiveSemidefiniteError
from src.linalg.numkernel import (
    DEFAULT_TOL,
    RankTolerance,
    as_mat,
    gamma,
    modulus,
    op_norm,
    pinv,
    polar,
    rank,
    sqrt_psd,
    svd,
    truncate,
)

REAL_SVD = linalg.svd


def low_rank(rng: np.random.Generator, rows: int, cols: int, r: int) -> np.ndarray:
    """Random rows x cols matrix of rank r."""
    return rng.standard_normal((rows, r)) @ rng.standard_normal((r, cols))


class TestAsMat:
    """Tests for input normalization."""

    def test_returns_float_copy(self):
        """Integer input becomes a float64 copy."""
        source = np.array([[1, 2], [3, 4]])
        result = as_mat(source)

        assert result.dtype == np.float64
        result[0, 0] = 99.0
        assert source[0, 0] == 1

    def test_rejects_vectors(self):
        """A 1-D array is not a matrix."""
        with pytest.raises(ValueError, match="must be 2-D"):
            as_mat([1.0, 2.0], "vec")

    def test_rejects_non_finite(self):
        """NaN and Inf entries are refused."""
        with pytest.raises(ValueError, match="non-finite"):
            as_mat([[1.0, np.nan]])
        with pytest.raises(ValueError, match="non-finite"):
            as_mat([[np.inf]])


class TestRankTolerance:
    """Tests for the rank threshold."""

    def test_relative_part_dominates(self):
        tol = RankTolerance(rel=1e-3, abs_floor=1e-12)
        assert tol.threshold(10.0, (4, 2)) == pytest.approx(0.04)

    def test_absolute_floor(self):
        assert DEFAULT_TOL.threshold(1e-20, (3, 3)) == 1e-12


class TestSvd:
    """Tests for the SVD wrapper."""

    def test_reconstructs(self):
        rng = np.random.default_rng(0)
        m = rng.standard_normal((5, 3))
        f = svd(m)

        np.testing.assert_allclose(f.reconstruct(), m, atol=1e-12)
        assert np.all(np.diff(f.sigma) <= 0)

    def test_empty_matrix(self):
        """Empty inputs give empty factors instead of a LAPACK error."""
        f = svd(np.zeros((3, 0)))

        assert f.sigma.size == 0
        assert f.u.shape == (3, 0)
        assert f.cutoff() == 0

    def test_falls_back_to_gesvd(self):
        """A gesdd failure is retried with the gesvd driver."""

        def flaky(m, full_matrices, lapack_driver):
            if lapack_driver == "gesdd":
                raise linalg.LinAlgError("SVD did not converge")
            return REAL_SVD(m, full_matrices=full_matrices, lapack_driver=lapack_driver)

        m = np.array([[2.0, 0.0], [0.0, 1.0]])
        with mock.patch("src.linalg.numkernel.linalg.svd", side_effect=flaky) as patched:
            f = svd(m)

        assert patched.call_count == 2
        np.testing.assert_allclose(f.sigma, [2.0, 1.0])

    def test_both_drivers_fail(self):
        with mock.patch(
            "src.linalg.numkernel.linalg.svd",
            side_effect=linalg.LinAlgError("SVD did not converge"),
        ):
            with pytest.raises(DecompositionError, match="SVD failed on 2x2"):
                svd(np.eye(2))


class TestRankAndNorms:
    """Tests for rank, gamma, op_norm and truncate."""

    def test_rank_ignores_roundoff(self):
        assert rank(np.diag([1.0, 1e-20])) == 1
        assert rank(np.zeros((3, 4))) == 0

    def test_rank_of_product(self):
        rng = np.random.default_rng(3)
        assert rank(low_rank(rng, 6, 5, 2)) == 2

    def test_gamma_is_smallest_nonzero_singular_value(self):
        assert gamma(np.diag([3.0, 0.5, 0.0])) == pytest.approx(0.5)

    def test_gamma_of_zero_is_infinite(self):
        assert gamma(np.zeros((2, 2))) == float("inf")

    def test_op_norm(self):
        assert op_norm(np.array([[3.0, 0.0], [0.0, -4.0]])) == pytest.approx(4.0)
        assert op_norm(np.zeros((0, 3))) == 0.0

    def test_truncate_drops_tiny_singular_values(self):
        m = np.diag([2.0, 1e-14])
        tol = RankTolerance(rel=1e-10, abs_floor=1e-12)

        np.testing.assert_allclose(truncate(m, tol), np.diag([2.0, 0.0]))


class TestPinv:
    """Moore-Penrose identities on random rank-deficient matrices."""

    @seed(1)
    @settings(max_examples=40, deadline=None)
    @given(
        rows=st.integers(min_value=1, max_value=6),
        cols=st.integers(min_value=1, max_value=6),
        r=st.integers(min_value=0, max_value=6),
        draw=st.integers(min_value=0, max_value=2**32 - 1),
    )
    def test_penrose_identities(self, rows, cols, r, draw):
        rng = np.random.default_rng(draw)
        m = low_rank(rng, rows, cols, min(r, rows, cols))
        p = pinv(m)
        scale = 1.0 + np.linalg.norm(m) * np.linalg.norm(p)

        assert p.shape == (cols, rows)
        assert np.linalg.norm(m @ p @ m - m) <= 1e-9 * scale * (1.0 + np.linalg.norm(m))
        assert np.linalg.norm(p @ m @ p - p) <= 1e-9 * scale * (1.0 + np.linalg.norm(p))
        np.testing.assert_allclose(m @ p, (m @ p).T, atol=1e-9 * scale)
        np.testing.assert_allclose(p @ m, (p @ m).T, atol=1e-9 * scale)

    def test_zero_matrix(self):
        np.testing.assert_array_equal(pinv(np.zeros((2, 3))), np.zeros((3, 2)))


class TestModulusAndPolar:
    """Tests for |T|, |T*|, fractional powers and the polar factor."""

    @pytest.fixture
    def m(self):
        return np.random.default_rng(5).standard_normal((4, 3))

    def test_modulus_squares_to_gram(self, m):
        mod = modulus(m)
        np.testing.assert_allclose(mod @ mod, m.T @ m, atol=1e-10)

    def test_adjoint_modulus(self, m):
        mod = modulus(m, adjoint=True)

        assert mod.shape == (4, 4)
        np.testing.assert_allclose(mod @ mod, m @ m.T, atol=1e-10)

    def test_half_power(self, m):
        root = modulus(m, power=0.5)
        np.testing.assert_allclose(root @ root, modulus(m), atol=1e-10)

    def test_polar_factorization(self, m):
        u, mod = polar(m)
        np.testing.assert_allclose(u @ mod, m, atol=1e-10)

    def test_polar_vanishes_on_kernel(self):
        m = np.array([[1.0, 0.0], [0.0, 0.0]])
        u, _ = polar(m)
        np.testing.assert_allclose(u @ np.array([0.0, 1.0]), 0.0)


class TestSqrtPsd:
    """Tests for the positive square root."""

    def test_square_root(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((4, 4))
        m = x @ x.T
        s = sqrt_psd(m)

        np.testing.assert_allclose(s, s.T, atol=1e-12)
        np.testing.assert_allclose(s @ s, m, atol=1e-9)

    def test_rejects_non_symmetric(self):
        with pytest.raises(NotPositiveSemidefiniteError, match="not symmetric"):
            sqrt_psd(np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_rejects_negative(self):
        with pytest.raises(NotPositiveSemidefiniteError, match="negative"):
            sqrt_psd(np.diag([1.0, -1.0]))

    def test_rejects_rectangular(self):
        with pytest.raises(NotPositiveSemidefiniteError, match="square"):
            sqrt_psd(np.zeros((2, 3)))
