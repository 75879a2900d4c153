import numpy as np
import pytest

from src.errors import DimensionMismatchError, RangeInclusionError
from src.linalg.numkernel import op_norm, pinv
from src.operators.douglas import (
    douglas_inf_check,
    inclusion_defect,
    kernel_report,
    range_included,
    reduced_solution,
)


def ill_conditioned(rng, dim):
    """Square matrix of random rank with singular values spread over three decades."""
    r = int(rng.integers(1, dim + 1))
    u, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    v, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    sigma = np.zeros(dim)
    sigma[:r] = 10.0 ** rng.uniform(-2.0, 1.0, r)
    return (u * sigma) @ v.T


class TestRangeIncluded:
    """Tests for the range inclusion decision."""

    def test_included(self):
        b = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
        a = b @ np.array([[2.0], [3.0]])
        included, residual = range_included(a, b)

        assert included
        assert residual < 1e-12

    def test_not_included(self):
        included, residual = range_included(np.eye(2), np.diag([1.0, 0.0]))

        assert not included
        assert residual == pytest.approx(1.0 / (1.0 + np.sqrt(2)))

    def test_zero_a_is_always_included(self):
        included, _ = range_included(np.zeros((2, 2)), np.zeros((2, 2)))
        assert included

    def test_row_mismatch(self):
        with pytest.raises(DimensionMismatchError, match="equal row counts"):
            range_included(np.zeros((2, 1)), np.zeros((3, 1)))


class TestInclusionDefect:
    """Tests for the scale-free inclusion defect."""

    def test_orthogonal_direction_gives_one(self):
        # C = 1, D = 0: R(C) meets R(D) only at 0
        assert inclusion_defect(np.array([[1.0]]), np.array([[0.0]])) == pytest.approx(1.0)

    def test_independent_of_scale(self):
        a = np.array([[1.0], [1.0]])
        b = np.array([[1.0], [0.0]])

        assert inclusion_defect(a, b) == pytest.approx(inclusion_defect(1e6 * a, b))
        assert inclusion_defect(a, b) == pytest.approx(2**-0.5)

    def test_zero(self):
        assert inclusion_defect(np.zeros((2, 2)), np.eye(2)) == 0.0


class TestReducedSolution:
    """Tests for the Douglas reduced solution."""

    def test_minimal_norm_solution(self):
        b = np.array([[1.0, 1.0]])
        a = np.array([[2.0]])
        sol = reduced_solution(a, b)

        # minimal-norm solution of x1 + x2 = 2 lies in N(b)⊥ = span(1, 1)
        np.testing.assert_allclose(sol.c, [[1.0], [1.0]])
        assert sol.norm_c == pytest.approx(np.sqrt(2))
        assert sol.residual < 1e-12
        assert sol.range_residual < 1e-12

    def test_raises_when_range_escapes(self):
        with pytest.raises(RangeInclusionError) as excinfo:
            reduced_solution(np.eye(2), np.diag([1.0, 0.0]))
        assert excinfo.value.residual > 0.1

    def test_random_factorization(self):
        rng = np.random.default_rng(4)
        b = rng.standard_normal((5, 3)) @ rng.standard_normal((3, 4))
        a = b @ rng.standard_normal((4, 2))
        sol = reduced_solution(a, b)

        np.testing.assert_allclose(b @ sol.c, a, atol=1e-9)


class TestInfCheck:
    """Tests for the operator-inequality bisection."""

    def test_scaled_identity(self):
        a, b = 2.0 * np.eye(2), np.eye(2)
        inf = douglas_inf_check(a, b, reduced_solution(a, b))

        assert inf.inf_lambda == pytest.approx(4.0, rel=1e-6)
        assert inf.matches_sq_norm
        assert not inf.matches_linear_norm

    def test_rank_one(self):
        a, b = np.diag([1.0, 0.0]), np.diag([2.0, 0.0])
        inf = douglas_inf_check(a, b, reduced_solution(a, b))

        assert inf.norm_c == pytest.approx(0.5)
        assert inf.inf_lambda == pytest.approx(0.25, rel=1e-6)
        assert inf.matches_sq_norm

    def test_zero_a(self):
        a, b = np.zeros((2, 2)), np.eye(2)
        inf = douglas_inf_check(a, b, reduced_solution(a, b))

        assert inf.inf_lambda == 0.0
        assert inf.matches_sq_norm

    def test_range_escape_has_no_bound(self):
        a, b = np.eye(2), np.diag([1.0, 0.0])
        sol = reduced_solution(a, b, tau=1.0)
        inf = douglas_inf_check(a, b, sol)

        assert inf.inf_lambda == float("inf")
        assert not inf.matches_sq_norm

    def test_cutoff_is_relative(self):
        a, b = 2.0 * np.eye(2), np.eye(2)
        sol = reduced_solution(a, b)

        # eigenvalues down to -psd * (lambda + 4) count as nonnegative
        loose = douglas_inf_check(a, b, sol, psd=0.5)
        assert loose.inf_lambda == pytest.approx(4.0 / 3.0, rel=1e-6)
        assert not loose.matches_sq_norm

    def test_small_singular_value(self):
        b = np.diag([3.0, 0.03, 0.0])
        a = b @ np.array([[1.0, 0.0], [2.0, 1.0], [5.0, 5.0]])
        sol = reduced_solution(a, b)
        inf = douglas_inf_check(a, b, sol)

        assert sol.norm_c**2 == pytest.approx(op_norm(np.array([[1.0, 0.0], [2.0, 1.0]])) ** 2)
        assert inf.matches_sq_norm

    @pytest.mark.parametrize("block", range(4))
    def test_ill_conditioned_pairs(self, block):
        """||C||^2 is the least lambda on rank-deficient, ill-conditioned B."""
        for draw in range(50 * block, 50 * (block + 1)):
            rng = np.random.default_rng(draw)
            b = ill_conditioned(rng, 5)
            a = b @ rng.standard_normal((5, int(rng.integers(1, 4))))
            inf = douglas_inf_check(a, b, reduced_solution(a, b))

            assert inf.matches_sq_norm, f"draw {draw}: {inf.inf_lambda} vs {inf.norm_c**2}"


class TestMinimality:
    """The reduced solution has the least norm among all solutions."""

    @pytest.mark.parametrize("block", range(4))
    def test_every_solution_is_larger(self, block):
        for draw in range(50 * block, 50 * (block + 1)):
            rng = np.random.default_rng(draw)
            b = ill_conditioned(rng, 5)
            a = b @ rng.standard_normal((5, 2))
            c = reduced_solution(a, b).c
            kernel = np.eye(5) - pinv(b) @ b
            x = c + kernel @ rng.standard_normal((5, 2))

            np.testing.assert_allclose(b @ x, a, atol=1e-8 * (1.0 + np.linalg.norm(a)))
            assert op_norm(x) >= op_norm(c) - 1e-9 * (1.0 + op_norm(c))


class TestKernelReport:
    """Tests for the kernel comparisons."""

    def test_kernels(self):
        b = np.diag([1.0, 2.0, 0.0])
        a = np.diag([1.0, 0.0, 0.0])
        sol = reduced_solution(a, b)
        report = kernel_report(a, b, sol.c)

        assert report.ker_a_equals_ker_c
        assert report.ker_a_equals_ker_b is False

    def test_different_domains(self):
        b = np.eye(2)
        a = np.array([[1.0], [0.0]])
        report = kernel_report(a, b, reduced_solution(a, b).c)

        assert report.ker_a_equals_ker_c
        assert report.ker_a_equals_ker_b is None
