"""
Douglas factorization A = BX.

The reduced solution X = B^+ A is the unique solution of minimal norm whose
range lies in N(B)⊥. In finite dimensions it exists exactly when
R(A) ⊆ R(B).
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg  # type: ignore

from src.errors import DimensionMismatchError, RangeInclusionError
from src.linalg.numkernel import DEFAULT_TOL, Mat, RankTolerance, gamma, op_norm, pinv, rank, svd

logger = logging.getLogger(__name__)

TAU_RANGE = 1e-8
PSD_TOL = 1e-10


@dataclass(frozen=True)
class DouglasSolution:
    """Reduced solution c of b @ c = a with its certificates."""

    c: Mat
    residual: float
    norm_c: float
    range_residual: float


def _relative(numerator: float, reference: Mat) -> float:
    return numerator / (1.0 + float(np.linalg.norm(reference)))


def range_included(
    a: Mat,
    b: Mat,
    tol: RankTolerance = DEFAULT_TOL,
    tau: float = TAU_RANGE,
) -> tuple[bool, float]:
    """
    Decide R(a) ⊆ R(b).

    Args:
        a: Matrix whose range is tested
        b: Matrix whose range should contain it
        tol: Rank tolerance for the projector onto R(b)
        tau: Inclusion threshold on the relative residual

    Returns:
        Tuple (included, residual) with residual
        ||(I - b b^+) a||_F / (1 + ||a||_F)

    Raises:
        DimensionMismatchError: If a and b have different row counts
    """
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatchError(
            f"Range test needs equal row counts, got {a.shape} and {b.shape}",
        )
    if a.size == 0:
        return True, 0.0
    leak = a - b @ (pinv(b, tol) @ a)
    residual = _relative(float(np.linalg.norm(leak)), a)
    return residual <= tau, residual


def inclusion_defect(a: Mat, b: Mat, tol: RankTolerance = DEFAULT_TOL) -> float:
    """
    Scale-free defect ||(I - b b^+) a||_2 / ||a||_2 of R(a) ⊆ R(b).

    1 means some direction of R(a) is orthogonal to R(b); 0 for a = 0.
    """
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatchError(
            f"Range test needs equal row counts, got {a.shape} and {b.shape}",
        )
    norm_a = op_norm(a)
    if norm_a == 0.0:
        return 0.0
    return op_norm(a - b @ (pinv(b, tol) @ a)) / norm_a


def reduced_solution(
    a: Mat,
    b: Mat,
    tol: RankTolerance = DEFAULT_TOL,
    tau: float = TAU_RANGE,
) -> DouglasSolution:
    """
    Douglas reduced solution of b @ x = a.

    Raises:
        RangeInclusionError: If R(a) is not contained in R(b)
    """
    included, residual = range_included(a, b, tol, tau)
    if not included:
        raise RangeInclusionError(residual)

    b_pinv = pinv(b, tol)
    c = b_pinv @ a
    fit = _relative(float(np.linalg.norm(b @ c - a)), a)
    # R(c) ⊆ N(b)⊥
    range_leak = _relative(float(np.linalg.norm(c - b_pinv @ (b @ c))), c)
    logger.debug("Reduced solution: residual %.3e, range leak %.3e", fit, range_leak)
    return DouglasSolution(c=c, residual=fit, norm_c=op_norm(c), range_residual=range_leak)


def _is_psd(m: Mat, floor: float) -> bool:
    if m.size == 0:
        return True
    return bool(linalg.eigvalsh((m + m.T) / 2.0)[0] >= floor)


@dataclass(frozen=True)
class InfCheck:
    """Outcome of the operator-inequality bisection."""

    inf_lambda: float
    norm_c: float
    matches_sq_norm: bool
    matches_linear_norm: bool


def douglas_inf_check(
    a: Mat,
    b: Mat,
    sol: DouglasSolution,
    grid: int = 60,
    tol: RankTolerance = DEFAULT_TOL,
    tau: float = TAU_RANGE,
    psd: float = PSD_TOL,
) -> InfCheck:
    """
    Bisect for the least lambda with a a^T <= lambda b b^T.

    The classical identity is ||c||^2 = inf lambda; both the squared and the
    linear comparison are reported.

    Both sides live on R(b) once R(a) ⊆ R(b), so the inequality is decided
    there after the congruence by sigma_r^-1 u_r^T, where it reads
    k k^T <= lambda I with k = sigma_r^-1 u_r^T a. Eigenvalues down to
    -psd * max(1, lambda + ||k k^T||) count as nonnegative.

    Args:
        a: Left-hand side of the factorization
        b: Factor whose range contains R(a)
        sol: Reduced solution computed from (a, b)
        grid: Number of bisection steps
        tol: Rank tolerance for R(b) and gamma(b)
        tau: Threshold on the relative part of a outside R(b)
        psd: Relative eigenvalue cutoff of the semidefiniteness test

    Returns:
        InfCheck with the bisection value and both comparisons; inf_lambda
        is inf when R(a) leaves R(b)
    """
    factors = svd(b)
    r = factors.cutoff(tol)
    u_r = factors.u[:, :r]
    coords = u_r.T @ a
    leak = _relative(float(np.linalg.norm(a - u_r @ coords)), a)
    norm_sq = sol.norm_c**2
    if leak > tau:
        logger.debug("R(a) leaves R(b) by %.3e; no lambda bounds a a^T", leak)
        return InfCheck(
            inf_lambda=float("inf"),
            norm_c=sol.norm_c,
            matches_sq_norm=False,
            matches_linear_norm=False,
        )

    k = coords / factors.sigma[:r, None]
    kkt = k @ k.T
    spread = op_norm(kkt)
    eye = np.eye(r)

    def bounded(lam: float) -> bool:
        return _is_psd(lam * eye - kkt, -psd * max(1.0, lam + spread))

    g = gamma(b, tol)
    upper = 1.0 if np.isinf(g) else max(1.0, op_norm(a) ** 2 / g**2)
    # The bracket must contain the infimum even when roundoff trims gamma.
    while not bounded(upper) and upper < 1e300:
        upper *= 2.0
    lower = 0.0
    if bounded(0.0):
        upper = 0.0

    for _ in range(grid):
        if upper - lower <= 0.0:
            break
        mid = (lower + upper) / 2.0
        if bounded(mid):
            upper = mid
        else:
            lower = mid
    logger.debug("Douglas bisection bracket [%.6g, %.6g]", lower, upper)

    return InfCheck(
        inf_lambda=upper,
        norm_c=sol.norm_c,
        matches_sq_norm=abs(upper - norm_sq) <= 1e-6 * (1.0 + norm_sq),
        matches_linear_norm=abs(upper - sol.norm_c) <= 1e-6 * (1.0 + sol.norm_c),
    )


@dataclass(frozen=True)
class KernelReport:
    """Null-space comparisons for a factorization a = b c."""

    ker_a_equals_ker_c: bool
    ker_a_equals_ker_b: bool | None


def _same_kernel(x: Mat, y: Mat, tol: RankTolerance) -> bool:
    # Equal kernels iff equal row spaces iff stacking adds no rank
    rx, ry = rank(x, tol), rank(y, tol)
    return rx == ry == rank(np.vstack([x, y]), tol)


def kernel_report(a: Mat, b: Mat, c: Mat, tol: RankTolerance = DEFAULT_TOL) -> KernelReport:
    """
    Compare N(a) with N(c) and with N(b).

    N(a) = N(c) always holds for the reduced solution. N(a) = N(b) is
    recorded only; it is None when a and b act on different spaces.
    """
    ker_b = _same_kernel(a, b, tol) if a.shape[1] == b.shape[1] else None
    return KernelReport(
        ker_a_equals_ker_c=_same_kernel(a, c, tol),
        ker_a_equals_ker_b=ker_b,
    )
