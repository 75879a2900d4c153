"""
Schur complement T_{/(M,N)} by three routes.

    classical  A - B D^{-1} C                 (D square and invertible)
    reduced    A - B Z = A - Y C              (Z = D^+ C, Y = B D^+)
    weak       A - E^T F                      (Douglas solutions through |D*|^{1/2}, |D|^{1/2})

Every route returns the core block and the full operator
[[core, 0], [0, 0]] assembled in the stored bases.
"""

import logging
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from scipy import linalg  # type: ignore

from src.errors import NotComplementableError, SingularBlockError
from src.linalg.numkernel import DEFAULT_TOL, Mat, RankTolerance, modulus, polar, rank, svd
from src.operators.blockops import BlockOp, assemble
from src.operators.douglas import TAU_RANGE, range_included, reduced_solution
from src.complementability.comptest import check

logger = logging.getLogger(__name__)

AGREEMENT_TOL = 1e-8


class SchurRoute(StrEnum):
    CLASSICAL = "classical"
    REDUCED_Z = "reduced_z"
    REDUCED_Y = "reduced_y"
    WEAK_EF = "weak_ef"


@dataclass(frozen=True)
class SchurResult:
    """Core block A - correction and the embedded full operator."""

    core: Mat
    full: Mat
    route: SchurRoute
    condition: float | None = None


def _embed(blk: BlockOp, core: Mat) -> Mat:
    zeros = BlockOp(
        m_sub=blk.m_sub,
        n_sub=blk.n_sub,
        a=core,
        b=np.zeros_like(blk.b),
        c=np.zeros_like(blk.c),
        d=np.zeros_like(blk.d),
        m_perp=blk.m_perp,
        n_perp=blk.n_perp,
    )
    return assemble(zeros)


def _relative_gap(x: Mat, y: Mat) -> float:
    return float(np.linalg.norm(x - y) / (1.0 + max(np.linalg.norm(x), np.linalg.norm(y))))


def schur_classical(blk: BlockOp, tol: RankTolerance = DEFAULT_TOL) -> SchurResult:
    """
    Classical Schur complement A - B D^{-1} C.

    Raises:
        SingularBlockError: If D is not square or numerically singular
    """
    d = blk.d
    if d.shape[0] != d.shape[1] or rank(d, tol) < d.shape[0]:
        raise SingularBlockError(
            f"D block of shape {d.shape} is not invertible; use the reduced route",
        )
    sigma = svd(d).sigma
    condition = float(sigma[0] / sigma[-1]) if sigma.size else 1.0
    if d.size == 0:
        core = blk.a.copy()
    else:
        core = blk.a - blk.b @ linalg.solve(d, blk.c)
    return SchurResult(core=core, full=_embed(blk, core), route=SchurRoute.CLASSICAL, condition=condition)


def schur_reduced(
    blk: BlockOp,
    tol: RankTolerance = DEFAULT_TOL,
    tau: float = TAU_RANGE,
) -> SchurResult:
    """
    Schur complement through Douglas reduced solutions.

    Computes A - B Z and the dual form A - Y C and requires them to agree.

    Raises:
        NotComplementableError: If the block operator is not complementable,
            or if the two formulas disagree beyond AGREEMENT_TOL
    """
    report = check(blk, tol, tau)
    if not report.complementable:
        raise NotComplementableError(report.residual_c_in_d, report.residual_bstar_in_dstar)
    assert report.z is not None and report.y is not None

    core_z = blk.a - blk.b @ report.z
    core_y = blk.a - report.y @ blk.c
    gap = _relative_gap(core_z, core_y)
    if gap > AGREEMENT_TOL:
        raise NotComplementableError(
            report.residual_c_in_d,
            report.residual_bstar_in_dstar,
            message=f"A - BZ and A - YC disagree by {gap:.3e}",
        )
    return SchurResult(core=core_z, full=_embed(blk, core_z), route=SchurRoute.REDUCED_Z)


def weak_check(
    blk: BlockOp,
    tol: RankTolerance = DEFAULT_TOL,
    tau: float = TAU_RANGE,
) -> tuple[bool, tuple[float, float]]:
    """
    Weak complementability: R(C) ⊆ R(|D*|^{1/2}) and R(B^T) ⊆ R(|D|^{1/2}).

    Returns:
        Tuple (weakly, (residual_c, residual_b))
    """
    root_adj = modulus(blk.d, 0.5, adjoint=True)
    root = modulus(blk.d, 0.5)
    c_ok, res_c = range_included(blk.c, root_adj, tol, tau)
    b_ok, res_b = range_included(blk.b.T, root, tol, tau)
    return c_ok and b_ok, (res_c, res_b)


def schur_weak(
    blk: BlockOp,
    tol: RankTolerance = DEFAULT_TOL,
    tau: float = TAU_RANGE,
) -> SchurResult:
    """
    Schur complement A - E^T F of a weakly complementable operator.

    With the polar decomposition D = U |D|, F solves |D*|^{1/2} U X = C and
    E solves |D|^{1/2} X = B^T, both as Douglas reduced solutions.

    Raises:
        NotComplementableError: If the weak inclusions fail
    """
    weakly, (res_c, res_b) = weak_check(blk, tol, tau)
    if not weakly:
        raise NotComplementableError(res_c, res_b, message="Operator is not weakly complementable")

    u, _ = polar(blk.d)
    f = reduced_solution(blk.c, modulus(blk.d, 0.5, adjoint=True) @ u, tol, tau).c
    e = reduced_solution(blk.b.T, modulus(blk.d, 0.5), tol, tau).c
    core = blk.a - e.T @ f
    return SchurResult(core=core, full=_embed(blk, core), route=SchurRoute.WEAK_EF)


def schur_routes(
    blk: BlockOp,
    tol: RankTolerance = DEFAULT_TOL,
    tau: float = TAU_RANGE,
) -> dict[SchurRoute, SchurResult]:
    """
    Run every applicable route.

    The classical route is skipped when D is singular; the others are
    skipped when the operator is not (weakly) complementable.
    """
    results: dict[SchurRoute, SchurResult] = {}
    try:
        results[SchurRoute.CLASSICAL] = schur_classical(blk, tol)
    except SingularBlockError as e:
        logger.debug("Classical route skipped: %s", e)

    try:
        reduced = schur_reduced(blk, tol, tau)
        results[SchurRoute.REDUCED_Z] = reduced
        report = check(blk, tol, tau)
        assert report.y is not None
        core_y = blk.a - report.y @ blk.c
        results[SchurRoute.REDUCED_Y] = SchurResult(
            core=core_y, full=_embed(blk, core_y), route=SchurRoute.REDUCED_Y,
        )
    except NotComplementableError as e:
        logger.debug("Reduced route skipped: %s", e)

    try:
        results[SchurRoute.WEAK_EF] = schur_weak(blk, tol, tau)
    except NotComplementableError as e:
        logger.debug("Weak route skipped: %s", e)
    return results


def route_agreement(results: dict[SchurRoute, SchurResult]) -> float:
    """Largest pairwise relative gap between the cores of the given routes."""
    cores = [r.core for r in results.values()]
    gaps = [_relative_gap(x, y) for i, x in enumerate(cores) for y in cores[i + 1 :]]
    return max(gaps, default=0.0)
