"""
Complementability predicates and certificates.

A block operator [[A, B], [C, D]] is complementable when R(C) ⊆ R(D) and
R(B^T) ⊆ R(D^T). It is (M, N, λ)-complementable when in addition
max(||D^+ C||, ||B D^+||) <= λ, which in finite dimensions is the same as the
ball inclusions C(B_M) ⊆ λ D(B_{M⊥}) and B^T(B_N) ⊆ λ D^T(B_{N⊥}).
"""

import logging
from dataclasses import dataclass

import numpy as np

from src.errors import DimensionMismatchError, NotComplementableError, PreconditionError
from src.linalg.numkernel import DEFAULT_TOL, Mat, RankTolerance, gamma, op_norm, pinv
from src.operators.blockops import BlockOp, Subspace, assemble, decompose
from src.operators.douglas import TAU_RANGE, range_included

logger = logging.getLogger(__name__)

LAMBDA_SLACK = 1e-8


@dataclass(frozen=True)
class ComplementabilityReport:
    """Verdict, residuals and minimal-λ certificate for one block operator."""

    complementable: bool
    residual_c_in_d: float
    residual_bstar_in_dstar: float
    z: Mat | None = None
    y: Mat | None = None
    lambda_min: float | None = None
    lambda_char2_bound: float | None = None

    def within(self, lam: float, slack: float = LAMBDA_SLACK) -> bool:
        """Membership in ψ(M, N, lam)."""
        return self.complementable and self.lambda_min is not None and self.lambda_min <= lam + slack


def check(
    blk: BlockOp,
    tol: RankTolerance = DEFAULT_TOL,
    tau: float = TAU_RANGE,
) -> ComplementabilityReport:
    """
    Decide (M, N)-complementability of a block operator.

    Args:
        blk: Block form of the operator
        tol: Rank tolerance shared by the pseudoinverses
        tau: Range inclusion threshold

    Returns:
        ComplementabilityReport; z and y are filled only when complementable
    """
    c_ok, res_c = range_included(blk.c, blk.d, tol, tau)
    b_ok, res_b = range_included(blk.b.T, blk.d.T, tol, tau)
    if not (c_ok and b_ok):
        logger.debug("Not complementable: residuals %.3e / %.3e", res_c, res_b)
        return ComplementabilityReport(
            complementable=False,
            residual_c_in_d=res_c,
            residual_bstar_in_dstar=res_b,
        )

    d_pinv = pinv(blk.d, tol)
    z = d_pinv @ blk.c
    y = blk.b @ d_pinv
    lambda_min = max(op_norm(z), op_norm(y))

    g = gamma(blk.d, tol)
    if np.isinf(g):
        bound = float("inf")
    else:
        # gamma(D^T) == gamma(D)
        bound = max(op_norm(blk.c) / g, op_norm(blk.b) / g)

    return ComplementabilityReport(
        complementable=True,
        residual_c_in_d=res_c,
        residual_bstar_in_dstar=res_b,
        z=z,
        y=y,
        lambda_min=lambda_min,
        lambda_char2_bound=bound,
    )


def psi_membership(
    blk: BlockOp,
    lam: float,
    tol: RankTolerance = DEFAULT_TOL,
    tau: float = TAU_RANGE,
) -> tuple[bool, ComplementabilityReport]:
    """Decide membership in ψ(M, N, lam) and return the underlying report."""
    report = check(blk, tol, tau)
    return report.within(lam), report


def complement_partition(blk: BlockOp) -> BlockOp:
    """The same operator in block form with respect to (M⊥, N⊥)."""
    return BlockOp(
        m_sub=blk.m_perp,
        n_sub=blk.n_perp,
        a=blk.d,
        b=blk.c,
        c=blk.b,
        d=blk.a,
        m_perp=blk.m_sub,
        n_perp=blk.n_sub,
    )


def _unit_samples(dim: int, samples: int, seed: int) -> Mat:
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((dim, samples))
    return x / np.linalg.norm(x, axis=0)


def ball_inclusion_residual(
    c: Mat,
    d: Mat,
    lam: float,
    samples: int = 2000,
    seed: int = 0,
    tol: RankTolerance = DEFAULT_TOL,
    tau: float = TAU_RANGE,
) -> float:
    """
    Sampled test of c(B) ⊆ lam * d(B).

    For each random unit x the minimal-norm preimage of c x under d is
    d^+ c x. The inclusion fails on x when that preimage is longer than lam,
    or when c x is not reached by d at all.

    Args:
        c: Operator whose image ball is tested
        d: Operator whose scaled image ball should contain it
        lam: Scale, must be positive
        samples: Number of random unit vectors
        seed: Seed for the sample generator
        tol: Rank tolerance for d^+
        tau: Threshold below which a reach defect counts as roundoff

    Returns:
        Largest violation over the sample, clipped at 0; 0 certifies the
        inclusion on the sample
    """
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if c.shape[0] != d.shape[0]:
        raise DimensionMismatchError(f"Shapes {c.shape} and {d.shape} share no codomain")
    if c.shape[1] == 0 or c.shape[0] == 0:
        return 0.0

    x = _unit_samples(c.shape[1], samples, seed)
    cx = c @ x
    pre = pinv(d, tol) @ cx
    excess = np.linalg.norm(pre, axis=0) / lam - 1.0
    reach = np.linalg.norm(cx - d @ pre, axis=0) / (1.0 + np.linalg.norm(cx, axis=0))
    reach = np.where(reach <= tau, 0.0, reach)
    return float(max(0.0, excess.max(), reach.max()))


def ball_lambda_estimate(
    c: Mat,
    d: Mat,
    samples: int = 2000,
    seed: int = 0,
    tol: RankTolerance = DEFAULT_TOL,
) -> float:
    """Sampled lower estimate of ||d^+ c||, the least λ for the ball inclusion."""
    if c.size == 0:
        return 0.0
    x = _unit_samples(c.shape[1], samples, seed)
    return float(np.linalg.norm(pinv(d, tol) @ (c @ x), axis=0).max())


@dataclass(frozen=True)
class AndoWitnesses:
    """Operators m_r on the domain and m_ell on the codomain."""

    m_r: Mat
    m_ell: Mat


def ando_witnesses(
    blk: BlockOp,
    tol: RankTolerance = DEFAULT_TOL,
    tau: float = TAU_RANGE,
) -> AndoWitnesses:
    """
    Construct witnesses of (P_r, P_ell)-complementability.

    m_r has block form [[0, 0], [Z, D^+ D]] with respect to (M, M⊥) and
    m_ell has block form [[0, Y], [0, D D^+]] with respect to (N, N⊥).

    Raises:
        NotComplementableError: If either range inclusion fails
    """
    report = check(blk, tol, tau)
    if not report.complementable:
        raise NotComplementableError(report.residual_c_in_d, report.residual_bstar_in_dstar)
    assert report.z is not None and report.y is not None

    d_pinv = pinv(blk.d, tol)
    u_m, u_mp = blk.m_sub.basis, blk.m_perp.basis
    u_n, u_np = blk.n_sub.basis, blk.n_perp.basis

    m_r = u_mp @ report.z @ u_m.T + u_mp @ (d_pinv @ blk.d) @ u_mp.T
    m_ell = u_n @ report.y @ u_np.T + u_np @ (blk.d @ d_pinv) @ u_np.T
    return AndoWitnesses(m_r=m_r, m_ell=m_ell)


def witness_residuals(blk: BlockOp, witnesses: AndoWitnesses) -> dict[str, float]:
    """
    Relative residuals of the four defining identities.

    Returns:
        Dictionary keyed range_r, factor_r, range_ell and factor_ell
    """
    t = assemble(blk)
    q_r = np.eye(blk.domain_dim) - blk.m_sub.projector
    q_ell = np.eye(blk.codomain_dim) - blk.n_sub.projector
    m_r, m_ell = witnesses.m_r, witnesses.m_ell

    def rel(x: Mat, ref: Mat) -> float:
        return float(np.linalg.norm(x) / (1.0 + np.linalg.norm(ref)))

    return {
        "range_r": rel(q_r @ m_r - m_r, m_r),
        "factor_r": rel(q_ell @ t @ m_r - q_ell @ t, t),
        "range_ell": rel(m_ell @ q_ell - m_ell, m_ell),
        "factor_ell": rel(m_ell @ t @ q_r - t @ q_r, t),
    }


@dataclass(frozen=True)
class PhiMembership:
    """Membership in φ_L, φ_R and φ at a given λ."""

    in_phi_l: bool
    in_phi_r: bool
    in_phi: bool
    lambda_l: float | None
    lambda_r: float | None
    residual_l: float
    residual_r: float


def _stacked_lambda(
    lhs: Mat,
    rhs: Mat,
    tol: RankTolerance,
    tau: float,
) -> tuple[float | None, float]:
    included, residual = range_included(lhs, rhs, tol, tau)
    if not included:
        return None, residual
    return op_norm(pinv(rhs, tol) @ lhs), residual


def phi_membership(
    blk: BlockOp,
    lam: float,
    tol: RankTolerance = DEFAULT_TOL,
    tau: float = TAU_RANGE,
) -> PhiMembership:
    """
    Decide membership in φ_L(M, N, lam), φ_R(M, N, lam) and φ(M, N, lam).

    φ_L asks for one y with A x = lam B y and C x = lam D y simultaneously,
    which is the stacked inclusion [A; C](B_M) ⊆ lam [B; D](B_{M⊥}). φ_R is
    the same test on the transposed blocks [A^T; B^T] and [C^T; D^T].

    Raises:
        DimensionMismatchError: If domain and codomain differ
    """
    if blk.domain_dim != blk.codomain_dim:
        raise DimensionMismatchError(
            f"φ classes need H = K, got dim H = {blk.domain_dim}, dim K = {blk.codomain_dim}",
        )
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")

    lam_l, res_l = _stacked_lambda(
        np.vstack([blk.a, blk.c]), np.vstack([blk.b, blk.d]), tol, tau,
    )
    lam_r, res_r = _stacked_lambda(
        np.vstack([blk.a.T, blk.b.T]), np.vstack([blk.c.T, blk.d.T]), tol, tau,
    )
    in_l = lam_l is not None and lam_l <= lam + LAMBDA_SLACK
    in_r = lam_r is not None and lam_r <= lam + LAMBDA_SLACK
    return PhiMembership(
        in_phi_l=in_l,
        in_phi_r=in_r,
        in_phi=in_l and in_r,
        lambda_l=lam_l,
        lambda_r=lam_r,
        residual_l=res_l,
        residual_r=res_r,
    )


@dataclass(frozen=True)
class ProductClosureReport:
    """Memberships of T1 T2 for T1 in φ_R and T2 in φ_L."""

    in_phi_l: bool
    in_phi_r: bool
    in_phi: bool
    in_psi: bool
    in_psi_perp: bool
    lambda_min: float | None
    lambda_min_perp: float | None
    holds: bool


def _same_subspace(s: Subspace, t: Subspace) -> bool:
    return s.ambient_dim == t.ambient_dim and np.allclose(s.projector, t.projector, atol=1e-10)


def product_closure_check(
    t1: BlockOp,
    t2: BlockOp,
    lam: float,
    tol: RankTolerance = DEFAULT_TOL,
    tau: float = TAU_RANGE,
) -> ProductClosureReport:
    """
    Check the product rule: T1 in φ_R and T2 in φ_L give T1 T2 in φ.

    The product is decomposed in the bases of t2. ψ(M⊥, N⊥, lam) is reported
    in in_psi_perp but is not part of holds.

    Raises:
        DimensionMismatchError: If t1 and t2 use different subspaces, or M != N
        PreconditionError: If t1 is not in φ_R or t2 is not in φ_L
    """
    if not (_same_subspace(t1.m_sub, t2.m_sub) and _same_subspace(t1.n_sub, t2.n_sub)):
        raise DimensionMismatchError("Product closure needs both factors split along the same (M, N)")
    if not _same_subspace(t2.m_sub, t2.n_sub):
        raise DimensionMismatchError("Product closure composes block forms and needs M = N")

    failures = []
    if not phi_membership(t1, lam, tol, tau).in_phi_r:
        failures.append("t1 is not in φ_R(M, N, λ)")
    if not phi_membership(t2, lam, tol, tau).in_phi_l:
        failures.append("t2 is not in φ_L(M, N, λ)")
    if failures:
        raise PreconditionError("; ".join(failures))

    product = assemble(t1) @ assemble(t2)
    blk = decompose(product, t2.m_sub, t2.n_sub, t2.m_perp, t2.n_perp)
    phi = phi_membership(blk, lam, tol, tau)
    in_psi, report = psi_membership(blk, lam, tol, tau)
    in_psi_perp, report_perp = psi_membership(complement_partition(blk), lam, tol, tau)
    if not in_psi_perp:
        logger.warning("Product is not in ψ(M⊥, N⊥, λ); reported only")

    return ProductClosureReport(
        in_phi_l=phi.in_phi_l,
        in_phi_r=phi.in_phi_r,
        in_phi=phi.in_phi,
        in_psi=in_psi,
        in_psi_perp=in_psi_perp,
        lambda_min=report.lambda_min,
        lambda_min_perp=report_perp.lambda_min,
        holds=phi.in_phi_l and phi.in_phi_r and phi.in_phi and in_psi,
    )
