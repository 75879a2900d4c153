"""
Block decomposition of an operator with respect to a pair of subspaces.

For T: H -> K, a subspace M of H and N of K, the blocks are the coordinates

    A = U_N^T T U_M        B = U_N^T T U_{M⊥}
    C = U_{N⊥}^T T U_M     D = U_{N⊥}^T T U_{M⊥}

in the stored orthonormal bases.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from src.errors import DimensionMismatchError
from src.linalg.numkernel import DEFAULT_TOL, Mat, RankTolerance, op_norm, svd

ORTHO_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Subspace:
    """Closed subspace of R^n stored as an orthonormal basis (n x k)."""

    basis: Mat

    def __post_init__(self) -> None:
        if self.basis.ndim != 2:
            raise ValueError(f"Basis must be 2-D, got shape {self.basis.shape}")
        k = self.basis.shape[1]
        gram_err = np.linalg.norm(self.basis.T @ self.basis - np.eye(k))
        if gram_err > ORTHO_TOL:
            raise ValueError(f"Basis columns are not orthonormal (error {gram_err:.3e})")

    @property
    def ambient_dim(self) -> int:
        return int(self.basis.shape[0])

    @property
    def dim(self) -> int:
        return int(self.basis.shape[1])

    @property
    def projector(self) -> Mat:
        """Orthogonal projector basis @ basis.T."""
        return self.basis @ self.basis.T

    @classmethod
    def canonical(cls, ambient_dim: int, k: int) -> "Subspace":
        """span(e_1, ..., e_k) in R^ambient_dim."""
        if not 0 <= k <= ambient_dim:
            raise ValueError(f"Cannot take {k} canonical vectors in R^{ambient_dim}")
        return cls(np.eye(ambient_dim)[:, :k])

    def rotated(self, q: Mat) -> "Subspace":
        """Same subspace expressed in the basis basis @ q (q orthogonal)."""
        return Subspace(self.basis @ q)


def orthonormalize(raw: Mat, tol: RankTolerance = DEFAULT_TOL) -> Subspace:
    """
    Orthonormal basis for the column span of raw.

    Args:
        raw: ambient_dim x j matrix of spanning vectors
        tol: Rank tolerance deciding which directions survive

    Returns:
        Subspace of dimension rank(raw); the zero subspace for a zero matrix
    """
    f = svd(raw)
    r = f.cutoff(tol)
    return Subspace(np.ascontiguousarray(f.u[:, :r]))


def complement(s: Subspace) -> Subspace:
    """Orthogonal complement, read off the trailing left singular vectors."""
    n = s.ambient_dim
    if s.dim == 0:
        return Subspace(np.eye(n))
    f = svd(s.basis, full=True)
    return Subspace(np.ascontiguousarray(f.u[:, s.dim :]))


def random_subspace(ambient_dim: int, k: int, rng: np.random.Generator) -> Subspace:
    """Uniformly oriented k-dimensional subspace of R^ambient_dim."""
    if k == 0:
        return Subspace(np.zeros((ambient_dim, 0)))
    q, _ = np.linalg.qr(rng.standard_normal((ambient_dim, k)))
    return Subspace(q)


@dataclass(frozen=True, eq=False)
class BlockOp:
    """2x2 block form of an operator with respect to (M, N)."""

    m_sub: Subspace
    n_sub: Subspace
    a: Mat
    b: Mat
    c: Mat
    d: Mat
    m_perp: Subspace = field(default=None)  # type: ignore[assignment]
    n_perp: Subspace = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.m_perp is None:
            object.__setattr__(self, "m_perp", complement(self.m_sub))
        if self.n_perp is None:
            object.__setattr__(self, "n_perp", complement(self.n_sub))

        dm, dmp = self.m_sub.dim, self.m_perp.dim
        dn, dnp = self.n_sub.dim, self.n_perp.dim
        expected = {
            "a": (dn, dm),
            "b": (dn, dmp),
            "c": (dnp, dm),
            "d": (dnp, dmp),
        }
        for name, shape in expected.items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise DimensionMismatchError(
                    f"Block {name} has shape {actual}, expected {shape}",
                )

    @property
    def domain_dim(self) -> int:
        return self.m_sub.ambient_dim

    @property
    def codomain_dim(self) -> int:
        return self.n_sub.ambient_dim

    @classmethod
    def from_blocks(
        cls,
        a: Mat,
        b: Mat,
        c: Mat,
        d: Mat,
    ) -> "BlockOp":
        """Blocks relative to the canonical split span(e_1..e_k)."""
        dm, dmp = a.shape[1], b.shape[1]
        dn, dnp = a.shape[0], c.shape[0]
        return cls(
            m_sub=Subspace.canonical(dm + dmp, dm),
            n_sub=Subspace.canonical(dn + dnp, dn),
            a=a,
            b=b,
            c=c,
            d=d,
        )


def decompose(
    t: Mat,
    m: Subspace,
    n: Subspace,
    m_perp: Subspace | None = None,
    n_perp: Subspace | None = None,
) -> BlockOp:
    """
    Split t into blocks with respect to (M, N).

    Args:
        t: Operator from R^dim(H) to R^dim(K)
        m: Subspace of the domain
        n: Subspace of the codomain
        m_perp: Basis to use for the complement of m (computed when None)
        n_perp: Basis to use for the complement of n (computed when None)

    Returns:
        BlockOp in the stored bases

    Raises:
        DimensionMismatchError: If t does not act between the ambient spaces
    """
    if t.shape != (n.ambient_dim, m.ambient_dim):
        raise DimensionMismatchError(
            f"Operator shape {t.shape} does not map R^{m.ambient_dim} to R^{n.ambient_dim}",
        )
    m_perp = m_perp or complement(m)
    n_perp = n_perp or complement(n)
    u_m, u_mp = m.basis, m_perp.basis
    u_n, u_np = n.basis, n_perp.basis
    return BlockOp(
        m_sub=m,
        n_sub=n,
        a=u_n.T @ t @ u_m,
        b=u_n.T @ t @ u_mp,
        c=u_np.T @ t @ u_m,
        d=u_np.T @ t @ u_mp,
        m_perp=m_perp,
        n_perp=n_perp,
    )


def assemble(blk: BlockOp) -> Mat:
    """Inverse of decompose: sum of the four embedded blocks."""
    u_m, u_mp = blk.m_sub.basis, blk.m_perp.basis
    u_n, u_np = blk.n_sub.basis, blk.n_perp.basis
    return (
        u_n @ blk.a @ u_m.T
        + u_n @ blk.b @ u_mp.T
        + u_np @ blk.c @ u_m.T
        + u_np @ blk.d @ u_mp.T
    )


class NormSandwich(NamedTuple):
    lower: float
    norm: float
    upper: float
    holds: bool


def norm_sandwich(blk: BlockOp, slack: float = 1e-10) -> NormSandwich:
    """
    Evaluate max block norm <= ||T|| <= sum of block norms.

    Empty blocks have norm 0.
    """
    norms = [op_norm(x) for x in (blk.a, blk.b, blk.c, blk.d)]
    lower, upper = max(norms), sum(norms)
    norm = op_norm(assemble(blk))
    holds = lower <= norm + slack and norm <= upper + slack
    return NormSandwich(lower=lower, norm=norm, upper=upper, holds=holds)


def block_gaps(
    t_n: Mat,
    t: Mat,
    m: Subspace,
    n: Subspace,
    m_perp: Subspace | None = None,
    n_perp: Subspace | None = None,
) -> dict[str, float]:
    """
    Spectral-norm gaps between two operators, blockwise and in total.

    Returns:
        Dictionary with keys a, b, c, d, max_block, sum_blocks and total
    """
    diff = decompose(t_n - t, m, n, m_perp, n_perp)
    gaps = {name: op_norm(getattr(diff, name)) for name in ("a", "b", "c", "d")}
    block_values = list(gaps.values())
    gaps["max_block"] = max(block_values)
    gaps["sum_blocks"] = sum(block_values)
    gaps["total"] = op_norm(t_n - t)
    return gaps
