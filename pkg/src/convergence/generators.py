"""
Operator and operator-sequence generators.

Every generator is deterministic given its parameters and seed. Sequences are
indexed n = 1..n_max and carry the subspaces and complement bases their block
coordinates refer to.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np

from src.errors import DimensionMismatchError, ScenarioError
from src.linalg.numkernel import DEFAULT_TOL, Mat, pinv, rank, svd
from src.operators.blockops import (
    BlockOp,
    Subspace,
    assemble,
    complement,
    decompose,
    orthonormalize,
    random_subspace,
)

logger = logging.getLogger(__name__)


class SequenceKind(StrEnum):
    PAPER_EXAMPLE_N_INVERSE = "paper_example_n_inverse"
    POSITIVE_L2_TRUNCATION = "positive_l2_truncation"
    PTWISE_KILLER = "ptwise_killer"
    PTWISE2_KILLER = "ptwise2_killer"
    EXPLICIT_LIST = "explicit_list"
    RANDOM_COMPLEMENTABLE = "random_complementable"


class Profile(StrEnum):
    """Singular value profile of D in the boundary constructions."""

    DECAYING = "decaying"
    FLAT = "flat"


@dataclass(frozen=True, eq=False)
class SequenceParams:
    """
    Parameters of a generated sequence.

    k is the block dimension: the size of each identity block for the
    n-inverse example, the truncation size for the ℓ2 example, dim M⊥ = dim N⊥
    for the boundary constructions, and dim M⊥ = dim N⊥ for random sequences.
    """

    kind: SequenceKind
    k: int = 4
    n_max: int = 50
    seed: int = 0
    # boundary constructions
    family: int | None = None
    profile: Profile = Profile.DECAYING
    rho: float = 0.75
    # random_complementable
    split: int | None = None
    lambda_clamp: float = 1.0
    growth: bool = False
    rank_deficient: bool = False
    # explicit_list
    terms: tuple[Mat, ...] = ()
    limit: Mat | None = None
    m_dim: int | None = None
    n_dim: int | None = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ScenarioError(f"k must be positive, got {self.k}")
        if self.n_max < 1:
            raise ScenarioError(f"n_max must be positive, got {self.n_max}")
        if not 0 < self.rho < 1:
            raise ScenarioError(f"rho must lie in (0, 1), got {self.rho}")
        if self.lambda_clamp <= 0:
            raise ScenarioError(f"lambda_clamp must be positive, got {self.lambda_clamp}")


@dataclass(frozen=True, eq=False)
class OpSequence:
    """Lazily generated sequence T_1, ..., T_{n_max} with its limit."""

    params: SequenceParams
    m_sub: Subspace
    n_sub: Subspace
    limit: Mat
    _term: Callable[[int], Mat] = field(repr=False)
    m_perp: Subspace = field(default=None)  # type: ignore[assignment]
    n_perp: Subspace = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.m_perp is None:
            object.__setattr__(self, "m_perp", complement(self.m_sub))
        if self.n_perp is None:
            object.__setattr__(self, "n_perp", complement(self.n_sub))

    @property
    def kind(self) -> SequenceKind:
        return self.params.kind

    @property
    def n_max(self) -> int:
        return self.params.n_max

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_sub.ambient_dim, self.m_sub.ambient_dim)

    def term(self, n: int) -> Mat:
        """T_n for 1 <= n <= n_max."""
        if not 1 <= n <= self.n_max:
            raise IndexError(f"Term index {n} outside 1..{self.n_max}")
        t = self._term(n)
        if t.shape != self.shape:
            raise DimensionMismatchError(f"Term {n} has shape {t.shape}, expected {self.shape}")
        return t

    def terms(self) -> list[Mat]:
        return [self.term(n) for n in range(1, self.n_max + 1)]

    def split(self, t: Mat) -> BlockOp:
        """Block form of t in this sequence's bases."""
        return decompose(t, self.m_sub, self.n_sub, self.m_perp, self.n_perp)


def _canonical_split(ambient: int, dim: int) -> tuple[Subspace, Subspace]:
    eye = np.eye(ambient)
    return Subspace(eye[:, :dim]), Subspace(eye[:, dim:])


def _canonical_blocks(a: Mat, b: Mat, c: Mat, d: Mat) -> Mat:
    return np.block([[a, b], [c, d]])


def _n_inverse_example(params: SequenceParams) -> OpSequence:
    k = params.k
    eye = np.eye(k)
    m, m_perp = _canonical_split(2 * k, k)

    def term(n: int) -> Mat:
        return _canonical_blocks(eye, eye, (1.0 + 1.0 / n) * eye, eye / n)

    limit = _canonical_blocks(eye, eye, eye, np.zeros((k, k)))
    return OpSequence(params, m, m, limit, term, m_perp, m_perp)


def l2_truncation(k: int) -> Mat:
    """
    Truncation of [[D, P], [P, D]] on R^k ⊕ R^k.

    D = diag(1, 1/4, ..., 1/k^2) and P projects onto the normalized
    truncation of (1, 1/2, 1/3, ...).
    """
    idx = np.arange(1, k + 1, dtype=np.float64)
    d = np.diag(1.0 / idx**2)
    u = (1.0 / idx)[:, None]
    u /= np.linalg.norm(u)
    p = u @ u.T
    return _canonical_blocks(d, p, p, d)


def _l2_truncation(params: SequenceParams) -> OpSequence:
    k = params.k
    m, m_perp = _canonical_split(2 * k, k)
    t = l2_truncation(k)
    return OpSequence(params, m, m, t, lambda n: t.copy(), m_perp, m_perp)


def _profile(params: SequenceParams, size: int) -> np.ndarray:
    i = np.arange(1, size + 1, dtype=np.float64)
    if params.profile == Profile.FLAT:
        # strictly decreasing in [1, 1.25], bounded away from zero
        return 1.0 + (size - i + 1) / (4.0 * size)
    return params.rho ** (i - 1)


def killer_family(d: Mat, c: Mat, inside: bool = True) -> Mat:
    """
    Orthonormal family used by the boundary constructions.

    With inside=True the family spans D^{-1}(R(C)) ∩ N(D)⊥; otherwise it
    spans the part of N(D)⊥ orthogonal to that subspace. Columns are the
    right singular vectors of D restricted to the subspace, ordered by
    decreasing singular value.

    Returns:
        Matrix with orthonormal columns a_1, a_2, ...
    """
    preimage = orthonormalize(pinv(d) @ c)
    if inside:
        space = preimage.basis
    else:
        f = svd(d)
        row_space = f.vt[: f.cutoff()].T
        leftover = row_space - preimage.basis @ (preimage.basis.T @ row_space)
        space = orthonormalize(leftover).basis
    if space.shape[1] == 0:
        return space
    restricted = svd(d @ space)
    return space @ restricted.vt.T


def ordered_kernel_basis(c: Mat) -> Mat:
    """
    Orthonormal basis of N(c), Gram-Schmidt ordered along the canonical axes.

    Canonical vectors already inside N(c) are returned as they are.
    """
    cols = c.shape[1]
    r = rank(c)
    if r == 0:
        return np.eye(cols)
    row_basis = orthonormalize(c.T).basis
    projected = np.eye(cols) - row_basis @ row_basis.T
    keep = [j for j in range(cols) if np.linalg.norm(projected[:, j]) > 1e-8]
    q, _ = np.linalg.qr(projected[:, keep])
    basis = q[:, : cols - r]
    if np.linalg.norm(c @ basis) > 1e-8 * (1.0 + np.linalg.norm(c)):
        logger.debug("Ordered kernel basis fell back to an SVD basis")
        basis = complement(Subspace(row_basis)).basis
    return basis


def _boundary_blocks(params: SequenceParams, second: bool) -> tuple[Mat, Mat, Mat, Mat]:
    k = params.k
    sigma = _profile(params, k)
    d = np.diag(sigma)
    if second:
        p = params.family or k
        c = np.zeros((k, p))
        c[0, 0] = 1.0
        c[1, 1] = 1.0
    else:
        p = params.family or k
        if p > k:
            raise ScenarioError(f"Family of {p} vectors does not fit in {k} dimensions")
        c = np.eye(k, p)
    a = np.eye(p)
    b = np.zeros((p, k))
    return a, b, c, d


def _ptwise_killer(params: SequenceParams) -> OpSequence:
    a, b, c, d = _boundary_blocks(params, second=False)
    p, k = a.shape[0], d.shape[0]
    family = killer_family(d, c, inside=True)
    if family.shape[1] < params.n_max:
        raise ScenarioError(
            f"ptwise_killer needs rank(C) >= n_max, got {family.shape[1]} < {params.n_max}",
        )
    m, m_perp = _canonical_split(p + k, p)

    def term(n: int) -> Mat:
        tail = family[:, n - 1 :]
        d_n = d @ (np.eye(k) - tail @ tail.T)
        return _canonical_blocks(a, b, c, d_n)

    limit = _canonical_blocks(a, b, c, d)
    return OpSequence(params, m, m, limit, term, m_perp, m_perp)


def _ptwise2_killer(params: SequenceParams) -> OpSequence:
    a, b, c, d = _boundary_blocks(params, second=True)
    p, k = a.shape[0], d.shape[0]
    family = killer_family(d, c, inside=False)
    kernel = ordered_kernel_basis(c)
    steps = min(family.shape[1], kernel.shape[1])
    if steps < params.n_max:
        raise ScenarioError(
            f"ptwise2_killer supports {steps} steps, fewer than n_max = {params.n_max}",
        )
    family, kernel = family[:, :steps], kernel[:, :steps]
    m, m_perp = _canonical_split(p + k, p)

    def term(n: int) -> Mat:
        tail_a, tail_f = family[:, n - 1 :], kernel[:, n - 1 :]
        d_n = d @ (np.eye(k) - tail_a @ tail_a.T)
        # h maps f_i to a_i
        c_n = c + d @ tail_a @ tail_f.T
        return _canonical_blocks(a, b, c_n, d_n)

    limit = _canonical_blocks(a, b, c, d)
    return OpSequence(params, m, m, limit, term, m_perp, m_perp)


def _explicit_list(params: SequenceParams) -> OpSequence:
    if not params.terms:
        raise ScenarioError("explicit_list needs at least one term")
    if params.limit is None:
        raise ScenarioError("explicit_list needs a limit operator")
    shape = params.terms[0].shape
    for i, t in enumerate(params.terms, start=1):
        if t.shape != shape:
            raise DimensionMismatchError(f"Term {i} has shape {t.shape}, expected {shape}")
    if params.limit.shape != shape:
        raise DimensionMismatchError(f"Limit has shape {params.limit.shape}, expected {shape}")
    if params.n_max > len(params.terms):
        raise ScenarioError(f"n_max = {params.n_max} exceeds the {len(params.terms)} listed terms")

    m_dim = params.m_dim if params.m_dim is not None else shape[1] // 2
    n_dim = params.n_dim if params.n_dim is not None else shape[0] // 2
    m, m_perp = _canonical_split(shape[1], m_dim)
    n, n_perp = _canonical_split(shape[0], n_dim)
    terms = params.terms
    return OpSequence(params, m, n, params.limit, lambda i: terms[i - 1], m_perp, n_perp)


def _scaled(x: Mat, norm: float) -> Mat:
    current = np.linalg.norm(x, 2)
    return x if current == 0 else x * (norm / current)


def random_operator_pair(
    rng: np.random.Generator,
    k: int,
    rank_deficient: bool = False,
) -> tuple[Mat, Mat]:
    """D with singular values in [0.5, 2] (half of them zero when rank_deficient) and a perturbation E of norm 1."""
    u, _ = np.linalg.qr(rng.standard_normal((k, k)))
    v, _ = np.linalg.qr(rng.standard_normal((k, k)))
    sigma = rng.uniform(0.5, 2.0, k)
    if rank_deficient:
        sigma[max(1, k // 2) :] = 0.0
    d = (u * sigma) @ v.T
    e = _scaled(rng.standard_normal((k, k)), 1.0)
    return d, e


def _random_complementable(params: SequenceParams) -> OpSequence:
    rng = np.random.default_rng(params.seed)
    k = params.k
    p = params.split if params.split is not None else k
    dim = p + k
    m = random_subspace(dim, p, rng)
    n = random_subspace(dim, p, rng)
    m_perp, n_perp = complement(m), complement(n)

    d, e = random_operator_pair(rng, k, params.rank_deficient)
    lam = params.lambda_clamp
    z = _scaled(rng.standard_normal((k, p)), lam * rng.uniform(0.2, 1.0))
    y = _scaled(rng.standard_normal((p, k)), lam * rng.uniform(0.2, 1.0))
    a = rng.standard_normal((p, p))

    def blocks(n_index: int | None) -> BlockOp:
        if n_index is None:
            d_n, scale = d, 1.0
        else:
            d_n = d + e / n_index**2
            scale = n_index / (n_index + 1.0) if params.growth else 1.0
        return BlockOp(m, n, a, (scale * y) @ d_n, d_n @ (scale * z), d_n, m_perp, n_perp)

    return OpSequence(
        params,
        m,
        n,
        assemble(blocks(None)),
        lambda i: assemble(blocks(i)),
        m_perp,
        n_perp,
    )


_BUILDERS: dict[SequenceKind, Callable[[SequenceParams], OpSequence]] = {
    SequenceKind.PAPER_EXAMPLE_N_INVERSE: _n_inverse_example,
    SequenceKind.POSITIVE_L2_TRUNCATION: _l2_truncation,
    SequenceKind.PTWISE_KILLER: _ptwise_killer,
    SequenceKind.PTWISE2_KILLER: _ptwise2_killer,
    SequenceKind.EXPLICIT_LIST: _explicit_list,
    SequenceKind.RANDOM_COMPLEMENTABLE: _random_complementable,
}


def gen_sequence(params: SequenceParams) -> OpSequence:
    """
    Build the sequence described by params.

    Raises:
        ScenarioError: If the parameters are inconsistent for the kind
    """
    logger.debug("Generating %s sequence (k=%d, n_max=%d)", params.kind, params.k, params.n_max)
    return _BUILDERS[params.kind](params)


def constant_sequence(t: Mat, m: Subspace, n: Subspace, n_max: int = 10) -> OpSequence:
    """T_n = t for every n."""
    params = SequenceParams(kind=SequenceKind.EXPLICIT_LIST, n_max=n_max, terms=(t,) * n_max, limit=t)
    return OpSequence(params, m, n, t, lambda i: t.copy())


def random_phi_operator(
    m: Subspace,
    n: Subspace,
    rng: np.random.Generator,
    w_norm: float = 0.3,
    v_norm: float = 0.3,
    phi_l: bool = True,
    phi_r: bool = True,
) -> BlockOp:
    """
    Random operator in φ_L, φ_R or φ with the given certificate norms.

    In block coordinates T = [V^T; I] G [W, I] with G orthogonal; the [W, I]
    factor gives φ_L with level ||W|| and the [V^T; I] factor gives φ_R with
    level ||V||. With phi_l or phi_r False the matching factor is drawn
    without a norm clamp.

    Raises:
        DimensionMismatchError: If H != K or dim M⊥ != dim N⊥
    """
    if m.ambient_dim != n.ambient_dim:
        raise DimensionMismatchError("φ operators act on a single space H = K")
    m_perp, n_perp = complement(m), complement(n)
    if m_perp.dim != n_perp.dim:
        raise DimensionMismatchError("φ generator needs dim M⊥ = dim N⊥")
    k = m_perp.dim
    g = np.linalg.qr(rng.standard_normal((k, k)))[0] if k else np.zeros((0, 0))

    w = rng.standard_normal((k, m.dim))
    v = rng.standard_normal((k, n.dim))
    if phi_l:
        w = _scaled(w, w_norm)
    if phi_r:
        v = _scaled(v, v_norm)
    right_factor = np.hstack([w, np.eye(k)])
    left_factor = np.vstack([v.T, np.eye(k)])

    coords = left_factor @ g @ right_factor
    dn = n.dim
    return BlockOp(
        m,
        n,
        coords[:dn, : m.dim],
        coords[:dn, m.dim :],
        coords[dn:, : m.dim],
        coords[dn:, m.dim :],
        m_perp,
        n_perp,
    )


def random_block(
    rng: np.random.Generator,
    dim: int = 6,
    m_dim: int | None = None,
    n_dim: int | None = None,
    rank_d: int | None = None,
    complementable: bool | None = None,
) -> BlockOp:
    """
    Random operator on R^dim split along random subspaces.

    Args:
        rng: Random generator
        dim: Ambient dimension of H = K
        m_dim: dim M, random when None
        n_dim: dim N, random when None
        rank_d: Force rank(D) to this value when given
        complementable: Force the verdict: True builds C = DZ and B = YD,
            False plants a direction of C outside R(D)

    Returns:
        BlockOp in random orthonormal bases
    """
    m_dim = int(rng.integers(1, dim)) if m_dim is None else m_dim
    n_dim = int(rng.integers(1, dim)) if n_dim is None else n_dim
    m = random_subspace(dim, m_dim, rng)
    n = random_subspace(dim, n_dim, rng)
    m_perp, n_perp = complement(m), complement(n)
    dmp, dnp = m_perp.dim, n_perp.dim

    d = rng.standard_normal((dnp, dmp))
    if rank_d is not None:
        d = rng.standard_normal((dnp, rank_d)) @ rng.standard_normal((rank_d, dmp))
    a = rng.standard_normal((n_dim, m_dim))
    b = rng.standard_normal((n_dim, dmp))
    c = rng.standard_normal((dnp, m_dim))
    if complementable is True:
        c = d @ rng.standard_normal((dmp, m_dim))
        b = rng.standard_normal((n_dim, dnp)) @ d
    elif complementable is False:
        outside = np.eye(dnp) - d @ pinv(d)
        if rank(outside, DEFAULT_TOL) == 0:
            raise ScenarioError("D is onto N⊥; no direction of C can leave R(D)")
        c = c + 3.0 * outside @ rng.standard_normal((dnp, m_dim))
    return BlockOp(m, n, a, b, c, d, m_perp, n_perp)


def sequence_from_terms(terms: Sequence[Mat], limit: Mat, m_dim: int, n_dim: int) -> OpSequence:
    """explicit_list sequence over the canonical split."""
    params = SequenceParams(
        kind=SequenceKind.EXPLICIT_LIST,
        n_max=len(terms),
        terms=tuple(terms),
        limit=limit,
        m_dim=m_dim,
        n_dim=n_dim,
    )
    return gen_sequence(params)
