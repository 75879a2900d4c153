"""
Operator-sequence laboratory.

Convergence detectors, the criteria that force a limit of complementable
operators to stay complementable, closure runs inside ψ(M, N, λ), and the
finite-truncation boundary constructions. "Strong" convergence is always
certified on a finite seeded sample of unit vectors and labelled
strong-on-samples.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.complementability.comptest import check
from src.errors import DimensionMismatchError, PreconditionError
from src.linalg.numkernel import DEFAULT_TOL, Mat, RankTolerance, gamma, op_norm, rank
from src.operators.blockops import BlockOp, assemble, block_gaps
from src.operators.douglas import TAU_RANGE, inclusion_defect, range_included
from src.convergence.generators import (
    OpSequence,
    SequenceKind,
    SequenceParams,
    constant_sequence,
    gen_sequence,
    l2_truncation,
)
from src.statistics.tail import TailStatistics

logger = logging.getLogger(__name__)

EPS_CONV = 1e-6
STRONG_LABEL = "strong-on-samples"


def sample_vectors(
    seq: OpSequence,
    samples: int,
    seed: int,
    sample_decay: float | None = None,
    include_canonical: bool = True,
) -> Mat:
    """
    Unit test vectors in the domain, one per column.

    With sample_decay set, random coordinates along M and along M⊥ are damped
    by sample_decay**i in the stored bases, the finite analog of a fixed
    vector of ℓ2.
    """
    dim = seq.m_sub.ambient_dim
    rng = np.random.default_rng(seed)
    coords = rng.standard_normal((dim, samples))
    if sample_decay is not None:
        envelope = np.concatenate(
            [sample_decay ** np.arange(seq.m_sub.dim), sample_decay ** np.arange(seq.m_perp.dim)],
        )
        coords = coords * envelope[:, None]
    basis = np.hstack([seq.m_sub.basis, seq.m_perp.basis])
    vectors = basis @ coords
    vectors /= np.linalg.norm(vectors, axis=0)
    if include_canonical:
        vectors = np.hstack([np.eye(dim), vectors])
    return vectors


@dataclass(frozen=True)
class ConvergenceVerdict:
    """Gaps of a sequence to its limit and the flags derived from them."""

    uniform_gaps: np.ndarray
    strong_gaps: np.ndarray
    uniform: bool
    strong: bool
    label: str = STRONG_LABEL
    criterion_values: np.ndarray | None = None
    summary: dict[str, float | bool] = field(default_factory=dict)

    def table(self) -> pd.DataFrame:
        """Per-n uniform gap and worst sampled gap."""
        return TailStatistics.to_frame(
            {
                "uniform_gap": self.uniform_gaps,
                "max_sample_gap": self.strong_gaps.max(axis=1) if self.strong_gaps.size else np.zeros(len(self.uniform_gaps)),
            },
        )


def detect_convergence(
    seq: OpSequence,
    limit: Mat | None = None,
    samples: int = 16,
    seed: int = 0,
    eps: float = EPS_CONV,
    sample_decay: float | None = None,
    include_canonical: bool = True,
    progress: bool = False,
) -> ConvergenceVerdict:
    """
    Classify convergence of seq to limit.

    The uniform flag applies the tail test to ||T_n - T||. The strong flag
    holds when every sampled gap sequence ||T_n x - T x|| passes the tail
    test, and whenever the uniform flag holds, since each sampled gap is
    bounded by the uniform gap.

    Args:
        seq: Sequence to test
        limit: Candidate limit, seq.limit when None
        samples: Number of random unit vectors
        seed: Seed for the random vectors
        eps: Threshold of the tail test
        sample_decay: Optional ℓ2 envelope of the random vectors
        include_canonical: Add the canonical basis to the sample set
        progress: Show a progress bar

    Returns:
        ConvergenceVerdict

    Raises:
        DimensionMismatchError: If the limit shape differs from the terms
    """
    limit = seq.limit if limit is None else limit
    if limit.shape != seq.shape:
        raise DimensionMismatchError(f"Limit shape {limit.shape} differs from term shape {seq.shape}")

    x = sample_vectors(seq, samples, seed, sample_decay, include_canonical)
    limit_x = limit @ x
    uniform = np.zeros(seq.n_max)
    strong = np.zeros((seq.n_max, x.shape[1]))
    for i in tqdm(range(seq.n_max), desc="Sequence gaps", disable=not progress):
        t_n = seq.term(i + 1)
        uniform[i] = op_norm(t_n - limit)
        strong[i] = np.linalg.norm(t_n @ x - limit_x, axis=0)

    uniform_flag = TailStatistics.vanishes(uniform, eps)
    sample_flags = [TailStatistics.vanishes(strong[:, j], eps) for j in range(strong.shape[1])]
    strong_flag = uniform_flag or all(sample_flags)
    logger.debug(
        "Convergence of %s: uniform=%s, %s=%s", seq.kind, uniform_flag, STRONG_LABEL, strong_flag,
    )
    return ConvergenceVerdict(
        uniform_gaps=uniform,
        strong_gaps=strong,
        uniform=uniform_flag,
        strong=strong_flag,
        summary=TailStatistics.summarize(uniform, eps),
    )


@dataclass(frozen=True)
class BlockConvergenceReport:
    """Both directions of blockwise uniform convergence."""

    table: pd.DataFrame
    inequalities_hold: bool
    total_uniform: bool
    blocks_uniform: bool

    @property
    def equivalent(self) -> bool:
        return self.total_uniform == self.blocks_uniform


def block_convergence_check(
    seq: OpSequence,
    limit: Mat | None = None,
    eps: float = EPS_CONV,
    slack: float = 1e-10,
) -> BlockConvergenceReport:
    """
    Compare the total gap ||T_n - T|| with the four block gaps.

    For every n: max block gap <= total gap <= 4 * max block gap, and the
    total gap is at most the sum of the block gaps.
    """
    limit = seq.limit if limit is None else limit
    rows = []
    for n in range(1, seq.n_max + 1):
        gaps = block_gaps(seq.term(n), limit, seq.m_sub, seq.n_sub, seq.m_perp, seq.n_perp)
        rows.append(gaps)
    table = TailStatistics.to_frame({key: [r[key] for r in rows] for key in rows[0]})

    ok = (
        (table["max_block"] <= table["total"] + slack)
        & (table["total"] <= 4.0 * table["max_block"] + slack)
        & (table["total"] <= table["sum_blocks"] + slack)
    )
    total_uniform = TailStatistics.vanishes(table["total"].to_numpy(), eps)
    blocks_uniform = all(TailStatistics.vanishes(table[name].to_numpy(), eps) for name in "abcd")
    return BlockConvergenceReport(
        table=table,
        inequalities_hold=bool(ok.all()),
        total_uniform=total_uniform,
        blocks_uniform=blocks_uniform,
    )


@dataclass(frozen=True)
class CriterionReport:
    """Per-n table of the convergence criteria and their conclusions."""

    table: pd.DataFrame
    converges: bool
    criterion_holds: bool
    bounded_lambda: bool
    gamma_criterion: bool
    limit_complementable: bool
    lambda_limit: float | None
    limit_within_sup: bool
    consistent: bool


def theorem_conv_criterion(
    seq: OpSequence,
    limit_blk: BlockOp | None = None,
    eps: float = EPS_CONV,
    tol: RankTolerance = DEFAULT_TOL,
    tau: float = TAU_RANGE,
) -> CriterionReport:
    """
    Evaluate the criteria under which a limit of complementable operators
    is complementable.

    Per n the table holds lambda_min(T_n), ||D - D_n||, their product, the
    ratio ||D - D_n|| / gamma(D_n) and beta_n = max_{i<=n} lambda_min(T_i).
    Each conclusion is cross-checked against check(limit_blk):

    * product -> 0 implies the limit is complementable;
    * bounded lambda_n and uniform convergence imply the limit lies in
      ψ(M, N, sup lambda_n);
    * ratio -> 0 implies the limit is complementable.

    Raises:
        PreconditionError: Naming the first term that is not complementable
    """
    limit_blk = seq.split(seq.limit) if limit_blk is None else limit_blk
    limit_t = assemble(limit_blk)
    lambdas, d_gaps, ratios, uniform = [], [], [], []
    for n in range(1, seq.n_max + 1):
        t_n = seq.term(n)
        blk = seq.split(t_n)
        report = check(blk, tol, tau)
        if not report.complementable:
            raise PreconditionError(f"Term {n} is not complementable")
        assert report.lambda_min is not None
        d_gap = op_norm(limit_blk.d - blk.d)
        lambdas.append(report.lambda_min)
        d_gaps.append(d_gap)
        g = gamma(blk.d, tol)
        ratios.append(0.0 if np.isinf(g) else d_gap / g)
        uniform.append(op_norm(t_n - limit_t))

    lam = np.array(lambdas)
    product = lam * np.array(d_gaps)
    beta = np.maximum.accumulate(lam)
    table = TailStatistics.to_frame(
        {
            "lambda_min": lam,
            "d_gap": d_gaps,
            "product": product,
            "gamma_ratio": ratios,
            "beta": beta,
            "uniform_gap": uniform,
        },
    )

    converges = TailStatistics.vanishes(uniform, eps)
    criterion_holds = TailStatistics.vanishes(product, eps)
    bounded_lambda = TailStatistics.bounded(beta)
    gamma_criterion = TailStatistics.vanishes(ratios, eps)

    limit_report = check(limit_blk, tol, tau)
    limit_within_sup = limit_report.within(float(beta[-1]), slack=EPS_CONV)

    consistent = True
    if criterion_holds or gamma_criterion:
        consistent &= limit_report.complementable
    if converges and bounded_lambda:
        consistent &= limit_within_sup
    if not consistent:
        logger.warning("Criterion conclusions disagree with the limit check")

    return CriterionReport(
        table=table,
        converges=converges,
        criterion_holds=criterion_holds,
        bounded_lambda=bounded_lambda,
        gamma_criterion=gamma_criterion,
        limit_complementable=limit_report.complementable,
        lambda_limit=limit_report.lambda_min,
        limit_within_sup=limit_within_sup,
        consistent=bool(consistent),
    )


@dataclass(frozen=True)
class ClosureReport:
    """Outcome of a closure run inside ψ(M, N, λ)."""

    table: pd.DataFrame
    counterexamples: int
    max_limit_lambda: float
    holds: bool


def closure_probe(
    lam: float,
    trials: int,
    seed: int = 0,
    dim: int = 8,
    split: int = 4,
    n_max: int = 30,
    constant: bool = False,
    slack: float = 1e-6,
    tol: RankTolerance = DEFAULT_TOL,
    tau: float = TAU_RANGE,
    progress: bool = False,
) -> ClosureReport:
    """
    Generate uniformly convergent sequences inside ψ(M, N, lam) and check
    that every limit stays inside.

    Every third trial lets lambda_n increase to lam exactly; every second
    trial uses a rank-deficient limit D. With constant=True each sequence is
    constant.

    Args:
        lam: Level λ of the class
        trials: Number of sequences
        seed: Base seed, trial i uses seed + i
        dim: Ambient dimension of H = K
        split: dim M = dim N
        n_max: Terms per sequence
        constant: Use constant sequences
        slack: Allowed excess of lambda_min over lam for the limit

    Returns:
        ClosureReport with one table row per trial
    """
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    rows = []
    for i in tqdm(range(trials), desc="Closure trials", disable=not progress):
        params = SequenceParams(
            kind=SequenceKind.RANDOM_COMPLEMENTABLE,
            k=dim - split,
            split=split,
            n_max=n_max,
            seed=seed + i,
            lambda_clamp=lam,
            growth=i % 3 == 0,
            rank_deficient=i % 2 == 1,
        )
        seq = gen_sequence(params)
        if constant:
            seq = constant_sequence(seq.limit, seq.m_sub, seq.n_sub, n_max)

        term_lambdas = []
        for n in range(1, seq.n_max + 1):
            report = check(seq.split(seq.term(n)), tol, tau)
            term_lambdas.append(report.lambda_min if report.complementable else float("inf"))
        limit_report = check(seq.split(seq.limit), tol, tau)
        terms_inside = all(x <= lam + slack for x in term_lambdas)
        accepted = limit_report.within(lam, slack)
        rows.append(
            {
                "trial": i,
                "terms_in_psi": terms_inside,
                "max_term_lambda": max(term_lambdas),
                "limit_lambda_min": limit_report.lambda_min if limit_report.complementable else float("inf"),
                "final_gap": op_norm(seq.term(seq.n_max) - seq.limit),
                "accepted": accepted,
            },
        )

    table = pd.DataFrame(rows)
    counterexamples = int(((table["terms_in_psi"]) & (~table["accepted"])).sum())
    return ClosureReport(
        table=table,
        counterexamples=counterexamples,
        max_limit_lambda=float(table["limit_lambda_min"].max()),
        holds=counterexamples == 0,
    )


@dataclass(frozen=True)
class GrowthReport:
    """lambda_min of truncations of the ℓ2 example."""

    table: pd.DataFrame
    strictly_increasing: bool
    overall_ratio: float


def lambda_growth_probe(
    dims: list[int],
    kind: SequenceKind = SequenceKind.POSITIVE_L2_TRUNCATION,
    tol: RankTolerance = DEFAULT_TOL,
    tau: float = TAU_RANGE,
) -> GrowthReport:
    """
    Track the minimal λ of the ℓ2 example under growing truncation.

    Each truncation is complementable because its D block is invertible; the
    growth of lambda_min reflects the failure of complementability in the
    untruncated operator.
    """
    if kind != SequenceKind.POSITIVE_L2_TRUNCATION:
        raise ValueError(f"lambda_growth_probe supports {SequenceKind.POSITIVE_L2_TRUNCATION} only")
    if not dims:
        raise ValueError("dims must not be empty")

    rows = []
    for k in dims:
        seq = gen_sequence(SequenceParams(kind=kind, k=k, n_max=1))
        t = l2_truncation(k)
        report = check(seq.split(t), tol, tau)
        eigenvalues = np.linalg.eigvalsh((t + t.T) / 2.0)
        rows.append(
            {
                "k": k,
                "complementable": report.complementable,
                "lambda_min": report.lambda_min if report.complementable else float("inf"),
                "positive": bool(eigenvalues[0] >= -1e-10),
            },
        )
    table = pd.DataFrame(rows)
    table["ratio"] = table["lambda_min"] / table["lambda_min"].shift(1)
    values = table["lambda_min"].to_numpy()
    return GrowthReport(
        table=table,
        strictly_increasing=bool(np.all(np.diff(values) > 0)),
        overall_ratio=float(values[-1] / values[0]),
    )


@dataclass(frozen=True)
class BoundaryReport:
    """Finite evidence that a complementable limit is a strong limit of non-complementable terms."""

    table: pd.DataFrame
    limit_complementable: bool
    rank_d: int
    delta: float
    min_defect: float
    strong: bool
    uniform: bool
    c_strong: bool
    holds: bool
    label: str = STRONG_LABEL


def boundary_report(
    seq: OpSequence,
    samples: int = 16,
    seed: int = 0,
    eps: float = EPS_CONV,
    sample_decay: float | None = None,
    include_canonical: bool = True,
    defect_floor: float = 0.1,
    tol: RankTolerance = DEFAULT_TOL,
    tau: float = TAU_RANGE,
) -> BoundaryReport:
    """
    Summarize a boundary construction.

    Per term: the relative residual of R(C_n) ⊆ R(D_n), its scale-free
    defect and the verdict of check. The construction holds when the limit
    is complementable, every term has defect at least defect_floor and the
    terms converge to the limit strongly on samples.
    """
    limit_blk = seq.split(seq.limit)
    verdict = detect_convergence(
        seq, samples=samples, seed=seed, eps=eps, sample_decay=sample_decay, include_canonical=include_canonical,
    )
    x = sample_vectors(seq, samples, seed, sample_decay, include_canonical)
    x_m = seq.m_sub.basis.T @ x

    rows = []
    c_gaps = []
    for n in range(1, seq.n_max + 1):
        blk = seq.split(seq.term(n))
        _, residual = range_included(blk.c, blk.d, tol, tau)
        rows.append(
            {
                "residual": residual,
                "defect": inclusion_defect(blk.c, blk.d, tol),
                "complementable": check(blk, tol, tau).complementable,
                "uniform_gap": verdict.uniform_gaps[n - 1],
                "max_sample_gap": float(verdict.strong_gaps[n - 1].max()),
            },
        )
        c_gaps.append(np.linalg.norm((blk.c - limit_blk.c) @ x_m, axis=0))
    table = TailStatistics.to_frame({key: [r[key] for r in rows] for key in rows[0]})
    c_gap_matrix = np.array(c_gaps)
    c_strong = all(TailStatistics.vanishes(c_gap_matrix[:, j], eps) for j in range(c_gap_matrix.shape[1]))

    limit_ok = check(limit_blk, tol, tau).complementable
    min_defect = float(table["defect"].min())
    holds = limit_ok and min_defect >= defect_floor and verdict.strong
    return BoundaryReport(
        table=table,
        limit_complementable=limit_ok,
        rank_d=rank(limit_blk.d, tol),
        delta=float(table["residual"].min()),
        min_defect=min_defect,
        strong=verdict.strong,
        uniform=verdict.uniform,
        c_strong=c_strong,
        holds=holds,
    )
