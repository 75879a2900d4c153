"""
Powers and power series of a square operator.

Partial sums S_n = sum_{i=1..n} alpha_i T^i are accumulated by repeated
multiplication so that non-normal T is handled exactly. Convergence of the
series is decided by the root test on |alpha_n|^(1/n) ||T||.
"""

import logging
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any, NamedTuple

import numpy as np
import pandas as pd
from scipy import linalg as sla  # type: ignore

from src.complementability.comptest import check, phi_membership, product_closure_check
from src.errors import DimensionMismatchError, PreconditionError, ScenarioError, SeriesDivergenceError
from src.linalg.numkernel import DEFAULT_TOL, Mat, RankTolerance, as_mat, op_norm
from src.operators.blockops import BlockOp, assemble, decompose
from src.operators.douglas import TAU_RANGE
from src.statistics.tail import TailStatistics

logger = logging.getLogger(__name__)

ROOT_MARGIN = 1e-9
SUM_SLACK = 1e-7
CLOSED_FORM_NOTE = (
    "Limits of finite-dimensional series automatically have the closed-range "
    "property required of D; the hypothesis is satisfied without a check."
)


class CoeffKind(StrEnum):
    GEOMETRIC = "geometric"
    EXPLICIT = "explicit"
    CONSTANT = "constant"


class RootStatus(StrEnum):
    CONVERGES = "converges"
    DIVERGES = "diverges"
    FINITE_HORIZON = "converges-on-horizon"
    UNDETERMINED = "undetermined-at-horizon"


@dataclass(frozen=True)
class CoeffRule:
    """Coefficient rule alpha_n, n >= 1."""

    kind: CoeffKind
    r: float = 0.0
    c: float = 0.0
    values: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        numbers = (self.r, self.c, *self.values)
        if not all(np.isfinite(x) for x in numbers):
            raise ValueError("Coefficients must be finite")
        if self.kind == CoeffKind.EXPLICIT and not self.values:
            raise ValueError("An explicit coefficient list cannot be empty")

    @classmethod
    def geometric(cls, r: float) -> "CoeffRule":
        return cls(CoeffKind.GEOMETRIC, r=r)

    @classmethod
    def constant(cls, c: float) -> "CoeffRule":
        return cls(CoeffKind.CONSTANT, c=c)

    @classmethod
    def explicit(cls, values: list[float] | tuple[float, ...]) -> "CoeffRule":
        return cls(CoeffKind.EXPLICIT, values=tuple(float(v) for v in values))

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "CoeffRule":
        """
        Parse {"geometric": r}, {"constant": c} or {"explicit": [...]}.

        Raises:
            ScenarioError: If the mapping does not name exactly one rule
        """
        if not isinstance(data, dict) or len(data) != 1:
            raise ScenarioError(f"Coefficient rule must have exactly one key, got {data!r}")
        (key, value), = data.items()
        try:
            kind = CoeffKind(key)
        except ValueError:
            raise ScenarioError(
                f"Unknown coefficient rule '{key}'. Available rules: {[k.value for k in CoeffKind]}",
            ) from None
        if kind == CoeffKind.EXPLICIT:
            return cls.explicit(value)
        if kind == CoeffKind.GEOMETRIC:
            return cls.geometric(float(value))
        return cls.constant(float(value))

    def alpha(self, n: int) -> float:
        """alpha_n for n >= 1."""
        if n < 1:
            raise ValueError(f"Coefficient index must be positive, got {n}")
        if self.kind == CoeffKind.GEOMETRIC:
            return float(self.r**n)
        if self.kind == CoeffKind.CONSTANT:
            return self.c
        if n > len(self.values):
            raise IndexError(f"Explicit list has {len(self.values)} coefficients, asked for alpha_{n}")
        return self.values[n - 1]

    def to_dict(self) -> dict[str, Any]:
        if self.kind == CoeffKind.EXPLICIT:
            return {"explicit": list(self.values)}
        return {self.kind.value: self.r if self.kind == CoeffKind.GEOMETRIC else self.c}


@dataclass(frozen=True, eq=False)
class SeriesSpec:
    """Square operator, coefficient rule and horizon."""

    t: Mat
    rule: CoeffRule
    n_max: int = 50
    _norm: float = field(init=False, repr=False, default=0.0)

    def __post_init__(self) -> None:
        t = as_mat(self.t, "t")
        if t.shape[0] != t.shape[1]:
            raise DimensionMismatchError(f"Series need a square operator, got shape {t.shape}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be positive, got {self.n_max}")
        if self.rule.kind == CoeffKind.EXPLICIT and self.n_max > len(self.rule.values):
            raise ValueError(
                f"n_max = {self.n_max} exceeds the {len(self.rule.values)} listed coefficients",
            )
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "_norm", op_norm(t))

    @property
    def norm(self) -> float:
        return self._norm


class RootTest(NamedTuple):
    converges: bool
    beta_witness: float | None
    sup_value: float
    status: RootStatus


def root_test(spec: SeriesSpec, margin: float = ROOT_MARGIN) -> RootTest:
    """
    Decide convergence of sum alpha_n T^n from sup |alpha_n|^(1/n) ||T||.

    Geometric and constant rules are decided over all n in closed form. An
    explicit list is decided on its listed range only: a small supremum is
    reported as converges-on-horizon and a large one as
    undetermined-at-horizon, since finitely many coefficients cannot rule
    out a convergent tail.

    Returns:
        RootTest with the supremum and, when convergent, the witness beta
    """
    norm = spec.norm
    rule = spec.rule
    if norm == 0.0:
        return RootTest(True, 0.0, 0.0, RootStatus.CONVERGES)

    if rule.kind == CoeffKind.GEOMETRIC:
        sup = abs(rule.r) * norm
    elif rule.kind == CoeffKind.CONSTANT:
        # |c|^(1/n) tends to 1 for every c != 0
        sup = 0.0 if rule.c == 0 else max(abs(rule.c), 1.0) * norm
    else:
        idx = np.arange(1, len(rule.values) + 1, dtype=np.float64)
        sup = float(np.max(np.abs(np.asarray(rule.values)) ** (1.0 / idx))) * norm

    converges = sup <= 1.0 - margin
    if rule.kind == CoeffKind.EXPLICIT:
        status = RootStatus.FINITE_HORIZON if converges else RootStatus.UNDETERMINED
        if not converges:
            logger.warning("Root test on an explicit list is undetermined at horizon %d", len(rule.values))
    else:
        status = RootStatus.CONVERGES if converges else RootStatus.DIVERGES
    return RootTest(converges, sup if converges else None, sup, status)


def _accumulate(spec: SeriesSpec, n: int) -> tuple[list[Mat], list[Mat]]:
    t = spec.t
    power = np.eye(t.shape[0])
    total = np.zeros_like(t)
    terms, sums = [], []
    for i in range(1, n + 1):
        power = power @ t
        term = spec.rule.alpha(i) * power
        total = total + term
        if not np.all(np.isfinite(total)):
            raise SeriesDivergenceError(f"Partial sum S_{i} has non-finite entries")
        terms.append(term)
        sums.append(total.copy())
    return terms, sums


def partial_sum(spec: SeriesSpec, n: int) -> Mat:
    """
    S_n = sum_{i=1..n} alpha_i T^i.

    Raises:
        SeriesDivergenceError: If the accumulation overflows
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    return _accumulate(spec, n)[1][-1]


def partial_sums(spec: SeriesSpec) -> list[Mat]:
    """S_1, ..., S_{n_max} in one pass."""
    return _accumulate(spec, spec.n_max)[1]


def series_limit(spec: SeriesSpec) -> Mat | None:
    """
    Sum of the series when the root test converges, None otherwise.

    Geometric rules use (I - rT)^{-1} rT and constant rules c (I - T)^{-1} T;
    explicit lists fall back to S_{n_max}.
    """
    root = root_test(spec)
    if not root.converges:
        return None
    eye = np.eye(spec.t.shape[0])
    rule = spec.rule
    if rule.kind == CoeffKind.GEOMETRIC:
        rt = rule.r * spec.t
        return np.asarray(sla.solve(eye - rt, rt))
    if rule.kind == CoeffKind.CONSTANT:
        return rule.c * np.asarray(sla.solve(eye - spec.t, spec.t))
    return partial_sum(spec, spec.n_max)


def tail_cauchy_gap(sums: list[Mat]) -> float:
    """Largest ||S_n - S_last|| over the last quartile of the partial sums."""
    if len(sums) < 2:
        return 0.0
    start = min(len(sums) - 1, (3 * len(sums)) // 4)
    last = sums[-1]
    return max(op_norm(s - last) for s in sums[start:])


@dataclass(frozen=True)
class PowerMembershipReport:
    """Memberships of alpha_n T^n, of S_n and of the series limit."""

    table: pd.DataFrame
    root: RootTest
    series_status: str
    limit_lambda_min: float | None
    limit_accepted: bool | None
    limit_norm: float | None
    norm_bound: float | None
    bound_holds: bool | None
    power_limit_accepted: bool | None
    product_spot_checks: list[bool]
    holds: bool
    note: str = CLOSED_FORM_NOTE


def power_membership_run(
    blk: BlockOp,
    lam: float,
    rule: CoeffRule,
    n_max: int,
    spot_checks: int = 5,
    eps: float = 1e-6,
    tol: RankTolerance = DEFAULT_TOL,
    tau: float = TAU_RANGE,
) -> PowerMembershipReport:
    """
    Follow powers and partial sums of T in φ(M, N, lam).

    For every n <= n_max, alpha_n T^n must lie in φ(M, N, lam) and S_n in
    ψ(M, N, lam). When the root test converges the limit of the series is
    checked at lam and its norm compared with 1 / (1 - beta). When the
    powers themselves settle (tail test on consecutive gaps) their limit is
    checked as well. For n <= spot_checks the membership of T^n is
    recomputed through the product rule applied to T^(n-1) and T.

    Args:
        blk: T in block form with M = N
        lam: Level λ
        rule: Coefficient rule
        n_max: Horizon
        spot_checks: Number of product-rule cross-checks
        eps: Threshold of the tail test for the power sequence

    Returns:
        PowerMembershipReport

    Raises:
        DimensionMismatchError: If M != N
        PreconditionError: If T is not in φ(M, N, lam)
    """
    if not np.allclose(blk.m_sub.projector, blk.n_sub.projector, atol=1e-10):
        raise DimensionMismatchError("Powers compose block forms and need M = N")
    phi = phi_membership(blk, lam, tol, tau)
    if not phi.in_phi:
        raise PreconditionError(
            f"Operator is not in φ(M, N, {lam}): lambda_L = {phi.lambda_l}, lambda_R = {phi.lambda_r}",
        )

    t = assemble(blk)
    spec = SeriesSpec(t, rule, n_max)
    terms, sums = _accumulate(spec, n_max)

    def split(x: Mat) -> BlockOp:
        return decompose(x, blk.m_sub, blk.n_sub, blk.m_perp, blk.n_perp)

    rows = []
    for n, (term, total) in enumerate(zip(terms, sums, strict=True), start=1):
        term_phi = phi_membership(split(term), lam, tol, tau)
        sum_report = check(split(total), tol, tau)
        rows.append(
            {
                "n": n,
                "alpha": rule.alpha(n),
                "term_in_phi": term_phi.in_phi,
                "term_lambda_l": term_phi.lambda_l,
                "term_lambda_r": term_phi.lambda_r,
                "sum_complementable": sum_report.complementable,
                "sum_lambda_min": sum_report.lambda_min,
                "sum_in_psi": sum_report.within(lam, SUM_SLACK),
            },
        )
    table = pd.DataFrame(rows)

    spot = []
    power = t
    for _ in range(2, min(spot_checks, n_max) + 1):
        prod = product_closure_check(split(power), blk, lam, tol, tau)
        spot.append(prod.holds)
        power = power @ t

    root = root_test(spec)
    limit_lambda = limit_accepted = limit_norm = bound = bound_ok = None
    if root.converges:
        limit = series_limit(spec)
        assert limit is not None
        limit_report = check(split(limit), tol, tau)
        limit_lambda = limit_report.lambda_min
        limit_accepted = limit_report.within(lam, SUM_SLACK)
        limit_norm = op_norm(limit)
        assert root.beta_witness is not None
        bound = 1.0 / (1.0 - root.beta_witness)
        bound_ok = limit_norm <= bound + 1e-6
        series_status = "checked"
    else:
        series_status = "skipped"
        logger.info("Series limit skipped: root test status %s", root.status)

    power_limit_accepted = None
    if n_max >= 2:
        steps = [op_norm(terms[i] - terms[i - 1]) for i in range(1, n_max)]
        if TailStatistics.vanishes(steps, eps):
            power_limit_accepted = check(split(terms[-1]), tol, tau).within(lam, SUM_SLACK)

    holds = (
        bool(table["term_in_phi"].all())
        and bool(table["sum_in_psi"].all())
        and all(spot)
        and limit_accepted is not False
        and bound_ok is not False
        and power_limit_accepted is not False
    )
    return PowerMembershipReport(
        table=table,
        root=root,
        series_status=series_status,
        limit_lambda_min=limit_lambda,
        limit_accepted=limit_accepted,
        limit_norm=limit_norm,
        norm_bound=bound,
        bound_holds=bound_ok,
        power_limit_accepted=power_limit_accepted,
        product_spot_checks=spot,
        holds=holds,
    )
