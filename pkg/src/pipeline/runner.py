import dataclasses
import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from tqdm import tqdm

from config.settings import Settings, Tolerances
from src.complementability.comptest import (
    ando_witnesses,
    ball_inclusion_residual,
    check,
    complement_partition,
    phi_membership,
    product_closure_check,
    psi_membership,
    witness_residuals,
)
from src.complementability.schur import (
    SchurResult,
    SchurRoute,
    route_agreement,
    schur_classical,
    schur_reduced,
    schur_routes,
    schur_weak,
)
from src.convergence.convlab import (
    block_convergence_check,
    boundary_report,
    closure_probe,
    detect_convergence,
    lambda_growth_probe,
    theorem_conv_criterion,
)
from src.convergence.generators import SequenceKind, gen_sequence
from src.convergence.powseries import CoeffRule, SeriesSpec, partial_sums, power_membership_run, tail_cauchy_gap
from src.errors import NotComplementableError, PreconditionError, ScenarioError, SchurkitError, SingularBlockError
from src.linalg.numkernel import op_norm
from src.operators.blockops import BlockOp, assemble, complement, decompose, norm_sandwich
from src.operators.douglas import (
    douglas_inf_check,
    inclusion_defect,
    kernel_report,
    range_included,
    reduced_solution,
)
from src.pipeline.report import build_report, write_report
from src.pipeline.scenario import Command, Scenario

RECONSTRUCTION_TOL = 1e-10
WITNESS_TOL = 1e-10
CHAR2_SLACK = 1e-8
PERP_NOTE = "ψ(M⊥, N⊥, λ) is reported for φ members but not asserted"
BOUNDARY_KINDS = (SequenceKind.PTWISE_KILLER, SequenceKind.PTWISE2_KILLER)


@dataclass
class Outcome:
    """What a command handler hands back to the runner."""

    verdicts: dict[str, Any] = field(default_factory=dict)
    certificates: dict[str, Any] = field(default_factory=dict)
    tables: dict[str, Any] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    checks: dict[str, bool] = field(default_factory=dict)


@dataclass(frozen=True)
class RunResult:
    """Exit code and report of one scenario."""

    name: str
    exit_code: int
    report: dict[str, Any] | None
    path: Path | None = None
    error: str | None = None


class ScenarioRunner:
    def __init__(
        self,
        settings: Settings,
        out_dir: Path | None = None,
        tol_range: float | None = None,
        seed: int | None = None,
        progress: bool = True,
        write: bool = True,
    ):
        """
        Initialize the runner.

        Args:
            settings: Effective settings from config file and environment
            out_dir: Report directory, settings.output_dir when None
            tol_range: Command-line override of the range tolerance
            seed: Command-line override of every scenario seed
            progress: Show progress bars
            write: Write report files
        """
        self.settings = settings
        self.out_dir = Path(out_dir) if out_dir is not None else settings.output_dir
        self.tol_range = tol_range
        self.seed = seed
        self.progress = progress
        self.write = write
        self.logger = logging.getLogger("schurkit")
        self.results: dict[str, RunResult] = {}
        self._handlers: dict[Command, Callable[[Scenario, Tolerances], Outcome]] = {
            Command.DECOMPOSE: self._run_decompose,
            Command.CHECK: self._run_check,
            Command.SCHUR: self._run_schur,
            Command.DOUGLAS: self._run_douglas,
            Command.WITNESSES: self._run_witnesses,
            Command.PHI: self._run_phi,
            Command.CONVERGE: self._run_converge,
            Command.CLOSURE: self._run_closure,
            Command.LAMBDA_GROWTH: self._run_lambda_growth,
            Command.SERIES: self._run_series,
            Command.PRODUCT_CLOSURE: self._run_product_closure,
        }

    def tolerances_for(self, scenario: Scenario) -> Tolerances:
        """Settings tolerances, then the scenario block, then the command-line flag."""
        try:
            tol = self.settings.tolerances.with_overrides(**scenario.tolerances)
            return tol.with_overrides(range=self.tol_range)
        except ValueError as e:
            raise ScenarioError(f"Scenario '{scenario.name}': {e}") from e

    def report_path(self, scenario: Scenario) -> Path:
        if scenario.output:
            path = Path(scenario.output)
            return path if path.is_absolute() else self.out_dir / path
        return self.out_dir / f"{scenario.name}.json"

    def run(self, scenario: Scenario) -> RunResult:
        """
        Execute one scenario and write its report.

        Returns:
            RunResult with exit code 0 when every assertion passed, else 1

        Raises:
            SchurkitError: On invalid inputs (mapped to exit code 2 by the CLI)
        """
        try:
            if self.seed is not None:
                scenario = dataclasses.replace(scenario, seed=self.seed, seed_given=True)
            elif not scenario.seed_given:
                scenario = dataclasses.replace(scenario, seed=self.settings.seed, seed_given=True)
            self.logger.info(f"Running scenario '{scenario.name}' ({scenario.command})")
            tol = self.tolerances_for(scenario)

            try:
                outcome = self._handlers[scenario.command](scenario, tol)
            except PreconditionError as e:
                self.logger.warning(f"Scenario '{scenario.name}': precondition failed: {e}")
                outcome = Outcome(
                    verdicts={"precondition_met": False},
                    certificates={"precondition_error": str(e)},
                )
                if not any(x.key == "precondition_met" for x in scenario.expect):
                    outcome.checks["precondition_met"] = False

            assertions = self._assertions(scenario, outcome)
            exit_code = 0 if all(a["passed"] for a in assertions) else 1
            report = build_report(
                scenario=scenario.to_dict(),
                tolerances=tol.to_dict(),
                verdicts=outcome.verdicts,
                certificates=outcome.certificates,
                assertions=assertions,
                tables=outcome.tables,
                exit_code=exit_code,
                notes=outcome.notes,
            )

            path = None
            if self.write:
                path = write_report(report, self.report_path(scenario))
                self.logger.info(f"Report for '{scenario.name}' saved to {path}")
            if exit_code:
                failed = [a["name"] for a in assertions if not a["passed"]]
                self.logger.warning(f"Scenario '{scenario.name}' failed assertions {failed}")

            result = RunResult(scenario.name, exit_code, report, path)
            self.results[scenario.name] = result
            return result

        except Exception as e:
            self.logger.error(f"Scenario '{scenario.name}' failed: {e}")
            raise

    def run_batch(self, scenarios: list[Scenario], jobs: int = 1) -> list[RunResult]:
        """
        Run independent scenarios, in parallel when jobs > 1.

        Invalid inputs of one scenario do not stop the others; that scenario
        gets exit code 2.
        """

        def guarded(s: Scenario) -> RunResult:
            try:
                return self.run(s)
            except (SchurkitError, ValueError, FileNotFoundError) as e:
                return RunResult(s.name, 2, None, error=str(e))

        if jobs <= 1 or len(scenarios) == 1:
            return [guarded(s) for s in tqdm(scenarios, desc="Scenarios", disable=not self.progress)]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(
                tqdm(
                    pool.map(guarded, scenarios),
                    total=len(scenarios),
                    desc="Scenarios",
                    disable=not self.progress,
                ),
            )

    def _assertions(self, scenario: Scenario, outcome: Outcome) -> list[dict[str, Any]]:
        observed = {**outcome.certificates, **outcome.verdicts}
        assertions = [
            {"name": name, "kind": "invariant", "expected": True, "observed": ok, "passed": bool(ok)}
            for name, ok in outcome.checks.items()
        ]
        for expectation in scenario.expect:
            value = observed.get(expectation.key)
            assertions.append(
                {
                    "name": expectation.key,
                    "kind": "expect",
                    "expected": expectation.to_dict(),
                    "observed": value,
                    "passed": expectation.evaluate(value),
                },
            )
        return assertions

    def _split(self, scenario: Scenario, key: str = "matrix") -> BlockOp:
        t = scenario.matrix(key)
        m = scenario.subspace("m_basis", t.shape[1])
        n = scenario.subspace("n_basis", t.shape[0])
        return decompose(t, m, n)

    def _ball_samples(self, scenario: Scenario) -> int:
        """``ball_samples: true`` takes the configured sample count."""
        if scenario.inputs.get("ball_samples") is True:
            return self.settings.samples
        return scenario.integer("ball_samples")

    def _run_decompose(self, scenario: Scenario, tol: Tolerances) -> Outcome:
        blk = self._split(scenario)
        t = scenario.matrix("matrix")
        error = float(np.linalg.norm(assemble(blk) - t) / (1.0 + np.linalg.norm(t)))
        sandwich = norm_sandwich(blk)
        roundtrip = error <= RECONSTRUCTION_TOL
        return Outcome(
            verdicts={"roundtrip_ok": roundtrip, "sandwich_holds": sandwich.holds},
            certificates={
                "reconstruction_error": error,
                "norm": sandwich.norm,
                "max_block_norm": sandwich.lower,
                "sum_block_norms": sandwich.upper,
                "block_norms": {k: op_norm(getattr(blk, k)) for k in "abcd"},
                "dims": {
                    "m": blk.m_sub.dim,
                    "m_perp": blk.m_perp.dim,
                    "n": blk.n_sub.dim,
                    "n_perp": blk.n_perp.dim,
                },
            },
            checks={"roundtrip_ok": roundtrip, "sandwich_holds": sandwich.holds},
        )

    def _run_check(self, scenario: Scenario, tol: Tolerances) -> Outcome:
        blk = self._split(scenario)
        report = check(blk, tol.rank, tol.range)
        perp = check(complement_partition(blk), tol.rank, tol.range)
        outcome = Outcome(
            verdicts={
                "complementable": report.complementable,
                "complement_partition_complementable": perp.complementable,
            },
            certificates={
                "residual_c_in_d": report.residual_c_in_d,
                "residual_bstar_in_dstar": report.residual_bstar_in_dstar,
                "defect_c_in_d": inclusion_defect(blk.c, blk.d, tol.rank),
                "defect_bstar_in_dstar": inclusion_defect(blk.b.T, blk.d.T, tol.rank),
                "lambda_min": report.lambda_min,
                "lambda_char2_bound": report.lambda_char2_bound,
                "lambda_min_perp": perp.lambda_min,
            },
        )
        if "lambda" in scenario.inputs:
            outcome.verdicts["in_psi"] = report.within(scenario.number("lambda"))
        if report.complementable:
            assert report.lambda_min is not None and report.lambda_char2_bound is not None
            assert report.z is not None
            fit = float(np.linalg.norm(blk.d @ report.z - blk.c) / (1.0 + np.linalg.norm(blk.c)))
            outcome.certificates["factorization_residual"] = fit
            outcome.checks["char2_bound"] = report.lambda_min <= report.lambda_char2_bound + CHAR2_SLACK
            outcome.checks["factorization"] = fit <= tol.douglas
            if "ball_samples" in scenario.inputs:
                lam = report.lambda_min + 1e-6
                samples = self._ball_samples(scenario)
                res_c = ball_inclusion_residual(blk.c, blk.d, lam, samples, scenario.seed, tol.rank, tol.range)
                res_b = ball_inclusion_residual(blk.b.T, blk.d.T, lam, samples, scenario.seed, tol.rank, tol.range)
                outcome.certificates["ball_residual"] = max(res_c, res_b)
                outcome.checks["ball_inclusion"] = max(res_c, res_b) == 0.0
        return outcome

    def _run_schur(self, scenario: Scenario, tol: Tolerances) -> Outcome:
        blk = self._split(scenario)
        route = scenario.inputs.get("route", "all")
        results: dict[SchurRoute, SchurResult] = {}
        skipped = None
        try:
            if route == "all":
                results = schur_routes(blk, tol.rank, tol.range)
            elif route == "classical":
                results = {SchurRoute.CLASSICAL: schur_classical(blk, tol.rank)}
            elif route == "reduced":
                results = {SchurRoute.REDUCED_Z: schur_reduced(blk, tol.rank, tol.range)}
            else:
                results = {SchurRoute.WEAK_EF: schur_weak(blk, tol.rank, tol.range)}
        except (SingularBlockError, NotComplementableError) as e:
            skipped = str(e)

        agreement = route_agreement(results)
        certificates: dict[str, Any] = {"route_agreement": agreement}
        for name, result in results.items():
            certificates[f"core_{name}"] = result.core
            if result.condition is not None:
                certificates[f"condition_{name}"] = result.condition
        first = next(iter(results.values()), None)
        if first is not None and first.core.size == 1:
            certificates["core_scalar"] = float(first.core.item())
        return Outcome(
            verdicts={
                "routes": [str(r) for r in results],
                "route_applicable": bool(results),
                "routes_agree": agreement <= 1e-8,
            },
            certificates=certificates,
            notes=[f"Route {route} not applicable: {skipped}"] if skipped else [],
            checks={"routes_agree": agreement <= 1e-8},
        )

    def _run_douglas(self, scenario: Scenario, tol: Tolerances) -> Outcome:
        a, b = scenario.matrix("a"), scenario.matrix("b")
        included, residual = range_included(a, b, tol.rank, tol.range)
        if not included:
            return Outcome(verdicts={"included": False}, certificates={"range_residual": residual})

        sol = reduced_solution(a, b, tol.rank, tol.range)
        inf = douglas_inf_check(a, b, sol, scenario.integer("grid", 60), tol.rank, tol.range, tol.psd)
        kernels = kernel_report(a, b, sol.c, tol.rank)
        return Outcome(
            verdicts={
                "included": True,
                "matches_sq_norm": inf.matches_sq_norm,
                "matches_linear_norm": inf.matches_linear_norm,
                "ker_a_equals_ker_c": kernels.ker_a_equals_ker_c,
                "ker_a_equals_ker_b": kernels.ker_a_equals_ker_b,
            },
            certificates={
                "range_residual": residual,
                "factorization_residual": sol.residual,
                "solution_range_residual": sol.range_residual,
                "norm_c": sol.norm_c,
                "norm_c_squared": sol.norm_c**2,
                "inf_lambda": inf.inf_lambda,
                "solution": sol.c,
            },
            notes=["The linear identity ||C|| = inf λ and N(A) = N(B) are reported, not asserted"],
            checks={
                "factorization": sol.residual <= tol.douglas,
                "range_constraint": sol.range_residual <= tol.douglas,
                "matches_sq_norm": inf.matches_sq_norm,
                "ker_a_equals_ker_c": kernels.ker_a_equals_ker_c,
            },
        )

    def _run_witnesses(self, scenario: Scenario, tol: Tolerances) -> Outcome:
        blk = self._split(scenario)
        report = check(blk, tol.rank, tol.range)
        if not report.complementable:
            return Outcome(
                verdicts={"complementable": False},
                certificates={
                    "residual_c_in_d": report.residual_c_in_d,
                    "residual_bstar_in_dstar": report.residual_bstar_in_dstar,
                },
            )
        witnesses = ando_witnesses(blk, tol.rank, tol.range)
        residuals = witness_residuals(blk, witnesses)
        worst = max(residuals.values())
        return Outcome(
            verdicts={"complementable": True, "identities_hold": worst <= WITNESS_TOL},
            certificates={**residuals, "max_residual": worst, "m_r": witnesses.m_r, "m_ell": witnesses.m_ell},
            checks={"identities_hold": worst <= WITNESS_TOL},
        )

    def _run_phi(self, scenario: Scenario, tol: Tolerances) -> Outcome:
        blk = self._split(scenario)
        lam = scenario.number("lambda")
        phi = phi_membership(blk, lam, tol.rank, tol.range)
        in_psi, psi = psi_membership(blk, lam, tol.rank, tol.range)
        in_psi_perp, psi_perp = psi_membership(complement_partition(blk), lam, tol.rank, tol.range)
        outcome = Outcome(
            verdicts={
                "in_phi_l": phi.in_phi_l,
                "in_phi_r": phi.in_phi_r,
                "in_phi": phi.in_phi,
                "in_psi": in_psi,
                "in_psi_perp": in_psi_perp,
            },
            certificates={
                "lambda_l": phi.lambda_l,
                "lambda_r": phi.lambda_r,
                "residual_l": phi.residual_l,
                "residual_r": phi.residual_r,
                "lambda_min": psi.lambda_min,
                "lambda_min_perp": psi_perp.lambda_min,
            },
            notes=[PERP_NOTE],
        )
        if phi.in_phi:
            outcome.checks["phi_inside_psi"] = in_psi
        return outcome

    def _run_converge(self, scenario: Scenario, tol: Tolerances) -> Outcome:
        seq = gen_sequence(scenario.sequence_params())
        samples = scenario.integer("samples", self.settings.samples)
        decay = scenario.inputs.get("sample_decay")
        decay = None if decay is None else float(decay)
        canonical = bool(scenario.inputs.get("include_canonical", True))
        eps = tol.conv

        verdict = detect_convergence(
            seq,
            samples=samples,
            seed=scenario.seed,
            eps=eps,
            sample_decay=decay,
            include_canonical=canonical,
            progress=self.progress,
        )
        blocks = block_convergence_check(seq, eps=eps)
        outcome = Outcome(
            verdicts={
                "uniform": verdict.uniform,
                "strong": verdict.strong,
                "strong_label": verdict.label,
                "block_inequalities_hold": blocks.inequalities_hold,
                "total_uniform": blocks.total_uniform,
                "blocks_uniform": blocks.blocks_uniform,
            },
            certificates={
                "final_uniform_gap": float(verdict.uniform_gaps[-1]),
                "final_max_sample_gap": float(verdict.strong_gaps[-1].max()),
                "uniform_summary": verdict.summary,
            },
            tables={"convergence": verdict.table(), "blocks": blocks.table},
            checks={
                "uniform_implies_strong": verdict.strong or not verdict.uniform,
                "block_inequalities_hold": blocks.inequalities_hold,
                "block_equivalence": blocks.equivalent,
            },
        )

        try:
            criterion = theorem_conv_criterion(seq, eps=eps, tol=tol.rank, tau=tol.range)
        except PreconditionError as e:
            outcome.notes.append(f"Convergence criteria skipped: {e}")
        else:
            outcome.verdicts.update(
                {
                    "criterion_holds": criterion.criterion_holds,
                    "bounded_lambda": criterion.bounded_lambda,
                    "gamma_criterion": criterion.gamma_criterion,
                    "limit_complementable": criterion.limit_complementable,
                    "limit_within_sup": criterion.limit_within_sup,
                },
            )
            outcome.certificates["lambda_limit"] = criterion.lambda_limit
            outcome.certificates["final_product"] = float(criterion.table["product"].iloc[-1])
            outcome.certificates["final_lambda_min"] = float(criterion.table["lambda_min"].iloc[-1])
            outcome.tables["criterion"] = criterion.table
            outcome.checks["criterion_consistent"] = criterion.consistent

        if seq.kind in BOUNDARY_KINDS:
            boundary = boundary_report(
                seq,
                samples=samples,
                seed=scenario.seed,
                eps=eps,
                sample_decay=decay,
                include_canonical=canonical,
                tol=tol.rank,
                tau=tol.range,
            )
            outcome.verdicts.update(
                {
                    "boundary_holds": boundary.holds,
                    "limit_complementable": boundary.limit_complementable,
                    "c_strong": boundary.c_strong,
                },
            )
            outcome.certificates.update(
                {"delta": boundary.delta, "min_defect": boundary.min_defect, "rank_d": boundary.rank_d},
            )
            outcome.tables["boundary"] = boundary.table
        return outcome

    def _run_closure(self, scenario: Scenario, tol: Tolerances) -> Outcome:
        report = closure_probe(
            lam=scenario.number("lambda"),
            trials=scenario.integer("trials"),
            seed=scenario.seed,
            dim=scenario.integer("dim", 8),
            split=scenario.integer("split", 4),
            n_max=scenario.integer("n_max", 30),
            constant=bool(scenario.inputs.get("constant", False)),
            tol=tol.rank,
            tau=tol.range,
            progress=self.progress,
        )
        return Outcome(
            verdicts={"holds": report.holds},
            certificates={"counterexamples": report.counterexamples, "max_limit_lambda": report.max_limit_lambda},
            tables={"trials": report.table},
            checks={"no_counterexample": report.holds},
        )

    def _run_lambda_growth(self, scenario: Scenario, tol: Tolerances) -> Outcome:
        dims = scenario.inputs["dims"]
        if not isinstance(dims, list) or not all(isinstance(k, int) and k > 0 for k in dims):
            raise ScenarioError(f"Scenario '{scenario.name}': dims must be a list of positive integers")
        report = lambda_growth_probe(dims, tol=tol.rank, tau=tol.range)
        table = report.table
        doubling = [
            float(table["ratio"].iloc[i])
            for i in range(1, len(dims))
            if dims[i] == 2 * dims[i - 1] and dims[i - 1] >= 8
        ]
        all_complementable = bool(table["complementable"].all())
        return Outcome(
            verdicts={"strictly_increasing": report.strictly_increasing, "all_complementable": all_complementable},
            certificates={
                "overall_ratio": report.overall_ratio,
                "min_doubling_ratio": min(doubling) if doubling else None,
                "lambda_min": table["lambda_min"].to_numpy(),
            },
            tables={"growth": table},
            checks={"all_complementable": all_complementable, "strictly_increasing": report.strictly_increasing},
        )

    def _run_series(self, scenario: Scenario, tol: Tolerances) -> Outcome:
        blk = self._split(scenario)
        lam = scenario.number("lambda")
        rule = CoeffRule.from_dict(scenario.inputs["coeff"])
        n_max = scenario.integer("n_max")
        report = power_membership_run(blk, lam, rule, n_max, eps=tol.conv, tol=tol.rank, tau=tol.range)

        certificates: dict[str, Any] = {
            "sup_value": report.root.sup_value,
            "beta_witness": report.root.beta_witness,
            "limit_lambda_min": report.limit_lambda_min,
            "limit_norm": report.limit_norm,
            "norm_bound": report.norm_bound,
        }
        if report.root.converges:
            certificates["cauchy_gap"] = tail_cauchy_gap(partial_sums(SeriesSpec(assemble(blk), rule, n_max)))
        return Outcome(
            verdicts={
                "holds": report.holds,
                "root_converges": report.root.converges,
                "root_status": report.root.status,
                "series_status": report.series_status,
                "all_terms_in_phi": bool(report.table["term_in_phi"].all()),
                "all_sums_in_psi": bool(report.table["sum_in_psi"].all()),
                "limit_accepted": report.limit_accepted,
                "bound_holds": report.bound_holds,
                "power_limit_accepted": report.power_limit_accepted,
            },
            certificates=certificates,
            tables={"powers": report.table},
            notes=[report.note],
            checks={"memberships_hold": report.holds},
        )

    def _run_product_closure(self, scenario: Scenario, tol: Tolerances) -> Outcome:
        t1, t2 = scenario.matrix("t1"), scenario.matrix("t2")
        if t1.shape != t2.shape:
            raise ScenarioError(f"Scenario '{scenario.name}': t1 {t1.shape} and t2 {t2.shape} differ in shape")
        m = scenario.subspace("m_basis", t1.shape[1])
        n = scenario.subspace("n_basis", t1.shape[0])
        m_perp, n_perp = complement(m), complement(n)
        blk1 = decompose(t1, m, n, m_perp, n_perp)
        blk2 = decompose(t2, m, n, m_perp, n_perp)
        report = product_closure_check(blk1, blk2, scenario.number("lambda"), tol.rank, tol.range)
        return Outcome(
            verdicts={
                "holds": report.holds,
                "in_phi_l": report.in_phi_l,
                "in_phi_r": report.in_phi_r,
                "in_phi": report.in_phi,
                "in_psi": report.in_psi,
                "in_psi_perp": report.in_psi_perp,
            },
            certificates={"lambda_min": report.lambda_min, "lambda_min_perp": report.lambda_min_perp},
            notes=[PERP_NOTE],
            checks={"product_rule": report.holds},
        )

