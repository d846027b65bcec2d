import math
import time
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from .config import Config
from .density import density_sweep, orthogonal_witness
from .dynamics import (
    COMMUTATOR_TOL,
    DispersionOracle,
    QuantumDynamics,
    dispersion_error,
    dispersion_study,
    field_bound_sweep,
    joint_spectrum,
    local_field_sweep,
    one_particle_energies,
    verify_local_field_ops,
    verify_spectral_condition,
)
from .exceptions import ContinuationError, PrerequisiteError, QuantizerError, UnsupportedRegimeError
from .fock import PhysicalSpace
from .gaussian import (
    CharacteristicFunctional,
    bivariate_moment,
    boundary_drift,
    build_covariance,
    kernel_rows,
    pairing_count,
    perfect_pairings,
    verify_C1,
    verify_C3,
    wick_moment,
)
from .heatkernel import antitimeordered_vector, verify_derivative_bound, verify_lemma
from .i18n import set_language
from .lattice import Reflection, TestFunction, TimeBoundary, random_test_function
from .rp_quantize import (
    assemble_gram,
    check_rp,
    isometry_defect,
    monomial_generators,
    pivoted_cholesky,
    quotient,
    rank_curve,
)

CHECKS = (
    "C1",
    "C2",
    "C3",
    "isometry",
    "wick",
    "transfer",
    "FE1",
    "FE2",
    "localfield",
    "analyticity",
    "lemma",
    "theorem2",
)

# subcommand -> the checks it runs
COMMANDS = {
    "check-rp": ("C1", "C2", "C3", "isometry", "wick"),
    "spectrum": ("transfer", "FE1"),
    "bounds": ("FE2", "localfield"),
    "analyticity": ("analyticity", "lemma"),
    "density": ("theorem2",),
}

ISOMETRY_TOL = 1e-12
WICK_TOL = 1e-12
DISPERSION_TOL = 1e-3


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    FINDING = "finding"


@dataclass
class CheckResult:
    key: str
    verdict: Verdict
    evidence: dict = field(default_factory=dict)
    seconds: float = 0.0
    error: Optional[str] = None

    def to_dict(self) -> dict:
        out = {"verdict": self.verdict.value, "evidence": self.evidence}
        if self.error is not None:
            out["error"] = self.error
        return out

    @classmethod
    def from_dict(cls, key: str, data: dict) -> "CheckResult":
        return cls(key, Verdict(data["verdict"]), data.get("evidence", {}), 0.0, data.get("error"))


@dataclass
class RunReport:
    results: dict[str, CheckResult]
    tables: dict[str, list[dict]]
    # extra JSON artifacts, written as <name>.json
    documents: dict[str, dict] = field(default_factory=dict)

    @property
    def failed(self) -> list[str]:
        return [k for k, r in self.results.items() if r.verdict is Verdict.FAIL]

    def count(self, verdict: Verdict) -> int:
        return sum(r.verdict is verdict for r in self.results.values())

    def constants(self) -> dict:
        def pick(key: str, name: str):
            r = self.results.get(key)
            return r.evidence.get(name) if r is not None else None

        analyticity = self.results.get("analyticity")
        per_eps = analyticity.evidence.get("per_epsilon", []) if analyticity else []
        return {
            "M_star": pick("FE1", "M_star"),
            "M1": {str(e["epsilon"]): e["M1_fit"] for e in per_eps},
            "gamma_fit": {str(e["epsilon"]): e["gamma_fit"] for e in per_eps},
            "gamma_proof": per_eps[0]["gamma_proof"] if per_eps else None,
            "field_bound_ratio": pick("FE2", "sup_full"),
        }


class SuiteRunner:
    def __init__(
        self,
        config: Config,
        *,
        prior: Optional[dict[str, CheckResult]] = None,
        on_message: Optional[Callable[[str], None]] = None,
    ):
        self.config = config
        self.messages = set_language(config.language)
        self._output = on_message or print
        self.prior = prior or {}
        self.tables: dict[str, list[dict]] = {}
        self.documents: dict[str, dict] = {}
        self._results: dict[str, CheckResult] = {}

    @cached_property
    def covariance(self):
        return build_covariance(self.config.geometry, self.config.mass)

    @cached_property
    def functional(self) -> CharacteristicFunctional:
        return CharacteristicFunctional(self.covariance)

    @cached_property
    def space(self) -> PhysicalSpace:
        return PhysicalSpace(self.covariance, self.config.truncation, self.config.rank_tol)

    @cached_property
    def dynamics(self) -> QuantumDynamics:
        return QuantumDynamics.build(self.space)

    @cached_property
    def rp_quotient(self):
        geom = self.config.geometry
        sites = [s for s in geom.sites() if s[0] >= 1]
        gens = monomial_generators(geom, sites, self.config.rp_check_degree)
        return assemble_gram(self.covariance, gens, cap=2 * self.config.rp_check_degree)

    @cached_property
    def m_star(self) -> float:
        earlier = self._results.get("FE1") or self.prior.get("FE1")
        if earlier is not None and earlier.evidence.get("M_star") is not None:
            return float(earlier.evidence["M_star"])
        m, _ = verify_spectral_condition(self.dynamics.H, self.dynamics.momenta, self._oracle)
        return m

    @cached_property
    def derivative_reports(self) -> dict:
        return {
            eps: verify_derivative_bound(
                self.dynamics, eps, self.m_star, self.config.derivative_cap, self.config.sobolev_r
            )
            for eps in self.config.epsilons
        }

    @property
    def _oracle(self) -> DispersionOracle:
        return DispersionOracle(self.config.geometry, self.config.mass)

    def _rng(self, key: str) -> np.random.Generator:
        return np.random.default_rng([self.config.seed, CHECKS.index(key)])

    def run(self, only: Optional[Sequence[str]] = None) -> RunReport:
        keys = [k for k in CHECKS if only is None or k in only]
        for i, key in enumerate(keys, 1):
            self._output(self.messages.t("runner.progress", current=i, total=len(keys), check=key))
            result = self.run_check(key)
            self._results[key] = result
            self._output(self.messages.t(f"runner.verdict_{result.verdict.value}", check=key, seconds=result.seconds))
            if result.error:
                self._output(self.messages.t("runner.error", error=result.error))
        return RunReport(dict(self._results), self.tables, self.documents)

    def run_check(self, key: str) -> CheckResult:
        handler = getattr(self, f"_check_{key.lower()}")
        started = time.perf_counter()
        try:
            verdict, evidence = handler()
            return CheckResult(key, verdict, evidence, time.perf_counter() - started)
        except UnsupportedRegimeError as e:
            return CheckResult(key, Verdict.FINDING, {}, time.perf_counter() - started, str(e))
        except QuantizerError as e:
            return CheckResult(key, Verdict.FAIL, {}, time.perf_counter() - started, str(e))

    def _check_c1(self):
        tol = self.config.op_tol
        report = verify_C1(self.functional, self.config.samples("c1"), self._rng("C1"))
        self.tables["kernel"] = kernel_rows(self.covariance)
        evidence = report.to_dict()
        if max(report.max_spatial_deviation, report.max_reflection_deviation) > tol:
            return Verdict.FAIL, evidence
        if report.max_time_deviation <= tol:
            return Verdict.PASS, evidence
        if self.config.geometry.time_boundary is TimeBoundary.DIRICHLET:
            evidence["boundary_drift"] = boundary_drift(self.config.geometry, self.config.mass)
            return Verdict.FINDING, evidence
        return Verdict.FAIL, evidence

    def _check_c2(self):
        gram = self.rp_quotient
        verdict = check_rp(gram, self.config.rp_tol)
        chol = pivoted_cholesky(gram.matrix, self.config.rank_tol)
        eig_rank = None
        if verdict.passed:
            basis = quotient(gram, self.config.rank_tol)
            eig_rank = basis.rank
            self.documents["quotient"] = basis.to_dict()
        self.tables["gram"] = [
            {"row": i, "col": j, "re": float(v.real), "im": float(v.imag)}
            for (i, j), v in np.ndenumerate(gram.matrix)
        ]
        n = gram.size
        curve = rank_curve(gram, self.config.rank_tol, sorted({max(1, n * j // 8) for j in range(1, 9)}))
        evidence = dict(
            verdict.to_dict(),
            generators=gram.size,
            hermiticity_residual=gram.hermiticity_residual,
            cholesky_rank=chol.rank,
            eigen_rank=eig_rank,
            negative_pivot=chol.negative_pivot,
            rank_curve=[list(step) for step in curve],
        )
        ok = verdict.passed and not chol.negative_pivot and chol.rank == eig_rank
        return (Verdict.PASS if ok else Verdict.FAIL), evidence

    def _check_c3(self):
        geom = self.config.geometry
        rng = self._rng("C3")
        samples = [random_test_function(geom, rng, scale=float(rng.uniform(0.1, 3.0))) for _ in range(self.config.samples("c3"))]
        m_fit, report = verify_C3(self.functional, self.config.sobolev_r, samples)
        ok = report.bounded_by_one and math.isfinite(m_fit)
        return (Verdict.PASS if ok else Verdict.FAIL), report.to_dict()

    def _check_isometry(self):
        gram = self.rp_quotient
        basis = quotient(gram, self.config.rank_tol)
        defect = isometry_defect(basis)

        # the same generators through the Fock realisation
        low = [g for g in gram.generators if g.degree <= self.space.n_max]
        idx = [i for i, g in enumerate(gram.generators) if g.degree <= self.space.n_max]
        coords = np.column_stack([self.space.quantize(g) for g in low])
        fock_defect = float(np.max(np.abs(coords.conj().T @ coords - gram.matrix[np.ix_(idx, idx)])))

        evidence = {"rank": basis.rank, "defect": defect, "fock_defect": fock_defect, "tolerance": ISOMETRY_TOL}
        ok = defect <= ISOMETRY_TOL and fock_defect <= ISOMETRY_TOL
        return (Verdict.PASS if ok else Verdict.FAIL), evidence

    def _check_wick(self):
        geom = self.config.geometry
        rng = self._rng("wick")
        cov = self.covariance
        worst = closed = 0.0
        counts = {}
        for n in range(2, self.config.wick_order + 1, 2):
            fs = [random_test_function(geom, rng) for _ in range(n)]
            pairs = cov.pair_matrix(fs, fs)
            brute = 0.0
            enumerated = 0
            for pairing in perfect_pairings(list(range(n))):
                brute += math.prod(pairs[i, j] for i, j in pairing)
                enumerated += 1
            fast = wick_moment(cov, fs, cap=None)
            worst = max(worst, abs(fast - brute) / max(abs(brute), 1e-300))
            counts[str(n)] = {"enumerated": enumerated, "formula": pairing_count(n)}

            # repeated arguments against the closed form E[phi(f)^p phi(g)^q]
            f, g = fs[0], fs[1]
            p = n // 2 + 1 if n > 2 else n
            expected = bivariate_moment(cov.pair(f, f), cov.pair(g, g), cov.pair(f, g), p, n - p)
            value = wick_moment(cov, [f] * p + [g] * (n - p), cap=None)
            closed = max(closed, abs(value - expected) / max(abs(expected), 1e-300))
        odd = wick_moment(cov, [random_test_function(geom, rng) for _ in range(3)])
        ok = (
            worst <= WICK_TOL
            and closed <= WICK_TOL
            and odd == 0.0
            and all(c["enumerated"] == c["formula"] for c in counts.values())
        )
        evidence = {"max_relative_error": worst, "closed_form_relative_error": closed, "pairings": counts}
        return (Verdict.PASS if ok else Verdict.FAIL), evidence

    def _check_transfer(self):
        dyn = self.dynamics
        tol = self.config.op_tol
        notes = dyn.transfer.notes
        w_transfer = np.linalg.eigvalsh(dyn.transfer.matrix)
        w_h = np.linalg.eigvalsh(dyn.H.matrix)

        geom = self.config.geometry
        study = dispersion_study(geom, self.config.mass) if geom.time_boundary is not TimeBoundary.PERIODIC else {}
        errors = [study[T] for T in sorted(study)]
        evidence = {
            "symmetry_residual": notes["symmetry_residual"],
            "transfer_norm": float(np.max(np.abs(w_transfer))),
            "min_energy": float(w_h[0]),
            "off_block_norm": dyn.transfer.off_block_norm(),
            "semigroup_defect": notes["semigroup_defect"],
            "equivariance_residual": notes["equivariance_residual"],
            "dispersion_error": dispersion_error(self.space, dyn.H),
            "dispersion_by_T": {str(T): v for T, v in study.items()},
            "dispersion_monotone": all(a >= b - 1e-12 for a, b in zip(errors, errors[1:])),
            "one_particle_energies": one_particle_energies(dyn.H).tolist(),
        }
        if (
            evidence["symmetry_residual"] > 1e-12
            or evidence["transfer_norm"] > 1 + tol
            or evidence["min_energy"] < -tol
        ):
            return Verdict.FAIL, evidence
        drift = [evidence["semigroup_defect"], evidence["equivariance_residual"]]
        verdict = max(
            (drift_verdict(v, geom.time_boundary, tol) for v in drift if not math.isnan(v)),
            default=Verdict.PASS,
            key=_severity,
        )
        if evidence["dispersion_error"] > DISPERSION_TOL or not evidence["dispersion_monotone"]:
            verdict = max(verdict, Verdict.FINDING, key=_severity)
        return verdict, evidence

    def _check_fe1(self):
        dyn = self.dynamics
        m_star, report = verify_spectral_condition(dyn.H, dyn.momenta, self._oracle)
        h, p, _ = joint_spectrum(dyn.H, dyn.momenta)
        sectors = np.concatenate([np.full(sl.stop - sl.start, n) for n, sl in enumerate(dyn.H.blocks())])
        rows = []
        for i, (n, e) in enumerate(zip(sectors, h)):
            row = {"sector": int(n), "index": i, "energy": float(e)}
            row.update({f"momentum_{j + 1}": float(v) for j, v in enumerate(p[i])})
            rows.append(row)
        self.tables["spectrum"] = rows
        return (Verdict.PASS if report.passed else Verdict.FAIL), report.to_dict()

    def _check_fe2(self):
        dyn = self.dynamics
        stability = field_bound_sweep(
            self.space, dyn.H, self.config.sobolev_r, self.config.samples("field_bound"), self._rng("FE2")
        )
        return (Verdict.PASS if stability.stable else Verdict.FAIL), stability.to_dict()

    def _check_localfield(self):
        dyn = self.dynamics
        geom = self.config.geometry
        r = self.config.sobolev_r
        stability = local_field_sweep(self.space, dyn.H, r, self.config.samples("local_field"), self._rng("localfield"))
        f = TestFunction.delta(geom, (0, *geom.spatial_points[0]))
        g = TestFunction.delta(geom, (0, *geom.spatial_points[-1]))
        ops = verify_local_field_ops(self.space, dyn.H, f, g, r)
        evidence = dict(ops.to_dict(), stability=stability.to_dict())
        ok = (
            stability.stable
            and ops.commutator_norm <= COMMUTATOR_TOL
            and (ops.weyl_commutator is None or ops.weyl_commutator <= COMMUTATOR_TOL)
        )
        return (Verdict.PASS if ok else Verdict.FAIL), evidence

    def _check_analyticity(self):
        reports = self.derivative_reports
        per_eps = [rep.to_dict() for rep in reports.values()]

        # norms of each D^k should not grow with epsilon
        monotone = True
        ordered = [reports[e] for e in sorted(reports)]
        for small, large in zip(ordered, ordered[1:]):
            for a, b in zip(small.table, large.table):
                if b["norm"] > a["norm"] * (1 + 1e-9) + 1e-14:
                    monotone = False

        ok = monotone and all(
            not rep.fit_failed and rep.gamma_fit <= rep.gamma_proof for rep in reports.values()
        )
        return (Verdict.PASS if ok else Verdict.FAIL), {"per_epsilon": per_eps, "monotone_in_epsilon": monotone}

    def _check_lemma(self):
        space = self.space
        rng = self._rng("lemma")
        x = (0,) * self.config.geometry.s
        out = []
        for eps, report in self.derivative_reports.items():
            A = rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim)
            B = rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim)
            lemma = verify_lemma(self.dynamics, report, A, B, x, self.config.samples("lemma"), rng)
            out.append(dict(lemma.to_dict(), epsilon=eps))
        ok = all(item["passed"] for item in out)
        return (Verdict.PASS if ok else Verdict.FAIL), {"per_epsilon": out}

    def _check_theorem2(self):
        config = self.config
        regions = config.regions
        if not regions:
            return Verdict.PASS, {"regions": []}
        degree = min(config.density_degree, self.space.n_max)
        sweep = density_sweep(
            self.space, regions, [degree], config.rank_tol, config.eps_gap, config.coincident_times
        )

        rows, summaries = [], []
        verdict = Verdict.PASS
        for rep in sweep.reports:
            for n, (dim, rank, gap, sigma) in enumerate(zip(rep.dims, rep.ranks, rep.gaps, rep.min_singular_values)):
                rows.append({
                    "label": rep.label, "degree": n, "dim": dim, "rank": rank,
                    "gap": gap, "min_singular_value": sigma, "seconds": rep.seconds,
                })
            witness_ok = orthogonal_witness(rep) is not None
            summaries.append(dict(rep.to_dict(), witness_verified=witness_ok if not rep.dense else None))
            if not rep.dense:
                verdict = max(verdict, Verdict.FINDING if witness_ok else Verdict.FAIL, key=_severity)
        self.tables["density"] = rows

        evidence = {"regions": summaries, "monotone": sweep.monotone, "violations": [list(v) for v in sweep.violations]}
        if not sweep.monotone:
            verdict = Verdict.FAIL

        # anti-time-ordered fields against the quantized monomial, one point per region time
        first = regions[0]
        points = [first.at_time(t)[0] for t in first.times[:degree]]
        if points and config.geometry.reflection is Reflection.SITE:
            try:
                residual = antitimeordered_vector(self.dynamics, points).equivariance_residual
            except (ContinuationError, UnsupportedRegimeError) as e:
                evidence["anti_time_ordered_error"] = str(e)
            else:
                evidence["anti_time_ordered_residual"] = residual
                drift = drift_verdict(residual, config.geometry.time_boundary, config.op_tol)
                verdict = max(verdict, drift, key=_severity)
        return verdict, evidence


def _severity(verdict: Verdict) -> int:
    return {Verdict.PASS: 0, Verdict.FINDING: 1, Verdict.FAIL: 2}[verdict]


def drift_verdict(residual: float, boundary: TimeBoundary, tol: float) -> Verdict:
    """Time translation residuals are exact off a Dirichlet window; on one they are measured drift."""
    if residual <= tol:
        return Verdict.PASS
    return Verdict.FINDING if boundary is TimeBoundary.DIRICHLET else Verdict.FAIL


def commands_for(keys: Sequence[str]) -> list[str]:
    """Subcommands whose checks cover ``keys``."""
    return [cmd for cmd, checks in COMMANDS.items() if any(k in checks for k in keys)]


def require(prior: dict[str, CheckResult], keys: Sequence[str], messages) -> None:
    missing = [k for k in keys if k not in prior]
    if missing:
        raise PrerequisiteError(
            messages.t("runner.missing_prerequisite", checks=", ".join(missing), commands=", ".join(commands_for(missing)))
        )
