"""Reduced-scale acceptance checks, runnable from the CLI.

Each check is a named invariant; a check fails when it raises. The
eigensolver tolerance can be overridden to confirm that a broken solver
contract is caught by name.
"""

import time
from collections.abc import Callable

import numpy as np
from loguru import logger
from pydantic import BaseModel

from anderson_lab.classify import (
    ExactClassifier,
    NumericalClassifier,
    Verdict,
    classify,
    generic_t_samples,
)
from anderson_lab.grid import build_torus, laplacian
from anderson_lab.perturbation import coefficient_entry, path_sum
from anderson_lab.probability import (
    enumerate_bernoulli,
    exact_bad_prob_prime_cycle,
    lower_bound_bad,
    shift_symmetric_mass,
)
from anderson_lab.services.runner import TrialRunner
from anderson_lab.spectral import (
    DEFAULT_EIGH_TOL,
    Potential,
    cycle_spectrum,
    eigh,
    hamiltonian,
    min_gap,
    vanishing_at,
)
from anderson_lab.symmetry import CertificateReason, find_certificate

SELFTEST_SEED = 20240601


def _expect(ok: bool, message: str) -> None:
    if not ok:
        raise AssertionError(message)


class CheckResult(BaseModel):
    name: str
    passed: bool
    detail: str
    seconds: float


class SelfTestReport(BaseModel):
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def __str__(self) -> str:
        lines = [
            f"{'PASS' if c.passed else 'FAIL'} {c.name} ({c.seconds:.2f}s): {c.detail}"
            for c in self.checks
        ]
        verdict = "all checks passed" if self.passed else f"failed: {', '.join(self.failures)}"
        return "\n".join([*lines, verdict])


class SelfTest:
    """Named acceptance checks at desk scale."""

    def __init__(self, eigh_tol: float = DEFAULT_EIGH_TOL, runner: TrialRunner | None = None):
        self.eigh_tol = eigh_tol
        self.runner = runner or TrialRunner()
        self.rng = np.random.default_rng(SELFTEST_SEED)
        logger.debug(f"SelfTest initialized: eigh_tol={eigh_tol:g}")

    def checks(self) -> list[tuple[str, Callable[[], str]]]:
        return [
            ("eigensolver-reconstruction", self.eigensolver_reconstruction),
            ("cycle-spectrum", self.cycle_spectrum),
            ("prime-cycle-formula", self.prime_cycle_formula),
            ("shift-bound-identity", self.shift_bound_identity),
            ("reflection-cross-oracle", self.reflection_cross_oracle),
            ("continuous-potentials-good", self.continuous_potentials_good),
            ("path-sum-identity", self.path_sum_identity),
            ("localization-trend", self.localization_trend),
            ("certificate-soundness", self.certificate_soundness),
        ]

    def run(self) -> SelfTestReport:
        results = []
        for name, check in self.checks():
            start = time.perf_counter()
            try:
                detail = check()
                passed = True
            except Exception as e:
                detail = f"{type(e).__name__}: {e}"
                passed = False
                logger.error(f"Self-test check {name} failed: {detail}")
            results.append(
                CheckResult(
                    name=name,
                    passed=passed,
                    detail=detail,
                    seconds=time.perf_counter() - start,
                )
            )
        return SelfTestReport(checks=results)

    def eigensolver_reconstruction(self) -> str:
        worst = 0.0
        for _ in range(10):
            n = int(self.rng.integers(2, 41))
            m = self.rng.standard_normal((n, n))
            decomp = eigh((m + m.T) / 2, tol=self.eigh_tol)
            worst = max(worst, decomp.residual, decomp.orthogonality_defect)
        _expect(worst <= 1e-10, f"residual {worst:.3e} above 1e-10")
        return f"worst residual {worst:.2e} over 10 matrices"

    def cycle_spectrum(self) -> str:
        for L in (4, 5, 50):
            values = eigh(laplacian(build_torus([L])), tol=self.eigh_tol).eigenvalues
            err = float(np.abs(values - cycle_spectrum(L)).max())
            _expect(err <= 1e-10, f"L={L}: spectrum error {err:.3e}")
        return "L in (4, 5, 50) match 2 - 2cos(2 pi k / L)"

    def prime_cycle_formula(self) -> str:
        for L in (3, 5, 7):
            grid = build_torus([L])
            for p in (0.3, 0.5):
                enumerated = enumerate_bernoulli(grid, p, ExactClassifier(), self.runner).estimate
                closed = exact_bad_prob_prime_cycle(L, p)
                _expect(abs(enumerated - closed) <= 1e-12, f"L={L} p={p}: {enumerated} vs {closed}")
        return "enumeration equals the closed form for L in (3, 5, 7)"

    def shift_bound_identity(self) -> str:
        for dims in ([5], [3, 3]):
            grid = build_torus(dims)
            for p in (0.1, 0.5):
                mass = shift_symmetric_mass(grid, p, self.runner)
                bound = lower_bound_bad(dims, p)
                _expect(abs(mass - bound) <= 1e-12, f"dims={dims} p={p}: {mass} vs {bound}")
        return "shift-symmetric mass equals the inclusion-exclusion bound"

    def reflection_cross_oracle(self) -> str:
        grid = build_torus([5])
        exact = enumerate_bernoulli(grid, 0.5, ExactClassifier(), self.runner)
        numerical = enumerate_bernoulli(grid, 0.5, NumericalClassifier(), self.runner)
        _expect(
            abs(exact.estimate - numerical.estimate) <= 1e-12,
            f"exact {exact.estimate} vs numerical {numerical.estimate}",
        )
        _expect(numerical.counts_by_verdict[Verdict.INCONCLUSIVE] == 0, "inconclusive patterns")
        return "exact and numerical partitions agree on all 32 patterns of L=5"

    def continuous_potentials_good(self) -> str:
        for dims in ([5], [3, 3]):
            grid = build_torus(dims)
            for _ in range(20):
                v = Potential(self.rng.uniform(-1.0, 1.0, grid.n), "uniform(-1,1)")
                verdict = classify(grid, v).verdict
                _expect(verdict == Verdict.GOOD_NUMERICAL, f"{dims}: {verdict} for {v}")
        return "40 uniform potentials classify GoodNumerical"

    def path_sum_identity(self) -> str:
        for _ in range(5):
            grid = build_torus([int(self.rng.integers(3, 9))])
            a = laplacian(grid)
            d = self.rng.permutation(grid.n).astype(float)
            k = int(self.rng.integers(grid.n))
            for i in range(grid.n):
                if i == k:
                    continue
                entry = coefficient_entry(d, a, k, i)
                total = path_sum(d, a, i, k)
                _expect(abs(entry - total) <= 1e-12, f"i={i} k={k}: {entry} vs {total}")
        return "minimal-path sums equal propagator powers on 5 cycles"

    def localization_trend(self) -> str:
        grid = build_torus([50])
        v = Potential(self.rng.uniform(-1.0, 1.0, grid.n), "uniform(-1,1)")

        def mean_ipr(t: float) -> float:
            vectors = eigh(hamiltonian(grid, v, t)).eigenvectors
            return float(np.mean(np.sum(vectors**4, axis=0)))

        weak, strong = mean_ipr(0.1), mean_ipr(5.0)
        _expect(strong > weak, f"mean IPR {strong:.4f} at t=5 not above {weak:.4f} at t=0.1")
        return f"mean IPR {weak:.4f} at t=0.1 < {strong:.4f} at t=5"

    def certificate_soundness(self) -> str:
        samples = generic_t_samples(SELFTEST_SEED)
        seen = 0
        for dims in ([5], [3, 3]):
            grid = build_torus(dims)
            for _ in range(30):
                v = Potential(np.where(self.rng.random(grid.n) < 0.5, 1.0, -1.0), "bernoulli")
                cert = find_certificate(grid, v)
                if cert is None:
                    continue
                seen += 1
                for t in samples:
                    decomp = eigh(hamiltonian(grid, v, t))
                    if cert.reason == CertificateReason.DEGENERATE_SPECTRUM:
                        gap = min_gap(decomp.eigenvalues)
                        _expect(gap < 1e-6, f"{cert} but min gap {gap:.3e} at t={t:.4f}")
                    else:
                        entry = vanishing_at(decomp, cert.fixed_points[0])
                        _expect(entry < 1e-6, f"{cert} but |phi| {entry:.3e} at t={t:.4f}")
        return f"{seen} certificates confirmed at {len(samples)} t values"


def run_selftest(eigh_tol: float = DEFAULT_EIGH_TOL, threads: int | None = None) -> SelfTestReport:
    """Run every check; the report lists failures by name."""
    report = SelfTest(eigh_tol, TrialRunner(threads)).run()
    total = len(report.checks)
    logger.info(f"Self-test: {total - len(report.failures)}/{total} passed")
    return report
