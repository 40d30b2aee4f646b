"""Good/bad verdicts for potentials and symmetric pairs."""

from abc import ABC, abstractmethod
from collections.abc import Callable, Sequence
from enum import StrEnum
from typing import ClassVar

import numpy as np
import numpy.typing as npt
from loguru import logger
from pydantic import BaseModel, Field

from anderson_lab.errors import (
    ConfigError,
    EigenSolverError,
    PoolCapError,
    PotentialError,
    PrimeRequiredError,
)
from anderson_lab.grid import SymmetricMatrix, TorusGrid
from anderson_lab.services.runner import TrialRunner
from anderson_lab.spectral import (
    DEFAULT_ENTRY_TOL,
    ConditionReport,
    Potential,
    condition_report,
    pair_condition_report,
)
from anderson_lab.symmetry import (
    DEFAULT_POOL_CAP,
    SymmetryCertificate,
    automorphism_pool,
    certify,
    find_certificate,
    reflection_centers,
    reflection_perm,
)
from anderson_lab.utils import is_prime

DEFAULT_T_SAMPLES = 3
T_SAMPLE_RANGE = (0.5, 2.0)
# A failing sample counts as clearly bad below tolerance * AMBIGUITY_FACTOR.
AMBIGUITY_FACTOR = 1e-3
ENUMERATION_CAP = 24
NUMERICAL_ENUMERATION_CAP = 12


class Verdict(StrEnum):
    GOOD_EXACT = "GoodExact"
    GOOD_NUMERICAL = "GoodNumerical"
    BAD_CERTIFIED = "BadCertified"
    BAD_NUMERICAL = "BadNumerical"
    INCONCLUSIVE = "Inconclusive"

    @property
    def is_good(self) -> bool:
        return self in (Verdict.GOOD_EXACT, Verdict.GOOD_NUMERICAL)

    @property
    def is_bad(self) -> bool:
        return self in (Verdict.BAD_CERTIFIED, Verdict.BAD_NUMERICAL)


class ClassifyParams(BaseModel):
    """Knobs of the classification pipeline."""

    t_samples: int = Field(default=DEFAULT_T_SAMPLES, ge=1)
    seed: int = 0
    gap_tol: float | None = Field(default=None, gt=0)
    entry_tol: float = Field(default=DEFAULT_ENTRY_TOL, gt=0)
    solver: str | None = None
    pool_cap: int = Field(default=DEFAULT_POOL_CAP, ge=1)
    use_certificates: bool = True
    use_exact: bool = True


class Classification(BaseModel):
    """A verdict together with the evidence behind it."""

    verdict: Verdict
    certificate: SymmetryCertificate | None = None
    reflection_centers: list[int] | None = None
    t_samples: list[float] = []
    reports: list[ConditionReport] = []
    params: ClassifyParams
    diagnostics: list[str] = []

    def __str__(self) -> str:
        if self.certificate is not None:
            return f"{self.verdict} [{self.certificate}]"
        if self.verdict == Verdict.GOOD_EXACT:
            return f"{self.verdict} [no reflection center]"
        return f"{self.verdict} [{len(self.reports)} t samples]"


def generic_t_samples(seed: int, count: int = DEFAULT_T_SAMPLES) -> list[float]:
    """
    Distinct seeded couplings in [0.5, 2.0].

    Raises:
        ValueError: If count < 1
    """
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    rng = np.random.default_rng(seed)
    low, high = T_SAMPLE_RANGE
    samples: list[float] = []
    while len(samples) < count:
        t = float(rng.uniform(low, high))
        if t not in samples:
            samples.append(t)
    return samples


def _sample_status(report: ConditionReport) -> str:
    """'good', 'bad' (clearly failing) or 'ambiguous'."""
    if report.good:
        return "good"
    # The entry check is meaningless inside a degenerate eigenspace.
    if not report.simple:
        clear = report.min_gap < report.gap_tol * AMBIGUITY_FACTOR
    else:
        clear = report.min_entry < report.entry_tol * AMBIGUITY_FACTOR
    return "bad" if clear else "ambiguous"


def _numerical(
    report_at: Callable[[float], ConditionReport],
    params: ClassifyParams,
    diagnostics: list[str],
) -> Classification:
    samples = generic_t_samples(params.seed, params.t_samples)
    reports: list[ConditionReport] = []
    try:
        for t in samples:
            reports.append(report_at(t))
    except EigenSolverError as e:
        logger.warning(f"Numerical route inconclusive: {e}")
        diagnostics.append(str(e))
        return Classification(
            verdict=Verdict.INCONCLUSIVE,
            t_samples=samples,
            reports=reports,
            params=params,
            diagnostics=diagnostics,
        )

    statuses = [_sample_status(r) for r in reports]
    if "good" in statuses:
        verdict = Verdict.GOOD_NUMERICAL
    elif all(s == "bad" for s in statuses):
        verdict = Verdict.BAD_NUMERICAL
    else:
        verdict = Verdict.INCONCLUSIVE
        diagnostics.append(f"Sample statuses {statuses} are tolerance-ambiguous")
    logger.debug(f"Numerical verdict {verdict}: {statuses}")
    return Classification(
        verdict=verdict,
        t_samples=samples,
        reports=reports,
        params=params,
        diagnostics=diagnostics,
    )


def classify(
    grid: TorusGrid, v: Potential, params: ClassifyParams | None = None
) -> Classification:
    """
    Classify a potential on a torus as good or bad.

    Runs shared-symmetry certificates first, then the reflection criterion on
    prime cycles for two-valued +-c patterns, then a sweep over generic t samples.

    Args:
        grid: Torus grid
        v: Potential with one entry per vertex
        params: Pipeline knobs; defaults to ClassifyParams()

    Returns:
        Classification with its evidence

    Raises:
        PotentialError: If v does not fit the grid
    """
    params = params or ClassifyParams()
    v.check_grid(grid)
    diagnostics: list[str] = []

    if params.use_certificates:
        try:
            cert = find_certificate(grid, v, params.pool_cap)
        except PoolCapError as e:
            diagnostics.append(f"No certificate search: {e}")
            cert = None
        if cert is not None:
            return Classification(
                verdict=Verdict.BAD_CERTIFIED,
                certificate=cert,
                params=params,
                diagnostics=diagnostics,
            )

    if params.use_exact and grid.d == 1 and is_prime(grid.n) and v.is_scaled_sign_pattern:
        centers = reflection_centers(v)
        if not centers:
            return Classification(
                verdict=Verdict.GOOD_EXACT,
                reflection_centers=[],
                params=params,
                diagnostics=diagnostics,
            )
        cert = certify(grid, reflection_perm(grid, [centers[0]]), v)
        return Classification(
            verdict=Verdict.BAD_CERTIFIED,
            certificate=cert,
            reflection_centers=centers,
            params=params,
            diagnostics=diagnostics,
        )

    return _numerical(
        lambda t: condition_report(
            grid, v, t, params.gap_tol, params.entry_tol, params.solver
        ),
        params,
        diagnostics,
    )


def classify_pair(
    a: SymmetricMatrix, b: SymmetricMatrix, params: ClassifyParams | None = None
) -> Classification:
    """Numerical verdict for the family A + tB of two symmetric matrices."""
    params = params or ClassifyParams()
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise PotentialError(f"Pair shapes {a.shape} and {b.shape} are not matching squares")
    return _numerical(
        lambda t: pair_condition_report(a, b, t, params.gap_tol, params.entry_tol, params.solver),
        params,
        [],
    )


def classify_batch(
    grid: TorusGrid,
    potentials: Sequence[Potential],
    params: ClassifyParams | None = None,
    runner: TrialRunner | None = None,
) -> list[Classification]:
    """Classify many potentials; results keep input order."""
    runner = runner or TrialRunner()
    return runner.map(lambda v: classify(grid, v, params), list(potentials))


type SignPatterns = npt.NDArray[np.float64]


class Classifier(ABC):
    """Maps potentials to verdicts, one at a time or in blocks of sign patterns."""

    name: ClassVar[str]
    enumeration_cap: ClassVar[int] = NUMERICAL_ENUMERATION_CAP

    def __init__(self, params: ClassifyParams | None = None):
        self.params = params or ClassifyParams()

    @abstractmethod
    def verdict(self, grid: TorusGrid, v: Potential) -> Verdict: ...

    def batch(self, grid: TorusGrid, patterns: SignPatterns) -> list[Verdict]:
        """Verdicts for the rows of an (m, n) array of +-1 patterns."""
        return [self.verdict(grid, Potential(row, "bernoulli")) for row in patterns]


class ExactClassifier(Classifier):
    """Reflection criterion for sign patterns on prime cycles."""

    name = "exact"
    enumeration_cap = ENUMERATION_CAP

    @staticmethod
    def _check(grid: TorusGrid) -> None:
        if grid.d != 1 or not is_prime(grid.n):
            raise PrimeRequiredError(f"Exact classifier needs a prime cycle, got {grid}")

    def verdict(self, grid: TorusGrid, v: Potential) -> Verdict:
        self._check(grid)
        if not v.is_scaled_sign_pattern:
            raise PotentialError("Exact classifier needs a two-valued +-c potential")
        return Verdict.BAD_CERTIFIED if reflection_centers(v) else Verdict.GOOD_EXACT

    def batch(self, grid: TorusGrid, patterns: SignPatterns) -> list[Verdict]:
        self._check(grid)
        L = grid.n
        offsets = np.arange(L)
        symmetric = np.zeros(len(patterns), dtype=bool)
        for j in range(L):
            symmetric |= np.all(
                patterns[:, (j + offsets) % L] == patterns[:, (j - offsets) % L], axis=1
            )
        return [Verdict.BAD_CERTIFIED if s else Verdict.GOOD_EXACT for s in symmetric]


def _certified_mask(grid: TorusGrid, patterns: SignPatterns, cap: int) -> npt.NDArray[np.bool_]:
    """Rows that commute with some certifying pool element."""
    certified = np.zeros(len(patterns), dtype=bool)
    for perm in automorphism_pool(grid, cap):
        # Whether a shared permutation certifies depends only on the permutation.
        if perm.order <= 2 and not perm.fixed_points:
            continue
        certified |= np.all(patterns[:, perm.image] == patterns, axis=1)
    return certified


class CertificateClassifier(Classifier):
    """Shared-symmetry certificates only; no certificate is Inconclusive."""

    name = "certificate"
    enumeration_cap = ENUMERATION_CAP

    def verdict(self, grid: TorusGrid, v: Potential) -> Verdict:
        cert = find_certificate(grid, v, self.params.pool_cap)
        return Verdict.BAD_CERTIFIED if cert is not None else Verdict.INCONCLUSIVE

    def batch(self, grid: TorusGrid, patterns: SignPatterns) -> list[Verdict]:
        certified = _certified_mask(grid, patterns, self.params.pool_cap)
        return [Verdict.BAD_CERTIFIED if c else Verdict.INCONCLUSIVE for c in certified]


class FullClassifier(Classifier):
    """The whole classify() pipeline."""

    name = "full"

    def verdict(self, grid: TorusGrid, v: Potential) -> Verdict:
        return classify(grid, v, self.params).verdict

    def batch(self, grid: TorusGrid, patterns: SignPatterns) -> list[Verdict]:
        if not self.params.use_certificates:
            return super().batch(grid, patterns)
        try:
            certified = _certified_mask(grid, patterns, self.params.pool_cap)
        except PoolCapError:
            return super().batch(grid, patterns)
        rest = self.params.model_copy(update={"use_certificates": False})
        return [
            Verdict.BAD_CERTIFIED
            if c
            else classify(grid, Potential(row, "bernoulli"), rest).verdict
            for c, row in zip(certified, patterns)
        ]


class NumericalClassifier(Classifier):
    """Generic-t sweep only, with certificates and the reflection criterion off."""

    name = "numerical"

    def __init__(self, params: ClassifyParams | None = None):
        base = params or ClassifyParams()
        super().__init__(base.model_copy(update={"use_certificates": False, "use_exact": False}))

    def verdict(self, grid: TorusGrid, v: Potential) -> Verdict:
        return classify(grid, v, self.params).verdict


CLASSIFIERS: dict[str, type[Classifier]] = {
    cls.name: cls
    for cls in (ExactClassifier, FullClassifier, NumericalClassifier, CertificateClassifier)
}


def make_classifier(name: str, params: ClassifyParams | None = None) -> Classifier:
    """
    Look up a classifier by name.

    Raises:
        ConfigError: If the name is unknown
    """
    if name not in CLASSIFIERS:
        logger.error(f"Unknown classifier: {name}")
        raise ConfigError(f"Unknown classifier {name!r}; expected one of {sorted(CLASSIFIERS)}")
    return CLASSIFIERS[name](params)
