"""Bad-potential probabilities: closed forms, exhaustive enumeration, Monte Carlo.

Sign patterns are encoded as integers: bit x set means v(x) = +1, so
pattern 0 is the constant -1 potential and popcount is the number of +1
entries. A pattern with k plus signs has mass p^k (1 - p)^(n - k).
"""

import itertools
import math
from collections import Counter
from collections.abc import Sequence
from enum import StrEnum
from typing import Any

import numpy as np
import numpy.typing as npt
from loguru import logger
from pydantic import BaseModel, model_validator

from anderson_lab.classify import Classifier, Verdict
from anderson_lab.errors import ConfigError, EnumerationCapError, GridError, PrimeRequiredError
from anderson_lab.grid import TorusGrid
from anderson_lab.services.runner import TrialRunner
from anderson_lab.spectral import Potential
from anderson_lab.symmetry import shift_perm
from anderson_lab.utils import is_prime, parse_floats

BLOCK_SIZE = 4096
SHIFT_MASS_CAP = 24


class DistributionKind(StrEnum):
    BERNOULLI = "bernoulli"
    UNIFORM = "uniform"
    EXPLICIT = "explicit"


class PotentialDistribution(BaseModel):
    """I.i.d. law of the on-site values."""

    kind: DistributionKind
    p: float = 0.5
    low: float = -1.0
    high: float = 1.0
    values: list[float] = []

    @model_validator(mode="after")
    def check_parameters(self) -> "PotentialDistribution":
        if self.kind == DistributionKind.BERNOULLI and not 0.0 <= self.p <= 1.0:
            raise ValueError(f"Bernoulli p must lie in [0, 1], got {self.p}")
        if self.kind == DistributionKind.UNIFORM and not self.low < self.high:
            raise ValueError(f"Uniform bounds need low < high, got {self.low}, {self.high}")
        if self.kind == DistributionKind.EXPLICIT and not self.values:
            raise ValueError("Explicit distribution needs at least one value")
        return self

    @classmethod
    def parse(cls, text: str) -> "PotentialDistribution":
        """
        Parse "bernoulli:P", "uniform:A,B" or "explicit:X,Y,...".

        Raises:
            ConfigError: If the text is malformed
        """
        kind, _, rest = text.partition(":")
        kind = kind.strip().lower()
        try:
            match kind:
                case "bernoulli":
                    return cls(kind=DistributionKind.BERNOULLI, p=float(rest or 0.5))
                case "uniform":
                    bounds = parse_floats(rest) if rest else [-1.0, 1.0]
                    if len(bounds) != 2:
                        raise ConfigError(f"uniform needs two bounds, got {rest!r}")
                    return cls(kind=DistributionKind.UNIFORM, low=bounds[0], high=bounds[1])
                case "explicit":
                    return cls(kind=DistributionKind.EXPLICIT, values=parse_floats(rest))
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(f"Invalid --dist {text!r}: {e}")
        raise ConfigError(f"Unknown distribution {kind!r}. Expected bernoulli, uniform or explicit")

    def sample(self, n: int, rng: np.random.Generator) -> Potential:
        match self.kind:
            case DistributionKind.BERNOULLI:
                values = np.where(rng.random(n) < self.p, 1.0, -1.0)
                return Potential(values, f"bernoulli(p={self.p:g})")
            case DistributionKind.UNIFORM:
                return Potential(rng.uniform(self.low, self.high, n), str(self))
            case _:
                return Potential(rng.choice(np.array(self.values), n), str(self))

    def __str__(self) -> str:
        match self.kind:
            case DistributionKind.BERNOULLI:
                return f"bernoulli(p={self.p:g})"
            case DistributionKind.UNIFORM:
                return f"uniform({self.low:g},{self.high:g})"
            case _:
                return f"explicit({','.join(format(x, 'g') for x in self.values)})"


class ProbabilityEstimate(BaseModel):
    """Bad-potential probability, exact (enumerated) or sampled."""

    estimate: float
    stderr: float
    trials: int
    counts_by_verdict: dict[str, int]
    mass_by_verdict: dict[str, float] | None = None
    exact: bool
    params: dict[str, Any] = {}

    @model_validator(mode="after")
    def check_consistent(self) -> "ProbabilityEstimate":
        if sum(self.counts_by_verdict.values()) != self.trials:
            raise ValueError("Verdict counts must sum to the number of trials")
        if not 0.0 <= self.estimate <= 1.0:
            raise ValueError(f"Probability estimate {self.estimate} is outside [0, 1]")
        return self

    def __str__(self) -> str:
        kind = "exact" if self.exact else f"+- {self.stderr:.3g}"
        return f"P(bad) = {self.estimate:.12g} ({kind}, {self.trials} potentials)"


class BoundGap(BaseModel):
    bound: float
    enumerated: float
    gap: float


def _check_p(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"p must lie in [0, 1], got {p}")


def exact_bad_prob_prime_cycle(L: int, p: float) -> float:
    """
    Probability that a Bernoulli potential on the prime cycle Z/L is bad.

    L (p^2 + (1-p)^2)^((L-1)/2) - (L-1) (p^L + (1-p)^L)

    Raises:
        PrimeRequiredError: If L is not an odd prime

    Examples:
        >>> exact_bad_prob_prime_cycle(7, 0.5)
        0.78125
    """
    _check_p(p)
    if L % 2 == 0 or not is_prime(L):
        raise PrimeRequiredError(f"{L} is not an odd prime")
    q = 1.0 - p
    return L * (p * p + q * q) ** ((L - 1) // 2) - (L - 1) * (p**L + q**L)


def reflection_symmetric_prob(L: int, p: float) -> float:
    """Probability that v on the odd cycle Z/L is symmetric about one fixed vertex."""
    _check_p(p)
    if L % 2 == 0 or L < 3:
        raise GridError(f"Reflection probability needs an odd cycle length, got {L}")
    q = 1.0 - p
    return (p * p + q * q) ** ((L - 1) // 2)


def good_prob_prime_sequence(p: float, primes: Sequence[int]) -> list[tuple[int, float]]:
    """(L, P(good)) along a sequence of odd primes; tends to 1 for p not in {0, 1}."""
    return [(L, 1.0 - exact_bad_prob_prime_cycle(L, p)) for L in primes]


def lower_bound_bad(dims: Sequence[int], p: float) -> float:
    """
    Inclusion-exclusion mass of potentials invariant under some unit shift.

    For a nonempty axis subset S with m = prod_{j in S} L_j, the potentials
    invariant under every S-shift have mass (p^m + (1-p)^m)^(n/m).

    Examples:
        >>> lower_bound_bad([3, 3], 0.5) == 7 / 256
        True
    """
    _check_p(p)
    q = 1.0 - p
    n = math.prod(dims)
    terms = []
    for size in range(1, len(dims) + 1):
        for subset in itertools.combinations(dims, size):
            m = math.prod(subset)
            terms.append((-1) ** (size - 1) * (p**m + q**m) ** (n // m))
    return math.fsum(terms)


def _sign_block(
    n: int, start: int, stop: int
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.intp]]:
    """Rows of +-1 for the integer patterns start..stop-1, with their popcounts."""
    codes = np.arange(start, stop, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(n, dtype=np.int64)) & 1
    return np.where(bits == 1, 1.0, -1.0), bits.sum(axis=1).astype(np.intp)


def _blocks(n: int) -> list[tuple[int, int]]:
    total = 1 << n
    return [(s, min(s + BLOCK_SIZE, total)) for s in range(0, total, BLOCK_SIZE)]


def _weighted_mass(by_popcount: npt.NDArray[np.int64], n: int, p: float) -> float:
    q = 1.0 - p
    terms = [int(c) * p**k * q ** (n - k) for k, c in enumerate(by_popcount) if c]
    return math.fsum(sorted(terms, reverse=True))


def shift_symmetric_mass(
    grid: TorusGrid, p: float, runner: TrialRunner | None = None
) -> float:
    """
    Exact Bernoulli mass of potentials commuting with some unit shift.

    Raises:
        EnumerationCapError: If n exceeds the enumeration cap
    """
    _check_p(p)
    n = grid.n
    if n > SHIFT_MASS_CAP:
        raise EnumerationCapError(f"n={n} exceeds the enumeration cap {SHIFT_MASS_CAP}")
    images = [shift_perm(grid, axis, 1).image for axis in range(grid.d)]
    runner = runner or TrialRunner()

    def count(block: tuple[int, int]) -> npt.NDArray[np.int64]:
        patterns, popcounts = _sign_block(n, *block)
        hit = np.zeros(len(patterns), dtype=bool)
        for image in images:
            hit |= np.all(patterns[:, image] == patterns, axis=1)
        return np.bincount(popcounts[hit], minlength=n + 1)

    by_popcount = np.sum(runner.map(count, _blocks(n)), axis=0)
    return _weighted_mass(by_popcount, n, p)


def enumerate_bernoulli(
    grid: TorusGrid,
    p: float,
    classifier: Classifier,
    runner: TrialRunner | None = None,
) -> ProbabilityEstimate:
    """
    Classify all 2^n sign patterns and weight each by its Bernoulli mass.

    Args:
        grid: Torus grid with n at most classifier.enumeration_cap
        p: Probability of +1
        classifier: Verdict engine applied to every pattern
        runner: Thread pool for the pattern blocks

    Returns:
        Exact ProbabilityEstimate; estimate is the bad mass

    Raises:
        EnumerationCapError: If n exceeds the classifier's cap
    """
    _check_p(p)
    n = grid.n
    if n > classifier.enumeration_cap:
        raise EnumerationCapError(
            f"n={n} exceeds the {classifier.name} enumeration cap {classifier.enumeration_cap}"
        )
    runner = runner or TrialRunner()

    def count(block: tuple[int, int]) -> dict[Verdict, npt.NDArray[np.int64]]:
        patterns, popcounts = _sign_block(n, *block)
        verdicts = np.array([str(v) for v in classifier.batch(grid, patterns)])
        return {
            verdict: np.bincount(popcounts[verdicts == verdict.value], minlength=n + 1)
            for verdict in Verdict
        }

    by_verdict = {verdict: np.zeros(n + 1, dtype=np.int64) for verdict in Verdict}
    for partial in runner.map(count, _blocks(n)):
        for verdict, counts in partial.items():
            by_verdict[verdict] += counts

    mass = {str(v): _weighted_mass(c, n, p) for v, c in by_verdict.items()}
    # Rounded weights can sum past 1 by an ulp when every pattern is bad.
    bad = min(1.0, math.fsum(mass[str(v)] for v in Verdict if v.is_bad))
    logger.info(f"Enumerated {1 << n} patterns on {grid} with {classifier.name}: P(bad)={bad:.12g}")
    return ProbabilityEstimate(
        estimate=bad,
        stderr=0.0,
        trials=1 << n,
        counts_by_verdict={str(v): int(c.sum()) for v, c in by_verdict.items()},
        mass_by_verdict=mass,
        exact=True,
        params={"dims": list(grid.dims), "p": p, "classifier": classifier.name},
    )


def bound_gap(
    grid: TorusGrid, p: float, classifier: Classifier, runner: TrialRunner | None = None
) -> BoundGap:
    """Enumerated bad mass minus the shift-symmetry lower bound."""
    bound = lower_bound_bad(grid.dims, p)
    enumerated = enumerate_bernoulli(grid, p, classifier, runner).estimate
    return BoundGap(bound=bound, enumerated=enumerated, gap=enumerated - bound)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Generator of one trial, keyed by (seed, trial) through SeedSequence mixing."""
    return np.random.default_rng(np.random.SeedSequence([seed, trial]))


def monte_carlo(
    grid: TorusGrid,
    dist: PotentialDistribution,
    trials: int,
    seed: int,
    classifier: Classifier,
    runner: TrialRunner | None = None,
) -> ProbabilityEstimate:
    """
    Estimate P(bad) from seeded independent samples.

    Trial i draws from trial_rng(seed, i), so counts do not depend on the
    thread count or scheduling.

    Raises:
        ConfigError: If trials < 1
    """
    if trials < 1:
        raise ConfigError(f"trials must be at least 1, got {trials}")
    runner = runner or TrialRunner()

    def trial(i: int) -> Verdict:
        return classifier.verdict(grid, dist.sample(grid.n, trial_rng(seed, i)))

    verdicts = Counter(runner.map(trial, list(range(trials))))
    bad = sum(c for v, c in verdicts.items() if v.is_bad)
    estimate = bad / trials
    stderr = math.sqrt(estimate * (1.0 - estimate) / trials)
    logger.info(f"Monte Carlo on {grid}: {bad}/{trials} bad ({dist})")
    return ProbabilityEstimate(
        estimate=estimate,
        stderr=stderr,
        trials=trials,
        counts_by_verdict={str(v): verdicts.get(v, 0) for v in Verdict},
        exact=False,
        params={
            "dims": list(grid.dims),
            "dist": str(dist),
            "seed": seed,
            "classifier": classifier.name,
        },
    )
