"""Exception hierarchy for anderson-lab."""


class AndersonLabError(ValueError):
    """Base class for every error raised by the library."""


class GridError(AndersonLabError):
    """Invalid torus dimensions or a vertex outside the grid."""


class PotentialError(AndersonLabError):
    """Potential that does not fit the grid or its provenance tag."""


class EigenSolverError(AndersonLabError):
    """Eigensolver did not converge or missed its residual tolerance."""


class PerturbationError(AndersonLabError):
    """Perturbation series inputs that break the distinct-diagonal and sparsity assumptions."""


class PoolCapError(AndersonLabError):
    """Automorphism pool grew past its configured cap."""


class EnumerationCapError(AndersonLabError):
    """Exhaustive enumeration requested over too many vertices."""


class PrimeRequiredError(AndersonLabError):
    """Closed-form prime-cycle formula called on a non-prime side length."""


class ConfigError(AndersonLabError):
    """Malformed command-line flag, config value or potential file."""
