"""Utility functions for flag parsing and small number theory."""

import math
from pathlib import Path

import numpy as np

from anderson_lab.errors import ConfigError


def parse_dims(text: str) -> tuple[int, ...]:
    """
    Parse a comma-separated list of torus side lengths.

    Args:
        text: Side lengths such as "7" or "3,5"

    Returns:
        Tuple of side lengths

    Raises:
        ConfigError: If an entry is not an integer

    Examples:
        >>> parse_dims("3,5")
        (3, 5)
        >>> parse_dims(" 7 ")
        (7,)
    """
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ConfigError("Empty --dims. Expected e.g. 7 or 3,3")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise ConfigError(f"Invalid --dims {text!r}. Expected integers like 3,5")


def parse_floats(text: str) -> list[float]:
    """
    Parse comma-separated reals, the serialized form of a potential.

    Args:
        text: Values in vertex-index (row-major) order

    Returns:
        List of floats

    Raises:
        ConfigError: If an entry is not numeric

    Examples:
        >>> parse_floats("1,1,-1")
        [1.0, 1.0, -1.0]
    """
    parts = [p.strip() for p in text.replace("\n", ",").split(",") if p.strip()]
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"Non-numeric potential entry in {text[:40]!r}")
    if not all(math.isfinite(x) for x in values):
        raise ConfigError("Potential entries must be finite")
    return values


def load_potential_file(path: str | Path) -> list[float]:
    """Read a potential file (comma- or newline-separated reals)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read potential file {path}: {e}")
    return parse_floats(text)


def parse_t_grid(text: str) -> list[float]:
    """
    Parse a coupling grid given as start:stop:count.

    Args:
        text: Range such as "0.1:5:50" (stop included)

    Returns:
        Evenly spaced t values, ascending

    Raises:
        ConfigError: If the range is malformed, empty or descending

    Examples:
        >>> parse_t_grid("1:2:3")
        [1.0, 1.5, 2.0]
    """
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"Invalid --t-grid {text!r}. Expected start:stop:count")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"Invalid --t-grid {text!r}. Expected start:stop:count")
    if count < 1:
        raise ConfigError("--t-grid count must be at least 1")
    if count > 1 and not start < stop:
        raise ConfigError(f"--t-grid start {start} must be below stop {stop}")
    if not (math.isfinite(start) and math.isfinite(stop)):
        raise ConfigError("--t-grid bounds must be finite")
    return [float(t) for t in np.linspace(start, stop, count)]


def is_prime(n: int) -> bool:
    """
    Deterministic trial-division primality test.

    Examples:
        >>> [k for k in range(15) if is_prime(k)]
        [2, 3, 5, 7, 11, 13]
    """
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    return all(n % f for f in range(3, math.isqrt(n) + 1, 2))


def odd_primes(start: int, stop: int) -> list[int]:
    """Odd primes in [start, stop)."""
    return [k for k in range(max(start, 3), stop) if k % 2 and is_prime(k)]
