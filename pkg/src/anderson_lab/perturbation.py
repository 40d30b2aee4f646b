"""Perturbation series of D + tA and the first-order Fourier problem on cycles.

For a diagonal D with distinct entries x_1..x_n and a symmetric A with
connected support, the k-th analytic eigenvector of D + tA expands as
e_k + sum_j t^j phi_k^(j). Its coefficients satisfy supp(phi_k^(j)) in B_j(k),
and on the sphere d(i, k) = j the leading coefficient is (C^j)(i, k) with the
propagator C = -(D - x_k I)^+ A. That entry is a sum over geodesics from i to
k of A_gamma * prod_{r in gamma, r != k} (x_k - x_r)^-1.
"""

import cmath
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from loguru import logger
from pydantic import BaseModel

from anderson_lab.errors import PerturbationError
from anderson_lab.grid import SymmetricMatrix, bfs_distances
from anderson_lab.spectral import Potential, eigh

FOURIER_REAL_TOL = 1e-9
SLOPE_T_VALUES = (1e-3, 1e-4, 1e-5)


def _diagonal_entries(d: npt.ArrayLike) -> npt.NDArray[np.float64]:
    arr = np.asarray(d, dtype=np.float64)
    return np.diag(arr).copy() if arr.ndim == 2 else arr.reshape(-1)


def _check_pair(x: npt.NDArray[np.float64], a: SymmetricMatrix, k: int) -> None:
    n = len(x)
    if a.shape != (n, n):
        raise PerturbationError(f"A has shape {a.shape}, expected ({n}, {n})")
    if not np.array_equal(a, a.T):
        raise PerturbationError("A must be symmetric")
    if not 0 <= k < n:
        raise PerturbationError(f"Anchor {k} out of range for n={n}")
    if len(np.unique(x)) != n:
        raise PerturbationError("Diagonal entries of D must be pairwise distinct")


@dataclass(frozen=True, eq=False)
class PropagatorC:
    """C = -(D - x_k I)^+ A for one anchor index k."""

    diagonal: npt.NDArray[np.float64]
    base: SymmetricMatrix
    anchor: int
    matrix: npt.NDArray[np.float64]

    def power(self, j: int) -> npt.NDArray[np.float64]:
        return np.linalg.matrix_power(self.matrix, j)


def propagator(d: npt.ArrayLike, a: SymmetricMatrix, k: int) -> PropagatorC:
    """
    Build the propagator of D + tA anchored at e_k.

    Args:
        d: Diagonal of D, as a vector or a diagonal matrix
        a: Symmetric perturbation
        k: Anchor index

    Raises:
        PerturbationError: On repeated diagonal entries or shape mismatch
    """
    x = _diagonal_entries(d)
    a = np.asarray(a, dtype=np.float64)
    _check_pair(x, a, k)
    pseudo = np.zeros_like(x)
    others = np.arange(len(x)) != k
    pseudo[others] = 1.0 / (x[others] - x[k])
    c = -pseudo[:, None] * a
    return PropagatorC(x, a, k, c)


def support_distance(a: SymmetricMatrix, i: int, k: int) -> int:
    dist = bfs_distances(np.asarray(a), k)
    if not 0 <= i < len(dist):
        raise PerturbationError(f"Vertex {i} out of range for n={len(dist)}")
    if dist[i] < 0:
        raise PerturbationError(f"Vertex {i} is not reachable from {k} in supp(A)")
    return int(dist[i])


def coefficient_entry(d: npt.ArrayLike, a: SymmetricMatrix, k: int, i: int) -> float:
    """Leading Taylor coefficient (C^j)(i, k), j = d(i, k) in supp(A)."""
    if i == k:
        raise PerturbationError("coefficient_entry needs i != k")
    c = propagator(d, a, k)
    j = support_distance(c.base, i, k)
    return float(c.power(j)[i, k])


def minimal_paths(a: SymmetricMatrix, i: int, k: int) -> list[tuple[int, ...]]:
    """
    All geodesics i -> k in supp(A), each as a vertex tuple starting at i.

    Paths step through the BFS layers toward k, visiting neighbors in
    ascending index order.
    """
    a = np.asarray(a)
    dist = bfs_distances(a, k)
    if not 0 <= i < len(dist):
        raise PerturbationError(f"Vertex {i} out of range for n={len(dist)}")
    if dist[i] < 0:
        raise PerturbationError(f"Vertex {i} is not reachable from {k} in supp(A)")
    support = a != 0
    np.fill_diagonal(support, False)

    paths: list[tuple[int, ...]] = []

    def walk(path: list[int]) -> None:
        u = path[-1]
        if u == k:
            paths.append(tuple(path))
            return
        for w in np.flatnonzero(support[u] & (dist == dist[u] - 1)):
            walk([*path, int(w)])

    walk([i])
    return paths


def path_sum(d: npt.ArrayLike, a: SymmetricMatrix, i: int, k: int) -> float:
    """Sum over geodesics of A_gamma * prod_{r in gamma, r != k} (x_k - x_r)^-1."""
    x = _diagonal_entries(d)
    a = np.asarray(a, dtype=np.float64)
    _check_pair(x, a, k)
    total = []
    for path in minimal_paths(a, i, k):
        weight = math.prod(a[u, w] for u, w in zip(path, path[1:]))
        denom = math.prod(x[k] - x[r] for r in path[:-1])
        total.append(weight / denom)
    return math.fsum(total)


def coefficient_slope(
    d: npt.ArrayLike,
    a: SymmetricMatrix,
    k: int,
    i: int,
    t_values: Sequence[float] = SLOPE_T_VALUES,
    solver: str | None = None,
) -> float:
    """
    Log-log slope of |phi_{k,t}(i)| against t for small t.

    phi_{k,t} is the eigenvector of D + tA with the largest overlap with e_k;
    the slope approaches d(i, k) as t -> 0.
    """
    x = _diagonal_entries(d)
    a = np.asarray(a, dtype=np.float64)
    _check_pair(x, a, k)
    logs_t, logs_phi = [], []
    for t in t_values:
        decomp = eigh(np.diag(x) + t * a, solver=solver)
        branch = int(np.argmax(np.abs(decomp.eigenvectors[k, :])))
        entry = abs(float(decomp.eigenvectors[i, branch]))
        if entry == 0.0:
            raise PerturbationError(f"phi_(k={k},t={t:g})({i}) underflowed to 0")
        logs_t.append(math.log(t))
        logs_phi.append(math.log(entry))
    slope = float(np.polyfit(logs_t, logs_phi, 1)[0])
    logger.debug(f"Slope k={k} i={i}: {slope:.4f}")
    return slope


class FourierPair(BaseModel):
    """First-order eigenvalue problem of Delta + tV on the mode pair (k, -k)."""

    L: int
    k: int
    p_one: complex
    p_plus: complex
    p_minus: complex

    @property
    def matrix(self) -> npt.NDArray[np.complex128]:
        return np.array([[self.p_one, self.p_plus], [self.p_minus, self.p_one]])

    @property
    def splitting(self) -> float:
        return abs(self.p_plus)

    @property
    def eigenvalues(self) -> tuple[float, float]:
        """First-order eigenvalues P(1) - |P(w^2k)| <= P(1) + |P(w^2k)|."""
        centre = self.p_one.real
        return (centre - self.splitting, centre + self.splitting)

    @property
    def eigenvectors(self) -> tuple[tuple[complex, complex], tuple[complex, complex]] | None:
        """(phase, -1)/sqrt2 and (phase, +1)/sqrt2, or None when P(w^2k) vanishes."""
        if self.splitting <= FOURIER_REAL_TOL:
            return None
        phase = self.p_plus / abs(self.p_plus)
        r = 1.0 / math.sqrt(2.0)
        return ((phase * r, -r), (phase * r, r))

    def as_pairs(self) -> dict[str, tuple[float, float]]:
        """Complex values as (re, im) pairs for serialization."""
        return {
            "P(1)": (self.p_one.real, self.p_one.imag),
            "P(w^2k)": (self.p_plus.real, self.p_plus.imag),
            "P(w^-2k)": (self.p_minus.real, self.p_minus.imag),
        }


def _p_at(values: npt.NDArray[np.float64], z: complex) -> complex:
    L = len(values)
    return complex(np.sum(values * z ** np.arange(L)) / L)


def fourier_pair(v: Potential, k: int) -> FourierPair:
    """P(1), P(w^2k), P(w^-2k) with P(z) = (1/L) sum_j v(j) z^j, w = exp(2 pi i / L)."""
    L = len(v)
    if not 1 <= k <= L - 1:
        raise PerturbationError(f"Mode k must lie in 1..{L - 1}, got {k}")
    omega = cmath.exp(2j * math.pi / L)
    return FourierPair(
        L=L,
        k=k,
        p_one=_p_at(v.values, 1.0),
        p_plus=_p_at(v.values, omega ** (2 * k)),
        p_minus=_p_at(v.values, omega ** (-2 * k)),
    )


def fourier_vanishing_vertices(v: Potential, k: int, tol: float = FOURIER_REAL_TOL) -> list[int]:
    """
    Vertices j where w^(-2jk) P(w^2k) is real.

    These are the vertices where the first-order eigenvectors of the (k, -k)
    pair vanish; on a prime cycle with a non-constant sign pattern v they are
    exactly the reflection centers.
    """
    pair = fourier_pair(v, k)
    if pair.splitting <= tol:
        return list(range(pair.L))
    omega = cmath.exp(2j * math.pi / pair.L)
    return [
        j
        for j in range(pair.L)
        if abs((omega ** (-2 * j * k) * pair.p_plus).imag) <= tol
    ]
