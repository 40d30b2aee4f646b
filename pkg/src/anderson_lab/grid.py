"""Torus grids: vertex indexing, graph Laplacian, graph metric and balls.

Vertices are indexed row-major over coordinate tuples: the last axis varies
fastest, so on dims (L_1, ..., L_d) the tuple (r_1, ..., r_d) has index
((r_1 * L_2 + r_2) * L_3 + ...) + r_d. Potentials serialize in this order.
"""

import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import numpy.typing as npt
from loguru import logger

from anderson_lab.errors import GridError

# Dense symmetric n x n float matrix; houses Laplacians, Hamiltonians and the
# pairs (A, B) / (D, A) of the perturbation module.
type SymmetricMatrix = npt.NDArray[np.float64]


@dataclass(frozen=True)
class TorusGrid:
    """Periodic box (Z/L_1) x ... x (Z/L_d)."""

    dims: tuple[int, ...]

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def n(self) -> int:
        return math.prod(self.dims)

    def coords(self, index: int) -> tuple[int, ...]:
        """Coordinate tuple of a vertex index."""
        self.check_vertex(index)
        return tuple(int(c) for c in np.unravel_index(index, self.dims))

    def index(self, coords: tuple[int, ...] | list[int]) -> int:
        """Vertex index of a coordinate tuple (taken modulo each side length)."""
        if len(coords) != self.d:
            raise GridError(f"Expected {self.d} coordinates, got {len(coords)}")
        wrapped = tuple(c % L for c, L in zip(coords, self.dims))
        return int(np.ravel_multi_index(wrapped, self.dims))

    @cached_property
    def coordinate_table(self) -> npt.NDArray[np.int64]:
        """(n, d) array whose row i is coords(i)."""
        table = np.stack(np.unravel_index(np.arange(self.n), self.dims), axis=1)
        table.setflags(write=False)
        return table

    def check_vertex(self, index: int) -> None:
        if not 0 <= index < self.n:
            raise GridError(f"Vertex {index} out of range for n={self.n}")

    def __str__(self) -> str:
        return "x".join(str(L) for L in self.dims)


def build_torus(dims: list[int] | tuple[int, ...]) -> TorusGrid:
    """Validate side lengths and build the grid."""
    if len(dims) == 0:
        raise GridError("Torus needs at least one side length")
    bad = [L for L in dims if int(L) != L or L <= 2]
    if bad:
        raise GridError(f"Side lengths must be integers > 2, got {list(dims)}")
    grid = TorusGrid(tuple(int(L) for L in dims))
    logger.debug(f"Built torus {grid} with n={grid.n}")
    return grid


def neighbors(grid: TorusGrid, index: int) -> list[int]:
    """Vertices differing by +-1 mod L_m in exactly one coordinate, ascending."""
    coords = list(grid.coords(index))
    result = set()
    for axis in range(grid.d):
        for step in (1, -1):
            moved = coords.copy()
            moved[axis] += step
            result.add(grid.index(moved))
    return sorted(result)


def cycle_laplacian(L: int) -> SymmetricMatrix:
    """Laplacian 2I - S - S^-1 of the cycle Z/L."""
    shift = np.roll(np.eye(L), 1, axis=1)
    return 2.0 * np.eye(L) - shift - shift.T


@lru_cache(maxsize=64)
def laplacian(grid: TorusGrid) -> SymmetricMatrix:
    """
    Graph Laplacian of the torus as a Kronecker sum of cycle Laplacians.

    The returned array is cached per grid and read-only.
    """
    lap = np.zeros((grid.n, grid.n))
    for axis, L in enumerate(grid.dims):
        before = math.prod(grid.dims[:axis])
        after = math.prod(grid.dims[axis + 1 :])
        lap += np.kron(np.kron(np.eye(before), cycle_laplacian(L)), np.eye(after))
    lap.setflags(write=False)
    return lap


def distance(grid: TorusGrid, i: int, j: int) -> int:
    """Graph distance: sum over axes of the shorter way around each cycle."""
    a = np.array(grid.coords(i))
    b = np.array(grid.coords(j))
    dims = np.array(grid.dims)
    diff = np.abs(a - b)
    return int(np.minimum(diff, dims - diff).sum())


def diameter(grid: TorusGrid) -> int:
    return sum(L // 2 for L in grid.dims)


def ball(grid: TorusGrid, center: int, r: int) -> frozenset[int]:
    """Vertices within graph distance r of center."""
    grid.check_vertex(center)
    dims = np.array(grid.dims)
    diff = np.abs(grid.coordinate_table - np.array(grid.coords(center)))
    dist = np.minimum(diff, dims - diff).sum(axis=1)
    return frozenset(int(j) for j in np.flatnonzero(dist <= r))


def bfs_distances(matrix: SymmetricMatrix, source: int) -> npt.NDArray[np.int64]:
    """
    Breadth-first distances from source in supp(matrix).

    Edges are the off-diagonal nonzeros; unreachable vertices get -1.
    """
    n = matrix.shape[0]
    if not 0 <= source < n:
        raise GridError(f"Vertex {source} out of range for n={n}")
    support = matrix != 0
    np.fill_diagonal(support, False)
    dist = np.full(n, -1, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in np.flatnonzero(support[u]):
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                queue.append(int(w))
    return dist
