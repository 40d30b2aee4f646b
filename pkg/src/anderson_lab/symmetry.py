"""Torus automorphisms and shared-symmetry certificates of bad potentials.

A vertex permutation P that commutes with both the Laplacian and diag(v)
forces badness: if P has order > 2 the spectrum of Delta + tV is degenerate
for every t; if P has order 2 and fixes a vertex j, some eigenvector vanishes
at j for every t. On a grid with odd n every order-2 permutation fixes a
vertex, so any non-identity shared permutation certifies badness there.
"""

import itertools
import math
from dataclasses import dataclass
from enum import StrEnum
from functools import cached_property, lru_cache

import numpy as np
import numpy.typing as npt
from loguru import logger
from pydantic import BaseModel

from anderson_lab.errors import GridError, PoolCapError, PotentialError
from anderson_lab.grid import TorusGrid, laplacian
from anderson_lab.spectral import Potential

DEFAULT_POOL_CAP = 10**6


class PermKind(StrEnum):
    SHIFT = "shift"
    REFLECTION = "reflection"
    AXIS_REFLECTION = "axis-reflection"
    AXIS_SWAP = "axis-swap"
    COMPOSITE = "composite"


class CertificateReason(StrEnum):
    DEGENERATE_SPECTRUM = "degenerate-spectrum"
    VANISHING_AT_FIXED_POINT = "vanishing-at-fixed-point"
    # Never issued: on odd n an order-2 shared permutation always has a fixed
    # point, so certify() reports vanishing-at-fixed-point and violations()
    # rejects this reason.
    ODD_N_PERMUTATION = "odd-n-permutation"


class PermDescriptor(BaseModel):
    """How a permutation acts on coordinate tuples."""

    kind: PermKind
    vector: list[int] | None = None
    centers: list[int] | None = None
    axis: int | None = None
    center: int | None = None
    axes: list[int] | None = None
    factors: list["PermDescriptor"] = []

    def __str__(self) -> str:
        match self.kind:
            case PermKind.SHIFT:
                return f"shift{tuple(self.vector or [])}"
            case PermKind.REFLECTION:
                return f"reflection{tuple(self.centers or [])}"
            case PermKind.AXIS_REFLECTION:
                return f"reflect(axis={self.axis}, center={self.center})"
            case PermKind.AXIS_SWAP:
                return f"swap{tuple(self.axes or [])}"
            case _:
                return " then ".join(str(f) for f in self.factors)


def _move(
    grid: TorusGrid, desc: PermDescriptor, coords: npt.NDArray[np.int64]
) -> npt.NDArray[np.int64]:
    """Apply a descriptor to an (m, d) array of coordinate rows."""
    dims = np.array(grid.dims)
    match desc.kind:
        case PermKind.SHIFT:
            return (coords + np.array(desc.vector)) % dims
        case PermKind.REFLECTION:
            return (2 * np.array(desc.centers) - coords) % dims
        case PermKind.AXIS_REFLECTION:
            moved = coords.copy()
            moved[:, desc.axis] = (2 * desc.center - coords[:, desc.axis]) % grid.dims[desc.axis]
            return moved
        case PermKind.AXIS_SWAP:
            return coords[:, desc.axes]
        case PermKind.COMPOSITE:
            for factor in desc.factors:
                coords = _move(grid, factor, coords)
            return coords
    raise ValueError(f"Unknown permutation kind {desc.kind}")


def apply_descriptor(grid: TorusGrid, desc: PermDescriptor) -> npt.NDArray[np.intp]:
    """Vertex image array of a descriptor: image[x] is where x is sent."""
    moved = _move(grid, desc, np.asarray(grid.coordinate_table))
    return np.ravel_multi_index(tuple(moved.T), grid.dims).astype(np.intp)


@dataclass(frozen=True, eq=False)
class VertexPermutation:
    """A bijection x -> image[x] on the vertices of a grid."""

    image: npt.NDArray[np.intp]
    descriptor: PermDescriptor

    def __post_init__(self):
        image = np.array(self.image, dtype=np.intp)
        n = len(image)
        if not np.array_equal(np.sort(image), np.arange(n)):
            raise ValueError("Permutation image is not a bijection")
        image.setflags(write=False)
        object.__setattr__(self, "image", image)

    @property
    def n(self) -> int:
        return len(self.image)

    @property
    def key(self) -> bytes:
        return self.image.tobytes()

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.image, np.arange(self.n)))

    @cached_property
    def cycles(self) -> list[list[int]]:
        seen = np.zeros(self.n, dtype=bool)
        cycles = []
        for start in range(self.n):
            if seen[start]:
                continue
            cycle = []
            x = start
            while not seen[x]:
                seen[x] = True
                cycle.append(x)
                x = int(self.image[x])
            cycles.append(cycle)
        return cycles

    @cached_property
    def order(self) -> int:
        return math.lcm(*(len(c) for c in self.cycles))

    @cached_property
    def fixed_points(self) -> list[int]:
        return [int(x) for x in np.flatnonzero(self.image == np.arange(self.n))]

    def then(self, other: "VertexPermutation") -> "VertexPermutation":
        """Apply self first, then other."""
        factors = [
            *(self.descriptor.factors or [self.descriptor]),
            *(other.descriptor.factors or [other.descriptor]),
        ]
        return VertexPermutation(
            other.image[self.image],
            PermDescriptor(kind=PermKind.COMPOSITE, factors=factors),
        )

    def matrix(self) -> npt.NDArray[np.int64]:
        """Permutation matrix P with P e_x = e_image[x]."""
        p = np.zeros((self.n, self.n), dtype=np.int64)
        p[self.image, np.arange(self.n)] = 1
        return p

    def __str__(self) -> str:
        return f"{self.descriptor} (order {self.order})"


def shift_perm(grid: TorusGrid, axis: int, amount: int) -> VertexPermutation:
    """Translate coordinate `axis` by `amount` modulo its side length."""
    if not 0 <= axis < grid.d:
        raise GridError(f"Axis {axis} out of range for d={grid.d}")
    vector = [0] * grid.d
    vector[axis] = amount % grid.dims[axis]
    desc = PermDescriptor(kind=PermKind.SHIFT, vector=vector)
    return VertexPermutation(apply_descriptor(grid, desc), desc)


def reflection_perm(grid: TorusGrid, centers: list[int]) -> VertexPermutation:
    """Point reflection r_m -> 2 c_m - r_m on every axis; an involution."""
    if len(centers) != grid.d:
        raise GridError(f"Expected {grid.d} reflection centers, got {len(centers)}")
    if any(not 0 <= c < L for c, L in zip(centers, grid.dims)):
        raise GridError(f"Reflection centers {centers} outside grid {grid}")
    desc = PermDescriptor(kind=PermKind.REFLECTION, centers=list(centers))
    return VertexPermutation(apply_descriptor(grid, desc), desc)


def axis_reflection_perm(grid: TorusGrid, axis: int, center: int) -> VertexPermutation:
    """Reflect a single axis about `center`, leaving the others fixed."""
    if not 0 <= axis < grid.d:
        raise GridError(f"Axis {axis} out of range for d={grid.d}")
    desc = PermDescriptor(
        kind=PermKind.AXIS_REFLECTION, axis=axis, center=center % grid.dims[axis]
    )
    return VertexPermutation(apply_descriptor(grid, desc), desc)


def axis_swap_perm(grid: TorusGrid, axes: list[int]) -> VertexPermutation:
    """Relabel axes: new coordinate m is old coordinate axes[m]."""
    if sorted(axes) != list(range(grid.d)):
        raise GridError(f"{axes} is not a permutation of the {grid.d} axes")
    if any(grid.dims[m] != grid.dims[a] for m, a in enumerate(axes)):
        raise GridError(f"Axis swap {axes} mixes unequal side lengths {grid.dims}")
    desc = PermDescriptor(kind=PermKind.AXIS_SWAP, axes=list(axes))
    return VertexPermutation(apply_descriptor(grid, desc), desc)


@lru_cache(maxsize=64)
def _edges(grid: TorusGrid) -> tuple[npt.NDArray[np.intp], npt.NDArray[np.intp]]:
    lap = laplacian(grid)
    src, dst = np.nonzero(lap - np.diag(np.diag(lap)))
    return src, dst


def commutes_with_laplacian(grid: TorusGrid, perm: VertexPermutation) -> bool:
    """P Delta = Delta P, checked exactly on the edge list."""
    lap = laplacian(grid)
    src, dst = _edges(grid)
    img = perm.image
    return bool(np.array_equal(lap[img[src], img[dst]], lap[src, dst]))


def commutes_with_potential(perm: VertexPermutation, v: Potential) -> bool:
    """diag(v) commutes with P iff v is constant on every orbit of P."""
    if perm.n != len(v):
        raise PotentialError(f"Permutation on {perm.n} vertices, potential has {len(v)}")
    return bool(np.array_equal(v.values[perm.image], v.values))


def _seed_elements(grid: TorusGrid) -> list[VertexPermutation]:
    """Shifts by axis then amount, point reflections by center, axis swaps."""
    seeds = [
        shift_perm(grid, axis, amount)
        for axis, L in enumerate(grid.dims)
        for amount in range(1, L)
    ]
    seeds += [
        reflection_perm(grid, list(centers))
        for centers in itertools.product(*(range(L) for L in grid.dims))
    ]
    seeds += [
        axis_swap_perm(grid, list(axes))
        for axes in itertools.permutations(range(grid.d))
        if list(axes) != list(range(grid.d))
        and all(grid.dims[m] == grid.dims[a] for m, a in enumerate(axes))
    ]
    return seeds


def _generators(grid: TorusGrid) -> list[VertexPermutation]:
    gens = [shift_perm(grid, axis, 1) for axis in range(grid.d)]
    gens += [axis_reflection_perm(grid, axis, 0) for axis in range(grid.d)]
    gens += [
        axis_swap_perm(grid, [b if m == a else a if m == b else m for m in range(grid.d)])
        for a, b in itertools.combinations(range(grid.d), 2)
        if grid.dims[a] == grid.dims[b]
    ]
    return gens


@lru_cache(maxsize=16)
def _pool(grid: TorusGrid, cap: int) -> tuple[VertexPermutation, ...]:
    pool: list[VertexPermutation] = []
    seen = {np.arange(grid.n, dtype=np.intp).tobytes()}

    def add(perm: VertexPermutation) -> None:
        if perm.key in seen:
            return
        if len(pool) >= cap:
            logger.warning(f"Automorphism pool of {grid} exceeds cap {cap}")
            raise PoolCapError(f"Automorphism pool of {grid} exceeds cap {cap}")
        seen.add(perm.key)
        pool.append(perm)

    for perm in _seed_elements(grid):
        add(perm)
    generators = _generators(grid)
    i = 0
    while i < len(pool):
        for gen in generators:
            add(pool[i].then(gen))
        i += 1

    for perm in pool:
        assert commutes_with_laplacian(grid, perm), f"{perm} is not a torus automorphism"
    logger.info(f"Automorphism pool of {grid}: {len(pool)} non-identity elements")
    return tuple(pool)


def automorphism_pool(grid: TorusGrid, cap: int = DEFAULT_POOL_CAP) -> list[VertexPermutation]:
    """
    Non-identity elements of the group generated by shifts, reflections and
    equal-axis swaps, deduplicated by image, in deterministic order.

    Raises:
        PoolCapError: If the group has more than `cap` non-identity elements
    """
    return list(_pool(grid, cap))


class SymmetryCertificate(BaseModel):
    """A shared permutation symmetry and the badness it implies."""

    perm_descriptor: PermDescriptor
    image: list[int]
    order: int
    fixed_points: list[int]
    reason: CertificateReason

    def permutation(self) -> VertexPermutation:
        return VertexPermutation(np.array(self.image), self.perm_descriptor)

    def violations(self, grid: TorusGrid, v: Potential) -> list[str]:
        """Every certificate invariant that fails for (grid, v); empty if valid."""
        problems = []
        perm = self.permutation()
        if perm.is_identity:
            problems.append("permutation is the identity")
        if not np.array_equal(apply_descriptor(grid, self.perm_descriptor), perm.image):
            problems.append("descriptor does not reproduce the image")
        if not commutes_with_laplacian(grid, perm):
            problems.append("permutation does not commute with the Laplacian")
        if not commutes_with_potential(perm, v):
            problems.append("permutation does not commute with the potential")
        if perm.order != self.order:
            problems.append(f"order {self.order} != actual {perm.order}")
        if perm.fixed_points != self.fixed_points:
            problems.append("fixed points do not match")
        if self.reason == CertificateReason.DEGENERATE_SPECTRUM and self.order <= 2:
            problems.append("degenerate-spectrum reason needs order > 2")
        if self.reason == CertificateReason.VANISHING_AT_FIXED_POINT and (
            self.order != 2 or not self.fixed_points
        ):
            problems.append("vanishing reason needs an order-2 permutation with a fixed point")
        if self.reason == CertificateReason.ODD_N_PERMUTATION:
            problems.append("odd-n-permutation is never issued; order and fixed points decide")
        return problems

    def __str__(self) -> str:
        return (
            f"{self.reason}: {self.perm_descriptor} "
            f"(order {self.order}, fixed {self.fixed_points})"
        )


def certify(
    grid: TorusGrid, perm: VertexPermutation, v: Potential
) -> SymmetryCertificate | None:
    """Certificate from one permutation, or None if it proves nothing."""
    if perm.is_identity or not commutes_with_potential(perm, v):
        return None
    if perm.order > 2:
        reason = CertificateReason.DEGENERATE_SPECTRUM
    elif perm.fixed_points:
        reason = CertificateReason.VANISHING_AT_FIXED_POINT
    else:
        # An involution moves an even number of vertices.
        assert grid.n % 2 == 0, "fixed-point-free involution on an odd grid"
        return None
    return SymmetryCertificate(
        perm_descriptor=perm.descriptor,
        image=[int(x) for x in perm.image],
        order=perm.order,
        fixed_points=perm.fixed_points,
        reason=reason,
    )


def find_certificate(
    grid: TorusGrid, v: Potential, cap: int = DEFAULT_POOL_CAP
) -> SymmetryCertificate | None:
    """
    First pool element that certifies v as bad, or None if the pool is exhausted.

    Raises:
        PoolCapError: If the pool cannot be built under `cap`; the search is
            then inconclusive rather than negative
    """
    v.check_grid(grid)
    for perm in automorphism_pool(grid, cap):
        cert = certify(grid, perm, v)
        if cert is not None:
            logger.debug(f"Certificate for {grid}: {cert}")
            return cert
    return None


def reflection_centers(v: Potential | npt.ArrayLike) -> list[int]:
    """All j with v(j + i) = v(j - i) for every i, indices mod L."""
    values = v.values if isinstance(v, Potential) else np.asarray(v, dtype=np.float64)
    L = len(values)
    offsets = np.arange(L)
    return [
        j
        for j in range(L)
        if np.array_equal(values[(j + offsets) % L], values[(j - offsets) % L])
    ]


def reflection_center(v: Potential | npt.ArrayLike) -> int | None:
    """Smallest reflection center of a potential on a cycle, or None."""
    centers = reflection_centers(v)
    return centers[0] if centers else None
