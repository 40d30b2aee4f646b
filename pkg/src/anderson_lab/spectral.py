"""Hamiltonian assembly, eigendecomposition, spectral conditions and IPR."""

import math
import os
from collections.abc import Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import numpy.typing as npt
from loguru import logger
from pydantic import BaseModel

from anderson_lab.errors import EigenSolverError, PotentialError
from anderson_lab.grid import SymmetricMatrix, TorusGrid, laplacian
from anderson_lab.services.jacobi import JacobiSolver
from anderson_lab.services.runner import TrialRunner

DEFAULT_EIGH_TOL = 1e-10
DEFAULT_ENTRY_TOL = 1e-8
# Default gap tolerance is this fraction of the spectral diameter.
RELATIVE_GAP_TOL = 1e-8
SIGN_THRESHOLD = 1e-12
NORM_TOL = 1e-8
SOLVERS = ("jacobi", "lapack")


@dataclass(frozen=True, eq=False)
class Potential:
    """Diagonal of V, one real per vertex in row-major vertex order."""

    values: npt.NDArray[np.float64]
    provenance: str = "explicit"

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise PotentialError("Potential entries must be finite")
        if self.provenance.startswith("bernoulli") and not np.all(np.abs(arr) == 1.0):
            raise PotentialError("Bernoulli potential must contain only +1 and -1")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def is_sign_pattern(self) -> bool:
        """All entries are +1 or -1."""
        return bool(np.all(np.abs(self.values) == 1.0))

    @property
    def is_scaled_sign_pattern(self) -> bool:
        """All entries are +c or -c for one c > 0."""
        c = abs(self.values[0])
        return bool(c > 0.0 and np.all(np.abs(self.values) == c))

    def scaled(self, c: float) -> "Potential":
        provenance = self.provenance if c in (1.0, -1.0) else "explicit"
        return Potential(c * self.values, provenance)

    def permuted(self, image: Sequence[int]) -> "Potential":
        """The relabeled potential x -> v(image[x])."""
        return Potential(self.values[np.asarray(image)], self.provenance)

    def check_grid(self, grid: TorusGrid) -> None:
        if len(self) != grid.n:
            raise PotentialError(
                f"Potential has {len(self)} entries but grid {grid} has n={grid.n}"
            )

    def to_csv(self) -> str:
        return ",".join(format(float(x), ".17g") for x in self.values)

    def __str__(self) -> str:
        return f"Potential[{self.provenance}]({self.to_csv()})"


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """Ascending eigenvalues with orthonormal eigenvectors as columns."""

    eigenvalues: npt.NDArray[np.float64]
    eigenvectors: npt.NDArray[np.float64]
    residual: float
    orthogonality_defect: float
    tol: float
    solver: str

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    def vector(self, k: int) -> npt.NDArray[np.float64]:
        return self.eigenvectors[:, k]


class ConditionReport(BaseModel):
    """Simple-spectrum and non-vanishing diagnostics of H_t at one t."""

    t: float
    min_gap: float
    min_entry: float
    simple: bool
    nonvanishing: bool
    gap_tol: float
    entry_tol: float

    @property
    def good(self) -> bool:
        return self.simple and self.nonvanishing

    def __str__(self) -> str:
        return (
            f"t={self.t:.6g} gap={self.min_gap:.3e} (simple={self.simple}) "
            f"entry={self.min_entry:.3e} (nonvanishing={self.nonvanishing})"
        )


class HeatmapRow(NamedTuple):
    t: float
    k: int
    eigenvalue: float
    log_ipr: float


def default_solver() -> str:
    solver = os.getenv("ANDERSON_LAB_SOLVER", "jacobi").strip().lower() or "jacobi"
    if solver not in SOLVERS:
        logger.warning(f"Unknown ANDERSON_LAB_SOLVER={solver!r}, using jacobi")
        return "jacobi"
    return solver


def hamiltonian(grid: TorusGrid, v: Potential, t: float) -> SymmetricMatrix:
    """H_t = Laplacian + t * diag(v)."""
    v.check_grid(grid)
    return laplacian(grid) + t * np.diag(v.values)


def _apply_sign_convention(vectors: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """Flip columns so the first entry with |x| > 1e-12 is positive."""
    leading = np.argmax(np.abs(vectors) > SIGN_THRESHOLD, axis=0)
    signs = np.sign(vectors[leading, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def eigh(
    matrix: SymmetricMatrix,
    tol: float = DEFAULT_EIGH_TOL,
    solver: str | None = None,
) -> EigenDecomposition:
    """
    Eigendecomposition of a real symmetric matrix with residual checks.

    Args:
        matrix: Square symmetric array
        tol: Residual tolerance relative to max(1, max |A entry|), and the
            absolute tolerance on Q^T Q - I
        solver: "jacobi" (default) or "lapack"

    Returns:
        EigenDecomposition, eigenvalues ascending (ties keep solver order)

    Raises:
        EigenSolverError: On non-convergence or a residual above tolerance
    """
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise EigenSolverError(f"Expected a square matrix, got shape {a.shape}")
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-14 * max(1.0, float(np.abs(a).max(initial=0.0)))):
        raise EigenSolverError("Matrix is not symmetric")
    if tol <= 0:
        raise EigenSolverError(f"Tolerance must be positive, got {tol}")
    solver = solver or default_solver()

    if solver == "jacobi":
        result = JacobiSolver().solve(a)
        values, vectors = result.eigenvalues, result.eigenvectors
    elif solver == "lapack":
        values, vectors = np.linalg.eigh(a)
    else:
        raise EigenSolverError(f"Unknown solver {solver!r}; expected one of {SOLVERS}")

    order = np.argsort(values, kind="stable")
    values = values[order]
    vectors = _apply_sign_convention(vectors[:, order])

    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    residual = float(np.linalg.norm(a @ vectors - vectors * values, axis=0).max(initial=0.0))
    defect = float(np.abs(vectors.T @ vectors - np.eye(len(values))).max(initial=0.0))
    if residual > tol * scale or defect > tol:
        logger.error(f"eigh({solver}) residual={residual:.3e} defect={defect:.3e} tol={tol:.1e}")
        raise EigenSolverError(
            f"{solver} eigendecomposition missed tolerance {tol:.1e}: "
            f"residual {residual:.3e}, orthogonality defect {defect:.3e}"
        )
    values.setflags(write=False)
    vectors.setflags(write=False)
    return EigenDecomposition(values, vectors, residual, defect, tol, solver)


def min_gap(eigenvalues: npt.NDArray[np.float64]) -> float:
    if len(eigenvalues) < 2:
        return math.inf
    return float(np.diff(eigenvalues).min())


def default_gap_tol(eigenvalues: npt.NDArray[np.float64]) -> float:
    spread = float(eigenvalues[-1] - eigenvalues[0]) if len(eigenvalues) else 0.0
    return RELATIVE_GAP_TOL * spread if spread > 0 else RELATIVE_GAP_TOL


def matrix_condition_report(
    h: SymmetricMatrix,
    t: float,
    gap_tol: float | None = None,
    entry_tol: float = DEFAULT_ENTRY_TOL,
    solver: str | None = None,
) -> ConditionReport:
    """Condition report of an already assembled H_t."""
    if not math.isfinite(t):
        raise ValueError(f"t must be finite, got {t}")
    if entry_tol <= 0 or (gap_tol is not None and gap_tol <= 0):
        raise ValueError("Tolerances must be positive")
    decomp = eigh(h, solver=solver)
    gap_tol = gap_tol if gap_tol is not None else default_gap_tol(decomp.eigenvalues)
    gap = min_gap(decomp.eigenvalues)
    entry = float(np.abs(decomp.eigenvectors).min())
    return ConditionReport(
        t=t,
        min_gap=gap,
        min_entry=entry,
        simple=gap > gap_tol,
        nonvanishing=entry > entry_tol,
        gap_tol=gap_tol,
        entry_tol=entry_tol,
    )


def condition_report(
    grid: TorusGrid,
    v: Potential,
    t: float,
    gap_tol: float | None = None,
    entry_tol: float = DEFAULT_ENTRY_TOL,
    solver: str | None = None,
) -> ConditionReport:
    """Simple spectrum and non-vanishing eigenvector diagnostics of Delta + tV."""
    return matrix_condition_report(hamiltonian(grid, v, t), t, gap_tol, entry_tol, solver)


def pair_condition_report(
    a: SymmetricMatrix,
    b: SymmetricMatrix,
    t: float,
    gap_tol: float | None = None,
    entry_tol: float = DEFAULT_ENTRY_TOL,
    solver: str | None = None,
) -> ConditionReport:
    """Condition report of the general family A + tB."""
    if a.shape != b.shape:
        raise ValueError(f"Pair shapes differ: {a.shape} vs {b.shape}")
    return matrix_condition_report(a + t * b, t, gap_tol, entry_tol, solver)


def vanishing_at(
    decomp: EigenDecomposition, vertex: int, gap_tol: float | None = None
) -> float:
    """
    Smallest |phi_k(vertex)| over the spectrum.

    A degenerate eigenvalue cluster always holds a vector vanishing at vertex,
    so any cluster of size > 1 yields 0.
    """
    values = decomp.eigenvalues
    gap_tol = gap_tol if gap_tol is not None else default_gap_tol(values)
    if len(values) > 1 and bool((np.diff(values) <= gap_tol).any()):
        return 0.0
    return float(np.abs(decomp.eigenvectors[vertex, :]).min())


def cycle_spectrum(L: int) -> npt.NDArray[np.float64]:
    """Closed-form cycle Laplacian spectrum 2 - 2cos(2 pi k / L), ascending."""
    return np.sort(2.0 - 2.0 * np.cos(2.0 * np.pi * np.arange(L) / L))


def ipr(vec: npt.ArrayLike) -> float:
    """Inverse participation ratio sum_i vec(i)^4 of a unit vector."""
    arr = np.asarray(vec, dtype=np.float64)
    norm = float(np.linalg.norm(arr))
    if abs(norm - 1.0) > NORM_TOL:
        raise PotentialError(f"IPR needs a normalized vector, got norm {norm:.12g}")
    return float(np.sum(arr**4))


def ipr_heatmap(
    grid: TorusGrid,
    v: Potential,
    t_values: Sequence[float],
    solver: str | None = None,
    runner: TrialRunner | None = None,
) -> list[HeatmapRow]:
    """Rows (t, k, lambda_k, log ipr(phi_k)) for every t, k ascending."""
    if len(t_values) == 0:
        raise ValueError("t_values must be nonempty")
    v.check_grid(grid)
    runner = runner or TrialRunner()

    def sweep(t: float) -> list[HeatmapRow]:
        decomp = eigh(hamiltonian(grid, v, t), solver=solver)
        iprs = np.sum(decomp.eigenvectors**4, axis=0)
        return [
            HeatmapRow(float(t), k, float(decomp.eigenvalues[k]), float(np.log(iprs[k])))
            for k in range(grid.n)
        ]

    rows = [row for chunk in runner.map(sweep, list(t_values)) for row in chunk]
    logger.info(f"Heatmap: {len(t_values)} t values x {grid.n} eigenvectors")
    return rows


