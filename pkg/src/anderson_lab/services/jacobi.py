"""Cyclic Jacobi eigensolver for dense real symmetric matrices."""

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from loguru import logger

from anderson_lab.errors import EigenSolverError

MAX_SWEEPS = 30
# Rotations below this fraction of the mean off-diagonal mass are skipped
# during the first THRESHOLD_SWEEPS sweeps.
THRESHOLD_FACTOR = 0.2
THRESHOLD_SWEEPS = 3
# Above this n one decomposition takes seconds to minutes (n=400: ~12 s).
PRACTICAL_MAX_N = 300


@dataclass
class JacobiResult:
    """Unsorted eigenpairs straight out of the rotation loop."""

    eigenvalues: npt.NDArray[np.float64]
    eigenvectors: npt.NDArray[np.float64]
    sweeps: int


def round_robin_schedule(n: int) -> list[tuple[npt.NDArray[np.intp], npt.NDArray[np.intp]]]:
    """
    Tournament ordering of all index pairs (p < q).

    Each round is a set of disjoint pairs, so all its rotations commute and can
    be applied at once. Odd n gets a dummy index whose pairs are dropped.
    """
    m = n + n % 2
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = [
            (min(a, b), max(a, b))
            for a, b in (
                (players[i], players[m - 1 - i]) for i in range(m // 2)
            )
            if a < n and b < n
        ]
        p = np.array([a for a, _ in pairs], dtype=np.intp)
        q = np.array([b for _, b in pairs], dtype=np.intp)
        rounds.append((p, q))
        players = [players[0], players[-1], *players[1:-1]]
    return rounds


class JacobiSolver:
    """
    Cyclic Jacobi with threshold strategy and parallel (round-robin) ordering.

    Meant for the small grids this package enumerates; beyond PRACTICAL_MAX_N
    vertices it logs a warning and the lapack solver should be used instead.
    """

    def __init__(self, max_sweeps: int = MAX_SWEEPS):
        self.max_sweeps = max_sweeps
        self._schedules: dict[int, list] = {}

    def _schedule(self, n: int):
        if n not in self._schedules:
            self._schedules[n] = round_robin_schedule(n)
        return self._schedules[n]

    @staticmethod
    def _off_diagonal(a: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        return a - np.diag(np.diag(a))

    def solve(self, matrix: npt.NDArray[np.float64]) -> JacobiResult:
        """
        Diagonalize a symmetric matrix by plane rotations.

        Raises:
            EigenSolverError: If the off-diagonal mass does not vanish within
                max_sweeps sweeps
        """
        a = np.array(matrix, dtype=np.float64, copy=True)
        n = a.shape[0]
        v = np.eye(n)
        frob = float(np.linalg.norm(a))
        if n <= 1 or frob == 0.0:
            return JacobiResult(np.diag(a).copy(), v, 0)

        target = n * np.finfo(np.float64).eps * frob
        schedule = self._schedule(n)
        if n > PRACTICAL_MAX_N:
            logger.warning(
                f"Jacobi on n={n} > {PRACTICAL_MAX_N} is slow; "
                "use --solver lapack or ANDERSON_LAB_SOLVER=lapack for large grids"
            )

        for sweep in range(1, self.max_sweeps + 1):
            off = self._off_diagonal(a)
            off_norm = float(np.linalg.norm(off))
            if off_norm <= target:
                logger.debug(f"Jacobi converged: n={n}, sweeps={sweep - 1}")
                return JacobiResult(np.diag(a).copy(), v, sweep - 1)

            threshold = 0.0
            if sweep <= THRESHOLD_SWEEPS:
                threshold = THRESHOLD_FACTOR * float(np.abs(off).sum()) / n**2

            for p_all, q_all in schedule:
                apq = a[p_all, q_all]
                mask = np.abs(apq) > threshold
                if not mask.any():
                    continue
                p, q, apq = p_all[mask], q_all[mask], apq[mask]

                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                # A <- A J on columns, then J^T A on rows
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c[:, None] * row_p - s[:, None] * row_q
                a[q, :] = s[:, None] * row_p + c[:, None] * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0

                vec_p, vec_q = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q

        off_norm = float(np.linalg.norm(self._off_diagonal(a)))
        if off_norm <= target:
            return JacobiResult(np.diag(a).copy(), v, self.max_sweeps)
        logger.error(f"Jacobi failed: n={n}, off-diagonal {off_norm:.3e} > {target:.3e}")
        raise EigenSolverError(
            f"Jacobi did not converge in {self.max_sweeps} sweeps "
            f"(off-diagonal norm {off_norm:.3e})"
        )
