"""Tests for the cyclic Jacobi eigensolver."""

from unittest.mock import patch

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from loguru import logger

from anderson_lab.errors import EigenSolverError
from anderson_lab.services.jacobi import JacobiSolver, round_robin_schedule


class TestRoundRobinSchedule:
    """Tests for round_robin_schedule function."""

    @pytest.mark.parametrize("n", [2, 5, 8, 11])
    def test_covers_every_pair_once(self, n):
        """Test every pair p < q appears exactly once."""
        pairs = [
            (int(p), int(q)) for ps, qs in round_robin_schedule(n) for p, q in zip(ps, qs)
        ]
        assert sorted(pairs) == [(p, q) for p in range(n) for q in range(p + 1, n)]

    @pytest.mark.parametrize("n", [4, 7])
    def test_rounds_are_disjoint(self, n):
        """Test no index appears twice within a round."""
        for ps, qs in round_robin_schedule(n):
            indices = np.concatenate([ps, qs])
            assert len(set(indices.tolist())) == len(indices)


class TestJacobiSolver:
    """Tests for JacobiSolver class."""

    def test_diagonal_input(self):
        """Test a diagonal matrix converges with zero sweeps."""
        result = JacobiSolver().solve(np.diag([3.0, 1.0, 2.0]))
        assert result.sweeps == 0
        assert sorted(result.eigenvalues.tolist()) == [1.0, 2.0, 3.0]

    def test_two_by_two(self):
        """Test the eigenvalues of [[2, 1], [1, 2]]."""
        result = JacobiSolver().solve(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert np.allclose(sorted(result.eigenvalues), [1.0, 3.0])

    def test_zero_matrix(self):
        """Test the zero matrix returns immediately."""
        result = JacobiSolver().solve(np.zeros((4, 4)))
        assert np.array_equal(result.eigenvectors, np.eye(4))

    def test_sweep_cap(self):
        """Test running out of sweeps raises EigenSolverError."""
        m = np.random.default_rng(3).standard_normal((12, 12))
        with pytest.raises(EigenSolverError, match="did not converge"):
            JacobiSolver(max_sweeps=1).solve(m + m.T)

    @given(st.integers(min_value=2, max_value=30), st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_reconstruction(self, n, seed):
        """Test A V = V diag(lambda) and V^T V = I on random symmetric matrices."""
        m = np.random.default_rng(seed).standard_normal((n, n))
        a = (m + m.T) / 2
        result = JacobiSolver().solve(a)
        v, lam = result.eigenvectors, result.eigenvalues
        assert np.abs(a @ v - v * lam).max() <= 1e-10 * max(1.0, np.abs(a).max())
        assert np.abs(v.T @ v - np.eye(n)).max() <= 1e-10

    def test_matches_lapack(self):
        """Test eigenvalues agree with numpy.linalg.eigvalsh."""
        m = np.random.default_rng(11).standard_normal((40, 40))
        a = m + m.T
        ours = np.sort(JacobiSolver().solve(a).eigenvalues)
        assert np.allclose(ours, np.linalg.eigvalsh(a), atol=1e-10)

    def test_large_n_warns(self):
        """Test matrices past PRACTICAL_MAX_N log a warning that points at lapack."""
        messages: list[str] = []
        sink = logger.add(messages.append, level="WARNING", format="{message}")
        try:
            with patch("anderson_lab.services.jacobi.PRACTICAL_MAX_N", 4):
                JacobiSolver().solve(np.diag([1.0, 2.0, 3.0, 4.0, 5.0]) + 0.1)
                JacobiSolver().solve(np.eye(4) + 0.1)
        finally:
            logger.remove(sink)
        assert len(messages) == 1
        assert "n=5" in messages[0] and "lapack" in messages[0]
