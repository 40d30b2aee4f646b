"""Tests for torus automorphisms and symmetry certificates."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anderson_lab.classify import generic_t_samples
from anderson_lab.errors import GridError, PoolCapError
from anderson_lab.grid import build_torus, laplacian
from anderson_lab.spectral import Potential, eigh, hamiltonian, min_gap, vanishing_at
from anderson_lab.symmetry import (
    CertificateReason,
    PermKind,
    SymmetryCertificate,
    VertexPermutation,
    automorphism_pool,
    axis_reflection_perm,
    axis_swap_perm,
    certify,
    commutes_with_laplacian,
    commutes_with_potential,
    find_certificate,
    reflection_center,
    reflection_centers,
    reflection_perm,
    shift_perm,
)


class TestPermutations:
    """Tests for the permutation constructors."""

    def test_shift_on_cycle(self):
        """Test a unit shift sends j to j + 1."""
        perm = shift_perm(build_torus([5]), 0, 1)
        assert perm.image.tolist() == [1, 2, 3, 4, 0]
        assert perm.order == 5
        assert perm.fixed_points == []

    def test_reflection_on_cycle(self):
        """Test reflection about 0 on Z/5."""
        perm = reflection_perm(build_torus([5]), [0])
        assert perm.image.tolist() == [0, 4, 3, 2, 1]
        assert perm.order == 2
        assert perm.fixed_points == [0]

    @given(st.integers(min_value=3, max_value=12), st.data())
    @settings(max_examples=40, deadline=None)
    def test_shifts_compose_additively(self, L, data):
        """Test shift(a) then shift(b) is shift(a + b mod L)."""
        grid = build_torus([L])
        a = data.draw(st.integers(min_value=0, max_value=2 * L))
        b = data.draw(st.integers(min_value=0, max_value=2 * L))
        composite = shift_perm(grid, 0, a).then(shift_perm(grid, 0, b))
        assert np.array_equal(composite.image, shift_perm(grid, 0, (a + b) % L).image)

    def test_shifts_compose_on_grid_axes(self):
        """Test shifts along one axis of a 3x4 grid add modulo that side."""
        grid = build_torus([3, 4])
        composite = shift_perm(grid, 1, 3).then(shift_perm(grid, 1, 2))
        assert np.array_equal(composite.image, shift_perm(grid, 1, 1).image)

    @pytest.mark.parametrize("L", [3, 4, 5, 6, 7, 8, 11, 12])
    def test_reflection_fixed_points(self, L):
        """Test every cycle reflection is an involution with 1 fixed point on odd L, 2 on even L."""
        grid = build_torus([L])
        for c in range(L):
            perm = reflection_perm(grid, [c])
            assert perm.order == 2
            assert perm.then(perm).is_identity
            expected = [c] if L % 2 else sorted([c, (c + L // 2) % L])
            assert perm.fixed_points == expected

    def test_axis_swap(self):
        """Test transposition of a 3x3 grid fixes the diagonal."""
        grid = build_torus([3, 3])
        perm = axis_swap_perm(grid, [1, 0])
        assert perm.fixed_points == [0, 4, 8]
        assert perm.image[grid.index((0, 1))] == grid.index((1, 0))

    def test_axis_swap_unequal_sides(self):
        """Test swapping axes of different length is rejected."""
        with pytest.raises(GridError):
            axis_swap_perm(build_torus([3, 5]), [1, 0])

    def test_axis_reflection(self):
        """Test reflecting one axis leaves the other coordinate alone."""
        grid = build_torus([3, 4])
        perm = axis_reflection_perm(grid, 1, 0)
        assert perm.image[grid.index((2, 1))] == grid.index((2, 3))

    def test_then_composes(self):
        """Test shift then reflection on a cycle."""
        grid = build_torus([5])
        composite = shift_perm(grid, 0, 1).then(reflection_perm(grid, [0]))
        assert composite.image.tolist() == [4, 3, 2, 1, 0]
        assert composite.descriptor.kind == PermKind.COMPOSITE
        assert str(composite.descriptor) == "shift(1,) then reflection(0,)"

    def test_matrix(self):
        """Test the permutation matrix maps e_x to e_image[x]."""
        perm = shift_perm(build_torus([4]), 0, 1)
        p = perm.matrix()
        assert np.array_equal(p @ np.eye(4)[0], np.eye(4)[1])

    def test_rejects_non_bijection(self):
        """Test a repeated image is rejected."""
        grid = build_torus([3])
        with pytest.raises(ValueError):
            VertexPermutation(np.array([0, 0, 1]), shift_perm(grid, 0, 1).descriptor)


class TestAutomorphismPool:
    """Tests for automorphism_pool function."""

    @pytest.mark.parametrize(
        ("dims", "size"), [([3], 5), ([5], 9), ([4], 7), ([3, 3], 71), ([3, 5], 59)]
    )
    def test_pool_size(self, dims, size):
        """Test the pool is the full symmetry group minus the identity."""
        assert len(automorphism_pool(build_torus(dims))) == size

    def test_pool_starts_with_shifts(self):
        """Test deterministic order: shifts first."""
        pool = automorphism_pool(build_torus([5]))
        assert [p.descriptor.kind for p in pool[:4]] == [PermKind.SHIFT] * 4
        assert pool[4].descriptor.kind == PermKind.REFLECTION

    def test_all_commute_with_laplacian(self):
        """Test every pool element is a graph automorphism."""
        grid = build_torus([4, 4])
        lap = laplacian(grid)
        for perm in automorphism_pool(grid):
            p = perm.matrix()
            assert np.array_equal(p @ lap, lap @ p)
            assert commutes_with_laplacian(grid, perm)

    def test_unique_images(self):
        """Test the pool is deduplicated by image."""
        pool = automorphism_pool(build_torus([4, 4]))
        assert len({p.key for p in pool}) == len(pool)

    def test_cap(self):
        """Test a small cap raises PoolCapError."""
        with pytest.raises(PoolCapError):
            automorphism_pool(build_torus([3, 3]), cap=10)


class TestCertificates:
    """Tests for certify and find_certificate."""

    def test_constant_potential(self):
        """Test a constant potential gets a shift certificate."""
        grid = build_torus([5])
        cert = find_certificate(grid, Potential(np.ones(5)))
        assert cert is not None
        assert cert.reason == CertificateReason.DEGENERATE_SPECTRUM
        assert cert.perm_descriptor.kind == PermKind.SHIFT

    def test_reflection_symmetric(self):
        """Test a reflection-symmetric potential gets a vanishing certificate."""
        grid = build_torus([5])
        cert = find_certificate(grid, Potential([1.0, 1.0, -1.0, -1.0, 1.0]))
        assert cert is not None
        assert cert.reason == CertificateReason.VANISHING_AT_FIXED_POINT
        assert cert.fixed_points == [0]

    def test_asymmetric_on_prime_cycle(self):
        """Test a reflection-free potential on Z/7 has no certificate."""
        grid = build_torus([7])
        assert find_certificate(grid, Potential([1, 1, -1, 1, -1, -1, -1])) is None

    def test_fixed_point_free_involution(self):
        """Test a half-turn on Z/4 certifies nothing on its own."""
        grid = build_torus([4])
        v = Potential([1.0, -1.0, 1.0, -1.0])
        assert certify(grid, shift_perm(grid, 0, 2), v) is None

    def test_non_commuting(self):
        """Test a permutation not preserving v gives no certificate."""
        grid = build_torus([5])
        v = Potential([1.0, 2.0, 3.0, 4.0, 5.0])
        assert not commutes_with_potential(shift_perm(grid, 0, 1), v)
        assert certify(grid, shift_perm(grid, 0, 1), v) is None

    def test_certificate_is_valid(self):
        """Test violations() is empty for a produced certificate and not for a wrong potential."""
        grid = build_torus([3, 3])
        v = Potential([1, -1, 1, -1, 1, -1, 1, -1, 1])
        cert = find_certificate(grid, v)
        assert cert is not None
        assert cert.violations(grid, v) == []
        assert cert.violations(grid, Potential(np.arange(9.0))) != []

    def test_certificate_round_trips_json(self):
        """Test certificates survive JSON serialization."""
        grid = build_torus([5])
        v = Potential(np.ones(5))
        cert = find_certificate(grid, v)
        restored = SymmetryCertificate.model_validate_json(cert.model_dump_json())
        assert restored.violations(grid, v) == []

    @pytest.mark.parametrize("dims", [[5], [7], [3, 3]])
    def test_certificates_are_sound(self, dims):
        """Test certified consequences are visible numerically at generic t on 500 potentials."""
        grid = build_torus(dims)
        certified = 0
        for seed in range(500):
            rng = np.random.default_rng([seed, grid.n])
            v = Potential(np.where(rng.random(grid.n) < 0.5, 1.0, -1.0), "bernoulli")
            cert = find_certificate(grid, v)
            if cert is None:
                continue
            certified += 1
            for t in generic_t_samples(seed):
                decomp = eigh(hamiltonian(grid, v, t))
                if cert.reason == CertificateReason.DEGENERATE_SPECTRUM:
                    assert min_gap(decomp.eigenvalues) < 1e-6, (seed, t)
                else:
                    assert vanishing_at(decomp, cert.fixed_points[0]) < 1e-6, (seed, t)
        assert certified > 0

    @pytest.mark.parametrize("L", [3, 5, 7])
    def test_certificate_iff_reflection_center(self, L):
        """Test a cycle potential is certified exactly when it has a reflection center."""
        grid = build_torus([L])
        disagreements = []
        for code in range(1 << L):
            v = Potential([1.0 if code >> x & 1 else -1.0 for x in range(L)], "bernoulli")
            if (find_certificate(grid, v) is None) != (reflection_center(v) is None):
                disagreements.append(v.to_csv())
        assert disagreements == []

    def test_odd_n_reason_rejected(self):
        """Test the odd-n reason is never accepted in place of the order-based ones."""
        grid = build_torus([5])
        v = Potential([1.0, 1.0, -1.0, -1.0, 1.0])
        cert = find_certificate(grid, v)
        forged = cert.model_copy(update={"reason": CertificateReason.ODD_N_PERMUTATION})
        assert cert.violations(grid, v) == []
        assert any("odd-n" in p for p in forged.violations(grid, v))


class TestReflectionCenters:
    """Tests for reflection_centers function."""

    def test_constant(self):
        """Test every vertex is a center of a constant potential."""
        assert reflection_centers([1.0] * 5) == [0, 1, 2, 3, 4]

    def test_single_center(self):
        """Test a potential with one center."""
        assert reflection_centers([1.0, 1.0, -1.0, -1.0, 1.0]) == [0]

    def test_no_center(self):
        """Test the reflection-free witness on Z/7."""
        assert reflection_center([1, 1, -1, 1, -1, -1, -1]) is None

    def test_matches_pool(self):
        """Test reflection centers agree with commuting pool reflections on Z/7."""
        grid = build_torus([7])
        v = Potential([1, -1, 1, 1, 1, -1, 1])
        centers = reflection_centers(v)
        commuting = [
            p.descriptor.centers[0]
            for p in automorphism_pool(grid)
            if p.descriptor.kind == PermKind.REFLECTION and commutes_with_potential(p, v)
        ]
        assert centers == commuting
