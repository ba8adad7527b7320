import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from moyalqft.errors import DimensionError, DomainError, PreconditionError
from moyalqft.symplectic import (
    ComplexStructure,
    Metric,
    OrthogonalMap,
    SymplecticStructure,
    adaptedness_residual,
    decompose_adapted,
    haar_orthogonal,
    is_adapted,
    matrix_sqrt,
    orthogonal_action,
    r_lambda,
    random_adapted_pair,
    random_adapted_sigma,
    random_metric,
    random_orthogonal,
    round_trip_residual,
    standard_structures,
    symmetry_group_check,
)


def rotation(t):
    return np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])


class TestStandardStructures:
    def test_four_dim_layout(self):
        g, s = standard_structures(4)
        np.testing.assert_array_equal(g.g, np.eye(4))
        expected = [[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]]
        np.testing.assert_array_equal(s.sigma, expected)

    def test_two_dim(self):
        _, s = standard_structures(2)
        np.testing.assert_array_equal(s.sigma, [[0, -1], [1, 0]])

    @pytest.mark.parametrize("dim", [3, 0, -2])
    def test_bad_dimension(self, dim):
        with pytest.raises(DimensionError):
            standard_structures(dim)


class TestMatrixSqrt:
    def test_diagonal(self):
        np.testing.assert_allclose(matrix_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-15)

    def test_identity(self):
        np.testing.assert_allclose(matrix_sqrt(np.eye(4)), np.eye(4), atol=1e-15)

    def test_random_spd(self, rng):
        q = haar_orthogonal(6, rng)
        w = q.T @ np.diag(rng.uniform(0.1, 10, 6)) @ q
        r = matrix_sqrt(w)
        np.testing.assert_allclose(r, r.T, atol=0)
        assert np.max(np.abs(r @ r - w)) < 1e-10 * np.max(np.abs(w))

    @pytest.mark.parametrize("m", [[[1.0, 2.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, -1.0]]])
    def test_rejects(self, m):
        with pytest.raises(DomainError):
            matrix_sqrt(np.array(m))


class TestTypes:
    def test_metric_rejects_asymmetric(self):
        with pytest.raises(DomainError):
            Metric(np.array([[1.0, 0.1], [0.0, 1.0]]))

    def test_metric_rejects_indefinite(self):
        with pytest.raises(DomainError):
            Metric(np.diag([1.0, -1.0]))

    def test_metric_cache(self, rng):
        g = random_metric(4, rng)
        np.testing.assert_allclose(g.g_sqrt @ g.g_sqrt, g.g, atol=1e-12)
        np.testing.assert_allclose(g.g_inv @ g.g, np.eye(4), atol=1e-12)

    def test_sigma_rejects_symmetric_and_singular(self):
        with pytest.raises(DomainError):
            SymplecticStructure(np.eye(2))
        with pytest.raises(DomainError):
            SymplecticStructure(np.zeros((2, 2)))

    def test_complex_structure(self):
        ComplexStructure(np.array([[0.0, -1.0], [1.0, 0.0]]))
        with pytest.raises(DomainError):
            ComplexStructure(np.eye(2))

    def test_orthogonal_map_checks_metric(self, diag41):
        g, _ = diag41
        with pytest.raises(DomainError):
            OrthogonalMap(rotation(0.3), g)
        with pytest.raises(DimensionError):
            OrthogonalMap(np.eye(4), g)


class TestAdapted:
    def test_standard_pair(self, std4):
        g, s = std4
        ok, witness = is_adapted(s, g)
        assert ok
        np.testing.assert_allclose(witness.i_matrix, -s.sigma, atol=1e-15)

    def test_scaled_sigma_not_adapted(self, std2):
        g, s = std2
        ok, witness = is_adapted(SymplecticStructure(2 * s.sigma), g)
        assert not ok and witness is None

    def test_witness_for_random_metric(self, rng):
        g = random_metric(4, rng)
        _, st = standard_structures(4)
        s = SymplecticStructure(g.g_sqrt @ st.sigma @ g.g_sqrt)
        ok, witness = is_adapted(s, g)
        i = witness.i_matrix
        assert ok
        assert np.max(np.abs(i.T @ g.g @ i - g.g)) < 1e-9
        assert np.max(np.abs(i.T @ g.g - s.sigma)) < 1e-9

    def test_dimension_mismatch(self, std2, std4):
        with pytest.raises(DimensionError):
            is_adapted(std4[1], std2[0])


class TestDecompose:
    def test_standard(self, std4):
        g, s = std4
        r = decompose_adapted(s, g)
        assert np.max(np.abs(r.lam.T @ s.sigma @ r.lam - s.sigma)) < 1e-12
        assert round_trip_residual(s, g, r) < 1e-12

    def test_diag41(self, diag41):
        g, s = diag41
        np.testing.assert_allclose(s.sigma, [[0, -2], [2, 0]], atol=1e-15)
        assert round_trip_residual(s, g, decompose_adapted(s, g)) < 1e-12

    def test_flip_branch(self, std2):
        g, s = std2
        flipped = SymplecticStructure(-s.sigma)
        r = decompose_adapted(flipped, g)
        np.testing.assert_allclose(np.abs(r.lam), [[0, 1], [1, 0]], atol=1e-14)
        assert round_trip_residual(flipped, g, r) < 1e-12

    def test_not_adapted(self, std2):
        g, s = std2
        with pytest.raises(PreconditionError):
            decompose_adapted(SymplecticStructure(3 * s.sigma), g)

    @settings(max_examples=60, deadline=None)
    @given(dim=st.sampled_from([2, 4, 6, 8]), seed=st.integers(0, 2**31 - 1), spread=st.floats(0.0, 2.5))
    def test_round_trip_property(self, dim, seed, spread):
        g, s = random_adapted_pair(dim, seed, spread)
        r = decompose_adapted(s, g)
        np.testing.assert_allclose(r.lam.T @ r.lam, np.eye(dim), atol=1e-12)
        assert round_trip_residual(s, g, r) < 1e-9

    def test_deterministic(self):
        g, s = random_adapted_pair(6, 11)
        np.testing.assert_array_equal(decompose_adapted(s, g).lam, decompose_adapted(s, g).lam)


class TestOrbitProperties:
    @pytest.mark.parametrize("seed", range(10))
    def test_adapted_identities(self, seed):
        g, s = random_adapted_pair(4, seed)
        assert abs(abs(np.linalg.det(s.sigma)) - g.det) < 1e-9 * g.det
        si = s.sigma_inv
        np.testing.assert_allclose(si.T @ g.g @ si, g.g_inv, atol=1e-10 * np.max(np.abs(g.g_inv)))

    @pytest.mark.parametrize("seed", range(10))
    def test_action_preserves_adaptedness(self, seed):
        g, s = random_adapted_pair(4, seed)
        lam = random_orthogonal(g, seed + 100)
        assert adaptedness_residual(orthogonal_action(lam, s), g) < 1e-9

    def test_action_identity_and_law(self, rng):
        g, s = random_adapted_pair(4, 3)
        ident = OrthogonalMap.identity(g)
        np.testing.assert_allclose(orthogonal_action(ident, s).sigma, s.sigma, atol=1e-14)
        lam, mu = random_orthogonal(g, 1), random_orthogonal(g, 2)
        lhs = orthogonal_action(lam.compose(mu), s).sigma
        rhs = orthogonal_action(lam, orthogonal_action(mu, s)).sigma
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    @pytest.mark.parametrize("seed", range(5))
    def test_r_lambda_orthogonal(self, seed):
        g, s = random_adapted_pair(4, seed)
        rl = r_lambda(decompose_adapted(s, g), g, random_orthogonal(g, seed))
        np.testing.assert_allclose(rl.T @ rl, np.eye(4), atol=1e-10)

    def test_random_adapted_sigma(self, diag41):
        g, _ = diag41
        assert adaptedness_residual(random_adapted_sigma(g, 5), g) < 1e-12


class TestRandomOrthogonal:
    def test_identity_metric_gives_standard_orthogonal(self):
        lam = random_orthogonal(Metric.identity(4), 3).lam
        np.testing.assert_allclose(lam.T @ lam, np.eye(4), atol=1e-12)

    def test_deterministic(self, diag41):
        g, _ = diag41
        np.testing.assert_array_equal(random_orthogonal(g, 9).lam, random_orthogonal(g, 9).lam)

    def test_diag41_seed7(self, diag41):
        g, _ = diag41
        lam = random_orthogonal(g, 7).lam
        assert np.max(np.abs(lam.T @ g.g @ lam - g.g)) < 1e-10


class TestSymmetryGroup:
    def test_identity(self, std4):
        g, s = std4
        assert symmetry_group_check(OrthogonalMap.identity(g), s)

    def test_mixed_plane_rotation_breaks_sigma(self, std4):
        g, s = std4
        lam = np.eye(4)
        lam[np.ix_([0, 2], [0, 2])] = rotation(0.7)
        assert not symmetry_group_check(OrthogonalMap(lam, g), s)

    def test_equal_angle_block_rotation(self, std4):
        g, s = std4
        lam = np.kron(np.eye(2), rotation(0.4))
        assert symmetry_group_check(OrthogonalMap(lam, g), s)
