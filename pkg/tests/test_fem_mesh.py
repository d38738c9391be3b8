"""Unit tests for meshes, quadrature and P1 functions."""

import numpy as np
import pytest

from varexp_splus.errors import MeshMismatchError
from varexp_splus.exponent_field import Domain
from varexp_splus.fem_mesh import (
    AnalyticFunction,
    BoundaryTag,
    GradientField,
    Mesh,
    MeshedFunction,
    QuadratureRule,
    SampledField,
    align,
    interpolate,
    prolong,
)

# =============================================================================
# Fixtures
# =============================================================================


@pytest.fixture
def unit():
    return Domain()


@pytest.fixture
def rule():
    return QuadratureRule.gauss_legendre(5)


@pytest.fixture
def coarse(unit):
    """Level-2 mesh: nodes 0, 1/4, 1/2, 3/4, 1."""
    return Mesh.uniform(unit, 2)


@pytest.fixture
def hat(coarse):
    """Hat function at z = 1/2 on the level-2 mesh, vanishing at the ends."""
    return MeshedFunction(coarse, [0.0, 0.5, 1.0, 0.5, 0.0], BoundaryTag.DIRICHLET_ZERO)


# =============================================================================
# Mesh Tests
# =============================================================================


class TestMesh:
    """Tests for uniform meshes and nested refinement."""

    @pytest.mark.parametrize("level", [0, 1, 3, 7])
    def test_uniform_element_count(self, unit, level):
        mesh = Mesh.uniform(unit, level)
        assert mesh.n_elements == 2**level
        assert mesh.n_nodes == 2**level + 1
        assert mesh.level == level
        np.testing.assert_allclose(mesh.widths, 2.0**-level)

    def test_uniform_on_shifted_domain(self):
        mesh = Mesh.uniform(Domain(-1.0, 3.0), 2)
        np.testing.assert_allclose(mesh.nodes, [-1.0, 0.0, 1.0, 2.0, 3.0])

    def test_negative_level_rejected(self, unit):
        with pytest.raises(MeshMismatchError):
            Mesh.uniform(unit, -1)

    def test_nodes_must_cover_domain(self, unit):
        with pytest.raises(MeshMismatchError, match="endpoints"):
            Mesh(unit, [0.0, 0.5, 0.9])

    def test_nodes_must_increase(self, unit):
        with pytest.raises(MeshMismatchError, match="increasing"):
            Mesh(unit, [0.0, 0.5, 0.5, 1.0])

    def test_refine_keeps_parent_nodes(self, coarse):
        fine = coarse.refine()
        assert fine.level == 3
        np.testing.assert_array_equal(fine.nodes[0::2], coarse.nodes)
        assert fine.is_refinement_of(coarse)
        assert not coarse.is_refinement_of(fine)

    def test_refined_matches_uniform(self, unit, coarse):
        assert coarse.refined(3).same_as(Mesh.uniform(unit, 5))

    def test_irregular_mesh_is_not_refinement(self, unit, coarse):
        irregular = Mesh(unit, [0.0, 0.3, 0.6, 1.0])
        assert not coarse.refine().is_refinement_of(irregular)

    def test_locate(self, coarse):
        np.testing.assert_array_equal(coarse.locate([0.0, 0.3, 0.5, 1.0]), [0, 1, 2, 3])

    def test_meshes_are_immutable(self, coarse):
        with pytest.raises(ValueError):
            coarse.nodes[1] = 0.2


# =============================================================================
# Quadrature Tests
# =============================================================================


class TestQuadratureRule:
    """Tests for Gauss-Legendre rules."""

    @pytest.mark.parametrize("n", [2, 5, 10])
    def test_weights_sum_to_reference_length(self, n):
        rule = QuadratureRule.gauss_legendre(n)
        assert rule.size == n
        assert rule.weights.sum() == pytest.approx(2.0)

    @pytest.mark.parametrize("n", [1, 11])
    def test_node_count_bounds(self, n):
        with pytest.raises(ValueError):
            QuadratureRule.gauss_legendre(n)

    def test_five_points_integrate_degree_nine(self, unit, rule):
        mesh = Mesh.uniform(unit, 0)
        field = AnalyticFunction(lambda z: z**9).sample(mesh, rule)
        assert field.integral() == pytest.approx(0.1, abs=1e-15)

    def test_map_to_shapes(self, rule, coarse):
        points, weights = rule.on(coarse)
        assert points.shape == weights.shape == (4, 5)
        assert weights.sum() == pytest.approx(1.0)
        assert np.all((points > 0.0) & (points < 1.0))

    def test_reference_shape_partition_of_unity(self, rule):
        left, right = rule.reference_shape()
        np.testing.assert_allclose(left + right, 1.0)


# =============================================================================
# Sampled Field Tests
# =============================================================================


class TestSampledField:
    """Tests for quadrature-point sampled values."""

    def test_constant_integral(self, coarse, rule):
        field = SampledField.build(coarse, rule, 3.0)
        assert field.integral() == pytest.approx(3.0)
        np.testing.assert_allclose(field.element_integrals(), 0.75)

    def test_arithmetic(self, coarse, rule):
        one = SampledField.build(coarse, rule, 1.0)
        two = SampledField.build(coarse, rule, 2.0)
        assert (one + two).integral() == pytest.approx(3.0)
        assert (two - one).integral() == pytest.approx(1.0)
        assert (3 * one).integral() == pytest.approx(3.0)
        assert (-one).integral() == pytest.approx(-1.0)

    def test_mismatched_meshes_rejected(self, coarse, rule):
        one = SampledField.build(coarse, rule, 1.0)
        other = SampledField.build(coarse.refine(), rule, 1.0)
        with pytest.raises(MeshMismatchError):
            one + other

    def test_gradient_field_one_value_per_element(self, coarse):
        with pytest.raises(MeshMismatchError):
            GradientField(coarse, np.ones(3))


# =============================================================================
# MeshedFunction Tests
# =============================================================================


class TestMeshedFunction:
    """Tests for P1 nodal functions."""

    def test_dirichlet_endpoints_enforced(self, coarse):
        with pytest.raises(MeshMismatchError, match="vanish"):
            MeshedFunction(coarse, [1.0, 0.0, 0.0, 0.0, 0.0], BoundaryTag.DIRICHLET_ZERO)

    def test_coefficient_count_checked(self, coarse):
        with pytest.raises(MeshMismatchError):
            MeshedFunction(coarse, [0.0, 1.0])

    def test_zeros(self, coarse):
        zero = MeshedFunction.zeros(coarse)
        assert zero.is_zero
        assert zero.boundary is BoundaryTag.DIRICHLET_ZERO
        np.testing.assert_array_equal(zero.free_indices, [1, 2, 3])

    def test_free_boundary_indices(self, coarse):
        u = MeshedFunction(coarse, np.ones(5))
        np.testing.assert_array_equal(u.free_indices, np.arange(5))

    def test_evaluation_and_gradient(self, hat):
        assert hat(0.125) == pytest.approx(0.25)
        np.testing.assert_allclose(hat.gradient().values, [2.0, 2.0, -2.0, -2.0])

    def test_sample_integrates_exactly(self, hat, rule):
        assert hat.sample(rule).integral() == pytest.approx(0.5)
        assert hat.sobolev_sample(rule).gradient.integral() == pytest.approx(0.0, abs=1e-15)

    def test_interpolation_of_linear_is_exact(self, coarse, rule):
        u = interpolate(lambda z: 3.0 * z - 1.0, coarse)
        z = np.linspace(0.0, 1.0, 17)
        np.testing.assert_allclose(u(z), 3.0 * z - 1.0, atol=1e-15)
        np.testing.assert_allclose(u.gradient().values, 3.0)

    def test_dirichlet_interpolation_zeroes_endpoints(self, coarse):
        u = interpolate(lambda z: np.ones_like(z), coarse, BoundaryTag.DIRICHLET_ZERO)
        np.testing.assert_array_equal(u.coefficients, [0.0, 1.0, 1.0, 1.0, 0.0])

    def test_arithmetic_aligns_meshes(self, hat):
        fine = prolong(hat, hat.mesh.refine())
        total = hat + fine
        assert total.mesh.same_as(fine.mesh)
        np.testing.assert_allclose(total.coefficients, 2.0 * fine.coefficients)
        assert total.boundary is BoundaryTag.DIRICHLET_ZERO
        assert (hat - hat).is_zero
        np.testing.assert_allclose((2.0 * hat).coefficients, [0.0, 1.0, 2.0, 1.0, 0.0])

    def test_to_rows(self, hat):
        rows = hat.to_rows()
        assert rows[2] == {"z": 0.5, "u": 1.0}
        assert len(rows) == 5


# =============================================================================
# Prolongation Tests
# =============================================================================


class TestProlong:
    """Tests for exact transfer onto refinements."""

    def test_prolong_preserves_function(self, hat):
        fine = prolong(hat, hat.mesh.refined(3))
        z = np.linspace(0.0, 1.0, 101)
        np.testing.assert_allclose(fine(z), hat(z), atol=1e-13)
        assert fine.boundary is BoundaryTag.DIRICHLET_ZERO

    def test_prolong_to_same_mesh_is_identity(self, hat):
        assert prolong(hat, hat.mesh) is hat

    def test_prolong_to_coarser_rejected(self, hat):
        with pytest.raises(MeshMismatchError):
            prolong(hat, Mesh.uniform(hat.mesh.domain, 1))

    def test_prolong_to_non_nested_rejected(self, hat, unit):
        with pytest.raises(MeshMismatchError):
            prolong(hat, Mesh(unit, np.linspace(0.0, 1.0, 8)))

    def test_align_order(self, hat):
        fine = prolong(hat, hat.mesh.refine())
        first, second = align(fine, hat)
        assert first is fine
        assert second.mesh.same_as(fine.mesh)


# =============================================================================
# Analytic Function Tests
# =============================================================================


class TestAnalyticFunction:
    """Tests for closed-form functions sampled at quadrature points."""

    def test_sobolev_sample(self, coarse, rule):
        f = AnalyticFunction(lambda z: z * (1.0 - z), lambda z: 1.0 - 2.0 * z, name="parabola")
        sample = f.sobolev_sample(coarse, rule)
        assert sample.value.integral() == pytest.approx(1.0 / 6.0)
        assert sample.gradient.integral() == pytest.approx(0.0, abs=1e-15)
        assert sample.mesh is coarse

    def test_missing_derivative(self, coarse, rule):
        with pytest.raises(ValueError, match="derivative"):
            AnalyticFunction(lambda z: z, name="plain").sobolev_sample(coarse, rule)

    def test_scalar_valued_callable_broadcasts(self, coarse, rule):
        f = AnalyticFunction(lambda z: 2.0)
        assert f.sample(coarse, rule).integral() == pytest.approx(2.0)
