"""Tests for S+ probes, the θ split and the uniform-integrability profile."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from varexp_splus.closed_forms import density, function
from varexp_splus.errors import AliasingError
from varexp_splus.exponent_field import Domain, ExponentField
from varexp_splus.fem_mesh import BoundaryTag, Mesh, MeshedFunction, QuadratureRule, interpolate
from varexp_splus.galerkin import GalerkinProblem
from varexp_splus.operator_kernel import DensityLoad, build_kernel, pairing
from varexp_splus.splus_lab import (
    PROBE_FIELDS,
    ProbeVerdict,
    SequenceKind,
    SequenceSpec,
    oscillation_member,
    run_probe,
    theta_decomposition,
    uniform_integrability_profile,
)

UNIT = Domain()
RULE = QuadratureRule.gauss_legendre(5)
ADMISSIBLE_KERNELS = (
    "p(z)-laplacian",
    "perturbed-p(z)-laplacian",
    "smoothed-p(z)-laplacian",
    "convective-p(z)-laplacian",
)

coefficient_arrays = hnp.arrays(
    np.float64,
    2**3 + 1,
    elements=st.floats(min_value=-3.0, max_value=3.0, allow_nan=False),
)

# =============================================================================
# Fixtures
# =============================================================================


@pytest.fixture
def p_two():
    return ExponentField.constant(UNIT, 2.0)


@pytest.fixture
def p_affine():
    return ExponentField.affine(UNIT, 2.0, 1.0)


@pytest.fixture
def fine_mesh():
    """Level 8: 256 elements, enough for frequencies up to 64."""
    return Mesh.uniform(UNIT, 8)


@pytest.fixture
def oscillation_report(p_two):
    spec = SequenceSpec.oscillation((4, 8, 16, 32))
    return run_probe(spec, build_kernel("laplacian", p_two), p_two, rule=RULE)


# =============================================================================
# Oscillation Member Tests
# =============================================================================


class TestOscillationMember:
    """sin(nπz)/(nπ) interpolants."""

    def test_vanishes_at_ends(self, fine_mesh):
        member = oscillation_member(8, fine_mesh)
        assert member.boundary is BoundaryTag.DIRICHLET_ZERO
        assert member.coefficients[0] == 0.0
        assert member.coefficients[-1] == 0.0

    def test_largest_representable_frequency(self, fine_mesh):
        oscillation_member(64, fine_mesh)

    def test_aliasing_rejected(self, fine_mesh):
        with pytest.raises(AliasingError, match="needs at least 512 elements"):
            oscillation_member(128, fine_mesh)

    def test_frequency_must_be_positive(self, fine_mesh):
        with pytest.raises(ValueError):
            oscillation_member(0, fine_mesh)


# =============================================================================
# θ Decomposition Tests
# =============================================================================


class TestThetaDecomposition:
    """θ¹ + θ² + cross term reproduces the pairing."""

    def test_identity_with_s_dependent_kernel(self, p_affine, fine_mesh):
        kernel = build_kernel("perturbed-p(z)-laplacian", p_affine)
        u_n = oscillation_member(8, fine_mesh) + interpolate(
            lambda z: z * (1.0 - z), fine_mesh, BoundaryTag.DIRICHLET_ZERO
        )
        u = interpolate(lambda z: 2.0 * z * (1.0 - z), Mesh.uniform(UNIT, 5), BoundaryTag.DIRICHLET_ZERO)
        split = theta_decomposition(u_n, u, kernel, RULE)
        direct = pairing(u_n, u_n - u, kernel, RULE)
        assert split.pairing == pytest.approx(direct, abs=1e-9)

    def test_monotone_part_nonnegative(self, p_affine, fine_mesh):
        kernel = build_kernel("p(z)-laplacian", p_affine)
        u_n = oscillation_member(16, fine_mesh)
        split = theta_decomposition(u_n, function("parabola"), kernel, RULE)
        assert split.theta_two == 0.0  # kernel ignores s
        assert split.monotone_part > 0.0
        assert split.theta_one_elements.shape == (fine_mesh.n_elements,)
        assert split.xi_elements.min() >= 0.0

    @given(
        u_n=coefficient_arrays,
        u=coefficient_arrays,
        label=st.sampled_from(ADMISSIBLE_KERNELS),
    )
    @settings(max_examples=100, deadline=None)
    def test_theta_one_sign_and_identity(self, u_n, u, label):
        p = ExponentField.affine(UNIT, 2.0, 1.0)
        kernel = build_kernel(label, p)
        mesh = Mesh.uniform(UNIT, 3)
        member = MeshedFunction(mesh, u_n)
        limit = MeshedFunction(mesh, u)
        split = theta_decomposition(member, limit, kernel, RULE)
        assert split.theta_one >= -1e-9
        direct = pairing(member, member - limit, kernel, RULE)
        assert split.pairing == pytest.approx(direct, abs=1e-9 * max(1.0, abs(direct)))

    def test_identical_functions_give_zero(self, p_affine, fine_mesh):
        kernel = build_kernel("perturbed-p(z)-laplacian", p_affine)
        u = oscillation_member(4, fine_mesh)
        split = theta_decomposition(u, u, kernel, RULE)
        assert split.theta_one == 0.0
        assert split.theta_two == 0.0
        assert split.cross_term == 0.0


# =============================================================================
# Probe Tests
# =============================================================================


class TestOscillationProbe:
    """Weakly null oscillations that do not converge strongly."""

    def test_pairing_stays_near_one_half(self, oscillation_report):
        final = oscillation_report.rows[-1]
        assert final.index == 32
        expected = 0.5 * (math.sin(math.pi / 16) / (math.pi / 16)) ** 2
        assert final.pairing == pytest.approx(expected, rel=1e-6)
        assert final.pairing == pytest.approx(0.5, abs=0.01)

    def test_errors(self, oscillation_report):
        for row in oscillation_report.rows:
            n = row.index
            assert row.lebesgue_error == pytest.approx(1.0 / (n * math.pi * math.sqrt(2.0)), rel=0.1)
        assert oscillation_report.rows[-1].gradient_error == pytest.approx(math.sqrt(0.5), rel=0.01)

    def test_weak_surrogate_decays(self, oscillation_report):
        surrogates = [row.weak_surrogate for row in oscillation_report.rows]
        assert surrogates[-1] < surrogates[0]

    def test_verdict(self, oscillation_report):
        assert not oscillation_report.hypothesis_met
        assert not oscillation_report.strong_convergence_observed
        assert oscillation_report.verdict is ProbeVerdict.HYPOTHESIS_VIOLATED

    def test_rows_and_summary(self, oscillation_report):
        rows = oscillation_report.to_rows()
        assert tuple(rows[0]) == PROBE_FIELDS
        summary = oscillation_report.summary()
        assert summary["verdict"] == "hypothesis-violated"
        assert summary["members"] == 4
        assert summary["dominating_shadow_max"] >= max(r.xi_shadow for r in oscillation_report.rows)

    def test_shadow_dominates_every_member(self, oscillation_report):
        for row in oscillation_report.rows:
            assert np.max(oscillation_report.dominating_shadow) >= row.xi_shadow

    def test_aliasing_on_coarse_mesh(self, p_two):
        spec = SequenceSpec.oscillation((4, 64))
        with pytest.raises(AliasingError):
            run_probe(spec, build_kernel("laplacian", p_two), p_two, mesh=Mesh.uniform(UNIT, 6))


class TestGalerkinProbe:
    """Galerkin solves against the finest solve."""

    def test_consistent(self, p_two):
        problem = GalerkinProblem(
            domain=UNIT,
            exponent=p_two,
            kernel=build_kernel("laplacian", p_two),
            rhs=DensityLoad(density("constant", {"value": 2.0})),
            levels=4,
        )
        spec = SequenceSpec.galerkin(problem)
        report = run_probe(spec, problem.kernel, p_two, rule=RULE)
        assert report.kind is SequenceKind.GALERKIN
        assert [row.index for row in report.rows] == [0, 1, 2, 3, 4]
        assert report.rows[-1].gradient_error == 0.0
        assert report.hypothesis_met
        assert report.strong_convergence_observed
        assert report.verdict is ProbeVerdict.CONSISTENT

    def test_needs_problem(self, p_two):
        spec = SequenceSpec(kind=SequenceKind.GALERKIN)
        with pytest.raises(ValueError, match="problem"):
            spec.default_mesh(p_two)


class TestCustomProbe:
    """Explicit sequences and degenerate kernels."""

    def test_degenerate_kernel_is_inconsistent(self, p_two, fine_mesh):
        members = [oscillation_member(n, fine_mesh) for n in (4, 8, 16)]
        report = run_probe(SequenceSpec.custom(members), build_kernel("zero", p_two), p_two, rule=RULE)
        assert report.hypothesis_met
        assert not report.strong_convergence_observed
        assert report.verdict is ProbeVerdict.INCONSISTENT

    def test_constant_sequence_is_consistent(self, p_two):
        mesh = Mesh.uniform(UNIT, 4)
        u = interpolate(lambda z: np.sin(np.pi * z), mesh, BoundaryTag.DIRICHLET_ZERO)
        report = run_probe(
            SequenceSpec.custom([u, u, u], limit=u), build_kernel("laplacian", p_two), p_two, rule=RULE
        )
        assert report.verdict is ProbeVerdict.CONSISTENT

    def test_empty_custom_sequence(self):
        with pytest.raises(ValueError):
            SequenceSpec.custom([])

    def test_default_mesh_is_finest_member(self, p_two):
        coarse = MeshedFunction.zeros(Mesh.uniform(UNIT, 2))
        fine = MeshedFunction.zeros(Mesh.uniform(UNIT, 5))
        assert SequenceSpec.custom([coarse, fine]).default_mesh(p_two).level == 5


# =============================================================================
# Uniform Integrability Tests
# =============================================================================


class TestUniformIntegrability:
    """Windowed |∇u_n|^p integrals."""

    def test_oscillations_profile_shrinks(self, p_two, fine_mesh):
        members = [oscillation_member(n, fine_mesh) for n in (4, 8, 16)]
        profile = uniform_integrability_profile(members, p_two, fine_mesh, (0.5, 0.25, 0.125), RULE)
        assert profile.is_decreasing
        # ∫_E cos² over a window of width δ is about δ/2
        assert profile.suprema[0] == pytest.approx(0.25, abs=0.05)
        assert profile.to_rows()[2]["window"] == 0.125

    def test_constant_gradient(self, p_two):
        mesh = Mesh.uniform(UNIT, 4)
        linear = interpolate(lambda z: 2.0 * z, mesh)
        profile = uniform_integrability_profile([linear], p_two, mesh, (0.5, 0.1), RULE)
        np.testing.assert_allclose(profile.suprema, [2.0, 0.4], rtol=1e-10)

    @pytest.mark.parametrize("width", [0.0, 1.0, 1.5])
    def test_window_bounds(self, p_two, fine_mesh, width):
        with pytest.raises(ValueError, match="window"):
            uniform_integrability_profile(
                [oscillation_member(4, fine_mesh)], p_two, fine_mesh, (width,), RULE
            )
