"""Tests for the damped Newton level solve and the convergence study."""

import math

import numpy as np
import pytest

from varexp_splus.closed_forms import density, function
from varexp_splus.errors import SingularJacobianError
from varexp_splus.exponent_field import Domain, ExponentField
from varexp_splus.fem_mesh import AnalyticFunction, BoundaryTag, Mesh, MeshedFunction, QuadratureRule
from varexp_splus.galerkin import (
    CONVERGENCE_FIELDS,
    WEAK_FUNCTIONAL_NAMES,
    GalerkinProblem,
    SolverSettings,
    convergence_study,
    solve_hierarchy,
    solve_level,
    weak_surrogate,
)
from varexp_splus.operator_kernel import DensityLoad, PointLoad, assemble_residual, build_kernel

UNIT = Domain()
RULE = QuadratureRule.gauss_legendre(5)

# =============================================================================
# Fixtures
# =============================================================================


@pytest.fixture
def p_two():
    return ExponentField.constant(UNIT, 2.0)


def make_problem(p, kernel="laplacian", load=None, levels=6, **kwargs):
    rhs = load if load is not None else DensityLoad(density("constant", {"value": 2.0}), name="constant")
    return GalerkinProblem(
        domain=UNIT,
        exponent=p,
        kernel=build_kernel(kernel, p),
        rhs=rhs,
        levels=levels,
        **kwargs,
    )


@pytest.fixture
def laplace_problem(p_two):
    """-u'' = 2 with exact solution z(1 - z)."""
    return make_problem(p_two, exact=function("parabola"))


# =============================================================================
# Problem Validation Tests
# =============================================================================


class TestGalerkinProblem:
    """Construction-time checks."""

    def test_pairing_tolerance_must_be_positive(self, p_two):
        with pytest.raises(ValueError, match="pairing tolerance"):
            make_problem(p_two, pairing_tolerance=0.0)

    def test_needs_two_levels(self, p_two):
        with pytest.raises(ValueError, match="at least 2"):
            make_problem(p_two, levels=1)

    def test_reference_level_not_coarser(self, p_two):
        with pytest.raises(ValueError, match="reference level"):
            make_problem(p_two, levels=4, reference_level=3)

    def test_exact_needs_derivative(self, p_two):
        with pytest.raises(ValueError, match="derivative"):
            make_problem(p_two, exact=AnalyticFunction(lambda z: z * (1 - z)))

    def test_evaluation_level(self, p_two, laplace_problem):
        assert laplace_problem.evaluation_level == 6
        assert make_problem(p_two, levels=3).evaluation_level == 3
        assert make_problem(p_two, levels=3, reference_level=5).evaluation_level == 5


# =============================================================================
# Level Solve Tests
# =============================================================================


class TestSolveLevel:
    """Damped Newton on one mesh."""

    @pytest.mark.parametrize("level", [1, 2, 3, 4, 5, 6])
    def test_linear_problem_is_nodally_exact(self, laplace_problem, level):
        mesh = Mesh.uniform(UNIT, level)
        u, stats = solve_level(laplace_problem, mesh)
        nodes = mesh.nodes
        np.testing.assert_allclose(u.coefficients, nodes * (1.0 - nodes), atol=1e-10)
        assert stats.iterations == 1
        assert stats.converged
        assert not stats.predictor_used

    def test_zero_load_needs_no_iterations(self, p_two):
        problem = make_problem(p_two, load=DensityLoad(density("zero")))
        u, stats = solve_level(problem, Mesh.uniform(UNIT, 4))
        assert stats.iterations == 0
        assert u.is_zero

    def test_coarsest_level_has_no_unknowns(self, laplace_problem):
        u, stats = solve_level(laplace_problem, Mesh.uniform(UNIT, 0))
        assert stats.iterations == 0
        assert u.is_zero

    def test_point_load_gives_green_function(self, p_two):
        problem = make_problem(p_two, load=PointLoad(0.25))
        mesh = Mesh.uniform(UNIT, 4)
        u, _ = solve_level(problem, mesh)
        z = mesh.nodes
        green = np.where(z <= 0.25, 0.75 * z, 0.25 * (1.0 - z))
        np.testing.assert_allclose(u.coefficients, green, atol=1e-10)

    def test_warm_start_from_coarser_solution(self, laplace_problem):
        coarse, _ = solve_level(laplace_problem, Mesh.uniform(UNIT, 2))
        u, stats = solve_level(laplace_problem, Mesh.uniform(UNIT, 3), initial=coarse)
        assert stats.iterations <= 1
        assert u.mesh.level == 3

    def test_initial_guess_must_satisfy_boundary(self, laplace_problem):
        mesh = Mesh.uniform(UNIT, 2)
        with pytest.raises(ValueError, match="Dirichlet"):
            solve_level(laplace_problem, mesh, initial=MeshedFunction(mesh, np.ones(5)))

    def test_nonlinear_problem_converges(self):
        p = ExponentField.constant(UNIT, 3.0)
        problem = make_problem(
            p,
            kernel="p-laplacian",
            load=DensityLoad(density("manufactured-parabola", {"exponent": 3.0})),
            levels=5,
        )
        u, stats = solve_hierarchy(problem)[-1]
        assert stats.converged
        nodes = u.mesh.nodes
        assert np.max(np.abs(u.coefficients - nodes * (1.0 - nodes))) < 1e-2

    def test_linear_predictor_at_degenerate_flat_guess(self):
        p = ExponentField.constant(UNIT, 6.0)
        problem = make_problem(
            p,
            kernel="p-laplacian",
            load=DensityLoad(density("manufactured-parabola", {"exponent": 6.0})),
            levels=3,
        )
        u, stats = solve_level(problem, Mesh.uniform(UNIT, 3))
        assert stats.predictor_used
        assert stats.converged
        assert not u.is_zero

    def test_flat_patch_in_guess_converges_without_predictor(self):
        # the middle elements have zero slope, so their Jacobian rows vanish
        p = ExponentField.constant(UNIT, 6.0)
        problem = make_problem(
            p,
            kernel="p-laplacian",
            load=DensityLoad(density("manufactured-parabola", {"exponent": 6.0})),
            levels=3,
        )
        mesh = Mesh.uniform(UNIT, 3)
        guess = MeshedFunction(
            mesh,
            np.array([0.0, 0.125, 0.25, 0.25, 0.25, 0.25, 0.25, 0.125, 0.0]),
            BoundaryTag.DIRICHLET_ZERO,
        )
        u, stats = solve_level(problem, mesh, initial=guess)
        assert stats.converged
        assert not stats.predictor_used
        load = problem.rhs.load_vector(mesh, problem.rule)
        residual = assemble_residual(u, problem.kernel, problem.rhs, problem.rule)
        assert np.max(np.abs(residual)) <= problem.solver.tolerance * (1.0 + np.max(np.abs(load)))

    def test_returned_solutions_satisfy_the_discrete_equations(self):
        p = ExponentField.affine(UNIT, 2.0, 1.0)
        problem = make_problem(
            p,
            kernel="perturbed-p(z)-laplacian",
            load=DensityLoad(density("constant", {"value": 1.0})),
            levels=4,
        )
        for u, _ in solve_hierarchy(problem)[1:]:
            load = problem.rhs.load_vector(u.mesh, problem.rule)
            residual = assemble_residual(u, problem.kernel, problem.rhs, problem.rule)
            bound = problem.solver.tolerance * (1.0 + np.max(np.abs(load)))
            assert np.max(np.abs(residual)) <= bound

    def test_singular_kernel_raises(self, p_two):
        problem = make_problem(p_two, kernel="zero", levels=2)
        with pytest.raises(SingularJacobianError) as info:
            solve_level(problem, Mesh.uniform(UNIT, 2))
        assert info.value.level == 2


class TestSolveHierarchy:
    def test_levels_in_order(self, laplace_problem):
        results = solve_hierarchy(laplace_problem, finest=3)
        assert [u.mesh.level for u, _ in results] == [0, 1, 2, 3]


# =============================================================================
# Weak Surrogate Tests
# =============================================================================


class TestWeakSurrogate:
    """The eight fixed test functionals."""

    def test_zero_difference(self):
        values = weak_surrogate(MeshedFunction.zeros(Mesh.uniform(UNIT, 3)), RULE)
        assert values.shape == (len(WEAK_FUNCTIONAL_NAMES),)
        assert np.all(values == 0.0)

    def test_constant_difference(self):
        one = MeshedFunction(Mesh.uniform(UNIT, 3), np.ones(9))
        values = weak_surrogate(one, RULE)
        assert values[0] == pytest.approx(1.0)
        assert values[1] == pytest.approx(0.5)
        assert values[6] == pytest.approx(0.0, abs=1e-12)

    def test_oscillation_decays(self):
        mesh = Mesh.uniform(UNIT, 8)
        slow = MeshedFunction(mesh, np.sin(4 * np.pi * mesh.nodes))
        fast = MeshedFunction(mesh, np.sin(32 * np.pi * mesh.nodes))
        assert weak_surrogate(fast, RULE).max() < weak_surrogate(slow, RULE).max()


# =============================================================================
# Convergence Study Tests
# =============================================================================


class TestConvergenceStudy:
    """Per-level errors against exact and self-referencing limits."""

    def test_laplacian_against_exact_solution(self, laplace_problem):
        report = convergence_study(laplace_problem)
        assert len(report.records) == 7
        assert report.reference_kind == "exact"
        assert report.strong_error_decreasing
        assert report.pairing_vanishing
        assert report.passed
        assert report.records[-1].rate == pytest.approx(1.0, abs=0.1)
        assert report.records[0].rate is None

    def test_rows_follow_field_order(self, laplace_problem):
        rows = convergence_study(laplace_problem).to_rows()
        assert tuple(rows[0]) == CONVERGENCE_FIELDS
        assert rows[0]["rate"] == ""

    def test_first_level_error(self, laplace_problem):
        # u_0 = 0, so the error is the exact solution itself
        report = convergence_study(laplace_problem)
        expected = math.sqrt(1.0 / 30.0 + 1.0 / 3.0)
        assert report.records[0].sobolev_error == pytest.approx(expected, rel=1e-8)
        assert report.records[0].pairing == 0.0

    def test_self_reference(self, p_two):
        problem = make_problem(p_two, levels=3, reference_level=5)
        report = convergence_study(problem)
        assert report.reference_kind == "level-5"
        assert len(report.records) == 4
        assert len(report.solutions) == 4
        assert report.strong_error_decreasing

    def test_variable_exponent_kernel(self):
        p = ExponentField.affine(UNIT, 2.0, 1.0)
        problem = make_problem(p, kernel="perturbed-p(z)-laplacian", levels=4, reference_level=6)
        report = convergence_study(problem)
        assert report.strong_error_decreasing
        summary = report.summary()
        assert summary["kernel"] == "perturbed-p(z)-laplacian"
        assert summary["evaluation_level"] == 6
        assert summary["weak_surrogate_functionals"] == list(WEAK_FUNCTIONAL_NAMES)

    def test_manufactured_four_laplacian(self):
        # u = z(1 - z) solves -(|u'|^2 u')' = 6(1 - 2z)^2
        p = ExponentField.constant(UNIT, 4.0)
        problem = make_problem(
            p,
            kernel="p-laplacian",
            load=DensityLoad(density("manufactured-parabola", {"exponent": 4.0})),
            exact=function("parabola"),
        )
        report = convergence_study(problem)
        errors = report.sobolev_errors
        assert all(fine < coarse for coarse, fine in zip(errors, errors[1:]))
        for coarse, fine in zip(errors[1:], errors[2:]):
            assert coarse / fine >= 1.5
        assert abs(report.pairings[-1]) <= 1e-4
        surrogates = [record.weak_surrogate for record in report.records]
        assert surrogates[-1] < surrogates[0] / 10
        assert surrogates[-1] < surrogates[2]

    def test_variable_exponent_against_finer_solve(self):
        p = ExponentField.affine(UNIT, 2.0, 1.0)
        problem = make_problem(
            p,
            kernel="perturbed-p(z)-laplacian",
            load=DensityLoad(density("constant", {"value": 1.0})),
            levels=5,
            reference_level=7,
        )
        report = convergence_study(problem)
        errors = report.sobolev_errors
        assert all(fine < coarse for coarse, fine in zip(errors, errors[1:]))
        assert report.reference_kind == "level-7"
        magnitudes = [abs(value) for value in report.pairings[1:]]
        assert magnitudes[-1] < magnitudes[0] / 100
        # level 5 against level 7 measures about 1.9e-5, above the 1e-5 default
        assert magnitudes[-1] <= 2.5e-5
        assert not report.pairing_vanishing

    def test_pairing_verdict_uses_absolute_tolerance(self):
        p = ExponentField.affine(UNIT, 2.0, 1.0)
        kwargs = {
            "kernel": "perturbed-p(z)-laplacian",
            "load": DensityLoad(density("constant", {"value": 1.0})),
            "levels": 3,
            "reference_level": 5,
        }
        loose = convergence_study(make_problem(p, pairing_tolerance=1.0, **kwargs))
        strict = convergence_study(make_problem(p, pairing_tolerance=1e-12, **kwargs))
        assert loose.pairings == strict.pairings
        assert abs(loose.pairings[-1]) > 1e-12
        assert loose.pairing_vanishing
        assert not strict.pairing_vanishing
        assert strict.summary()["pairing_tolerance"] == 1e-12

    def test_custom_solver_settings(self, p_two):
        problem = make_problem(p_two, levels=2, solver=SolverSettings(tolerance=1e-6))
        assert convergence_study(problem).records[-1].residual_norm <= 1e-6 * (1 + 2.0)
