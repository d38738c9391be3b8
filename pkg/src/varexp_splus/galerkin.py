"""Galerkin solves of A(u) = f on nested P1 spaces with zero Dirichlet data.

Each level is solved by damped Newton on the assembled residual with a
finite-difference tridiagonal Jacobian. Levels are solved coarse to fine,
each warm-started from the prolonged coarser solution. The convergence
study compares every level against an exact solution when one is
supplied, otherwise against a finer reference solve.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterator
from dataclasses import dataclass, field, replace
from typing import Any, Union

import numpy as np
from numpy.typing import NDArray

from .errors import KernelRegistrationError, NonConvergenceError, SingularJacobianError
from .exponent_field import Domain, ExponentField
from .fem_mesh import (
    AnalyticFunction,
    BoundaryTag,
    Mesh,
    MeshedFunction,
    QuadratureRule,
    SampledField,
    SobolevSample,
    prolong,
)
from .modular_space import l2_pairing, luxemburg_norm, modular, sobolev_norm
from .operator_kernel import (
    PIVOT_THRESHOLD,
    CaratheodoryKernel,
    RightHandSide,
    TridiagonalMatrix,
    assemble_jacobian_fd,
    assemble_residual,
    build_kernel,
    pairing,
    stiffness_matrix,
    validate_kernel,
)

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
Reference = Union[MeshedFunction, AnalyticFunction]

MIN_LEVELS = 2
DECREASE_FLOOR = 1e-12
PAIRING_TOLERANCE = 1e-5

# Stiffness shifts tried when the Newton step is singular or fails the line search
SHIFT_FLOOR = 1e-8
SHIFT_GROWTH = 100.0
SHIFT_ATTEMPTS = 6


@dataclass(frozen=True)
class SolverSettings:
    """Damped Newton settings.

    Attributes:
        tolerance: Relative residual tolerance; success when
            max|F| <= tolerance * (1 + max|load|)
        max_iterations: Newton iterations before NonConvergenceError
        max_halvings: Step halvings per iteration before accepting the trial
        fd_step: Finite-difference step (default 1e-7 (1 + max|c|))
    """

    tolerance: float = 1e-10
    max_iterations: int = 100
    max_halvings: int = 30
    fd_step: float | None = None


@dataclass(frozen=True)
class SolverStats:
    """Per-level Newton statistics."""

    iterations: int
    residual_norm: float
    halvings: int = 0
    predictor_used: bool = False
    converged: bool = True


@dataclass(frozen=True, eq=False)
class GalerkinProblem:
    """A(u) = f on W_0^{1,p(.)}(Ω) discretized on levels 0..L.

    Attributes:
        domain: Interval Ω
        exponent: p(.) with p_- > 1
        kernel: Registered and validated kernel built for ``exponent``
        rhs: Density or point load
        levels: Finest reported level L (>= 2)
        solver: Newton settings
        quadrature_nodes: Gauss-Legendre points per element
        exact: Closed-form solution with derivative, when known
        reference_level: Level of the self-referencing solve when no exact
            solution is supplied (default: ``levels``)
        pairing_tolerance: Bound on |<A(u_L), u_L - u>| for the vanishing verdict
    """

    domain: Domain
    exponent: ExponentField
    kernel: CaratheodoryKernel
    rhs: RightHandSide
    levels: int
    solver: SolverSettings = field(default_factory=SolverSettings)
    quadrature_nodes: int = 5
    exact: AnalyticFunction | None = None
    reference_level: int | None = None
    pairing_tolerance: float = PAIRING_TOLERANCE

    def __post_init__(self) -> None:
        if not self.pairing_tolerance > 0.0:
            raise ValueError(f"pairing tolerance must be positive, got {self.pairing_tolerance}")
        if self.levels < MIN_LEVELS:
            raise ValueError(f"a Galerkin study needs at least {MIN_LEVELS} levels, got {self.levels}")
        if self.reference_level is not None and self.reference_level < self.levels:
            raise ValueError("reference level must not be coarser than the finest reported level")
        if self.exponent.domain != self.domain:
            raise ValueError("exponent lives on another domain")
        if self.kernel.exponent.domain != self.domain:
            raise KernelRegistrationError(f"kernel '{self.kernel.label}' was built for another domain")
        if self.exact is not None and self.exact.derivative is None:
            raise ValueError("an exact solution needs its derivative for Sobolev errors")
        validate_kernel(self.kernel, self.exponent)

    @property
    def rule(self) -> QuadratureRule:
        return QuadratureRule.gauss_legendre(self.quadrature_nodes)

    @property
    def evaluation_level(self) -> int:
        if self.exact is not None:
            return self.levels
        return self.reference_level if self.reference_level is not None else self.levels

    def mesh(self, level: int) -> Mesh:
        return Mesh.uniform(self.domain, level)


# =============================================================================
# Level solve
# =============================================================================


def _max_norm(values: FloatArray) -> float:
    return float(np.max(np.abs(values), initial=0.0))


def _newton(
    problem: GalerkinProblem,
    kernel: CaratheodoryKernel,
    u: MeshedFunction,
    tolerance: float,
    level: int | None,
) -> tuple[MeshedFunction, SolverStats]:
    settings, rule = problem.solver, problem.rule
    free = u.free_indices
    residual = assemble_residual(u, kernel, problem.rhs, rule)
    norm = _max_norm(residual)
    total_halvings = 0

    for iteration in range(settings.max_iterations + 1):
        if norm <= tolerance:
            return u, SolverStats(iterations=iteration, residual_norm=norm, halvings=total_halvings)
        if iteration == settings.max_iterations:
            break

        jacobian = assemble_jacobian_fd(u, kernel, problem.rhs, rule, settings.fd_step)
        if jacobian.max_abs < PIVOT_THRESHOLD:
            raise SingularJacobianError(0, float(jacobian.max_abs), level)

        accepted = False
        step, trial, trial_residual, trial_norm = 0.0, u, residual, norm
        for shift, direction in _directions(u, jacobian, residual):
            step = 1.0
            for _ in range(settings.max_halvings + 1):
                coefficients = np.array(u.coefficients)
                coefficients[free] += step * direction
                trial = u.with_coefficients(coefficients)
                trial_residual = assemble_residual(trial, kernel, problem.rhs, rule)
                trial_norm = _max_norm(trial_residual)
                if trial_norm < norm or trial_norm <= tolerance:
                    accepted = True
                    break
                step *= 0.5
                total_halvings += 1
            if accepted:
                if shift > 0.0:
                    logger.debug(f"level {level} newton {iteration + 1}: stiffness shift {shift:.1e}")
                break
        if not accepted:
            logger.warning(
                f"damping exhausted at level {level}, iteration {iteration + 1}: "
                f"residual {norm:.3e} -> {trial_norm:.3e}"
            )

        u, residual, norm = trial, trial_residual, trial_norm
        logger.debug(f"level {level} newton {iteration + 1}: step {step:.3e} residual {norm:.3e}")

    raise NonConvergenceError(settings.max_iterations, norm, level)


def _directions(
    u: MeshedFunction, jacobian: TridiagonalMatrix, residual: FloatArray
) -> Iterator[tuple[float, FloatArray]]:
    """Newton direction, then directions of J + μK with growing stiffness shifts μ.

    K is the P1 Laplacian stiffness. A shifted direction is tried when J is
    singular or when the plain step fails the damped line search; degenerate
    kernels lose their Jacobian wherever the gradient vanishes.
    """
    try:
        yield 0.0, jacobian.solve(-residual)
    except SingularJacobianError:
        pass
    stiffness = stiffness_matrix(u)
    h = float(np.min(u.mesh.widths))
    shift = SHIFT_FLOOR * max(1.0, jacobian.max_abs * h)
    for _ in range(SHIFT_ATTEMPTS):
        try:
            yield shift, jacobian.shifted(stiffness, shift).solve(-residual)
        except SingularJacobianError:
            pass
        shift *= SHIFT_GROWTH


def solve_level(
    problem: GalerkinProblem,
    mesh: Mesh,
    initial: MeshedFunction | None = None,
) -> tuple[MeshedFunction, SolverStats]:
    """Damped Newton solve on one mesh.

    Args:
        problem: The problem to solve
        mesh: Level mesh (any uniform refinement of the domain)
        initial: Dirichlet initial guess on ``mesh`` (default: zero)

    Raises:
        NonConvergenceError: After ``max_iterations`` Newton steps
        SingularJacobianError: When the Jacobian is singular away from a
            zero-gradient guess
    """
    level = mesh.level
    if initial is None:
        initial = MeshedFunction.zeros(mesh)
    elif not initial.mesh.same_as(mesh):
        initial = prolong(initial, mesh)
    if initial.boundary is not BoundaryTag.DIRICHLET_ZERO:
        raise ValueError("initial guess must satisfy the zero Dirichlet condition")

    load = problem.rhs.load_vector(mesh, problem.rule)
    tolerance = problem.solver.tolerance * (1.0 + _max_norm(load))

    try:
        u, stats = _newton(problem, problem.kernel, initial, tolerance, level)
    except SingularJacobianError:
        if np.any(initial.gradient().values):
            raise
        # degenerate kernels have a singular Jacobian at ∇u = 0
        logger.info(f"level {level}: singular Jacobian at flat guess, using linear predictor")
        linear = build_kernel("laplacian", problem.exponent)
        predictor, _ = _newton(problem, linear, initial, tolerance, level)
        u, stats = _newton(problem, problem.kernel, predictor, tolerance, level)
        stats = SolverStats(
            iterations=stats.iterations,
            residual_norm=stats.residual_norm,
            halvings=stats.halvings,
            predictor_used=True,
        )
    logger.info(
        f"level {level} ({mesh.n_elements} elements): {stats.iterations} iterations, "
        f"residual {stats.residual_norm:.3e}"
    )
    return u, stats


def solve_hierarchy(
    problem: GalerkinProblem,
    finest: int | None = None,
) -> list[tuple[MeshedFunction, SolverStats]]:
    """Solve levels 0..finest, warm-starting each from its prolonged predecessor."""
    finest = problem.levels if finest is None else finest
    results: list[tuple[MeshedFunction, SolverStats]] = []
    previous: MeshedFunction | None = None
    for level in range(finest + 1):
        mesh = problem.mesh(level)
        initial = prolong(previous, mesh) if previous is not None else None
        u, stats = solve_level(problem, mesh, initial)
        results.append((u, stats))
        previous = u
    return results


# =============================================================================
# Weak-convergence surrogate
# =============================================================================


def _test_functionals(domain: Domain) -> tuple[AnalyticFunction, ...]:
    left, length = domain.left, domain.measure

    def scaled(g: Any) -> Any:
        return lambda z: g((np.asarray(z) - left) / length)

    shapes = (
        ("1", lambda t: np.ones_like(t)),
        ("z", lambda t: t),
        ("z^2", lambda t: t**2),
        ("z^3", lambda t: t**3),
        ("sin(pi z)", lambda t: np.sin(np.pi * t)),
        ("cos(pi z)", lambda t: np.cos(np.pi * t)),
        ("sin(2 pi z)", lambda t: np.sin(2 * np.pi * t)),
        ("cos(2 pi z)", lambda t: np.cos(2 * np.pi * t)),
    )
    return tuple(AnalyticFunction(scaled(g), name=name) for name, g in shapes)


WEAK_FUNCTIONAL_NAMES = ("1", "z", "z^2", "z^3", "sin(pi z)", "cos(pi z)", "sin(2 pi z)", "cos(2 pi z)")


def weak_surrogate(difference: SampledField | MeshedFunction, rule: QuadratureRule | None = None) -> FloatArray:
    """|⟨g_j, w⟩| in L² for the fixed family of eight smooth functionals g_j.

    A finite family can only suggest weak convergence, never establish it.
    """
    rule = rule or QuadratureRule.gauss_legendre()
    sample = difference if isinstance(difference, SampledField) else difference.sample(rule)
    functionals = _test_functionals(sample.mesh.domain)
    return np.array([abs(l2_pairing(g.sample(sample.mesh, rule), sample, rule)) for g in functionals])


# =============================================================================
# Convergence study
# =============================================================================


@dataclass(frozen=True)
class LevelRecord:
    """Errors of one Galerkin level against the reference."""

    level: int
    elements: int
    iterations: int
    residual_norm: float
    sobolev_error: float
    gradient_modular_error: float
    pairing: float
    lebesgue_error: float
    gradient_error: float
    weak_surrogate: float
    predictor_used: bool = False
    rate: float | None = None

    def as_row(self) -> dict[str, Any]:
        return {
            "level": self.level,
            "elements": self.elements,
            "iterations": self.iterations,
            "residual_norm": self.residual_norm,
            "sobolev_error": self.sobolev_error,
            "gradient_modular_error": self.gradient_modular_error,
            "pairing": self.pairing,
            "lebesgue_error": self.lebesgue_error,
            "gradient_error": self.gradient_error,
            "weak_surrogate": self.weak_surrogate,
            "rate": "" if self.rate is None else self.rate,
            "predictor_used": self.predictor_used,
        }


CONVERGENCE_FIELDS = (
    "level",
    "elements",
    "iterations",
    "residual_norm",
    "sobolev_error",
    "gradient_modular_error",
    "pairing",
    "lebesgue_error",
    "gradient_error",
    "weak_surrogate",
    "rate",
    "predictor_used",
)


@dataclass
class ConvergenceReport:
    """Per-level Galerkin errors plus the verdicts drawn from them."""

    problem: GalerkinProblem
    records: list[LevelRecord]
    solutions: list[MeshedFunction] = field(repr=False)
    reference: Reference = field(repr=False)
    reference_kind: str = "exact"

    @property
    def sobolev_errors(self) -> list[float]:
        return [r.sobolev_error for r in self.records]

    @property
    def pairings(self) -> list[float]:
        return [r.pairing for r in self.records]

    @property
    def strong_error_decreasing(self) -> bool:
        errors = self.sobolev_errors
        return all(
            later < earlier or later <= DECREASE_FLOOR
            for earlier, later in zip(errors, errors[1:], strict=False)
        )

    @property
    def pairing_vanishing(self) -> bool:
        return abs(self.pairings[-1]) <= self.problem.pairing_tolerance

    @property
    def passed(self) -> bool:
        return self.strong_error_decreasing and self.pairing_vanishing

    def to_rows(self) -> list[dict[str, Any]]:
        return [record.as_row() for record in self.records]

    def summary(self) -> dict[str, Any]:
        final = self.records[-1]
        return {
            "kernel": self.problem.kernel.label,
            "exponent": self.problem.exponent.describe(),
            "levels": self.problem.levels,
            "reference": self.reference_kind,
            "evaluation_level": self.problem.evaluation_level,
            "strong_error_decreasing": self.strong_error_decreasing,
            "pairing_vanishing": self.pairing_vanishing,
            "final_sobolev_error": final.sobolev_error,
            "final_pairing": final.pairing,
            "pairing_tolerance": self.problem.pairing_tolerance,
            "weak_surrogate_functionals": list(WEAK_FUNCTIONAL_NAMES),
        }


def _reference_sample(
    reference: Reference, mesh: Mesh, rule: QuadratureRule
) -> SobolevSample:
    if isinstance(reference, AnalyticFunction):
        return reference.sobolev_sample(mesh, rule)
    return prolong(reference, mesh).sobolev_sample(rule)


def convergence_study(problem: GalerkinProblem) -> ConvergenceReport:
    """Solve levels 0..L and measure each against the reference.

    Every level is prolonged onto the evaluation mesh, so all errors are
    computed on one quadrature. Verdicts are reported, not raised.
    """
    rule = problem.rule
    finest = problem.levels if problem.exact is not None else problem.evaluation_level
    solved = solve_hierarchy(problem, finest)

    reference: Reference
    if problem.exact is not None:
        reference, reference_kind = problem.exact, "exact"
    else:
        reference, reference_kind = solved[-1][0], f"level-{finest}"
    evaluation_mesh = problem.mesh(problem.evaluation_level)
    target = _reference_sample(reference, evaluation_mesh, rule)

    records: list[LevelRecord] = []
    for level in range(problem.levels + 1):
        u, stats = solved[level]
        fine = prolong(u, evaluation_mesh)
        difference = fine.sobolev_sample(rule) - target
        record = LevelRecord(
            level=level,
            elements=u.mesh.n_elements,
            iterations=stats.iterations,
            residual_norm=stats.residual_norm,
            sobolev_error=sobolev_norm(difference, problem.exponent, rule).value,
            gradient_modular_error=modular(difference.gradient, problem.exponent, rule).value,
            pairing=pairing(fine, difference, problem.kernel, rule),
            lebesgue_error=luxemburg_norm(difference.value, problem.exponent, rule).value,
            gradient_error=luxemburg_norm(difference.gradient, problem.exponent, rule).value,
            weak_surrogate=float(np.max(weak_surrogate(difference.value, rule))),
            predictor_used=stats.predictor_used,
        )
        if records:
            record = replace(record, rate=_rate(records[-1].sobolev_error, record.sobolev_error))
        records.append(record)

    report = ConvergenceReport(
        problem=problem,
        records=records,
        solutions=[u for u, _ in solved[: problem.levels + 1]],
        reference=reference,
        reference_kind=reference_kind,
    )
    if not report.strong_error_decreasing:
        logger.warning(f"strong error not monotone: {report.sobolev_errors}")
    if not report.pairing_vanishing:
        logger.warning(f"pairing does not vanish: final {report.pairings[-1]:.3e}")
    return report


def _rate(previous: float | None, current: float | None) -> float | None:
    """log2(e_{n-1} / e_n), undefined when either error vanishes."""
    if previous is None or current is None or previous <= 0.0 or current <= 0.0:
        return None
    return math.log2(previous / current)
