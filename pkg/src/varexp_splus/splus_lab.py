"""Numerical probes of the S+ property.

A sequence u_n with limit candidate u is evaluated on one mesh:

- the pairing ⟨A(u_n), u_n - u⟩ and its split into θ¹ (gradient varies,
  lower-order argument frozen at u_n), θ² (gradient frozen at ∇u) and the
  cross term ⟨A(u), u_n - u⟩,
- Luxemburg errors of u_n - u and of its gradient,
- the eight-functional weak-convergence surrogate,
- the per-element max of |ξ_n| = |θ¹ + θ²| and its running max over n.

The verdict says whether the finite window is consistent with S+: a
vanishing pairing must come with strong convergence.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Union

import numpy as np
from numpy.typing import NDArray

from .errors import AliasingError, MeshMismatchError
from .exponent_field import ExponentField
from .fem_mesh import (
    AnalyticFunction,
    BoundaryTag,
    GradientField,
    Mesh,
    MeshedFunction,
    QuadratureRule,
    SobolevSample,
    interpolate,
    prolong,
)
from .galerkin import GalerkinProblem, solve_hierarchy, weak_surrogate
from .modular_space import luxemburg_norm
from .operator_kernel import CaratheodoryKernel

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
Limit = Union[MeshedFunction, AnalyticFunction]

LIMSUP_TOLERANCE = 1e-6
STRONG_TOLERANCE = 1e-9  # 10x the default solver tolerance
ALIASING_RATIO = 4
DEFAULT_OSCILLATION_LEVEL = 8
DEFAULT_FREQUENCIES = (4, 8, 16, 32)


class SequenceKind(str, Enum):
    GALERKIN = "galerkin"
    OSCILLATION = "oscillation"
    CUSTOM = "custom"


class ProbeVerdict(str, Enum):
    """Outcome of one probe window."""

    CONSISTENT = "consistent"  # hypothesis met and strong convergence seen, or vacuous
    HYPOTHESIS_VIOLATED = "hypothesis-violated"  # limsup pairing > tolerance
    INCONSISTENT = "inconsistent"  # hypothesis met without strong convergence


@dataclass(frozen=True, eq=False)
class SequenceSpec:
    """Which sequence to probe and against which limit.

    Attributes:
        kind: galerkin, oscillation or custom
        frequencies: Oscillation schedule n for sin(nπz)/(nπ)
        members: Explicit members of a custom sequence
        limit: Limit candidate for custom sequences (default: zero)
        problem: Problem whose Galerkin solves form the sequence
    """

    kind: SequenceKind
    frequencies: tuple[int, ...] = DEFAULT_FREQUENCIES
    members: tuple[MeshedFunction, ...] = ()
    limit: Limit | None = None
    problem: GalerkinProblem | None = None

    @classmethod
    def oscillation(cls, frequencies: Sequence[int] = DEFAULT_FREQUENCIES) -> SequenceSpec:
        return cls(kind=SequenceKind.OSCILLATION, frequencies=tuple(int(n) for n in frequencies))

    @classmethod
    def galerkin(cls, problem: GalerkinProblem) -> SequenceSpec:
        return cls(kind=SequenceKind.GALERKIN, problem=problem)

    @classmethod
    def custom(cls, members: Sequence[MeshedFunction], limit: Limit | None = None) -> SequenceSpec:
        if not members:
            raise ValueError("a custom sequence needs at least one member")
        return cls(kind=SequenceKind.CUSTOM, members=tuple(members), limit=limit)

    def default_mesh(self, p: ExponentField) -> Mesh:
        if self.kind is SequenceKind.GALERKIN:
            if self.problem is None:
                raise ValueError("a galerkin sequence needs a problem")
            return self.problem.mesh(self.problem.evaluation_level)
        if self.kind is SequenceKind.CUSTOM:
            return max((m.mesh for m in self.members), key=lambda mesh: mesh.n_nodes)
        return Mesh.uniform(p.domain, DEFAULT_OSCILLATION_LEVEL)


def oscillation_member(frequency: int, mesh: Mesh) -> MeshedFunction:
    """Interpolant of sin(nπt)/(nπ), t the rescaled coordinate.

    Raises:
        AliasingError: If n exceeds elements/4
    """
    if frequency < 1:
        raise ValueError(f"oscillation frequency must be >= 1, got {frequency}")
    if frequency * ALIASING_RATIO > mesh.n_elements:
        raise AliasingError(
            f"frequency {frequency} needs at least {frequency * ALIASING_RATIO} elements, "
            f"mesh has {mesh.n_elements}"
        )
    domain = mesh.domain
    scale = frequency * np.pi

    def member(z: FloatArray) -> FloatArray:
        t = (z - domain.left) / domain.measure
        return np.sin(scale * t) / scale

    return interpolate(member, mesh, BoundaryTag.DIRICHLET_ZERO)


def _materialize(
    spec: SequenceSpec, mesh: Mesh
) -> tuple[list[int], list[MeshedFunction], Limit]:
    """Indices, members and limit of the sequence."""
    if spec.kind is SequenceKind.OSCILLATION:
        members = [oscillation_member(n, mesh) for n in spec.frequencies]
        return list(spec.frequencies), members, MeshedFunction.zeros(mesh)

    if spec.kind is SequenceKind.GALERKIN:
        if spec.problem is None:
            raise ValueError("a galerkin sequence needs a problem")
        problem = spec.problem
        solved = solve_hierarchy(problem, problem.evaluation_level)
        solutions = [u for u, _ in solved]
        return list(range(problem.levels + 1)), solutions[: problem.levels + 1], solutions[-1]

    limit = spec.limit if spec.limit is not None else MeshedFunction.zeros(mesh)
    return list(range(len(spec.members))), list(spec.members), limit


def _limit_sample(limit: Limit, mesh: Mesh, rule: QuadratureRule) -> SobolevSample:
    if isinstance(limit, AnalyticFunction):
        return limit.sobolev_sample(mesh, rule)
    return prolong(limit, mesh).sobolev_sample(rule)


# =============================================================================
# θ decomposition
# =============================================================================


@dataclass(frozen=True)
class ThetaDecomposition:
    """Split of ⟨A(u_n), u_n - u⟩ on one mesh.

    Attributes:
        theta_one: ∫ (a(z, u_n, ∇u_n) - a(z, u_n, ∇u)) (∇u_n - ∇u)
        theta_two: ∫ (a(z, u_n, ∇u) - a(z, u, ∇u)) (∇u_n - ∇u)
        cross_term: ⟨A(u), u_n - u⟩
        theta_one_elements: Per-element integrals of θ¹
        theta_two_elements: Per-element integrals of θ²
        xi_elements: Per-element max over quadrature points of |θ¹ + θ²|
    """

    theta_one: float
    theta_two: float
    cross_term: float
    theta_one_elements: FloatArray = field(repr=False)
    theta_two_elements: FloatArray = field(repr=False)
    xi_elements: FloatArray = field(repr=False)

    @property
    def pairing(self) -> float:
        """⟨A(u_n), u_n - u⟩ reconstructed from the split."""
        return self.theta_one + self.theta_two + self.cross_term

    @property
    def monotone_part(self) -> float:
        """⟨A(u_n) - A(u), u_n - u⟩."""
        return self.theta_one + self.theta_two


def theta_decomposition(
    u_n: MeshedFunction,
    u: Limit | SobolevSample,
    kernel: CaratheodoryKernel,
    rule: QuadratureRule | None = None,
) -> ThetaDecomposition:
    """Element-wise quadrature of θ¹, θ² and the cross term.

    ``u`` may be a P1 function (aligned with u_n by prolongation), a
    closed-form function, or a sample on u_n's mesh.
    """
    rule = rule or QuadratureRule.gauss_legendre()
    if isinstance(u, MeshedFunction):
        mesh = u.mesh if u.mesh.n_nodes > u_n.mesh.n_nodes else u_n.mesh
        target = _limit_sample(u, mesh, rule)
    elif isinstance(u, AnalyticFunction):
        target = u.sobolev_sample(u_n.mesh, rule)
    else:
        target = u
    mesh = target.mesh
    if not mesh.same_as(u_n.mesh):
        if not mesh.is_refinement_of(u_n.mesh):
            raise MeshMismatchError("limit sample does not live on a refinement of u_n's mesh")
        u_n = prolong(u_n, mesh)

    member = u_n.sobolev_sample(rule)
    z = member.value.points
    s_n, g_n = member.value.values, member.gradient.values
    s, g = target.value.values, target.gradient.values
    weights = member.value.weights

    a_nn = kernel.flux(z, s_n, g_n)
    a_n_frozen = kernel.flux(z, s_n, g)
    a_limit = kernel.flux(z, s, g)
    delta = g_n - g

    theta_one = (a_nn - a_n_frozen) * delta
    theta_two = (a_n_frozen - a_limit) * delta
    one_elements = np.sum(weights * theta_one, axis=1)
    two_elements = np.sum(weights * theta_two, axis=1)
    return ThetaDecomposition(
        theta_one=float(one_elements.sum()),
        theta_two=float(two_elements.sum()),
        cross_term=float(np.sum(weights * a_limit * delta)),
        theta_one_elements=one_elements,
        theta_two_elements=two_elements,
        xi_elements=np.max(np.abs(theta_one + theta_two), axis=1),
    )


# =============================================================================
# Probe
# =============================================================================


@dataclass(frozen=True)
class ProbeRow:
    index: int
    pairing: float
    theta_one: float
    theta_two: float
    cross_term: float
    lebesgue_error: float
    gradient_error: float
    weak_surrogate: float
    xi_shadow: float

    def as_row(self) -> dict[str, Any]:
        return asdict(self)


PROBE_FIELDS = (
    "index",
    "pairing",
    "theta_one",
    "theta_two",
    "cross_term",
    "lebesgue_error",
    "gradient_error",
    "weak_surrogate",
    "xi_shadow",
)


@dataclass
class SPlusProbeReport:
    """Rows of a probe window and the verdict drawn from them."""

    kind: SequenceKind
    kernel: str
    rows: list[ProbeRow]
    dominating_shadow: FloatArray = field(repr=False)
    members: list[MeshedFunction] = field(default_factory=list, repr=False)
    limsup_tolerance: float = LIMSUP_TOLERANCE
    strong_tolerance: float = STRONG_TOLERANCE

    @property
    def limsup_pairing(self) -> float:
        """Max pairing over the last half of the window."""
        tail = self.rows[len(self.rows) // 2 :]
        return max(row.pairing for row in tail)

    @property
    def hypothesis_met(self) -> bool:
        return self.limsup_pairing <= self.limsup_tolerance

    @property
    def strong_convergence_observed(self) -> bool:
        errors = [row.gradient_error for row in self.rows]
        steps_ok = all(
            later < earlier or later <= self.strong_tolerance
            for earlier, later in zip(errors, errors[1:], strict=False)
        )
        return steps_ok and errors[-1] <= self.strong_tolerance

    @property
    def verdict(self) -> ProbeVerdict:
        if not self.hypothesis_met:
            return ProbeVerdict.HYPOTHESIS_VIOLATED
        if self.strong_convergence_observed:
            return ProbeVerdict.CONSISTENT
        return ProbeVerdict.INCONSISTENT

    def to_rows(self) -> list[dict[str, Any]]:
        return [row.as_row() for row in self.rows]

    def summary(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "kernel": self.kernel,
            "members": len(self.rows),
            "limsup_pairing": self.limsup_pairing,
            "hypothesis_met": self.hypothesis_met,
            "strong_convergence_observed": self.strong_convergence_observed,
            "verdict": self.verdict.value,
            "dominating_shadow_max": float(np.max(self.dominating_shadow, initial=0.0)),
        }


def run_probe(
    spec: SequenceSpec,
    kernel: CaratheodoryKernel,
    p: ExponentField,
    mesh: Mesh | None = None,
    rule: QuadratureRule | None = None,
    strong_tolerance: float = STRONG_TOLERANCE,
) -> SPlusProbeReport:
    """Evaluate every member of the sequence against its limit on ``mesh``.

    Galerkin sequences use the finest solve as their limit, so the final
    row measures zero error by construction.

    Raises:
        AliasingError: When an oscillation frequency is too high for ``mesh``
    """
    rule = rule or QuadratureRule.gauss_legendre()
    mesh = mesh or spec.default_mesh(p)
    indices, members, limit = _materialize(spec, mesh)
    target = _limit_sample(limit, mesh, rule)

    rows: list[ProbeRow] = []
    shadow = np.zeros(mesh.n_elements)
    for index, member in zip(indices, members, strict=True):
        fine = prolong(member, mesh)
        split = theta_decomposition(fine, target, kernel, rule)
        difference = fine.sobolev_sample(rule) - target
        shadow = np.maximum(shadow, split.xi_elements)
        rows.append(
            ProbeRow(
                index=index,
                pairing=split.pairing,
                theta_one=split.theta_one,
                theta_two=split.theta_two,
                cross_term=split.cross_term,
                lebesgue_error=luxemburg_norm(difference.value, p, rule).value,
                gradient_error=luxemburg_norm(difference.gradient, p, rule).value,
                weak_surrogate=float(np.max(weak_surrogate(difference.value, rule))),
                xi_shadow=float(split.xi_elements.max()),
            )
        )

    report = SPlusProbeReport(
        kind=spec.kind,
        kernel=kernel.label,
        rows=rows,
        dominating_shadow=shadow,
        members=members,
        strong_tolerance=strong_tolerance,
    )
    logger.info(
        f"S+ probe ({spec.kind.value}, {kernel.label}): limsup pairing "
        f"{report.limsup_pairing:.3e}, verdict {report.verdict.value}"
    )
    if report.verdict is ProbeVerdict.INCONSISTENT:
        logger.warning("pairing vanishes without strong convergence")
    return report


# =============================================================================
# Uniform integrability
# =============================================================================


@dataclass(frozen=True)
class IntegrabilityProfile:
    """sup over members and windows E with |E| = δ of ∫_E |∇u_n|^{p(z)} dz."""

    windows: tuple[float, ...]
    suprema: tuple[float, ...]

    @property
    def is_decreasing(self) -> bool:
        """Non-increasing as δ shrinks."""
        ordered = sorted(zip(self.windows, self.suprema, strict=True))
        return all(a[1] <= b[1] for a, b in zip(ordered, ordered[1:], strict=False))

    def to_rows(self) -> list[dict[str, float]]:
        return [
            {"window": w, "supremum": s} for w, s in zip(self.windows, self.suprema, strict=True)
        ]


class _WindowIntegrator:
    """Exact-in-element cumulative integral F(x) = ∫_a^x |g|^{p(z)} dz."""

    def __init__(self, mesh: Mesh, gradient: FloatArray, p: ExponentField, rule: QuadratureRule):
        self.mesh = mesh
        self.magnitude = np.abs(gradient)
        self.p = p
        self.rule = rule
        points, weights = rule.on(mesh)
        full = np.sum(weights * self.magnitude[:, None] ** p(points), axis=1)
        self.prefix = np.concatenate([[0.0], np.cumsum(full)])

    def __call__(self, x: FloatArray) -> FloatArray:
        element = self.mesh.locate(x)
        points, weights = self.rule.map_to(self.mesh.nodes[element], x)
        partial = np.sum(weights * self.magnitude[element][:, None] ** self.p(points), axis=1)
        return self.prefix[element] + partial


def _window_starts(mesh: Mesh, width: float) -> FloatArray:
    left, right = mesh.domain.left, mesh.domain.right - width
    candidates = np.concatenate(
        [mesh.nodes, mesh.nodes - width, np.linspace(left, right, 8 * mesh.n_elements + 1)]
    )
    return np.unique(np.clip(candidates, left, right))


def uniform_integrability_profile(
    sequence: Sequence[MeshedFunction | GradientField],
    p: ExponentField,
    mesh: Mesh,
    windows: Sequence[float],
    rule: QuadratureRule | None = None,
) -> IntegrabilityProfile:
    """Windowed |∇u_n|^{p} integrals; a profile falling to 0 with δ signals uniform integrability.

    Windows slide over node-aligned and evenly spaced start points.
    """
    rule = rule or QuadratureRule.gauss_legendre()
    measure = mesh.domain.measure
    for width in windows:
        if not 0.0 < width < measure:
            raise ValueError(f"window {width} must lie in (0, {measure})")

    gradients: list[FloatArray] = []
    for member in sequence:
        if isinstance(member, MeshedFunction):
            gradients.append(prolong(member, mesh).gradient().values)
        elif member.mesh.same_as(mesh):
            gradients.append(np.asarray(member.values))
        else:
            raise MeshMismatchError("gradient field does not live on the profile mesh")

    integrators = [_WindowIntegrator(mesh, g, p, rule) for g in gradients]
    suprema = []
    for width in windows:
        starts = _window_starts(mesh, width)
        ends = np.minimum(starts + width, mesh.domain.right)
        best = 0.0
        for integrate in integrators:
            best = max(best, float(np.max(integrate(ends) - integrate(starts))))
        suprema.append(best)
    return IntegrabilityProfile(windows=tuple(float(w) for w in windows), suprema=tuple(suprema))
