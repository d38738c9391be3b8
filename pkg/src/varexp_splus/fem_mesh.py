"""One-dimensional P1 finite elements.

Meshes are nested by midpoint bisection so that the P1 spaces
V_0 ⊂ V_1 ⊂ ... form the Galerkin hierarchy. Every quantity integrated
elsewhere in the package is first sampled at Gauss-Legendre points through
``SampledField``; piecewise-constant gradients come from ``GradientField``.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special

from .errors import MeshMismatchError
from .exponent_field import Domain

FloatArray = NDArray[np.float64]

# Nodes of a refined mesh must match parent nodes this closely
NODE_TOLERANCE = 1e-14
MIN_QUADRATURE_NODES = 2
MAX_QUADRATURE_NODES = 10
DEFAULT_QUADRATURE_NODES = 5


def _frozen(values: ArrayLike) -> FloatArray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


# =============================================================================
# Mesh
# =============================================================================


@dataclass(frozen=True, eq=False)
class Mesh:
    """A 1-D mesh of the closed domain.

    Attributes:
        domain: The interval being meshed
        nodes: Strictly increasing node coordinates, endpoints included
        level: Refinement depth (a uniform level-k mesh has 2^k elements)
    """

    domain: Domain
    nodes: FloatArray
    level: int = 0

    def __post_init__(self) -> None:
        nodes = _frozen(self.nodes)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 2:
            raise MeshMismatchError("a mesh needs at least two nodes")
        if np.any(np.diff(nodes) <= 0):
            raise MeshMismatchError("mesh nodes must be strictly increasing")
        if nodes[0] != self.domain.left or nodes[-1] != self.domain.right:
            raise MeshMismatchError("mesh nodes must start and end at the domain endpoints")

    @classmethod
    def uniform(cls, domain: Domain, level: int = 0) -> Mesh:
        """Uniform mesh with 2**level elements."""
        if level < 0:
            raise MeshMismatchError(f"mesh level must be >= 0, got {level}")
        nodes = np.linspace(domain.left, domain.right, 2**level + 1)
        # linspace may miss the right endpoint by an ulp
        nodes[-1] = domain.right
        return cls(domain=domain, nodes=nodes, level=level)

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.size)

    @property
    def n_elements(self) -> int:
        return int(self.nodes.size - 1)

    @property
    def widths(self) -> FloatArray:
        return np.diff(self.nodes)

    @property
    def midpoints(self) -> FloatArray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    def refine(self) -> Mesh:
        """Bisect every element; parent nodes stay, level grows by one."""
        refined = np.empty(2 * self.n_nodes - 1)
        refined[0::2] = self.nodes
        refined[1::2] = self.midpoints
        return Mesh(domain=self.domain, nodes=refined, level=self.level + 1)

    def refined(self, times: int) -> Mesh:
        mesh = self
        for _ in range(times):
            mesh = mesh.refine()
        return mesh

    def is_refinement_of(self, coarse: Mesh) -> bool:
        """True when every node of ``coarse`` is a node of this mesh."""
        if coarse is self:
            return True
        if coarse.domain != self.domain or coarse.n_nodes > self.n_nodes:
            return False
        index = np.clip(np.searchsorted(self.nodes, coarse.nodes), 0, self.n_nodes - 1)
        return bool(np.all(np.abs(self.nodes[index] - coarse.nodes) <= NODE_TOLERANCE))

    def same_as(self, other: Mesh) -> bool:
        return other is self or (
            other.n_nodes == self.n_nodes
            and other.domain == self.domain
            and bool(np.all(np.abs(other.nodes - self.nodes) <= NODE_TOLERANCE))
        )

    def locate(self, z: ArrayLike) -> NDArray[np.intp]:
        """Element index containing each point (right endpoint -> last element)."""
        index = np.searchsorted(self.nodes, np.asarray(z, dtype=float), side="right") - 1
        return np.clip(index, 0, self.n_elements - 1)


# =============================================================================
# Quadrature
# =============================================================================


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss-Legendre rule on the reference element [-1, 1].

    Attributes:
        nodes: Reference nodes
        weights: Positive weights summing to the reference length 2
    """

    nodes: FloatArray
    weights: FloatArray

    REFERENCE_LENGTH = 2.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", _frozen(self.nodes))
        object.__setattr__(self, "weights", _frozen(self.weights))
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")
        if not math.isclose(float(self.weights.sum()), self.REFERENCE_LENGTH, rel_tol=1e-13):
            raise ValueError("quadrature weights must sum to the reference length")

    @classmethod
    def gauss_legendre(cls, n: int = DEFAULT_QUADRATURE_NODES) -> QuadratureRule:
        if not MIN_QUADRATURE_NODES <= n <= MAX_QUADRATURE_NODES:
            raise ValueError(
                f"quadrature nodes must be in [{MIN_QUADRATURE_NODES}, {MAX_QUADRATURE_NODES}], got {n}"
            )
        nodes, weights = special.roots_legendre(n)
        return cls(nodes=nodes, weights=weights)

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    def map_to(self, left: FloatArray, right: FloatArray) -> tuple[FloatArray, FloatArray]:
        """Physical points and weights on intervals [left_e, right_e].

        Returns:
            (points, weights), each of shape (len(left), size)
        """
        half = 0.5 * (np.asarray(right) - np.asarray(left))
        points = np.asarray(left)[:, None] + half[:, None] * (self.nodes[None, :] + 1.0)
        weights = half[:, None] * self.weights[None, :]
        return points, weights

    def on(self, mesh: Mesh) -> tuple[FloatArray, FloatArray]:
        """Points and weights on every element of ``mesh``, shape (E, size)."""
        return self.map_to(mesh.nodes[:-1], mesh.nodes[1:])

    def reference_shape(self) -> tuple[FloatArray, FloatArray]:
        """Values of the left/right P1 shape functions at the reference nodes."""
        t = 0.5 * (self.nodes + 1.0)
        return 1.0 - t, t


# =============================================================================
# Sampled quantities
# =============================================================================


@dataclass(frozen=True, eq=False)
class SampledField:
    """Values of a (scalar) field at the quadrature points of a mesh.

    All integrals in the package reduce over arrays of shape (E, q) in
    element order, so results are bitwise reproducible.
    """

    mesh: Mesh
    rule: QuadratureRule
    values: FloatArray
    points: FloatArray = field(repr=False)
    weights: FloatArray = field(repr=False)

    @classmethod
    def build(cls, mesh: Mesh, rule: QuadratureRule, values: ArrayLike) -> SampledField:
        points, weights = rule.on(mesh)
        array = np.broadcast_to(np.asarray(values, dtype=float), points.shape).copy()
        return cls(mesh=mesh, rule=rule, values=array, points=points, weights=weights)

    def _check(self, other: SampledField) -> None:
        if not self.mesh.same_as(other.mesh) or self.rule.size != other.rule.size:
            raise MeshMismatchError("sampled fields live on different meshes or rules")

    def _with(self, values: FloatArray) -> SampledField:
        return SampledField(self.mesh, self.rule, values, self.points, self.weights)

    def __add__(self, other: SampledField) -> SampledField:
        self._check(other)
        return self._with(self.values + other.values)

    def __sub__(self, other: SampledField) -> SampledField:
        self._check(other)
        return self._with(self.values - other.values)

    def __mul__(self, scalar: float) -> SampledField:
        return self._with(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> SampledField:
        return self._with(-self.values)

    def integral(self) -> float:
        return float(np.sum(self.weights * self.values))

    def element_integrals(self) -> FloatArray:
        return np.sum(self.weights * self.values, axis=1)


@dataclass(frozen=True, eq=False)
class SobolevSample:
    """A function and its gradient sampled on the same quadrature points."""

    value: SampledField
    gradient: SampledField

    def __sub__(self, other: SobolevSample) -> SobolevSample:
        return SobolevSample(self.value - other.value, self.gradient - other.gradient)

    def __add__(self, other: SobolevSample) -> SobolevSample:
        return SobolevSample(self.value + other.value, self.gradient + other.gradient)

    def __mul__(self, scalar: float) -> SobolevSample:
        return SobolevSample(self.value * scalar, self.gradient * scalar)

    __rmul__ = __mul__

    @property
    def mesh(self) -> Mesh:
        return self.value.mesh


@dataclass(frozen=True, eq=False)
class GradientField:
    """Piecewise-constant field, one value per element (the broken P1 gradient)."""

    mesh: Mesh
    values: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.shape != (self.mesh.n_elements,):
            raise MeshMismatchError("gradient field needs one value per element")

    def sample(self, rule: QuadratureRule) -> SampledField:
        return SampledField.build(self.mesh, rule, self.values[:, None])


# =============================================================================
# P1 functions
# =============================================================================


class BoundaryTag(str, Enum):
    """Boundary behaviour of a meshed function."""

    FREE = "free"
    DIRICHLET_ZERO = "dirichlet-zero"


@dataclass(frozen=True, eq=False)
class MeshedFunction:
    """A P1 function: nodal coefficients on a mesh.

    Value-semantic: arithmetic returns new instances and the coefficient
    array is read-only.
    """

    mesh: Mesh
    coefficients: FloatArray
    boundary: BoundaryTag = BoundaryTag.FREE

    def __post_init__(self) -> None:
        coefficients = _frozen(self.coefficients)
        object.__setattr__(self, "coefficients", coefficients)
        if coefficients.shape != (self.mesh.n_nodes,):
            raise MeshMismatchError(
                f"expected {self.mesh.n_nodes} coefficients, got {coefficients.shape}"
            )
        if self.boundary is BoundaryTag.DIRICHLET_ZERO and (
            coefficients[0] != 0.0 or coefficients[-1] != 0.0
        ):
            raise MeshMismatchError("dirichlet-zero functions must vanish at both endpoints")

    @classmethod
    def zeros(cls, mesh: Mesh, boundary: BoundaryTag = BoundaryTag.DIRICHLET_ZERO) -> MeshedFunction:
        return cls(mesh, np.zeros(mesh.n_nodes), boundary)

    # -------------------------------------------------------------------------
    # Evaluation
    # -------------------------------------------------------------------------

    def __call__(self, z: ArrayLike) -> FloatArray:
        return np.interp(np.asarray(z, dtype=float), self.mesh.nodes, self.coefficients)

    def gradient(self) -> GradientField:
        return GradientField(self.mesh, np.diff(self.coefficients) / self.mesh.widths)

    def sample(self, rule: QuadratureRule) -> SampledField:
        left_shape, right_shape = rule.reference_shape()
        values = (
            self.coefficients[:-1, None] * left_shape[None, :]
            + self.coefficients[1:, None] * right_shape[None, :]
        )
        return SampledField.build(self.mesh, rule, values)

    def sobolev_sample(self, rule: QuadratureRule) -> SobolevSample:
        return SobolevSample(self.sample(rule), self.gradient().sample(rule))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.coefficients)

    @property
    def free_indices(self) -> NDArray[np.intp]:
        if self.boundary is BoundaryTag.DIRICHLET_ZERO:
            return np.arange(1, self.mesh.n_nodes - 1)
        return np.arange(self.mesh.n_nodes)

    # -------------------------------------------------------------------------
    # Arithmetic
    # -------------------------------------------------------------------------

    def _combined_tag(self, other: MeshedFunction) -> BoundaryTag:
        if self.boundary is BoundaryTag.DIRICHLET_ZERO and other.boundary is BoundaryTag.DIRICHLET_ZERO:
            return BoundaryTag.DIRICHLET_ZERO
        return BoundaryTag.FREE

    def __add__(self, other: MeshedFunction) -> MeshedFunction:
        first, second = align(self, other)
        return MeshedFunction(
            first.mesh, first.coefficients + second.coefficients, self._combined_tag(other)
        )

    def __sub__(self, other: MeshedFunction) -> MeshedFunction:
        first, second = align(self, other)
        return MeshedFunction(
            first.mesh, first.coefficients - second.coefficients, self._combined_tag(other)
        )

    def __mul__(self, scalar: float) -> MeshedFunction:
        return MeshedFunction(self.mesh, self.coefficients * float(scalar), self.boundary)

    __rmul__ = __mul__

    def __neg__(self) -> MeshedFunction:
        return self * -1.0

    def with_coefficients(self, coefficients: ArrayLike) -> MeshedFunction:
        return MeshedFunction(self.mesh, np.asarray(coefficients, dtype=float), self.boundary)

    def to_rows(self) -> list[dict[str, float]]:
        """Nodal export rows ``{z, u}``."""
        return [
            {"z": float(z), "u": float(u)}
            for z, u in zip(self.mesh.nodes, self.coefficients, strict=True)
        ]


@dataclass(frozen=True)
class AnalyticFunction:
    """A closed-form function with (optionally) its derivative.

    Used for manufactured solutions and weak test functionals, sampled
    directly at quadrature points rather than interpolated.
    """

    value: Callable[[FloatArray], FloatArray]
    derivative: Callable[[FloatArray], FloatArray] | None = None
    name: str = ""

    def __call__(self, z: ArrayLike) -> FloatArray:
        z = np.asarray(z, dtype=float)
        return np.broadcast_to(np.asarray(self.value(z), dtype=float), z.shape)

    def sample(self, mesh: Mesh, rule: QuadratureRule) -> SampledField:
        points, _ = rule.on(mesh)
        return SampledField.build(mesh, rule, self(points))

    def sobolev_sample(self, mesh: Mesh, rule: QuadratureRule) -> SobolevSample:
        if self.derivative is None:
            raise ValueError(f"analytic function '{self.name}' has no derivative")
        points, _ = rule.on(mesh)
        gradient = np.broadcast_to(np.asarray(self.derivative(points), dtype=float), points.shape)
        return SobolevSample(self.sample(mesh, rule), SampledField.build(mesh, rule, gradient))


# =============================================================================
# Operations
# =============================================================================


def interpolate(
    f: Callable[[FloatArray], ArrayLike],
    mesh: Mesh,
    boundary: BoundaryTag = BoundaryTag.FREE,
) -> MeshedFunction:
    """Nodal interpolant of ``f``; dirichlet-zero forces the endpoint values to 0."""
    values = np.array(np.broadcast_to(np.asarray(f(mesh.nodes), dtype=float), mesh.nodes.shape))
    if boundary is BoundaryTag.DIRICHLET_ZERO:
        values[0] = 0.0
        values[-1] = 0.0
    return MeshedFunction(mesh, values, boundary)


def prolong(u: MeshedFunction, finer: Mesh) -> MeshedFunction:
    """Exact representation of ``u`` on a refinement of its mesh.

    Raises:
        MeshMismatchError: If ``finer`` does not contain every node of u's mesh
    """
    if finer.same_as(u.mesh):
        return u
    if not finer.is_refinement_of(u.mesh):
        raise MeshMismatchError(
            f"cannot prolong from level {u.mesh.level} to a mesh that is not its refinement"
        )
    coefficients = u(finer.nodes)
    if u.boundary is BoundaryTag.DIRICHLET_ZERO:
        coefficients[0] = 0.0
        coefficients[-1] = 0.0
    return MeshedFunction(finer, coefficients, u.boundary)


def align(u: MeshedFunction, v: MeshedFunction) -> tuple[MeshedFunction, MeshedFunction]:
    """Prolong the coarser of two functions onto the finer mesh."""
    if u.mesh.same_as(v.mesh):
        return u, v
    if u.mesh.n_nodes >= v.mesh.n_nodes:
        return u, prolong(v, u.mesh)
    return prolong(u, v.mesh), v
