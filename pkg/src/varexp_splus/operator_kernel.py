"""Carathéodory kernels a(z, s, ξ) and the divergence-form operator they induce.

⟨A(u), v⟩ = ∫ a(z, u(z), ∇u(z)) · ∇v(z) dz

Kernels carry the growth and coercivity data their author declares
(constants c0, c1, c2, coefficients k0, k1, exponents r1, r2). The A1-A3
checkers can only falsify those declarations by sampling; they never
prove them.

The kernel interface is N-dimensional: the evaluator receives ξ with a
trailing axis of length N (here N = 1) and returns the same shape.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Protocol, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import KernelRegistrationError, SingularJacobianError, UnknownLabelError
from .exponent_field import (
    Domain,
    ExponentField,
    conjugate,
    sobolev_conjugate,
    strict_bound_check,
)
from .fem_mesh import (
    BoundaryTag,
    MeshedFunction,
    Mesh,
    QuadratureRule,
    SobolevSample,
    align,
    prolong,
)
from .modular_space import sobolev_norm

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
KernelEvaluator = Callable[[FloatArray, FloatArray, FloatArray], FloatArray]
Coefficient = Callable[[FloatArray], FloatArray]
CoefficientLike = Union[float, Coefficient, MeshedFunction]

DIMENSION = 1
VIOLATION_TOLERANCE = 1e-9
MONOTONE_TOLERANCE = 1e-12
MIN_SEPARATION = 1e-8
SAMPLE_MAGNITUDES = (-3.0, 3.0)  # log10 range of sampled |s| and |ξ|
ZERO_PROBABILITY = 0.1
PIVOT_THRESHOLD = 1e-14
FD_RELATIVE_STEP = 1e-7


def as_coefficient(value: CoefficientLike) -> Coefficient:
    """Normalize a constant, callable or P1 function into z -> values."""
    if isinstance(value, MeshedFunction):
        return value
    if callable(value):
        return value
    constant = float(value)
    return lambda z: np.full(np.shape(z), constant)


# =============================================================================
# Kernel type
# =============================================================================


@dataclass(frozen=True)
class GrowthData:
    """A1: |a(z, s, ξ)| <= |k0(z)| + c0 (|s|^{r1(z)} + |ξ|^{p(z)-1})."""

    c0: float
    k0: Coefficient
    r1: ExponentField


@dataclass(frozen=True)
class CoercivityData:
    """A3: a(z, s, ξ)·ξ >= c1 |ξ|^{p(z)} - c2 |s|^{r2(z)} - |k1(z)|."""

    c1: float
    c2: float
    r2: ExponentField
    k1: Coefficient


@dataclass(frozen=True, eq=False)
class CaratheodoryKernel:
    """A kernel a(z, s, ξ) bound to the exponent p its growth data refers to.

    Attributes:
        label: Registry name or a free-form label for custom kernels
        exponent: The p(.) the declared growth data refers to
        evaluator: Vectorized map (z[M], s[M], ξ[M, N]) -> a[M, N]
        growth: Declared A1 data
        coercivity: Declared A3 data
        parameters: Parameters the kernel was built with
    """

    label: str
    exponent: ExponentField
    evaluator: KernelEvaluator = field(repr=False)
    growth: GrowthData = field(repr=False)
    coercivity: CoercivityData = field(repr=False)
    parameters: dict[str, float] = field(default_factory=dict)

    def __call__(self, z: ArrayLike, s: ArrayLike, xi: ArrayLike) -> FloatArray:
        """Evaluate with ξ carrying its trailing vector axis."""
        return np.asarray(self.evaluator(np.asarray(z, float), np.asarray(s, float), np.asarray(xi, float)))

    def flux(self, z: ArrayLike, s: ArrayLike, xi: ArrayLike) -> FloatArray:
        """Scalar (N = 1) evaluation on broadcastable arrays of any shape."""
        z_b, s_b, xi_b = np.broadcast_arrays(
            np.asarray(z, float), np.asarray(s, float), np.asarray(xi, float)
        )
        out = self(z_b.ravel(), s_b.ravel(), xi_b.ravel()[:, None])
        return np.asarray(out, dtype=float).reshape(z_b.shape)


def _power_flux(xi: FloatArray, exponent: FloatArray) -> FloatArray:
    """|ξ|^{p-2} ξ with the value 0 at ξ = 0 for every p > 1."""
    norm = np.sqrt(np.sum(xi * xi, axis=-1, keepdims=True))
    factor = np.zeros_like(norm)
    mask = norm > 0
    factor[mask] = norm[mask] ** (np.broadcast_to(exponent, norm.shape)[mask] - 2.0)
    return factor * xi


# =============================================================================
# Registry
# =============================================================================

KernelFactory = Callable[[ExponentField, Mapping[str, float]], CaratheodoryKernel]
_REGISTRY: dict[str, KernelFactory] = {}


def register_kernel(label: str) -> Callable[[KernelFactory], KernelFactory]:
    """Register a kernel factory under ``label`` (decorator).

    Factories receive the problem exponent and a parameter mapping.
    """

    def decorator(factory: KernelFactory) -> KernelFactory:
        if label in _REGISTRY:
            logger.warning(f"Replacing registered kernel '{label}'")
        _REGISTRY[label] = factory
        return factory

    return decorator


def available_kernels() -> list[str]:
    return sorted(_REGISTRY)


def build_kernel(
    label: str,
    p: ExponentField,
    parameters: Mapping[str, float] | None = None,
) -> CaratheodoryKernel:
    """Instantiate a registered kernel for exponent ``p``.

    Raises:
        UnknownLabelError: If ``label`` is not registered
    """
    try:
        factory = _REGISTRY[label]
    except KeyError:
        raise UnknownLabelError("kernel", label, available_kernels()) from None
    return factory(p, dict(parameters or {}))


def validate_kernel(kernel: CaratheodoryKernel, p: ExponentField, dim: int = DIMENSION) -> None:
    """Registration checks on the declared data.

    Requires positive c0, c1, c2, r1 < p*/q and r2 < p* strictly.

    Raises:
        KernelRegistrationError: On the first failed requirement
    """
    growth, coercivity = kernel.growth, kernel.coercivity
    for name, value in (("c0", growth.c0), ("c1", coercivity.c1), ("c2", coercivity.c2)):
        if not value > 0:
            raise KernelRegistrationError(f"kernel '{kernel.label}': {name} must be > 0, got {value}")
    if growth.r1.domain != p.domain or coercivity.r2.domain != p.domain:
        raise KernelRegistrationError(f"kernel '{kernel.label}': r1/r2 live on another domain")

    star = sobolev_conjugate(p, dim)
    r1_check = strict_bound_check(growth.r1, star.divided_by(conjugate(p)))
    if not r1_check.holds:
        raise KernelRegistrationError(
            f"kernel '{kernel.label}': r1 < p*/q fails at z={r1_check.witness} "
            f"(margin {r1_check.margin:.3e})"
        )
    r2_check = strict_bound_check(coercivity.r2, star)
    if not r2_check.holds:
        raise KernelRegistrationError(
            f"kernel '{kernel.label}': r2 < p* fails at z={r2_check.witness} "
            f"(margin {r2_check.margin:.3e})"
        )


def _standard_data(
    p: ExponentField,
    *,
    c0: float = 1.0,
    k0: float = 0.0,
    c1: float = 1.0,
    c2: float = 1.0,
    k1: float = 0.0,
) -> tuple[GrowthData, CoercivityData]:
    unit = ExponentField.constant(p.domain, 1.0, admits_one=True)
    return (
        GrowthData(c0=c0, k0=as_coefficient(k0), r1=unit),
        CoercivityData(c1=c1, c2=c2, r2=unit, k1=as_coefficient(k1)),
    )


@register_kernel("laplacian")
def laplacian(p: ExponentField, parameters: Mapping[str, float]) -> CaratheodoryKernel:
    """a = ξ; admissible with p ≡ 2."""
    growth, coercivity = _standard_data(p)
    return CaratheodoryKernel("laplacian", p, lambda z, s, xi: xi.copy(), growth, coercivity)


@register_kernel("p-laplacian")
def p_laplacian(p: ExponentField, parameters: Mapping[str, float]) -> CaratheodoryKernel:
    """a = |ξ|^{p-2} ξ with constant p."""
    if not p.is_constant:
        raise KernelRegistrationError("p-laplacian needs a constant exponent; use p(z)-laplacian")
    exponent = p.p_minus
    growth, coercivity = _standard_data(p)
    return CaratheodoryKernel(
        "p-laplacian",
        p,
        lambda z, s, xi: _power_flux(xi, np.asarray(exponent)),
        growth,
        coercivity,
        {"exponent": exponent},
    )


@register_kernel("p(z)-laplacian")
def variable_p_laplacian(p: ExponentField, parameters: Mapping[str, float]) -> CaratheodoryKernel:
    """a = |ξ|^{p(z)-2} ξ."""
    growth, coercivity = _standard_data(p)
    return CaratheodoryKernel(
        "p(z)-laplacian",
        p,
        lambda z, s, xi: _power_flux(xi, p(z)[:, None]),
        growth,
        coercivity,
    )


@register_kernel("perturbed-p(z)-laplacian")
def perturbed_p_laplacian(p: ExponentField, parameters: Mapping[str, float]) -> CaratheodoryKernel:
    """a = (1 + 1/(1 + s²)) |ξ|^{p(z)-2} ξ; the coefficient lies in (1, 2]."""
    growth, coercivity = _standard_data(p, c0=2.0)

    def evaluator(z: FloatArray, s: FloatArray, xi: FloatArray) -> FloatArray:
        weight = 1.0 + 1.0 / (1.0 + s * s)
        return weight[:, None] * _power_flux(xi, p(z)[:, None])

    return CaratheodoryKernel("perturbed-p(z)-laplacian", p, evaluator, growth, coercivity)


@register_kernel("smoothed-p(z)-laplacian")
def smoothed_p_laplacian(p: ExponentField, parameters: Mapping[str, float]) -> CaratheodoryKernel:
    """a = (1 + |ξ|²)^{(p(z)-2)/2} ξ, growth c(1 + |ξ|^{p-1})."""
    bound = max(1.0, 2.0 ** ((p.p_plus - 2.0) / 2.0))
    c1 = min(1.0, 2.0 ** ((p.p_minus - 2.0) / 2.0))
    k1 = 1.0 if p.p_minus < 2.0 else 0.0
    growth, coercivity = _standard_data(p, c0=bound, k0=bound, c1=c1, k1=k1)

    def evaluator(z: FloatArray, s: FloatArray, xi: FloatArray) -> FloatArray:
        squared = np.sum(xi * xi, axis=-1, keepdims=True)
        return (1.0 + squared) ** ((p(z)[:, None] - 2.0) / 2.0) * xi

    return CaratheodoryKernel("smoothed-p(z)-laplacian", p, evaluator, growth, coercivity)


def _young_constant(scale: float, p: ExponentField, samples: int = 257) -> float:
    """sup_t (scale·t - t^p / 2) maximized over p in [p_-, p_+]."""
    if scale == 0.0:
        return 0.0
    exponents = np.linspace(p.p_minus, p.p_plus, samples)
    t = (2.0 * scale / exponents) ** (1.0 / (exponents - 1.0))
    return float(np.max(scale * t - 0.5 * t**exponents))


@register_kernel("convective-p(z)-laplacian")
def convective_p_laplacian(p: ExponentField, parameters: Mapping[str, float]) -> CaratheodoryKernel:
    """a = |ξ|^{p(z)-2} ξ + β arctan(s); A is not monotone for β ≠ 0.

    Parameters:
        beta: strength of the u-dependent drift term (default 1)
    """
    beta = float(parameters.get("beta", 1.0))
    drift = abs(beta) * math.pi / 2.0
    k1 = 1.01 * _young_constant(drift, p) + 1e-12
    growth, coercivity = _standard_data(p, c0=1.0, k0=drift, c1=0.5, k1=k1)

    def evaluator(z: FloatArray, s: FloatArray, xi: FloatArray) -> FloatArray:
        return _power_flux(xi, p(z)[:, None]) + beta * np.arctan(s)[:, None]

    return CaratheodoryKernel(
        "convective-p(z)-laplacian", p, evaluator, growth, coercivity, {"beta": beta}
    )


# Deliberately inadmissible kernels: each breaks one condition


@register_kernel("cubic")
def cubic(p: ExponentField, parameters: Mapping[str, float]) -> CaratheodoryKernel:
    """a = ξ³ declared with linear growth; violates A1 when p ≡ 2."""
    growth, coercivity = _standard_data(p)
    return CaratheodoryKernel("cubic", p, lambda z, s, xi: xi**3, growth, coercivity)


@register_kernel("negated-laplacian")
def negated_laplacian(p: ExponentField, parameters: Mapping[str, float]) -> CaratheodoryKernel:
    """a = -ξ; violates A2 (and A3)."""
    growth, coercivity = _standard_data(p)
    return CaratheodoryKernel("negated-laplacian", p, lambda z, s, xi: -xi, growth, coercivity)


@register_kernel("zero")
def zero(p: ExponentField, parameters: Mapping[str, float]) -> CaratheodoryKernel:
    """a = 0; violates A2 and A3."""
    growth, coercivity = _standard_data(p)
    return CaratheodoryKernel("zero", p, lambda z, s, xi: np.zeros_like(xi), growth, coercivity)


# =============================================================================
# Sampling checkers
# =============================================================================


class KernelCondition(str, Enum):
    A1 = "A1"
    A2 = "A2"
    A3 = "A3"


@dataclass(frozen=True)
class Violation:
    """One sample at which a declared condition failed."""

    z: float
    s: float
    xi: float
    slack: float
    xi_prime: float | None = None

    def as_row(self, condition: KernelCondition) -> dict[str, Any]:
        return {
            "condition": condition.value,
            "z": self.z,
            "s": self.s,
            "xi": self.xi,
            "xi_prime": "" if self.xi_prime is None else self.xi_prime,
            "slack": self.slack,
        }


@dataclass
class KernelCheckReport:
    """Outcome of one sampled condition check."""

    condition: KernelCondition
    samples: int
    violations: list[Violation] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def worst_slack(self) -> float | None:
        return min((v.slack for v in self.violations), default=None)


class KernelSampler:
    """Seeded sampler of (z, s, ξ) mixing log-uniform magnitudes, signs and zeros."""

    def __init__(self, domain: Domain, seed: int = 0) -> None:
        self.domain = domain
        self.seed = seed
        self._rng = np.random.default_rng(seed)

    def points(self, n: int) -> FloatArray:
        return self._rng.uniform(self.domain.left, self.domain.right, n)

    def magnitudes(self, n: int) -> FloatArray:
        low, high = SAMPLE_MAGNITUDES
        values = 10.0 ** self._rng.uniform(low, high, n)
        signs = np.where(self._rng.random(n) < 0.5, -1.0, 1.0)
        zeros = self._rng.random(n) < ZERO_PROBABILITY
        return np.where(zeros, 0.0, signs * values)

    def draw(self, n: int) -> tuple[FloatArray, FloatArray, FloatArray]:
        return self.points(n), self.magnitudes(n), self.magnitudes(n)


def _relative_allowance(scale: FloatArray) -> FloatArray:
    return VIOLATION_TOLERANCE * np.maximum(1.0, np.abs(scale))


def _collect(
    condition: KernelCondition,
    mask: NDArray[np.bool_],
    z: FloatArray,
    s: FloatArray,
    xi: FloatArray,
    slack: FloatArray,
    xi_prime: FloatArray | None = None,
) -> KernelCheckReport:
    report = KernelCheckReport(condition=condition, samples=int(z.size))
    for i in np.flatnonzero(mask):
        report.violations.append(
            Violation(
                z=float(z[i]),
                s=float(s[i]),
                xi=float(xi[i]),
                slack=float(slack[i]),
                xi_prime=None if xi_prime is None else float(xi_prime[i]),
            )
        )
    if report.violations:
        logger.info(f"{condition.value}: {len(report.violations)} of {report.samples} samples violate")
    return report


def check_A1(kernel: CaratheodoryKernel, p: ExponentField, sampler: KernelSampler, n: int) -> KernelCheckReport:
    """Sample |a| <= |k0| + c0(|s|^{r1} + |ξ|^{p-1})."""
    if n < 1:
        raise ValueError("check_A1 needs n >= 1")
    z, s, xi = sampler.draw(n)
    growth = kernel.growth
    lhs = np.abs(kernel.flux(z, s, xi))
    rhs = np.abs(growth.k0(z)) + growth.c0 * (np.abs(s) ** growth.r1(z) + np.abs(xi) ** (p(z) - 1.0))
    slack = rhs - lhs
    return _collect(KernelCondition.A1, slack < -_relative_allowance(rhs), z, s, xi, slack)


def check_A2(kernel: CaratheodoryKernel, sampler: KernelSampler, n: int) -> KernelCheckReport:
    """Sample strict monotonicity (a(ξ) - a(ξ'))(ξ - ξ') > 0 at frozen (z, s)."""
    if n < 1:
        raise ValueError("check_A2 needs n >= 1")
    z, s, xi = sampler.draw(n)
    xi_prime = sampler.magnitudes(n)
    close = np.abs(xi - xi_prime) < MIN_SEPARATION
    xi_prime = np.where(close, xi + 1.0, xi_prime)
    delta = xi - xi_prime
    product = (kernel.flux(z, s, xi) - kernel.flux(z, s, xi_prime)) * delta
    slack = product - MONOTONE_TOLERANCE * delta**2
    return _collect(KernelCondition.A2, slack <= 0.0, z, s, xi, slack, xi_prime)


def check_A3(kernel: CaratheodoryKernel, p: ExponentField, sampler: KernelSampler, n: int) -> KernelCheckReport:
    """Sample a·ξ >= c1|ξ|^p - c2|s|^{r2} - |k1|."""
    if n < 1:
        raise ValueError("check_A3 needs n >= 1")
    z, s, xi = sampler.draw(n)
    data = kernel.coercivity
    lhs = kernel.flux(z, s, xi) * xi
    rhs = data.c1 * np.abs(xi) ** p(z) - data.c2 * np.abs(s) ** data.r2(z) - np.abs(data.k1(z))
    slack = lhs - rhs
    scale = np.maximum(np.abs(lhs), np.abs(rhs))
    return _collect(KernelCondition.A3, slack < -_relative_allowance(scale), z, s, xi, slack)


def check_all(
    kernel: CaratheodoryKernel,
    p: ExponentField,
    n: int,
    seed: int = 0,
) -> list[KernelCheckReport]:
    """A1, A2, A3 in order, each from its own seeded stream."""
    return [
        check_A1(kernel, p, KernelSampler(p.domain, seed), n),
        check_A2(kernel, KernelSampler(p.domain, seed + 1), n),
        check_A3(kernel, p, KernelSampler(p.domain, seed + 2), n),
    ]


# =============================================================================
# Right-hand sides
# =============================================================================


class RightHandSide(Protocol):
    """A functional f in W^{1,p(.)}(Ω)* tested against the P1 basis."""

    def load_vector(self, mesh: Mesh, rule: QuadratureRule) -> FloatArray:
        """⟨f, φ_i⟩ for every node i (boundary rows included)."""
        ...


@dataclass(frozen=True)
class DensityLoad:
    """⟨f, v⟩ = ∫ f(z) v(z) dz for an L² density."""

    density: Callable[[FloatArray], ArrayLike]
    name: str = ""

    def load_vector(self, mesh: Mesh, rule: QuadratureRule) -> FloatArray:
        points, weights = rule.on(mesh)
        values = np.broadcast_to(np.asarray(self.density(points), dtype=float), points.shape)
        left_shape, right_shape = rule.reference_shape()
        weighted = weights * values
        load = np.zeros(mesh.n_nodes)
        load[:-1] += weighted @ left_shape
        load[1:] += weighted @ right_shape
        return load

    def max_value(self, mesh: Mesh, rule: QuadratureRule) -> float:
        points, _ = rule.on(mesh)
        return float(np.max(np.abs(np.asarray(self.density(points), dtype=float)), initial=0.0))


@dataclass(frozen=True)
class PointLoad:
    """⟨f, v⟩ = magnitude · v(location)."""

    location: float
    magnitude: float = 1.0
    name: str = "point"

    def load_vector(self, mesh: Mesh, rule: QuadratureRule) -> FloatArray:
        if not mesh.nodes[0] <= self.location <= mesh.nodes[-1]:
            raise ValueError(
                f"point load at {self.location} lies outside [{mesh.nodes[0]}, {mesh.nodes[-1]}]"
            )
        element = int(mesh.locate(self.location))
        left, right = mesh.nodes[element], mesh.nodes[element + 1]
        t = (self.location - left) / (right - left)
        load = np.zeros(mesh.n_nodes)
        load[element] += self.magnitude * (1.0 - t)
        load[element + 1] += self.magnitude * t
        return load


# =============================================================================
# Assembly
# =============================================================================


def operator_vector(u: MeshedFunction, kernel: CaratheodoryKernel, rule: QuadratureRule) -> FloatArray:
    """⟨A(u), φ_i⟩ for every node i, reduced element by element in order."""
    sample = u.sample(rule)
    gradient = u.gradient().values
    flux = kernel.flux(sample.points, sample.values, gradient[:, None])
    element_flux = np.sum(sample.weights * flux, axis=1) / u.mesh.widths
    out = np.zeros(u.mesh.n_nodes)
    out[:-1] -= element_flux
    out[1:] += element_flux
    return out


def assemble_residual(
    u: MeshedFunction,
    kernel: CaratheodoryKernel,
    rhs: RightHandSide,
    rule: QuadratureRule | None = None,
) -> FloatArray:
    """F_i = ⟨A(u), φ_i⟩ - ⟨f, φ_i⟩ over the free nodes of u."""
    rule = rule or QuadratureRule.gauss_legendre()
    full = operator_vector(u, kernel, rule) - rhs.load_vector(u.mesh, rule)
    return full[u.free_indices]


@dataclass(frozen=True)
class TridiagonalMatrix:
    """Square tridiagonal matrix.

    Attributes:
        lower: A[i+1, i], length n-1
        diagonal: A[i, i], length n
        upper: A[i, i+1], length n-1
    """

    lower: FloatArray
    diagonal: FloatArray
    upper: FloatArray

    @property
    def size(self) -> int:
        return int(self.diagonal.size)

    def to_dense(self) -> FloatArray:
        return np.diag(self.diagonal) + np.diag(self.lower, -1) + np.diag(self.upper, 1)

    @property
    def max_abs(self) -> float:
        entries = (self.lower, self.diagonal, self.upper)
        return max(float(np.max(np.abs(part), initial=0.0)) for part in entries)

    def shifted(self, other: TridiagonalMatrix, scale: float) -> TridiagonalMatrix:
        """self + scale * other."""
        if other.size != self.size:
            raise ValueError(f"cannot shift a size-{self.size} matrix by a size-{other.size} one")
        return TridiagonalMatrix(
            lower=self.lower + scale * other.lower,
            diagonal=self.diagonal + scale * other.diagonal,
            upper=self.upper + scale * other.upper,
        )

    def matvec(self, x: FloatArray) -> FloatArray:
        y = self.diagonal * x
        y[:-1] += self.upper * x[1:]
        y[1:] += self.lower * x[:-1]
        return y

    def asymmetry(self) -> float:
        if self.size < 2:
            return 0.0
        return float(np.max(np.abs(self.lower - self.upper)))

    def solve(self, rhs: FloatArray) -> FloatArray:
        """Thomas algorithm without pivoting.

        Raises:
            SingularJacobianError: If a pivot magnitude falls below 1e-14
        """
        n = self.size
        if n == 0:
            return np.zeros(0)
        upper_mod = np.zeros(max(n - 1, 0))
        rhs_mod = np.zeros(n)

        pivot = self.diagonal[0]
        if abs(pivot) < PIVOT_THRESHOLD:
            raise SingularJacobianError(0, float(pivot))
        if n > 1:
            upper_mod[0] = self.upper[0] / pivot
        rhs_mod[0] = rhs[0] / pivot
        for i in range(1, n):
            pivot = self.diagonal[i] - self.lower[i - 1] * upper_mod[i - 1]
            if abs(pivot) < PIVOT_THRESHOLD:
                raise SingularJacobianError(i, float(pivot))
            if i < n - 1:
                upper_mod[i] = self.upper[i] / pivot
            rhs_mod[i] = (rhs[i] - self.lower[i - 1] * rhs_mod[i - 1]) / pivot

        x = np.zeros(n)
        x[-1] = rhs_mod[-1]
        for i in range(n - 2, -1, -1):
            x[i] = rhs_mod[i] - upper_mod[i] * x[i + 1]
        return x


def default_fd_step(u: MeshedFunction) -> float:
    return FD_RELATIVE_STEP * (1.0 + float(np.max(np.abs(u.coefficients), initial=0.0)))


def stiffness_matrix(u: MeshedFunction) -> TridiagonalMatrix:
    """P1 Laplacian stiffness ∫ φ_i' φ_j' restricted to u's free coefficients."""
    inverse = 1.0 / u.mesh.widths
    diagonal = np.zeros(u.mesh.n_nodes)
    diagonal[:-1] += inverse
    diagonal[1:] += inverse
    free = u.free_indices
    coupling = -inverse[free[:-1]]
    return TridiagonalMatrix(lower=coupling.copy(), diagonal=diagonal[free], upper=coupling)


def assemble_jacobian_fd(
    u: MeshedFunction,
    kernel: CaratheodoryKernel,
    rhs: RightHandSide,
    rule: QuadratureRule | None = None,
    step: float | None = None,
) -> TridiagonalMatrix:
    """Central-difference Jacobian of ``assemble_residual`` in the free coefficients.

    Coefficient j only reaches rows j-1, j, j+1, so columns are perturbed in
    three interleaved colours: six residual evaluations regardless of size.
    """
    rule = rule or QuadratureRule.gauss_legendre()
    step = step if step is not None else default_fd_step(u)
    if step <= 0:
        raise ValueError(f"finite-difference step must be positive, got {step}")

    free = u.free_indices
    n = free.size
    lower, diagonal, upper = np.zeros(max(n - 1, 0)), np.zeros(n), np.zeros(max(n - 1, 0))
    for colour in range(3):
        columns = np.arange(colour, n, 3)
        if columns.size == 0:
            continue
        shift = np.zeros(u.mesh.n_nodes)
        shift[free[columns]] = step
        forward = assemble_residual(u.with_coefficients(u.coefficients + shift), kernel, rhs, rule)
        backward = assemble_residual(u.with_coefficients(u.coefficients - shift), kernel, rhs, rule)
        derivative = (forward - backward) / (2.0 * step)
        for j in columns:
            diagonal[j] = derivative[j]
            if j > 0:
                upper[j - 1] = derivative[j - 1]
            if j < n - 1:
                lower[j] = derivative[j + 1]
    return TridiagonalMatrix(lower=lower, diagonal=diagonal, upper=upper)


def pairing(
    uA: MeshedFunction,
    v: MeshedFunction | SobolevSample,
    kernel: CaratheodoryKernel,
    rule: QuadratureRule | None = None,
) -> float:
    """⟨A(uA), v⟩ = ∫ a(z, uA, ∇uA) ∇v dz.

    A P1 ``v`` on a nested mesh is prolonged first; a ``SobolevSample``
    must already live on uA's mesh.
    """
    rule = rule or QuadratureRule.gauss_legendre()
    if isinstance(v, MeshedFunction):
        uA, v = align(uA, v)
        test_gradient = v.gradient().sample(rule)
    else:
        if not v.mesh.same_as(uA.mesh):
            uA = prolong(uA, v.mesh)
        test_gradient = v.gradient
    sample = uA.sample(rule)
    flux = kernel.flux(sample.points, sample.values, uA.gradient().values[:, None])
    return float(np.sum(sample.weights * flux * test_gradient.values))


# =============================================================================
# Boundedness and coercivity probes
# =============================================================================


@dataclass(frozen=True)
class BoundednessReport:
    """max_i |⟨A(u), φ_i⟩| / ‖φ_i‖ over random u with ‖u‖_{W^{1,p}} <= radius."""

    radius: float
    samples: int
    bound: float
    largest_norm: float


def boundedness_probe(
    kernel: CaratheodoryKernel,
    mesh: Mesh,
    radius: float,
    samples: int = 1000,
    seed: int = 0,
    rule: QuadratureRule | None = None,
) -> BoundednessReport:
    """Dual-norm surrogate of A over a W^{1,p(.)} ball of the Dirichlet space."""
    rule = rule or QuadratureRule.gauss_legendre()
    p = kernel.exponent
    rng = np.random.default_rng(seed)
    interior = np.arange(1, mesh.n_nodes - 1)
    if interior.size == 0:
        return BoundednessReport(radius, samples, 0.0, 0.0)

    basis_norms = np.empty(interior.size)
    for k, i in enumerate(interior):
        hat = np.zeros(mesh.n_nodes)
        hat[i] = 1.0
        basis_norms[k] = sobolev_norm(MeshedFunction(mesh, hat, BoundaryTag.DIRICHLET_ZERO), p, rule).value

    bound, largest = 0.0, 0.0
    for _ in range(samples):
        coefficients = np.zeros(mesh.n_nodes)
        coefficients[interior] = rng.standard_normal(interior.size)
        direction = MeshedFunction(mesh, coefficients, BoundaryTag.DIRICHLET_ZERO)
        norm = sobolev_norm(direction, p, rule).value
        if norm == 0.0:
            continue
        target = radius * (1.0 - rng.random())  # in (0, radius]
        u = direction * (target / norm)
        dual = np.abs(operator_vector(u, kernel, rule)[interior]) / basis_norms
        bound = max(bound, float(dual.max()))
        largest = max(largest, target)
    logger.info(f"boundedness probe '{kernel.label}' R={radius}: bound {bound:.4e}")
    return BoundednessReport(radius=radius, samples=samples, bound=bound, largest_norm=largest)


@dataclass(frozen=True)
class CoercivityReport:
    """⟨A(t u0), t u0⟩ / ‖t u0‖ along a ray of scalings t."""

    factors: tuple[float, ...]
    ratios: tuple[float, ...]

    @property
    def increasing(self) -> bool:
        return all(b > a for a, b in zip(self.ratios, self.ratios[1:], strict=False))


def coercivity_probe(
    kernel: CaratheodoryKernel,
    u0: MeshedFunction,
    factors: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0),
    rule: QuadratureRule | None = None,
) -> CoercivityReport:
    """Growth of the coercivity quotient along t u0 (u0 must have ∇u0 ≠ 0)."""
    rule = rule or QuadratureRule.gauss_legendre()
    if not np.any(u0.gradient().values):
        raise ValueError("coercivity probe needs a direction with nonzero gradient")
    ratios = []
    for t in factors:
        u = u0 * t
        ratios.append(pairing(u, u, kernel, rule) / sobolev_norm(u, kernel.exponent, rule).value)
    return CoercivityReport(factors=tuple(factors), ratios=tuple(ratios))
