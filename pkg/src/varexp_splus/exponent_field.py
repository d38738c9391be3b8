"""Variable exponents p in P(Omega) on a one-dimensional interval.

Provides:
- Domain: the interval Omega = (left, right)
- ExponentField: a continuous exponent with cached p_- and p_+
- ExtendedExponent: an exponent that may take the tagged value +inf
  (Sobolev conjugates)
- conjugate / sobolev_conjugate / strict_bound_check / exponent_ordering
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ExponentError

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

# Dense sample used to confirm p_- / p_+ against the evaluator
VALIDATION_SAMPLES = 10_000
# Default grid for strictness and ordering checks
CHECK_SAMPLES = 1001
# bound - r must exceed this to count as a strict inequality
STRICT_MARGIN = 1e-9
# p_- at or below 1 + this makes the conjugate unbounded
CONJUGATE_FLOOR = 1e-12
# Slack allowed between cached extremes and sampled values
EXTREME_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Domain:
    """The interval Omega = (left, right) with Lebesgue measure."""

    left: float = 0.0
    right: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.left) and math.isfinite(self.right)):
            raise ExponentError(f"domain endpoints must be finite, got ({self.left}, {self.right})")
        if not self.left < self.right:
            raise ExponentError(f"domain needs left < right, got ({self.left}, {self.right})")

    @property
    def measure(self) -> float:
        return self.right - self.left

    def grid(self, samples: int = CHECK_SAMPLES) -> FloatArray:
        """Uniform sample of the closed interval, endpoints included."""
        return np.linspace(self.left, self.right, samples)

    def contains(self, z: ArrayLike) -> NDArray[np.bool_]:
        z = np.asarray(z, dtype=float)
        return (z >= self.left) & (z <= self.right)


class ExponentKind(str, Enum):
    """How an exponent field is represented."""

    CONSTANT = "constant"
    AFFINE = "affine"  # p(z) = intercept + slope * z
    TABULATED = "tabulated"  # piecewise-linear through grid values
    DERIVED = "derived"  # pointwise transform of another field (conjugates)


@dataclass(frozen=True, eq=False)
class ExponentField:
    """A continuous exponent p: Omega -> (1, inf) with cached extremes.

    Use the ``constant``, ``affine`` and ``tabulated`` constructors rather
    than building instances directly. Growth exponents r1, r2 of a kernel
    may equal 1 and are built with ``admits_one=True``.

    Attributes:
        domain: The interval the exponent lives on
        kind: Representation tag
        parameters: The defining parameters (for reports and configs)
        p_minus: Infimum of p over the closed domain
        p_plus: Supremum of p over the closed domain
        admits_one: Whether p_- = 1 is allowed
    """

    domain: Domain
    kind: ExponentKind
    parameters: dict[str, Any]
    p_minus: float
    p_plus: float
    evaluator: Callable[[FloatArray], FloatArray] = field(repr=False)
    admits_one: bool = False

    def __post_init__(self) -> None:
        if not (math.isfinite(self.p_minus) and math.isfinite(self.p_plus)):
            raise ExponentError(f"exponent extremes must be finite, got [{self.p_minus}, {self.p_plus}]")
        if self.p_minus > self.p_plus:
            raise ExponentError(f"p_minus {self.p_minus} exceeds p_plus {self.p_plus}")
        if self.admits_one:
            if self.p_minus < 1.0:
                raise ExponentError(f"growth exponent must be >= 1, got p_minus = {self.p_minus}")
        elif self.p_minus <= 1.0:
            raise ExponentError(f"exponent must exceed 1, got p_minus = {self.p_minus}")

        sample = self(self.domain.grid(VALIDATION_SAMPLES))
        if not np.all(np.isfinite(sample)):
            raise ExponentError("exponent evaluator returned non-finite values")
        lowest, highest = float(sample.min()), float(sample.max())
        if lowest < self.p_minus - EXTREME_TOLERANCE or highest > self.p_plus + EXTREME_TOLERANCE:
            raise ExponentError(
                f"sampled range [{lowest}, {highest}] escapes declared "
                f"[{self.p_minus}, {self.p_plus}]"
            )

    # -------------------------------------------------------------------------
    # Constructors
    # -------------------------------------------------------------------------

    @classmethod
    def constant(cls, domain: Domain, value: float, *, admits_one: bool = False) -> ExponentField:
        value = float(value)
        return cls(
            domain=domain,
            kind=ExponentKind.CONSTANT,
            parameters={"value": value},
            p_minus=value,
            p_plus=value,
            evaluator=lambda z: np.full(np.shape(z), value, dtype=float),
            admits_one=admits_one,
        )

    @classmethod
    def affine(
        cls,
        domain: Domain,
        intercept: float,
        slope: float,
        *,
        admits_one: bool = False,
    ) -> ExponentField:
        """p(z) = intercept + slope * z; extremes sit at the endpoints."""
        intercept, slope = float(intercept), float(slope)
        ends = (intercept + slope * domain.left, intercept + slope * domain.right)
        return cls(
            domain=domain,
            kind=ExponentKind.AFFINE,
            parameters={"intercept": intercept, "slope": slope},
            p_minus=min(ends),
            p_plus=max(ends),
            evaluator=lambda z: intercept + slope * np.asarray(z, dtype=float),
            admits_one=admits_one,
        )

    @classmethod
    def tabulated(
        cls,
        domain: Domain,
        grid: ArrayLike,
        values: ArrayLike,
        *,
        admits_one: bool = False,
    ) -> ExponentField:
        """Piecewise-linear interpolation of ``values`` at ``grid``.

        The grid must be strictly increasing and span the closed domain.
        Extremes of a piecewise-linear function are attained at grid points,
        so p_- and p_+ are exact.
        """
        grid_arr = np.array(grid, dtype=float)
        values_arr = np.array(values, dtype=float)
        if grid_arr.ndim != 1 or grid_arr.shape != values_arr.shape or grid_arr.size < 2:
            raise ExponentError("tabulated exponent needs matching 1-D grid/values of length >= 2")
        if np.any(np.diff(grid_arr) <= 0):
            raise ExponentError("tabulated exponent grid must be strictly increasing")
        if not (
            math.isclose(grid_arr[0], domain.left, abs_tol=1e-14)
            and math.isclose(grid_arr[-1], domain.right, abs_tol=1e-14)
        ):
            raise ExponentError("tabulated exponent grid must span the domain")
        grid_arr.setflags(write=False)
        values_arr.setflags(write=False)
        return cls(
            domain=domain,
            kind=ExponentKind.TABULATED,
            parameters={"grid": grid_arr.tolist(), "values": values_arr.tolist()},
            p_minus=float(values_arr.min()),
            p_plus=float(values_arr.max()),
            evaluator=lambda z: np.interp(np.asarray(z, dtype=float), grid_arr, values_arr),
            admits_one=admits_one,
        )

    # -------------------------------------------------------------------------
    # Evaluation
    # -------------------------------------------------------------------------

    def __call__(self, z: ArrayLike) -> FloatArray:
        return np.asarray(self.evaluator(np.asarray(z, dtype=float)), dtype=float)

    @property
    def is_constant(self) -> bool:
        return self.p_minus == self.p_plus

    def describe(self) -> dict[str, Any]:
        """Config-style record ``{kind, parameters}`` plus the extremes."""
        return {
            "kind": self.kind.value,
            "parameters": dict(self.parameters),
            "p_minus": self.p_minus,
            "p_plus": self.p_plus,
        }


@dataclass(frozen=True)
class ExtendedValues:
    """Pointwise values of an exponent that may be +inf.

    ``finite`` holds the value wherever ``infinite`` is False; entries under
    the mask are meaningless and must not be read.
    """

    finite: FloatArray
    infinite: NDArray[np.bool_]

    def as_float(self) -> FloatArray:
        """Float view with IEEE inf under the mask, for display only."""
        return np.where(self.infinite, np.inf, self.finite)


@dataclass(frozen=True, eq=False)
class ExtendedExponent:
    """An exponent with values in (1, inf], +inf carried as a tag."""

    domain: Domain
    finite_part: Callable[[FloatArray], FloatArray] = field(repr=False)
    infinite_part: Callable[[FloatArray], NDArray[np.bool_]] = field(repr=False)
    label: str = ""

    @classmethod
    def from_field(cls, p: ExponentField) -> ExtendedExponent:
        return cls(
            domain=p.domain,
            finite_part=p,
            infinite_part=lambda z: np.zeros(np.shape(z), dtype=bool),
            label=p.kind.value,
        )

    def evaluate(self, z: ArrayLike) -> ExtendedValues:
        z = np.asarray(z, dtype=float)
        infinite = np.asarray(self.infinite_part(z), dtype=bool)
        finite = np.where(infinite, 0.0, np.asarray(self.finite_part(z), dtype=float))
        return ExtendedValues(finite=finite, infinite=infinite)

    def divided_by(self, q: ExponentField) -> ExtendedExponent:
        """Pointwise self / q; +inf stays +inf since q is finite and positive."""
        finite_part = self.finite_part
        return ExtendedExponent(
            domain=self.domain,
            finite_part=lambda z: finite_part(z) / q(z),
            infinite_part=self.infinite_part,
            label=f"{self.label}/q",
        )

    def is_infinite_everywhere(self, samples: int = CHECK_SAMPLES) -> bool:
        return bool(np.all(self.infinite_part(self.domain.grid(samples))))


# =============================================================================
# Operations
# =============================================================================


def conjugate(p: ExponentField) -> ExponentField:
    """Pointwise conjugate q with 1/p + 1/q = 1.

    q is a decreasing function of p, so q_- = p_+/(p_+ - 1) and
    q_+ = p_-/(p_- - 1) are exact.

    Raises:
        ExponentError: If p_- <= 1 + 1e-12 (q would be unbounded)
    """
    if p.p_minus <= 1.0 + CONJUGATE_FLOOR:
        raise ExponentError(f"conjugate undefined: p_minus = {p.p_minus} is too close to 1")

    def evaluator(z: FloatArray) -> FloatArray:
        values = p(z)
        return values / (values - 1.0)

    return ExponentField(
        domain=p.domain,
        kind=ExponentKind.DERIVED,
        parameters={"conjugate_of": p.describe()},
        p_minus=p.p_plus / (p.p_plus - 1.0),
        p_plus=p.p_minus / (p.p_minus - 1.0),
        evaluator=evaluator,
    )


def sobolev_conjugate(p: ExponentField, dim: int = 1) -> ExtendedExponent:
    """p*(z) = dim p(z) / (dim - p(z)) where p(z) < dim, +inf elsewhere."""
    if dim < 1:
        raise ExponentError(f"dimension must be a positive integer, got {dim}")

    def finite_part(z: FloatArray) -> FloatArray:
        values = p(z)
        below = values < dim
        gap = np.where(below, dim - values, 1.0)
        return np.where(below, dim * values / gap, 0.0)

    return ExtendedExponent(
        domain=p.domain,
        finite_part=finite_part,
        infinite_part=lambda z: p(z) >= dim,
        label=f"sobolev(dim={dim})",
    )


@dataclass(frozen=True)
class BoundCheck:
    """Outcome of a strict pointwise comparison r < bound."""

    holds: bool
    margin: float  # min over samples of bound - r; inf if bound is inf everywhere
    witness: float | None = None  # sample point attaining the margin on failure


def strict_bound_check(
    r: ExponentField,
    bound: ExponentField | ExtendedExponent,
    samples: int = CHECK_SAMPLES,
) -> BoundCheck:
    """Check r(z) < bound(z) uniformly with a margin above ``STRICT_MARGIN``.

    Args:
        r: The exponent that must stay strictly below
        bound: A finite exponent or one that may be +inf
        samples: Number of grid points over the closed domain

    Returns:
        BoundCheck with the minimal margin and, on failure, a witness point
    """
    if isinstance(bound, ExponentField):
        bound = ExtendedExponent.from_field(bound)
    if r.domain != bound.domain:
        raise ExponentError("strict_bound_check needs both exponents on the same domain")

    z = r.domain.grid(samples)
    values = bound.evaluate(z)
    finite = ~values.infinite
    if not np.any(finite):
        return BoundCheck(holds=True, margin=math.inf)

    gaps = values.finite[finite] - r(z[finite])
    index = int(np.argmin(gaps))
    margin = float(gaps[index])
    if margin > STRICT_MARGIN:
        return BoundCheck(holds=True, margin=margin)
    witness = float(z[finite][index])
    logger.debug(f"strict bound fails at z={witness} with margin {margin:.3e}")
    return BoundCheck(holds=False, margin=margin, witness=witness)


@dataclass(frozen=True)
class OrderingReport:
    """Pointwise ordering between p, p*/q and p*."""

    dim: int
    sobolev_dominates: bool  # p* >= p everywhere sampled
    scaled_dominates: bool  # p*/q >= p wherever p* is finite
    min_scaled_gap: float  # min of p*/q - p over finite samples (inf if none)


def exponent_ordering(p: ExponentField, dim: int = 1, samples: int = CHECK_SAMPLES) -> OrderingReport:
    """Evaluate p* >= p and p*/q >= p on a sample grid.

    The second inequality holds exactly when p(z)^2 >= dim at points with
    p(z) < dim, so it is reported rather than assumed.
    """
    z = p.domain.grid(samples)
    star = sobolev_conjugate(p, dim).evaluate(z)
    scaled = sobolev_conjugate(p, dim).divided_by(conjugate(p)).evaluate(z)
    values = p(z)
    finite = ~star.infinite

    sobolev_ok = bool(np.all(star.finite[finite] >= values[finite] - EXTREME_TOLERANCE))
    if np.any(finite):
        gaps = scaled.finite[finite] - values[finite]
        min_gap = float(gaps.min())
    else:
        min_gap = math.inf
    return OrderingReport(
        dim=dim,
        sobolev_dominates=sobolev_ok,
        scaled_dominates=min_gap >= -EXTREME_TOLERANCE,
        min_scaled_gap=min_gap,
    )
