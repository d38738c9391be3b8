"""Semimodulars and Luxemburg norms of L^{p(.)} and W^{1,p(.)}.

The semimodular rho(u) = ∫ |u(z)|^{p(z)} dz is evaluated by Gauss-Legendre
quadrature on the mesh. The Luxemburg norm inf{λ > 0 : rho(u/λ) <= 1} is
found by bisection on the monotone map λ -> rho(u/λ). The same machinery
handles broken gradients (L^{p(.)}(Ω; R^N) with N = 1) and the summed
Sobolev semimodular rho(u) + rho(∇u).
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.typing import NDArray

from .exponent_field import ExponentField, conjugate
from .fem_mesh import (
    GradientField,
    MeshedFunction,
    QuadratureRule,
    SampledField,
    SobolevSample,
)

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
FieldLike = Union[MeshedFunction, GradientField, SampledField]
SobolevLike = Union[MeshedFunction, SobolevSample]

ZERO_THRESHOLD = 1e-15
NORM_TOLERANCE = 1e-10
BRACKET_WIDTH = 1e-11
BRACKET_GROWTH = 4.0
MAX_BISECTIONS = 400
INEQUALITY_SLACK = 1e-9
HOLDER_CONSTANT = 2.0


@dataclass(frozen=True)
class Modular:
    """Value of a semimodular (dimensionless, nonnegative)."""

    value: float

    @property
    def is_zero(self) -> bool:
        return self.value < ZERO_THRESHOLD

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class LuxemburgNorm:
    """Result of the Luxemburg bisection.

    Attributes:
        value: The norm
        iterations: Bisection steps taken (0 for the zero function)
        residual: rho(u / value) - 1 at the returned value
        is_zero: True when rho(u) fell below the zero threshold
    """

    value: float
    iterations: int = 0
    residual: float = 0.0
    is_zero: bool = False

    def __float__(self) -> float:
        return self.value


def as_sampled(u: FieldLike, rule: QuadratureRule) -> SampledField:
    if isinstance(u, SampledField):
        return u
    return u.sample(rule)


def as_sobolev(u: SobolevLike, rule: QuadratureRule) -> SobolevSample:
    if isinstance(u, SobolevSample):
        return u
    return u.sobolev_sample(rule)


class _ModularIntegrand:
    """Frozen quadrature data for rho(u / λ), reused across bisection steps."""

    def __init__(self, samples: list[SampledField], p: ExponentField) -> None:
        self.magnitudes = np.concatenate([np.abs(s.values).ravel() for s in samples])
        if not np.all(np.isfinite(self.magnitudes)):
            raise ValueError("field values must be finite")
        self.exponents = np.concatenate([p(s.points).ravel() for s in samples])
        self.weights = np.concatenate([s.weights.ravel() for s in samples])
        self.p_minus = p.p_minus
        self.p_plus = p.p_plus

    @property
    def peak(self) -> float:
        return float(np.max(self.magnitudes, initial=0.0))

    def __call__(self, scale: float = 1.0) -> float:
        with np.errstate(over="ignore"):
            return float(np.sum(self.weights * (self.magnitudes / scale) ** self.exponents))

    def normalized(self) -> _ModularIntegrand:
        """The same integrand for u / max|u|."""
        unit = copy.copy(self)
        unit.magnitudes = self.magnitudes / self.peak
        return unit


# =============================================================================
# Modular and norms
# =============================================================================


def modular(u: FieldLike, p: ExponentField, rule: QuadratureRule | None = None) -> Modular:
    """rho_{p(.)}(u) = ∫ |u(z)|^{p(z)} dz by quadrature.

    Args:
        u: A P1 function, a broken gradient, or an already sampled field
        p: Exponent on the same domain
        rule: Quadrature rule (default 5-point Gauss-Legendre)
    """
    rule = rule or QuadratureRule.gauss_legendre()
    return _finite_modular(_ModularIntegrand([as_sampled(u, rule)], p))


def _finite_modular(integrand: _ModularIntegrand) -> Modular:
    value = integrand()
    if not math.isfinite(value):
        raise ValueError(f"semimodular overflows (max|u| = {integrand.peak:.3e})")
    return Modular(value)


def _bisect(source: _ModularIntegrand) -> LuxemburgNorm:
    peak = source.peak
    if peak == 0.0 or source() < ZERO_THRESHOLD:
        return LuxemburgNorm(0.0, is_zero=True)

    # bisection runs on u / max|u|; the result is rescaled by max|u|
    integrand = source.normalized()
    rho = integrand()
    if not (math.isfinite(rho) and rho > 0.0):
        raise ValueError(f"semimodular of u / max|u| is {rho}")

    # ||u|| lies between rho^(1/p+) and rho^(1/p-) on either side of 1
    candidates = (rho ** (1.0 / integrand.p_minus), rho ** (1.0 / integrand.p_plus))
    lo, hi = min(candidates), max(candidates)
    while integrand(lo) <= 1.0:
        lo /= BRACKET_GROWTH
    while integrand(hi) > 1.0:
        hi *= BRACKET_GROWTH

    iterations = 0
    while hi - lo >= BRACKET_WIDTH * max(1.0, hi) and iterations < MAX_BISECTIONS:
        mid = 0.5 * (lo + hi)
        if integrand(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
        iterations += 1

    unit_value = 0.5 * (lo + hi)
    residual = integrand(unit_value) - 1.0
    value = peak * unit_value
    if abs(residual) > NORM_TOLERANCE:
        logger.debug(f"luxemburg residual {residual:.3e} after {iterations} bisections")
    return LuxemburgNorm(value=value, iterations=iterations, residual=residual)


def luxemburg_norm(u: FieldLike, p: ExponentField, rule: QuadratureRule | None = None) -> LuxemburgNorm:
    """‖u‖_{p(.)} = inf{λ > 0 : rho(u/λ) <= 1}.

    Returns a zero norm (``is_zero=True``) when rho(u) < 1e-15.
    """
    rule = rule or QuadratureRule.gauss_legendre()
    return _bisect(_ModularIntegrand([as_sampled(u, rule)], p))


def sobolev_modular(u: SobolevLike, p: ExponentField, rule: QuadratureRule | None = None) -> Modular:
    """rho(u) + rho(∇u)."""
    rule = rule or QuadratureRule.gauss_legendre()
    sample = as_sobolev(u, rule)
    return _finite_modular(_ModularIntegrand([sample.value, sample.gradient], p))


def sobolev_norm(u: SobolevLike, p: ExponentField, rule: QuadratureRule | None = None) -> LuxemburgNorm:
    """Luxemburg norm induced by the summed semimodular rho(u) + rho(∇u)."""
    rule = rule or QuadratureRule.gauss_legendre()
    sample = as_sobolev(u, rule)
    return _bisect(_ModularIntegrand([sample.value, sample.gradient], p))


# =============================================================================
# Inequality checks
# =============================================================================


@dataclass(frozen=True)
class HolderCheck:
    """∫|u||v| against 2 ‖u‖_{p(.)} ‖v‖_{q(.)}."""

    lhs: float
    rhs: float
    holds: bool

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def holder_pairing_bound(
    u: FieldLike,
    v: FieldLike,
    p: ExponentField,
    rule: QuadratureRule | None = None,
) -> HolderCheck:
    """Hölder's inequality with the constant 2 for conjugate p, q."""
    rule = rule or QuadratureRule.gauss_legendre()
    su, sv = as_sampled(u, rule), as_sampled(v, rule)
    lhs = float(np.sum(su.weights * np.abs(su.values) * np.abs(sv.values)))
    q = conjugate(p)
    rhs = HOLDER_CONSTANT * luxemburg_norm(su, p, rule).value * luxemburg_norm(sv, q, rule).value
    return HolderCheck(lhs=lhs, rhs=rhs, holds=lhs <= rhs + INEQUALITY_SLACK)


@dataclass(frozen=True)
class NormModularReport:
    """Two-sided bounds between ‖u‖ and rho(u) on the applicable branch.

    For ‖u‖ >= 1: ‖u‖^{p-} <= rho <= ‖u‖^{p+}; otherwise the exponents swap.
    """

    norm: float
    modular: float
    lower: float
    upper: float
    branch: str  # "unit-or-above" | "below-unit"

    @property
    def lower_slack(self) -> float:
        return self.modular - self.lower

    @property
    def upper_slack(self) -> float:
        return self.upper - self.modular

    @property
    def holds(self) -> bool:
        allowance = INEQUALITY_SLACK * max(1.0, self.modular)
        return self.lower_slack >= -allowance and self.upper_slack >= -allowance


def norm_modular_relations(
    u: FieldLike,
    p: ExponentField,
    rule: QuadratureRule | None = None,
) -> NormModularReport:
    """Evaluate both one-sided norm-modular inequalities for u."""
    rule = rule or QuadratureRule.gauss_legendre()
    sample = as_sampled(u, rule)
    rho = modular(sample, p, rule).value
    norm = luxemburg_norm(sample, p, rule).value
    if norm >= 1.0:
        lower, upper, branch = norm**p.p_minus, norm**p.p_plus, "unit-or-above"
    else:
        lower, upper, branch = norm**p.p_plus, norm**p.p_minus, "below-unit"
    report = NormModularReport(norm=norm, modular=rho, lower=lower, upper=upper, branch=branch)
    if not report.holds:
        logger.warning(
            f"norm-modular relation violated: norm={norm:.6e} rho={rho:.6e} "
            f"bounds=[{lower:.6e}, {upper:.6e}]"
        )
    return report


def l2_pairing(u: FieldLike, v: FieldLike, rule: QuadratureRule | None = None) -> float:
    """∫ u v dz on a common mesh."""
    rule = rule or QuadratureRule.gauss_legendre()
    su, sv = as_sampled(u, rule), as_sampled(v, rule)
    return float(np.sum(su.weights * su.values * sv.values))


def classical_norm(u: FieldLike, exponent: float, rule: QuadratureRule | None = None) -> float:
    """(∫|u|^p)^{1/p} for a constant exponent, from the same quadrature."""
    rule = rule or QuadratureRule.gauss_legendre()
    sample = as_sampled(u, rule)
    integral = float(np.sum(sample.weights * np.abs(sample.values) ** exponent))
    return math.pow(integral, 1.0 / exponent)
