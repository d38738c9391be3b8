"""Named closed-form functions: load densities, exact solutions, norm inputs.

Configurations refer to these by name plus parameters, so every
manufactured problem keeps its provenance explicit. Formulas are written
in the coordinate z of the unit interval.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .errors import UnknownLabelError
from .fem_mesh import AnalyticFunction
from .operator_kernel import DensityLoad, PointLoad, RightHandSide

FloatArray = NDArray[np.float64]
Factory = Callable[..., AnalyticFunction]


def _constant(value: float = 1.0) -> AnalyticFunction:
    return AnalyticFunction(
        lambda z: np.full(np.shape(z), float(value)),
        lambda z: np.zeros(np.shape(z)),
        name=f"constant({value})",
    )


def _zero() -> AnalyticFunction:
    return _constant(0.0)


def _linear(slope: float = 1.0, intercept: float = 0.0) -> AnalyticFunction:
    return AnalyticFunction(
        lambda z: slope * np.asarray(z) + intercept,
        lambda z: np.full(np.shape(z), float(slope)),
        name=f"linear({slope}, {intercept})",
    )


def _parabola(scale: float = 1.0) -> AnalyticFunction:
    """scale · z(1 - z), zero at both ends of the unit interval."""
    return AnalyticFunction(
        lambda z: scale * np.asarray(z) * (1.0 - np.asarray(z)),
        lambda z: scale * (1.0 - 2.0 * np.asarray(z)),
        name=f"parabola({scale})",
    )


def _sine(amplitude: float = 1.0, frequency: float = 1.0) -> AnalyticFunction:
    k = frequency * np.pi
    return AnalyticFunction(
        lambda z: amplitude * np.sin(k * np.asarray(z)),
        lambda z: amplitude * k * np.cos(k * np.asarray(z)),
        name=f"sine({amplitude}, {frequency})",
    )


def _abs_linear(scale: float = 1.0) -> AnalyticFunction:
    return AnalyticFunction(lambda z: scale * np.abs(1.0 - 2.0 * np.asarray(z)), name=f"abs-linear({scale})")


def _manufactured_parabola(exponent: float = 2.0) -> AnalyticFunction:
    """f = -(|u'|^{p-2} u')' for u = z(1 - z), i.e. 2(p - 1)|1 - 2z|^{p-2}."""
    if exponent < 2.0:
        raise ValueError(f"manufactured-parabola needs exponent >= 2, got {exponent}")
    return AnalyticFunction(
        lambda z: 2.0 * (exponent - 1.0) * np.abs(1.0 - 2.0 * np.asarray(z)) ** (exponent - 2.0),
        name=f"manufactured-parabola({exponent})",
    )


FUNCTIONS: dict[str, Factory] = {
    "constant": _constant,
    "zero": _zero,
    "linear": _linear,
    "parabola": _parabola,
    "sine": _sine,
}

DENSITIES: dict[str, Factory] = {
    "constant": _constant,
    "zero": _zero,
    "abs-linear": _abs_linear,
    "manufactured-parabola": _manufactured_parabola,
    "sine": _sine,
}

POINT_LOAD = "point"


def _lookup(library: Mapping[str, Factory], kind: str, name: str, parameters: Mapping[str, Any]) -> AnalyticFunction:
    try:
        factory = library[name]
    except KeyError:
        raise UnknownLabelError(kind, name, sorted(library)) from None
    try:
        return factory(**{key: float(value) for key, value in parameters.items()})
    except TypeError as exc:
        raise ValueError(f"bad parameters for {kind} '{name}': {exc}") from None


def function(name: str, parameters: Mapping[str, Any] | None = None) -> AnalyticFunction:
    """A named function with its derivative (exact solutions, norm inputs)."""
    return _lookup(FUNCTIONS, "function", name, parameters or {})


def density(name: str, parameters: Mapping[str, Any] | None = None) -> AnalyticFunction:
    """A named load density."""
    return _lookup(DENSITIES, "density", name, parameters or {})


def right_hand_side(name: str, parameters: Mapping[str, Any] | None = None) -> RightHandSide:
    """A density load by name, or a point load for ``point``."""
    parameters = dict(parameters or {})
    if name == POINT_LOAD:
        location = float(parameters.pop("location", 0.5))
        magnitude = float(parameters.pop("magnitude", 1.0))
        if parameters:
            raise ValueError(f"unknown point-load parameters: {sorted(parameters)}")
        return PointLoad(location=location, magnitude=magnitude)
    source = density(name, parameters)
    return DensityLoad(source, name=source.name)


def density_names() -> list[str]:
    return sorted([*DENSITIES, POINT_LOAD])


def function_names() -> list[str]:
    return sorted(FUNCTIONS)
