"""Experiment configuration files.

A configuration is a YAML mapping; every section is optional except
``command``. Unknown keys and unresolvable names are rejected at load
time with the line they appear on.

Example::

    command: converge
    seed: 0
    output: results/laplacian
    exponent: {kind: constant, parameters: {value: 2.0}}
    kernel: {label: laplacian}
    rhs: {name: constant, parameters: {value: 2.0}}
    exact: {name: parabola}
    mesh: {levels: 6}
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, TypeVar

import yaml

from . import closed_forms
from .errors import ConfigError, ExponentError, UnknownLabelError
from .exponent_field import Domain, ExponentField, ExponentKind
from .galerkin import PAIRING_TOLERANCE, SolverSettings
from .operator_kernel import available_kernels

COMMANDS = ("norm", "check-kernel", "solve", "converge", "splus-probe")
SEQUENCES = ("galerkin", "oscillation")

T = TypeVar("T")

_KIND_NAMES: dict[Any, str] = {int: "an integer", float: "a number"}


@dataclass(frozen=True)
class DomainSpec:
    left: float = 0.0
    right: float = 1.0

    def build(self) -> Domain:
        return Domain(self.left, self.right)


@dataclass(frozen=True)
class ExponentSpec:
    """Exponent field by kind.

    Attributes:
        kind: constant (value), affine (intercept, slope) or tabulated
            (grid, values)
        parameters: Kind-specific parameters
    """

    kind: str = "constant"
    parameters: dict[str, Any] = field(default_factory=lambda: {"value": 2.0})

    def build(self, domain: Domain) -> ExponentField:
        params = dict(self.parameters)
        try:
            if self.kind == ExponentKind.CONSTANT.value:
                return ExponentField.constant(domain, float(params.pop("value")))
            if self.kind == ExponentKind.AFFINE.value:
                return ExponentField.affine(
                    domain, float(params.pop("intercept")), float(params.pop("slope"))
                )
            if self.kind == ExponentKind.TABULATED.value:
                return ExponentField.tabulated(domain, params.pop("grid"), params.pop("values"))
        except KeyError as exc:
            raise ExponentError(f"{self.kind} exponent needs parameter {exc}") from None
        raise ExponentError(f"unknown exponent kind '{self.kind}'")


@dataclass(frozen=True)
class KernelSpec:
    label: str = "laplacian"
    parameters: dict[str, float] = field(default_factory=dict)
    samples: int = 10_000


@dataclass(frozen=True)
class NamedFunctionSpec:
    """A closed-form function by name."""

    name: str
    parameters: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class MeshSpec:
    """Mesh levels.

    Attributes:
        levels: Finest level L (solve, converge) or evaluation level (norm)
        reference_level: Self-referencing solve level for converge
        quadrature: Gauss-Legendre points per element
    """

    levels: int = 6
    reference_level: int | None = None
    quadrature: int = 5


@dataclass(frozen=True)
class Tolerances:
    newton: float = 1e-10
    max_iterations: int = 100
    max_halvings: int = 30
    pairing: float = PAIRING_TOLERANCE

    def solver_settings(self) -> SolverSettings:
        return SolverSettings(
            tolerance=self.newton,
            max_iterations=self.max_iterations,
            max_halvings=self.max_halvings,
        )


@dataclass(frozen=True)
class ProbeSpec:
    """S+ probe settings.

    Attributes:
        sequence: galerkin or oscillation
        frequencies: Oscillation schedule
        level: Evaluation mesh level for oscillation sequences
        windows: Window sizes of the uniform-integrability profile
    """

    sequence: str = "oscillation"
    frequencies: tuple[int, ...] = (4, 8, 16, 32)
    level: int = 8
    windows: tuple[float, ...] = (0.5, 0.25, 0.125, 0.0625)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment.

    Attributes:
        command: norm, check-kernel, solve, converge or splus-probe
        seed: Seed of every pseudo-random draw
        output: Directory receiving CSV/JSON artifacts
        rhs: Load density (or point load) for solve/converge/galerkin probes
        exact: Exact solution for manufactured problems
        function: Input of the norm command
        source: File the configuration was read from
    """

    command: str
    seed: int = 0
    output: Path = Path("results")
    domain: DomainSpec = field(default_factory=DomainSpec)
    exponent: ExponentSpec = field(default_factory=ExponentSpec)
    kernel: KernelSpec = field(default_factory=KernelSpec)
    rhs: NamedFunctionSpec = field(default_factory=lambda: NamedFunctionSpec("constant", {"value": 1.0}))
    exact: NamedFunctionSpec | None = None
    function: NamedFunctionSpec = field(default_factory=lambda: NamedFunctionSpec("constant", {"value": 1.0}))
    mesh: MeshSpec = field(default_factory=MeshSpec)
    tolerances: Tolerances = field(default_factory=Tolerances)
    probe: ProbeSpec = field(default_factory=ProbeSpec)
    source: Path | None = None

    def with_overrides(self, *, seed: int | None = None, output: Path | None = None) -> ExperimentConfig:
        """Apply command-line overrides."""
        changes: dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = seed
        if output is not None:
            changes["output"] = Path(output)
        return replace(self, **changes) if changes else self

    def to_dict(self) -> dict[str, Any]:
        """Resolved configuration as plain data (for ``show`` and summaries)."""
        data: dict[str, Any] = {
            "command": self.command,
            "seed": self.seed,
            "output": str(self.output),
            "domain": {"left": self.domain.left, "right": self.domain.right},
            "exponent": {"kind": self.exponent.kind, "parameters": dict(self.exponent.parameters)},
            "kernel": {
                "label": self.kernel.label,
                "parameters": dict(self.kernel.parameters),
                "samples": self.kernel.samples,
            },
            "rhs": {"name": self.rhs.name, "parameters": dict(self.rhs.parameters)},
            "function": {"name": self.function.name, "parameters": dict(self.function.parameters)},
            "mesh": {
                "levels": self.mesh.levels,
                "reference_level": self.mesh.reference_level,
                "quadrature": self.mesh.quadrature,
            },
            "tolerances": {
                "newton": self.tolerances.newton,
                "max_iterations": self.tolerances.max_iterations,
                "max_halvings": self.tolerances.max_halvings,
                "pairing": self.tolerances.pairing,
            },
            "probe": {
                "sequence": self.probe.sequence,
                "frequencies": list(self.probe.frequencies),
                "level": self.probe.level,
                "windows": list(self.probe.windows),
            },
        }
        if self.exact is not None:
            data["exact"] = {"name": self.exact.name, "parameters": dict(self.exact.parameters)}
        return data


# =============================================================================
# Loading
# =============================================================================

_SECTIONS: dict[str, tuple[str, ...]] = {
    "domain": ("left", "right"),
    "kernel": ("label", "parameters", "samples"),
    "rhs": ("name", "parameters"),
    "exact": ("name", "parameters"),
    "function": ("name", "parameters"),
    "mesh": ("levels", "reference_level", "quadrature"),
    "tolerances": ("newton", "max_iterations", "max_halvings", "pairing"),
    "probe": ("sequence", "frequencies", "level", "windows"),
}
_TOP_LEVEL = ("command", "seed", "output", "exponent", *_SECTIONS)


def _key_lines(node: yaml.Node | None, prefix: str = "") -> dict[str, int]:
    """1-based line of every mapping key, addressed as dotted paths."""
    lines: dict[str, int] = {}
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            path = f"{prefix}{key_node.value}"
            lines[path] = key_node.start_mark.line + 1
            lines.update(_key_lines(value_node, f"{path}."))
    return lines


class _Loader:
    def __init__(self, data: dict[str, Any], lines: dict[str, int], path: Path | None) -> None:
        self.data = data
        self.lines = lines
        self.path = path

    def error(self, message: str, key: str | None = None) -> ConfigError:
        return ConfigError(message, self.path, self.lines.get(key) if key else None)

    def section(self, name: str) -> dict[str, Any]:
        value = self.data.get(name) or {}
        if not isinstance(value, dict):
            raise self.error(f"section '{name}' must be a mapping", name)
        allowed = _SECTIONS.get(name)
        if allowed is not None:
            for key in value:
                if key not in allowed:
                    raise self.error(f"unknown key '{name}.{key}'", f"{name}.{key}")
        return value

    def named(
        self, name: str, library: list[str], build: Callable[[str, dict[str, Any]], object]
    ) -> NamedFunctionSpec | None:
        if name not in self.data:
            return None
        section = self.section(name)
        if "name" not in section:
            raise self.error(f"section '{name}' needs a 'name'", name)
        label = str(section["name"])
        if label not in library:
            raise self.error(
                str(UnknownLabelError(name, label, library)), f"{name}.name"
            )
        parameters = section.get("parameters") or {}
        if not isinstance(parameters, dict):
            raise self.error(f"{name}.parameters must be a mapping", f"{name}.parameters")
        try:
            build(label, dict(parameters))
        except (TypeError, ValueError) as exc:
            raise self.error(f"invalid {name} '{label}': {exc}", f"{name}.parameters") from None
        return NamedFunctionSpec(label, dict(parameters))

    def convert(self, key: str, raw: Any, kind: Callable[[Any], T]) -> T:
        """``kind(raw)``; a failed conversion is reported at ``key``'s line."""
        try:
            return kind(raw)
        except (TypeError, ValueError):
            expected = _KIND_NAMES.get(kind, "a valid value")
            raise self.error(f"'{key}' must be {expected}, got {raw!r}", key) from None


def _exponent_spec(loader: _Loader) -> ExponentSpec:
    """``exponent: {kind, parameters: {...}}``; the flat ``{kind, value}`` form is also accepted."""
    section = loader.section("exponent")
    if not section:
        return ExponentSpec()
    kind = str(section.get("kind", ExponentKind.CONSTANT.value))
    if "parameters" in section:
        extra = sorted(str(key) for key in section if key not in ("kind", "parameters"))
        if extra:
            raise loader.error(f"unknown key 'exponent.{extra[0]}'", f"exponent.{extra[0]}")
        parameters = section["parameters"] or {}
        if not isinstance(parameters, dict):
            raise loader.error("exponent.parameters must be a mapping", "exponent.parameters")
        prefix = "exponent.parameters"
    else:
        parameters = {key: value for key, value in section.items() if key != "kind"}
        prefix = "exponent"
    resolved: dict[str, Any] = {}
    for key, value in parameters.items():
        if isinstance(value, list):
            resolved[str(key)] = loader.convert(
                f"{prefix}.{key}", value, lambda values: [float(v) for v in values]
            )
        else:
            resolved[str(key)] = loader.convert(f"{prefix}.{key}", value, float)
    return ExponentSpec(kind, resolved)


def parse_config(text: str, path: Path | None = None) -> ExperimentConfig:
    """Parse and validate configuration text.

    Raises:
        ConfigError: With ``path:line`` when the location is known
    """
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(
            f"invalid YAML: {getattr(exc, 'problem', None) or exc}",
            path,
            mark.line + 1 if mark is not None else None,
        ) from None
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping", path, 1)

    loader = _Loader(data, _key_lines(node), path)
    for key in data:
        if key not in _TOP_LEVEL:
            raise loader.error(f"unknown key '{key}'", str(key))

    command = data.get("command")
    if command not in COMMANDS:
        raise loader.error(
            f"command must be one of {', '.join(COMMANDS)}, got {command!r}", "command"
        )

    domain_section = loader.section("domain")
    domain_spec = DomainSpec(
        loader.convert("domain.left", domain_section.get("left", 0.0), float),
        loader.convert("domain.right", domain_section.get("right", 1.0), float),
    )

    exponent_spec = _exponent_spec(loader)

    kernel_section = loader.section("kernel")
    kernel_parameters = kernel_section.get("parameters") or {}
    if not isinstance(kernel_parameters, dict):
        raise loader.error("kernel.parameters must be a mapping", "kernel.parameters")
    kernel_spec = KernelSpec(
        label=str(kernel_section.get("label", "laplacian")),
        parameters={
            str(k): loader.convert(f"kernel.parameters.{k}", v, float)
            for k, v in kernel_parameters.items()
        },
        samples=loader.convert("kernel.samples", kernel_section.get("samples", 10_000), int),
    )
    if kernel_spec.label not in available_kernels():
        raise loader.error(
            str(UnknownLabelError("kernel", kernel_spec.label, available_kernels())), "kernel.label"
        )

    rhs = loader.named("rhs", closed_forms.density_names(), closed_forms.right_hand_side)
    exact = loader.named("exact", closed_forms.function_names(), closed_forms.function)
    function = loader.named("function", closed_forms.function_names(), closed_forms.function)

    mesh_section = loader.section("mesh")
    reference = mesh_section.get("reference_level")
    mesh_spec = MeshSpec(
        levels=loader.convert("mesh.levels", mesh_section.get("levels", 6), int),
        reference_level=(
            loader.convert("mesh.reference_level", reference, int) if reference is not None else None
        ),
        quadrature=loader.convert("mesh.quadrature", mesh_section.get("quadrature", 5), int),
    )

    tol_section = loader.section("tolerances")
    tolerances = Tolerances(
        newton=loader.convert("tolerances.newton", tol_section.get("newton", 1e-10), float),
        max_iterations=loader.convert(
            "tolerances.max_iterations", tol_section.get("max_iterations", 100), int
        ),
        max_halvings=loader.convert(
            "tolerances.max_halvings", tol_section.get("max_halvings", 30), int
        ),
        pairing=loader.convert(
            "tolerances.pairing", tol_section.get("pairing", PAIRING_TOLERANCE), float
        ),
    )

    probe_section = loader.section("probe")
    probe = ProbeSpec(
        sequence=str(probe_section.get("sequence", "oscillation")),
        frequencies=loader.convert(
            "probe.frequencies",
            probe_section.get("frequencies", (4, 8, 16, 32)),
            lambda values: tuple(int(n) for n in values),
        ),
        level=loader.convert("probe.level", probe_section.get("level", 8), int),
        windows=loader.convert(
            "probe.windows",
            probe_section.get("windows", (0.5, 0.25, 0.125, 0.0625)),
            lambda values: tuple(float(w) for w in values),
        ),
    )
    if probe.sequence not in SEQUENCES:
        raise loader.error(
            f"probe.sequence must be one of {', '.join(SEQUENCES)}, got '{probe.sequence}'",
            "probe.sequence",
        )

    config = ExperimentConfig(
        command=str(command),
        seed=loader.convert("seed", data.get("seed", 0), int),
        output=Path(str(data.get("output", "results"))),
        domain=domain_spec,
        exponent=exponent_spec,
        kernel=kernel_spec,
        rhs=rhs or NamedFunctionSpec("constant", {"value": 1.0}),
        exact=exact,
        function=function or NamedFunctionSpec("constant", {"value": 1.0}),
        mesh=mesh_spec,
        tolerances=tolerances,
        probe=probe,
        source=path,
    )

    try:
        domain = config.domain.build()
    except ExponentError as exc:
        raise loader.error(f"invalid domain: {exc}", "domain") from None
    try:
        config.exponent.build(domain)
    except (ExponentError, ValueError, TypeError) as exc:
        raise loader.error(f"invalid exponent: {exc}", "exponent") from None
    if config.rhs.name == closed_forms.POINT_LOAD:
        location = float(config.rhs.parameters.get("location", 0.5))
        if not domain.left <= location <= domain.right:
            raise loader.error(
                f"point load at {location} lies outside [{domain.left}, {domain.right}]",
                "rhs.parameters",
            )
    return config


def load_config(path: Path | str) -> ExperimentConfig:
    """Read and validate a configuration file.

    Raises:
        ConfigError: If the file is unreadable or invalid
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc.strerror}", path) from None
    return parse_config(text, path)


SAMPLE_CONFIGS: dict[str, str] = {
    "norm": """\
# Luxemburg and Sobolev norms of a closed-form function
command: norm
exponent: {kind: affine, parameters: {intercept: 2.0, slope: 1.0}}   # p(z) = 2 + z
function: {name: constant, parameters: {value: 1.0}}
mesh: {levels: 6}
output: results/norm
""",
    "check-kernel": """\
# Sampled growth (A1), monotonicity (A2) and coercivity (A3) checks
command: check-kernel
seed: 0
exponent: {kind: constant, parameters: {value: 2.0}}
kernel: {label: negated-laplacian, samples: 10000}
output: results/check-kernel
""",
    "solve": """\
# One Galerkin solve; writes the nodal solution as z,u
command: solve
exponent: {kind: constant, parameters: {value: 2.0}}
kernel: {label: laplacian}
rhs: {name: constant, parameters: {value: 2.0}}
mesh: {levels: 6}
output: results/solve
""",
    "converge": """\
# Convergence study on levels 0..L
command: converge
exponent: {kind: constant, parameters: {value: 2.0}}
kernel: {label: laplacian}
rhs: {name: constant, parameters: {value: 2.0}}
exact: {name: parabola}
mesh: {levels: 6}
tolerances: {newton: 1.0e-10, max_iterations: 100, max_halvings: 30}
output: results/converge
""",
    "splus-probe": """\
# S+ probe along an oscillating sequence sin(n pi z)/(n pi)
command: splus-probe
exponent: {kind: constant, parameters: {value: 2.0}}
kernel: {label: laplacian}
probe: {sequence: oscillation, frequencies: [4, 8, 16, 32], level: 8}
output: results/splus-probe
""",
}
