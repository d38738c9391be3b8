"""Exception hierarchy for varexp-splus.

Numerical verdicts (kernel checks, S+ probes, convergence monotonicity) are
reported in result objects, never raised. Exceptions are reserved for
invalid inputs and solver breakdowns.
"""

from __future__ import annotations

from pathlib import Path


class VarExpError(Exception):
    """Base class for all library errors."""


class ExponentError(VarExpError, ValueError):
    """An exponent field violates 1 < p_- <= p_+ < inf or is otherwise invalid."""


class MeshMismatchError(VarExpError, ValueError):
    """Two meshed objects do not live on nested meshes."""


class KernelRegistrationError(VarExpError, ValueError):
    """A kernel's declared growth data is inadmissible for an exponent."""


class UnknownLabelError(VarExpError, KeyError):
    """A kernel label or closed-form name does not resolve."""

    def __init__(self, kind: str, label: str, known: list[str]) -> None:
        self.kind = kind
        self.label = label
        self.known = known
        super().__init__(f"unknown {kind} '{label}' (known: {', '.join(sorted(known))})")

    def __str__(self) -> str:
        # KeyError would otherwise repr() the message
        return str(self.args[0])


class AliasingError(VarExpError, ValueError):
    """An oscillating sequence member cannot be represented on the mesh."""


class SolverError(VarExpError):
    """Base class for Newton solver failures."""


class NonConvergenceError(SolverError):
    """Newton iteration hit its iteration cap."""

    def __init__(self, iterations: int, residual: float, level: int | None = None) -> None:
        self.iterations = iterations
        self.residual = residual
        self.level = level
        where = f" on level {level}" if level is not None else ""
        super().__init__(
            f"Newton did not converge{where} after {iterations} iterations "
            f"(last residual {residual:.3e})"
        )


class SingularJacobianError(SolverError):
    """A tridiagonal pivot fell below the singularity threshold."""

    def __init__(self, index: int, pivot: float, level: int | None = None) -> None:
        self.index = index
        self.pivot = pivot
        self.level = level
        where = f" on level {level}" if level is not None else ""
        super().__init__(f"singular Jacobian{where}: pivot {index} = {pivot:.3e}")


class ConfigError(VarExpError):
    """An experiment configuration could not be parsed or validated."""

    def __init__(self, message: str, path: Path | str | None = None, line: int | None = None):
        self.message = message
        self.path = Path(path) if path is not None else None
        self.line = line
        super().__init__(self.diagnostic())

    def diagnostic(self) -> str:
        """Format as ``path:line: message`` with whatever location is known."""
        location = ""
        if self.path is not None:
            location = str(self.path)
            if self.line is not None:
                location += f":{self.line}"
            location += ": "
        return f"{location}{self.message}"
