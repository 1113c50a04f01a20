"""Exception hierarchy.

Every exception carries a short ``category`` string used by the CLI as a
machine-readable error tag.
"""

from __future__ import annotations


class FracShellError(Exception):
    category = "error"


class DomainError(FracShellError, ValueError):
    """A parameter lies outside the domain of an operator."""

    category = "domain"


class DegenerateIntervalError(DomainError):
    category = "degenerate-interval"


class ShapeError(FracShellError, ValueError):
    """Sample arrays do not match the requested horizon."""

    category = "shape"


class ConfigError(FracShellError, ValueError):
    category = "config"


class AssemblyError(FracShellError):
    category = "assembly"


class SingularSystemError(FracShellError):
    """The constrained stiffness could not be factorized."""

    category = "singular-system"

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NonConvergenceError(FracShellError):
    """Newton iterations hit the iteration cap; ``path`` holds converged steps."""

    category = "non-convergence"

    def __init__(self, message: str, path=None):
        super().__init__(message)
        self.path = path


class DivergenceError(NonConvergenceError):
    """Residual grew past the divergence threshold (likely instability)."""

    category = "divergence"


class MissingPairError(FracShellError):
    """A normalized deflection was requested without the paired local result."""

    category = "missing-local-pair"
