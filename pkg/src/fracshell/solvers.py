"""Linear solves and incremental-load Newton-Raphson continuation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.sparse.linalg import LinearOperator, cg

from .errors import ConfigError, DivergenceError, NonConvergenceError, SingularSystemError

logger = logging.getLogger(__name__)

# above this many free DOFs the linear solver falls back to preconditioned CG
DIRECT_LIMIT = 20000


@dataclass(frozen=True)
class SolverConfig:
    """Newton-Raphson controls.

    ``load_steps`` is either a step count (uniform increments up to 1) or an
    explicit, strictly increasing schedule of load factors in ``(0, inf)``.
    """

    residual_tolerance: float = 1e-6
    max_iterations: int = 25
    load_steps: int | tuple[float, ...] = 10
    divergence_threshold: float = 1e3

    def __post_init__(self) -> None:
        if not self.residual_tolerance > 0.0:
            raise ConfigError("residual tolerance must be positive")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be at least 1")
        if not self.divergence_threshold > 1.0:
            raise ConfigError("divergence threshold must exceed 1")
        self.schedule()

    def schedule(self) -> np.ndarray:
        if isinstance(self.load_steps, (int, np.integer)):
            if self.load_steps < 1:
                raise ConfigError("load_steps must be at least 1")
            return np.arange(1, self.load_steps + 1) / self.load_steps
        steps = np.asarray(self.load_steps, dtype=float)
        if steps.ndim != 1 or steps.size < 1:
            raise ConfigError("load schedule must be a nonempty list")
        if steps[0] < 0.0 or np.any(np.diff(steps) <= 0.0):
            raise ConfigError("load schedule must be non-negative and strictly increasing")
        return steps


# ---------------------------------------------------------------------------
# linear solve
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearSolution:
    u: np.ndarray
    relative_residual: float
    method: str


def _factorize(K: np.ndarray, diagnostics: dict | None = None, overwrite: bool = False):
    try:
        return cho_factor(K, lower=False, overwrite_a=overwrite, check_finite=True)
    except LinAlgError as exc:
        diag = dict(diagnostics or {})
        d = np.diag(K)
        diag.update(n=int(K.shape[0]), min_diagonal=float(d.min()) if d.size else None)
        raise SingularSystemError(
            f"constrained stiffness is not positive definite ({exc}); check the constraint set", diag
        ) from exc


def _cg(K: np.ndarray, F: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    d = np.diag(K).copy()
    if np.any(d <= 0.0):
        raise SingularSystemError("non-positive diagonal entry; cannot precondition", {"n": int(K.shape[0])})
    M = LinearOperator(K.shape, matvec=lambda x: x / d)
    u, info = cg(K, F, rtol=tol, maxiter=10 * K.shape[0], M=M)
    if info != 0:
        raise SingularSystemError("conjugate gradients did not converge", {"info": int(info)})
    return u


def solve_linear(system, method: str = "auto") -> LinearSolution:
    """Solve a constrained system ``K u = F``.

    ``system`` is any object with ``K`` and ``F`` arrays (and optionally
    ``diagnostics``). ``method`` is ``"cholesky"``, ``"cg"`` or ``"auto"``.
    """
    K, F = system.K, system.F
    if method == "auto":
        method = "cholesky" if K.shape[0] <= DIRECT_LIMIT else "cg"
    if method == "cholesky":
        u = cho_solve(_factorize(K, getattr(system, "diagnostics", None)), F)
    elif method == "cg":
        u = _cg(K, F)
    else:
        raise ConfigError(f"unknown linear solver {method!r}")
    norm_f = np.linalg.norm(F)
    res = np.linalg.norm(K @ u - F)
    rel = float(res / norm_f) if norm_f > 0.0 else float(res)
    if rel > 1e-10:
        logger.warning("linear residual %.3e exceeds 1e-10", rel)
    return LinearSolution(u=u, relative_residual=rel, method=method)


# ---------------------------------------------------------------------------
# Newton-Raphson continuation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathRecord:
    load_factor: float
    state: np.ndarray
    iterations: int
    residual: float
    residual_history: tuple[float, ...]
    q_bar: float | None = None
    w_center: float | None = None
    w_bar: float | None = None

    @property
    def convergence_ratio(self) -> float | None:
        """``r_k / r_{k-1}`` over the last two iterations (small means quadratic)."""
        h = self.residual_history
        if len(h) < 2 or h[-2] == 0.0:
            return None
        return h[-1] / h[-2]


@dataclass
class EquilibriumPath:
    records: list[PathRecord] = field(default_factory=list)

    def append(self, record: PathRecord) -> None:
        if self.records and not record.load_factor > self.records[-1].load_factor:
            raise ValueError("load factors along a path must increase strictly")
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def load_factors(self) -> np.ndarray:
        return np.array([r.load_factor for r in self.records])

    @property
    def final_state(self) -> np.ndarray | None:
        return self.records[-1].state if self.records else None


@dataclass
class NewtonProblem:
    """Callbacks defining a nonlinear problem on the free DOFs.

    ``residual_and_tangent(u, lam)`` returns ``(R, K_T)`` with
    ``R = F_int(u) - lam F_ext``; ``F_ext`` is the reference load.
    ``energy(u)`` is optional and only used for logging. The optional
    ``residual(u, lam)`` skips the tangent on convergence checks. The
    returned tangent is consumed (overwritten) by the factorization.
    """

    residual_and_tangent: Callable[[np.ndarray, float], tuple[np.ndarray, np.ndarray]]
    F_ext: np.ndarray
    energy: Callable[[np.ndarray], float] | None = None
    describe: Callable[[float, np.ndarray], dict] | None = None
    residual: Callable[[np.ndarray, float], np.ndarray] | None = None


def newton_raphson(
    problem: NewtonProblem,
    config: SolverConfig = SolverConfig(),
    u0: np.ndarray | None = None,
) -> EquilibriumPath:
    """Incremental Newton-Raphson over the load schedule of ``config``.

    Each step starts from the previous converged state. Convergence is
    declared when ``|R| / |lam F_ext|`` drops below the tolerance; the
    reference norm falls back to ``|F_ext|`` at zero load.
    """
    F_ext = np.asarray(problem.F_ext, dtype=float)
    norm_ext = float(np.linalg.norm(F_ext))
    if norm_ext == 0.0:
        norm_ext = 1.0
    u = np.zeros_like(F_ext) if u0 is None else np.array(u0, dtype=float)
    path = EquilibriumPath()
    for step, lam in enumerate(config.schedule(), start=1):
        ref = abs(lam) * norm_ext if lam != 0.0 else norm_ext
        history: list[float] = []
        r0 = None
        converged = False
        for it in range(1, config.max_iterations + 1):
            if problem.residual is not None:
                R, K_T = problem.residual(u, float(lam)), None
            else:
                R, K_T = problem.residual_and_tangent(u, float(lam))
            rel = float(np.linalg.norm(R) / ref)
            history.append(rel)
            if not math.isfinite(rel):
                raise DivergenceError(f"non-finite residual at step {step}", path)
            if logger.isEnabledFor(logging.INFO):
                energy = problem.energy(u) if problem.energy is not None else float("nan")
                logger.info("step=%d iter=%d load_factor=%.6g residual=%.6e energy=%.10e", step, it, lam, rel, energy)
            if r0 is None:
                r0 = max(rel, config.residual_tolerance)
            elif rel > config.divergence_threshold * r0:
                raise DivergenceError(
                    f"residual grew by more than {config.divergence_threshold:g}x at load factor {lam:g} "
                    "(possible instability)",
                    path,
                )
            if rel < config.residual_tolerance:
                converged = True
                break
            if K_T is None:
                R, K_T = problem.residual_and_tangent(u, float(lam))
            try:
                factor = _factorize(K_T, {"step": step, "iteration": it}, overwrite=True)
            except SingularSystemError as exc:
                raise DivergenceError(
                    f"tangent stiffness lost positive definiteness at load factor {lam:g} "
                    "(limit point or bifurcation)",
                    path,
                ) from exc
            du = cho_solve(factor, R)
            u = u - du
        if not converged:
            raise NonConvergenceError(
                f"no convergence in {config.max_iterations} iterations at load factor {lam:g} "
                f"(residual {history[-1]:.3e})",
                path,
            )
        extra = problem.describe(float(lam), u) if problem.describe is not None else {}
        path.append(
            PathRecord(
                load_factor=float(lam),
                state=u.copy(),
                iterations=len(history),
                residual=history[-1],
                residual_history=tuple(history),
                **extra,
            )
        )
    return path


def convergence_ratios(path: EquilibriumPath) -> list[float | None]:
    return [r.convergence_ratio for r in path]


def interpolate_path(path: EquilibriumPath, load_factors: Sequence[float], key=lambda r: r.w_center):
    """Linear interpolation of a scalar path quantity at given load factors."""
    lf = path.load_factors
    vals = np.array([key(r) for r in path])
    return np.interp(load_factors, lf, vals)
