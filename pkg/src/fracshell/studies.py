"""Case configuration, study drivers and result emission.

A case runs mesh -> horizon map -> assembly -> solve. The normalized
deflection ``w_bar`` divides the centre deflection by that of a local
(``alpha = 1``) panel on the identical mesh, which every case runs
automatically unless asked not to.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .assembly import (
    BoundarySpec,
    LoadSpec,
    PanelModel,
    apply_boundary_conditions,
    assemble_linear,
    assemble_load,
)
from .errors import ConfigError, DivergenceError, FracShellError, MissingPairError
from .mesh import DOFS_PER_NODE, PanelGeometry, StructuredMesh, build_mesh, dynamic_rate, elements_for_rate
from .shell import IsotropicMaterial, check_rotations
from .solvers import EquilibriumPath, NewtonProblem, SolverConfig, newton_raphson, solve_linear

logger = logging.getLogger(__name__)

MIN_RATE = 10.0


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def _radius(value) -> float:
    if value is None or (isinstance(value, str) and value.lower() in ("inf", "infinite", "infinity")):
        return math.inf
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"radius must be a number or 'infinite', got {value!r}") from None


@dataclass(frozen=True)
class GeometryConfig:
    a: float = 1.0
    b: float = 1.0
    h: float | None = None  # a / 10
    R: float | None = None  # 10 a; math.inf for a plate

    def build(self) -> PanelGeometry:
        h = self.a / 10.0 if self.h is None else self.h
        R = 10.0 * self.a if self.R is None else self.R
        return PanelGeometry(self.a, self.b, h, R)

    def to_dict(self) -> dict:
        g = self.build()
        return {"a": g.a, "b": g.b, "h": g.h, "R": "infinite" if math.isinf(g.R) else g.R}


@dataclass(frozen=True)
class MaterialConfig:
    E: float = 30e6
    nu: float = 0.3
    K_s: float = 5.0 / 6.0

    def build(self) -> IsotropicMaterial:
        return IsotropicMaterial(self.E, self.nu, self.K_s)


@dataclass(frozen=True)
class FractionalConfig:
    alpha: float = 1.0
    l_f: float | None = None  # 0.5 a
    retain_F_r: bool = False


@dataclass(frozen=True)
class MeshConfig:
    n1: int | None = None
    n2: int | None = None
    dynamic_rate: float = MIN_RATE


@dataclass(frozen=True)
class LoadConfig:
    """Either ``q0`` (force per area) or ``q_bar`` (nondimensional) sets the magnitude."""

    q0: float | None = None
    q_bar: float | None = 100.0
    direction: str = "+e3"


@dataclass(frozen=True)
class AnalysisConfig:
    kind: str = "linear"
    quadrature: str = "selective"

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "nonlinear"):
            raise ConfigError(f"analysis must be 'linear' or 'nonlinear', got {self.kind!r}")


_SECTIONS = {
    "geometry": GeometryConfig,
    "material": MaterialConfig,
    "fractional": FractionalConfig,
    "mesh": MeshConfig,
    "load": LoadConfig,
    "analysis": AnalysisConfig,
    "solver": SolverConfig,
}


@dataclass(frozen=True)
class CaseConfig:
    """A complete case; every section falls back to the reference values."""

    geometry: GeometryConfig = GeometryConfig()
    material: MaterialConfig = MaterialConfig()
    fractional: FractionalConfig = FractionalConfig()
    mesh: MeshConfig = MeshConfig()
    bc: str = "CCCC"
    load: LoadConfig = LoadConfig()
    analysis: AnalysisConfig = AnalysisConfig()
    solver: SolverConfig = SolverConfig()

    def __post_init__(self) -> None:
        BoundarySpec(self.bc)

    # -- construction ------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "CaseConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(data) - set(_SECTIONS) - {"bc", "sweep", "study"}
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        kwargs: dict[str, Any] = {}
        for name, klass in _SECTIONS.items():
            section = data.get(name, {})
            if not isinstance(section, dict):
                raise ConfigError(f"section {name!r} must be an object")
            names = {f.name for f in dataclasses.fields(klass)}
            bad = set(section) - names
            if bad:
                raise ConfigError(f"unknown keys in {name!r}: {sorted(bad)}")
            section = dict(section)
            if name == "geometry" and "R" in section:
                section["R"] = _radius(section["R"])
            if name == "solver" and isinstance(section.get("load_steps"), list):
                section["load_steps"] = tuple(section["load_steps"])
            try:
                kwargs[name] = klass(**section)
            except TypeError as exc:
                raise ConfigError(f"invalid {name!r} section: {exc}") from None
        if "bc" in data:
            kwargs["bc"] = data["bc"]
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "CaseConfig":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        """Fully resolved echo (defaults filled in) that round-trips through ``from_dict``."""
        out = {}
        for name in _SECTIONS:
            section = dataclasses.asdict(getattr(self, name))
            if name == "solver" and isinstance(section["load_steps"], tuple):
                section["load_steps"] = list(section["load_steps"])
            out[name] = section
        out["geometry"] = self.geometry.to_dict()
        out["fractional"]["l_f"] = self.l_f
        out["load"] = {"q0": self.q0, "q_bar": self.q_bar, "direction": self.load.direction}
        n1, n2 = self.element_counts()
        out["mesh"] = {"n1": n1, "n2": n2, "dynamic_rate": self.mesh.dynamic_rate}
        out["bc"] = self.bc
        return out

    def replace(self, **changes) -> "CaseConfig":
        """Copy with nested overrides, e.g. ``replace(fractional={"alpha": 0.8})``."""
        kwargs = {}
        for key, value in changes.items():
            if key == "bc":
                kwargs[key] = value
            elif isinstance(value, dict):
                kwargs[key] = dataclasses.replace(getattr(self, key), **value)
            else:
                kwargs[key] = value
        return dataclasses.replace(self, **kwargs)

    # -- resolved quantities -------------------------------------------------

    @property
    def panel(self) -> PanelGeometry:
        return self.geometry.build()

    @property
    def l_f(self) -> float:
        return 0.5 * self.geometry.a if self.fractional.l_f is None else float(self.fractional.l_f)

    @property
    def q0(self) -> float:
        g = self.panel
        if self.load.q0 is not None:
            return float(self.load.q0)
        if self.load.q_bar is None:
            raise ConfigError("load needs either q0 or q_bar")
        return load_from_q_bar(self.load.q_bar, self.material.E, g.h, g.a)

    @property
    def q_bar(self) -> float:
        g = self.panel
        return q_bar_of(self.q0, self.material.E, g.h, g.a)

    def element_counts(self) -> tuple[int, int]:
        m = self.mesh
        if (m.n1 is None) != (m.n2 is None):
            raise ConfigError("give both n1 and n2, or neither")
        if m.n1 is not None:
            return int(m.n1), int(m.n2)
        g = self.panel
        return (
            elements_for_rate(g.a, self.l_f, m.dynamic_rate),
            elements_for_rate(g.b, self.l_f, m.dynamic_rate),
        )

    def build_mesh(self) -> StructuredMesh:
        n1, n2 = self.element_counts()
        mesh = build_mesh(self.panel, n1, n2)
        if self.fractional.alpha < 1.0:
            rate = min(dynamic_rate(self.l_f, mesh.le1), dynamic_rate(self.l_f, mesh.le2))
            if rate < MIN_RATE:
                warnings.warn(f"dynamic rate {rate:.3g} is below {MIN_RATE:g}; results may be unconverged", stacklevel=2)
        return mesh


# ---------------------------------------------------------------------------
# nondimensional quantities
# ---------------------------------------------------------------------------


def q_bar_of(q0: float, E: float, h: float, L: float) -> float:
    """Nondimensional load ``q0 L^4 / (E h^4)`` with ``L`` the panel length ``a``."""
    return q0 * L**4 / (E * h**4)


def load_from_q_bar(q_bar: float, E: float, h: float, L: float) -> float:
    return q_bar * E * h**4 / L**4


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------


@dataclass
class PathPoint:
    load_factor: float
    q_bar: float
    w_center: float
    w_local: float | None
    w_bar: float | None
    iterations: int
    residual: float
    max_rotation: float


@dataclass
class ResultRecord:
    config: dict
    w_center: float | None
    w_local: float | None
    q_bar: float
    mesh: dict
    timing: dict
    diagnostics: dict
    path: list[PathPoint] = field(default_factory=list)
    state: np.ndarray | None = field(default=None, repr=False)
    error: dict | None = None

    @property
    def w_bar(self) -> float | None:
        if self.w_center is None or self.w_local is None:
            return None
        return nondimensionalize(self)[0]

    def to_dict(self, include_state: bool = False) -> dict:
        out = {
            "config": self.config,
            "w_center": self.w_center,
            "w_local": self.w_local,
            "w_bar": self.w_bar,
            "q_bar": self.q_bar,
            "mesh": self.mesh,
            "timing": self.timing,
            "diagnostics": self.diagnostics,
            "path": [dataclasses.asdict(p) for p in self.path],
            "error": self.error,
        }
        if include_state and self.state is not None:
            out["state"] = self.state.tolist()
        return out


def nondimensionalize(record: ResultRecord) -> tuple[float, float]:
    """``(w_bar, q_bar)`` of a record; requires the paired local deflection."""
    if record.w_local is None or record.w_center is None:
        raise MissingPairError("no paired local result; w_bar is undefined")
    if record.config["fractional"]["alpha"] == 1.0:
        return 1.0, record.q_bar
    if record.w_local == 0.0:
        raise MissingPairError("paired local deflection is zero; w_bar is undefined")
    return record.w_center / record.w_local, record.q_bar


# ---------------------------------------------------------------------------
# single case
# ---------------------------------------------------------------------------


def build_model(config: CaseConfig, alpha: float | None = None, mesh: StructuredMesh | None = None) -> PanelModel:
    alpha = config.fractional.alpha if alpha is None else alpha
    mesh = config.build_mesh() if mesh is None else mesh
    return PanelModel.build(
        config.panel,
        config.material.build(),
        mesh.n1,
        mesh.n2,
        alpha,
        config.l_f if alpha < 1.0 else None,
        nonlinear=config.analysis.kind == "nonlinear",
        retain_f_r=config.fractional.retain_F_r,
        quadrature_rule=config.analysis.quadrature,
    )


@dataclass
class Solution:
    """Raw output of one model: a final state and, for nonlinear runs, the path."""

    state: np.ndarray
    path: EquilibriumPath | None
    diagnostics: dict
    error: FracShellError | None = None


def _max_rotation(U: np.ndarray) -> float:
    return float(np.max(np.abs(np.r_[U[3::DOFS_PER_NODE], U[4::DOFS_PER_NODE]]), initial=0.0))


def solve_model(model: PanelModel, config: CaseConfig, allow_divergence: bool = False) -> Solution:
    bc = BoundarySpec(config.bc)
    load = LoadSpec(config.q0, config.load.direction)
    centre = DOFS_PER_NODE * model.mesh.center_node + 2
    diag: dict = {"f_theta": model.ops.f_theta, "f_r": model.ops.f_r, "notes": list(model.ops.horizon_map.notes)}
    if config.analysis.kind == "linear":
        system = assemble_linear(model, load)
        constrained = apply_boundary_conditions(system, bc, model.mesh)
        sol = solve_linear(constrained)
        U = constrained.expand(sol.u)
        work = 0.5 * float(U @ system.F_ext)
        energy = model.strain_energy(U)
        diag.update(
            relative_residual=sol.relative_residual,
            linear_solver=sol.method,
            symmetry_error=system.symmetry_error(),
            energy_balance=abs(work - energy) / abs(work) if work else 0.0,
        )
        return Solution(U, None, diag)

    free = bc.dof_map(model.mesh).free
    F = assemble_load(model.mesh, load)
    n = model.n_dofs

    def full(u):
        U = np.zeros(n)
        U[free] = u
        return U

    def residual_and_tangent(u, lam):
        F_int, K_T = model.internal_force_and_tangent(full(u))
        return F_int[free] - lam * F[free], K_T[np.ix_(free, free)]

    def residual(u, lam):
        return model.internal_force(full(u))[free] - lam * F[free]

    def describe(lam, u):
        U = full(u)
        return {"q_bar": lam * config.q_bar, "w_center": float(U[centre])}

    problem = NewtonProblem(
        residual_and_tangent,
        F[free],
        energy=lambda u: model.strain_energy(full(u)),
        describe=describe,
        residual=residual,
    )
    error = None
    try:
        path = newton_raphson(problem, config.solver)
    except DivergenceError as exc:
        if not allow_divergence:
            raise
        path, error = exc.path, exc
    path_states = [dataclasses.replace(r, state=full(r.state)) for r in path]
    path = EquilibriumPath(path_states)
    diag["iterations"] = [r.iterations for r in path]
    diag["convergence_ratio"] = [r.convergence_ratio for r in path]
    U = path.final_state if len(path) else np.zeros(n)
    if len(path):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            diag["max_rotation"] = check_rotations(U[3::DOFS_PER_NODE], U[4::DOFS_PER_NODE])
        if caught:
            logger.warning("%s", caught[0].message)
    return Solution(U, path, diag, error)


def _record(config: CaseConfig, mesh: StructuredMesh, sol: Solution, local: Solution | None, timing: dict) -> ResultRecord:
    centre = DOFS_PER_NODE * mesh.center_node + 2
    alpha = config.fractional.alpha
    if local is None and alpha == 1.0:
        local = sol
    w_local = None if local is None else float(local.state[centre])
    points = []
    if sol.path is not None:
        local_w = {}
        if local is not None and local.path is not None:
            local_w = {r.load_factor: r.w_center for r in local.path}
        for r in sol.path:
            wl = local_w.get(r.load_factor)
            if alpha == 1.0:
                wb = 1.0
            else:
                wb = None if wl in (None, 0.0) else r.w_center / wl
            points.append(
                PathPoint(r.load_factor, r.q_bar, r.w_center, wl, wb, r.iterations, r.residual, _max_rotation(r.state))
            )
        if local is not None and local.path is not None and len(local.path) < len(sol.path):
            w_local = None
    diagnostics = dict(sol.diagnostics)
    if local is not None and local is not sol:
        diagnostics["local"] = local.diagnostics
    error = None
    for tag, s in (("case", sol), ("local", local)):
        if s is not None and s.error is not None:
            error = {"category": s.error.category, "message": str(s.error), "branch": tag}
    if error is not None:
        w_center = None
    else:
        w_center = float(sol.state[centre])
    meta = mesh.summary()
    meta["dynamic_rate"] = config.l_f / mesh.le1 if alpha < 1.0 else None
    return ResultRecord(
        config=config.to_dict(),
        w_center=w_center,
        w_local=w_local if error is None else None,
        q_bar=config.q_bar,
        mesh=meta,
        timing=timing,
        diagnostics=diagnostics,
        path=points,
        state=sol.state,
        error=error,
    )


def _local_key(config: CaseConfig, mesh: StructuredMesh) -> str:
    d = config.to_dict()
    d.pop("fractional")
    d["mesh"] = [mesh.n1, mesh.n2]
    return json.dumps(d, sort_keys=True)


def run_case(
    config: CaseConfig,
    pair_local: bool = True,
    local_cache: dict | None = None,
    allow_divergence: bool = False,
) -> ResultRecord:
    """Run one case and, for ``alpha < 1``, its local twin on the same mesh."""
    t0 = time.perf_counter()
    try:
        mesh = config.build_mesh()
        model = build_model(config, mesh=mesh)
        t1 = time.perf_counter()
        sol = solve_model(model, config, allow_divergence)
        t2 = time.perf_counter()
        local = None
        if pair_local and config.fractional.alpha < 1.0:
            key = _local_key(config, mesh)
            if local_cache is not None and key in local_cache:
                local = local_cache[key]
            else:
                local = solve_model(build_model(config, alpha=1.0, mesh=mesh), config, allow_divergence)
                if local_cache is not None:
                    local_cache[key] = local
    except FracShellError as exc:
        exc.args = (f"{exc} [case: alpha={config.fractional.alpha}, l_f={config.l_f}, bc={config.bc}]",)
        raise
    t3 = time.perf_counter()
    timing = {"build": t1 - t0, "solve": t2 - t1, "local": t3 - t2, "total": t3 - t0}
    return _record(config, mesh, sol, local, timing)


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------


def _map(fn, items: Sequence, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def sweep(
    base: CaseConfig, alphas: Iterable[float], l_fs: Iterable[float], threads: int = 1
) -> list[ResultRecord]:
    """Cartesian product of ``alpha`` and ``l_f``; failures are kept per row.

    Local twins are shared between cases that resolve to the same mesh.
    """
    alphas, l_fs = list(alphas), list(l_fs)
    if not alphas or not l_fs:
        raise ConfigError("sweep lists must be nonempty")
    cases = [base.replace(fractional={"alpha": a, "l_f": l}) for a in alphas for l in l_fs]
    cache: dict = {}

    def one(case: CaseConfig) -> ResultRecord:
        try:
            return run_case(case, local_cache=cache)
        except FracShellError as exc:
            logger.error("case alpha=%s l_f=%s failed: %s", case.fractional.alpha, case.l_f, exc)
            return ResultRecord(
                config=case.to_dict(),
                w_center=None,
                w_local=None,
                q_bar=case.q_bar,
                mesh={},
                timing={},
                diagnostics={},
                error={"category": exc.category, "message": str(exc)},
            )

    return _map(one, cases, threads)


def relative_l1_difference(coarse: np.ndarray, fine: np.ndarray, a: float, b: float) -> float:
    """``sum|w_f - w_c| / sum|w_c|`` with the fine field interpolated to the coarse nodes."""
    xc = (np.linspace(0, a, coarse.shape[0]), np.linspace(0, b, coarse.shape[1]))
    xf = (np.linspace(0, a, fine.shape[0]), np.linspace(0, b, fine.shape[1]))
    X1, X2 = np.meshgrid(*xc, indexing="ij")
    f = RegularGridInterpolator(xf, fine)(np.column_stack([X1.ravel(), X2.ravel()])).reshape(coarse.shape)
    denom = np.sum(np.abs(coarse))
    return float(np.sum(np.abs(f - coarse)) / denom) if denom > 0.0 else float(np.sum(np.abs(f)))


@dataclass
class ConvergenceRow:
    dynamic_rate: float
    n1: int
    n2: int
    n_dofs: int
    w_center: float
    rel_l1_difference: float | None
    time: float


def convergence_study(config: CaseConfig, rates: Sequence[float]) -> list[ConvergenceRow]:
    """Same case at increasing dynamic rates.

    The reported difference compares each rate with the previous one; for
    nonlinear runs it is the largest difference over the shared load steps.
    """
    rates = list(rates)
    if not rates or any(b < a for a, b in zip(rates, rates[1:])):
        raise ConfigError("dynamic rates must be nonempty and ascending")
    rows: list[ConvergenceRow] = []
    prev_fields = None
    g = config.panel
    for rate in rates:
        case = config.replace(mesh={"n1": None, "n2": None, "dynamic_rate": rate})
        t0 = time.perf_counter()
        mesh = case.build_mesh()
        sol = solve_model(build_model(case, mesh=mesh), case)
        states = [sol.state] if sol.path is None else [r.state for r in sol.path]
        fields = [s[2::DOFS_PER_NODE].reshape(mesh.shape) for s in states]
        diff = None
        if prev_fields is not None:
            diff = max(relative_l1_difference(c, f, g.a, g.b) for c, f in zip(prev_fields, fields))
        rows.append(
            ConvergenceRow(
                float(rate), mesh.n1, mesh.n2, mesh.n_dofs,
                float(sol.state[DOFS_PER_NODE * mesh.center_node + 2]), diff, time.perf_counter() - t0,
            )
        )
        prev_fields = fields
    return rows


@dataclass
class CurvatureRow:
    R: float
    direction: str
    alpha: float
    load_factor: float
    q_bar: float
    w_center: float
    w_local: float | None
    ratio: float | None
    gap: float | None
    status: str


def curvature_study(
    config: CaseConfig, radii: Sequence[float], directions: Sequence[str] = ("+e3", "-e3"), threads: int = 1
) -> list[CurvatureRow]:
    """Paired local and nonlocal paths per radius and load direction.

    ``ratio = w_nonlocal / w_local`` and ``gap = |w_nonlocal| - |w_local|``
    at each shared load factor. A diverging branch is reported with status
    ``"divergence"`` after its last converged step.
    """
    if config.analysis.kind != "nonlinear":
        raise ConfigError("the curvature study needs a nonlinear analysis")
    combos = [(R, d) for R in radii for d in directions]

    def one(combo):
        R, d = combo
        case = config.replace(geometry={"R": _radius(R)}, load={"direction": d})
        rec = run_case(case, allow_divergence=True)
        rows = [
            CurvatureRow(
                _radius(R), d, case.fractional.alpha, p.load_factor, p.q_bar, p.w_center, p.w_local,
                p.w_bar, None if p.w_local is None else abs(p.w_center) - abs(p.w_local), "converged",
            )
            for p in rec.path
        ]
        if rec.error is not None:
            last = rows[-1] if rows else None
            rows.append(
                CurvatureRow(
                    _radius(R), d, case.fractional.alpha, math.nan if last is None else last.load_factor,
                    math.nan, math.nan, None, None, None, rec.error["category"],
                )
            )
        return rows

    return [row for rows in _map(one, combos, threads) for row in rows]


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17e}"
    return str(value)


CASE_COLUMNS = (
    "case_id", "alpha", "l_f", "bc", "R", "analysis", "n1", "n2", "q_bar",
    "w_center", "w_local", "w_bar", "time", "error",
)
PATH_COLUMNS = ("case_id", "load_factor", "q_bar", "w_center", "w_local", "w_bar", "iterations", "residual")


def case_row(case_id: int, record: ResultRecord) -> dict:
    cfg = record.config
    return {
        "case_id": case_id,
        "alpha": cfg["fractional"]["alpha"],
        "l_f": cfg["fractional"]["l_f"],
        "bc": cfg["bc"],
        "R": cfg["geometry"]["R"],
        "analysis": cfg["analysis"]["kind"],
        "n1": cfg["mesh"]["n1"],
        "n2": cfg["mesh"]["n2"],
        "q_bar": record.q_bar,
        "w_center": record.w_center,
        "w_local": record.w_local,
        "w_bar": record.w_bar,
        "time": record.timing.get("total"),
        "error": None if record.error is None else record.error["category"],
    }


def write_csv(path: str | Path, rows: Iterable[dict], columns: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])
    return path


def write_json(path: str | Path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, default=_json_default))
    return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_records(out_dir: str | Path, stem: str, records: Sequence[ResultRecord], meta: dict | None = None) -> dict:
    """One CSV row per case, a long-format path CSV, and a JSON sidecar."""
    out_dir = Path(out_dir)
    files = {"cases": write_csv(out_dir / f"{stem}.csv", (case_row(i, r) for i, r in enumerate(records)), CASE_COLUMNS)}
    path_rows = [
        {"case_id": i, **dataclasses.asdict(p)} for i, r in enumerate(records) for p in r.path
    ]
    if path_rows:
        files["path"] = write_csv(out_dir / f"{stem}_path.csv", path_rows, PATH_COLUMNS)
    sidecar = {"meta": meta or {}, "records": [r.to_dict() for r in records]}
    files["json"] = write_json(out_dir / f"{stem}.json", sidecar)
    return files
