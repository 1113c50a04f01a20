"""Panel geometry, structured quadrilateral meshes and nonlocal horizon maps.

Nodes are numbered ``p = i * (n2 + 1) + j`` with ``i`` counting along x1 and
``j`` along x2, so nodal arrays reshape to ``(n1 + 1, n2 + 1)`` grids. Each
node carries five generalized displacements (u0, v0, w0, theta0, phi0) at
global indices ``5 * p + field``.

Quadrature points of every rule form tensor grids (one set of x1 coordinates
times one set of x2 coordinates). The horizon map stores, per direction, the
fractional-derivative rows and linear-interpolation rows for those
coordinates. The operator at point (k, l) is the outer combination of the
x1 row k and the x2 row l.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DomainError
from .frac_calc import DiscreteFracStencil, stencil_matrix

logger = logging.getLogger(__name__)

FIELDS = ("u0", "v0", "w0", "theta0", "phi0")
DOFS_PER_NODE = len(FIELDS)

SHALLOW_LIMIT = 0.05


@dataclass(frozen=True)
class PanelGeometry:
    """Shallow cylindrical panel; ``R = inf`` is a flat plate."""

    a: float
    b: float
    h: float
    R: float = math.inf

    def __post_init__(self) -> None:
        for name in ("a", "b", "h"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise DomainError(f"{name} must be positive and finite, got {value!r}")
        if not self.R > 0.0:
            raise DomainError(f"radius must be positive or infinite, got {self.R!r}")
        if self.h / self.R > SHALLOW_LIMIT:
            warnings.warn(
                f"h/R = {self.h / self.R:.3g} exceeds {SHALLOW_LIMIT}; "
                "the shallow-shell kinematics lose accuracy",
                stacklevel=2,
            )

    @property
    def curvature(self) -> float:
        return 0.0 if math.isinf(self.R) else 1.0 / self.R


@dataclass(frozen=True)
class StructuredMesh:
    geometry: PanelGeometry
    n1: int
    n2: int

    @property
    def le1(self) -> float:
        return self.geometry.a / self.n1

    @property
    def le2(self) -> float:
        return self.geometry.b / self.n2

    @property
    def shape(self) -> tuple[int, int]:
        """Nodal grid shape ``(n1 + 1, n2 + 1)``."""
        return self.n1 + 1, self.n2 + 1

    @property
    def n_nodes(self) -> int:
        return (self.n1 + 1) * (self.n2 + 1)

    @property
    def n_elements(self) -> int:
        return self.n1 * self.n2

    @property
    def n_dofs(self) -> int:
        return DOFS_PER_NODE * self.n_nodes

    @cached_property
    def x1(self) -> np.ndarray:
        return np.linspace(0.0, self.geometry.a, self.n1 + 1)

    @cached_property
    def x2(self) -> np.ndarray:
        return np.linspace(0.0, self.geometry.b, self.n2 + 1)

    @cached_property
    def coords(self) -> np.ndarray:
        X1, X2 = np.meshgrid(self.x1, self.x2, indexing="ij")
        return np.column_stack([X1.ravel(), X2.ravel()])

    def node_id(self, i, j):
        return np.asarray(i) * (self.n2 + 1) + np.asarray(j)

    @cached_property
    def connectivity(self) -> np.ndarray:
        """Counterclockwise node lists ``(e, 4)``, elements numbered ``ei * n2 + ej``."""
        I, J = np.meshgrid(np.arange(self.n1), np.arange(self.n2), indexing="ij")
        I, J = I.ravel(), J.ravel()
        return np.column_stack(
            [
                self.node_id(I, J),
                self.node_id(I + 1, J),
                self.node_id(I + 1, J + 1),
                self.node_id(I, J + 1),
            ]
        )

    def edge_nodes(self, edge: str) -> np.ndarray:
        """Nodes on ``"x1=0"``, ``"x1=a"``, ``"x2=0"`` or ``"x2=b"``."""
        n1, n2 = self.n1, self.n2
        if edge == "x1=0":
            return self.node_id(0, np.arange(n2 + 1))
        if edge == "x1=a":
            return self.node_id(n1, np.arange(n2 + 1))
        if edge == "x2=0":
            return self.node_id(np.arange(n1 + 1), 0)
        if edge == "x2=b":
            return self.node_id(np.arange(n1 + 1), n2)
        raise ValueError(f"unknown edge {edge!r}")

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        edges = [self.edge_nodes(e) for e in ("x1=0", "x1=a", "x2=0", "x2=b")]
        return np.unique(np.concatenate(edges))

    @property
    def center_node(self) -> int:
        """Node nearest the panel centre (exact for even element counts)."""
        return int(self.node_id(int(round(self.n1 / 2)), int(round(self.n2 / 2))))

    def summary(self) -> dict:
        return {
            "n1": self.n1,
            "n2": self.n2,
            "nodes": self.n_nodes,
            "elements": self.n_elements,
            "dofs": self.n_dofs,
            "le1": self.le1,
            "le2": self.le2,
        }


def build_mesh(geometry: PanelGeometry, n1: int, n2: int) -> StructuredMesh:
    if int(n1) != n1 or int(n2) != n2 or n1 < 2 or n2 < 2:
        raise DomainError(f"element counts must be integers >= 2, got ({n1}, {n2})")
    return StructuredMesh(geometry, int(n1), int(n2))


def dynamic_rate(l_f: float, element_size: float) -> float:
    """Ratio of horizon length to element size."""
    if not (l_f > 0.0 and element_size > 0.0):
        raise DomainError("horizon and element size must be positive")
    return l_f / element_size


def elements_for_rate(extent: float, l_f: float, rate: float, even: bool = True) -> int:
    """Smallest element count along ``extent`` reaching the target dynamic rate."""
    if not (l_f > 0.0 and rate > 0.0):
        raise DomainError("horizon and dynamic rate must be positive")
    n = max(2, math.ceil(rate * extent / l_f - 1e-9))
    if even and n % 2:
        n += 1
    return n


def mesh_for_rate(geometry: PanelGeometry, l_f: float, rate: float) -> StructuredMesh:
    return build_mesh(
        geometry,
        elements_for_rate(geometry.a, l_f, rate),
        elements_for_rate(geometry.b, l_f, rate),
    )


@dataclass(frozen=True)
class DofMap:
    """Global numbering of the five nodal DOFs and the constrained set."""

    n_nodes: int
    constrained: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def n_dofs(self) -> int:
        return DOFS_PER_NODE * self.n_nodes

    def dof(self, node, field_name: str | int):
        k = FIELDS.index(field_name) if isinstance(field_name, str) else int(field_name)
        return DOFS_PER_NODE * np.asarray(node) + k

    def node_dofs(self, node) -> np.ndarray:
        return DOFS_PER_NODE * np.asarray(node)[..., None] + np.arange(DOFS_PER_NODE)

    @cached_property
    def free(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.constrained] = False
        return np.flatnonzero(mask)


# ---------------------------------------------------------------------------
# quadrature and horizon maps
# ---------------------------------------------------------------------------

MEMBRANE, BENDING, SHEAR = "membrane", "bending", "shear"


def gauss_points_1d(nodes: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points and physical weights on every interval of ``nodes``."""
    xi, wi = np.polynomial.legendre.leggauss(order)
    left, right = nodes[:-1], nodes[1:]
    half = 0.5 * (right - left)
    pts = (0.5 * (left + right))[:, None] + half[:, None] * xi[None, :]
    wts = half[:, None] * wi[None, :]
    return pts.ravel(), wts.ravel()


def interpolation_matrix(nodes: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Rows of 1D linear shape functions of ``nodes`` evaluated at ``points``."""
    h = nodes[1] - nodes[0]
    n = nodes.size - 1
    j = np.clip(np.floor((points - nodes[0]) / h).astype(int), 0, n - 1)
    t = (points - nodes[j]) / h
    rows = np.zeros((points.size, nodes.size))
    k = np.arange(points.size)
    rows[k, j] = 1.0 - t
    rows[k, j + 1] = t
    return rows


@dataclass(frozen=True)
class QuadratureSet:
    """A tensor grid of quadrature points and its 1D operator factors.

    ``D*`` rows give RC derivatives, ``N*`` rows give linear interpolation;
    ``h*`` hold the truncated horizons ``(l_minus, l_plus)`` per coordinate.
    """

    name: str
    groups: tuple[str, ...]
    x1: np.ndarray
    x2: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    N1: np.ndarray
    N2: np.ndarray
    h1: np.ndarray
    h2: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.x1.size, self.x2.size

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.w1, self.w2)

    def factor(self, direction: int, kind: str) -> np.ndarray:
        if direction == 1:
            return self.D1 if kind == "D" else self.N1
        return self.D2 if kind == "D" else self.N2


@dataclass(frozen=True)
class HorizonMap:
    mesh: StructuredMesh
    alpha: float
    l_f: float | None
    rule: str
    sets: tuple[QuadratureSet, ...]
    notes: tuple[str, ...] = ()

    def points(self):
        """Yield ``(set_index, k, l, (x1, x2))`` for every quadrature point."""
        for s, qs in enumerate(self.sets):
            for k, x1 in enumerate(qs.x1):
                for l, x2 in enumerate(qs.x2):
                    yield s, k, l, (float(x1), float(x2))

    def horizons(self, s: int, k: int, l: int):
        qs = self.sets[s]
        return tuple(qs.h1[k]), tuple(qs.h2[l])

    def stencils(self, s: int, k: int, l: int) -> tuple[DiscreteFracStencil, DiscreteFracStencil]:
        """Per-direction stencils at a point, indexed by 1D grid nodes along x1 / x2."""
        qs = self.sets[s]
        out = []
        for row, pos in ((qs.D1[k], qs.x1[k]), (qs.D2[l], qs.x2[l])):
            support = np.flatnonzero(row)
            out.append(DiscreteFracStencil(None, support, row[support], float(pos)))
        return tuple(out)


QUADRATURE_RULES = ("selective", "full")


def _quadrature_set(mesh, name, groups, order, alpha, l_f) -> QuadratureSet:
    x1, w1 = gauss_points_1d(mesh.x1, order)
    x2, w2 = gauss_points_1d(mesh.x2, order)
    D1, h1 = stencil_matrix(mesh.x1, x1, alpha, l_f)
    D2, h2 = stencil_matrix(mesh.x2, x2, alpha, l_f)
    return QuadratureSet(
        name,
        groups,
        x1,
        x2,
        w1,
        w2,
        D1,
        D2,
        interpolation_matrix(mesh.x1, x1),
        interpolation_matrix(mesh.x2, x2),
        h1,
        h2,
    )


def build_horizon_map(
    mesh: StructuredMesh, l_f: float | None, alpha: float, quadrature_rule: str = "selective"
) -> HorizonMap:
    """Truncated horizons and derivative stencils at every quadrature point.

    ``"selective"`` integrates membrane and bending terms with 2x2 Gauss
    points and transverse shear with one point per element; ``"full"`` uses
    2x2 points for everything.
    """
    if quadrature_rule not in QUADRATURE_RULES:
        raise DomainError(f"unknown quadrature rule {quadrature_rule!r}")
    notes = []
    if l_f is not None:
        if not l_f > 0.0:
            raise DomainError(f"horizon length must be positive, got {l_f!r}")
        a, b = mesh.geometry.a, mesh.geometry.b
        if l_f >= max(a, b):
            notes.append(
                f"horizon {l_f} covers the whole panel ({a} x {b}); all horizons truncate "
                "to the full domain"
            )
    elif alpha != 1.0:
        raise DomainError("a nonlocal horizon map needs l_f")
    for note in notes:
        logger.info(note)
    if quadrature_rule == "selective":
        sets = (
            _quadrature_set(mesh, "2x2", (MEMBRANE, BENDING), 2, alpha, l_f),
            _quadrature_set(mesh, "1x1", (SHEAR,), 1, alpha, l_f),
        )
    else:
        sets = (_quadrature_set(mesh, "2x2", (MEMBRANE, BENDING, SHEAR), 2, alpha, l_f),)
    return HorizonMap(mesh, alpha, l_f, quadrature_rule, sets, tuple(notes))
