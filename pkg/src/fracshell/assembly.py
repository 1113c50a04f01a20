"""Nonlocal finite element assembly for the fractional shell panel.

Every strain at a quadrature point is a function of 14 "primitive" values:
the RC derivatives along x1 and x2 of the five fields, plus the point values
of v0, w0, theta0 and phi0. On a tensor grid of quadrature points each
primitive is a Kronecker product of two 1D operators (a derivative or an
interpolation row along x1 times one along x2) acting on a nodal field.

Stiffness blocks therefore take the form ``Op_a^T diag(c) Op_b``. The
blocks are contracted with two small dense matrix products through the
Khatri-Rao structure of the 1D factors, so the horizon never has to be
looped over point by point. For horizons comparable to the panel size the
coupling is essentially all-to-all, and matrices are stored dense.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse

from .errors import AssemblyError, ConfigError, DomainError
from .frac_calc import basis_coefficients
from .mesh import (
    BENDING,
    DOFS_PER_NODE,
    MEMBRANE,
    SHEAR,
    DofMap,
    HorizonMap,
    PanelGeometry,
    QuadratureSet,
    StructuredMesh,
    build_horizon_map,
    build_mesh,
)
from .shell import (
    ConstitutiveMatrices,
    IsotropicMaterial,
    constitutive_matrices,
    external_work,
    midplane_strains,
    strain_energy,
)

logger = logging.getLogger(__name__)

U0, V0, W0, T0, P0 = range(5)

# name, field, x1 factor, x2 factor  ("D" derivative, "N" interpolation)
PRIMITIVES = (
    ("d1u", U0, "D", "N"),
    ("d2u", U0, "N", "D"),
    ("d1v", V0, "D", "N"),
    ("d2v", V0, "N", "D"),
    ("d1w", W0, "D", "N"),
    ("d2w", W0, "N", "D"),
    ("d1t", T0, "D", "N"),
    ("d2t", T0, "N", "D"),
    ("d1p", P0, "D", "N"),
    ("d2p", P0, "N", "D"),
    ("v", V0, "N", "N"),
    ("w", W0, "N", "N"),
    ("t", T0, "N", "N"),
    ("p", P0, "N", "N"),
)
NPRIM = len(PRIMITIVES)
_I = {name: k for k, (name, *_) in enumerate(PRIMITIVES)}
_D1 = [_I[n] for n in ("d1u", "d1v", "d1w", "d1t", "d1p")]
_D2 = [_I[n] for n in ("d2u", "d2v", "d2w", "d2t", "d2p")]

STRAIN_ROWS = ("e11", "e22", "g12", "k11", "k22", "k12", "g13", "g23")
_GROUP_ROWS = {MEMBRANE: (0, 1, 2), BENDING: (3, 4, 5), SHEAR: (6, 7)}


# ---------------------------------------------------------------------------
# boundary conditions and loads
# ---------------------------------------------------------------------------

_BC_FIELDS = {
    # kind: (fields fixed on x1 = 0, a ; fields fixed on x2 = 0, b)
    "CCCC": ((U0, V0, W0, T0, P0), (U0, V0, W0, T0, P0)),
    "SSSS": ((V0, W0, P0), (U0, W0, T0)),
}


@dataclass(frozen=True)
class BoundarySpec:
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in _BC_FIELDS:
            raise ConfigError(f"unknown boundary condition {self.kind!r}; use one of {sorted(_BC_FIELDS)}")

    def constrained_dofs(self, mesh: StructuredMesh) -> np.ndarray:
        x1_fields, x2_fields = _BC_FIELDS[self.kind]
        dofs = []
        for edge, fields in (("x1=0", x1_fields), ("x1=a", x1_fields), ("x2=0", x2_fields), ("x2=b", x2_fields)):
            nodes = mesh.edge_nodes(edge)
            dofs.append((DOFS_PER_NODE * nodes[:, None] + np.asarray(fields)[None, :]).ravel())
        return np.unique(np.concatenate(dofs))

    def dof_map(self, mesh: StructuredMesh) -> DofMap:
        return DofMap(mesh.n_nodes, self.constrained_dofs(mesh))


@dataclass(frozen=True)
class LoadSpec:
    """Uniform transverse pressure ``q0`` along ``+e3`` or ``-e3``."""

    q0: float
    direction: str = "+e3"

    def __post_init__(self) -> None:
        if self.direction not in ("+e3", "-e3"):
            raise ConfigError(f"load direction must be '+e3' or '-e3', got {self.direction!r}")
        if not math.isfinite(self.q0) or self.q0 < 0.0:
            raise ConfigError(f"load magnitude must be finite and non-negative, got {self.q0!r}")

    @property
    def sign(self) -> float:
        return 1.0 if self.direction == "+e3" else -1.0

    @property
    def pressure(self) -> float:
        return self.sign * self.q0


def assemble_load(mesh: StructuredMesh, load: LoadSpec) -> np.ndarray:
    """Consistent nodal load vector of a uniform transverse pressure."""
    from .mesh import gauss_points_1d, interpolation_matrix

    x1, w1 = gauss_points_1d(mesh.x1, 2)
    x2, w2 = gauss_points_1d(mesh.x2, 2)
    f1 = interpolation_matrix(mesh.x1, x1).T @ w1
    f2 = interpolation_matrix(mesh.x2, x2).T @ w2
    F = np.zeros(mesh.n_dofs)
    F[W0::DOFS_PER_NODE] = load.pressure * np.outer(f1, f2).ravel()
    return F


# ---------------------------------------------------------------------------
# strain operators
# ---------------------------------------------------------------------------


def _khatri_rao(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return (A[:, :, None] * B[:, None, :]).reshape(A.shape[0], -1)


def _kr_factor(A: np.ndarray, B: np.ndarray):
    """Row-wise Khatri-Rao product, kept sparse when it is mostly zero."""
    P = _khatri_rao(A, B)
    if np.count_nonzero(P) < 0.25 * P.size:
        return sparse.csr_matrix(P)
    return P


@dataclass(frozen=True)
class NonlocalBOperators:
    """Strain operators at every quadrature point of a horizon map.

    ``L`` maps the 14 primitives to the 8 strain rows linearly; ``beta``
    is the gradient of the bracket ``D2 w0 / F_theta + F_r w0 / (F_theta R)
    - v0 / R`` that enters the quadratic terms.
    """

    horizon_map: HorizonMap
    f_theta: float
    f_r: float
    R: float

    @property
    def mesh(self) -> StructuredMesh:
        return self.horizon_map.mesh

    @property
    def sets(self) -> tuple[QuadratureSet, ...]:
        return self.horizon_map.sets

    @cached_property
    def rho(self) -> float:
        return 0.0 if math.isinf(self.R) else 1.0 / self.R

    @cached_property
    def beta(self) -> np.ndarray:
        inv_f, r = 1.0 / self.f_theta, self.f_r / self.f_theta
        b = np.zeros(NPRIM)
        b[_I["d2w"]] = inv_f
        b[_I["w"]] = r * self.rho
        b[_I["v"]] = -self.rho
        return b

    @cached_property
    def L(self) -> np.ndarray:
        inv_f, r, rho = 1.0 / self.f_theta, self.f_r / self.f_theta, self.rho
        L = np.zeros((8, NPRIM))
        L[0, _I["d1u"]] = 1.0
        L[1, _I["d2v"]] = inv_f
        L[1, _I["w"]] = rho
        L[1, _I["p"]] = -r
        L[1, _I["v"]] = -r * rho
        L[2, _I["d1v"]] = 1.0
        L[2, _I["d2u"]] = inv_f
        L[2, _I["t"]] = -r
        L[3, _I["d1t"]] = 1.0
        L[4, _I["d2p"]] = inv_f
        L[4, _I["p"]] = -r * rho
        L[5, _I["d1p"]] = 1.0
        L[5, _I["d2t"]] = inv_f
        L[6, _I["d1w"]] = 1.0
        L[6, _I["t"]] = 1.0
        L[7, _I["p"]] = 1.0
        L[7] += self.beta
        return L

    def row_mask(self, s: int) -> np.ndarray:
        mask = np.zeros(8, dtype=bool)
        for group in self.sets[s].groups:
            mask[list(_GROUP_ROWS[group])] = True
        return mask

    def primitives(self, U: np.ndarray, s: int) -> np.ndarray:
        """Primitive values ``(14, m1, m2)`` of the state ``U`` on set ``s``."""
        qs = self.sets[s]
        fields = np.asarray(U, dtype=float).reshape(*self.mesh.shape, DOFS_PER_NODE)
        out = np.empty((NPRIM, *qs.shape))
        cache = {}
        for k, (_, f, k1, k2) in enumerate(PRIMITIVES):
            key = (f, k1, k2)
            if key not in cache:
                cache[key] = qs.factor(1, k1) @ fields[..., f] @ qs.factor(2, k2).T
            out[k] = cache[key]
        return out

    def primitive_rows(self, s: int, k: int, l: int) -> np.ndarray:
        """Dense primitive operator ``(14, n_dofs)`` at one quadrature point."""
        qs = self.sets[s]
        G = np.zeros((NPRIM, self.mesh.n_dofs))
        for a, (_, f, k1, k2) in enumerate(PRIMITIVES):
            row = np.outer(qs.factor(1, k1)[k], qs.factor(2, k2)[l]).ravel()
            G[a, f::DOFS_PER_NODE] = row
        return G

    def row_operator(self, s: int, k: int, l: int, U: np.ndarray | None = None) -> np.ndarray:
        """Strain operator rows ``(8, n_dofs)`` at one point.

        Without ``U`` this is the linear operator; with ``U`` it is the
        tangent (derivative of the nonlinear strains). Rows for strain groups
        not integrated on set ``s`` are zero.
        """
        G = self.primitive_rows(s, k, l)
        if U is None:
            J = self.L.copy()
        else:
            J = self.jacobian(G @ U)
        J[~self.row_mask(s)] = 0.0
        return J @ G

    def jacobian(self, g: np.ndarray) -> np.ndarray:
        """Derivative of the nonlinear strain rows w.r.t. the primitives.

        ``g`` has shape ``(14, ...)``; the result ``(8, 14, ...)``.
        """
        batch = g.shape[1:]
        J = np.broadcast_to(self.L.reshape(8, NPRIM, *([1] * len(batch))), (8, NPRIM, *batch)).copy()
        d1w = g[_I["d1w"]]
        bval = np.tensordot(self.beta, g, axes=1)
        b = self.beta.reshape(NPRIM, *([1] * len(batch)))
        J[0, _I["d1w"]] += d1w
        J[1] += bval * b
        J[2] += d1w * b
        J[2, _I["d1w"]] += bval
        return J


def build_B_operators(
    mesh: StructuredMesh, horizon_map: HorizonMap, f_theta: float, R: float, f_r: float = 0.0
) -> NonlocalBOperators:
    if horizon_map.mesh is not mesh and horizon_map.mesh != mesh:
        raise AssemblyError("horizon map was built for a different mesh")
    if not f_theta > 0.0:
        raise DomainError(f"F_theta must be positive, got {f_theta!r}")
    return NonlocalBOperators(horizon_map, float(f_theta), float(f_r), float(R))


# ---------------------------------------------------------------------------
# the discrete panel model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PanelModel:
    """Geometry, material, mesh and nonlocal operators of one panel."""

    geometry: PanelGeometry
    material: IsotropicMaterial
    mesh: StructuredMesh
    alpha: float
    l_f: float | None
    ops: NonlocalBOperators
    nonlinear: bool = False

    @classmethod
    def build(
        cls,
        geometry: PanelGeometry,
        material: IsotropicMaterial,
        n1: int,
        n2: int,
        alpha: float,
        l_f: float | None,
        *,
        nonlinear: bool = False,
        retain_f_r: bool = False,
        quadrature_rule: str = "selective",
    ) -> "PanelModel":
        mesh = build_mesh(geometry, n1, n2)
        hmap = build_horizon_map(mesh, l_f, alpha, quadrature_rule)
        if alpha == 1.0 or math.isinf(geometry.R):
            f_r, f_theta = 0.0, 1.0
        else:
            coeffs = basis_coefficients(alpha, l_f / geometry.R)
            f_r, f_theta = coeffs.f_r, coeffs.f_theta
        ops = build_B_operators(mesh, hmap, f_theta, geometry.R, f_r if retain_f_r else 0.0)
        return cls(geometry, material, mesh, alpha, l_f, ops, nonlinear)

    @cached_property
    def matrices(self) -> ConstitutiveMatrices:
        return constitutive_matrices(self.material, self.geometry.h)

    @cached_property
    def C(self) -> np.ndarray:
        return self.matrices.generalized()

    @property
    def n_dofs(self) -> int:
        return self.mesh.n_dofs

    def with_nonlinear(self, nonlinear: bool) -> "PanelModel":
        return PanelModel(self.geometry, self.material, self.mesh, self.alpha, self.l_f, self.ops, nonlinear)

    # -- pointwise quantities ------------------------------------------------

    def strains(self, U: np.ndarray, s: int):
        g = self.ops.primitives(U, s)
        values = np.stack([np.zeros_like(g[0]), g[_I["v"]], g[_I["w"]], g[_I["t"]], g[_I["p"]]])
        return midplane_strains(
            g[_D1], g[_D2], values, self.ops.R, self.ops.f_theta, self.nonlinear, self.ops.f_r
        )

    def strain_energy(self, U: np.ndarray) -> float:
        total = 0.0
        for s, qs in enumerate(self.ops.sets):
            total += strain_energy(self.strains(U, s), self.matrices, qs.weights, qs.groups)
        return total

    def external_work(self, U: np.ndarray, load: LoadSpec, load_factor: float = 1.0) -> float:
        qs = self.ops.sets[0]
        g = self.ops.primitives(U, 0)
        values = np.stack([np.zeros_like(g[0]), g[_I["v"]], g[_I["w"]], g[_I["t"]], g[_I["p"]]])
        loads = np.zeros_like(values)
        loads[W0] = load_factor * load.pressure
        return external_work(loads, values, qs.weights)

    # -- assembly ------------------------------------------------------------

    def _pointwise(self, U: np.ndarray | None, s: int, want_tangent: bool):
        """Generalized stresses on primitives and the tangent coefficients."""
        qs = self.ops.sets[s]
        W = qs.weights
        mask = self.ops.row_mask(s)
        if U is None or not self.nonlinear:
            g = None if U is None else self.ops.primitives(U, s)
            J = np.broadcast_to(self.ops.L[:, :, None, None], (8, NPRIM, *qs.shape)).copy()
        else:
            g = self.ops.primitives(U, s)
            J = self.ops.jacobian(g)
        J[~mask] = 0.0
        sig_tilde = None
        N = None
        if g is not None:
            eps = self.strains(U, s).stacked()
            eps[~mask] = 0.0
            sigma = np.einsum("ij,j...->i...", self.C, eps)
            sigma[~mask] = 0.0
            N = sigma[:3]
            sig_tilde = np.einsum("ia...,i...->a...", J, sigma) * W
        H = None
        if want_tangent:
            CJ = np.einsum("ij,jb...->ib...", self.C, J)
            H = np.einsum("ia...,ib...->ab...", J, CJ)
            if self.nonlinear and N is not None and MEMBRANE in qs.groups:
                e = np.zeros(NPRIM)
                e[_I["d1w"]] = 1.0
                b = self.ops.beta
                H += (
                    np.einsum("a,b,...->ab...", e, e, N[0])
                    + np.einsum("a,b,...->ab...", b, b, N[1])
                    + np.einsum("a,b,...->ab...", e, b, N[2])
                    + np.einsum("a,b,...->ab...", b, e, N[2])
                )
            H *= W
        return sig_tilde, H

    def _scatter_force(self, sig_tilde: np.ndarray, s: int, F: np.ndarray) -> None:
        qs = self.ops.sets[s]
        Fn = F.reshape(*self.mesh.shape, DOFS_PER_NODE)
        for a, (_, f, k1, k2) in enumerate(PRIMITIVES):
            if sig_tilde[a].any():
                Fn[..., f] += qs.factor(1, k1).T @ sig_tilde[a] @ qs.factor(2, k2)

    def _scatter_blocks(self, H: np.ndarray, s: int, K: np.ndarray) -> None:
        """Add ``sum_ab Op_a^T diag(H_ab) Op_b`` to ``K`` (``H`` symmetric in a, b).

        Terms are grouped per field pair and per direction-2 factor pair so
        that only one product with each Khatri-Rao factor is formed.
        """
        qs = self.ops.sets[s]
        n1p, n2p = self.mesh.shape
        nn = self.mesh.n_nodes
        K4 = K.reshape(nn, DOFS_PER_NODE, nn, DOFS_PER_NODE)
        kr1, kr2 = {}, {}
        groups: dict[tuple[int, int], dict[tuple[int, int], np.ndarray]] = {}
        for a, (_, fa, a1, a2) in enumerate(PRIMITIVES):
            for b, (_, fb, b1, b2) in enumerate(PRIMITIVES):
                if fa > fb:
                    continue
                c = H[a, b]
                if not c.any():
                    continue
                if (a1, b1) not in kr1:
                    kr1[a1, b1] = _kr_factor(qs.factor(1, a1), qs.factor(1, b1)).T
                acc = groups.setdefault((fa, fb), {})
                T = kr1[a1, b1] @ c
                acc[a2, b2] = acc[a2, b2] + T if (a2, b2) in acc else T
        for (fa, fb), acc in groups.items():
            M = np.zeros((n1p * n1p, n2p * n2p))
            for (a2, b2), T in acc.items():
                if (a2, b2) not in kr2:
                    kr2[a2, b2] = _kr_factor(qs.factor(2, a2), qs.factor(2, b2)).T
                M += (kr2[a2, b2] @ T.T).T
            M = M.reshape(n1p, n1p, n2p, n2p).transpose(0, 2, 1, 3).reshape(nn, nn)
            K4[:, fa, :, fb] += M
            if fa != fb:
                K4[:, fb, :, fa] += M.T

    def stiffness(self) -> np.ndarray:
        """Linear (small-displacement) stiffness matrix, dense ``(n_dofs, n_dofs)``."""
        K = np.zeros((self.n_dofs, self.n_dofs))
        for s in range(len(self.ops.sets)):
            _, H = self._pointwise(None, s, want_tangent=True)
            self._scatter_blocks(H, s, K)
        return K

    def internal_force(self, U: np.ndarray) -> np.ndarray:
        F = np.zeros(self.n_dofs)
        for s in range(len(self.ops.sets)):
            sig_tilde, _ = self._pointwise(U, s, want_tangent=False)
            self._scatter_force(sig_tilde, s, F)
        return F

    def internal_force_and_tangent(self, U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        F = np.zeros(self.n_dofs)
        K = np.zeros((self.n_dofs, self.n_dofs))
        for s in range(len(self.ops.sets)):
            sig_tilde, H = self._pointwise(U, s, want_tangent=True)
            self._scatter_force(sig_tilde, s, F)
            self._scatter_blocks(H, s, K)
        return F, K


# ---------------------------------------------------------------------------
# global systems
# ---------------------------------------------------------------------------


@dataclass
class GlobalSystem:
    K: np.ndarray
    F_ext: np.ndarray
    R: np.ndarray | None = None
    K_T: np.ndarray | None = None

    def symmetry_error(self) -> float:
        K = self.K if self.K_T is None else self.K_T
        return float(np.linalg.norm(K - K.T) / np.linalg.norm(K))

    def nnz(self) -> int:
        return int(np.count_nonzero(self.K))

    def to_sparse(self):
        return sparse.coo_matrix(self.K)


@dataclass
class ConstrainedSystem:
    """Free-DOF block of a system after symmetric elimination of constraints."""

    K: np.ndarray
    F: np.ndarray
    free: np.ndarray
    constrained: np.ndarray
    n_dofs: int
    diagnostics: dict = field(default_factory=dict)

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        U = np.zeros(self.n_dofs)
        U[self.free] = u_free
        return U


def assemble_linear(model: PanelModel, load: LoadSpec | None = None) -> GlobalSystem:
    F = assemble_load(model.mesh, load) if load is not None else np.zeros(model.n_dofs)
    return GlobalSystem(K=model.stiffness(), F_ext=F)


def assemble_residual_and_tangent(
    state: np.ndarray, load_factor: float, model: PanelModel, F_ext: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Residual ``F_int(state) - load_factor F_ext`` and the tangent stiffness."""
    F_int, K_T = model.internal_force_and_tangent(state)
    return F_int - load_factor * F_ext, K_T


def apply_boundary_conditions(
    system: GlobalSystem, spec: BoundarySpec, mesh: StructuredMesh, use_tangent: bool = False
) -> ConstrainedSystem:
    dof_map = spec.dof_map(mesh)
    free = dof_map.free
    K = system.K_T if use_tangent else system.K
    if K is None:
        raise AssemblyError("system has no matrix to constrain")
    rhs = system.F_ext if system.R is None or not use_tangent else -system.R
    return ConstrainedSystem(
        K=K[np.ix_(free, free)],
        F=rhs[free],
        free=free,
        constrained=dof_map.constrained,
        n_dofs=mesh.n_dofs,
        diagnostics={"bc": spec.kind, "constrained": int(dof_map.constrained.size), "free": int(free.size)},
    )
