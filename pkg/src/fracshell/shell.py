"""Material law, fractional FSDT strains, stress resultants and energies.

Strain evaluators are vectorised: every argument may carry trailing batch
axes (for example a grid of quadrature points) and all outputs share them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

MODERATE_ROTATION = 0.26  # rad, roughly 15 degrees


@dataclass(frozen=True)
class IsotropicMaterial:
    E: float
    nu: float
    K_s: float = 5.0 / 6.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.E) and self.E > 0.0):
            raise DomainError(f"Young's modulus must be positive, got {self.E!r}")
        if not -1.0 < self.nu < 0.5:
            raise DomainError(f"Poisson's ratio must lie in (-1, 0.5), got {self.nu!r}")
        if not self.K_s > 0.0:
            raise DomainError(f"shear correction must be positive, got {self.K_s!r}")

    @property
    def G(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))


@dataclass(frozen=True)
class ConstitutiveMatrices:
    A: np.ndarray
    B: np.ndarray
    D: np.ndarray
    S: np.ndarray

    def generalized(self) -> np.ndarray:
        """8x8 law mapping (eps0, kappa, gamma) to (N, M, Q)."""
        C = np.zeros((8, 8))
        C[:3, :3] = self.A
        C[:3, 3:6] = self.B
        C[3:6, :3] = self.B
        C[3:6, 3:6] = self.D
        C[6:, 6:] = self.S
        return C


def plane_stress_matrix(material: IsotropicMaterial) -> np.ndarray:
    E, nu = material.E, material.nu
    return E / (1.0 - nu**2) * np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 0.5 * (1.0 - nu)]])


def constitutive_matrices(material: IsotropicMaterial, h: float) -> ConstitutiveMatrices:
    """Thickness-integrated stiffnesses of a homogeneous isotropic shell."""
    if not h > 0.0:
        raise DomainError(f"thickness must be positive, got {h!r}")
    Q = plane_stress_matrix(material)
    return ConstitutiveMatrices(
        A=Q * h,
        B=np.zeros((3, 3)),
        D=Q * h**3 / 12.0,
        S=material.K_s * material.G * h * np.eye(2),
    )


@dataclass(frozen=True)
class GeneralizedDisplacements:
    """Midplane displacements (u0, v0, w0) and rotations (theta0, phi0)."""

    u0: float
    v0: float
    w0: float
    theta0: float
    phi0: float

    def as_array(self) -> np.ndarray:
        return np.array([self.u0, self.v0, self.w0, self.theta0, self.phi0])


@dataclass(frozen=True)
class MidplaneStrainState:
    """Membrane strains, curvatures and transverse shear strains.

    ``membrane = (eps11, eps22, gamma12)``, ``curvature = (k11, k22, k12)``,
    ``shear = (gamma13, gamma23)``; each has shape ``(3 or 2, *batch)``.
    """

    membrane: np.ndarray
    curvature: np.ndarray
    shear: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.membrane, self.curvature, self.shear], axis=0)


@dataclass(frozen=True)
class StressResultants:
    N: np.ndarray
    M: np.ndarray
    Q: np.ndarray


def midplane_strains(
    d1,
    d2,
    values,
    R: float,
    f_theta: float,
    nonlinear: bool = False,
    f_r: float = 0.0,
) -> MidplaneStrainState:
    """Fractional von Karman strains of the shallow cylindrical panel.

    Parameters
    ----------
    d1, d2 : array_like, shape (5, ...)
        RC derivatives along x1 and x2 of (u0, v0, w0, theta0, phi0).
    values : array_like, shape (5, ...)
        The generalized displacements themselves at the same points.
    R : float
        Panel radius (``inf`` for a plate).
    f_theta, f_r : float
        Basis coefficients. ``f_r`` defaults to zero (dropped terms).
    nonlinear : bool
        Include the quadratic von Karman terms.

    Notes
    -----
    The x3-dependent part of ``(v0 + x3 phi0) / R`` is dropped inside the
    quadratic terms and the transverse shear strains (shallow shell).
    """
    if not f_theta > 0.0:
        raise DomainError(f"F_theta must be positive, got {f_theta!r}")
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    values = np.asarray(values, dtype=float)
    rho = 0.0 if math.isinf(R) else 1.0 / R
    inv_f = 1.0 / f_theta
    r = f_r * inv_f

    _, v, w, t, p = values
    beta = inv_f * d2[2] + r * rho * w - rho * v

    e11 = d1[0].copy()
    e22 = inv_f * d2[1] + rho * w - r * (p + rho * v)
    g12 = d1[1] + inv_f * d2[0] - r * t
    if nonlinear:
        e11 = e11 + 0.5 * d1[2] ** 2
        e22 = e22 + 0.5 * beta**2
        g12 = g12 + beta * d1[2]

    k11 = d1[3]
    k22 = inv_f * d2[4] - r * rho * p
    k12 = d1[4] + inv_f * d2[3]

    g13 = d1[2] + t
    g23 = p + beta

    return MidplaneStrainState(
        membrane=np.stack([e11, e22, g12]),
        curvature=np.stack([k11, k22, k12]),
        shear=np.stack([g13, g23]),
    )


def stress_resultants(strains: MidplaneStrainState, matrices: ConstitutiveMatrices) -> StressResultants:
    eps, kap, gam = strains.membrane, strains.curvature, strains.shear
    N = np.einsum("ij,j...->i...", matrices.A, eps) + np.einsum("ij,j...->i...", matrices.B, kap)
    M = np.einsum("ij,j...->i...", matrices.B, eps) + np.einsum("ij,j...->i...", matrices.D, kap)
    Q = np.einsum("ij,j...->i...", matrices.S, gam)
    return StressResultants(N, M, Q)


def strain_energy(
    strains: MidplaneStrainState,
    matrices: ConstitutiveMatrices,
    weights,
    groups=("membrane", "bending", "shear"),
) -> float:
    """Half the weighted sum of resultant-strain products over quadrature points."""
    res = stress_resultants(strains, matrices)
    density = np.zeros(np.shape(weights))
    if "membrane" in groups:
        density = density + np.sum(res.N * strains.membrane, axis=0)
    if "bending" in groups:
        density = density + np.sum(res.M * strains.curvature, axis=0)
    if "shear" in groups:
        density = density + np.sum(res.Q * strains.shear, axis=0)
    return 0.5 * float(np.sum(np.asarray(weights) * density))


def external_work(loads, values, weights) -> float:
    """Work of distributed loads ``(F1, F2, F3, M1, M2)`` on ``(u0, v0, w0, theta0, phi0)``."""
    loads = np.asarray(loads, dtype=float)
    values = np.asarray(values, dtype=float)
    return float(np.sum(np.asarray(weights) * np.sum(loads * values, axis=0)))


def check_rotations(theta0, phi0, limit: float = MODERATE_ROTATION) -> float:
    """Warn when rotations leave the moderate-rotation regime; return the max."""
    peak = float(max(np.max(np.abs(theta0), initial=0.0), np.max(np.abs(phi0), initial=0.0)))
    if peak > limit:
        warnings.warn(
            f"rotation {peak:.3f} rad exceeds the moderate-rotation limit {limit} rad",
            stacklevel=2,
        )
    return peak
