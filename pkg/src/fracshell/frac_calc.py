"""Riesz-Caputo fractional operators on uniform one-dimensional grids.

All operators use L1 product integration: the field is replaced by its
piecewise-linear interpolant and the power-law kernel is integrated in
closed form over each (possibly partial) grid segment. With the
normalisation of the Riesz-Caputo derivative,

    D^a f(x) = 1/2 Gamma(2-a) [ l-^(a-1) C_left f(x) - l+^(a-1) C_right f(x) ],

the discrete derivative reduces to a weighted average of segment slopes in
which each side's weights sum to 1/2. Affine fields are therefore
differentiated exactly for any pair of horizon lengths.

Where a horizon side has zero length (a point on the domain boundary), the
side contributes its limit ``1/2 f'(x)``, taken from the nearest segment that
lies inside the domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateIntervalError, DomainError, ShapeError

__all__ = [
    "FracOperatorSpec",
    "CurvilinearCoefficients",
    "DiscreteFracStencil",
    "caputo_left",
    "caputo_right",
    "rc_derivative",
    "riesz_integral",
    "basis_coefficients",
    "truncate_horizon",
    "build_stencil",
    "derivative_weights",
    "integral_weights",
    "stencil_matrix",
]

# relative tolerance (in units of grid spacing) for matching points to nodes
_TOL = 1e-9


def _check_alpha(alpha: float) -> None:
    if not (math.isfinite(alpha) and 0.0 < alpha <= 1.0):
        raise DomainError(f"fractional order must lie in (0, 1], got {alpha!r}")


@dataclass(frozen=True)
class FracOperatorSpec:
    """Fractional order and (already truncated) horizon lengths at a point."""

    alpha: float
    l_minus: float
    l_plus: float

    def __post_init__(self) -> None:
        _check_alpha(self.alpha)
        if not (self.l_minus >= 0.0 and self.l_plus >= 0.0):
            raise DomainError(
                f"horizon lengths must be non-negative, got ({self.l_minus}, {self.l_plus})"
            )
        if self.alpha < 1.0 and self.l_minus + self.l_plus <= 0.0:
            raise DomainError("a nonlocal operator (alpha < 1) needs a non-empty horizon")

    @property
    def is_local(self) -> bool:
        return self.alpha == 1.0


@dataclass(frozen=True)
class CurvilinearCoefficients:
    """Coefficients F_r, F_theta from differentiating the cylindrical basis."""

    f_r: float
    f_theta: float
    alpha: float
    l_theta: float


@dataclass(frozen=True)
class DiscreteFracStencil:
    """Nodal weights giving the fractional derivative at one point.

    ``center_index`` is the grid node at the evaluation point, or ``None``
    when the point lies between nodes (quadrature points).
    """

    center_index: int | None
    support_indices: np.ndarray
    weights: np.ndarray
    position: float

    def apply(self, values) -> float:
        values = np.asarray(values, dtype=float)
        return float(values[..., self.support_indices] @ self.weights)


# ---------------------------------------------------------------------------
# one-sided operators on sample arrays
# ---------------------------------------------------------------------------


def _check_samples(samples, spacing: float) -> np.ndarray:
    f = np.asarray(samples, dtype=float)
    if f.ndim != 1 or f.size < 2:
        raise DegenerateIntervalError("at least two samples are needed to span an interval")
    if not spacing > 0.0:
        raise DomainError(f"sample spacing must be positive, got {spacing!r}")
    return f


def caputo_left(samples, spacing: float, alpha: float) -> float:
    """Left Caputo derivative at the right end of ``samples``.

    ``samples`` are uniformly spaced values on ``[x - l, x]``.
    """
    f = _check_samples(samples, spacing)
    _check_alpha(alpha)
    slopes = np.diff(f) / spacing
    if alpha == 1.0:
        return float(slopes[-1])
    p = 1.0 - alpha
    dist = spacing * np.arange(slopes.size, -1, -1, dtype=float)
    kernel = dist[:-1] ** p - dist[1:] ** p
    return float(slopes @ kernel) / math.gamma(2.0 - alpha)


def caputo_right(samples, spacing: float, alpha: float) -> float:
    """Right Caputo derivative at the left end of ``samples`` on ``[x, x + l]``.

    Carries the usual minus sign, so an increasing field gives a negative value.
    """
    f = _check_samples(samples, spacing)
    _check_alpha(alpha)
    slopes = np.diff(f) / spacing
    if alpha == 1.0:
        return -float(slopes[0])
    p = 1.0 - alpha
    dist = spacing * np.arange(slopes.size + 1, dtype=float)
    kernel = dist[1:] ** p - dist[:-1] ** p
    return -float(slopes @ kernel) / math.gamma(2.0 - alpha)


def _steps(length: float, spacing: float) -> int:
    ratio = length / spacing
    k = int(round(ratio))
    if abs(ratio - k) > _TOL * max(1.0, ratio):
        raise ShapeError(
            f"horizon length {length} is not a whole number of sample spacings ({spacing})"
        )
    return k


def _split_samples(samples, spec: FracOperatorSpec, spacing: float):
    f = np.asarray(samples, dtype=float)
    if not spacing > 0.0:
        raise DomainError(f"sample spacing must be positive, got {spacing!r}")
    n_left = _steps(spec.l_minus, spacing)
    n_right = _steps(spec.l_plus, spacing)
    if f.ndim != 1 or f.size != n_left + n_right + 1:
        raise ShapeError(
            f"expected {n_left + n_right + 1} samples spanning the horizon, got {f.size}"
        )
    if f.size < 2:
        raise DegenerateIntervalError("at least two samples are needed to span an interval")
    return f, n_left, n_right


def rc_derivative(samples, spec: FracOperatorSpec, spacing: float) -> float:
    """Riesz-Caputo derivative at ``x`` from samples on ``[x - l_minus, x + l_plus]``."""
    f, c, n_right = _split_samples(samples, spec, spacing)
    slopes = np.diff(f) / spacing
    # local slopes on either side of x, falling back to the side inside the domain
    slope_left = slopes[c - 1] if c > 0 else slopes[0]
    slope_right = slopes[c] if n_right > 0 else slopes[-1]
    alpha = spec.alpha
    if spec.is_local:
        return 0.5 * (slope_left + slope_right)
    scale = 0.5 * math.gamma(2.0 - alpha)
    if c > 0:
        left = scale * spec.l_minus ** (alpha - 1.0) * caputo_left(f[: c + 1], spacing, alpha)
    else:
        left = 0.5 * slope_right
    if n_right > 0:
        right = -scale * spec.l_plus ** (alpha - 1.0) * caputo_right(f[c:], spacing, alpha)
    else:
        right = 0.5 * slope_left
    return float(left + right)


def _power_moments(d_near, d_far, alpha: float):
    """Integrals of t^-a and (t - d_near) t^-a over [d_near, d_far]."""
    p = 1.0 - alpha
    i0 = (d_far**p - d_near**p) / p
    i1 = (d_far ** (p + 1.0) - d_near ** (p + 1.0)) / (p + 1.0)
    return i0, i1 - d_near * i0


def _one_sided_integral(values_near_to_far: np.ndarray, spacing: float, alpha: float) -> float:
    # values ordered by increasing distance from x, starting at x itself
    n = values_near_to_far.size - 1
    d = spacing * np.arange(n + 1, dtype=float)
    i0, i1c = _power_moments(d[:-1], d[1:], alpha)
    near, far = values_near_to_far[:-1], values_near_to_far[1:]
    return float(near @ (i0 - i1c / spacing) + far @ (i1c / spacing))


def riesz_integral(samples, spec: FracOperatorSpec, spacing: float) -> float:
    """Riesz fractional integral of order ``1 - alpha`` at ``x``.

    Samples span ``[x - l_minus, x + l_plus]``; each one-sided integral is
    normalised by its own interval length so that a constant field is
    reproduced exactly. The adjoint form used in the boundary terms of the
    governing equations swaps the two horizon lengths; callers wanting that
    form pass a ``FracOperatorSpec`` with ``l_minus`` and ``l_plus`` exchanged.
    """
    f, c, n_right = _split_samples(samples, spec, spacing)
    alpha = spec.alpha
    if spec.is_local:
        return float(f[c])
    scale = 0.5 * (1.0 - alpha)
    if c > 0:
        left = scale * spec.l_minus ** (alpha - 1.0) * _one_sided_integral(f[c::-1], spacing, alpha)
    else:
        left = 0.5 * f[c]
    if n_right > 0:
        right = scale * spec.l_plus ** (alpha - 1.0) * _one_sided_integral(f[c:], spacing, alpha)
    else:
        right = 0.5 * f[c]
    return float(left + right)


# ---------------------------------------------------------------------------
# horizons and grid stencils
# ---------------------------------------------------------------------------


def truncate_horizon(position: float, length: float, nominal_l: float) -> tuple[float, float]:
    """Clip a symmetric horizon of half-width ``nominal_l`` to ``[0, length]``."""
    if not nominal_l > 0.0:
        raise DomainError(f"nominal horizon must be positive, got {nominal_l!r}")
    tol = _TOL * length
    if position < -tol or position > length + tol:
        raise DomainError(f"position {position} lies outside [0, {length}]")
    position = min(max(position, 0.0), length)
    return min(position, nominal_l), min(length - position, nominal_l)


def _grid_params(grid) -> tuple[np.ndarray, float, float]:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise DegenerateIntervalError("a grid needs at least two nodes")
    h = (grid[-1] - grid[0]) / (grid.size - 1)
    if not h > 0.0 or not np.allclose(np.diff(grid), h, rtol=1e-9, atol=0.0):
        raise DomainError("grid must be uniform and increasing")
    return grid, float(grid[0]), h


def _side_segments(x0: float, h: float, nseg: int, x: float, length: float, side: int):
    """Grid segments overlapping one side of the horizon.

    Returns segment indices and the near/far distances of the overlap from x.
    """
    if side < 0:
        lo, hi = x - length, x
    else:
        lo, hi = x, x + length
    j0 = int(math.floor((lo - x0) / h + _TOL))
    j1 = int(math.ceil((hi - x0) / h - _TOL))
    j = np.arange(max(j0, 0), min(j1, nseg))
    s_lo = np.maximum(x0 + j * h, lo)
    s_hi = np.minimum(x0 + (j + 1) * h, hi)
    keep = s_hi - s_lo > _TOL * h
    j, s_lo, s_hi = j[keep], s_lo[keep], s_hi[keep]
    if side < 0:
        d_near, d_far = x - s_hi, x - s_lo
    else:
        d_near, d_far = s_lo - x, s_hi - x
    return j, np.maximum(d_near, 0.0), d_far


def _local_segment(x0: float, h: float, nseg: int, x: float, side: int) -> int:
    r = (x - x0) / h
    j = int(math.ceil(r - _TOL)) - 1 if side < 0 else int(math.floor(r + _TOL))
    return min(max(j, 0), nseg - 1)


def _check_horizon(grid: np.ndarray, x: float, l_minus: float, l_plus: float, h: float) -> None:
    if x - l_minus < grid[0] - _TOL * h or x + l_plus > grid[-1] + _TOL * h:
        raise DomainError(
            f"horizon [{x - l_minus}, {x + l_plus}] leaves the grid [{grid[0]}, {grid[-1]}]; "
            "truncate it first"
        )


def derivative_weights(grid, x: float, alpha: float, l_minus: float, l_plus: float) -> np.ndarray:
    """Dense nodal weights of the RC derivative of the grid interpolant at ``x``."""
    grid, x0, h = _grid_params(grid)
    FracOperatorSpec(alpha, l_minus, l_plus)
    _check_horizon(grid, x, l_minus, l_plus, h)
    nseg = grid.size - 1
    seg_w = np.zeros(nseg)
    p = 1.0 - alpha
    for side, length in ((-1, l_minus), (1, l_plus)):
        if alpha == 1.0 or length <= _TOL * h:
            seg_w[_local_segment(x0, h, nseg, x, side)] += 0.5
            continue
        j, d_near, d_far = _side_segments(x0, h, nseg, x, length, side)
        np.add.at(seg_w, j, 0.5 * length ** (alpha - 1.0) * (d_far**p - d_near**p))
    w = np.zeros(grid.size)
    w[1:] += seg_w / h
    w[:-1] -= seg_w / h
    return w


def integral_weights(grid, x: float, alpha: float, l_minus: float, l_plus: float) -> np.ndarray:
    """Dense nodal weights of the Riesz integral of the grid interpolant at ``x``."""
    grid, x0, h = _grid_params(grid)
    FracOperatorSpec(alpha, l_minus, l_plus)
    _check_horizon(grid, x, l_minus, l_plus, h)
    nseg = grid.size - 1
    w = np.zeros(grid.size)
    for side, length in ((-1, l_minus), (1, l_plus)):
        if alpha == 1.0 or length <= _TOL * h:
            w += 0.5 * _interp_row(grid, x0, h, x)
            continue
        j, d_near, d_far = _side_segments(x0, h, nseg, x, length, side)
        scale = 0.5 * (1.0 - alpha) * length ** (alpha - 1.0)
        i0, i1c = _power_moments(d_near, d_far, alpha)
        delta = d_far - d_near
        # interpolant at the near/far ends of each overlap, as nodal combinations
        for dist, coef in ((d_near, i0 - i1c / delta), (d_far, i1c / delta)):
            s = x + side * dist
            t = (s - (x0 + j * h)) / h
            np.add.at(w, j, scale * coef * (1.0 - t))
            np.add.at(w, j + 1, scale * coef * t)
    return w


def _interp_row(grid: np.ndarray, x0: float, h: float, x: float) -> np.ndarray:
    nseg = grid.size - 1
    j = min(max(int(math.floor((x - x0) / h)), 0), nseg - 1)
    t = (x - grid[j]) / h
    row = np.zeros(grid.size)
    row[j], row[j + 1] = 1.0 - t, t
    return row


def build_stencil(grid, point_index: int, spec: FracOperatorSpec) -> DiscreteFracStencil:
    """Stencil of the RC derivative at grid node ``point_index``."""
    grid = np.asarray(grid, dtype=float)
    if not -grid.size <= point_index < grid.size:
        raise IndexError(f"point index {point_index} outside grid of {grid.size} nodes")
    point_index %= grid.size
    x = float(grid[point_index])
    w = derivative_weights(grid, x, spec.alpha, spec.l_minus, spec.l_plus)
    support = np.flatnonzero(w)
    return DiscreteFracStencil(point_index, support, w[support], x)


def stencil_matrix(grid, points, alpha: float, nominal_l: float | None):
    """RC derivative rows at arbitrary points, with horizons truncated to the grid.

    Returns ``(matrix, horizons)`` where ``matrix`` has one row per point and
    ``horizons[k] = (l_minus, l_plus)``. ``nominal_l`` may be ``None`` only
    for the local operator (alpha = 1).
    """
    grid = np.asarray(grid, dtype=float)
    points = np.asarray(points, dtype=float)
    length = grid[-1] - grid[0]
    rows = np.zeros((points.size, grid.size))
    horizons = np.zeros((points.size, 2))
    for k, x in enumerate(points):
        if nominal_l is None:
            if alpha != 1.0:
                raise DomainError("a nonlocal operator needs a horizon length")
            lm = lp = 0.0
        else:
            lm, lp = truncate_horizon(x - grid[0], length, nominal_l)
        horizons[k] = lm, lp
        rows[k] = derivative_weights(grid, x, alpha, lm, lp)
    return rows, horizons


# ---------------------------------------------------------------------------
# cylindrical basis coefficients
# ---------------------------------------------------------------------------


def basis_coefficients(
    alpha: float, l_theta: float, theta: float = 0.0, resolution: int = 4096
) -> CurvilinearCoefficients:
    """F_r and F_theta from the Riesz integral of the azimuthal unit vector.

    The Cartesian components of e_theta(t) = (-sin t, cos t) are integrated
    over ``[theta - l_theta, theta + l_theta]`` and projected on e_r(theta)
    and e_theta(theta). ``resolution`` is the number of segments per side.
    """
    _check_alpha(alpha)
    if not (math.isfinite(l_theta) and l_theta > 0.0):
        raise DomainError(f"angular horizon must be positive, got {l_theta!r}")
    if alpha == 1.0:
        return CurvilinearCoefficients(0.0, 1.0, alpha, l_theta)
    spacing = l_theta / resolution
    t = theta + spacing * np.arange(-resolution, resolution + 1)
    spec = FracOperatorSpec(alpha, l_theta, l_theta)
    ix = riesz_integral(-np.sin(t), spec, spacing)
    iy = riesz_integral(np.cos(t), spec, spacing)
    c, s = math.cos(theta), math.sin(theta)
    return CurvilinearCoefficients(ix * c + iy * s, -ix * s + iy * c, alpha, l_theta)
