"""Computational grids and measure-aware quadrature.

Conventions
-----------
* 1D grids are strictly increasing node arrays spanning [inner, outer];
  the truncation realizes a Dirichlet problem, so 0 is never a node.
* 2D grids are tensor products, node index = (i1, i2) raveled C-order
  (axis1 major).
* Quadrature weights are trapezoid dual-cell lengths times the measure
  density at the node, so ``sum(w * f(nodes))`` approximates the integral
  of ``f`` against the measure over the truncated domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

UNIFORM = "uniform"
LOGARITHMIC = "logarithmic"

#: measure kinds -> (dimensionality, density on (a1, a2))
MEASURE_KINDS = {
    "rho_drho": 1,       # rho d rho            (2D polar radial part)
    "r_dr": 1,           # r dr                 (2D radial)
    "r2_dr": 1,          # r^2 dr               (3D radial)
    "dz": 1,             # dz                   (1D Lebesgue)
    "rho_drho_dz": 2,    # rho d rho dz         (axisymmetric half-plane)
    "dy_dz": 2,          # dy dz                (Cartesian half-plane)
    "s_pow_drho_ds": 2,  # rho s^(d-3) d rho ds (z-radial sector, needs d)
}


class GridError(ValueError):
    """Invalid grid construction or grid/measure mismatch."""


@dataclass(frozen=True)
class RadialGrid:
    """Strictly positive 1D grid for a radial-type coordinate."""

    nodes: np.ndarray
    spacing_kind: str
    inner_cutoff: float
    outer_radius: float
    n: int

    def __post_init__(self):
        x = self.nodes
        if x[0] <= 0:
            raise GridError("radial grid requires a positive inner cutoff")
        if np.any(np.diff(x) <= 0):
            raise GridError("nodes must be strictly increasing")
        if self.spacing_kind == LOGARITHMIC:
            r = x[1:] / x[:-1]
            if np.max(np.abs(r / r[0] - 1.0)) > 1e-12:
                raise GridError("logarithmic grid has non-constant ratio")

    @property
    def signed(self) -> bool:
        return False


@dataclass(frozen=True)
class SignedGrid:
    """Uniform 1D grid on a signed coordinate (the y axis)."""

    nodes: np.ndarray
    spacing_kind: str
    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if np.any(np.diff(self.nodes) <= 0):
            raise GridError("nodes must be strictly increasing")

    @property
    def signed(self) -> bool:
        return True


Axis = RadialGrid | SignedGrid


@dataclass(frozen=True)
class PlaneGrid:
    """Tensor grid (axis1, axis2); axis2 is strictly positive (half space)."""

    axis1: Axis
    axis2: RadialGrid

    def __post_init__(self):
        if np.any(self.axis2.nodes <= 0):
            raise GridError("axis2 must be strictly positive (half-space)")

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.axis1.nodes), len(self.axis2.nodes))

    @property
    def n(self) -> int:
        n1, n2 = self.shape
        return n1 * n2

    def meshes(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinate arrays of shape (n1, n2)."""
        return np.meshgrid(self.axis1.nodes, self.axis2.nodes, indexing="ij")


Grid = RadialGrid | SignedGrid | PlaneGrid


@dataclass(frozen=True)
class Quadrature:
    """Per-node weights for one of the supported measures."""

    weights: np.ndarray
    measure_kind: str
    d: int | None = None

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise GridError("quadrature weights must be strictly positive")


def make_radial_grid(kind: str, inner_cutoff: float, outer_radius: float, n: int) -> RadialGrid:
    """Build a uniform or logarithmic radial grid spanning [inner, outer].

    Endpoints are exactly ``inner_cutoff`` and ``outer_radius``.  The inner
    cutoff must be positive: the Dirichlet truncation stands in for the form
    core of smooth functions supported away from the singular set.
    """
    if kind not in (UNIFORM, LOGARITHMIC):
        raise GridError(f"unknown spacing kind {kind!r}")
    if not (0 < inner_cutoff < outer_radius):
        raise GridError(
            f"require 0 < inner_cutoff < outer_radius, got {inner_cutoff}, {outer_radius}"
        )
    if n < 3:
        raise GridError("need at least 3 nodes")
    if kind == UNIFORM:
        nodes = np.linspace(inner_cutoff, outer_radius, n)
    else:
        nodes = np.geomspace(inner_cutoff, outer_radius, n)
    nodes[0], nodes[-1] = inner_cutoff, outer_radius
    return RadialGrid(nodes, kind, float(inner_cutoff), float(outer_radius), n)


def make_signed_grid(lo: float, hi: float, n: int) -> SignedGrid:
    """Uniform signed grid; symmetric ranges are mirrored exactly."""
    if not lo < hi:
        raise GridError(f"require lo < hi, got {lo}, {hi}")
    if n < 3:
        raise GridError("need at least 3 nodes")
    nodes = np.linspace(lo, hi, n)
    if lo == -hi:
        # bit-exact mirror symmetry; the reflection y -> -y is a permutation
        half = nodes[: (n + 1) // 2]
        nodes = np.concatenate([half, -half[::-1][n % 2:]])
    return SignedGrid(nodes, UNIFORM, float(lo), float(hi), n)


def make_plane_grid(axis1: Axis, axis2: RadialGrid) -> PlaneGrid:
    """Tensor grid from two axes; rejects an axis2 touching z = 0."""
    if not isinstance(axis2, RadialGrid):
        raise GridError("axis2 must be a positive RadialGrid (the form core vanishes on z=0)")
    return PlaneGrid(axis1, axis2)


# ---------------------------------------------------------------------------
# measure densities and cell integrals
# ---------------------------------------------------------------------------

def _density_1d(kind: str, d: int | None) -> Callable[[np.ndarray], np.ndarray]:
    if kind in ("rho_drho", "r_dr"):
        return lambda x: x
    if kind == "r2_dr":
        return lambda x: x * x
    if kind == "dz":
        return lambda x: np.ones_like(x)
    raise GridError(f"unknown 1D measure {kind!r}")


def _cellint_1d(kind: str, d: int | None) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Exact integral of the density over [a, b] (keeps stiffness exact for P1)."""
    if kind in ("rho_drho", "r_dr"):
        return lambda a, b: (b * b - a * a) / 2.0
    if kind == "r2_dr":
        return lambda a, b: (b**3 - a**3) / 3.0
    if kind == "dz":
        return lambda a, b: b - a
    raise GridError(f"unknown 1D measure {kind!r}")


def _axis_densities(kind: str, d: int | None):
    """Per-axis (density, cell integral) pairs for a 2D measure."""
    one = lambda x: np.ones_like(x)
    ci_one = lambda a, b: b - a
    rho = lambda x: x
    ci_rho = lambda a, b: (b * b - a * a) / 2.0
    if kind == "rho_drho_dz":
        return (rho, ci_rho), (one, ci_one)
    if kind == "dy_dz":
        return (one, ci_one), (one, ci_one)
    if kind == "s_pow_drho_ds":
        if d is None or d < 3:
            raise GridError("s_pow_drho_ds requires the ambient dimension d >= 3")
        p = d - 3
        if p == 0:
            return (rho, ci_rho), (one, ci_one)
        sp = lambda x: x**p
        ci_sp = lambda a, b: (b ** (p + 1) - a ** (p + 1)) / (p + 1)
        return (rho, ci_rho), (sp, ci_sp)
    raise GridError(f"unknown 2D measure {kind!r}")


def dual_lengths(nodes: np.ndarray) -> np.ndarray:
    """Trapezoid dual-cell lengths within [nodes[0], nodes[-1]]."""
    mids = (nodes[1:] + nodes[:-1]) / 2.0
    edges = np.concatenate([[nodes[0]], mids, [nodes[-1]]])
    return np.diff(edges)


def axis_mass(nodes: np.ndarray, density: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    return density(nodes) * dual_lengths(nodes)


def quadrature_for(grid: Grid, measure_kind: str, d: int | None = None) -> Quadrature:
    """Trapezoid weights including the measure density at each node.

    For plane grids the raveled weight is the outer product of the two axis
    masses (C-order, axis1 major).  Any uniform angular factor (2*pi and the
    like) is dropped; it cancels from every Rayleigh quotient.
    """
    if measure_kind not in MEASURE_KINDS:
        raise GridError(f"unknown measure kind {measure_kind!r}")
    ndim = MEASURE_KINDS[measure_kind]
    if isinstance(grid, PlaneGrid):
        if ndim != 2:
            raise GridError(f"measure {measure_kind!r} is 1D but the grid is a plane grid")
        (d1, _), (d2, _) = _axis_densities(measure_kind, d)
        m1 = axis_mass(grid.axis1.nodes, d1)
        m2 = axis_mass(grid.axis2.nodes, d2)
        return Quadrature(np.outer(m1, m2).ravel(), measure_kind, d)
    if ndim != 1:
        raise GridError(f"measure {measure_kind!r} is 2D but the grid is one-dimensional")
    dens = _density_1d(measure_kind, d)
    return Quadrature(axis_mass(grid.nodes, dens), measure_kind, d)


# ---------------------------------------------------------------------------
# Dirichlet ghost walls
# ---------------------------------------------------------------------------

def wall_positions(axis: Axis) -> tuple[float, float]:
    """Ghost-wall coordinates one pattern-extended spacing outside the axis.

    Logarithmic axes extend geometrically; uniform axes arithmetically, with
    the left wall clamped at 0 for positive coordinates (the Dirichlet
    surface never crosses the singular set).
    """
    x = axis.nodes
    if axis.spacing_kind == LOGARITHMIC:
        return x[0] * x[0] / x[1], x[-1] * x[-1] / x[-2]
    left = x[0] - (x[1] - x[0])
    if not axis.signed and left < 0:
        left = 0.0
    return left, x[-1] + (x[-1] - x[-2])


def describe(grid: Grid) -> dict:
    """Report-facing grid descriptor with keys {inner, outer, n, kind}."""
    if isinstance(grid, PlaneGrid):
        a1, a2 = grid.axis1, grid.axis2
        lo1 = a1.inner_cutoff if isinstance(a1, RadialGrid) else a1.lo
        hi1 = a1.outer_radius if isinstance(a1, RadialGrid) else a1.hi
        return {
            "inner": [lo1, a2.inner_cutoff],
            "outer": [hi1, a2.outer_radius],
            "n": [len(a1.nodes), len(a2.nodes)],
            "kind": f"{a1.spacing_kind} x {a2.spacing_kind}",
        }
    if isinstance(grid, SignedGrid):
        return {"inner": grid.lo, "outer": grid.hi, "n": grid.n, "kind": grid.spacing_kind}
    return {
        "inner": grid.inner_cutoff,
        "outer": grid.outer_radius,
        "n": grid.n,
        "kind": grid.spacing_kind,
    }
