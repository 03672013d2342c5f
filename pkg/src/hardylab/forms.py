"""Sparse quadratic-form assembly for the magnetic operators and Hardy weights.

Every assembled form is ``stiffness + diag(potential * quadrature weights)``
where the stiffness comes from squared finite differences with exact cell
integrals of the measure density (hence symmetric positive semidefinite by
construction) and zeroth-order terms are lumped on the diagonal at node
values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .grids import (
    Axis,
    GridError,
    PlaneGrid,
    Quadrature,
    RadialGrid,
    SignedGrid,
    _axis_densities,
    _cellint_1d,
    axis_mass,
    quadrature_for,
    wall_positions,
)

SUBTRACT_MODES = ("none", "quarter", "quarter_plus_beta", "full_thm2", "with_xi")
WEIGHT_KINDS = ("inv_rho2", "inv_z2", "inv_z2_plus_y2_over_z4", "inv_r2", "identity", "xi2_term")


class FormError(ValueError):
    """Invalid assembly request."""


@dataclass(frozen=True)
class ChannelSpec:
    """Angular-channel parameters of the flux-carrying operator."""

    alpha: float
    d: int
    m: int

    def __post_init__(self):
        if self.d < 2:
            raise FormError("ambient dimension must be >= 2")

    @property
    def nu(self) -> float:
        return self.m + self.alpha

    @property
    def dimensional_constant(self) -> float:
        return ((self.d - 2) / 2.0) ** 2


@dataclass(frozen=True)
class ConfiningSpec:
    """Field strength and Fourier fiber parameter of the confining model."""

    beta: float
    xi: float


@dataclass
class FormMatrix:
    """Sparse symmetric quadratic form split into stiffness + lumped potential.

    ``entries`` is the assembled matrix; ``potential`` holds the bare
    zeroth-order density per node (before multiplication by the quadrature
    weight), which also provides a certified lower bound for eigenvalue
    shifts since the stiffness part is positive semidefinite.
    """

    stiffness: sp.csr_matrix
    potential: np.ndarray
    grid: object
    quadrature: Quadrature

    @property
    def dimension(self) -> int:
        return self.stiffness.shape[0]

    @property
    def entries(self) -> sp.csr_matrix:
        return (self.stiffness + sp.diags(self.potential * self.quadrature.weights)).tocsr()

    def add_potential(self, density: np.ndarray) -> "FormMatrix":
        """New form with ``density`` added to the zeroth-order term."""
        return FormMatrix(self.stiffness, self.potential + density, self.grid, self.quadrature)

    def subtract_weight(self, weight: "DiagonalWeight", coefficient: float = 1.0) -> "FormMatrix":
        """New form minus ``coefficient`` times a diagonal Hardy weight."""
        return self.add_potential(-coefficient * weight.values / self.quadrature.weights)


@dataclass(frozen=True)
class DiagonalWeight:
    """Diagonal of (weight density x quadrature weight); strictly positive."""

    kind: str
    values: np.ndarray

    def __post_init__(self):
        if np.any(self.values <= 0):
            raise FormError(f"weight {self.kind!r} must be strictly positive on the grid")


@dataclass(frozen=True)
class GroundStateAnsatz:
    """Lowest fiber eigenfunction data of the confining model per node."""

    beta: float
    xi: float
    y0: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        if np.any(self.eta <= 0) or np.any(self.eta > 1):
            raise FormError("eta must take values in (0, 1]")


# ---------------------------------------------------------------------------
# axis stiffness
# ---------------------------------------------------------------------------

def _axis_flux(axis: Axis, cellint, bc: tuple[str, str]) -> sp.csr_matrix:
    """1D squared-difference form with exact density cell integrals.

    ``bc`` entries are 'dirichlet' (ghost wall one extended spacing outside)
    or 'natural' (no wall link; even reflection or measure-regularized end).
    """
    x = axis.nodes
    n = len(x)
    h = np.diff(x)
    c = cellint(x[:-1], x[1:]) / h**2
    idx = np.arange(n - 1)
    rows = [idx, idx + 1, idx, idx + 1]
    cols = [idx, idx + 1, idx + 1, idx]
    vals = [c, c, -c, -c]
    extra = np.zeros(n)
    left, right = wall_positions(axis)
    if bc[0] == "dirichlet" and left < x[0]:
        extra[0] += cellint(left, x[0]) / (x[0] - left) ** 2
    if bc[1] == "dirichlet":
        extra[-1] += cellint(x[-1], right) / (right - x[-1]) ** 2
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(extra)
    K = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return K.tocsr()


def _tensor_stiffness(grid: PlaneGrid, measure_kind: str, d: int | None,
                      bc1: tuple[str, str], bc2: tuple[str, str]) -> sp.csr_matrix:
    (d1, ci1), (d2, ci2) = _axis_densities(measure_kind, d)
    K1 = _axis_flux(grid.axis1, ci1, bc1)
    K2 = _axis_flux(grid.axis2, ci2, bc2)
    m1 = axis_mass(grid.axis1.nodes, d1)
    m2 = axis_mass(grid.axis2.nodes, d2)
    return (sp.kron(K1, sp.diags(m2)) + sp.kron(sp.diags(m1), K2)).tocsr()


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

def assemble_ab_channel(spec: ChannelSpec, grid, subtract_dimensional: bool = False,
                        z_radial: bool = False) -> FormMatrix:
    """Angular-channel form: radial flux + nu^2/rho^2, optionally minus the
    dimensional Hardy density ((d-2)/2)^2 / r^2.

    d=2 takes a RadialGrid in rho.  d=3 takes a PlaneGrid (rho, |z|): the
    half-plane with a natural (even-reflection) condition at the inner z end.
    d>=4 requires ``z_radial`` and uses the (rho, s) sector with measure
    rho s^(d-3).
    """
    nu2 = spec.nu**2
    cdim = spec.dimensional_constant
    if spec.d == 2:
        if not isinstance(grid, RadialGrid):
            raise FormError("d=2 channel needs a RadialGrid in rho")
        quad = quadrature_for(grid, "rho_drho")
        cellint = _cellint_1d("rho_drho", None)
        K = _axis_flux(grid, cellint, ("dirichlet", "dirichlet"))
        rho = grid.nodes
        p = nu2 / rho**2
        if subtract_dimensional and cdim:
            p = p - cdim / rho**2
        return FormMatrix(K, p, grid, quad)
    if spec.d >= 4 and not z_radial:
        raise FormError("d>=4 requires the z_radial sector flag")
    if not isinstance(grid, PlaneGrid) or not isinstance(grid.axis1, RadialGrid):
        raise FormError("d>=3 channel needs a PlaneGrid (rho, |z|)")
    measure = "rho_drho_dz" if spec.d == 3 else "s_pow_drho_ds"
    quad = quadrature_for(grid, measure, d=spec.d)
    K = _tensor_stiffness(grid, measure, spec.d,
                          bc1=("dirichlet", "dirichlet"),
                          bc2=("natural", "dirichlet"))
    R, S = grid.meshes()
    p = nu2 / R**2
    if subtract_dimensional:
        p = p - cdim / (R**2 + S**2)
    return FormMatrix(K, p.ravel(), grid, quad)


def assemble_confining(spec: ConfiningSpec, grid: PlaneGrid, subtract: str = "none",
                       y2_coefficient: float | None = None) -> FormMatrix:
    """Fibered confining form (xi + beta y/z^2)^2 - d_y^2 - d_z^2 on the
    half-plane, minus the selected lower-bound density.

    ``y2_coefficient`` overrides the |beta| factor on the y^2/z^4 subtraction
    term (falsification controls); default |beta|.
    """
    if subtract not in SUBTRACT_MODES:
        raise FormError(f"unknown subtraction {subtract!r}; choose from {SUBTRACT_MODES}")
    if not isinstance(grid, PlaneGrid):
        raise FormError("confining model needs a PlaneGrid (y, z)")
    beta, xi = spec.beta, spec.xi
    ab = abs(beta)
    if subtract == "with_xi" and beta == 0:
        raise FormError("with_xi subtraction requires beta != 0")
    quad = quadrature_for(grid, "dy_dz")
    K = _tensor_stiffness(grid, "dy_dz", None,
                          bc1=("dirichlet", "dirichlet"),
                          bc2=("dirichlet", "dirichlet"))
    Y, Z = grid.meshes()
    p = (xi + beta * Y / Z**2) ** 2
    if subtract == "quarter":
        p = p - 0.25 / Z**2
    elif subtract == "quarter_plus_beta":
        p = p - (0.25 + ab) / Z**2
    elif subtract in ("full_thm2", "with_xi"):
        c2 = ab if y2_coefficient is None else y2_coefficient
        p = p - (0.25 + ab) / Z**2 - c2 * Y**2 / Z**4
        if subtract == "with_xi":
            p = p - xi**2 / ab
    return FormMatrix(K, p.ravel(), grid, quad)


def assemble_dirichlet_form(grid, measure_kind: str = "dz") -> FormMatrix:
    """Pure flux form with Dirichlet walls on a 1D grid (no potential)."""
    if isinstance(grid, PlaneGrid):
        raise FormError("assemble_dirichlet_form takes a 1D grid")
    cellint = _cellint_1d(measure_kind, None)
    K = _axis_flux(grid, cellint, ("dirichlet", "dirichlet"))
    quad = quadrature_for(grid, measure_kind)
    return FormMatrix(K, np.zeros(len(grid.nodes)), grid, quad)


def assemble_weight(kind: str, grid, quadrature: Quadrature,
                    spec: ConfiningSpec | None = None) -> DiagonalWeight:
    """Diagonal Hardy weight (density x quadrature weight) on the grid."""
    if kind not in WEIGHT_KINDS:
        raise FormError(f"unknown weight kind {kind!r}; choose from {WEIGHT_KINDS}")
    w = quadrature.weights
    if isinstance(grid, PlaneGrid):
        A1, A2 = grid.meshes()
        a1, a2 = A1.ravel(), A2.ravel()
        if kind == "identity":
            dens = np.ones_like(a1)
        elif kind == "inv_rho2":
            if grid.axis1.signed:
                raise FormError("inv_rho2 needs a positive first axis")
            dens = 1.0 / a1**2
        elif kind == "inv_z2":
            dens = 1.0 / a2**2
        elif kind == "inv_r2":
            dens = 1.0 / (a1**2 + a2**2)
        elif kind == "inv_z2_plus_y2_over_z4":
            dens = (1.0 + a1**2 / a2**2) / a2**2
        else:  # xi2_term
            if spec is None or spec.beta == 0:
                raise FormError("xi2_term weight needs a ConfiningSpec with beta != 0")
            if spec.xi == 0:
                raise FormError("xi2_term weight vanishes at xi = 0 (weights must be positive)")
            dens = np.full_like(a1, spec.xi**2 / abs(spec.beta))
        return DiagonalWeight(kind, dens * w)
    x = grid.nodes
    if kind == "identity":
        dens = np.ones_like(x)
    elif kind in ("inv_rho2", "inv_z2", "inv_r2"):
        if isinstance(grid, SignedGrid):
            raise FormError(f"{kind} needs a positive coordinate grid")
        dens = 1.0 / x**2
    else:
        raise FormError(f"weight {kind!r} is not defined on a 1D grid")
    return DiagonalWeight(kind, dens * w)


def angular_spectrum(alpha: float, m_range) -> tuple[list[tuple[int, float]], float]:
    """Channel constants (m, (m+alpha)^2) over m_range and their minimum.

    The minimum over all integers is dist(alpha, Z)^2; the returned minimum
    agrees with it whenever m_range contains round(-alpha).
    """
    ms = list(m_range)
    if not ms:
        raise FormError("empty angular mode range")
    pairs = [(int(m), float((m + alpha) ** 2)) for m in ms]
    return pairs, min(v for _, v in pairs)


def flux_distance_sq(alpha: float) -> float:
    """dist(alpha, Z)^2, the sharp angular Hardy constant."""
    return float(min(abs(alpha - np.floor(alpha)), abs(np.ceil(alpha) - alpha)) ** 2)


def landau_levels(beta: float, z: float, n_max: int) -> np.ndarray:
    """Closed-form fiber levels 2|beta|/z^2 (n + 1/2), n = 0..n_max."""
    if beta == 0:
        raise FormError("beta = 0 has purely continuous fiber spectrum (no levels)")
    if z == 0:
        raise FormError("z = 0 lies on the singular plane")
    n = np.arange(n_max + 1)
    return 2.0 * abs(beta) / z**2 * (n + 0.5)


def ground_state(spec: ConfiningSpec, grid: PlaneGrid) -> GroundStateAnsatz:
    """Per-node lowest-fiber-state data: center y0 = -z^2 xi / beta and
    gaussian profile exp(-|beta| (y-y0)^2 / (2 z^2))."""
    if spec.beta == 0:
        raise FormError("ground state ansatz needs beta != 0")
    Y, Z = grid.meshes()
    y0 = -(Z**2) * spec.xi / spec.beta
    eta = np.exp(-abs(spec.beta) / (2.0 * Z**2) * (Y - y0) ** 2)
    return GroundStateAnsatz(spec.beta, spec.xi, y0.ravel(), eta.ravel())
