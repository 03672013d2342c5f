"""Pointwise and quadrature checks of the proof identities.

All checks evaluate analytic test functions (closed-form derivatives) on
quadrature grids, so residuals isolate quadrature error.  Gaussian bumps are
boundary-flat and give residuals near machine precision; the C^1 spline
windows have curvature kinks inside the domain and expose the clean O(h^2)
trapezoid order for refinement studies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grids import PlaneGrid

SUPPORT_RTOL = 1e-12
STAGES = ("form2", "form3", "form4")


class SupportError(ValueError):
    """Test function does not vanish at the truncation boundaries."""


class IdentityError(ValueError):
    """Invalid identity-check request."""


# ---------------------------------------------------------------------------
# ansatz machinery
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnsatzFunction:
    """Real gauge profile f with analytic z-derivative.

    Callables take (beta, xi, y, z) arrays.  The center y0 = -z^2 xi / beta
    depends on z, so d_z f must include the induced d_z(y0^2) = 4 y0^2 / z.
    """

    label: str
    f: Callable
    dz_f: Callable


def _y0_sq(beta, xi, z):
    return z**4 * xi**2 / beta**2


def closed_form_ansatz() -> AnsatzFunction:
    """The quadratic-in-y profile whose potential collapses to
    |beta| (y^2 + y0^2) / z^4."""

    def f(beta, xi, y, z):
        return 0.5 * abs(beta) * (_y0_sq(beta, xi, z) - y**2) / z**3

    def dz_f(beta, xi, y, z):
        # d_z(y0^2) = 4 y0^2 / z
        return 0.5 * abs(beta) * (_y0_sq(beta, xi, z) + 3.0 * y**2) / z**4

    return AnsatzFunction("closed_form", f, dz_f)


def custom_ansatz(f: Callable, dz_f: Callable) -> AnsatzFunction:
    return AnsatzFunction("custom", f, dz_f)


def ansatz_potential(ansatz: AnsatzFunction, beta: float, xi: float, y, z):
    """Five-term gauge potential of the z-substitution step.

    V = -d_z f - f/z - 2 (|b|/z^3)(y^2-y0^2) f - (b^2/z^6)(y^2-y0^2)^2
        + 2 (|b|/z^4)(y^2+y0^2)
    """
    if beta == 0:
        raise IdentityError("the gauge potential needs beta != 0")
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(z == 0):
        raise IdentityError("z = 0 lies on the singular plane")
    ab = abs(beta)
    y0sq = _y0_sq(beta, xi, z)
    g = ab * (y**2 - y0sq) / z**3
    fv = ansatz.f(beta, xi, y, z)
    dzf = ansatz.dz_f(beta, xi, y, z)
    return -dzf - fv / z - 2.0 * g * fv - g**2 + 2.0 * ab * (y**2 + y0sq) / z**4


# ---------------------------------------------------------------------------
# analytic test functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """Fiber test function psi(y, z) with closed-form first derivatives."""

    val: Callable
    dy: Callable
    dz: Callable
    label: str = "custom"


def gaussian_fiber(center: tuple[float, float], widths: tuple[float, float],
                   wave: tuple[float, float] = (0.0, 0.0)) -> TestFunction:
    """Gaussian bump with an optional plane-wave phase (analytic everywhere)."""
    cy, cz = center
    wy, wz = widths
    ky, kz = wave

    def val(y, z):
        return np.exp(-(((y - cy) / wy) ** 2) - (((z - cz) / wz) ** 2)
                      + 1j * (ky * y + kz * z))

    def dy(y, z):
        return val(y, z) * (-2.0 * (y - cy) / wy**2 + 1j * ky)

    def dz(y, z):
        return val(y, z) * (-2.0 * (z - cz) / wz**2 + 1j * kz)

    return TestFunction(val, dy, dz, "gaussian")


def _spline2(t):
    # C^1 piecewise-quadratic bump on [-1, 1]; curvature jumps at |t| = 1/2
    t = np.abs(t)
    return np.where(t <= 0.5, 1.0 - 2.0 * t * t,
                    np.where(t <= 1.0, 2.0 * (1.0 - t) ** 2, 0.0))


def _dspline2(t):
    s = np.sign(t)
    t = np.abs(t)
    return s * np.where(t <= 0.5, -4.0 * t, np.where(t <= 1.0, -4.0 * (1.0 - t), 0.0))


def spline_window(center: tuple[float, float], halfwidths: tuple[float, float]) -> TestFunction:
    """C^1 window, compactly supported; the interior curvature jumps keep
    quadrature residuals at the plain trapezoid order h^2 (analytic bumps
    superconverge and hide the order)."""
    cy, cz = center
    ay, az = halfwidths

    def val(y, z):
        return _spline2((y - cy) / ay) * _spline2((z - cz) / az)

    def dy(y, z):
        return _dspline2((y - cy) / ay) / ay * _spline2((z - cz) / az)

    def dz(y, z):
        return _spline2((y - cy) / ay) * _dspline2((z - cz) / az) / az

    return TestFunction(val, dy, dz, "spline_window")


def _check_fiber_support(test: TestFunction, grid: PlaneGrid) -> None:
    y, z = grid.axis1.nodes, grid.axis2.nodes
    Y, Z = grid.meshes()
    scale = float(np.max(np.abs(test.val(Y, Z)))) or 1.0
    edges_y = np.array([y[0], y[-1]])
    edges_z = np.array([z[0], z[-1]])
    worst = 0.0
    for f in (test.val, test.dy, test.dz):
        worst = max(worst, float(np.max(np.abs(f(edges_y[:, None], z[None, :])))))
        worst = max(worst, float(np.max(np.abs(f(y[:, None], edges_z[None, :])))))
    if worst > SUPPORT_RTOL * max(scale, 1.0):
        raise SupportError(
            f"test function does not vanish at the grid boundary (max {worst:.2e}); "
            "boundary terms would pollute the integration by parts")


# ---------------------------------------------------------------------------
# substitution-chain identities
# ---------------------------------------------------------------------------

def substitution_identity_residual(stage: str, test: TestFunction, spec, grid: PlaneGrid,
                                   ansatz: AnsatzFunction | None = None) -> float:
    """Relative quadrature residual |LHS - RHS| / (|LHS| + |RHS| + eps) of the
    successive-substitution identities for the fibered confining form.

    LHS is the fiber form of psi minus the split-off Hardy terms; RHS is the
    transformed integrand after psi = sqrt(z) phi (form2), the gaussian
    ground-profile split (form3), and the gauge completion with its potential
    (form4; needs the ansatz).  The completed square carries a -f^2 relative
    to the five-term potential.
    """
    if stage not in STAGES:
        raise IdentityError(f"unknown stage {stage!r}; choose from {STAGES}")
    if stage == "form4" and ansatz is None:
        raise IdentityError("form4 requires an ansatz")
    beta, xi = spec.beta, spec.xi
    if stage in ("form3", "form4") and beta == 0:
        raise IdentityError(f"{stage} requires beta != 0 (gaussian fiber profile)")
    _check_fiber_support(test, grid)
    Y, Z = grid.meshes()
    w = np.outer(_trapz_weights(grid.axis1.nodes), _trapz_weights(grid.axis2.nodes))

    P = test.val(Y, Z)
    Py = test.dy(Y, Z)
    Pz = test.dz(Y, Z)
    a2 = lambda v: np.abs(v) ** 2

    pot = (xi + beta * Y / Z**2) ** 2
    fiber_form = np.sum(w * (pot * a2(P) + a2(Py) + a2(Pz)))
    hardy_z = np.sum(w * a2(P) / Z**2)

    # psi = sqrt(z) phi
    phi = P / np.sqrt(Z)
    phi_y = Py / np.sqrt(Z)
    phi_z = (Pz - P / (2.0 * Z)) / np.sqrt(Z)

    if stage == "form2":
        lhs = fiber_form - 0.25 * hardy_z
        rhs = np.sum(w * Z * (pot * a2(phi) + a2(phi_y) + a2(phi_z)))
        return _rel(lhs, rhs)

    ab = abs(beta)
    lhs = fiber_form - (0.25 + ab) * hardy_z
    y0 = -(Z**2) * xi / beta
    # eta-free forms: d_y(eta)/eta = -|b|(y-y0)/z^2, d_z(eta)/eta = g
    osc_y = a2(phi_y + ab * (Y - y0) / Z**2 * phi)
    if stage == "form3":
        rhs = np.sum(w * Z * (osc_y + a2(phi_z)))
        return _rel(lhs, rhs)

    g = ab * (Y**2 - y0**2) / Z**3
    fv = ansatz.f(beta, xi, Y, Z)
    v5 = ansatz_potential(ansatz, beta, xi, Y, Z)
    gauge_z = a2(phi_z - (g + fv) * phi)
    rhs = np.sum(w * Z * (osc_y + gauge_z + (v5 - fv**2) * a2(phi)))
    return _rel(lhs, rhs)


def _rel(lhs: float, rhs: float) -> float:
    return float(abs(lhs - rhs) / (abs(lhs) + abs(rhs) + 1e-300))


def _trapz_weights(x: np.ndarray) -> np.ndarray:
    w = np.empty_like(x)
    w[0] = (x[1] - x[0]) / 2.0
    w[-1] = (x[-1] - x[-2]) / 2.0
    w[1:-1] = (x[2:] - x[:-2]) / 2.0
    return w


# ---------------------------------------------------------------------------
# 3D boxes and magnetic gradients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Box3:
    """Uniform 3D quadrature box; z stays positive for the confining field."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def meshes(self):
        return np.meshgrid(self.x, self.y, self.z, indexing="ij")

    def weights(self):
        wx, wy, wz = (_trapz_weights(a) for a in (self.x, self.y, self.z))
        return wx[:, None, None] * wy[None, :, None] * wz[None, None, :]


def make_box3(center: tuple[float, float, float], half: tuple[float, float, float],
              n: int | tuple[int, int, int]) -> Box3:
    ns = (n, n, n) if isinstance(n, int) else n
    axes = [np.linspace(c - h, c + h, ni) for c, h, ni in zip(center, half, ns)]
    return Box3(*axes)


@dataclass(frozen=True)
class TestFunction3:
    """3D test function with closed-form gradient components."""

    val: Callable
    dx: Callable
    dy: Callable
    dz: Callable
    label: str = "custom"


def gaussian3(center: tuple[float, float, float], widths: tuple[float, float, float],
              wave: tuple[float, float, float] = (0.0, 0.0, 0.0),
              phase_xy: float = 0.0) -> TestFunction3:
    """Gaussian bump times exp(i(k.x + c xy)); polynomial phases keep the
    gradient closed-form while exercising complex-valued identities."""
    cx, cy, cz = center
    wx, wy, wz = widths
    kx, ky, kz = wave

    def phase(x, y, z):
        return kx * x + ky * y + kz * z + phase_xy * (x - cx) * (y - cy)

    def val(x, y, z):
        return np.exp(-(((x - cx) / wx) ** 2) - (((y - cy) / wy) ** 2)
                      - (((z - cz) / wz) ** 2) + 1j * phase(x, y, z))

    def dx(x, y, z):
        return val(x, y, z) * (-2.0 * (x - cx) / wx**2 + 1j * (kx + phase_xy * (y - cy)))

    def dy(x, y, z):
        return val(x, y, z) * (-2.0 * (y - cy) / wy**2 + 1j * (ky + phase_xy * (x - cx)))

    def dz(x, y, z):
        return val(x, y, z) * (-2.0 * (z - cz) / wz**2 + 1j * kz)

    return TestFunction3(val, dx, dy, dz, "gaussian3")


def confining_vector_potential(beta: float, x, y, z):
    return (beta * y / z**2, np.zeros_like(x), np.zeros_like(x))


def ab_vector_potential(alpha: float, x, y, z):
    rho2 = x**2 + y**2
    return (-alpha * y / rho2, alpha * x / rho2, np.zeros_like(z))


def field_tensor(beta: float, j: int, k: int, x, y, z):
    """Entries d_j A_k - d_k A_j of the confining field; antisymmetric,
    nonzero only in the (1,2) and (1,3) planes."""
    if j not in (1, 2, 3) or k not in (1, 2, 3):
        raise IdentityError("component indices are 1..3")
    zero = np.zeros_like(y * z, dtype=float)
    if (j, k) == (1, 2):
        return -beta / z**2 + zero
    if (j, k) == (2, 1):
        return beta / z**2 + zero
    if (j, k) == (1, 3):
        return 2.0 * beta * y / z**3 + zero
    if (j, k) == (3, 1):
        return -2.0 * beta * y / z**3 + zero
    return zero


@dataclass(frozen=True)
class MagneticGradient:
    """Components Pi_j = -i d_j + A_j of the confining magnetic gradient."""

    beta: float

    def apply(self, j: int, test: TestFunction3, x, y, z):
        if j not in (1, 2, 3):
            raise IdentityError("component indices are 1..3")
        A = confining_vector_potential(self.beta, x, y, z)
        grad = (test.dx, test.dy, test.dz)[j - 1](x, y, z)
        return -1j * grad + A[j - 1] * test.val(x, y, z)

    def field(self, j: int, k: int, x, y, z):
        return field_tensor(self.beta, j, k, x, y, z)


def _check_box_support(test: TestFunction3, box: Box3) -> None:
    X, Y, Z = box.meshes()
    scale = float(np.max(np.abs(test.val(X, Y, Z)))) or 1.0
    worst = 0.0
    for axis, arr in (("x", box.x), ("y", box.y), ("z", box.z)):
        for f in (test.val, test.dx, test.dy, test.dz):
            if axis == "x":
                v = f(arr[[0, -1], None, None], box.y[None, :, None], box.z[None, None, :])
            elif axis == "y":
                v = f(box.x[:, None, None], arr[None, [0, -1], None], box.z[None, None, :])
            else:
                v = f(box.x[:, None, None], box.y[None, :, None], arr[None, None, [0, -1]])
            worst = max(worst, float(np.max(np.abs(v))))
    if worst > SUPPORT_RTOL * max(scale, 1.0):
        raise SupportError(f"3D test function does not vanish at the box boundary ({worst:.2e})")


def commutator_identity_residual(psi: TestFunction3, j: int, k: int, sign: int,
                                 beta: float, box: Box3) -> float:
    """Relative residual of
    ||Pi_j psi||^2 + ||Pi_k psi||^2 = ||(Pi_j +- i Pi_k) psi||^2 -+ <psi, B_jk psi>.

    With Pi_j = -i d_j + A_j and B_jk = d_j A_k - d_k A_j the field term
    enters with the sign opposite to the one on i Pi_k ([Pi_j, Pi_k] = -i B_jk).
    """
    if sign not in (+1, -1):
        raise IdentityError("sign must be +1 or -1")
    if np.any(box.z <= 0):
        raise IdentityError("box must stay in the half-space z > 0")
    _check_box_support(psi, box)
    X, Y, Z = box.meshes()
    w = box.weights()
    pi = MagneticGradient(beta)
    pj = pi.apply(j, psi, X, Y, Z)
    pk = pi.apply(k, psi, X, Y, Z)
    P = psi.val(X, Y, Z)
    lhs = float(np.sum(w * (np.abs(pj) ** 2 + np.abs(pk) ** 2)))
    rhs = float(np.sum(w * np.abs(pj + 1j * sign * pk) ** 2)
                - sign * np.sum(w * pi.field(j, k, X, Y, Z) * np.abs(P) ** 2))
    return _rel(lhs, rhs)


def diamagnetic_margin(psi: TestFunction3, potential: tuple[str, float], box: Box3) -> float:
    """||(grad + iA) psi||^2 - ||grad |psi| ||^2 by quadrature (always >= 0
    up to quadrature error)."""
    kind, value = potential
    X, Y, Z = box.meshes()
    if kind == "ab":
        if np.any(np.isclose(X**2 + Y**2, 0.0)):
            raise IdentityError("box touches the flux line rho = 0")
        A = ab_vector_potential(value, X, Y, Z)
    elif kind == "confining":
        if np.any(box.z <= 0):
            raise IdentityError("box must stay in the half-space z > 0")
        A = confining_vector_potential(value, X, Y, Z)
    else:
        raise IdentityError(f"unknown potential kind {kind!r}")
    _check_box_support(psi, box)
    w = box.weights()
    P = psi.val(X, Y, Z)
    grads = [f(X, Y, Z) for f in (psi.dx, psi.dy, psi.dz)]
    magnetic = sum(np.abs(g + 1j * a * P) ** 2 for g, a in zip(grads, A))
    absP = np.abs(P)
    safe = np.maximum(absP, 1e-300)
    modulus = sum((np.real(np.conj(P) * g) / safe) ** 2 for g in grads)
    modulus = np.where(absP > 0, modulus, 0.0)
    return float(np.sum(w * magnetic) - np.sum(w * modulus))


# ---------------------------------------------------------------------------
# Weyl quasimodes
# ---------------------------------------------------------------------------

def weyl_residual(beta: float, k: float, n: float, points_per_width: float = 8.0,
                  h_max: float = 0.3, half_extent: float = 3.5) -> float:
    """|| (-Delta_beta - k^2) psi_n || / || psi_n || for the plane-wave packet
    e^{ikz} exp(-|x - (0,0,n)|^2 / w^2), w = n/4, localized inside the cone
    |y| < |z| where the field terms decay.

    Accumulates the quadrature over z slabs; derivatives are analytic.
    """
    if k < 0:
        raise IdentityError("wavenumber k must be >= 0")
    if n < 1:
        raise IdentityError("packet scale n must be >= 1")
    w = n / 4.0
    h = min(w / points_per_width, h_max)
    ext = half_extent * w
    xs = np.arange(-ext, ext + h / 2, h)
    ys = np.arange(-ext, ext + h / 2, h)
    zs = np.arange(max(n - ext, h), n + ext + h / 2, h)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    w2 = w * w
    num = 0.0
    den = 0.0
    for z in zs:
        g = np.exp(-(X**2 + Y**2 + (z - n) ** 2) / w2)
        gx = g * (-2.0 * X / w2)
        gz = g * (-2.0 * (z - n) / w2)
        lap = g * ((4.0 * X**2 / w2**2 - 2.0 / w2) + (4.0 * Y**2 / w2**2 - 2.0 / w2)
                   + (4.0 * (z - n) ** 2 / w2**2 - 2.0 / w2))
        # (-Delta_b - k^2) [e^{ikz} g] = e^{ikz} [(-lap + b^2 y^2/z^4 g)
        #                                          - i (2 k g_z + 2 (b/z^2) y g_x)]
        re = -lap + (beta**2 * Y**2 / z**4) * g
        im = -(2.0 * k * gz + 2.0 * (beta / z**2) * Y * gx)
        num += float(np.sum(re**2 + im**2))
        den += float(np.sum(g**2))
    return float(np.sqrt(num / den))
