import numpy as np
import pytest
from scipy.integrate import simpson

from hardylab.forms import ConfiningSpec
from hardylab.grids import UNIFORM, make_plane_grid, make_radial_grid, make_signed_grid
from hardylab.identities import (
    AnsatzFunction,
    IdentityError,
    MagneticGradient,
    SupportError,
    ansatz_potential,
    closed_form_ansatz,
    commutator_identity_residual,
    spline_window,
    custom_ansatz,
    diamagnetic_margin,
    field_tensor,
    gaussian3,
    gaussian_fiber,
    make_box3,
    substitution_identity_residual,
    weyl_residual,
)


def fiber_grid(n=801, z_lo=0.4, z_hi=8.0):
    return make_plane_grid(make_signed_grid(-10.0, 10.0, n),
                           make_radial_grid(UNIFORM, z_lo, z_hi, n))


BUMP = gaussian_fiber((0.6, 3.8), (1.1, 0.55), wave=(0.4, 0.3))


# ---------------------------------------------------------------------------
# gauge potential
# ---------------------------------------------------------------------------

def test_ansatz_potential_closed_form_collapse(rng):
    ansatz = closed_form_ansatz()
    n = 10_000
    beta = rng.uniform(0.1, 10.0, n) * rng.choice([-1.0, 1.0], n)
    xi = rng.uniform(-5.0, 5.0, n)
    y = rng.uniform(-5.0, 5.0, n)
    z = rng.uniform(0.5, 2.0, n) * rng.choice([-1.0, 1.0], n)
    got = np.array([ansatz_potential(ansatz, b, x, yy, zz)
                    for b, x, yy, zz in zip(beta, xi, y, z)])
    y0sq = z**4 * xi**2 / beta**2
    expected = np.abs(beta) / z**4 * (y**2 + y0sq)
    assert np.max(np.abs(got - expected) / np.abs(expected)) <= 1e-12


def test_ansatz_potential_collapse_wide_domain(rng):
    # cancellation between the g^2 and 2|b|(y^2+y0^2)/z^4 terms amplifies
    # roundoff roughly by beta*max(y^2, y0^2)/z^2, so the bound widens here
    ansatz = closed_form_ansatz()
    n = 2000
    beta = rng.uniform(0.1, 10.0, n)
    xi = rng.uniform(-5.0, 5.0, n)
    y = rng.uniform(-10.0, 10.0, n)
    z = rng.uniform(0.05, 20.0, n)
    got = np.array([ansatz_potential(ansatz, b, x, yy, zz)
                    for b, x, yy, zz in zip(beta, xi, y, z)])
    y0sq = z**4 * xi**2 / beta**2
    expected = np.abs(beta) / z**4 * (y**2 + y0sq)
    assert np.max(np.abs(got - expected) / np.abs(expected)) <= 1e-10


def test_ansatz_potential_point_values():
    assert ansatz_potential(closed_form_ansatz(), 1.0, 0.0, 2.0, 1.0) == pytest.approx(4.0)
    zero = custom_ansatz(lambda b, x, y, z: np.zeros_like(y * z),
                         lambda b, x, y, z: np.zeros_like(y * z))
    # only -g^2 + 2|b|(y^2+y0^2)/z^4 survive: -1 + 2 = 1
    assert ansatz_potential(zero, 1.0, 0.0, 1.0, 1.0) == pytest.approx(1.0)


def test_ansatz_potential_rejects_singular_inputs():
    ansatz = closed_form_ansatz()
    with pytest.raises(IdentityError):
        ansatz_potential(ansatz, 0.0, 0.0, 1.0, 1.0)
    with pytest.raises(IdentityError):
        ansatz_potential(ansatz, 1.0, 0.0, 1.0, 0.0)


# ---------------------------------------------------------------------------
# substitution chain
# ---------------------------------------------------------------------------

def test_substitution_residuals_gaussian_fine_grid():
    grid = fiber_grid(1201)
    spec = ConfiningSpec(1.0, 0.7)
    ansatz = closed_form_ansatz()
    assert substitution_identity_residual("form2", BUMP, spec, grid) < 1e-6
    assert substitution_identity_residual("form3", BUMP, spec, grid) < 1e-6
    assert substitution_identity_residual("form4", BUMP, spec, grid, ansatz) < 1e-6


def test_substitution_form2_works_without_field():
    grid = fiber_grid(601)
    assert substitution_identity_residual("form2", BUMP, ConfiningSpec(0.0, 0.4), grid) < 1e-6


def test_substitution_second_order_decay():
    # C^1 window with curvature kinks on grid nodes at every refinement level:
    # residuals follow the plain trapezoid order h^2 (factor 4 per halving)
    window = spline_window((0.5, 3.06), (6.0, 1.976))
    spec = ConfiningSpec(1.2, -0.6)
    ansatz = closed_form_ansatz()
    for stage, extra in (("form2", {}), ("form3", {}), ("form4", {"ansatz": ansatz})):
        res = [substitution_identity_residual(stage, window, spec, fiber_grid(n), **extra)
               for n in (201, 401, 801)]
        orders = [np.log2(a / b) for a, b in zip(res, res[1:])]
        assert res[0] > res[1] > res[2]
        for p in orders:
            assert 1.7 <= p <= 2.4, (stage, res)


def test_substitution_identity_simpson_oracle():
    # independent higher-order quadrature of both sides (test-local integrands)
    n = 801
    y = np.linspace(-10, 10, n)
    z = np.linspace(0.4, 8.0, n)
    Y, Z = np.meshgrid(y, z, indexing="ij")
    beta, xi = 1.0, 0.7
    P, Py, Pz = BUMP.val(Y, Z), BUMP.dy(Y, Z), BUMP.dz(Y, Z)
    a2 = lambda v: np.abs(v) ** 2
    integ = lambda F: simpson(simpson(F, x=z, axis=1), x=y)
    pot = (xi + beta * Y / Z**2) ** 2
    lhs2 = integ(pot * a2(P) + a2(Py) + a2(Pz)) - 0.25 * integ(a2(P) / Z**2)
    phi = P / np.sqrt(Z)
    phi_y = Py / np.sqrt(Z)
    phi_z = (Pz - P / (2 * Z)) / np.sqrt(Z)
    rhs2 = integ(Z * (pot * a2(phi) + a2(phi_y) + a2(phi_z)))
    assert abs(lhs2 - rhs2) / (abs(lhs2) + abs(rhs2)) < 1e-9

    # form4 with the closed-form gauge: completed square + (V - f^2) density
    ab = abs(beta)
    y0 = -(Z**2) * xi / beta
    g = ab * (Y**2 - y0**2) / Z**3
    f = 0.5 * ab * (y0**2 - Y**2) / Z**3
    v5 = ab * (Y**2 + y0**2) / Z**4  # collapsed five-term potential
    lhs4 = integ(pot * a2(P) + a2(Py) + a2(Pz)) - (0.25 + ab) * integ(a2(P) / Z**2)
    osc = a2(phi_y + ab * (Y - y0) / Z**2 * phi)
    rhs4 = integ(Z * (osc + a2(phi_z - (g + f) * phi) + (v5 - f**2) * a2(phi)))
    assert abs(lhs4 - rhs4) / (abs(lhs4) + abs(rhs4)) < 1e-9
    # without the -f^2 correction the printed potential misses the identity
    rhs4_printed = integ(Z * (osc + a2(phi_z - (g + f) * phi) + v5 * a2(phi)))
    assert abs(lhs4 - rhs4_printed) / (abs(lhs4) + abs(rhs4_printed)) > 1e-3


def test_substitution_stage_validation():
    grid = fiber_grid(201)
    spec = ConfiningSpec(1.0, 0.0)
    with pytest.raises(IdentityError):
        substitution_identity_residual("form1", BUMP, spec, grid)
    with pytest.raises(IdentityError):
        substitution_identity_residual("form4", BUMP, spec, grid)  # missing ansatz
    with pytest.raises(IdentityError):
        substitution_identity_residual("form3", BUMP, ConfiningSpec(0.0, 0.0), grid)


def test_substitution_support_violation():
    grid = fiber_grid(201, z_lo=3.0, z_hi=4.0)  # bump center z=3.4 leaks out
    with pytest.raises(SupportError):
        substitution_identity_residual("form2", BUMP, ConfiningSpec(1.0, 0.0), grid)


# ---------------------------------------------------------------------------
# commutator identity and field tensor
# ---------------------------------------------------------------------------

BOX = make_box3((0.0, 0.0, 3.0), (2.5, 2.5, 2.5), 64)
PSI3 = gaussian3((0.2, -0.1, 3.05), (0.40, 0.42, 0.38), wave=(0.8, 0.4, 0.6), phase_xy=0.3)


def test_commutator_field_free():
    for (j, k) in ((1, 2), (1, 3), (2, 3)):
        for sign in (1, -1):
            assert commutator_identity_residual(PSI3, j, k, sign, 0.0, BOX) < 1e-8


def test_commutator_with_field_both_signs():
    for sign in (1, -1):
        assert commutator_identity_residual(PSI3, 1, 2, sign, 1.0, BOX) < 1e-6
        assert commutator_identity_residual(PSI3, 1, 3, sign, 1.0, BOX) < 1e-6


def test_commutator_23_plane_has_no_field_term():
    X, Y, Z = BOX.meshes()
    assert np.all(field_tensor(1.5, 2, 3, X, Y, Z) == 0.0)
    assert commutator_identity_residual(PSI3, 2, 3, 1, 1.5, BOX) < 1e-8


def test_commutator_swap_with_sign_flip():
    a = commutator_identity_residual(PSI3, 1, 2, 1, 0.8, BOX)
    b = commutator_identity_residual(PSI3, 2, 1, -1, 0.8, BOX)
    assert a < 1e-9 and b < 1e-9
    assert abs(a - b) < 1e-9


def test_commutator_validation():
    with pytest.raises(IdentityError):
        commutator_identity_residual(PSI3, 1, 2, 0, 1.0, BOX)
    with pytest.raises(IdentityError):
        commutator_identity_residual(PSI3, 0, 2, 1, 1.0, BOX)
    bad_box = make_box3((0.0, 0.0, 0.5), (1.0, 1.0, 1.0), 16)
    with pytest.raises(IdentityError):
        commutator_identity_residual(PSI3, 1, 2, 1, 1.0, bad_box)


def test_field_tensor_closed_forms(rng):
    y = rng.uniform(-3, 3, 50)
    z = rng.uniform(0.2, 5, 50)
    beta = 1.7
    assert np.allclose(field_tensor(beta, 1, 2, 0, y, z), -beta / z**2)
    assert np.allclose(field_tensor(beta, 1, 3, 0, y, z), 2 * beta * y / z**3)
    assert np.all(field_tensor(beta, 2, 3, 0, y, z) == 0)
    for j in (1, 2, 3):
        for k in (1, 2, 3):
            assert np.allclose(field_tensor(beta, j, k, 0, y, z),
                               -field_tensor(beta, k, j, 0, y, z))


def test_magnetic_gradient_apply_matches_definition():
    X, Y, Z = BOX.meshes()
    pi = MagneticGradient(0.9)
    got = pi.apply(1, PSI3, X, Y, Z)
    expected = -1j * PSI3.dx(X, Y, Z) + (0.9 * Y / Z**2) * PSI3.val(X, Y, Z)
    assert np.allclose(got, expected, rtol=0, atol=0)


# ---------------------------------------------------------------------------
# diamagnetic inequality
# ---------------------------------------------------------------------------

def test_diamagnetic_equality_for_real_field_free():
    psi = gaussian3((0.1, 0.0, 3.0), (0.4, 0.4, 0.4))
    margin = diamagnetic_margin(psi, ("confining", 0.0), BOX)
    assert abs(margin) < 1e-14


def test_diamagnetic_real_psi_cross_term_vanishes():
    psi = gaussian3((0.1, 0.0, 3.0), (0.4, 0.4, 0.4))
    margin = diamagnetic_margin(psi, ("confining", 1.0), BOX)
    X, Y, Z = BOX.meshes()
    w = BOX.weights()
    expected = float(np.sum(w * (Y / Z**2) ** 2 * np.abs(psi.val(X, Y, Z)) ** 2))
    assert margin == pytest.approx(expected, rel=1e-12)
    assert margin > 0


def test_diamagnetic_random_phases_nonnegative(rng):
    box = make_box3((0.0, 0.0, 3.0), (2.2, 2.2, 2.2), 40)
    for _ in range(100):
        wave = tuple(rng.uniform(-1.5, 1.5, 3))
        pxy = float(rng.uniform(-0.5, 0.5))
        psi = gaussian3((0.0, 0.0, 3.0), (0.35, 0.35, 0.35), wave=wave, phase_xy=pxy)
        kind = ("confining", float(rng.uniform(-2, 2)))
        assert diamagnetic_margin(psi, kind, box) >= -1e-8


def test_diamagnetic_ab_potential_box_off_axis():
    box = make_box3((3.0, 0.0, 0.0), (1.2, 1.2, 1.2), 40)
    psi = gaussian3((3.0, 0.0, 0.0), (0.2, 0.2, 0.2), wave=(0.3, -0.2, 0.1))
    assert diamagnetic_margin(psi, ("ab", 0.5), box) >= -1e-10
    on_axis = make_box3((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), 9)
    with pytest.raises(IdentityError):
        diamagnetic_margin(psi, ("ab", 0.5), on_axis)


# ---------------------------------------------------------------------------
# Weyl quasimodes
# ---------------------------------------------------------------------------

def test_weyl_free_laplacian_rate():
    rs = [weyl_residual(0.0, 1.0, n) for n in (8, 16, 32)]
    ratios = [b / a for a, b in zip(rs, rs[1:])]
    for r in ratios:
        assert 0.35 <= r <= 0.65  # O(1/n): halves when n doubles


def test_weyl_strictly_decreasing():
    for beta in (1.0,):
        for k in (0.0, 1.0):
            rs = [weyl_residual(beta, k, n) for n in (8, 16, 32)]
            assert rs[0] > rs[1] > rs[2]


def test_weyl_validation():
    with pytest.raises(IdentityError):
        weyl_residual(1.0, -0.5, 8)
    with pytest.raises(IdentityError):
        weyl_residual(1.0, 1.0, 0.5)
