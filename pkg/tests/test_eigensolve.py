import numpy as np
import pytest

from conftest import dense_smallest
from hardylab.eigensolve import Pencil, convergence_study, lowest_eigenvalues, smallest_eigenpair
from hardylab.forms import (
    ChannelSpec,
    ConfiningSpec,
    DiagonalWeight,
    assemble_ab_channel,
    assemble_confining,
    assemble_dirichlet_form,
    assemble_weight,
)
from hardylab.grids import LOGARITHMIC, UNIFORM, make_plane_grid, make_radial_grid, make_signed_grid


def hardy_1d_pencil(inner, outer, n, kind=LOGARITHMIC):
    grid = make_radial_grid(kind, inner, outer, n)
    form = assemble_dirichlet_form(grid, "dz")
    weight = assemble_weight("inv_z2", grid, form.quadrature)
    return Pencil(form, weight)


def identity_pencil(grid):
    form = assemble_dirichlet_form(grid, "dz")
    weight = assemble_weight("identity", grid, form.quadrature)
    return Pencil(form, weight)


def oscillator_pencil(beta, z, xi, y_extent, n):
    grid = make_signed_grid(-y_extent, y_extent, n)
    form = assemble_dirichlet_form(grid, "dz")
    form = form.add_potential((xi + beta * grid.nodes / z**2) ** 2)
    weight = assemble_weight("identity", grid, form.quadrature)
    return Pencil(form, weight)


def small_violated_pencil(n=12):
    # beta=0.5 full subtraction is indefinite; exercises the negative branch
    grid = make_plane_grid(make_signed_grid(-6, 6, n),
                           make_radial_grid(LOGARITHMIC, 0.3, 10.0, n))
    form = assemble_confining(ConfiningSpec(0.5, 2.0), grid, subtract="full_thm2")
    weight = assemble_weight("identity", grid, form.quadrature)
    return Pencil(form, weight)


def test_dirichlet_laplacian_on_zero_pi():
    # nodes [h, pi-h] with ghost walls at 0 and pi: exact lowest eigenvalue 1
    n = 400
    h = np.pi / (n + 1)
    res = smallest_eigenpair(identity_pencil(make_radial_grid(UNIFORM, h, np.pi - h, n)))
    assert res.converged
    assert res.lambda_min == pytest.approx(1.0, abs=5 * h**2)


def test_hardy_log_grid_bracket_and_domain_growth():
    res1 = smallest_eigenpair(hardy_1d_pencil(1e-4, 1e4, 400))
    assert 0.25 <= res1.lambda_min <= 0.30
    res2 = smallest_eigenpair(hardy_1d_pencil(1e-6, 1e6, 400))
    assert res2.lambda_min <= res1.lambda_min + 1e-10
    oracle = dense_smallest(hardy_1d_pencil(1e-4, 1e4, 150).H.entries,
                            hardy_1d_pencil(1e-4, 1e4, 150).W.values)
    small = smallest_eigenpair(hardy_1d_pencil(1e-4, 1e4, 150))
    assert small.lambda_min == pytest.approx(oracle, rel=1e-9)


def test_shifted_oscillator_ground_level():
    res = smallest_eigenpair(oscillator_pencil(1.0, 1.0, 0.0, 8.0, 1601))
    assert res.converged
    assert abs(res.lambda_min - 1.0) < 1e-3  # |beta|/z^2 = 1 within 0.1%


def test_matches_dense_oracle_on_small_pencils():
    grids_1d = [hardy_1d_pencil(1e-3, 1e3, n) for n in (40, 120, 200)]
    channels = []
    for alpha, m in ((0.5, 0), (0.3, -1), (2.7, 3)):
        grid = make_radial_grid(LOGARITHMIC, 1e-3, 1e3, 180)
        ch = assemble_ab_channel(ChannelSpec(alpha, 2, m), grid)
        w = assemble_weight("inv_rho2", grid, ch.quadrature)
        channels.append(Pencil(ch, w))
    pencils = grids_1d + channels + [small_violated_pencil(12), oscillator_pencil(2.0, 1.0, 1.0, 6.0, 196)]
    for pencil in pencils:
        assert pencil.H.dimension <= 200
        oracle = dense_smallest(pencil.H.entries, pencil.W.values)
        res = smallest_eigenpair(pencil)
        assert abs(res.lambda_min - oracle) <= 1e-8 * (1 + abs(oracle)), pencil.H.dimension


def test_violated_pencil_reports_negative_bottom():
    pencil = small_violated_pencil(24)
    oracle = dense_smallest(pencil.H.entries, pencil.W.values)
    res = smallest_eigenpair(pencil)
    assert oracle < -1  # genuinely indefinite case
    assert res.lambda_min == pytest.approx(oracle, rel=1e-9)


def test_rescaling_invariance():
    from hardylab.forms import FormMatrix

    pencil = hardy_1d_pencil(1e-3, 1e3, 300)
    base = smallest_eigenpair(pencil).lambda_min
    for c in (1e-6, 3.7, 1e5):
        scaled_h = FormMatrix(pencil.H.stiffness * c, pencil.H.potential * c,
                              pencil.H.grid, pencil.H.quadrature)
        scaled = Pencil(scaled_h, DiagonalWeight(pencil.W.kind, pencil.W.values * c))
        lam = smallest_eigenpair(scaled).lambda_min
        assert lam == pytest.approx(base, rel=1e-10)


def test_domain_monotonicity_same_spacing():
    h = 0.01
    lams = []
    for outer in (2.0, 4.0, 8.0):
        n = int(round(outer / h)) - 1
        lams.append(smallest_eigenpair(identity_pencil(
            make_radial_grid(UNIFORM, h, outer - h, n))).lambda_min)
    assert lams[0] >= lams[1] >= lams[2]


def test_residual_certificate_and_rayleigh_consistency():
    tol = 1e-8
    pencil = hardy_1d_pencil(1e-4, 1e4, 500)
    res = smallest_eigenpair(pencil, tol=tol)
    assert res.converged and res.residual <= tol
    u = res.vector
    W = pencil.W.values
    H = pencil.H.entries
    rq = (u @ (H @ u)) / (u @ (W * u))
    assert abs(rq - res.lambda_min) <= 10 * tol
    # row-balanced residual: ||(Hu - lam Wu)/sqrt(|diag H| + (1+|lam|)W)|| / ||u||_W
    lam = res.lambda_min
    scale = np.sqrt(np.abs(H.diagonal()) + (1.0 + abs(lam)) * W)
    r = np.linalg.norm((H @ u - lam * W * u) / scale) / np.sqrt(u @ (W * u))
    assert r == pytest.approx(res.residual, rel=1e-6, abs=1e-14)


def test_determinism_given_seed():
    pencil = hardy_1d_pencil(1e-4, 1e4, 400)
    a = smallest_eigenpair(pencil, seed=7)
    b = smallest_eigenpair(pencil, seed=7)
    assert a.lambda_min == b.lambda_min
    assert np.array_equal(a.vector, b.vector)
    assert a.iterations == b.iterations


def test_tiny_pencils_use_dense_path():
    pencil = hardy_1d_pencil(0.5, 5.0, 5)
    res = smallest_eigenpair(pencil)
    assert res.converged and res.iterations == 0
    assert res.lambda_min == pytest.approx(dense_smallest(pencil.H.entries, pencil.W.values),
                                           rel=1e-12)


def test_lowest_eigenvalues_oscillator_ladder():
    pencil = oscillator_pencil(1.0, 1.0, 0.0, 10.0, 1500)
    levels = lowest_eigenvalues(pencil, 3)
    assert np.allclose(levels, [1.0, 3.0, 5.0], rtol=1e-3)


def test_convergence_study_rows():
    grids = [make_radial_grid(LOGARITHMIC, 1e-2, 1e2, 60),
             make_radial_grid(LOGARITHMIC, 1e-3, 1e3, 60),
             make_radial_grid(LOGARITHMIC, 1e-4, 1e4, 60)]

    def builder(grid):
        form = assemble_dirichlet_form(grid, "dz")
        return Pencil(form, assemble_weight("inv_z2", grid, form.quadrature))

    rows = convergence_study(builder, grids)
    assert len(rows) == 3 and all(r.error is None for r in rows)
    lams = [r.result.lambda_min for r in rows]
    assert lams[0] >= lams[1] >= lams[2]  # domain growth never raises the bottom
    oracle = dense_smallest(builder(grids[0]).H.entries, builder(grids[0]).W.values)
    assert lams[0] == pytest.approx(oracle, rel=1e-9)

    single = convergence_study(builder, grids[:1])
    assert single[0].result.lambda_min == pytest.approx(
        smallest_eigenpair(builder(grids[0])).lambda_min, abs=0)

    assert convergence_study(builder, []) == []


def test_convergence_study_survives_row_failures():
    grids = [make_radial_grid(LOGARITHMIC, 1e-2, 1e2, 50), "not a grid"]

    def builder(grid):
        form = assemble_dirichlet_form(grid, "dz")
        return Pencil(form, assemble_weight("inv_z2", grid, form.quadrature))

    rows = convergence_study(builder, grids)
    assert rows[0].error is None and rows[0].result.converged
    assert rows[1].error is not None and rows[1].result is None


def test_pencil_dimension_mismatch():
    grid = make_radial_grid(UNIFORM, 1, 3, 5)
    form = assemble_dirichlet_form(grid, "dz")
    other = make_radial_grid(UNIFORM, 1, 3, 7)
    w = assemble_weight("identity", other, assemble_dirichlet_form(other, "dz").quadrature)
    with pytest.raises(ValueError):
        Pencil(form, w)


def test_tol_must_be_positive():
    with pytest.raises(ValueError):
        smallest_eigenpair(hardy_1d_pencil(0.5, 5.0, 20), tol=0.0)
