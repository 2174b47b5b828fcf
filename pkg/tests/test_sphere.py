"""Grid construction, spherical-harmonic transforms, and operator identities."""

import numpy as np
import pytest
from scipy.special import gammaln, lpmv

from conftest import field_l2, get_grid, random_bandlimited
from els2.errors import ConfigError, GridMismatchError
from els2.sphere import (ScalarField, TangentField, build_grid, curl_s,
                         divergence, gradient, integrate, laplacian, rot,
                         sh_analysis, sh_synthesis, surface_velocity_gradient)

FOUR_PI = 4.0 * np.pi


# ---------------------------------------------------------------------------
# grid invariants
# ---------------------------------------------------------------------------


def test_build_grid_sizes_and_weights(grid15):
    assert grid15.n_lat == 16
    assert grid15.n_lon == 32
    total = grid15.integrate(np.ones(grid15.shape))
    assert abs(total - FOUR_PI) <= 1e-12 * FOUR_PI


def test_node_normals_unit(grid15):
    norms = np.linalg.norm(grid15.nodes, axis=-1)
    assert np.max(np.abs(norms - 1.0)) <= 1e-14


def test_grid_resolution_bounds(grid31):
    assert grid31.n_lat >= grid31.l_max + 1
    assert grid31.n_lon >= 2 * grid31.l_max + 1


def test_build_grid_rejects_small_truncation():
    with pytest.raises(ConfigError):
        build_grid(3)


def test_frame_is_orthonormal_and_oriented(grid15):
    g = grid15
    assert np.max(np.abs(np.einsum("jki,jki->jk", g.e_theta, g.e_phi))) < 1e-14
    assert np.max(np.abs(np.einsum("jki,jki->jk", g.e_theta, g.nodes))) < 1e-14
    cross = np.cross(g.e_theta, g.e_phi)
    assert np.max(np.abs(cross - g.nodes)) < 1e-13


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


def test_integrate_constant(grid15):
    f = ScalarField(grid15, np.ones(grid15.shape))
    assert abs(integrate(f) - FOUR_PI) < 1e-12


def test_integrate_harmonic_is_zero(grid15):
    f = ScalarField(grid15, grid15.real_harmonic(5, 3))
    assert abs(integrate(f)) < 1e-12


def test_integrate_nz_squared(grid15):
    f = ScalarField(grid15, grid15.nodes[..., 2] ** 2)
    assert abs(integrate(f) - FOUR_PI / 3.0) < 1e-12


def test_integrate_nz_squared_large():
    g = get_grid(31)
    assert abs(g.integrate(g.nodes[..., 2] ** 2) - FOUR_PI / 3.0) < 1e-12


def test_harmonic_orthonormality():
    # all resolved real-harmonic pairs on a small grid
    g = get_grid(10)
    fields = {}
    for l in range(0, 8):
        for m in range(-l, l + 1):
            fields[(l, m)] = g.real_harmonic(l, m)
    keys = list(fields)
    for i, ki in enumerate(keys):
        for kj in keys[i:]:
            val = g.integrate(fields[ki] * fields[kj])
            expected = 1.0 if ki == kj else 0.0
            assert abs(val - expected) < 1e-10, (ki, kj, val)


# ---------------------------------------------------------------------------
# associated Legendre tables against an independent construction
# ---------------------------------------------------------------------------


def _pbar_reference(l, m, mu):
    log_norm = 0.5 * (
        np.log((2 * l + 1) / FOUR_PI) + gammaln(l - m + 1) - gammaln(l + m + 1)
    )
    return np.exp(log_norm) * lpmv(m, l, mu)


def test_legendre_tables_match_scipy(grid15):
    g = grid15
    for l, m in [(0, 0), (1, 0), (1, 1), (4, 2), (9, 7), (15, 15), (15, 3)]:
        ref = _pbar_reference(l, m, g.mu)
        assert np.max(np.abs(g._pbar[m, :, l] - ref)) < 1e-12 * max(
            1.0, np.max(np.abs(ref))
        ), (l, m)


def test_legendre_theta_derivative_finite_difference():
    g = get_grid(15)
    h = 1e-6
    for l, m in [(1, 0), (3, 2), (8, 5), (15, 15)]:
        theta = g.theta
        plus = _pbar_reference(l, m, np.cos(theta + h))
        minus = _pbar_reference(l, m, np.cos(theta - h))
        fd = (plus - minus) / (2 * h)
        assert np.max(np.abs(g._dpbar[m, :, l] - fd)) < 1e-7, (l, m)


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------


def test_analysis_of_single_harmonic(grid15):
    f = ScalarField(grid15, grid15.real_harmonic(1, 0))
    c = sh_analysis(f)
    assert abs(c[1, 0] - 1.0) < 1e-13
    c[1, 0] = 0.0
    assert np.max(np.abs(c)) < 1e-13


def test_analysis_of_constant(grid15):
    f = ScalarField(grid15, np.full(grid15.shape, 2.5))
    c = sh_analysis(f)
    assert abs(c[0, 0] - 2.5 * np.sqrt(FOUR_PI)) < 1e-12
    c[0, 0] = 0.0
    assert np.max(np.abs(c)) < 1e-12


def test_roundtrip_random_bandlimited(grid31):
    rng = np.random.default_rng(7)
    f, c = random_bandlimited(grid31, grid31.l_max, rng)
    c2 = grid31.analysis(f)
    scale = np.max(np.abs(f))
    assert np.max(np.abs(c2 - c)) < 1e-12 * scale
    f2 = sh_synthesis(grid31, c2).values
    assert np.max(np.abs(f2 - f)) < 1e-12 * scale


def test_transform_grid_mismatch(grid15, grid31):
    f = ScalarField(grid15, np.ones(grid15.shape))
    with pytest.raises(GridMismatchError):
        ScalarField(grid31, f.values)


# ---------------------------------------------------------------------------
# laplacian
# ---------------------------------------------------------------------------


def test_laplacian_eigenfunctions(grid15):
    y10 = ScalarField(grid15, grid15.real_harmonic(1, 0))
    assert np.max(np.abs(laplacian(y10).values + 2.0 * y10.values)) < 1e-12

    y21 = ScalarField(grid15, grid15.real_harmonic(2, 1))
    assert np.max(np.abs(laplacian(y21).values + 6.0 * y21.values)) < 1e-12


def test_laplacian_constant_is_zero(grid15):
    f = ScalarField(grid15, np.full(grid15.shape, 3.0))
    assert np.max(np.abs(laplacian(f).values)) < 1e-12


def test_laplacian_eigenvalues_full_band(grid31):
    # every resolved (l, m) with l <= L_max - 1
    g = grid31
    worst = 0.0
    for l in range(0, g.l_max):
        for m in range(-l, l + 1):
            y = g.real_harmonic(l, m)
            err = np.max(np.abs(g.laplacian_values(y) + l * (l + 1) * y))
            worst = max(worst, err)
    assert worst < 1e-9


# ---------------------------------------------------------------------------
# gradient / divergence / rot / curl
# ---------------------------------------------------------------------------


def test_gradient_of_constant(grid15):
    f = ScalarField(grid15, np.full(grid15.shape, 4.2))
    assert np.max(np.abs(gradient(f).values)) < 1e-12


def test_gradient_matches_analytic(grid15):
    # Y_1^0 = sqrt(3/4pi) cos(theta); gradient = -sqrt(3/4pi) sin(theta) e_theta
    g = grid15
    c = np.sqrt(3.0 / FOUR_PI)
    grad = gradient(ScalarField(g, g.real_harmonic(1, 0))).values
    expected = -c * g.sin_theta[:, None, None] * g.e_theta
    assert np.max(np.abs(grad - expected)) < 1e-13


def test_divergence_of_rot_is_zero(grid15):
    for l, m in [(2, 1), (5, -3), (9, 0)]:
        u = rot(ScalarField(grid15, grid15.real_harmonic(l, m)))
        assert field_l2(grid15, divergence(u).values) < 1e-10


def test_curl_of_rot_is_laplacian(grid15):
    y = grid15.real_harmonic(3, 2)
    val = curl_s(rot(ScalarField(grid15, y))).values
    assert np.max(np.abs(val + 12.0 * y)) < 1e-10


def test_div_grad_equals_laplacian(grid31):
    rng = np.random.default_rng(11)
    f, _ = random_bandlimited(grid31, grid31.l_max - 1, rng)
    lhs = divergence(gradient(ScalarField(grid31, f))).values
    rhs = laplacian(ScalarField(grid31, f)).values
    assert np.max(np.abs(lhs - rhs)) < 1e-10 * max(1.0, np.max(np.abs(rhs)))


def test_curl_of_gradient_is_zero(grid15):
    rng = np.random.default_rng(3)
    f, _ = random_bandlimited(grid15, grid15.l_max - 2, rng)
    val = curl_s(gradient(ScalarField(grid15, f))).values
    assert field_l2(grid15, val) < 1e-10


def test_rot_fields_tangent(grid15):
    u = rot(ScalarField(grid15, grid15.real_harmonic(4, 2)))
    radial = np.einsum("jki,jki->jk", grid15.nodes, u.values)
    assert np.max(np.abs(radial)) < 1e-10


def test_adjointness_of_gradient_and_divergence(grid31):
    rng = np.random.default_rng(5)
    f, _ = random_bandlimited(grid31, grid31.l_max - 2, rng)
    gpot, _ = random_bandlimited(grid31, grid31.l_max - 2, rng)
    hpot, _ = random_bandlimited(grid31, grid31.l_max - 2, rng)
    v = rot(ScalarField(grid31, gpot)).values + gradient(ScalarField(grid31, hpot)).values
    fld = ScalarField(grid31, f)
    lhs = grid31.integrate(f * divergence(TangentField(grid31, v)).values)
    rhs = -grid31.integrate(np.einsum("jki,jki->jk", gradient(fld).values, v))
    scale = max(1.0, abs(rhs))
    assert abs(lhs - rhs) < 1e-10 * scale


# ---------------------------------------------------------------------------
# velocity gradient
# ---------------------------------------------------------------------------


def test_velocity_gradient_zero_field(grid15):
    u = TangentField(grid15, np.zeros(grid15.shape + (3,)))
    assert np.max(np.abs(surface_velocity_gradient(u))) == 0.0


def test_velocity_gradient_structure(grid15):
    # columns are tangent (n^T G = 0) and G n = -u
    g = grid15
    u = rot(ScalarField(g, g.real_harmonic(3, 1)))
    gu = surface_velocity_gradient(u)
    ntg = np.einsum("jki,jkia->jka", g.nodes, gu)
    assert np.max(np.abs(ntg)) < 1e-11
    gn = np.einsum("jkia,jka->jki", gu, g.nodes)
    assert np.max(np.abs(gn + u.values)) < 1e-10


def test_killing_field_has_zero_strain(grid15):
    from els2.leslie import strain_rotation

    u = rot(ScalarField(grid15, grid15.real_harmonic(1, 0)))
    gu = surface_velocity_gradient(u)
    a, _ = strain_rotation(gu, grid15.nodes)
    assert np.max(np.abs(a)) < 1e-8


def test_divfree_gradient_is_traceless(grid15):
    from els2.leslie import strain_rotation

    u = rot(ScalarField(grid15, grid15.real_harmonic(2, 0)))
    gu = surface_velocity_gradient(u)
    a, _ = strain_rotation(gu, grid15.nodes)
    tr = np.einsum("jkaa->jk", a)
    assert grid15.integrate(tr * tr) < 1e-16
    assert np.max(np.abs(tr)) < 1e-8
