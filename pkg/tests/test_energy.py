"""Energy functionals, holomorphic split, degree, cap integrals."""

import numpy as np
import pytest

from conftest import get_grid
from els2.energy import (ResolutionWarning, degree, dirichlet_energy,
                         energy_report, energy_split, harmonic_residual,
                         jacobian_density, kinetic_energy, local_energy_max,
                         winding_map)
from els2.fields import DirectorField, initial_state, make_initial
from els2.leslie import derived_constants
from els2.sphere import ScalarField, TangentField, rot

FOUR_PI = 4.0 * np.pi


def _zero_u(grid):
    return TangentField(grid, np.zeros(grid.shape + (3,)))


def _rotation(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis /= np.linalg.norm(axis)
    k = np.array([
        [0.0, -axis[2], axis[1]],
        [axis[2], 0.0, -axis[0]],
        [-axis[1], axis[0], 0.0],
    ])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


# ---------------------------------------------------------------------------
# basic energies
# ---------------------------------------------------------------------------


def test_zero_energies(grid15):
    assert kinetic_energy(_zero_u(grid15)) == 0.0
    _, _, d0 = make_initial("constant-director", {}, grid15)
    assert dirichlet_energy(d0) < 1e-13


def test_kinetic_energy_quadrature(grid15):
    u = rot(ScalarField(grid15, 0.1 * grid15.real_harmonic(2, 1)))
    assert abs(kinetic_energy(u) - 3.0 * 0.01) < 1e-12


def test_identity_and_antipodal_energy(grid15):
    d_id = DirectorField(grid15, grid15.nodes.copy())
    d_anti = DirectorField(grid15, -grid15.nodes.copy())
    assert abs(dirichlet_energy(d_id) - FOUR_PI) < 1e-11
    assert abs(dirichlet_energy(d_anti) - FOUR_PI) < 1e-11


# ---------------------------------------------------------------------------
# jacobian density and degree
# ---------------------------------------------------------------------------


def test_jacobian_constant_map(grid15):
    _, _, d0 = make_initial("constant-director", {}, grid15)
    assert np.max(np.abs(jacobian_density(d0))) < 1e-13


def test_jacobian_identity_and_antipodal(grid15):
    d_id = DirectorField(grid15, grid15.nodes.copy())
    assert abs(grid15.integrate(jacobian_density(d_id)) - FOUR_PI) < 1e-11
    d_anti = DirectorField(grid15, -grid15.nodes.copy())
    assert abs(grid15.integrate(jacobian_density(d_anti)) + FOUR_PI) < 1e-11


def test_degree_values(grid15):
    _, _, d0 = make_initial("constant-director", {}, grid15)
    assert degree(d0)[0] == 0
    d_id = DirectorField(grid15, grid15.nodes.copy())
    deg, raw = degree(d_id)
    assert deg == 1 and abs(raw - 1.0) < 1e-9


def test_degree_rotation_invariant(grid15):
    r = _rotation([1.0, 2.0, 0.5], 1.234)
    rotated = np.einsum("ab,jkb->jka", r, grid15.nodes)
    deg, raw = degree(DirectorField(grid15, rotated))
    assert deg == 1 and abs(raw - 1.0) < 1e-9


def test_degree_warns_when_unresolved(grid15):
    # a map covering only the upper hemisphere has raw degree near 1/2
    g = grid15
    big_theta = np.minimum(g.theta, np.pi / 2)
    sin_t, cos_t = np.sin(big_theta)[:, None], np.cos(big_theta)[:, None]
    vals = np.stack(
        [
            sin_t * np.cos(g.phi)[None, :],
            sin_t * np.sin(g.phi)[None, :],
            np.broadcast_to(cos_t, g.shape),
        ],
        axis=-1,
    )
    with pytest.warns(ResolutionWarning):
        _, raw = degree(DirectorField(g, vals))
    assert 0.2 < raw < 0.8


# ---------------------------------------------------------------------------
# holomorphic split
# ---------------------------------------------------------------------------


def test_energy_split_constant(grid15):
    _, _, d0 = make_initial("constant-director", {}, grid15)
    e_p, e_a = energy_split(d0)
    assert abs(e_p) < 1e-12 and abs(e_a) < 1e-12


def test_energy_split_identity_holomorphic(grid15):
    d_id = DirectorField(grid15, grid15.nodes.copy())
    e_p, e_a = energy_split(d_id)
    assert abs(e_p - FOUR_PI) < 1e-9
    assert abs(e_a) < 1e-9


def test_energy_split_antipodal_antiholomorphic(grid15):
    d = DirectorField(grid15, -grid15.nodes.copy())
    e_p, e_a = energy_split(d)
    assert abs(e_p) < 1e-9
    assert abs(e_a - FOUR_PI) < 1e-9


def test_energy_split_rotated_maps(grid15):
    r = _rotation([0.3, -1.0, 0.7], 0.9)
    for sign, (want_p, want_a) in [(1.0, (FOUR_PI, 0.0)), (-1.0, (0.0, FOUR_PI))]:
        vals = sign * np.einsum("ab,jkb->jka", r, grid15.nodes)
        e_p, e_a = energy_split(DirectorField(grid15, vals))
        assert abs(e_p - want_p) < 1e-9
        assert abs(e_a - want_a) < 1e-9


def test_split_sums_to_dirichlet(grid15):
    _, _, d0 = make_initial("perturbed-constant", {"amplitude": 0.15}, grid15)
    e_p, e_a = energy_split(d0)
    assert abs((e_p + e_a) - dirichlet_energy(d0)) < 1e-9


# ---------------------------------------------------------------------------
# harmonic residual
# ---------------------------------------------------------------------------


def test_harmonic_residual_values(grid15):
    _, _, d_const = make_initial("constant-director", {}, grid15)
    assert harmonic_residual(d_const) < 1e-12
    d_id = DirectorField(grid15, grid15.nodes.copy())
    assert harmonic_residual(d_id) < 1e-8
    _, _, d_pert = make_initial("perturbed-constant", {"amplitude": 0.1}, grid15)
    assert harmonic_residual(d_pert) > 1e-3


# ---------------------------------------------------------------------------
# cap integrals
# ---------------------------------------------------------------------------


def test_local_energy_zero_fields(grid15):
    _, _, d0 = make_initial("constant-director", {}, grid15)
    assert local_energy_max(_zero_u(grid15), d0, 0.7) < 1e-13


def test_local_energy_identity_full_sphere(grid15):
    d_id = DirectorField(grid15, grid15.nodes.copy())
    val = local_energy_max(_zero_u(grid15), d_id, np.pi)
    assert abs(val - 2.0 * FOUR_PI) < 1e-8


def test_local_energy_identity_hemisphere(grid15):
    d_id = DirectorField(grid15, grid15.nodes.copy())
    val = local_energy_max(_zero_u(grid15), d_id, np.pi / 2)
    assert abs(val - FOUR_PI) < 0.05 * FOUR_PI


def test_local_energy_monotone_in_radius(grid15):
    _, _, d = make_initial("perturbed-constant", {"amplitude": 0.2}, grid15)
    u = rot(ScalarField(grid15, 0.1 * grid15.real_harmonic(2, 0)))
    radii = [0.3, 0.6, 1.0, 1.8, 2.5, np.pi]
    vals = [local_energy_max(u, d, r) for r in radii]
    assert all(vals[i] <= vals[i + 1] + 1e-12 for i in range(len(vals) - 1))


def test_local_energy_rejects_bad_radius(grid15):
    d = DirectorField(grid15, grid15.nodes.copy())
    with pytest.raises(ValueError):
        local_energy_max(_zero_u(grid15), d, 0.0)


# ---------------------------------------------------------------------------
# winding maps (energy quantization test family)
# ---------------------------------------------------------------------------


def test_winding_map_unit_norm(grid15):
    w = winding_map(grid15, 2)
    assert np.max(np.abs(np.linalg.norm(w.values, axis=-1) - 1.0)) < 1e-14


def test_winding_map_degree_and_energy():
    g = get_grid(47)
    for m in (1, 2, 3, -2):
        w = winding_map(g, m)
        deg, raw = degree(w)
        assert deg == m
        assert abs(raw - m) < 1e-6
        e = dirichlet_energy(w)
        assert abs(e - FOUR_PI * abs(m)) <= 0.02 * FOUR_PI * abs(m)
        e_p, e_a = energy_split(w)
        small = e_a if m > 0 else e_p
        assert small <= 0.02 * FOUR_PI * abs(m)


def test_winding_map_rejects_zero(grid15):
    with pytest.raises(ValueError):
        winding_map(grid15, 0)


# ---------------------------------------------------------------------------
# the aggregated report
# ---------------------------------------------------------------------------


def test_energy_report_constant_state(grid15, mu_set_a):
    co = derived_constants(*mu_set_a)
    st = initial_state("constant-director", {}, grid15)
    rep = energy_report(st, co, 0.5)
    assert rep.kinetic == 0.0
    assert rep.dirichlet < 1e-12
    assert rep.degree == 0
    assert abs(rep.dissipation) < 1e-12
    assert rep.local_max < 1e-12


def test_energy_report_identity_state(grid15, mu_set_a):
    co = derived_constants(*mu_set_a)
    st = initial_state("identity-map", {}, grid15)
    rep = energy_report(st, co, 0.5)
    assert rep.kinetic == 0.0
    assert abs(rep.dirichlet - FOUR_PI) < 1e-11
    assert abs(rep.e_partial - FOUR_PI) < 1e-9
    assert rep.degree == 1
    assert rep.residual < 1e-8


def test_energy_report_identities(grid15, mu_set_b):
    co = derived_constants(*mu_set_b)
    st = initial_state(
        "perturbed-constant", {"amplitude": 0.1, "flow_amplitude": 0.05}, grid15
    )
    rep = energy_report(st, co, 0.5)
    assert abs(rep.e_partial + rep.e_antipartial - rep.dirichlet) < 1e-9
    assert abs(rep.e_partial - rep.e_antipartial - FOUR_PI * rep.degree_raw) < 1e-9
    assert rep.dissipation >= 0.0
    assert np.linalg.norm(rep.mean_u) < 1e-10
