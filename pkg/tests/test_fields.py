"""Constrained field types and initial-data constructors."""

import numpy as np
import pytest

from conftest import field_l2
from els2.errors import ConfigError, DegeneracyError
from els2.fields import (DirectorField, initial_state, make_initial,
                         normalize_director, project_tangent, tension)

FOUR_PI = 4.0 * np.pi


# ---------------------------------------------------------------------------
# tangential projection
# ---------------------------------------------------------------------------


def test_project_tangent_kills_normal_field(grid15):
    v = project_tangent(grid15, grid15.nodes.copy())
    assert np.max(np.abs(v.values)) < 1e-14


def test_project_tangent_idempotent(grid15):
    rng = np.random.default_rng(0)
    raw = rng.normal(size=grid15.shape + (3,))
    once = project_tangent(grid15, raw)
    twice = project_tangent(grid15, once.values)
    assert np.max(np.abs(twice.values - once.values)) < 1e-15


def test_project_tangent_of_ez(grid15):
    # tangential part of the constant e_z field has squared L2 norm 8 pi / 3
    ez = np.broadcast_to(np.array([0.0, 0.0, 1.0]), grid15.shape + (3,)).copy()
    v = project_tangent(grid15, ez)
    norm_sq = grid15.integrate(np.einsum("jki,jki->jk", v.values, v.values))
    assert abs(norm_sq - 8.0 * np.pi / 3.0) < 1e-12


# ---------------------------------------------------------------------------
# director normalization
# ---------------------------------------------------------------------------


def test_normalize_constant(grid15):
    raw = np.broadcast_to(np.array([0.0, 0.0, 2.0]), grid15.shape + (3,)).copy()
    d = normalize_director(grid15, raw)
    assert np.max(np.abs(d.values - np.array([0.0, 0.0, 1.0]))) < 1e-15


def test_normalize_unit_is_identity(grid15):
    d = normalize_director(grid15, grid15.nodes.copy())
    assert np.max(np.abs(d.values - grid15.nodes)) < 1e-15


def test_normalize_small_perturbation(grid15):
    # independent pointwise arithmetic oracle
    raw = grid15.nodes + 0.05 * np.array([1.0, 0.0, 0.0])
    d = normalize_director(grid15, raw.copy())
    expected = raw / np.linalg.norm(raw, axis=-1, keepdims=True)
    assert np.max(np.abs(d.values - expected)) < 1e-15
    dev = np.max(np.linalg.norm(d.values - grid15.nodes, axis=-1))
    assert 0.03 < dev < 0.06


def test_normalize_idempotent(grid15):
    rng = np.random.default_rng(1)
    raw = rng.normal(size=grid15.shape + (3,)) + 3.0
    once = normalize_director(grid15, raw)
    twice = normalize_director(grid15, once.values)
    assert np.max(np.abs(twice.values - once.values)) < 1e-15


def test_normalize_degeneracy_halts(grid15):
    raw = grid15.nodes.copy()
    raw[3, 5] = np.array([0.05, 0.0, 0.0])
    with pytest.raises(DegeneracyError):
        normalize_director(grid15, raw)


def test_director_field_rejects_nonunit(grid15):
    with pytest.raises(ValueError):
        DirectorField(grid15, 1.5 * grid15.nodes)


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------


def test_make_initial_rejects_unknown_kind(grid15):
    with pytest.raises(ConfigError):
        make_initial("vortex-sheet", {}, grid15)


def test_constant_director_zero_flow(grid15):
    psi0, u0, d0 = make_initial("constant-director", {}, grid15)
    assert np.max(np.abs(psi0.values)) == 0.0
    assert np.max(np.abs(u0.values)) == 0.0
    assert np.max(np.abs(d0.values - np.array([0.0, 0.0, 1.0]))) < 1e-15


def test_identity_map_energy_and_degree(grid15):
    from els2.energy import degree, dirichlet_energy

    _, u0, d0 = make_initial("identity-map", {}, grid15)
    assert np.max(np.abs(u0.values)) == 0.0
    assert abs(dirichlet_energy(d0) - FOUR_PI) < 1e-12
    assert degree(d0) == (1, pytest.approx(1.0, abs=1e-9))


def test_rossby_flow_constraints(grid15):
    a = 0.1
    psi0, u0, d0 = make_initial("rossby-flow", {"amplitude": a, "l": 2, "m": 1}, grid15)
    # div u0 = 0 exactly by rot construction
    assert field_l2(grid15, grid15.divergence_values(u0.values)) < 1e-10
    # zero mean velocity
    mean = np.einsum("jk,jki->i", grid15.weights, u0.values)
    assert np.linalg.norm(mean) < 1e-10
    # quadrature oracle: int |rot psi|^2 = int |grad psi|^2 = l(l+1) a^2
    ke = 0.5 * grid15.integrate(np.einsum("jki,jki->jk", u0.values, u0.values))
    grad = grid15.grad_values(psi0.values)
    h1 = grid15.integrate(np.einsum("jki,jki->jk", grad, grad))
    assert abs(ke - 0.5 * h1) < 1e-13
    assert abs(ke - 3.0 * a * a) < 1e-12


def test_perturbed_constant_smallness(grid15):
    psi0, u0, d0 = make_initial(
        "perturbed-constant",
        {"amplitude": 0.1, "flow_amplitude": 0.05, "flow_l": 2, "flow_m": 1},
        grid15,
    )
    norms = np.linalg.norm(d0.values, axis=-1)
    assert np.max(np.abs(norms - 1.0)) < 1e-12
    mean = np.einsum("jk,jki->i", grid15.weights, u0.values)
    assert np.linalg.norm(mean) < 1e-10
    assert field_l2(grid15, grid15.divergence_values(u0.values)) < 1e-10
    # e3-dominant
    assert np.min(d0.values[..., 2]) > 0.8


def test_initial_state_wraps_fields(grid15):
    st = initial_state("rossby-flow", {"amplitude": 0.2, "l": 3, "m": 2}, grid15)
    assert st.t == 0.0
    u = st.velocity()
    assert field_l2(grid15, grid15.divergence_values(u.values)) < 1e-10


# ---------------------------------------------------------------------------
# tension helper
# ---------------------------------------------------------------------------


def test_tension_constant_director(grid15):
    _, _, d0 = make_initial("constant-director", {}, grid15)
    tau, grad_sq = tension(d0)
    assert np.max(np.abs(tau)) < 1e-12
    assert np.max(np.abs(grad_sq)) < 1e-12


def test_tension_identity_map(grid15):
    _, _, d0 = make_initial("identity-map", {}, grid15)
    tau, grad_sq = tension(d0)
    assert np.max(np.abs(grad_sq - 2.0)) < 1e-12
    assert field_l2(grid15, tau) < 1e-8
