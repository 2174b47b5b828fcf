"""Scalar functionals: energies, holomorphic split, degree, dissipation, caps.

The holomorphic/anti-holomorphic split is computed chart-free from the
Dirichlet energy and the integrated Jacobian density J = d . (D_1 d x D_2 d):

    E_partial     = (E + int J) / 2,
    E_antipartial = (E - int J) / 2,
    int J         = 4 pi deg(d).

Everything here is a pure read-only function of a state snapshot.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .fields import DirectorField, State, director_gradients, tension
from .leslie import LeslieCoefficients, dissipation_density, strain_rotation
from .sphere import FOUR_PI, SphereGrid, TangentField, surface_velocity_gradient


class ResolutionWarning(UserWarning):
    """The grid is too coarse for the requested topological quantity."""


@dataclass
class EnergyReport:
    """All scalar diagnostics at one time."""

    t: float
    kinetic: float
    dirichlet: float
    e_partial: float
    e_antipartial: float
    degree: int
    degree_raw: float
    residual: float
    dissipation: float
    mean_u: np.ndarray
    local_max: float


def kinetic_energy(u: TangentField) -> float:
    return 0.5 * u.grid.integrate(np.einsum("jki,jki->jk", u.values, u.values))


def dirichlet_energy(d: DirectorField) -> float:
    grads = director_gradients(d)
    return 0.5 * d.grid.integrate(np.einsum("jkia,jkia->jk", grads, grads))


def jacobian_density(d: DirectorField, grads: np.ndarray | None = None):
    """Signed area-stretch density J = d . (D_theta d x D_phi d).

    Frame-independent for any oriented orthonormal tangent frame; integrates
    to 4 pi times the topological degree.
    """
    grid = d.grid
    if grads is None:
        grads = director_gradients(d)
    d_theta = np.einsum("jki,jkia->jka", grid.e_theta, grads)
    d_phi = np.einsum("jki,jkia->jka", grid.e_phi, grads)
    return np.einsum("jka,jka->jk", d.values, np.cross(d_theta, d_phi))


def degree(d: DirectorField) -> tuple[int, float]:
    """Topological degree as (nearest integer, raw quadrature value)."""
    raw = d.grid.integrate(jacobian_density(d)) / FOUR_PI
    rounded = int(np.rint(raw))
    if abs(raw - rounded) > 0.1:
        warnings.warn(
            f"degree quadrature {raw:.4f} is far from an integer; "
            "the director field is under-resolved",
            ResolutionWarning,
        )
    return rounded, float(raw)


def energy_split(d: DirectorField) -> tuple[float, float]:
    """(E_partial, E_antipartial): holomorphic and anti-holomorphic energies."""
    grads = director_gradients(d)
    e = 0.5 * d.grid.integrate(np.einsum("jkia,jkia->jk", grads, grads))
    j = d.grid.integrate(jacobian_density(d, grads))
    return 0.5 * (e + j), 0.5 * (e - j)


def harmonic_residual(d: DirectorField) -> float:
    """L2 norm of the tension field; zero exactly at harmonic maps."""
    tau, _ = tension(d)
    return float(np.sqrt(d.grid.integrate(np.einsum("jka,jka->jk", tau, tau))))


def local_energy_max(u: TangentField, d: DirectorField, radius: float) -> float:
    """Max over nodes of int_{cap(x, r)} (|u|^2 + |grad d|^2).

    Follows the blow-up criterion's convention: the Dirichlet density enters
    unhalved, so the whole-sphere value of a degree-1 harmonic map is 8 pi.
    """
    if not (0.0 < radius <= np.pi):
        raise ValueError(f"cap radius {radius} outside (0, pi]")
    grid = u.grid
    grid.check_same(d.grid, "director")
    grads = director_gradients(d)
    density = np.einsum("jki,jki->jk", u.values, u.values)
    density = density + np.einsum("jkia,jkia->jk", grads, grads)
    weighted = (grid.weights * density).reshape(-1)
    if radius >= np.pi - 1e-12:
        return float(np.sum(weighted))
    mask = grid.cap_mask(radius)
    return float(np.max(mask @ weighted))


def onshell_corotational_rate(tau: np.ndarray, d: np.ndarray, a: np.ndarray,
                              co: LeslieCoefficients) -> np.ndarray:
    """Corotational rate N implied by the director equation.

    lambda1 N = tau - lambda2 (A d - (d^T A d) d).  The result is projected
    orthogonal to d to remove the spectral-truncation residue of tau . d.
    """
    ad = np.einsum("...ij,...j->...i", a, d)
    dad = np.einsum("...i,...i->...", d, ad)
    n_rate = (tau - co.lambda2 * (ad - dad[..., None] * d)) / co.lambda1
    n_rate -= np.einsum("...i,...i->...", n_rate, d)[..., None] * d
    return n_rate


def energy_report(state: State, co: LeslieCoefficients, cap_radius: float = 0.5) -> EnergyReport:
    """Aggregate all scalar diagnostics for one state."""
    grid = state.grid
    u = state.velocity()
    grads = director_gradients(state.d)
    grad_sq = np.einsum("jkia,jkia->jk", grads, grads)

    ke = 0.5 * grid.integrate(np.einsum("jki,jki->jk", u.values, u.values))
    e = 0.5 * grid.integrate(grad_sq)
    j_int = grid.integrate(jacobian_density(state.d, grads))
    raw = j_int / FOUR_PI
    e_partial = 0.5 * (e + j_int)
    e_antipartial = 0.5 * (e - j_int)
    deg = int(np.rint(raw))

    tau, _ = tension(state.d, grads)
    residual = float(np.sqrt(grid.integrate(np.einsum("jka,jka->jk", tau, tau))))

    g_u = surface_velocity_gradient(u)
    a, _ = strain_rotation(g_u, grid.nodes)
    n_rate = onshell_corotational_rate(tau, state.d.values, a, co)
    q = dissipation_density(state.d.values, n_rate, a, co)
    dissipation = grid.integrate(q)

    mean_u = np.einsum("jk,jki->i", grid.weights, u.values)

    density = np.einsum("jki,jki->jk", u.values, u.values) + grad_sq
    weighted = (grid.weights * density).reshape(-1)
    if cap_radius >= np.pi - 1e-12:
        local_max = float(np.sum(weighted))
    else:
        local_max = float(np.max(grid.cap_mask(cap_radius) @ weighted))

    return EnergyReport(
        t=state.t,
        kinetic=ke,
        dirichlet=e,
        e_partial=e_partial,
        e_antipartial=e_antipartial,
        degree=deg,
        degree_raw=float(raw),
        residual=residual,
        dissipation=dissipation,
        mean_u=mean_u,
        local_max=local_max,
    )


def winding_map(grid: SphereGrid, m: int) -> DirectorField:
    """Degree-m energy minimizer: longitude wound m times, profile rescaled.

    In stereographic coordinates this is z -> z^m, i.e. the colatitude profile
    tan(Theta/2) = tan(theta/2)^|m| with longitude m phi; holomorphic for
    m > 0, anti-holomorphic for m < 0, Dirichlet energy 4 pi |m|.
    """
    if m == 0:
        raise ValueError("winding_map requires m != 0")
    half = 0.5 * grid.theta
    big_theta = 2.0 * np.arctan(np.tan(half) ** abs(m))
    sin_t = np.sin(big_theta)[:, None]
    cos_t = np.cos(big_theta)[:, None]
    mp = m * grid.phi
    vals = np.stack(
        [
            sin_t * np.cos(mp)[None, :],
            sin_t * np.sin(mp)[None, :],
            np.broadcast_to(cos_t, grid.shape),
        ],
        axis=-1,
    )
    return DirectorField(grid, vals)
