"""Constrained field types (director, tangent velocity) and initial data.

The director is a unit R^3 vector per node; it is kept on the sphere by
pointwise renormalization.  A magnitude collapse below NORM_FLOOR signals an
under-resolved near-singular configuration and halts the run rather than
silently renormalizing noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegeneracyError, GridMismatchError
from .sphere import ScalarField, SphereGrid, TangentField

#: Minimum raw director magnitude accepted by normalize_director.
NORM_FLOOR = 0.1

#: Unit-norm tolerance of a constructed DirectorField.
UNIT_TOL = 1e-12

INITIAL_KINDS = ("constant-director", "identity-map", "perturbed-constant",
                 "rossby-flow", "checkpoint")


@dataclass
class DirectorField:
    """Unit-vector samples d: S^2 -> S^2 (Cartesian components)."""

    grid: SphereGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape + (3,):
            raise GridMismatchError(
                f"director values shape {self.values.shape} != {self.grid.shape + (3,)}"
            )
        dev = np.max(np.abs(np.einsum("jki,jki->jk", self.values, self.values) - 1.0))
        if dev > 3.0 * UNIT_TOL:
            raise ValueError(f"director is not unit length: max ||d|^2 - 1| = {dev:.3e}")


@dataclass
class State:
    """Simulation state: time, stream function psi (u = rot psi), director d."""

    t: float
    psi: ScalarField
    d: DirectorField

    @property
    def grid(self) -> SphereGrid:
        return self.psi.grid

    def velocity(self) -> TangentField:
        return TangentField(self.grid, self.grid.rot_values(self.psi.values))

    def copy(self) -> "State":
        return State(
            self.t,
            ScalarField(self.grid, self.psi.values.copy()),
            DirectorField(self.grid, self.d.values.copy()),
        )


def project_tangent(grid: SphereGrid, values: np.ndarray) -> TangentField:
    """Pointwise tangential projection v <- (I - n n^T) v; idempotent."""
    values = np.asarray(values, dtype=float)
    radial = np.einsum("jki,jki->jk", grid.nodes, values)
    return TangentField(grid, values - radial[..., None] * grid.nodes)


def normalize_director(grid: SphereGrid, raw: np.ndarray) -> DirectorField:
    """Pointwise d = raw/|raw|; halts if any magnitude falls below NORM_FLOOR."""
    raw = np.asarray(raw, dtype=float)
    norms = np.linalg.norm(raw, axis=-1)
    min_norm = float(norms.min())
    if min_norm < NORM_FLOOR:
        raise DegeneracyError(
            f"director magnitude collapsed to {min_norm:.3e} (< {NORM_FLOOR}); "
            "the configuration is under-resolved near a defect",
            min_norm=min_norm,
        )
    return DirectorField(grid, raw / norms[..., None])


# ----------------------------------------------------------------------
# differential helpers for R^3-valued maps
# ----------------------------------------------------------------------


def director_gradients(d: DirectorField) -> np.ndarray:
    """Componentwise surface gradients G[..., i, a] = (grad_s d_a)_i."""
    return d.grid.component_gradients(d.values)


def tension(d: DirectorField, grads: np.ndarray | None = None):
    """Tension field tau = Lap d + |grad d|^2 d and the density |grad d|^2.

    tau vanishes exactly at harmonic maps; its L2 norm is the harmonic
    residual used by the energy diagnostics.
    """
    grid = d.grid
    if grads is None:
        grads = director_gradients(d)
    grad_sq = np.einsum("jkia,jkia->jk", grads, grads)
    lap = np.stack(
        [grid.laplacian_values(d.values[..., a]) for a in range(3)], axis=-1
    )
    return lap + grad_sq[..., None] * d.values, grad_sq


# ----------------------------------------------------------------------
# initial data
# ----------------------------------------------------------------------


def _perturbed_constant_director(grid: SphereGrid, direction: np.ndarray,
                                 amplitude: float) -> DirectorField:
    # Deterministic low-degree perturbation transverse to the base direction.
    base = direction / np.linalg.norm(direction)
    p1 = grid.real_harmonic(2, 1)
    p2 = grid.real_harmonic(3, 2)
    e1 = np.array([1.0, 0.0, 0.0])
    if abs(base @ e1) > 0.9:
        e1 = np.array([0.0, 1.0, 0.0])
    t1 = e1 - (e1 @ base) * base
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(base, t1)
    raw = (
        base[None, None, :]
        + amplitude * p1[..., None] * t1[None, None, :]
        + amplitude * p2[..., None] * t2[None, None, :]
    )
    return normalize_director(grid, raw)


def make_initial(kind: str, params: dict, grid: SphereGrid):
    """Construct (psi0, u0, d0) for a named initial-data shape.

    The velocity is always realized through a stream function, so div u0 = 0
    holds exactly and the mean velocity vanishes to quadrature accuracy.

    Recognized kinds and their parameters:
      constant-director   direction (3-vector, default e3)
      identity-map        (none; d0(x) = x, zero flow)
      perturbed-constant  direction, amplitude, flow_amplitude, flow_l, flow_m
      rossby-flow         amplitude, l, m, direction (u0 = rot(a Y_l^m))
      checkpoint          path (resolved by the I/O layer)
    """
    if kind not in INITIAL_KINDS:
        raise ConfigError(
            f"unknown initial kind {kind!r}; expected one of {', '.join(INITIAL_KINDS)}"
        )

    direction = np.asarray(params.get("direction", (0.0, 0.0, 1.0)), dtype=float)
    psi_vals = np.zeros(grid.shape)

    if kind == "constant-director":
        d0 = normalize_director(grid, np.broadcast_to(direction, grid.shape + (3,)).copy())
    elif kind == "identity-map":
        d0 = DirectorField(grid, grid.nodes.copy())
    elif kind == "perturbed-constant":
        amp = float(params.get("amplitude", 0.1))
        d0 = _perturbed_constant_director(grid, direction, amp)
        flow_amp = float(params.get("flow_amplitude", 0.0))
        if flow_amp != 0.0:
            psi_vals = flow_amp * grid.real_harmonic(
                int(params.get("flow_l", 2)), int(params.get("flow_m", 1))
            )
    elif kind == "rossby-flow":
        amp = float(params.get("amplitude", 0.1))
        psi_vals = amp * grid.real_harmonic(int(params.get("l", 2)), int(params.get("m", 1)))
        d0 = normalize_director(grid, np.broadcast_to(direction, grid.shape + (3,)).copy())
    else:  # checkpoint
        from .io import read_checkpoint

        path = params.get("path")
        if not path:
            raise ConfigError("initial kind 'checkpoint' requires initial.path")
        state = read_checkpoint(path, grid)
        psi_vals = state.psi.values
        d0 = state.d

    psi0 = ScalarField(grid, psi_vals)
    u0 = TangentField(grid, grid.rot_values(psi_vals))
    return psi0, u0, d0


def initial_state(kind: str, params: dict, grid: SphereGrid) -> State:
    psi0, _, d0 = make_initial(kind, params, grid)
    return State(0.0, psi0, d0)
