"""Time integration in vorticity-stream-function form.

One step advances (psi, d) with a first-order IMEX split:

  1. the full vorticity forcing (viscous stress + elastic force - advection,
     passed through curl_s) is assembled discretely, the diagonal viscous part
     (mu4/2) Lap omega is subtracted, and omega is advanced with that part
     implicit;
  2. psi is recovered from Lap psi = omega with zero-mean gauge;
  3. the director is advanced with Lap d / lambda1 implicit and all transport,
     rotation, and stretching terms explicit;
  4. the director is renormalized pointwise.

Incompressibility is exact by construction (u = rot psi).  The pressure never
appears: applying curl_s annihilates every gradient.  The stress divergence is
realized weakly, as the quadrature adjoint of u -> grad_s u against the
tangentially projected stress rows; this is what makes the semi-discrete
energy identity hold to spectral accuracy, so the reported energy-law
residual measures pure time-splitting error (first order in dt).

Nonlinear terms are evaluated pointwise and the assembled tendencies are
truncated to the dynamic band l <= l_dyn = 2*L_max/3 (3/2-rule headroom for
quadratic and cubic products).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import analysis as _analysis
from .energy import EnergyReport, energy_report, onshell_corotational_rate
from .errors import BlowupError, DegeneracyError
from .fields import (DirectorField, State, initial_state, normalize_director,
                     tension)
from .leslie import (LeslieCoefficients, derived_constants,
                     dissipation_density, leslie_stress, strain_rotation)
from .sphere import FOUR_PI, ScalarField, SphereGrid, build_grid


@dataclass
class StepReport:
    """Per-step bookkeeping for the discrete energy law."""

    dt: float
    energy_before: float
    energy_after: float
    dissipation: float
    energy_residual: float
    max_norm_deviation: float
    mean_velocity_drift: float


def dynamic_band(l_max: int) -> int:
    """Highest degree kept by the dealiasing filter."""
    return (2 * l_max) // 3


def _band_filter(coeffs: np.ndarray, l_dyn: int) -> np.ndarray:
    out = coeffs.copy()
    out[..., l_dyn + 1 :, :] = 0.0
    return out


def _parseval_h1(grid: SphereGrid, coeffs: np.ndarray) -> float:
    """int |grad f|^2 from coefficients: sum l(l+1) |a_lm|^2 with m-multiplicity."""
    mult = np.full(grid.l_max + 1, 2.0)
    mult[0] = 1.0
    lam = -grid.laplace_eig
    return float(np.sum(lam[:, None] * mult[None, :] * np.abs(coeffs) ** 2))


class _Assembly:
    """All spatial fields derived from one (psi, d) snapshot."""

    __slots__ = (
        "psi_c", "u", "omega_c", "d_c", "grads_d", "grad_sq", "lap_d", "tau",
        "g_u", "a", "omega_t", "n_rate", "force_c", "u_theta", "u_phi",
    )


def _weak_stress_divergence(grid: SphereGrid, sigma: np.ndarray) -> np.ndarray:
    """Row-wise weak divergence (div sigma)_i = div_g(P sigma_{i.}).

    The adjoint realization: pairing with any tangent v gives
    -integrate(sigma : (grad v)^T), which is exactly the stress power the
    energy identity needs.
    """
    rows = np.moveaxis(sigma, -2, 0)  # [i, lat, lon, a]
    vt = np.einsum("ijka,jka->ijk", rows, grid.e_theta)
    vp = np.einsum("ijka,jka->ijk", rows, grid.e_phi)
    return np.moveaxis(grid.synthesis(grid.analysis_div(vt, vp)), 0, -1)


def _frame_gradients(grid: SphereGrid, coeffs_stack: np.ndarray) -> np.ndarray:
    """Batched gradients: coeffs (c, l, m) -> G[lat, lon, i, c]."""
    ft, fp = grid.synthesis_grad(coeffs_stack)
    return np.einsum("ajk,jki->jkia", ft, grid.e_theta) + np.einsum(
        "ajk,jki->jkia", fp, grid.e_phi
    )


def _assemble(grid: SphereGrid, psi_vals: np.ndarray, d_vals: np.ndarray,
              co: LeslieCoefficients) -> _Assembly:
    asm = _Assembly()
    psi_c = grid.analysis(psi_vals)
    psi_c[0, 0] = 0.0
    asm.psi_c = psi_c
    pt, pp = grid.synthesis_grad(psi_c)
    asm.u_theta, asm.u_phi = -pp, pt
    asm.u = grid.frame_to_cartesian(-pp, pt)
    asm.omega_c = grid.laplace_eig[:, None] * psi_c

    asm.d_c = grid.analysis(np.moveaxis(d_vals, -1, 0))
    asm.grads_d = _frame_gradients(grid, asm.d_c)
    asm.grad_sq = np.einsum("jkia,jkia->jk", asm.grads_d, asm.grads_d)
    asm.lap_d = np.moveaxis(
        grid.synthesis(grid.laplace_eig[:, None] * asm.d_c), 0, -1
    )
    asm.tau = asm.lap_d + asm.grad_sq[..., None] * d_vals

    u_c = grid.analysis(np.moveaxis(asm.u, -1, 0))
    asm.g_u = _frame_gradients(grid, u_c)
    asm.a, asm.omega_t = strain_rotation(asm.g_u, grid.nodes)
    asm.n_rate = onshell_corotational_rate(asm.tau, d_vals, asm.a, co)

    sigma = leslie_stress(d_vals, asm.n_rate, asm.a, co)
    div_sigma = _weak_stress_divergence(grid, sigma)
    radial = np.einsum("jka,jka->jk", div_sigma, grid.nodes)
    div_sigma -= radial[..., None] * grid.nodes

    f_el = -np.einsum("jka,jkia->jki", asm.tau, asm.grads_d)

    advect = np.einsum("jki,jkia->jka", asm.u, asm.g_u)
    advect -= np.einsum("jka,jka->jk", advect, grid.nodes)[..., None] * grid.nodes

    force = div_sigma + f_el - advect
    ft = np.einsum("jka,jka->jk", force, grid.e_theta)
    fp = np.einsum("jka,jka->jk", force, grid.e_phi)
    asm.force_c = grid.analysis_div(fp, -ft)  # curl_s of the total force
    return asm


def elastic_force(d: DirectorField):
    """Ericksen force -(grad d)^T (Lap d + |grad d|^2 d).

    Equal to -div(grad d (.) grad d) up to a surface gradient (absorbed into
    pressure); vanishes at harmonic maps.
    """
    from .sphere import TangentField

    tau, _ = tension(d)
    grads = d.grid.component_gradients(d.values)
    return TangentField(d.grid, -np.einsum("jka,jkia->jki", tau, grads))


def total_vorticity_forcing(state: State, co: LeslieCoefficients) -> ScalarField:
    """Explicit vorticity tendency: curl_s of all forces minus (mu4/2) Lap omega."""
    grid = state.grid
    asm = _assemble(grid, state.psi.values, state.d.values, co)
    f_c = asm.force_c - 0.5 * co.mu4 * grid.laplace_eig[:, None] * asm.omega_c
    return ScalarField(grid, grid.synthesis(f_c))


def cfl_dt(state: State, co: LeslieCoefficients, dt_max: float = 1e-2,
           cfl: float = 0.5) -> float:
    """Stable-step heuristic: advective limit plus an explicit-coupling guard.

    dt = min(dt_max, cfl*h/max|u|, cfl*h^2*lambda1/S) with h the equatorial
    spacing and S the explicitly treated viscosity magnitudes scaled by the
    local field activity; inactive states (u = 0, constant d) return dt_max.
    """
    grid = state.grid
    h = 2.0 * np.pi / grid.n_lon
    candidates = [dt_max]

    u = grid.rot_values(state.psi.values)
    u_max = float(np.max(np.linalg.norm(u, axis=-1)))
    if u_max > 1e-12:
        candidates.append(cfl * h / u_max)

    mu_expl = abs(co.mu1) + abs(co.mu2) + abs(co.mu3) + abs(co.mu5) + abs(co.mu6)
    dt_d, dp_d = grid.synthesis_grad(grid.analysis(np.moveaxis(state.d.values, -1, 0)))
    dt_u, dp_u = grid.synthesis_grad(grid.analysis(np.moveaxis(u, -1, 0)))
    activity = float(np.max(np.einsum("ajk,ajk->jk", dt_d, dt_d)
                            + np.einsum("ajk,ajk->jk", dp_d, dp_d)))
    activity += h * h * float(np.max(np.einsum("ajk,ajk->jk", dt_u, dt_u)
                                     + np.einsum("ajk,ajk->jk", dp_u, dp_u)))
    stiffness = mu_expl * min(1.0, activity)
    if stiffness > 1e-14:
        candidates.append(cfl * h * h * co.lambda1 / stiffness)
    return min(candidates)


def step(state: State, co: LeslieCoefficients, dt: float,
         l_dyn: int | None = None) -> tuple[State, StepReport]:
    """One semi-implicit step; see the module docstring for the splitting."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    grid = state.grid
    if l_dyn is None:
        l_dyn = dynamic_band(grid.l_max)

    asm = _assemble(grid, state.psi.values, state.d.values, co)
    lam = -grid.laplace_eig  # l(l+1)

    e_kin_before = 0.5 * _parseval_h1(grid, asm.psi_c)
    e_dir_before = 0.5 * grid.integrate(asm.grad_sq)
    dissipation = grid.integrate(
        dissipation_density(state.d.values, asm.n_rate, asm.a, co, check=False)
    )

    # vorticity update: implicit (mu4/2) Lap, explicit remainder by subtraction
    f_c = _band_filter(asm.force_c, l_dyn)
    f_expl = f_c - 0.5 * co.mu4 * grid.laplace_eig[:, None] * asm.omega_c
    omega_new = (asm.omega_c + dt * f_expl) / (1.0 + 0.5 * dt * co.mu4 * lam[:, None])
    psi_new_c = np.zeros_like(omega_new)
    psi_new_c[1:, :] = omega_new[1:, :] / grid.laplace_eig[1:, None]
    psi_new = grid.synthesis(psi_new_c)

    # director update: implicit Lap/lambda1, explicit transport + rotation + stretching
    ad = np.einsum("jkab,jkb->jka", asm.a, state.d.values)
    dad = np.einsum("jka,jka->jk", state.d.values, ad)
    rhs_full = (asm.tau + co.lambda2 * (dad[..., None] * state.d.values - ad)) / co.lambda1
    rhs_full -= np.einsum("jki,jkia->jka", asm.u, asm.grads_d)
    rhs_full += np.einsum("jkab,jkb->jka", asm.omega_t, state.d.values)
    r_expl = rhs_full - asm.lap_d / co.lambda1

    denom = 1.0 + dt * lam[:, None] / co.lambda1
    rc = _band_filter(grid.analysis(np.moveaxis(r_expl, -1, 0)), l_dyn)
    dc = _band_filter(asm.d_c, l_dyn)
    d_star = np.moveaxis(grid.synthesis((dc + dt * rc) / denom), 0, -1)

    if not (np.all(np.isfinite(d_star)) and np.all(np.isfinite(psi_new))):
        raise BlowupError(f"non-finite values after step at t = {state.t:.6g}")

    norms = np.linalg.norm(d_star, axis=-1)
    max_dev = float(np.max(np.abs(norms - 1.0)))
    try:
        d_new = normalize_director(grid, d_star)
    except DegeneracyError as err:
        err.state = state.copy()
        raise

    new_state = State(state.t + dt, ScalarField(grid, psi_new), d_new)

    # after-step energies and mean-velocity drift
    e_kin_after = 0.5 * _parseval_h1(grid, psi_new_c)
    ft_new, fp_new = grid.synthesis_grad(grid.analysis(np.moveaxis(d_new.values, -1, 0)))
    e_dir_after = 0.5 * grid.integrate(
        np.einsum("ajk,ajk->jk", ft_new, ft_new) + np.einsum("ajk,ajk->jk", fp_new, fp_new)
    )
    pt_new, pp_new = grid.synthesis_grad(psi_new_c)
    u_new = grid.frame_to_cartesian(-pp_new, pt_new)
    drift = float(np.linalg.norm(np.einsum("jk,jki->i", grid.weights, u_new)))

    e_before = e_kin_before + e_dir_before
    e_after = e_kin_after + e_dir_after
    residual = (e_after - e_before) / dt + dissipation
    report = StepReport(
        dt=dt,
        energy_before=e_before,
        energy_after=e_after,
        dissipation=dissipation,
        energy_residual=residual,
        max_norm_deviation=max_dev,
        mean_velocity_drift=drift,
    )
    if not np.isfinite(residual):
        raise BlowupError(f"non-finite energy residual at t = {new_state.t:.6g}")
    return new_state, report


# ----------------------------------------------------------------------
# trajectory driver
# ----------------------------------------------------------------------


@dataclass
class Trajectory:
    """Report series plus retained director snapshots from one run."""

    grid: SphereGrid
    coefficients: LeslieCoefficients
    times: list[float] = field(default_factory=list)
    reports: list[EnergyReport] = field(default_factory=list)
    d_snaps: list[np.ndarray] = field(default_factory=list)
    grad_u_norms: list[float] = field(default_factory=list)
    d_diffs: list[float] = field(default_factory=list)
    step_dts: list[float] = field(default_factory=list)
    step_residuals: list[float] = field(default_factory=list)
    stop_reason: str = ""
    smallness_t0: float | None = None
    smallness_margin: float | None = None
    final_state: State | None = None

    def add_report(self, report: EnergyReport, state: State, grad_u_norm: float) -> None:
        if self.d_snaps:
            diff_sq = self.grid.integrate(
                np.einsum("jka,jka->jk",
                          state.d.values - self.d_snaps[-1],
                          state.d.values - self.d_snaps[-1])
            )
            self.d_diffs.append(float(np.sqrt(max(diff_sq, 0.0))))
        else:
            self.d_diffs.append(0.0)
        self.times.append(report.t)
        self.reports.append(report)
        self.d_snaps.append(state.d.values.copy())
        self.grad_u_norms.append(grad_u_norm)

    def kinetic_series(self) -> np.ndarray:
        return np.array([r.kinetic for r in self.reports])

    def residual_series(self) -> np.ndarray:
        return np.array([r.residual for r in self.reports])

    def dirichlet_series(self) -> np.ndarray:
        return np.array([r.dirichlet for r in self.reports])


def _grad_u_norm(grid: SphereGrid, state: State) -> float:
    u = grid.rot_values(state.psi.values)
    ft, fp = grid.synthesis_grad(grid.analysis(np.moveaxis(u, -1, 0)))
    density = np.einsum("ajk,ajk->jk", ft, ft) + np.einsum("ajk,ajk->jk", fp, fp)
    return float(np.sqrt(grid.integrate(density)))


def run(cfg, grid: SphereGrid | None = None, state0: State | None = None,
        on_report=None) -> Trajectory:
    """Integrate a configured problem to t_end, convergence, or a monitor trip.

    `on_report` is called as on_report(report, step_report, state) at every
    emission; the CLI uses it to stream CSV rows and checkpoints.  The
    returned trajectory retains director snapshots at report times so the
    long-time analysis can build Cauchy differences and decay fits.
    """
    co = derived_constants(*cfg.mus)
    if grid is None:
        grid = build_grid(cfg.lmax)
    if state0 is None:
        state0 = initial_state(cfg.initial.kind, cfg.initial.params(), grid)

    # keep the stream function inside the dynamic band from the start
    l_dyn = dynamic_band(grid.l_max)
    psi_c = _band_filter(grid.analysis(state0.psi.values), l_dyn)
    psi_c[0, 0] = 0.0
    state = State(state0.t, ScalarField(grid, grid.synthesis(psi_c)), state0.d)

    traj = Trajectory(grid=grid, coefficients=co)
    zero_step = StepReport(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    def emit(step_report: StepReport) -> EnergyReport:
        report = energy_report(state, co, cfg.cap_radius)
        traj.add_report(report, state, _grad_u_norm(grid, state))
        if traj.smallness_t0 is None:
            ok, margin = _analysis.smallness_check(report, cfg.eps0)
            if ok:
                traj.smallness_t0 = report.t
                traj.smallness_margin = margin
        if on_report is not None:
            on_report(report, step_report, state)
        return report

    report = emit(zero_step)
    threshold = 2.0 * FOUR_PI * (1.0 - cfg.blowup_delta)
    if report.local_max >= threshold:
        traj.stop_reason = "blowup-monitor"
        traj.final_state = state
        return traj

    traj.stop_reason = "t_end"
    n_steps = 0
    while state.t < cfg.t_end - 1e-12 * max(1.0, cfg.t_end):
        dt = min(cfl_dt(state, co, cfg.dt_max, cfg.cfl), cfg.t_end - state.t)
        if dt < 1e-12:
            raise BlowupError(f"time step collapsed to {dt:.3e} at t = {state.t:.6g}")
        try:
            state, step_report = step(state, co, dt, l_dyn)
        except DegeneracyError as err:
            traj.stop_reason = "degeneracy"
            traj.degeneracy = err  # type: ignore[attr-defined]
            break
        n_steps += 1
        traj.step_dts.append(step_report.dt)
        traj.step_residuals.append(step_report.energy_residual)

        at_end = state.t >= cfg.t_end - 1e-12 * max(1.0, cfg.t_end)
        if n_steps % cfg.out_every == 0 or at_end:
            report = emit(step_report)
            if report.local_max >= threshold:
                traj.stop_reason = "blowup-monitor"
                break
            if _analysis.convergence_window_ok(
                traj.kinetic_series(), traj.residual_series(),
                np.array(traj.d_diffs), cfg.conv_tol,
            ):
                traj.stop_reason = "converged"
                break

    traj.final_state = state
    return traj
