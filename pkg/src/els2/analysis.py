"""Long-time post-processing: decay fits, smallness, quantization, convergence.

Everything here is pure post-processing over immutable report series; the
trajectory argument of `convergence_detect` is duck-typed (it needs times,
reports, d_snaps, grad_u_norms, d_diffs, and the grid) so this module stays
independent of the time stepper.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import EnergyReport, energy_split, harmonic_residual
from .errors import InsufficientDataError, NotConvergedError
from .fields import DirectorField
from .sphere import FOUR_PI

#: Consecutive below-tolerance reports required to declare convergence.
DETECT_WINDOW = 10

#: Minimum number of reports before the detector may fire.
MIN_REPORTS = 50

#: Absolute floor for the tail-spread settledness test (energies near zero).
TAIL_FLOOR = 1e-8


@dataclass(frozen=True)
class DecayFit:
    """Least-squares exponential fit y ~ C1 exp(-C2 t) over a window."""

    c1: float
    c2: float
    rms_log_residual: float
    window: tuple[float, float]
    n_samples: int


@dataclass
class ConvergenceResult:
    """Outcome of convergence detection on a finished trajectory."""

    d_inf: DirectorField
    cauchy_diffs: np.ndarray
    m0: int
    quant_residual: float
    eps0_margin: float
    t_first_small: float
    fired_at: float
    fit_u_d: DecayFit | None
    fit_grad_u: DecayFit | None


def smallness_statistic(report: EnergyReport) -> float:
    """S = KE + 2 min(E_partial, E_antipartial)."""
    return report.kinetic + 2.0 * min(report.e_partial, report.e_antipartial)


def smallness_check(report: EnergyReport, eps0: float) -> tuple[bool, float]:
    """Whether S <= eps0, and the margin eps0 - S.

    S below 8 pi already suffices for the uniform-limit conclusions; use
    `smallness_statistic` against 2*FOUR_PI for that comparison.
    """
    s = smallness_statistic(report)
    return s <= eps0, eps0 - s


def fit_decay(times, values, window: tuple[float, float] | None = None) -> DecayFit:
    """Fit log y = log C1 - C2 t by least squares on the given time window."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, y = t[keep], y[keep]
    if t.size < 10:
        raise InsufficientDataError(
            f"decay fit needs at least 10 samples in the window, got {t.size}"
        )
    if np.any(y <= 0.0):
        raise ValueError("decay fit requires strictly positive values")
    logy = np.log(y)
    slope, intercept = np.polyfit(t, logy, 1)
    resid = logy - (slope * t + intercept)
    rms = float(np.sqrt(np.mean(resid**2)))
    return DecayFit(
        c1=float(np.exp(intercept)),
        c2=float(-slope),
        rms_log_residual=rms,
        window=(float(t[0]), float(t[-1])),
        n_samples=int(t.size),
    )


def quantization_check(e_series, e_ref: float) -> tuple[int, float]:
    """Nearest 4*pi*M0 quantum between the settled tail of E(t) and E_ref.

    The tail is the last quarter of the series; it must be settled, meaning
    its spread is below 10% of its mean (with a small absolute floor so that
    tails decaying to zero count as settled).
    """
    e = np.asarray(e_series, dtype=float)
    if e.size < 4:
        raise InsufficientDataError(f"quantization check needs >= 4 samples, got {e.size}")
    tail = e[-max(e.size // 4, 1):]
    spread = float(tail.max() - tail.min())
    mean = float(tail.mean())
    if spread > max(0.1 * abs(mean), TAIL_FLOOR):
        raise NotConvergedError(
            f"energy tail not settled: spread {spread:.3e} vs mean {mean:.3e}"
        )
    m0 = int(np.rint((mean - e_ref) / FOUR_PI))
    residual = float(abs(mean - e_ref - FOUR_PI * m0))
    return m0, residual


def topping_ratio(d: DirectorField, eps0: float) -> float | None:
    """min(E_partial, E_antipartial) / ||tension||^2 when the guard admits it.

    Absent (None) unless the smaller holomorphic energy is below eps0 and the
    harmonic residual exceeds 1e-12: near a harmonic map both quantities
    vanish and the ratio is 0/0.
    """
    e_p, e_a = energy_split(d)
    small = min(e_p, e_a)
    if small >= eps0:
        return None
    residual = harmonic_residual(d)
    if residual <= 1e-12:
        return None
    return small / (residual * residual)


def convergence_window_ok(kinetic, residual, d_diffs, tol: float,
                          window: int = DETECT_WINDOW,
                          min_reports: int = MIN_REPORTS) -> bool:
    """Online predicate: the last `window` reports are all below tol."""
    n = len(kinetic)
    if n < max(min_reports, window):
        return False
    ke = np.asarray(kinetic[-window:])
    res = np.asarray(residual[-window:])
    dd = np.asarray(d_diffs[-window:])
    return bool(np.all(ke < tol) and np.all(res < tol) and np.all(dd < tol))


def _positive_fit(times, values, window) -> DecayFit | None:
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    keep = (t >= window[0]) & (t <= window[1]) & (y > 0.0)
    if np.sum(keep) < 10:
        return None
    return fit_decay(t[keep], y[keep])


def convergence_detect(traj, tol: float, eps0: float = 0.3) -> ConvergenceResult | None:
    """Scan a finished trajectory for settled convergence and fit decay rates.

    Fires at the first report index k >= MIN_REPORTS-1 whose trailing window
    of DETECT_WINDOW reports has kinetic energy, harmonic residual, and
    successive director differences all below tol.  The late-time limit d_inf
    is the final snapshot; the fit window starts at the later of the first
    smallness-passing time and 20% of the fired time, and the trailing exact
    zero of ||d - d_inf|| is excluded from the fit.
    """
    n = len(traj.reports)
    if n < MIN_REPORTS:
        return None
    ke = traj.kinetic_series()
    res = traj.residual_series()
    dd = np.asarray(traj.d_diffs)
    times = np.asarray(traj.times)

    fired_idx = None
    for k in range(MIN_REPORTS - 1, n):
        lo = k - DETECT_WINDOW + 1
        if lo < 0:
            continue
        if (np.all(ke[lo : k + 1] < tol) and np.all(res[lo : k + 1] < tol)
                and np.all(dd[lo : k + 1] < tol)):
            fired_idx = k
            break
    if fired_idx is None:
        return None

    grid = traj.grid
    d_inf_vals = traj.d_snaps[-1]
    d_inf = DirectorField(grid, d_inf_vals.copy())
    cauchy = np.array(
        [
            np.sqrt(max(grid.integrate(
                np.einsum("jka,jka->jk", snap - d_inf_vals, snap - d_inf_vals)
            ), 0.0))
            for snap in traj.d_snaps
        ]
    )

    t_small = traj.smallness_t0
    margin = traj.smallness_margin
    if t_small is None:
        for k, rep in enumerate(traj.reports):
            ok, mg = smallness_check(rep, eps0)
            if ok:
                t_small, margin = traj.times[k], mg
                break
    if t_small is None:
        t_small, margin = float("inf"), float("-inf")

    e_series = traj.dirichlet_series()
    e_ref = float(e_series[-1])
    try:
        m0, quant_residual = quantization_check(e_series, e_ref)
    except NotConvergedError:
        m0, quant_residual = 0, float("nan")

    t_fire = float(times[fired_idx])
    window = (max(t_small, 0.2 * t_fire), t_fire)
    u_norm = np.sqrt(2.0 * ke)
    fit_ud = _positive_fit(times, u_norm + cauchy, window)
    fit_gu = _positive_fit(times, np.asarray(traj.grad_u_norms), window)

    return ConvergenceResult(
        d_inf=d_inf,
        cauchy_diffs=cauchy,
        m0=m0,
        quant_residual=quant_residual,
        eps0_margin=float(margin if margin is not None else np.nan),
        t_first_small=float(t_small),
        fired_at=t_fire,
        fit_u_d=fit_ud,
        fit_grad_u=fit_gu,
    )


def analyze_series(data: dict[str, np.ndarray], eps0: float = 0.3,
                   e_ref: float | None = None) -> dict[str, object]:
    """Summary statistics from a diagnostics table (column name -> array).

    Works from the serialized diagnostics alone, so director-based Cauchy
    differences are unavailable; the decay fit uses ||u|| = sqrt(2 KE).
    """
    t = data["t"]
    ke = data["KE"]
    e = data["E"]
    e_p = data["E_partial"]
    e_a = data["E_antipartial"]

    s_series = ke + 2.0 * np.minimum(e_p, e_a)
    small_idx = np.nonzero(s_series <= eps0)[0]
    t0 = float(t[small_idx[0]]) if small_idx.size else None

    out: dict[str, object] = {
        "n_reports": int(t.size),
        "t_final": float(t[-1]),
        "eps0": eps0,
        "smallness_t0": t0,
        "smallness_margin": float(eps0 - s_series[small_idx[0]]) if small_idx.size else None,
        "initial_below_8pi": bool(s_series[0] < 2.0 * FOUR_PI),
        "degree_initial": int(data["deg"][0]),
        "degree_final": int(data["deg"][-1]),
        "E_final": float(e[-1]),
    }

    if e_ref is None:
        e_ref = float(e[-1])
    try:
        m0, residual = quantization_check(e, e_ref)
        out["M0"] = m0
        out["quant_residual"] = residual
    except (NotConvergedError, InsufficientDataError) as err:
        out["M0"] = None
        out["quant_residual"] = None
        out["quantization_note"] = str(err)

    window_start = max(t0 if t0 is not None else t[0], float(t[0]) + 0.2 * (t[-1] - t[0]))
    fit = _positive_fit(t, np.sqrt(2.0 * ke), (window_start, float(t[-1])))
    if fit is not None:
        out["C1_u"] = fit.c1
        out["C2_u"] = fit.c2
        out["rms_log_residual_u"] = fit.rms_log_residual
        out["fit_window"] = fit.window
    else:
        out["C1_u"] = None
        out["C2_u"] = None
    return out
