"""Leslie viscosity algebra: admissibility, derived constants, stress, dissipation.

The six viscosities mu1..mu6 enter through Parodi's relation
mu2 + mu3 = mu6 - mu5, the rotational viscosity lambda1 = mu3 - mu2 > 0, the
slip parameter lambda2 = mu6 - mu5, and the dissipation inequalities

    mu4 > 0,   2 mu1 + 3 mu4 + 2 mu5 + 2 mu6 > 0,
    2 mu4 + mu5 + mu6 > lambda2^2 / lambda1.

Under these the pointwise dissipation quadratic form

    Q = mu1 (d^T A d)^2 + mu4 |A|^2 + (mu5+mu6) |A d|^2
        + lambda1 |N|^2 + 2 lambda2 N^T A d

is nonnegative for every unit d, N perpendicular to d, and symmetric traceless
A, and admits the lower bound

    Q >= (1/lambda1) |lambda1 N + lambda2 (A d - (d^T A d) d)|^2 + 2 alpha0 |A|^2

with the explicit constant

    alpha0 = 1/4 min{ 2 mu4 + mu5 + mu6 - lambda2^2/lambda1,
                      2 mu4,
                      (mu1 + 4 mu4 + mu5 + mu6 - Delta0) / 8 },
    Delta0 = sqrt((mu1 + mu5 + mu6)^2 + 4 mu4^2).

All functions are pure and broadcast over leading sample axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstraintError, InvalidCoefficientsError

#: Equality tolerance for Parodi's relation.
PARODI_TOL = 1e-12

#: Tolerance for the algebraic input constraints of the dissipation form.
CONSTRAINT_TOL = 1e-8


@dataclass(frozen=True)
class ValidationReport:
    """Admissibility booleans plus signed distances to each constraint boundary.

    `weak_ok` is the admissibility actually required (Parodi + lambda1 > 0 +
    the three dissipation inequalities, all strict).  `strong_ok` reports the
    stronger classical set (mu1 + lambda2^2/lambda1 >= 0, mu4 > 0,
    mu5 + mu6 >= lambda2^2/lambda1), which implies the weak one; it is
    informational only.
    """

    parodi_ok: bool
    compat_ok: bool
    weak_ok: bool
    strong_ok: bool
    margins: dict[str, float]

    def summary(self) -> str:
        lines = [
            f"parodi_ok={str(self.parodi_ok).lower()}",
            f"compat_ok={str(self.compat_ok).lower()}",
            f"weak_ok={str(self.weak_ok).lower()}",
            f"strong_ok={str(self.strong_ok).lower()}",
        ]
        for name, value in self.margins.items():
            lines.append(f"margin[{name}] = {value:.6g}")
        return "\n".join(lines)


@dataclass(frozen=True)
class LeslieCoefficients:
    """Validated viscosities with the derived dissipation constants."""

    mu1: float
    mu2: float
    mu3: float
    mu4: float
    mu5: float
    mu6: float
    lambda1: float
    lambda2: float
    delta0: float
    gamma1: float
    alpha0: float

    @property
    def mus(self) -> tuple[float, ...]:
        return (self.mu1, self.mu2, self.mu3, self.mu4, self.mu5, self.mu6)


def validate_coefficients(mu1, mu2, mu3, mu4, mu5, mu6) -> ValidationReport:
    """Check admissibility of a viscosity set and report all margins."""
    mus = (mu1, mu2, mu3, mu4, mu5, mu6)
    if not all(np.isfinite(m) for m in mus):
        raise ValueError(f"non-finite viscosities: {mus}")

    lam1 = mu3 - mu2
    lam2 = mu6 - mu5
    parodi_violation = abs((mu2 + mu3) - (mu6 - mu5))
    parodi_ok = parodi_violation <= PARODI_TOL
    compat_ok = lam1 > 0.0

    margins = {
        "parodi": -parodi_violation,
        "lambda1": lam1,
        "mu4": mu4,
        "weak_sum": 2 * mu1 + 3 * mu4 + 2 * mu5 + 2 * mu6,
    }
    if compat_ok:
        ratio = lam2 * lam2 / lam1
        margins["weak_coupling"] = 2 * mu4 + mu5 + mu6 - ratio
        margins["strong_mu1"] = mu1 + ratio
        margins["strong_coupling"] = mu5 + mu6 - ratio
    else:
        margins["weak_coupling"] = -np.inf
        margins["strong_mu1"] = -np.inf
        margins["strong_coupling"] = -np.inf

    weak_ok = (
        parodi_ok
        and compat_ok
        and margins["mu4"] > 0.0
        and margins["weak_sum"] > 0.0
        and margins["weak_coupling"] > 0.0
    )
    # The strong set uses non-strict inequalities except mu4 > 0.
    strong_ok = (
        parodi_ok
        and compat_ok
        and mu4 > 0.0
        and margins["strong_mu1"] >= 0.0
        and margins["strong_coupling"] >= 0.0
    )
    return ValidationReport(parodi_ok, compat_ok, weak_ok, strong_ok, margins)


def derived_constants(mu1, mu2, mu3, mu4, mu5, mu6) -> LeslieCoefficients:
    """Exact evaluation of lambda1, lambda2, Delta0, gamma1, alpha0.

    Raises InvalidCoefficientsError unless the weak admissibility holds; the
    constants are all homogeneous of degree one in the viscosities.
    """
    report = validate_coefficients(mu1, mu2, mu3, mu4, mu5, mu6)
    if not report.weak_ok:
        raise InvalidCoefficientsError(
            "coefficients are not admissible:\n" + report.summary()
        )
    lam1 = mu3 - mu2
    lam2 = mu6 - mu5
    delta0 = np.sqrt((mu1 + mu5 + mu6) ** 2 + 4.0 * mu4 * mu4)
    gamma1 = 0.5 * (mu1 + 4.0 * mu4 + mu5 + mu6 - delta0)
    alpha0 = 0.25 * min(
        2.0 * mu4 + mu5 + mu6 - lam2 * lam2 / lam1,
        2.0 * mu4,
        (mu1 + 4.0 * mu4 + mu5 + mu6 - delta0) / 8.0,
    )
    return LeslieCoefficients(
        mu1=float(mu1), mu2=float(mu2), mu3=float(mu3),
        mu4=float(mu4), mu5=float(mu5), mu6=float(mu6),
        lambda1=float(lam1), lambda2=float(lam2),
        delta0=float(delta0), gamma1=float(gamma1), alpha0=float(alpha0),
    )


# ----------------------------------------------------------------------
# kinematic tensors
# ----------------------------------------------------------------------


def strain_rotation(g: np.ndarray, normals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a velocity gradient into projected strain A and rotation Omega.

    With G[..., i, j] = (grad_s u_j)_i this returns A = P(n) (G + G^T)/2 P(n)
    where P(n) = I - n n^T, and Omega_ij = (G_ji - G_ij)/2, i.e. the spin
    tensor whose action Omega d corotates the director with the local fluid
    angular velocity (a rigidly corotating director has N = 0).  A is
    symmetric and, for divergence-free tangent velocity, traceless.
    """
    sym = 0.5 * (g + np.swapaxes(g, -1, -2))
    omega = 0.5 * (np.swapaxes(g, -1, -2) - g)
    s = np.einsum("...ab,...b->...a", sym, normals)
    q = np.einsum("...a,...a->...", s, normals)
    nn = normals[..., :, None] * normals[..., None, :]
    a = (
        sym
        - normals[..., :, None] * s[..., None, :]
        - s[..., :, None] * normals[..., None, :]
        + q[..., None, None] * nn
    )
    return a, omega


def corotational_n(d_t: np.ndarray, u: np.ndarray, d: np.ndarray,
                   omega: np.ndarray, grad_d: np.ndarray) -> np.ndarray:
    """Corotational director rate N = d_t + u . grad d - Omega d.

    `grad_d` holds the componentwise surface gradients, indexed [..., i, a]
    like the velocity gradient; pass zeros when u vanishes.
    """
    advect = np.einsum("...i,...ia->...a", u, grad_d)
    return d_t + advect - np.einsum("...ab,...b->...a", omega, d)


def leslie_stress(d: np.ndarray, n_rate: np.ndarray, a: np.ndarray,
                  co: LeslieCoefficients) -> np.ndarray:
    """Viscous stress sigma_ij = mu1 (d^T A d) d_i d_j + mu2 N_i d_j + mu3 d_i N_j
    + mu4 A_ij + mu5 (A d)_i d_j + mu6 d_i (A d)_j."""
    ad = np.einsum("...ij,...j->...i", a, d)
    dad = np.einsum("...i,...i->...", d, ad)
    dd = d[..., :, None] * d[..., None, :]
    sigma = co.mu1 * dad[..., None, None] * dd
    sigma += co.mu2 * n_rate[..., :, None] * d[..., None, :]
    sigma += co.mu3 * d[..., :, None] * n_rate[..., None, :]
    sigma += co.mu4 * a
    sigma += co.mu5 * ad[..., :, None] * d[..., None, :]
    sigma += co.mu6 * d[..., :, None] * ad[..., None, :]
    return sigma


# ----------------------------------------------------------------------
# dissipation quadratic form
# ----------------------------------------------------------------------


def _check_inputs(d, n_rate, a, tol):
    unit_dev = np.max(np.abs(np.einsum("...i,...i->...", d, d) - 1.0))
    if unit_dev > tol:
        raise ConstraintError(f"director is not unit: max ||d|^2-1| = {unit_dev:.3e}")
    scale = 1.0 + float(np.max(np.abs(n_rate)))
    ortho = np.max(np.abs(np.einsum("...i,...i->...", n_rate, d)))
    if ortho > tol * scale:
        raise ConstraintError(f"N is not perpendicular to d: max |N.d| = {ortho:.3e}")
    asym = np.max(np.abs(a - np.swapaxes(a, -1, -2)))
    if asym > tol:
        raise ConstraintError(f"A is not symmetric: max |A - A^T| = {asym:.3e}")
    a_scale = 1.0 + float(np.max(np.abs(a)))
    tr = np.max(np.abs(np.einsum("...ii->...", a)))
    if tr > tol * a_scale:
        raise ConstraintError(f"A is not traceless: max |tr A| = {tr:.3e}")


def dissipation_density(d: np.ndarray, n_rate: np.ndarray, a: np.ndarray,
                        co: LeslieCoefficients, check: bool = True) -> np.ndarray:
    """Pointwise dissipation Q; nonnegative for admissible coefficients."""
    if check:
        _check_inputs(d, n_rate, a, CONSTRAINT_TOL)
    ad = np.einsum("...ij,...j->...i", a, d)
    dad = np.einsum("...i,...i->...", d, ad)
    nad = np.einsum("...i,...i->...", n_rate, ad)
    a_sq = np.einsum("...ij,...ij->...", a, a)
    n_sq = np.einsum("...i,...i->...", n_rate, n_rate)
    ad_sq = np.einsum("...i,...i->...", ad, ad)
    return (
        co.mu1 * dad * dad
        + co.mu4 * a_sq
        + (co.mu5 + co.mu6) * ad_sq
        + co.lambda1 * n_sq
        + 2.0 * co.lambda2 * nad
    )


def dissipation_lower_bound(d: np.ndarray, n_rate: np.ndarray, a: np.ndarray,
                            co: LeslieCoefficients, check: bool = True) -> np.ndarray:
    """Proved lower bound B <= Q.

    B = (1/lambda1) |lambda1 N + lambda2 (A d - (d^T A d) d)|^2 + 2 alpha0 |A|^2;
    the first term equals (1/lambda1) |Delta d + |grad d|^2 d|^2 on solutions
    of the director equation.
    """
    if check:
        _check_inputs(d, n_rate, a, CONSTRAINT_TOL)
    ad = np.einsum("...ij,...j->...i", a, d)
    dad = np.einsum("...i,...i->...", d, ad)
    ad_perp = ad - dad[..., None] * d
    f = co.lambda1 * n_rate + co.lambda2 * ad_perp
    f_sq = np.einsum("...i,...i->...", f, f)
    a_sq = np.einsum("...ij,...ij->...", a, a)
    return f_sq / co.lambda1 + 2.0 * co.alpha0 * a_sq


# ----------------------------------------------------------------------
# randomized sampling helpers (shared by tests and the acceptance suite)
# ----------------------------------------------------------------------


def sample_admissible_mus(rng: np.random.Generator, margin: float = 1e-6) -> tuple[float, ...]:
    """Draw one Parodi-consistent, weakly admissible viscosity set.

    mu2 and mu3 are reconstructed from lambda1 and lambda2 = mu6 - mu5 so that
    Parodi's relation holds exactly; the remaining inequalities are enforced
    by rejection with the given strictness margin.
    """
    while True:
        mu1 = rng.uniform(-0.5, 3.0)
        mu4 = rng.uniform(0.05, 3.0)
        mu5 = rng.uniform(-1.0, 2.0)
        mu6 = rng.uniform(-1.0, 2.0)
        lam1 = rng.uniform(0.1, 3.0)
        lam2 = mu6 - mu5
        mu2 = 0.5 * (lam2 - lam1)
        mu3 = 0.5 * (lam2 + lam1)
        if 2 * mu1 + 3 * mu4 + 2 * mu5 + 2 * mu6 <= margin:
            continue
        if 2 * mu4 + mu5 + mu6 - lam2 * lam2 / lam1 <= margin:
            continue
        return (mu1, mu2, mu3, mu4, mu5, mu6)


def sample_admissible_triples(rng: np.random.Generator, n: int):
    """Draw n random (unit d, N perpendicular to d, symmetric traceless A)."""
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    n_raw = rng.normal(size=(n, 3))
    n_rate = n_raw - np.einsum("ki,ki->k", n_raw, d)[:, None] * d
    m = rng.normal(size=(n, 3, 3))
    a = 0.5 * (m + np.swapaxes(m, -1, -2))
    tr = np.einsum("kii->k", a) / 3.0
    a -= tr[:, None, None] * np.eye(3)
    return d, n_rate, a
