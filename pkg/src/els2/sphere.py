"""Discretization of the unit sphere and its differential operators.

The grid couples Gauss-Legendre colatitudes with equispaced longitudes, so
spherical-harmonic analysis/synthesis is a Legendre matrix contraction per
zonal wavenumber around a real FFT.  Quadrature is exact for products of
resolved modes (n_lat = L_max+1 Gauss nodes integrate polynomial degree
2*L_max+1; n_lon = 2*(L_max+1) longitudes alias nothing below |m| = L_max+1).

All vector calculus is extrinsic: tangent vectors live in R^3 and are
projected with P(n) = I - n n^T.  Scalar gradients are synthesized from the
pole-free theta-derivative recurrence of the normalized associated Legendre
functions; divergences are computed through the quadrature adjoint of the
gradient, which makes div(rot psi) vanish to round-off and keeps the discrete
integration-by-parts identity exact on band-limited fields.

Grids and their transform plans are immutable after construction and safe to
share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GridMismatchError

FOUR_PI = 4.0 * np.pi

#: Default tangency tolerance |n . v| for projected fields.
TAU_TAN = 1e-10


def _gauss_latitudes(n_lat: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes mu = cos(theta) ordered north to south, weights sum to 2."""
    mu, w = np.polynomial.legendre.leggauss(n_lat)
    return mu[::-1].copy(), w[::-1].copy()


def _legendre_tables(l_max: int, mu: np.ndarray, sin_theta: np.ndarray):
    """Normalized associated Legendre functions and their theta-derivatives.

    Returns (pbar, dpbar), each of shape (l_max+1, n_lat, l_max+1) indexed
    [m, node, l]; entries with l < m are zero.  pbar includes the Condon-
    Shortley phase and the full orthonormalization over the sphere, i.e.
    Y_lm = pbar[m, :, l] * exp(i m phi).
    """
    n_lat = mu.size
    nl = l_max + 1
    pbar = np.zeros((nl, n_lat, nl))

    # Diagonal seed P^m_m, then upward recurrence in l at fixed m.
    pmm = np.full(n_lat, np.sqrt(1.0 / FOUR_PI))
    for m in range(nl):
        if m > 0:
            pmm = -np.sqrt((2 * m + 1) / (2.0 * m)) * sin_theta * pmm
        pbar[m, :, m] = pmm
        if m + 1 <= l_max:
            pbar[m, :, m + 1] = np.sqrt(2 * m + 3.0) * mu * pmm
        for l in range(m + 2, nl):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            pbar[m, :, l] = a * (mu * pbar[m, :, l - 1] - b * pbar[m, :, l - 2])

    # d/dtheta via the pole-free relation
    #   dPbar_l^m = -1/2 [ sqrt((l+m)(l-m+1)) Pbar_l^{m-1}
    #                      - sqrt((l-m)(l+m+1)) Pbar_l^{m+1} ]
    # with Pbar_l^{-1} = -Pbar_l^1.
    dpbar = np.zeros_like(pbar)
    ls = np.arange(nl, dtype=float)
    for m in range(nl):
        lo = np.sqrt(np.maximum((ls + m) * (ls - m + 1.0), 0.0))
        hi = np.sqrt(np.maximum((ls - m) * (ls + m + 1.0), 0.0))
        if m == 0:
            dpbar[0] = hi * pbar[1] if l_max >= 1 else 0.0 * pbar[0]
        else:
            term = lo * pbar[m - 1]
            if m + 1 <= l_max:
                term = term - hi * pbar[m + 1]
            dpbar[m] = -0.5 * term
    return pbar, dpbar


class SphereGrid:
    """Quadrature nodes and spectral transform plan on the unit sphere.

    Scalar fields are (n_lat, n_lon) arrays, row-major latitude-major with
    row 0 the northernmost ring.  Spectral coefficients are complex
    (L_max+1, L_max+1) arrays indexed [l, m] for m >= 0; negative-m content
    of real fields is implied by conjugation.
    """

    def __init__(self, l_max: int):
        if l_max < 4:
            raise ConfigError(f"spectral truncation L_max={l_max} is below the minimum of 4")
        self.l_max = int(l_max)
        self.n_lat = self.l_max + 1
        self.n_lon = 2 * (self.l_max + 1)

        mu, glw = _gauss_latitudes(self.n_lat)
        self.mu = mu
        self.gauss_weights = glw
        self.sin_theta = np.sqrt(1.0 - mu * mu)
        self.theta = np.arccos(mu)
        self.phi = 2.0 * np.pi * np.arange(self.n_lon) / self.n_lon

        cos_t = mu[:, None]
        sin_t = self.sin_theta[:, None]
        cos_p = np.cos(self.phi)[None, :]
        sin_p = np.sin(self.phi)[None, :]
        self.nodes = np.stack(
            [sin_t * cos_p, sin_t * sin_p, np.broadcast_to(cos_t, (self.n_lat, self.n_lon))],
            axis=-1,
        )
        self.e_theta = np.stack(
            [cos_t * cos_p, cos_t * sin_p, np.broadcast_to(-sin_t, (self.n_lat, self.n_lon))],
            axis=-1,
        )
        self.e_phi = np.stack(
            [
                np.broadcast_to(-sin_p, (self.n_lat, self.n_lon)),
                np.broadcast_to(cos_p, (self.n_lat, self.n_lon)),
                np.zeros((self.n_lat, self.n_lon)),
            ],
            axis=-1,
        )
        self.weights = np.outer(glw, np.full(self.n_lon, 2.0 * np.pi / self.n_lon))

        self._pbar, self._dpbar = _legendre_tables(self.l_max, mu, self.sin_theta)
        self.ell = np.arange(self.l_max + 1)
        #: Laplace-Beltrami eigenvalues -l(l+1) per degree.
        self.laplace_eig = -(self.ell * (self.ell + 1)).astype(float)
        self._m = np.arange(self.l_max + 1)
        self._inv_sin = 1.0 / self.sin_theta
        self._cap_masks: dict[float, np.ndarray] = {}

        for arr in (self.nodes, self.e_theta, self.e_phi, self.weights, self._pbar, self._dpbar):
            arr.setflags(write=False)

    # ------------------------------------------------------------------
    # basics
    # ------------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_lat, self.n_lon)

    def __repr__(self) -> str:
        return f"SphereGrid(l_max={self.l_max}, n_lat={self.n_lat}, n_lon={self.n_lon})"

    def integrate(self, values: np.ndarray) -> float:
        """Quadrature of a scalar sample array over the sphere."""
        return float(np.sum(self.weights * values))

    def check_same(self, other: "SphereGrid", what: str = "field") -> None:
        if other is not self:
            raise GridMismatchError(f"{what} belongs to a different grid ({other!r} vs {self!r})")

    # ------------------------------------------------------------------
    # scalar transforms
    # ------------------------------------------------------------------

    def analysis(self, values: np.ndarray) -> np.ndarray:
        """Spherical-harmonic coefficients a[..., l, m] of real scalar samples.

        Leading axes are treated as a batch; the trailing two must be
        (n_lat, n_lon).
        """
        fm = np.fft.rfft(values, axis=-1)[..., : self.l_max + 1]
        wfm = self.gauss_weights[:, None] * fm
        return (2.0 * np.pi / self.n_lon) * np.einsum("mjl,...jm->...lm", self._pbar, wfm)

    def synthesis(self, coeffs: np.ndarray) -> np.ndarray:
        """Real scalar samples from coefficients a[..., l, m]."""
        gm = np.einsum("mjl,...lm->...jm", self._pbar, coeffs)
        return self._irfft(gm)

    def synthesis_grad(self, coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Frame components (d/dtheta, (1/sin)d/dphi) of the synthesized field."""
        gt = np.einsum("mjl,...lm->...jm", self._dpbar, coeffs)
        gm = np.einsum("mjl,...lm->...jm", self._pbar, coeffs)
        gp = (1j * self._m) * gm * self._inv_sin[:, None]
        return self._irfft(gt), self._irfft(gp)

    def analysis_div(self, v_theta: np.ndarray, v_phi: np.ndarray) -> np.ndarray:
        """Coefficients of the surface divergence of v_theta*e_theta + v_phi*e_phi.

        Computed as the quadrature adjoint of the gradient, so that
        integrate(f * div v) == -integrate(grad f . v) holds discretely.
        """
        vt = np.fft.rfft(v_theta, axis=-1)[..., : self.l_max + 1]
        vp = np.fft.rfft(v_phi, axis=-1)[..., : self.l_max + 1]
        wvt = self.gauss_weights[:, None] * vt
        wvp = (self.gauss_weights * self._inv_sin)[:, None] * vp
        term_t = np.einsum("mjl,...jm->...lm", self._dpbar, wvt)
        term_p = np.einsum("mjl,...jm->...lm", self._pbar, wvp) * (1j * self._m)
        return -(2.0 * np.pi / self.n_lon) * (term_t - term_p)

    def _irfft(self, gm: np.ndarray) -> np.ndarray:
        spec = np.zeros(gm.shape[:-1] + (self.n_lon // 2 + 1,), dtype=complex)
        spec[..., : self.l_max + 1] = gm
        return np.fft.irfft(self.n_lon * spec, n=self.n_lon, axis=-1)

    # ------------------------------------------------------------------
    # pointwise helpers
    # ------------------------------------------------------------------

    def frame_to_cartesian(self, f_theta: np.ndarray, f_phi: np.ndarray) -> np.ndarray:
        """Assemble a tangent vector sample array from frame components."""
        return f_theta[..., None] * self.e_theta + f_phi[..., None] * self.e_phi

    def to_frame(self, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Frame components (v . e_theta, v . e_phi) of a tangent sample array."""
        return np.einsum("jki,jki->jk", v, self.e_theta), np.einsum("jki,jki->jk", v, self.e_phi)

    def grad_values(self, values: np.ndarray) -> np.ndarray:
        """Surface gradient of a scalar sample array, as Cartesian components."""
        ft, fp = self.synthesis_grad(self.analysis(values))
        return self.frame_to_cartesian(ft, fp)

    def component_gradients(self, values3: np.ndarray) -> np.ndarray:
        """G[j, k, i, a] = i-th Cartesian component of grad of the a-th component.

        Works for any R^3-valued sample array (tangent or not); each component
        is treated as a scalar field.
        """
        stacked = np.moveaxis(values3, -1, 0)
        ft, fp = self.synthesis_grad(self.analysis(stacked))
        return np.einsum("ajk,jki->jkia", ft, self.e_theta) + np.einsum(
            "ajk,jki->jkia", fp, self.e_phi
        )

    def divergence_values(self, v: np.ndarray) -> np.ndarray:
        """Surface divergence of a tangent vector sample array."""
        vt, vp = self.to_frame(v)
        return self.synthesis(self.analysis_div(vt, vp))

    def rot_values(self, values: np.ndarray) -> np.ndarray:
        """rot psi = n x grad psi for a scalar sample array."""
        ft, fp = self.synthesis_grad(self.analysis(values))
        return self.frame_to_cartesian(-fp, ft)

    def curl_values(self, v: np.ndarray) -> np.ndarray:
        """Scalar curl of a tangent sample array: curl_s v = -div(n x v)."""
        vt, vp = self.to_frame(v)
        return self.synthesis(self.analysis_div(vp, -vt))

    def laplacian_values(self, values: np.ndarray) -> np.ndarray:
        return self.synthesis(self.laplace_eig[:, None] * self.analysis(values))

    def real_harmonic(self, l: int, m: int) -> np.ndarray:
        """Unit-L2-norm real spherical harmonic sample array.

        m > 0 gives the cos-type harmonic sqrt(2) Re Y_lm, m < 0 the sin-type
        sqrt(2) Im Y_l|m|, and m = 0 the zonal Y_l0.
        """
        if not (0 <= l <= self.l_max and abs(m) <= l):
            raise ValueError(f"harmonic (l={l}, m={m}) outside the resolved band")
        c = np.zeros((self.l_max + 1, self.l_max + 1), dtype=complex)
        if m == 0:
            c[l, 0] = 1.0
        elif m > 0:
            c[l, m] = 1.0 / np.sqrt(2.0)
        else:
            c[l, -m] = -1j / np.sqrt(2.0)
        return self.synthesis(c)

    def cap_mask(self, radius: float) -> np.ndarray:
        """Boolean node-in-cap matrix for geodesic caps of the given radius."""
        key = float(radius)
        mask = self._cap_masks.get(key)
        if mask is None:
            pts = self.nodes.reshape(-1, 3)
            cos_r = np.cos(key)
            mask = np.empty((pts.shape[0], pts.shape[0]), dtype=bool)
            block = 1024
            for i in range(0, pts.shape[0], block):
                mask[i : i + block] = pts[i : i + block] @ pts.T >= cos_r
            mask.setflags(write=False)
            self._cap_masks[key] = mask
        return mask


def build_grid(l_max: int) -> SphereGrid:
    """Construct the Gauss-Legendre x Fourier grid with its transform plan."""
    return SphereGrid(l_max)


# ----------------------------------------------------------------------
# field-level operator API
# ----------------------------------------------------------------------


@dataclass
class ScalarField:
    """Real scalar samples on a grid."""

    grid: SphereGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GridMismatchError(
                f"scalar values shape {self.values.shape} != grid shape {self.grid.shape}"
            )


@dataclass
class TangentField:
    """Tangent vector samples (Cartesian components) on a grid."""

    grid: SphereGrid
    values: np.ndarray
    tol: float = TAU_TAN

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape + (3,):
            raise GridMismatchError(
                f"tangent values shape {self.values.shape} != {self.grid.shape + (3,)}"
            )
        normal = np.abs(np.einsum("jki,jki->jk", self.grid.nodes, self.values))
        scale = max(1.0, float(np.max(np.abs(self.values))))
        worst = float(np.max(normal))
        if worst > self.tol * scale:
            raise ValueError(f"field is not tangent: max |n.v| = {worst:.3e}")


def sh_analysis(f: ScalarField) -> np.ndarray:
    return f.grid.analysis(f.values)


def sh_synthesis(grid: SphereGrid, coeffs: np.ndarray) -> ScalarField:
    return ScalarField(grid, grid.synthesis(coeffs))


def integrate(f: ScalarField) -> float:
    return f.grid.integrate(f.values)


def laplacian(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, f.grid.laplacian_values(f.values))


def gradient(f: ScalarField) -> TangentField:
    return TangentField(f.grid, f.grid.grad_values(f.values))


def divergence(v: TangentField) -> ScalarField:
    return ScalarField(v.grid, v.grid.divergence_values(v.values))


def rot(psi: ScalarField) -> TangentField:
    """rot psi = n x grad psi; divergence-free by construction."""
    return TangentField(psi.grid, psi.grid.rot_values(psi.values))


def curl_s(v: TangentField) -> ScalarField:
    return ScalarField(v.grid, v.grid.curl_values(v.values))


def surface_velocity_gradient(u: TangentField) -> np.ndarray:
    """Extrinsic velocity gradient G[..., i, j] = (grad_s u_j)_i.

    Columns are automatically tangent (n^T G = 0) and G n = -u; the trace of
    the tangentially projected symmetric part equals the surface divergence.
    """
    return u.grid.component_gradients(u.values)
