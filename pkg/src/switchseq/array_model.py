"""Antenna array models and their polarimetric responses.

Two kinds of arrays are supported:

* measured arrays described by an EADF (a 2-D Fourier series of the
  element patterns over azimuth and elevation), one per polarization;
* closed-form uniform linear arrays of isotropic elements.

All angles are in radians.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .errors import DimensionError, FormatError, MissingPolarizationError

POLARIZATIONS = ("H", "V")


def centered_indices(n: int) -> np.ndarray:
    """Return ``[0, ..., n-1] - (n-1)/2``."""
    return np.arange(n, dtype=float) - (n - 1) / 2.0


def steering_phase_vector(angle: float, alpha) -> np.ndarray:
    """Phase vector ``exp(j * angle * alpha)`` used to evaluate an EADF."""
    return np.exp(1j * angle * np.asarray(alpha, dtype=float))


def _check_pol(pol: str) -> str:
    if pol not in POLARIZATIONS:
        raise MissingPolarizationError(f"unknown polarization {pol!r}")
    return pol


@dataclass(frozen=True, eq=False)
class EADF:
    """Fourier coefficients of one polarization of an array.

    ``G`` has one row per element and ``A_phi * A_theta`` columns ordered
    azimuth-major, matching ``kron(beta_phi, beta_theta)``.
    """

    G: np.ndarray
    alpha_phi: np.ndarray
    alpha_theta: np.ndarray
    polarization: str = "V"

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, dtype=complex))
        a_phi = np.asarray(self.alpha_phi, dtype=float)
        a_theta = np.asarray(self.alpha_theta, dtype=float)
        _check_pol(self.polarization)
        if a_phi.size < 1 or a_theta.size < 1:
            raise FormatError("EADF needs at least one coefficient per axis")
        for name, a in (("alpha_phi", a_phi), ("alpha_theta", a_theta)):
            if not np.allclose(a, centered_indices(a.size)):
                raise FormatError(f"{name} must be centered with unit step")
        if G.shape[1] != a_phi.size * a_theta.size:
            raise DimensionError(
                f"G has {G.shape[1]} columns, expected {a_phi.size * a_theta.size}"
            )
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "alpha_phi", a_phi)
        object.__setattr__(self, "alpha_theta", a_theta)

    @classmethod
    def from_coefficients(cls, coeffs, polarization: str = "V") -> "EADF":
        """Build from a ``(M, A_phi, A_theta)`` coefficient cube."""
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim != 3:
            raise DimensionError("coefficient cube must be 3-D (M, A_phi, A_theta)")
        M, a_phi, a_theta = c.shape
        return cls(
            c.reshape(M, a_phi * a_theta),
            centered_indices(a_phi),
            centered_indices(a_theta),
            polarization,
        )

    @property
    def M(self) -> int:
        return self.G.shape[0]

    @property
    def A_phi(self) -> int:
        return self.alpha_phi.size

    @property
    def A_theta(self) -> int:
        return self.alpha_theta.size

    def coefficient_cube(self) -> np.ndarray:
        return self.G.reshape(self.M, self.A_phi, self.A_theta)


@dataclass(frozen=True, eq=False)
class ArrayModel:
    """An antenna array, either EADF-based or an isotropic ULA.

    Use :meth:`ula` or :meth:`measured` rather than the raw constructor.
    For the ULA, ``gains`` maps each available polarization to a per-element
    (or scalar) amplitude; a purely vertically polarized ULA has
    ``{"V": 1.0}``.
    """

    kind: str
    M: int
    eadf: Mapping[str, EADF] = field(default_factory=dict)
    spacing: float = 0.5
    gains: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("eadf", "ula"):
            raise FormatError(f"unknown array kind {self.kind!r}")
        if self.M < 1:
            raise DimensionError("array needs at least one element")
        if self.kind == "eadf":
            if not self.eadf:
                raise FormatError("measured array needs at least one EADF")
            for pol, e in self.eadf.items():
                _check_pol(pol)
                if e.M != self.M:
                    raise DimensionError("all polarizations must share the element count")
        else:
            if not self.spacing > 0:
                raise FormatError("ULA spacing must be positive")
            for pol in self.gains:
                _check_pol(pol)

    @classmethod
    def ula(cls, M: int, spacing: float = 0.5, gains=None) -> "ArrayModel":
        if gains is None:
            gains = {"V": 1.0}
        g = {}
        for pol, val in gains.items():
            arr = np.broadcast_to(np.asarray(val, dtype=complex), (M,)).copy()
            g[_check_pol(pol)] = arr
        return cls("ula", int(M), spacing=float(spacing), gains=g)

    @classmethod
    def measured(cls, H: Optional[EADF] = None, V: Optional[EADF] = None) -> "ArrayModel":
        eadf = {}
        if H is not None:
            eadf["H"] = H
        if V is not None:
            eadf["V"] = V
        if not eadf:
            raise FormatError("measured array needs at least one EADF")
        M = next(iter(eadf.values())).M
        return cls("eadf", M, eadf=eadf)

    @classmethod
    def single_isotropic(cls, pols=("V",)) -> "ArrayModel":
        return cls.ula(1, 0.5, {p: 1.0 for p in pols})

    @property
    def polarizations(self) -> tuple:
        src = self.eadf if self.kind == "eadf" else self.gains
        return tuple(p for p in POLARIZATIONS if p in src)

    @property
    def m(self) -> np.ndarray:
        return centered_indices(self.M)

    def has_elevation(self) -> bool:
        """True when some EADF varies with elevation."""
        return self.kind == "eadf" and any(e.A_theta > 1 for e in self.eadf.values())

    def _require(self, pol: str):
        _check_pol(pol)
        if pol not in self.polarizations:
            raise MissingPolarizationError(
                f"array defines polarizations {self.polarizations}, not {pol!r}"
            )


def _angles(phi, theta):
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi, theta = np.broadcast_arrays(phi, theta)
    return phi.ravel(), theta.ravel()


def responses(model: ArrayModel, pol: str, phi, theta=0.0, derivatives: bool = False):
    """Vectorised response evaluation.

    Returns a ``(K, M)`` array of responses for ``K`` angle pairs, or the
    tuple ``(b, db_dphi, db_dtheta)`` when ``derivatives`` is set.
    """
    model._require(pol)
    phi, theta = _angles(phi, theta)
    if model.kind == "ula":
        g = model.gains[pol]
        m = model.m
        mu = 2 * np.pi * model.spacing * np.cos(phi)
        b = g[None, :] * np.exp(-1j * np.outer(mu, m))
        if not derivatives:
            return b
        dmu = -2 * np.pi * model.spacing * np.sin(phi)
        db_phi = b * (-1j * np.outer(dmu, m))
        return b, db_phi, np.zeros_like(b)

    e = model.eadf[pol]
    beta_phi = np.exp(1j * np.outer(phi, e.alpha_phi))
    beta_theta = np.exp(1j * np.outer(theta, e.alpha_theta))
    K = phi.size
    kr = (beta_phi[:, :, None] * beta_theta[:, None, :]).reshape(K, -1)
    b = kr @ e.G.T
    if not derivatives:
        return b
    d_phi = ((1j * beta_phi * e.alpha_phi)[:, :, None] * beta_theta[:, None, :]).reshape(K, -1)
    d_theta = (beta_phi[:, :, None] * (1j * beta_theta * e.alpha_theta)[:, None, :]).reshape(K, -1)
    return b, d_phi @ e.G.T, d_theta @ e.G.T


def array_response(model: ArrayModel, pol: str, phi: float, theta: float = 0.0) -> np.ndarray:
    """Response vector (length M) of ``model`` for polarization ``pol``.

    The ULA ignores elevation.
    """
    return responses(model, pol, phi, theta)[0]


def array_response_derivatives(model: ArrayModel, pol: str, phi: float, theta: float = 0.0):
    """Analytic ``(db/dphi, db/dtheta)`` at a single direction."""
    _, d_phi, d_theta = responses(model, pol, phi, theta, derivatives=True)
    return d_phi[0], d_theta[0]


def _check_uniform(grid, n, name):
    grid = np.asarray(grid, dtype=float)
    if grid.shape != (n,):
        raise FormatError(f"{name} grid has {grid.size} points, samples have {n}")
    step = 2 * np.pi / n
    if n > 1 and not np.allclose(np.diff(grid), step, rtol=0, atol=1e-9):
        raise FormatError(f"{name} grid must be uniform with step 2*pi/{n}")
    return grid[0]


def eadf_from_sampled_pattern(samples, phi_grid=None, theta_grid=None, polarization: str = "V") -> EADF:
    """Fourier-analyse a uniformly sampled pattern into an EADF.

    ``samples`` has shape ``(M, N_phi, N_theta)``. Both axes must cover one
    full 2*pi period with uniform spacing and odd sample counts; elevation
    patterns are expected to be periodically extended already. Grid start
    offsets are allowed and compensated.
    """
    s = np.asarray(samples, dtype=complex)
    if s.ndim != 3:
        raise FormatError("samples must be shaped (M, N_phi, N_theta)")
    M, n_phi, n_theta = s.shape
    if n_phi % 2 == 0 or n_theta % 2 == 0:
        raise FormatError("sampled grids must have odd sizes")
    phi0 = 0.0 if phi_grid is None else _check_uniform(phi_grid, n_phi, "azimuth")
    theta0 = 0.0 if theta_grid is None else _check_uniform(theta_grid, n_theta, "elevation")

    coeffs = np.fft.fftshift(np.fft.fft2(s, axes=(1, 2)), axes=(1, 2)) / (n_phi * n_theta)
    a_phi = centered_indices(n_phi)
    a_theta = centered_indices(n_theta)
    coeffs *= np.exp(-1j * phi0 * a_phi)[None, :, None]
    coeffs *= np.exp(-1j * theta0 * a_theta)[None, None, :]
    return EADF.from_coefficients(coeffs, polarization)


def high_xpr_check(resp_H, resp_V, threshold_db: float = 30.0) -> bool:
    """True when every element is (nearly) single-polarized at every angle.

    ``resp_H`` and ``resp_V`` are responses sampled on a common angle grid,
    shaped ``(..., M)``. An element with both responses zero passes.
    """
    h = np.abs(np.asarray(resp_H))
    v = np.abs(np.asarray(resp_V))
    if h.shape != v.shape:
        raise DimensionError(f"response grids differ: {h.shape} vs {v.shape}")
    hi = np.maximum(h, v)
    lo = np.minimum(h, v)
    limit = 10.0 ** (-threshold_db / 20.0)
    nz = hi > 0
    return bool(np.all(lo[nz] <= limit * hi[nz]))


def array_high_xpr(model: ArrayModel, phi, theta=0.0, threshold_db: float = 30.0) -> bool:
    """Run :func:`high_xpr_check` on a model over an angle grid.

    A model that defines a single polarization is trivially high-XPR.
    """
    if len(model.polarizations) < 2:
        return True
    return high_xpr_check(
        responses(model, "H", phi, theta), responses(model, "V", phi, theta), threshold_db
    )


def synthetic_patch_ula(M: int, spacing: float = 0.5, n_phi: int = 0, pol: str = "V",
                        front_to_back: float = 0.1) -> ArrayModel:
    """A ULA of directive, forward-facing elements expressed as an EADF.

    Each element has the cardioid-like amplitude
    ``front_to_back + (1 - front_to_back) * (1 + sin phi) / 2``, whose main
    lobe lies in ``[0, pi]``. This stands in for a measured patch pattern.
    """
    if n_phi <= 0:
        # enough harmonics for the ULA phase term exp(-j m pi cos phi)
        n_phi = 2 * int(np.ceil(2 * np.pi * spacing * (M - 1) / 2 + 12)) + 1
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    amp = front_to_back + (1 - front_to_back) * (1 + np.sin(phi)) / 2
    mu = 2 * np.pi * spacing * np.cos(phi)
    s = amp[None, :] * np.exp(-1j * np.outer(centered_indices(M), mu))
    e = eadf_from_sampled_pattern(s[:, :, None], polarization=pol)
    return ArrayModel.measured(**{pol: e})
