"""Spatio-temporal ambiguity functions and the integrated ambiguity objective."""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .array_model import ArrayModel, array_high_xpr, responses
from .errors import DegenerateDirectionError, DomainError, RankDeficientError, XPRPreconditionError
from .signal_model import (POL_PAIRS, PathParameters, SoundingConfig, SwitchingSequence,
                           basis_matrix_polarimetric, basis_vector, doppler_phase_vector)

RANK_TOL = 1e-10
STRUCT_DIMS = ("phi_T", "theta_T", "phi_R", "theta_R", "nu")


@dataclass(frozen=True)
class StructuralParams:
    """Angles and Doppler of one path; the quantities an ambiguity compares."""

    phi_T: float = 0.0
    theta_T: float = 0.0
    phi_R: float = 0.0
    theta_R: float = 0.0
    nu: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite([self.phi_T, self.theta_T, self.phi_R, self.theta_R, self.nu])):
            raise DomainError("structural parameters must be finite")

    def path(self) -> PathParameters:
        return PathParameters(theta_T=self.theta_T, phi_T=self.phi_T, theta_R=self.theta_R,
                              phi_R=self.phi_R, nu=self.nu)

    def replace(self, **kw) -> "StructuralParams":
        d = {k: getattr(self, k) for k in STRUCT_DIMS}
        d.update(kw)
        return StructuralParams(**d)


def _as_path(mu) -> PathParameters:
    return mu.path() if isinstance(mu, StructuralParams) else mu


# -- pointwise ambiguities --------------------------------------------------

def ambiguity_single_pol(mu, mu2, cfg: SoundingConfig, pol_pair=None) -> complex:
    """Normalised inner product of the basis vectors at ``mu`` and ``mu2``."""
    u = basis_vector(_as_path(mu), cfg, pol_pair)
    v = basis_vector(_as_path(mu2), cfg, pol_pair)
    nu_, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu_ == 0 or nv == 0:
        raise DegenerateDirectionError("basis vector vanishes (null of the pattern or missing pair)")
    return complex(np.vdot(u, v) / (nu_ * nv))


def _orthonormal_basis(B: np.ndarray, mode: str = "reduced") -> np.ndarray:
    Q, R = np.linalg.qr(B, mode=mode)
    d = np.abs(np.diag(R))
    scale = max(d.max(initial=0.0), np.linalg.norm(B))
    if B.shape[0] < B.shape[1] or scale == 0 or d.min() <= RANK_TOL * scale:
        raise RankDeficientError(f"basis matrix rank below {B.shape[1]}")
    return Q[:, : B.shape[1]]


def principal_cosines(mu, mu2, cfg: SoundingConfig, qr_mode: str = "reduced") -> np.ndarray:
    """Cosines of the principal angles between the two basis-matrix subspaces."""
    Q1 = _orthonormal_basis(basis_matrix_polarimetric(_as_path(mu), cfg), qr_mode)
    Q2 = _orthonormal_basis(basis_matrix_polarimetric(_as_path(mu2), cfg), qr_mode)
    s = np.linalg.svd(Q1.conj().T @ Q2, compute_uv=False)
    return np.clip(s, 0.0, 1.0)


def ambiguity_polarimetric_general(mu, mu2, cfg: SoundingConfig, measure: str = "S1",
                                   qr_mode: str = "reduced") -> float:
    """Subspace similarity of the two polarimetric basis matrices.

    ``measure`` selects ``'S1'`` (mean principal cosine, the default),
    ``'S2'`` (root of the summed squared cosines, over 4) or ``'d2'`` (the
    Grassmann distance ``sqrt(sum theta_i^2) / 4``; a distance, not a
    similarity).
    """
    s = principal_cosines(mu, mu2, cfg, qr_mode)
    n = s.size
    if measure == "S1":
        return float(s.sum() / n)
    if measure == "S2":
        return float(np.sqrt(np.sum(s ** 2)) / n)
    if measure == "d2":
        return float(np.sqrt(np.sum(np.arccos(s) ** 2)) / n)
    raise DomainError(f"unknown measure {measure!r}")


def _xpr_grid():
    return np.linspace(-np.pi, np.pi, 73)


def check_high_xpr(cfg: SoundingConfig, extra_phi=(), threshold_db: float = 30.0) -> bool:
    phi = np.concatenate([_xpr_grid(), np.asarray(extra_phi, dtype=float)])
    return array_high_xpr(cfg.tx, phi, 0.0, threshold_db) and array_high_xpr(cfg.rx, phi, 0.0, threshold_db)


def ambiguity_polarimetric_xpr(mu, mu2, cfg: SoundingConfig, check: bool = True,
                               threshold_db: float = 30.0) -> float:
    """Mean modulus of the four per-polarization-pair ambiguities.

    Valid when every element is (nearly) single-polarized; set
    ``check=False`` to skip the precondition test.
    """
    p1, p2 = _as_path(mu), _as_path(mu2)
    if check and not check_high_xpr(cfg, (p1.phi_T, p2.phi_T, p1.phi_R, p2.phi_R), threshold_db):
        raise XPRPreconditionError("arrays do not satisfy the high-XPR condition")
    return float(np.mean([abs(ambiguity_single_pol(p1, p2, cfg, pair)) for pair in POL_PAIRS]))


# -- integrated objective ---------------------------------------------------

@dataclass(frozen=True)
class AmbiguityGrid:
    """Midpoint integration grid over true and test structural parameters.

    Azimuths cover ``[0, 2 pi]``, elevations ``[0, pi]`` and the Doppler
    difference ``[-nu_up, nu_up]`` (default ``nu_up = 1/(2 dt)``). Elevation
    counts are ignored for ULAs.
    """

    n_phi_T: int = 36
    n_theta_T: int = 1
    n_phi_R: int = 1
    n_theta_R: int = 1
    n_nu: int = 32
    nu_up: Optional[float] = None
    power: float = 6.0

    def __post_init__(self):
        for name in ("n_phi_T", "n_theta_T", "n_phi_R", "n_theta_R", "n_nu"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be at least 1")
        if self.nu_up is not None and not self.nu_up > 0:
            raise DomainError("nu_up must be positive")
        if not self.power >= 1:
            raise DomainError("power must be at least 1")

    def bound(self, dt: float) -> float:
        return 1.0 / (2.0 * dt) if self.nu_up is None else float(self.nu_up)


def _midpoints(lo: float, hi: float, n: int) -> np.ndarray:
    return lo + (np.arange(n) + 0.5) * (hi - lo) / n


def _side_angles(arr: ArrayModel, n_phi: int, n_theta: int):
    phi = _midpoints(0.0, 2 * np.pi, n_phi)
    if arr.has_elevation():
        theta = _midpoints(0.0, np.pi, n_theta)
    else:
        theta, n_theta = np.zeros(1), 1
    P, T = np.meshgrid(phi, theta, indexing="ij")
    w = (2 * np.pi / n_phi) * (np.pi / n_theta if arr.has_elevation() else 1.0)
    return P.ravel(), T.ravel(), w


def _pair_products(arr: ArrayModel, pol: str, phi, theta):
    """``conj(b(x)) * b(x')`` over all true/test pairs, normalised."""
    b = responses(arr, pol, phi, theta)
    n = np.linalg.norm(b, axis=1)
    if np.any(n == 0):
        raise DegenerateDirectionError(f"pattern vanishes on the grid for polarization {pol}")
    b = b / n[:, None]
    return (np.conj(b)[:, None, :] * b[None, :, :]).reshape(-1, b.shape[1])


class AmbiguityObjective:
    """Integrated ``|X|^P`` objective with grid-dependent work cached.

    ``mode`` is ``'auto'`` (single-pol when either array defines one
    polarization, high-XPR form when both arrays pass the XPR test,
    general form otherwise), ``'single'``, ``'xpr'`` or ``'general'``.
    """

    def __init__(self, cfg: SoundingConfig, grid: AmbiguityGrid = AmbiguityGrid(), mode: str = "auto"):
        self.cfg = cfg
        self.grid = grid
        if mode == "auto":
            if len(cfg.tx.polarizations) < 2 or len(cfg.rx.polarizations) < 2:
                mode = "single"
            elif check_high_xpr(cfg):
                mode = "xpr"
            else:
                mode = "general"
        if mode not in ("single", "xpr", "general"):
            raise DomainError(f"unknown objective mode {mode!r}")
        self.mode = mode
        phiT, thT, wT = _side_angles(cfg.tx, grid.n_phi_T, grid.n_theta_T)
        phiR, thR, wR = _side_angles(cfg.rx, grid.n_phi_R, grid.n_theta_R)
        nu_up = grid.bound(cfg.dt)
        self.dnu = _midpoints(-nu_up, nu_up, grid.n_nu)
        self.cell = wT ** 2 * wR ** 2 * (2 * nu_up / grid.n_nu)
        self._angles = (phiT, thT, phiR, thR)
        # snapshot factor: mean over snapshots of exp(j 2 pi dnu t_s)
        self._snap = np.exp(2j * np.pi * np.outer(self.dnu, cfg.snapshot_times())).mean(axis=1)
        pairs = [cfg.pol_pair] if mode == "single" else list(POL_PAIRS)
        self._tables = []
        if mode != "general":
            for pT, pR in pairs:
                self._tables.append((_pair_products(cfg.tx, pT, phiT, thT),
                                     _pair_products(cfg.rx, pR, phiR, thR)))

    def magnitudes(self, eta) -> np.ndarray:
        """``|X|`` for every (TX pair, RX pair, Doppler difference) cell."""
        eta = np.asarray(eta, dtype=float)
        MT, MR = self.cfg.tx.M, self.cfg.rx.M
        if self.mode == "general":
            return self._general(eta)
        acc = None
        for PT, PR in self._tables:
            vals = []
            for k, dn in enumerate(self.dnu):
                E = np.exp(2j * np.pi * dn * eta).reshape(MT, MR)
                vals.append(self._snap[k] * (PT @ E @ PR.T))
            X = np.abs(np.stack(vals, axis=-1))
            acc = X if acc is None else acc + X
        return acc / len(self._tables)

    def _general(self, eta) -> np.ndarray:
        seq = SwitchingSequence.from_eta(eta, self.cfg.dt)
        cfg = self.cfg.with_sequence(seq)
        phiT, thT, phiR, thR = self._angles
        KT, KR = phiT.size, phiR.size
        out = np.empty((KT * KT, KR * KR, self.dnu.size))
        for a, b in itertools.product(range(KT), repeat=2):
            for c, d in itertools.product(range(KR), repeat=2):
                mu = PathParameters(theta_T=thT[a], phi_T=phiT[a], theta_R=thR[c], phi_R=phiR[c])
                for k, dn in enumerate(self.dnu):
                    mu2 = PathParameters(theta_T=thT[b], phi_T=phiT[b], theta_R=thR[d],
                                         phi_R=phiR[d], nu=-dn)
                    out[a * KT + b, c * KR + d, k] = ambiguity_polarimetric_general(mu, mu2, cfg)
        return out

    def __call__(self, eta) -> float:
        X = self.magnitudes(eta)
        return float(self.cell * np.sum(X.ravel() ** self.grid.power))


def ambiguity_objective(eta, grid: AmbiguityGrid, cfg: SoundingConfig, mode: str = "auto") -> float:
    """One-shot evaluation of :class:`AmbiguityObjective`."""
    return AmbiguityObjective(cfg, grid, mode)(eta)


# -- surfaces ---------------------------------------------------------------

@dataclass(frozen=True)
class Surface:
    """Dense ``|X|`` matrix with its axes (rows follow ``axes[0]``)."""

    axes: Tuple[str, ...]
    values: Tuple[np.ndarray, ...]
    data: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if len(self.axes) == 1:
            w.writerow([self.axes[0], "abs_X"])
            for x, v in zip(self.values[0], self.data):
                w.writerow([repr(float(x)), repr(float(v))])
        else:
            w.writerow([f"{self.axes[0]}\\{self.axes[1]}"] + [repr(float(x)) for x in self.values[1]])
            for x, row in zip(self.values[0], self.data):
                w.writerow([repr(float(x))] + [repr(float(v)) for v in row])
        return buf.getvalue()


SWEEP_DIMS = ("phi_T", "theta_T", "phi_R", "theta_R", "dnu")


def ambiguity_surface(cfg: SoundingConfig, mu_true, sweep: Dict[str, Sequence[float]],
                      pol_pair=None) -> Surface:
    """Single-polarization ``|X|`` over one or two swept test dimensions.

    Sweep keys are test angles (``phi_T`` ...) or ``dnu``, the Doppler
    difference ``nu - nu'``. Unswept test parameters equal the true ones.
    """
    if not 1 <= len(sweep) <= 2:
        raise DomainError("sweep must name one or two dimensions")
    bad = [k for k in sweep if k not in SWEEP_DIMS]
    if bad:
        raise DomainError(f"unknown sweep dimensions {bad}")
    axes = tuple(sweep)
    values = tuple(np.asarray(sweep[a], dtype=float) for a in axes)
    if any(v.size == 0 for v in values):
        raise DomainError("sweep dimensions must be non-empty")
    p0 = _as_path(mu_true)
    u0 = basis_vector(p0, cfg, pol_pair)
    n0 = np.linalg.norm(u0)
    if n0 == 0:
        raise DegenerateDirectionError("true basis vector vanishes")
    tau = cfg.timing_vector()

    angle_axes = [a for a in axes if a != "dnu"]
    dnu = values[axes.index("dnu")] if "dnu" in axes else np.zeros(1)
    angle_vals = [values[axes.index(a)] for a in angle_axes]
    shape = tuple(v.size for v in angle_vals)
    out = np.empty(shape + (dnu.size,))
    # test Doppler nu' = nu - dnu
    E = np.exp(2j * np.pi * np.outer(p0.nu - dnu, tau))
    for idx in itertools.product(*[range(s) for s in shape]):
        kw = {a: angle_vals[i][j] for i, (a, j) in enumerate(zip(angle_axes, idx))}
        p = p0.replace(nu=0.0, **kw)
        c = basis_vector(p, cfg, pol_pair)
        nc = np.linalg.norm(c)
        if nc == 0:
            raise DegenerateDirectionError("test basis vector vanishes")
        out[idx] = np.abs(E @ (np.conj(u0) * c)) / (n0 * nc)
    if "dnu" not in axes:
        out = out[..., 0]
    elif axes[0] == "dnu" and len(axes) == 2:
        out = out.T
    return Surface(axes, values, out)


def count_local_maxima(data: np.ndarray, threshold: float = 0.9) -> int:
    """Grid points above ``threshold`` not exceeded by any 8-neighbour."""
    Z = np.atleast_2d(data)
    P = np.pad(Z, 1, constant_values=-np.inf)
    core = P[1:-1, 1:-1]
    is_max = core > threshold
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            nb = P[1 + di: P.shape[0] - 1 + di, 1 + dj: P.shape[1] - 1 + dj]
            is_max &= core >= nb
    return int(is_max.sum())


# -- Kronecker factorisation --------------------------------------------------

def kronecker_factors(mu, mu2, tx: ArrayModel, rx: ArrayModel, seq_T: SwitchingSequence,
                      seq_R: SwitchingSequence, pol_pair=("V", "V")):
    """Joint ambiguity of a Kronecker schedule together with its TX and RX factors.

    The joint sequence is the TX-outer schedule, whose Doppler phase vector
    factorises into ``a(M_R eta_T) (x) a(eta_R)``; the TX factor therefore
    uses the stretched timing ``M_R * eta_T``.
    """
    from .signal_model import kronecker_schedule

    p1, p2 = _as_path(mu), _as_path(mu2)
    joint = SoundingConfig(tx, rx, kronecker_schedule(seq_T, seq_R), pol_pair=pol_pair)
    XJ = ambiguity_single_pol(p1, p2, joint)

    def side(arr, pol, phi1, th1, phi2, th2, eta):
        u = responses(arr, pol, phi1, th1)[0] * doppler_phase_vector(p1.nu, eta)
        v = responses(arr, pol, phi2, th2)[0] * doppler_phase_vector(p2.nu, eta)
        return complex(np.vdot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))

    XT = side(tx, pol_pair[0], p1.phi_T, p1.theta_T, p2.phi_T, p2.theta_T, rx.M * seq_T.eta)
    XR = side(rx, pol_pair[1], p1.phi_R, p1.theta_R, p2.phi_R, p2.theta_R, seq_R.eta)
    return XJ, XT, XR
