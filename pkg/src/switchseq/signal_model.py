"""Switching sequences, Doppler phase vectors and the single-path signal model."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .array_model import ArrayModel, centered_indices, responses
from .errors import DegenerateAmplitudeError, DimensionError, DomainError, InvalidPermutationError

POL_PAIRS = (("H", "H"), ("H", "V"), ("V", "H"), ("V", "V"))


def validate_permutation(perm, M_TR: Optional[int] = None) -> np.ndarray:
    p = np.asarray(perm)
    if p.ndim != 1 or p.size == 0:
        raise InvalidPermutationError("permutation must be a non-empty 1-D sequence")
    if not np.all(np.equal(np.mod(p, 1), 0)):
        raise InvalidPermutationError("permutation entries must be integers")
    p = p.astype(np.int64)
    n = p.size if M_TR is None else int(M_TR)
    if p.size != n:
        raise InvalidPermutationError(f"permutation has {p.size} entries, expected {n}")
    if not np.array_equal(np.sort(p), np.arange(1, n + 1)):
        raise InvalidPermutationError("not a bijection on {1..M_TR}")
    return p


def eta_from_permutation(perm, dt: float = 1.0, M_TR: Optional[int] = None) -> np.ndarray:
    """Centered activation times ``dt * (perm - 1 - (M_TR-1)/2)``."""
    p = validate_permutation(perm, M_TR)
    if not dt > 0:
        raise DomainError("dt must be positive")
    return dt * (p - 1 - (p.size - 1) / 2.0)


@dataclass(frozen=True)
class SwitchingSequence:
    """Activation order of the ``M_TR`` antenna pairs.

    ``perm[k]`` is the (1-based) time slot at which antenna pair ``k`` is
    activated; ``dt`` is the interval between consecutive activations.
    """

    perm: Tuple[int, ...]
    dt: float = 1.0

    def __post_init__(self):
        p = validate_permutation(self.perm)
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        object.__setattr__(self, "perm", tuple(int(x) for x in p))
        object.__setattr__(self, "dt", float(self.dt))

    @classmethod
    def trivial(cls, M_TR: int, dt: float = 1.0) -> "SwitchingSequence":
        return cls(tuple(range(1, M_TR + 1)), dt)

    @classmethod
    def from_eta(cls, eta, dt: float = 1.0) -> "SwitchingSequence":
        eta = np.asarray(eta, dtype=float)
        slots = eta / dt + (eta.size - 1) / 2.0 + 1
        rounded = np.rint(slots)
        if not np.allclose(slots, rounded, atol=1e-6):
            raise InvalidPermutationError("timing vector is not a permuted centered ramp")
        return cls(tuple(int(x) for x in rounded), dt)

    @property
    def M(self) -> int:
        return len(self.perm)

    @property
    def eta(self) -> np.ndarray:
        return eta_from_permutation(self.perm, self.dt)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.perm, dtype=np.int64)


def kron_sequence(eta_T, eta_R) -> np.ndarray:
    """Kronecker product ``eta_T (x) eta_R`` of two timing vectors."""
    return np.kron(np.asarray(eta_T, dtype=float), np.asarray(eta_R, dtype=float))


def kronecker_schedule(seq_T: SwitchingSequence, seq_R: SwitchingSequence) -> SwitchingSequence:
    """Joint TX/RX schedule with the TX switch as the outer loop.

    Pair ``(i, j)`` is activated in slot ``(perm_T[i]-1)*M_R + perm_R[j]``, so
    the joint timing vector is ``M_R*eta_T (x) 1 + 1 (x) eta_R`` and its
    Doppler phase vector factorises as ``a(M_R*eta_T) (x) a(eta_R)``.
    """
    if not np.isclose(seq_T.dt, seq_R.dt):
        raise DomainError("TX and RX sequences must share dt")
    pT = seq_T.as_array()
    pR = seq_R.as_array()
    joint = ((pT[:, None] - 1) * seq_R.M + pR[None, :]).ravel()
    return SwitchingSequence(tuple(int(x) for x in joint), seq_T.dt)


def doppler_phase_vector(nu: float, eta) -> np.ndarray:
    """``exp(j 2 pi nu eta)`` elementwise."""
    return np.exp(2j * np.pi * nu * np.asarray(eta, dtype=float))


def basis_vector_single_pol(b_T, b_R, nu: float, eta) -> np.ndarray:
    """Unit-gain single-polarization basis ``(b_T (x) b_R) . a_nu``."""
    kr = np.kron(np.asarray(b_T), np.asarray(b_R))
    eta = np.asarray(eta, dtype=float)
    if kr.size != eta.size:
        raise DimensionError(f"responses give {kr.size} pairs, timing vector has {eta.size}")
    return kr * doppler_phase_vector(nu, eta)


@dataclass(frozen=True)
class PathParameters:
    """Parameters of a single propagation path; gamma = r * exp(j psi)."""

    theta_T: float = 0.0
    phi_T: float = 0.0
    theta_R: float = 0.0
    phi_R: float = 0.0
    nu: float = 0.0
    r: float = 1.0
    psi: float = 0.0

    def __post_init__(self):
        vals = (self.theta_T, self.phi_T, self.theta_R, self.phi_R, self.nu, self.r, self.psi)
        if not np.all(np.isfinite(vals)):
            raise DomainError("path parameters must be finite")
        if self.r < 0:
            raise DegenerateAmplitudeError("amplitude r must be non-negative")

    @property
    def gamma(self) -> complex:
        return self.r * np.exp(1j * self.psi)

    def replace(self, **kw) -> "PathParameters":
        d = {k: getattr(self, k) for k in ("theta_T", "phi_T", "theta_R", "phi_R", "nu", "r", "psi")}
        d.update(kw)
        return PathParameters(**d)


@dataclass(frozen=True, eq=False)
class SoundingConfig:
    """Everything needed to build basis vectors for one sounder setup.

    ``M_t`` snapshots are taken back to back (period ``snapshot_period``,
    default ``M_TR * dt``) and the activation times repeat identically in each
    snapshot. ``b_f`` is the (delay-dependent) frequency basis, ones by
    default. ``pol_pair`` selects the polarization pair used by the
    single-polarization operations.
    """

    tx: ArrayModel
    rx: ArrayModel
    sequence: SwitchingSequence
    M_t: int = 1
    b_f: Optional[np.ndarray] = None
    snapshot_period: Optional[float] = None
    pol_pair: Tuple[str, str] = ("V", "V")

    def __post_init__(self):
        if self.M_t < 1:
            raise DimensionError("M_t must be at least 1")
        if self.tx.M * self.rx.M != self.sequence.M:
            raise DimensionError(
                f"sequence covers {self.sequence.M} pairs, arrays have {self.tx.M}x{self.rx.M}"
            )
        b_f = np.ones(1, dtype=complex) if self.b_f is None else np.atleast_1d(np.asarray(self.b_f, dtype=complex))
        if b_f.ndim != 1 or b_f.size < 1:
            raise DimensionError("b_f must be a non-empty vector")
        object.__setattr__(self, "b_f", b_f)

    @property
    def M_TR(self) -> int:
        return self.sequence.M

    @property
    def M_f(self) -> int:
        return self.b_f.size

    @property
    def length(self) -> int:
        return self.M_t * self.M_TR * self.M_f

    @property
    def dt(self) -> float:
        return self.sequence.dt

    def with_sequence(self, seq: SwitchingSequence) -> "SoundingConfig":
        return SoundingConfig(self.tx, self.rx, seq, self.M_t, self.b_f, self.snapshot_period, self.pol_pair)

    def snapshot_times(self) -> np.ndarray:
        period = self.M_TR * self.dt if self.snapshot_period is None else self.snapshot_period
        return centered_indices(self.M_t) * period

    def eta_tiled(self) -> np.ndarray:
        """Activation times relative to each snapshot start (length M_t*M_TR)."""
        return np.tile(self.sequence.eta, self.M_t)

    def timing_vector(self) -> np.ndarray:
        """Absolute (centered) activation time of every entry of the signal."""
        tau = np.kron(self.snapshot_times(), np.ones(self.M_TR)) + self.eta_tiled()
        return np.kron(tau, np.ones(self.M_f))

    def snapshot_basis(self, nu: float) -> np.ndarray:
        return np.exp(2j * np.pi * nu * self.snapshot_times())


def _assemble(cfg: SoundingConfig, bT, bR, nu):
    """Literal form ``((b_t (x) b_T (x) b_R) . a_nu) (x) b_f``."""
    b_t = cfg.snapshot_basis(nu)
    a = doppler_phase_vector(nu, cfg.eta_tiled())
    return np.kron(np.kron(b_t, np.kron(bT, bR)) * a, cfg.b_f)


def basis_vector(path: PathParameters, cfg: SoundingConfig, pol_pair=None) -> np.ndarray:
    """Unit-gain basis vector for one polarization pair."""
    pT, pR = cfg.pol_pair if pol_pair is None else pol_pair
    bT = responses(cfg.tx, pT, path.phi_T, path.theta_T)[0]
    bR = responses(cfg.rx, pR, path.phi_R, path.theta_R)[0]
    return _assemble(cfg, bT, bR, path.nu)


def basis_matrix_polarimetric(path: PathParameters, cfg: SoundingConfig) -> np.ndarray:
    """Four-column basis matrix, columns ordered HH, HV, VH, VV."""
    cols = [basis_vector(path, cfg, pair) for pair in POL_PAIRS]
    return np.stack(cols, axis=1)


def spatial_matrix(cfg: SoundingConfig, path: PathParameters, phi_T, pol_pair=None) -> np.ndarray:
    """Doppler-free basis ``1 (x) b_T(phi) (x) b_R (x) b_f`` for many TX azimuths.

    Multiplying a row by ``exp(j 2 pi nu timing_vector())`` gives the full
    basis vector. Shape ``(K, length)``.
    """
    pT, pR = cfg.pol_pair if pol_pair is None else pol_pair
    bT = responses(cfg.tx, pT, phi_T, path.theta_T)
    bR = responses(cfg.rx, pR, path.phi_R, path.theta_R)[0]
    K = bT.shape[0]
    kr = (bT[:, :, None] * bR[None, None, :]).reshape(K, -1)
    kr = np.tile(kr, (1, cfg.M_t))
    return (kr[:, :, None] * cfg.b_f[None, None, :]).reshape(K, -1)


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circular complex Gaussian samples with unit total variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def synth_received_signal(path: PathParameters, cfg: SoundingConfig, sigma: float,
                          rng=None, pol_pair=None) -> np.ndarray:
    """Noisy observation ``gamma * basis + n`` with ``E|n_k|^2 = sigma^2``.

    ``rng`` may be a seed or a ``numpy.random.Generator``.
    """
    if sigma < 0:
        raise DomainError("sigma must be non-negative")
    s = path.gamma * basis_vector(path, cfg, pol_pair)
    if sigma == 0:
        return s
    rng = np.random.default_rng(rng)
    return s + sigma * complex_normal(rng, s.shape)


def noise_sigma_for_snr(path: PathParameters, cfg: SoundingConfig, snr_db: float, pol_pair=None) -> float:
    """Noise std giving per-sample SNR ``r^2 * mean|basis|^2 / sigma^2``."""
    u = basis_vector(path, cfg, pol_pair)
    power = path.r ** 2 * np.mean(np.abs(u) ** 2)
    return float(np.sqrt(power / 10.0 ** (snr_db / 10.0)))
