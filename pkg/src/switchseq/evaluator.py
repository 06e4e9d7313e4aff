"""Maximum-likelihood azimuth/Doppler estimation and Monte Carlo benchmarking.

Only the TX azimuth and the Doppler shift are unknown; the remaining path
parameters are taken as known. The complex gain is concentrated out of the
likelihood, which leaves ``|u(phi, nu)^H y|^2 / ||u(phi, nu)||^2`` to be
maximised over a grid and then refined locally.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, UndefinedEstimateError
from .fisher import crlb as _crlb
from .signal_model import PathParameters, SoundingConfig, SwitchingSequence, complex_normal, spatial_matrix

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
CRLB_PARAMS = ("phi_T", "nu", "r", "psi")


@dataclass(frozen=True)
class EstimatorGrid:
    """Search grid over TX azimuth (radians) and Doppler (Hz).

    ``nu_range=None`` means ``+-1/(2 dt)``. Refinement runs ``sweeps``
    rounds of golden-section search per dimension followed by a few
    safeguarded Newton steps on both dimensions jointly.
    """

    n_phi: int = 181
    phi_range: Tuple[float, float] = (-np.pi, np.pi)
    n_nu: int = 128
    nu_range: Optional[Tuple[float, float]] = None
    golden_iters: int = 40
    sweeps: int = 2
    newton_iters: int = 8

    def __post_init__(self):
        if self.n_phi < 2 or self.n_nu < 2:
            raise DomainError("estimator grids need at least 2 points per dimension")
        if not self.phi_range[0] < self.phi_range[1]:
            raise DomainError("azimuth range must be increasing")
        if self.nu_range is not None and not self.nu_range[0] < self.nu_range[1]:
            raise DomainError("Doppler range must be increasing")

    def doppler_range(self, dt: float) -> Tuple[float, float]:
        if self.nu_range is None:
            return (-1.0 / (2.0 * dt), 1.0 / (2.0 * dt))
        bound = 1.0 / (2.0 * dt)
        if self.nu_range[0] < -bound * (1 + 1e-12) or self.nu_range[1] > bound * (1 + 1e-12):
            raise DomainError("Doppler search range exceeds the non-ambiguous bound 1/(2 dt)")
        return tuple(self.nu_range)


class MLEstimator:
    """Concentrated-likelihood estimator for one sounding configuration."""

    def __init__(self, cfg: SoundingConfig, grid: EstimatorGrid = EstimatorGrid(),
                 known: PathParameters = PathParameters(), pol_pair=None):
        self.cfg = cfg
        self.grid = grid
        self.known = known
        self.pol_pair = pol_pair
        self.tau = cfg.timing_vector()
        self.phi = np.linspace(*grid.phi_range, grid.n_phi)
        self.nu = np.linspace(*grid.doppler_range(cfg.dt), grid.n_nu)
        self.dphi = self.phi[1] - self.phi[0]
        self.dnu = self.nu[1] - self.nu[0]
        S = spatial_matrix(cfg, known, self.phi, pol_pair)
        self._norm2 = np.sum(np.abs(S) ** 2, axis=1)
        if np.any(self._norm2 == 0):
            raise DomainError("array pattern vanishes on the search grid")
        self._Sc = np.conj(S)
        self._Ec = np.exp(-2j * np.pi * np.outer(self.nu, self.tau))

    def _loglik(self, Y, phi, nu) -> np.ndarray:
        """Concentrated likelihood per trial at per-trial (phi, nu)."""
        S = spatial_matrix(self.cfg, self.known, phi, self.pol_pair)
        u = S * np.exp(2j * np.pi * nu[:, None] * self.tau[None, :])
        num = np.abs(np.sum(np.conj(u) * Y, axis=1)) ** 2
        return num / np.sum(np.abs(S) ** 2, axis=1)

    def grid_search(self, Y) -> Tuple[np.ndarray, np.ndarray]:
        B, N = Y.shape
        A = (self._Sc[None, :, :] * Y[:, None, :]).reshape(-1, N) @ self._Ec.T
        L = (np.abs(A) ** 2).reshape(B, self.phi.size, self.nu.size) / self._norm2[None, :, None]
        k = np.argmax(L.reshape(B, -1), axis=1)
        i, j = np.unravel_index(k, (self.phi.size, self.nu.size))
        return self.phi[i].copy(), self.nu[j].copy()

    def _golden(self, Y, phi, nu, dim: int, half: float):
        lo_lim, hi_lim = (self.grid.phi_range if dim == 0 else (self.nu[0], self.nu[-1]))
        x0 = phi if dim == 0 else nu
        a = np.maximum(x0 - half, lo_lim)
        b = np.minimum(x0 + half, hi_lim)
        f = (lambda x: self._loglik(Y, x, nu)) if dim == 0 else (lambda x: self._loglik(Y, phi, x))
        c = b - GOLDEN * (b - a)
        d = a + GOLDEN * (b - a)
        fc, fd = f(c), f(d)
        for _ in range(self.grid.golden_iters):
            left = fc > fd
            b = np.where(left, d, b)
            a = np.where(left, a, c)
            c_new = b - GOLDEN * (b - a)
            d_new = a + GOLDEN * (b - a)
            # reuse the surviving interior point
            c, d = np.where(left, c_new, d), np.where(left, c, d_new)
            fc_old, fd_old = fc, fd
            fc = np.where(left, f(c), fd_old)
            fd = np.where(left, fc_old, f(d))
        x = 0.5 * (a + b)
        f0, fx = f(x0), f(x)
        return np.where(fx > f0, x, x0)

    def _newton(self, Y, phi, nu):
        hp, hn = self.dphi * 1e-3, self.dnu * 1e-3
        lo_p, hi_p = self.grid.phi_range
        lo_n, hi_n = self.nu[0], self.nu[-1]
        for _ in range(self.grid.newton_iters):
            f0 = self._loglik(Y, phi, nu)
            fpp = self._loglik(Y, phi + hp, nu)
            fpm = self._loglik(Y, phi - hp, nu)
            fnp = self._loglik(Y, phi, nu + hn)
            fnm = self._loglik(Y, phi, nu - hn)
            fpn = self._loglik(Y, phi + hp, nu + hn)
            fmm = self._loglik(Y, phi - hp, nu - hn)
            # derivatives in step-scaled coordinates
            g = np.stack([(fpp - fpm) / 2, (fnp - fnm) / 2], axis=1)
            Hpp = fpp - 2 * f0 + fpm
            Hnn = fnp - 2 * f0 + fnm
            Hpn = (fpn - fpp - fnp + 2 * f0 - fpm - fnm + fmm) / 2
            det = Hpp * Hnn - Hpn ** 2
            ok = (Hpp < 0) & (det > 0)
            with np.errstate(divide="ignore", invalid="ignore"):
                sp = np.where(ok, -(Hnn * g[:, 0] - Hpn * g[:, 1]) / det, 0.0)
                sn = np.where(ok, -(Hpp * g[:, 1] - Hpn * g[:, 0]) / det, 0.0)
            step_p = np.clip(sp * hp, -self.dphi, self.dphi)
            step_n = np.clip(sn * hn, -self.dnu, self.dnu)
            for _ in range(4):
                cp = np.clip(phi + step_p, lo_p, hi_p)
                cn = np.clip(nu + step_n, lo_n, hi_n)
                better = self._loglik(Y, cp, cn) > f0
                phi = np.where(better, cp, phi)
                nu = np.where(better, cn, nu)
                step_p = np.where(better, 0.0, step_p / 2)
                step_n = np.where(better, 0.0, step_n / 2)
        return phi, nu

    def estimate(self, Y) -> Tuple[np.ndarray, np.ndarray]:
        """Estimates for each row of ``Y``; returns ``(phi_hat, nu_hat)``."""
        Y = np.atleast_2d(np.asarray(Y, dtype=complex))
        if Y.shape[1] != self.tau.size:
            raise DomainError(f"observation length {Y.shape[1]} != model length {self.tau.size}")
        if np.any(np.all(Y == 0, axis=1)):
            raise UndefinedEstimateError("all-zero observation has no maximum-likelihood estimate")
        phi, nu = self.grid_search(Y)
        half_p, half_n = self.dphi, self.dnu
        for _ in range(self.grid.sweeps):
            phi = self._golden(Y, phi, nu, 0, half_p)
            nu = self._golden(Y, phi, nu, 1, half_n)
            half_p, half_n = half_p / 4, half_n / 4
        return self._newton(Y, phi, nu)

    def gamma_hat(self, y, phi: float, nu: float) -> complex:
        u = spatial_matrix(self.cfg, self.known, phi, self.pol_pair)[0] * np.exp(2j * np.pi * nu * self.tau)
        return complex(np.vdot(u, y) / np.vdot(u, u).real)


def mle_estimate(y, cfg: SoundingConfig, grid: EstimatorGrid = EstimatorGrid(),
                 known: PathParameters = PathParameters()) -> Tuple[float, float]:
    """Single-observation ``(phi_hat, nu_hat)``."""
    phi, nu = MLEstimator(cfg, grid, known).estimate(np.asarray(y)[None, :])
    return float(phi[0]), float(nu[0])


# -- Monte Carlo --------------------------------------------------------------

def wrap_degrees(x) -> np.ndarray:
    """Wrap angles in degrees to ``(-180, 180]``."""
    y = np.mod(np.asarray(x, dtype=float) + 180.0, 360.0) - 180.0
    return np.where(y == -180.0, 180.0, y)


@dataclass(frozen=True, eq=False)
class Scenario:
    """Sequences to compare, sharing one channel and noise setup."""

    tx: object
    rx: object
    sequences: Tuple[Tuple[str, SwitchingSequence], ...]
    path: PathParameters
    snr_db: Tuple[float, ...]
    trials: int
    seed: int
    grid: EstimatorGrid = EstimatorGrid()
    M_t: int = 1
    pol_pair: Tuple[str, str] = ("V", "V")
    batch: int = 100

    def __post_init__(self):
        if self.trials < 1:
            raise DomainError("trials must be at least 1")
        if not self.sequences:
            raise DomainError("scenario needs at least one sequence")
        if len(self.snr_db) == 0:
            raise DomainError("SNR sweep is empty")
        names = [n for n, _ in self.sequences]
        if len(set(names)) != len(names):
            raise DomainError("sequence names must be unique")

    def sounding(self, seq: SwitchingSequence) -> SoundingConfig:
        return SoundingConfig(self.tx, self.rx, seq, M_t=self.M_t, pol_pair=self.pol_pair)

    def sigma(self, seq: SwitchingSequence, snr_db: float) -> float:
        """Noise std for per-sample SNR ``r^2 mean|u|^2 / sigma^2``."""
        from .signal_model import basis_vector

        u = basis_vector(self.path, self.sounding(seq))
        return float(np.sqrt(self.path.r ** 2 * np.mean(np.abs(u) ** 2) / 10 ** (snr_db / 10)))


@dataclass
class MonteCarloReport:
    """Per-SNR error statistics of one sequence (angles in degrees, Doppler in Hz)."""

    name: str
    snr_db: np.ndarray
    az_rmse: np.ndarray
    az_logmse: np.ndarray
    nu_rmse: np.ndarray
    nu_logmse: np.ndarray
    crlb_az: np.ndarray
    crlb_nu: np.ndarray
    az_estimates: np.ndarray
    nu_estimates: np.ndarray
    trials: int
    seed: int
    true_az: float
    phi_range_deg: Tuple[float, float]

    @property
    def log_crlb_az(self) -> np.ndarray:
        return np.log10(self.crlb_az)

    @property
    def log_crlb_nu(self) -> np.ndarray:
        return np.log10(self.crlb_nu)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sequence", "snr_db", "az_rmse_deg", "az_logmse", "az_log_crlb", "nu_rmse_hz",
                    "nu_logmse", "nu_log_crlb", "trials", "seed"])
        for k, s in enumerate(self.snr_db):
            w.writerow([self.name, repr(float(s)), repr(float(self.az_rmse[k])), repr(float(self.az_logmse[k])),
                        repr(float(self.log_crlb_az[k])), repr(float(self.nu_rmse[k])),
                        repr(float(self.nu_logmse[k])), repr(float(self.log_crlb_nu[k])),
                        self.trials, self.seed])
        return buf.getvalue()


def _snr_streams(seed: int, n: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def crlb_reference(scenario: Scenario, snr_db: Optional[Sequence[float]] = None) -> Dict[str, np.ndarray]:
    """CRLB of azimuth (deg^2) and Doppler (Hz^2) per sequence and SNR.

    Returns ``{name: array of shape (n_snr, 2)}``; the unknowns are
    azimuth, Doppler, amplitude and phase. Infinite SNR gives a zero bound.
    """
    snrs = scenario.snr_db if snr_db is None else tuple(snr_db)
    out = {}
    for name, seq in scenario.sequences:
        # the bound is proportional to sigma^2, so one inversion serves every SNR
        unit = _crlb(scenario.path, scenario.sounding(seq), 1.0, CRLB_PARAMS)
        var = np.array([scenario.sigma(seq, s) ** 2 for s in snrs])
        out[name] = np.stack([var * unit[0] * np.degrees(1.0) ** 2, var * unit[1]], axis=1)
    return out


def run_monte_carlo(scenario: Scenario, progress=None) -> Dict[str, MonteCarloReport]:
    """Paired Monte Carlo run: every sequence sees the same noise draws.

    The noise of SNR point ``i`` comes from the ``i``-th child of
    ``SeedSequence(seed)``, so results per sequence do not depend on which
    other sequences are in the list or on their order.
    """
    snrs = np.asarray(scenario.snr_db, dtype=float)
    streams = _snr_streams(scenario.seed, snrs.size)
    crlbs = crlb_reference(scenario)
    p = scenario.path
    true_az = np.degrees(p.phi_T)
    ests = {}
    for name, seq in scenario.sequences:
        cfg = scenario.sounding(seq)
        est = MLEstimator(cfg, scenario.grid, p.replace(phi_T=0.0, nu=0.0, r=1.0, psi=0.0))
        from .signal_model import basis_vector

        s = p.gamma * basis_vector(p, cfg)
        ests[name] = (cfg, est, s, np.empty((snrs.size, scenario.trials)), np.empty((snrs.size, scenario.trials)))
    N = next(iter(ests.values()))[2].size
    for i, snr in enumerate(snrs):
        W = complex_normal(streams[i], (scenario.trials, N))
        for name, seq in scenario.sequences:
            cfg, est, s, az, nu = ests[name]
            Y = s[None, :] + scenario.sigma(seq, snr) * W
            for b0 in range(0, scenario.trials, scenario.batch):
                ph, nh = est.estimate(Y[b0:b0 + scenario.batch])
                az[i, b0:b0 + scenario.batch] = np.degrees(ph)
                nu[i, b0:b0 + scenario.batch] = nh
        if progress is not None:
            progress(i + 1, snrs.size)
    reports = {}
    for name, seq in scenario.sequences:
        _, _, _, az, nu = ests[name]
        e_az = wrap_degrees(az - true_az)
        e_nu = nu - p.nu
        mse_az = np.mean(e_az ** 2, axis=1)
        mse_nu = np.mean(e_nu ** 2, axis=1)
        with np.errstate(divide="ignore"):
            reports[name] = MonteCarloReport(
                name, snrs, np.sqrt(mse_az), np.log10(mse_az), np.sqrt(mse_nu), np.log10(mse_nu),
                crlbs[name][:, 0], crlbs[name][:, 1], az, nu, scenario.trials, scenario.seed, true_az,
                tuple(np.degrees(scenario.grid.phi_range)))
    return reports


def estimate_cdf(report: MonteCarloReport, snr_picks: Sequence[float], n_points: int = 361):
    """Empirical azimuth CDFs on a uniform grid over the search range.

    Returns ``{snr: (grid_deg, cdf)}``.
    """
    lo, hi = report.phi_range_deg
    x = np.linspace(lo, hi, n_points)
    out = {}
    for s in snr_picks:
        idx = np.flatnonzero(np.isclose(report.snr_db, s))
        if idx.size == 0:
            raise DomainError(f"SNR {s} dB not in report")
        v = np.sort(report.az_estimates[idx[0]])
        cdf = np.searchsorted(v, x, side="right") / v.size
        out[float(s)] = (x, cdf)
    return out


def cdf_to_csv(name: str, cdfs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sequence", "snr_db", "azimuth_deg", "cdf"])
    for s, (x, c) in cdfs.items():
        for xi, ci in zip(x, c):
            w.writerow([name, repr(s), repr(float(xi)), repr(float(ci))])
    return buf.getvalue()


def off_truth_concentrations(estimates_deg, truth_deg: float, search=(-180.0, 180.0),
                             bin_deg: float = 2.0, exclusion_deg: float = 5.0,
                             min_fraction: float = 0.01, excess: float = 3.0) -> List[float]:
    """Centres of estimate clusters away from the truth.

    A histogram bin qualifies when it holds at least ``min_fraction`` of the
    estimates and ``excess`` times what a uniform spread over ``search``
    would put there; adjacent qualifying bins form one cluster. Bins within
    ``exclusion_deg`` of the truth are ignored.
    """
    v = np.asarray(estimates_deg, dtype=float)
    edges = np.arange(search[0], search[1] + bin_deg, bin_deg)
    counts, _ = np.histogram(v, edges)
    centres = 0.5 * (edges[:-1] + edges[1:])
    uniform = v.size * bin_deg / (search[1] - search[0])
    hit = (counts >= max(min_fraction * v.size, excess * uniform)) & \
          (np.abs(wrap_degrees(centres - truth_deg)) > exclusion_deg)
    clusters, cur = [], []
    for c, h, n in zip(centres, hit, counts):
        if h:
            cur.append((c, n))
        elif cur:
            clusters.append(cur)
            cur = []
    if cur:
        clusters.append(cur)
    return [float(sum(c * n for c, n in cl) / sum(n for _, n in cl)) for cl in clusters]
