"""Fisher information with its CRLB, plus the Fisher-step cost functions.

Single-path model ``s = gamma * u`` with
``u_k = c_k(angles) * exp(j 2 pi nu tau_k)`` where ``c`` is the spatial part
(TX response times RX response, tiled over snapshots and frequency
points) and ``tau`` the absolute activation time of entry ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .array_model import ArrayModel, responses
from .errors import DegenerateAmplitudeError, DimensionError, DomainError, SingularFIMError
from .signal_model import PathParameters, SoundingConfig

PARAMS = ("theta_T", "phi_T", "theta_R", "phi_R", "nu", "r", "psi")
ANGLE_PARAMS = ("theta_T", "phi_T", "theta_R", "phi_R")
COND_CAP = 1e12


@dataclass(frozen=True, eq=False)
class FisherMatrix:
    """Real symmetric information matrix with labelled rows and columns."""

    labels: Tuple[str, ...]
    values: np.ndarray

    def index(self, name: str) -> int:
        try:
            return self.labels.index(name)
        except ValueError:
            raise DomainError(f"unknown parameter {name!r}") from None

    def __getitem__(self, key):
        a, b = key
        return float(self.values[self.index(a), self.index(b)])

    def sub(self, params: Sequence[str]) -> "FisherMatrix":
        idx = [self.index(p) for p in params]
        return FisherMatrix(tuple(params), self.values[np.ix_(idx, idx)])

    def diagonal(self) -> np.ndarray:
        return np.diag(self.values).copy()


def _side_responses(cfg: SoundingConfig, path: PathParameters, pol_pair):
    pT, pR = cfg.pol_pair if pol_pair is None else pol_pair
    bT, dT_phi, dT_theta = (x[0] for x in responses(cfg.tx, pT, path.phi_T, path.theta_T, derivatives=True))
    bR, dR_phi, dR_theta = (x[0] for x in responses(cfg.rx, pR, path.phi_R, path.theta_R, derivatives=True))
    return bT, dT_phi, dT_theta, bR, dR_phi, dR_theta


def _spread(cfg: SoundingConfig, xT, xR) -> np.ndarray:
    """``1_{M_t} (x) xT (x) xR (x) b_f`` as a flat vector."""
    kr = np.kron(xT, xR)
    return np.kron(np.tile(kr, cfg.M_t), cfg.b_f)


def jacobian(path: PathParameters, cfg: SoundingConfig, pol_pair=None) -> np.ndarray:
    """Analytic derivative of ``s = gamma * u`` w.r.t. every entry of :data:`PARAMS`.

    Returns an ``(N, 7)`` complex matrix, columns ordered as :data:`PARAMS`.
    """
    if path.r == 0:
        raise DegenerateAmplitudeError("Jacobian w.r.t. r and psi needs r > 0")
    bT, dT_phi, dT_theta, bR, dR_phi, dR_theta = _side_responses(cfg, path, pol_pair)
    tau = cfg.timing_vector()
    phase = path.gamma * np.exp(2j * np.pi * path.nu * tau)
    s = _spread(cfg, bT, bR) * phase
    cols = {
        "theta_T": _spread(cfg, dT_theta, bR) * phase,
        "phi_T": _spread(cfg, dT_phi, bR) * phase,
        "theta_R": _spread(cfg, bT, dR_theta) * phase,
        "phi_R": _spread(cfg, bT, dR_phi) * phase,
        "nu": 2j * np.pi * tau * s,
        "r": s / path.r,
        "psi": 1j * s,
    }
    return np.stack([cols[p] for p in PARAMS], axis=1)


def fim_from_jacobian(D: np.ndarray, sigma: float, labels=PARAMS) -> FisherMatrix:
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    F = 2.0 / sigma ** 2 * np.real(D.conj().T @ D)
    return FisherMatrix(tuple(labels), 0.5 * (F + F.T))


def fim(path: PathParameters, cfg: SoundingConfig, sigma: float, pol_pair=None) -> FisherMatrix:
    """Slepian-Bangs information ``(2/sigma^2) Re(D^H D)``."""
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    return fim_from_jacobian(jacobian(path, cfg, pol_pair), sigma)


def fim_doppler_diagonal(path: PathParameters, cfg: SoundingConfig, sigma: float, pol_pair=None) -> float:
    """Closed-form ``[F]_nu,nu = 8 pi^2 r^2 sum |u_k|^2 tau_k^2 / sigma^2``.

    For unit-modulus responses, one snapshot and one frequency point this
    is ``8 (r pi ||eta|| / sigma)^2``.
    """
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    pT, pR = cfg.pol_pair if pol_pair is None else pol_pair
    bT = responses(cfg.tx, pT, path.phi_T, path.theta_T)[0]
    bR = responses(cfg.rx, pR, path.phi_R, path.theta_R)[0]
    power = np.abs(_spread(cfg, bT, bR)) ** 2
    tau = cfg.timing_vector()
    # sorted summation: a permuted sequence yields the same bits
    return float(8 * np.pi ** 2 * path.r ** 2 * np.sum(np.sort(power * tau ** 2)) / sigma ** 2)


def fim_cross_doppler_angle(path: PathParameters, cfg: SoundingConfig, sigma: float,
                            which: str, pol_pair=None) -> float:
    """Closed-form Doppler/angle cross entry of the FIM.

    With ``w`` the per-element activation time of one side, weighted by the
    other side's element powers and summed over it,
    ``[F]_nu,x = (4 pi r^2 / sigma^2) M_t ||b_f||^2 Im(sum_i conj(b_i) db_i w_i)``.
    Snapshot offsets cancel because they are centered.
    """
    if which not in ANGLE_PARAMS:
        raise DomainError(f"which must be one of {ANGLE_PARAMS}")
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    bT, dT_phi, dT_theta, bR, dR_phi, dR_theta = _side_responses(cfg, path, pol_pair)
    W = cfg.sequence.eta.reshape(cfg.tx.M, cfg.rx.M)
    if which.endswith("_T"):
        b, db = bT, (dT_phi if which == "phi_T" else dT_theta)
        w = W @ np.abs(bR) ** 2
    else:
        b, db = bR, (dR_phi if which == "phi_R" else dR_theta)
        w = np.abs(bT) ** 2 @ W
    scale = 4 * np.pi * path.r ** 2 / sigma ** 2 * cfg.M_t * np.sum(np.abs(cfg.b_f) ** 2)
    return float(scale * np.imag(np.sum(np.conj(b) * db * w)))


def crlb_from_fim(F, params: Optional[Sequence[str]] = None) -> np.ndarray:
    """Diagonal of the inverse information matrix (optionally of a sub-block).

    The matrix is first scaled to unit diagonal so that the condition test
    does not depend on parameter units, then inverted through a symmetric
    eigendecomposition. Condition numbers above ``1e12`` raise
    :class:`SingularFIMError`.
    """
    if isinstance(F, FisherMatrix):
        if params is not None:
            F = F.sub(params)
        A = F.values
    else:
        A = np.asarray(F, dtype=float)
    d = np.diag(A).copy()
    if d.size == 0 or np.any(d <= 0):
        raise SingularFIMError("information matrix has a non-positive diagonal entry")
    s = 1.0 / np.sqrt(d)
    C = A * s[:, None] * s[None, :]
    np.fill_diagonal(C, 1.0)
    w, V = np.linalg.eigh(0.5 * (C + C.T))
    if w[0] <= w[-1] / COND_CAP:
        raise SingularFIMError(
            f"information matrix singular or ill-conditioned (scaled eigenvalues {w[0]:.3g}..{w[-1]:.3g})"
        )
    return np.einsum("ij,j,ij->i", V, 1.0 / w, V) / d


def crlb(path: PathParameters, cfg: SoundingConfig, sigma: float,
         params: Optional[Sequence[str]] = None, pol_pair=None) -> np.ndarray:
    """Per-parameter CRLB, ordered as ``params`` (default :data:`PARAMS`)."""
    return crlb_from_fim(fim(path, cfg, sigma, pol_pair), list(params or PARAMS))


# -- Fisher-step costs -------------------------------------------------------

@dataclass(frozen=True)
class FisherCostConfig:
    """Angle grids and active terms for the Fisher-step cost.

    ``active`` names the cross entries ``[F]_nu,x`` that enter the cost
    (``x`` in ``phi_T, theta_T, phi_R, theta_R``). ``None`` selects every
    entry the arrays can resolve on the chosen ``side``. Elevation grids
    are ignored for ULAs, which carry no elevation information.
    """

    n_phi: int = 181
    n_theta: int = 91
    phi_range: Tuple[float, float] = (-np.pi, np.pi)
    theta_range: Tuple[float, float] = (-np.pi / 2, np.pi / 2)
    side: str = "joint"
    active: Optional[Tuple[str, ...]] = None
    refine: bool = False

    def __post_init__(self):
        if self.side not in ("TX", "RX", "joint"):
            raise DomainError(f"side must be TX, RX or joint, got {self.side!r}")
        if self.active is not None:
            bad = set(self.active) - set(ANGLE_PARAMS)
            if bad:
                raise DomainError(f"unknown cost terms {sorted(bad)}")
        if self.n_phi < 2:
            raise DomainError("azimuth grid needs at least 2 points")

    def terms(self, tx: ArrayModel, rx: Optional[ArrayModel]) -> Tuple[str, ...]:
        sides = {"TX": ("T",), "RX": ("R",), "joint": ("T", "R")}[self.side]
        if self.active is not None:
            out = tuple(t for t in self.active if t[-1] in sides)
        else:
            out = []
            for s in sides:
                arr = tx if s == "T" else rx
                if arr is None:
                    continue
                out.append(f"phi_{s}")
                if arr.has_elevation():
                    out.append(f"theta_{s}")
            out = tuple(out)
        for t in out:
            arr = tx if t.endswith("_T") else rx
            if t.startswith("theta") and arr is not None and arr.has_elevation() and self.n_theta < 2:
                raise DomainError("elevation grid needs at least 2 points")
        return out


def _angle_grid(arr: ArrayModel, cfg: FisherCostConfig):
    phi = np.linspace(*cfg.phi_range, cfg.n_phi)
    if arr.has_elevation():
        theta = np.linspace(*cfg.theta_range, cfg.n_theta)
    else:
        theta = np.zeros(1)
    P, T = np.meshgrid(phi, theta, indexing="ij")
    return P.ravel(), T.ravel()


def _cross_table(arr: ArrayModel, pol: str, phi, theta, which: str) -> np.ndarray:
    """Rows ``Im(conj(b) * db)`` for each angle; ``which`` is 'phi' or 'theta'."""
    b, d_phi, d_theta = responses(arr, pol, phi, theta, derivatives=True)
    return np.imag(np.conj(b) * (d_phi if which == "phi" else d_theta))


class FisherCost:
    """Fisher-step cost ``J(eta) = sum_i max_angles |[F]_nu,x_i|`` at ``r = sigma = 1``.

    The timing vector of pair ``(i, j)`` is reshaped to an ``M_T x M_R``
    matrix and summed over the other side with unit weights, so the cost is
    independent of the other side's direction. Tables of
    ``Im(conj(b) db)`` over the angle grid are built once, after which a
    cost evaluation is a matrix-vector product per active term.
    """

    def __init__(self, tx: ArrayModel, rx: Optional[ArrayModel] = None,
                 cfg: FisherCostConfig = FisherCostConfig(), pol_pair=("V", "V")):
        self.tx = tx
        self.rx = rx if rx is not None else ArrayModel.single_isotropic((pol_pair[1],))
        self.cfg = cfg
        self.pol_pair = tuple(pol_pair)
        self.terms = cfg.terms(tx, rx if rx is not None else self.rx)
        self._tables: Dict[str, Tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        for t in self.terms:
            which, side = t.split("_")
            arr = self.tx if side == "T" else self.rx
            pol = self.pol_pair[0] if side == "T" else self.pol_pair[1]
            phi, theta = _angle_grid(arr, cfg)
            self._tables[t] = (_cross_table(arr, pol, phi, theta, which), phi, theta)

    @property
    def M_T(self) -> int:
        return self.tx.M

    @property
    def M_R(self) -> int:
        return self.rx.M

    def side_weights(self, eta) -> Tuple[np.ndarray, np.ndarray]:
        eta = np.asarray(eta, dtype=float)
        if eta.size != self.M_T * self.M_R:
            raise DimensionError(f"timing vector has {eta.size} entries, expected {self.M_T * self.M_R}")
        W = eta.reshape(self.M_T, self.M_R)
        return W.sum(axis=1), W.sum(axis=0)

    def terms_values(self, eta) -> Dict[str, float]:
        wT, wR = self.side_weights(eta)
        out = {}
        for t, (Q, phi, theta) in self._tables.items():
            w = wT if t.endswith("_T") else wR
            v = np.abs(Q @ w)
            k = int(np.argmax(v))
            best = v[k]
            if self.cfg.refine:
                best = max(best, self._refine(t, w, phi[k], theta[k]))
            out[t] = float(4 * np.pi * best)
        return out

    def __call__(self, eta) -> float:
        return float(sum(self.terms_values(eta).values()))

    def _refine(self, term: str, w, phi0: float, theta0: float) -> float:
        which, side = term.split("_")
        arr = self.tx if side == "T" else self.rx
        pol = self.pol_pair[0] if side == "T" else self.pol_pair[1]
        dphi = (self.cfg.phi_range[1] - self.cfg.phi_range[0]) / (self.cfg.n_phi - 1)
        dtheta = (self.cfg.theta_range[1] - self.cfg.theta_range[0]) / max(self.cfg.n_theta - 1, 1)

        def val(p, t):
            return float(abs(_cross_table(arr, pol, p, t, which)[0] @ w))

        p, t = phi0, theta0
        for _ in range(2):
            r = minimize_scalar(lambda x: -val(x, t), bounds=(p - dphi, p + dphi), method="bounded")
            p = r.x
            if arr.has_elevation():
                r = minimize_scalar(lambda x: -val(p, x), bounds=(t - dtheta, t + dtheta), method="bounded")
                t = r.x
        return val(p, t)


def fisher_cost(eta, tx: ArrayModel, rx: Optional[ArrayModel] = None,
                cfg: FisherCostConfig = FisherCostConfig(), pol_pair=("V", "V")) -> float:
    """One-shot :class:`FisherCost` evaluation; build the class when looping."""
    return FisherCost(tx, rx, cfg, pol_pair)(eta)


def fisher_cost_isotropic_ula(eta, m) -> float:
    """``|eta . m|``, the isotropic-ULA shortcut of the TX azimuth term."""
    eta = np.asarray(eta, dtype=float)
    m = np.asarray(m, dtype=float)
    if eta.shape != m.shape:
        raise DimensionError(f"eta has shape {eta.shape}, m has {m.shape}")
    return float(abs(eta @ m))


def fisher_cost_split(eta_side, arr: ArrayModel, side: str = "TX",
                      cfg: FisherCostConfig = FisherCostConfig(), pol: str = "V") -> float:
    """Per-side cost (azimuth plus elevation term) for a Kronecker design.

    ``eta_side`` is that side's own timing vector, of length ``arr.M``.
    """
    if side not in ("TX", "RX"):
        raise DomainError("side must be TX or RX")
    side_cfg = FisherCostConfig(cfg.n_phi, cfg.n_theta, cfg.phi_range, cfg.theta_range,
                                "TX", None if cfg.active is None else
                                tuple(t[:-1] + "T" for t in cfg.active if t.endswith("_" + side[0])),
                                cfg.refine)
    return FisherCost(arr, None, side_cfg, (pol, pol))(eta_side)


def _composite_model(models: Sequence[ArrayModel], pol: str, phi, theta):
    """Per-angle composite response and derivatives from the strongest delay bin."""
    resp = [responses(m, pol, phi, theta, derivatives=True) for m in models]
    b = np.stack([r[0] for r in resp])      # (M_f, K, M)
    dp = np.stack([r[1] for r in resp])
    dt = np.stack([r[2] for r in resp])
    hb = np.fft.ifft(b, axis=0)
    k = np.argmax(np.abs(hb), axis=0)        # first maximum = smallest delay index
    pick = lambda x: np.take_along_axis(np.fft.ifft(x, axis=0), k[None], axis=0)[0]
    return pick(b), pick(dp), pick(dt)


def wideband_fisher_cost(eta, tx_models: Sequence[ArrayModel], rx_models: Optional[Sequence[ArrayModel]] = None,
                         cfg: FisherCostConfig = FisherCostConfig(), mode: str = "sum",
                         pol_pair=("V", "V")) -> float:
    """Fisher cost over ``M_f`` frequency points.

    ``mode='sum'`` adds the narrowband cost of every frequency point.
    ``mode='composite'`` inverse-transforms each element's frequency
    response at every grid angle, keeps the strongest delay bin as a
    composite pattern and evaluates a single narrowband-style cost on it.
    """
    if len(tx_models) == 0:
        raise DomainError("empty pattern set")
    if rx_models is None:
        rx_models = [None] * len(tx_models)
    if len(rx_models) != len(tx_models):
        raise DimensionError("TX and RX pattern sets differ in length")
    if mode == "sum":
        return float(sum(FisherCost(t, r, cfg, pol_pair)(eta) for t, r in zip(tx_models, rx_models)))
    if mode != "composite":
        raise DomainError(f"unknown wideband mode {mode!r}")

    ref = FisherCost(tx_models[0], rx_models[0], cfg, pol_pair)
    wT, wR = ref.side_weights(eta)
    total = 0.0
    for t in ref.terms:
        which, side = t.split("_")
        models = tx_models if side == "T" else [r if r is not None else ref.rx for r in rx_models]
        pol = pol_pair[0] if side == "T" else pol_pair[1]
        phi, theta = _angle_grid(models[0], cfg)
        b, dp, dth = _composite_model(models, pol, phi, theta)
        Q = np.imag(np.conj(b) * (dp if which == "phi" else dth))
        w = wT if side == "T" else wR
        total += 4 * np.pi * float(np.max(np.abs(Q @ w)))
    return total
