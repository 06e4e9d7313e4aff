"""Simulated annealing over permutations and the end-to-end design pipelines."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .ambiguity import AmbiguityGrid, AmbiguityObjective
from .array_model import ArrayModel
from .errors import DomainError, InvalidPermutationError
from .fisher import FisherCost, FisherCostConfig, fisher_cost_isotropic_ula, wideband_fisher_cost
from .fourier import FourierStepConfig, fourier_step
from .signal_model import SoundingConfig, SwitchingSequence, eta_from_permutation, kron_sequence, kronecker_schedule

CostFn = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class AnnealConfig:
    """Annealing schedule. ``T0=None`` picks the temperature from 50 probe swaps."""

    T0: Optional[float] = None
    alpha: float = 0.995
    k_max: int = 5000
    rng_seed: int = 0
    return_final: bool = False
    probes: int = 50

    def __post_init__(self):
        if self.T0 is not None and not self.T0 > 0:
            raise DomainError("T0 must be positive")
        if not 0 < self.alpha < 1:
            raise DomainError("alpha must lie in (0, 1)")
        if self.k_max < 1:
            raise DomainError("k_max must be at least 1")


@dataclass
class DesignReport:
    """Outcome of one annealing run (or of a design pipeline around it)."""

    initial: SwitchingSequence
    initial_cost: float
    final: SwitchingSequence
    final_cost: float
    best: SwitchingSequence
    best_cost: float
    trace: np.ndarray
    accepted: int
    wall_time: float
    T0: float = float("nan")
    return_final: bool = False
    stages: Dict[str, float] = field(default_factory=dict)
    echo: Dict[str, object] = field(default_factory=dict)

    @property
    def sequence(self) -> SwitchingSequence:
        return self.final if self.return_final else self.best

    @property
    def cost(self) -> float:
        return self.final_cost if self.return_final else self.best_cost

    def to_text(self) -> str:
        """Structured text form. Wall-clock times are left out so the
        output is reproducible byte for byte."""
        lines = ["[config]"]
        lines += [f"{k} = {v}" for k, v in sorted(self.echo.items())]
        lines += ["", "[result]",
                  f"M_TR = {self.best.M}",
                  f"dt = {self.best.dt!r}",
                  f"T0 = {self.T0!r}",
                  f"initial_cost = {self.initial_cost!r}",
                  f"final_cost = {self.final_cost!r}",
                  f"best_cost = {self.best_cost!r}",
                  f"accepted = {self.accepted}",
                  "initial = " + " ".join(map(str, self.initial.perm)),
                  "final = " + " ".join(map(str, self.final.perm)),
                  "best = " + " ".join(map(str, self.best.perm)),
                  "", "[trace]", "iteration,cost,best_cost"]
        best = np.minimum.accumulate(self.trace) if self.trace.size else self.trace
        best = np.minimum(best, self.initial_cost)
        lines += [f"{k + 1},{c!r},{b!r}" for k, (c, b) in enumerate(zip(self.trace.tolist(), best.tolist()))]
        return "\n".join(lines) + "\n"


def neighbor(seq: SwitchingSequence, rng) -> SwitchingSequence:
    """Swap two distinct, uniformly chosen positions."""
    if seq.M < 2:
        raise DomainError("need at least two positions to swap")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    i, j = _swap_pair(rng, seq.M)
    p = list(seq.perm)
    p[i], p[j] = p[j], p[i]
    return SwitchingSequence(tuple(p), seq.dt)


def _eta(perm: np.ndarray, dt: float) -> np.ndarray:
    return dt * (perm - 1 - (perm.size - 1) / 2.0)


def _swap_pair(rng: np.random.Generator, M: int) -> Tuple[int, int]:
    i = int(rng.integers(M))
    j = int(rng.integers(M - 1))
    return i, j + (j >= i)


def auto_temperature(perm: np.ndarray, dt: float, cost_fn: CostFn, rng, probes: int = 50) -> float:
    """Mean absolute cost change over random swaps from ``perm``; 1 if flat."""
    J = cost_fn(_eta(perm, dt))
    deltas = []
    for _ in range(probes):
        i, j = _swap_pair(rng, perm.size)
        q = perm.copy()
        q[i], q[j] = q[j], q[i]
        deltas.append(abs(cost_fn(_eta(q, dt)) - J))
    T0 = float(np.mean(deltas)) if deltas else 0.0
    return T0 if T0 > 0 else 1.0


def anneal(seq0: SwitchingSequence, cost_fn: CostFn, cfg: AnnealConfig = AnnealConfig()) -> DesignReport:
    """Metropolis annealing over swap moves, tracking the best sequence seen.

    An uphill move from ``J`` to ``J'`` is accepted when
    ``exp((J - J') / T) > U`` with ``U ~ U(0, 1)``; downhill and equal moves
    are always accepted. ``T`` is multiplied by ``alpha`` every iteration.
    """
    if seq0.M < 2:
        raise DomainError("annealing needs at least two positions")
    start = time.perf_counter()
    rng = np.random.default_rng(cfg.rng_seed)
    dt = seq0.dt
    M = seq0.M
    perm = seq0.as_array().copy()
    J = float(cost_fn(_eta(perm, dt)))
    J_init = J
    T = cfg.T0 if cfg.T0 is not None else auto_temperature(perm, dt, cost_fn, rng, cfg.probes)
    T0 = T
    best, J_best = perm.copy(), J
    trace = np.empty(cfg.k_max)
    accepted = 0
    ref = np.arange(1, M + 1)
    for k in range(cfg.k_max):
        i, j = _swap_pair(rng, M)
        cand = perm.copy()
        cand[i], cand[j] = cand[j], cand[i]
        if not np.array_equal(np.sort(cand), ref):
            raise InvalidPermutationError(f"iteration {k}: move produced an invalid permutation")
        Jc = float(cost_fn(_eta(cand, dt)))
        U = rng.random()
        if Jc <= J:
            accept = True
        elif T > 0:
            accept = np.exp((J - Jc) / T) > U
        else:
            accept = False
        if accept:
            perm, J = cand, Jc
            accepted += 1
            if J < J_best:
                best, J_best = perm.copy(), J
        T *= cfg.alpha
        trace[k] = J
    wall = time.perf_counter() - start
    mk = lambda p: SwitchingSequence(tuple(int(v) for v in p), dt)
    return DesignReport(seq0, J_init, mk(perm), J, mk(best), J_best, trace, accepted, wall,
                        T0=T0, return_final=cfg.return_final)


def anneal_restarts(seq0: SwitchingSequence, cost_fn: CostFn, cfg: AnnealConfig,
                    seeds: Sequence[int]) -> DesignReport:
    """Independent chains; the best-seen cost wins, earlier seeds on ties."""
    reports = [anneal(seq0, cost_fn, AnnealConfig(cfg.T0, cfg.alpha, cfg.k_max, s, cfg.return_final,
                                                  cfg.probes)) for s in seeds]
    return min(reports, key=lambda r: r.cost)


# -- pipelines ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DesignConfig:
    """Everything a design pipeline needs.

    ``cost`` picks the Fisher-step cost: ``'auto'`` uses the isotropic
    shortcut for an isotropic TX ULA with one RX element and the tabulated
    Fisher cost otherwise; ``'wideband'`` needs ``wideband_tx`` (one
    :class:`ArrayModel` per frequency point).
    """

    tx: ArrayModel
    rx: Optional[ArrayModel] = None
    dt: float = 1.0
    seed: int = 0
    confidence_level: float = 0.99
    margin: float = 0.05
    prior: float = 0.5
    anneal: AnnealConfig = AnnealConfig()
    fisher: FisherCostConfig = FisherCostConfig()
    cost: str = "auto"
    grid: Optional[AmbiguityGrid] = None
    wideband_tx: Optional[Tuple[ArrayModel, ...]] = None
    wideband_rx: Optional[Tuple[ArrayModel, ...]] = None
    wideband_mode: str = "sum"
    pol_pair: Tuple[str, str] = ("V", "V")

    @property
    def rx_model(self) -> ArrayModel:
        return self.rx if self.rx is not None else ArrayModel.single_isotropic((self.pol_pair[1],))

    @property
    def M_TR(self) -> int:
        return self.tx.M * self.rx_model.M

    def anneal_cfg(self) -> AnnealConfig:
        a = self.anneal
        return AnnealConfig(a.T0, a.alpha, a.k_max, self.seed, a.return_final, a.probes)

    def echo(self) -> Dict[str, object]:
        return {"M_T": self.tx.M, "M_R": self.rx_model.M, "dt": repr(self.dt), "seed": self.seed,
                "confidence_level": self.confidence_level, "margin": self.margin, "cost": self.cost,
                "T0": self.anneal.T0, "alpha": self.anneal.alpha, "k_max": self.anneal.k_max}


def _is_isotropic_ula(arr: ArrayModel, pol: str) -> bool:
    if arr.kind != "ula" or pol not in arr.gains:
        return False
    g = np.abs(arr.gains[pol])
    return bool(np.allclose(g, g[0]) and g[0] > 0)


def fisher_step_cost(cfg: DesignConfig) -> CostFn:
    """The Fisher-step cost function selected by ``cfg.cost``."""
    rx = cfg.rx_model
    kind = cfg.cost
    if kind == "auto":
        kind = "isotropic" if (rx.M == 1 and _is_isotropic_ula(cfg.tx, cfg.pol_pair[0])) else "fisher"
    if kind == "isotropic":
        if rx.M != 1 or cfg.tx.kind != "ula":
            raise DomainError("isotropic shortcut needs a TX ULA and a single RX element")
        m = cfg.tx.m
        return lambda eta: fisher_cost_isotropic_ula(eta, m)
    if kind == "fisher":
        return FisherCost(cfg.tx, rx, cfg.fisher, cfg.pol_pair)
    if kind == "wideband":
        if not cfg.wideband_tx:
            raise DomainError("wideband cost needs per-frequency TX patterns")
        tx_m, rx_m, mode = cfg.wideband_tx, cfg.wideband_rx, cfg.wideband_mode
        if mode == "sum":
            costs = [FisherCost(t, r, cfg.fisher, cfg.pol_pair)
                     for t, r in zip(tx_m, rx_m or [None] * len(tx_m))]
            return lambda eta: float(sum(c(eta) for c in costs))
        return lambda eta: wideband_fisher_cost(eta, tx_m, rx_m, cfg.fisher, mode, cfg.pol_pair)
    raise DomainError(f"unknown cost {cfg.cost!r}")


def design_ff(cfg: DesignConfig) -> DesignReport:
    """Fourier step for the seed sequence, then annealing on the Fisher cost."""
    t0 = time.perf_counter()
    seq0 = fourier_step(FourierStepConfig(cfg.M_TR, cfg.dt, cfg.confidence_level, cfg.margin,
                                          cfg.prior, cfg.seed))
    t1 = time.perf_counter()
    cost = fisher_step_cost(cfg)
    t2 = time.perf_counter()
    if cfg.M_TR < 2:
        J = cost(seq0.eta)
        rep = DesignReport(seq0, J, seq0, J, seq0, J, np.empty(0), 0, 0.0)
    else:
        rep = anneal(seq0, cost, cfg.anneal_cfg())
    t3 = time.perf_counter()
    rep.stages = {"fourier": t1 - t0, "setup": t2 - t1, "fisher": t3 - t2}
    rep.wall_time = t3 - t0
    rep.echo = dict(cfg.echo(), method="ff")
    return rep


def design_ambiguity_baseline(cfg: DesignConfig) -> DesignReport:
    """Anneal the integrated ambiguity objective from a random sequence."""
    if cfg.grid is None:
        raise DomainError("ambiguity design needs an integration grid")
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    seq0 = SwitchingSequence(tuple(int(v) for v in rng.permutation(cfg.M_TR) + 1), cfg.dt)
    sounding = SoundingConfig(cfg.tx, cfg.rx_model, seq0, pol_pair=cfg.pol_pair)
    objective = AmbiguityObjective(sounding, cfg.grid)
    t1 = time.perf_counter()
    rep = anneal(seq0, objective, cfg.anneal_cfg())
    t2 = time.perf_counter()
    rep.stages = {"setup": t1 - t0, "anneal": t2 - t1}
    rep.wall_time = t2 - t0
    rep.echo = dict(cfg.echo(), method="ambiguity", objective_mode=objective.mode,
                    power=cfg.grid.power)
    return rep


@dataclass
class KroneckerDesign:
    """Per-side designs and the joint TX-outer schedule built from them.

    ``joint_kron`` is the literal Kronecker product of the two timing
    vectors, kept for reference.
    """

    tx_report: DesignReport
    rx_report: DesignReport
    joint: SwitchingSequence
    joint_kron: np.ndarray
    wall_time: float


def _side_design(arr: ArrayModel, cfg: DesignConfig, seed: int, pol: str) -> DesignReport:
    side_cfg = DesignConfig(arr, None, cfg.dt, seed, cfg.confidence_level, cfg.margin, cfg.prior,
                            cfg.anneal, FisherCostConfig(cfg.fisher.n_phi, cfg.fisher.n_theta,
                                                         cfg.fisher.phi_range, cfg.fisher.theta_range,
                                                         "TX", None, cfg.fisher.refine),
                            cost="fisher" if cfg.cost != "isotropic" else "isotropic",
                            pol_pair=(pol, pol))
    if cfg.cost == "auto" and _is_isotropic_ula(arr, pol):
        side_cfg = DesignConfig(**{**side_cfg.__dict__, "cost": "isotropic"})
    return design_ff(side_cfg)


def design_kronecker_split(cfg: DesignConfig) -> KroneckerDesign:
    """Independent FF designs for the TX and RX switches."""
    t0 = time.perf_counter()
    rx = cfg.rx_model
    tx_rep = _side_design(cfg.tx, cfg, cfg.seed, cfg.pol_pair[0])
    rx_rep = _side_design(rx, cfg, cfg.seed + 1, cfg.pol_pair[1])
    joint = kronecker_schedule(tx_rep.sequence, rx_rep.sequence)
    lit = kron_sequence(tx_rep.sequence.eta, rx_rep.sequence.eta)
    return KroneckerDesign(tx_rep, rx_rep, joint, lit, time.perf_counter() - t0)
