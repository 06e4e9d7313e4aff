"""Fourier step: pick a sequence whose timing spectrum has a small median.

Sequences whose timing vector is spectrally flat spread Doppler ambiguity
side lobes; a low median magnitude spectrum favours sequences that look
noise-like rather than ramp-like.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import List, Optional

import numpy as np

from .errors import CapacityError, DomainError
from .signal_model import SwitchingSequence, validate_permutation

BRUTE_FORCE_MAX = 9
TIE_RTOL = 1e-9


@dataclass(frozen=True)
class FourierStepConfig:
    """Parameters of the sampled Fourier step."""

    M_TR: int
    dt: float = 1.0
    confidence_level: float = 0.99
    margin: float = 0.05
    prior: float = 0.5
    rng_seed: Optional[int] = 0
    dedup: bool = True

    def __post_init__(self):
        if self.M_TR < 1:
            raise DomainError("M_TR must be positive")
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        for name, v in (("confidence_level", self.confidence_level), ("margin", self.margin),
                        ("prior", self.prior)):
            if not 0 < v < 1:
                raise DomainError(f"{name} must lie in (0, 1), got {v}")


def _costs_from_perms(perms: np.ndarray) -> np.ndarray:
    """Fourier cost for each row of a ``(n, M)`` array of 1-based perms."""
    perms = np.atleast_2d(perms)
    M = perms.shape[1]
    x = perms - 1 - (M - 1) / 2.0
    return np.median(np.abs(np.fft.fft(x, axis=1)), axis=1)


def fourier_cost(seq) -> float:
    """Median magnitude of the length-``M_TR`` DFT of ``eta / dt``.

    Accepts a :class:`SwitchingSequence` or a raw 1-based permutation.
    """
    perm = seq.as_array() if isinstance(seq, SwitchingSequence) else validate_permutation(seq)
    return float(_costs_from_perms(perm[None, :])[0])


def cochran_sample_size(cfg: FourierStepConfig) -> int:
    """Cochran sample size ``ceil(t^2 p (1-p) / d^2)``, capped at ``M_TR!``."""
    t = NormalDist().inv_cdf(1.0 - (1.0 - cfg.confidence_level) / 2.0)
    n0 = math.ceil(t * t * cfg.prior * (1.0 - cfg.prior) / cfg.margin ** 2)
    if cfg.M_TR <= 20:
        n0 = min(n0, math.factorial(cfg.M_TR))
    return int(n0)


def sample_sequences(M_TR: int, n0: int, rng, dt: float = 1.0) -> List[SwitchingSequence]:
    """Draw ``n0`` uniform permutations with replacement."""
    if n0 < 1:
        raise DomainError("n0 must be at least 1")
    rng = np.random.default_rng(rng)
    return [SwitchingSequence(tuple(int(v) for v in rng.permutation(M_TR) + 1), dt) for _ in range(n0)]


def _argmin_lex(perms: np.ndarray, costs: np.ndarray) -> int:
    """Index of the smallest cost; near-ties go to the lexicographically smallest perm."""
    best = costs.min()
    tol = TIE_RTOL * max(abs(best), 1.0)
    cand = np.flatnonzero(costs <= best + tol)
    if cand.size == 1:
        return int(cand[0])
    order = np.lexsort(perms[cand].T[::-1])
    return int(cand[order[0]])


def _all_perms(M: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(1, M + 1))), dtype=np.int64).reshape(-1, M)


def fourier_step(cfg: FourierStepConfig) -> SwitchingSequence:
    """Best Fourier cost among a Cochran-sized random sample of sequences.

    When the sample would cover the whole population (and ``dedup`` is on)
    every permutation is evaluated exactly once instead.
    """
    n0 = cochran_sample_size(cfg)
    M = cfg.M_TR
    if cfg.dedup and M <= BRUTE_FORCE_MAX and n0 >= math.factorial(M):
        perms = _all_perms(M)
    else:
        rng = np.random.default_rng(cfg.rng_seed)
        perms = np.stack([rng.permutation(M) for _ in range(n0)]) + 1
        if cfg.dedup:
            perms = np.unique(perms, axis=0)
    costs = _costs_from_perms(perms)
    i = _argmin_lex(perms, costs)
    return SwitchingSequence(tuple(int(v) for v in perms[i]), cfg.dt)


def brute_force_fourier_step(M_TR: int, dt: float = 1.0) -> SwitchingSequence:
    """Exact Fourier-cost minimiser over all ``M_TR!`` permutations."""
    if M_TR > BRUTE_FORCE_MAX:
        raise CapacityError(f"brute force limited to M_TR <= {BRUTE_FORCE_MAX}, got {M_TR}")
    if M_TR < 1:
        raise DomainError("M_TR must be positive")
    perms = _all_perms(M_TR)
    costs = _costs_from_perms(perms)
    i = _argmin_lex(perms, costs)
    return SwitchingSequence(tuple(int(v) for v in perms[i]), dt)


def exhaustive_costs(M_TR: int):
    """All permutations (lexicographic order) with their Fourier costs."""
    if M_TR > BRUTE_FORCE_MAX:
        raise CapacityError(f"enumeration limited to M_TR <= {BRUTE_FORCE_MAX}")
    perms = _all_perms(M_TR)
    return perms, _costs_from_perms(perms)
