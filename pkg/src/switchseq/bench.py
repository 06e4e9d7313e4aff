"""Runtime measurements for the complexity claims."""

from __future__ import annotations

import time
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from .ambiguity import StructuralParams, ambiguity_polarimetric_general, ambiguity_polarimetric_xpr
from .array_model import ArrayModel
from .fourier import fourier_cost
from .signal_model import SoundingConfig, SwitchingSequence


def best_time(fn: Callable[[], object], repeats: int = 5, min_time: float = 0.02) -> float:
    """Smallest per-call time over ``repeats`` batches of at least ``min_time``."""
    fn()
    n = 1
    while True:
        t = time.perf_counter()
        for _ in range(n):
            fn()
        el = time.perf_counter() - t
        if el >= min_time:
            break
        n *= 2
    best = el / n
    for _ in range(repeats - 1):
        t = time.perf_counter()
        for _ in range(n):
            fn()
        best = min(best, (time.perf_counter() - t) / n)
    return best


def loglog_slope(sizes: Sequence[float], times: Sequence[float]) -> float:
    """Least-squares slope of ``log t`` against ``log n``."""
    return float(np.polyfit(np.log(np.asarray(sizes, float)), np.log(np.asarray(times, float)), 1)[0])


def dual_pol_config(M_T: int, seed: int = 0) -> SoundingConfig:
    """Perfectly single-polarized elements (alternating H/V) on both sides.

    The signal length is ``2 * M_T``.
    """
    h = np.arange(M_T) % 2 == 0
    tx = ArrayModel.ula(M_T, 0.5, {"H": h.astype(float), "V": (~h).astype(float)})
    rx = ArrayModel.ula(2, 0.5, {"H": [1.0, 0.0], "V": [0.0, 1.0]})
    rng = np.random.default_rng(seed)
    seq = SwitchingSequence(tuple(int(v) for v in rng.permutation(2 * M_T) + 1))
    return SoundingConfig(tx, rx, seq)


_MU = StructuralParams(phi_T=1.0, phi_R=0.3, nu=0.01)
_MU2 = StructuralParams(phi_T=1.2, phi_R=0.5, nu=-0.02)


def time_general(sizes: Sequence[int], repeats: int = 5) -> List[float]:
    """Per-call time of the subspace ambiguity at signal lengths ``sizes``."""
    out = []
    for n in sizes:
        cfg = dual_pol_config(max(n // 2, 1))
        out.append(best_time(lambda: ambiguity_polarimetric_general(_MU, _MU2, cfg), repeats))
    return out


def time_xpr(sizes: Sequence[int], repeats: int = 5) -> List[float]:
    out = []
    for n in sizes:
        cfg = dual_pol_config(max(n // 2, 1))
        out.append(best_time(lambda: ambiguity_polarimetric_xpr(_MU, _MU2, cfg, check=False), repeats))
    return out


def time_fourier(sizes: Sequence[int], repeats: int = 5, seed: int = 0) -> List[float]:
    rng = np.random.default_rng(seed)
    out = []
    for n in sizes:
        seq = SwitchingSequence(tuple(int(v) for v in rng.permutation(n) + 1))
        out.append(best_time(lambda: fourier_cost(seq), repeats))
    return out
