"""Random instances shared by several test modules."""

import numpy as np

from switchseq.array_model import EADF, ArrayModel, synthetic_patch_ula
from switchseq.signal_model import PathParameters, SoundingConfig, SwitchingSequence, basis_vector


def random_eadf(rng, M=3, a_phi=5, a_theta=3, pol="V"):
    shape = (M, a_phi, a_theta)
    return EADF.from_coefficients(rng.standard_normal(shape) + 1j * rng.standard_normal(shape), pol)


def random_array(rng, kind=None, max_M=4):
    kind = kind or rng.choice(["ula", "eadf"])
    M = int(rng.integers(1, max_M + 1))
    if kind == "ula":
        return ArrayModel.ula(M, float(rng.uniform(0.2, 1.0)))
    if kind == "patch":
        return synthetic_patch_ula(M)
    return ArrayModel.measured(V=random_eadf(rng, M, 5, 3))


def random_perm(rng, M):
    return tuple(int(v) for v in rng.permutation(M) + 1)


def random_config(rng, kind=None, wide=True):
    tx, rx = random_array(rng, kind), random_array(rng, kind, max_M=3)
    dt = float(rng.uniform(0.005, 0.02))
    seq = SwitchingSequence(random_perm(rng, tx.M * rx.M), dt)
    if wide:
        M_t = int(rng.integers(1, 4))
        Mf = int(rng.integers(1, 4))
        b_f = rng.standard_normal(Mf) + 1j * rng.standard_normal(Mf)
    else:
        M_t, b_f = 1, None
    return SoundingConfig(tx, rx, seq, M_t=M_t, b_f=b_f)


def random_path(rng, nu_scale=5.0):
    return PathParameters(theta_T=rng.uniform(-1.2, 1.2), phi_T=rng.uniform(-np.pi, np.pi),
                          theta_R=rng.uniform(-1.2, 1.2), phi_R=rng.uniform(-np.pi, np.pi),
                          nu=rng.uniform(-nu_scale, nu_scale), r=rng.uniform(0.5, 2.0),
                          psi=rng.uniform(-np.pi, np.pi))


def signal(path, cfg):
    return path.gamma * basis_vector(path, cfg)


def fd_jacobian(path, cfg, params, h=1e-6):
    """Central differences of the noiseless signal, one column per parameter."""
    cols = []
    for p in params:
        x = getattr(path, p)
        step = h * max(1.0, abs(x))
        hi = signal(path.replace(**{p: x + step}), cfg)
        lo = signal(path.replace(**{p: x - step}), cfg)
        cols.append((hi - lo) / (2 * step))
    return np.stack(cols, axis=1)
