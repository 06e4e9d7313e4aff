import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _helpers import fd_jacobian, random_config, random_path
from switchseq.array_model import ArrayModel, synthetic_patch_ula
from switchseq.errors import DegenerateAmplitudeError, DomainError, SingularFIMError
from switchseq.fisher import (ANGLE_PARAMS, PARAMS, FisherCost, FisherCostConfig, FisherMatrix, crlb,
                              crlb_from_fim, fim, fim_cross_doppler_angle, fim_doppler_diagonal,
                              fim_from_jacobian, fisher_cost, fisher_cost_isotropic_ula, fisher_cost_split,
                              jacobian, wideband_fisher_cost)
from switchseq.signal_model import PathParameters, SoundingConfig, SwitchingSequence, kronecker_schedule

ALL4 = [SwitchingSequence(p) for p in itertools.permutations(range(1, 5))]


def argmin_set(values):
    values = np.asarray(values)
    return set(np.flatnonzero(values <= values.min() * (1 + 1e-9) + 1e-12))


def ula_cfg(M=4, perm=None, dt=1.0, M_t=1):
    seq = SwitchingSequence(perm or tuple(range(1, M + 1)), dt)
    return SoundingConfig(ArrayModel.ula(M), ArrayModel.single_isotropic(), seq, M_t=M_t)


class TestJacobian:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        for _ in range(40):
            cfg, p = random_config(rng), random_path(rng)
            D = jacobian(p, cfg)
            F = fd_jacobian(p, cfg, PARAMS)
            assert np.linalg.norm(D - F) / np.linalg.norm(F) < 1e-5

    def test_nu_column_zero_without_time_spread(self):
        cfg = SoundingConfig(ArrayModel.ula(1), ArrayModel.single_isotropic(), SwitchingSequence((1,)))
        D = jacobian(PathParameters(phi_T=0.3, nu=2.0), cfg)
        assert np.array_equal(D[:, PARAMS.index("nu")], np.zeros(1))

    def test_isotropic_broadside_structure(self):
        cfg = ula_cfg(5, (3, 1, 5, 2, 4))
        p = PathParameters(phi_T=np.pi / 2, nu=0.03, r=1.3, psi=0.2)
        D = jacobian(p, cfg)
        mu = 2 * np.pi * 0.5 * np.cos(np.pi / 2)
        s = p.gamma * np.exp(-1j * mu * cfg.tx.m) * np.exp(2j * np.pi * p.nu * cfg.timing_vector())
        dmu = -2 * np.pi * 0.5 * np.sin(np.pi / 2)
        assert np.allclose(D[:, PARAMS.index("phi_T")], -1j * cfg.tx.m * dmu * s)

    def test_amplitude_and_phase_columns(self):
        rng = np.random.default_rng(2)
        cfg, p = random_config(rng), random_path(rng)
        D = jacobian(p, cfg)
        s = D[:, PARAMS.index("psi")] / 1j
        assert np.allclose(D[:, PARAMS.index("r")], s / p.r)

    def test_zero_amplitude(self):
        with pytest.raises(DegenerateAmplitudeError):
            jacobian(PathParameters(r=0.0), ula_cfg())


class TestFIM:
    def test_doppler_diagonal_example(self):
        F = fim(PathParameters(phi_T=1.0), ula_cfg(4), 1.0)
        assert F["nu", "nu"] == pytest.approx(8 * np.pi ** 2 * 5, rel=1e-12)
        assert F["nu", "nu"] == pytest.approx(394.784176, rel=1e-8)
        assert fim_doppler_diagonal(PathParameters(phi_T=1.0), ula_cfg(4), 1.0) == pytest.approx(394.784176)

    def test_doppler_diagonal_permutation_invariant_exact(self):
        # exact where the responses are exactly unit modulus in floating point;
        # elsewhere |b|^2 carries 1-ulp noise that follows the permutation
        rng = np.random.default_rng(0)
        for phi, rel in [(np.pi / 2, 0.0), (0.0, 0.0), (0.7, 1e-15)]:
            p = PathParameters(phi_T=phi, nu=0.01)
            ref = fim_doppler_diagonal(p, ula_cfg(8), 1.0)
            for _ in range(20):
                perm = tuple(int(v) for v in rng.permutation(8) + 1)
                v = fim_doppler_diagonal(p, ula_cfg(8, perm), 1.0)
                assert abs(v - ref) <= rel * ref

    def test_closed_form_diagonal_matches_fim(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            cfg, p = random_config(rng), random_path(rng)
            sigma = rng.uniform(0.3, 2)
            assert fim_doppler_diagonal(p, cfg, sigma) == pytest.approx(fim(p, cfg, sigma)["nu", "nu"], rel=1e-10)

    def test_fd_oracle(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            cfg, p = random_config(rng), random_path(rng)
            sigma = rng.uniform(0.3, 2)
            F = fim(p, cfg, sigma).values
            D = fd_jacobian(p, cfg, PARAMS)
            ref = 2 / sigma ** 2 * np.real(D.conj().T @ D)
            assert np.linalg.norm(F - ref) / np.linalg.norm(ref) < 1e-4

    def test_symmetric_psd(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            cfg, p = random_config(rng), random_path(rng)
            F = fim(p, cfg, rng.uniform(0.3, 2)).values
            assert np.array_equal(F, F.T)
            assert np.linalg.eigvalsh(F).min() >= -1e-10 * np.linalg.norm(F)

    def test_sigma_positive(self):
        with pytest.raises(DomainError):
            fim(PathParameters(), ula_cfg(), 0.0)

    def test_labels(self):
        F = fim(PathParameters(phi_T=1.0), ula_cfg(), 1.0)
        assert F.labels == PARAMS
        sub = F.sub(["nu", "phi_T"])
        assert sub.values[0, 1] == F["nu", "phi_T"]
        with pytest.raises(DomainError):
            F.index("delay")


class TestCrossEntries:
    def test_consistent_with_fim(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            cfg, p = random_config(rng), random_path(rng)
            sigma = rng.uniform(0.3, 2)
            F = fim(p, cfg, sigma)
            scale = np.sqrt(F["nu", "nu"]) * np.sqrt(max(F.diagonal()[:4].max(), 1e-30))
            for which in ANGLE_PARAMS:
                c = fim_cross_doppler_angle(p, cfg, sigma, which)
                assert abs(c - F["nu", which]) <= 1e-10 * max(scale, 1.0)

    def test_zero_timing(self):
        cfg = SoundingConfig(ArrayModel.ula(1), ArrayModel.single_isotropic(), SwitchingSequence((1,)))
        assert fim_cross_doppler_angle(PathParameters(phi_T=0.5), cfg, 1.0, "phi_T") == 0.0

    def test_isotropic_ula_form(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            perm = tuple(int(v) for v in rng.permutation(6) + 1)
            cfg = ula_cfg(6, perm, dt=0.5)
            phi, r, sigma = rng.uniform(-3, 3), rng.uniform(0.5, 2), rng.uniform(0.5, 2)
            p = PathParameters(phi_T=phi, r=r, nu=0.2)
            dmu = -2 * np.pi * 0.5 * np.sin(phi)
            expected = -4 * np.pi * r ** 2 / sigma ** 2 * dmu * (cfg.sequence.eta @ cfg.tx.m)
            got = fim_cross_doppler_angle(p, cfg, sigma, "phi_T")
            assert got == pytest.approx(expected, rel=1e-10, abs=1e-10)

    def test_scale_freeness(self):
        """Scaling r/sigma by c scales cross entries by c^2 and keeps the argmin."""
        phi = np.linspace(-np.pi, np.pi, 73)
        def J(seq, r):
            cfg = SoundingConfig(ArrayModel.ula(4), ArrayModel.single_isotropic(), seq)
            return max(abs(fim_cross_doppler_angle(PathParameters(phi_T=x, r=r), cfg, 1.0, "phi_T")) for x in phi)
        a = [J(s, 1.0) for s in ALL4]
        b = [J(s, 3.0) for s in ALL4]
        assert np.allclose(np.array(b), 9 * np.array(a))
        assert argmin_set(a) == argmin_set(b)


class TestCRLB:
    def test_diagonal_exact(self):
        d = np.array([2.0, 0.5, 7.0, 1e6])
        assert np.array_equal(crlb_from_fim(np.diag(d)), 1 / d)

    def test_inverse_diagonal_inequality_and_equality(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            n = int(rng.integers(2, 7))
            X = rng.standard_normal((n, n + 2))
            A = X @ X.T
            inv = np.diag(np.linalg.inv(A))
            assert np.all(inv >= 1 / np.diag(A) * (1 - 1e-12))
            assert np.allclose(crlb_from_fim(A), inv, rtol=1e-8)
            D = np.diag(np.diag(A))
            assert np.allclose(crlb_from_fim(D), 1 / np.diag(A), rtol=1e-15)

    def test_doppler_scaling_without_cross_terms(self):
        cfg = ula_cfg(4)
        base = crlb(PathParameters(phi_T=1.0, r=1.0), cfg, 1.0, ["nu", "r", "psi"])[0]
        assert base == pytest.approx(1 / (8 * np.pi ** 2 * 5), rel=1e-12)
        for r, s in [(2.0, 1.0), (1.0, 3.0), (0.5, 0.2)]:
            v = crlb(PathParameters(phi_T=1.0, r=r), cfg, s, ["nu", "r", "psi"])[0]
            assert v == pytest.approx(base * s ** 2 / r ** 2, rel=1e-10)

    def test_all_positive(self):
        rng = np.random.default_rng(4)
        cfg = ula_cfg(8, tuple(int(v) for v in rng.permutation(8) + 1), M_t=2)
        c = crlb(PathParameters(phi_T=1.0, nu=0.01), cfg, 1.0, ["phi_T", "nu", "r", "psi"])
        assert np.all(c > 0)

    def test_singular(self):
        # elevation is unobservable for a ULA
        with pytest.raises(SingularFIMError):
            crlb(PathParameters(phi_T=1.0), ula_cfg(4), 1.0)
        with pytest.raises(SingularFIMError):
            crlb_from_fim(np.array([[1.0, 1.0], [1.0, 1.0]]))

    def test_condition_is_unit_free(self):
        A = np.array([[1e10, 1e3], [1e3, 1e-2]])
        assert np.allclose(crlb_from_fim(A), np.diag(np.linalg.inv(A)))


def test_weighted_cauchy_schwarz():
    rng = np.random.default_rng(0)
    for _ in range(500):
        n = int(rng.integers(1, 20))
        a = rng.uniform(0.1, 5, n) * rng.choice([-1, 1], n)
        b = rng.standard_normal(n)
        b /= np.linalg.norm(b)
        assert np.sum(b ** 2 / a ** 2) >= 1 / np.sum(a ** 2 * b ** 2) * (1 - 1e-12)


class TestFisherCost:
    def test_zero_timing(self):
        assert fisher_cost(np.zeros(4), ArrayModel.ula(4)) == 0.0

    def test_tx_only_equals_grid_max_of_cross_entry(self):
        cfgc = FisherCostConfig(n_phi=91)
        phi = np.linspace(-np.pi, np.pi, 91)
        rng = np.random.default_rng(3)
        for tx in (ArrayModel.ula(5), synthetic_patch_ula(5)):
            for _ in range(5):
                seq = SwitchingSequence(tuple(int(v) for v in rng.permutation(5) + 1), 0.3)
                cfg = SoundingConfig(tx, ArrayModel.single_isotropic(), seq)
                ref = max(abs(fim_cross_doppler_angle(PathParameters(phi_T=x), cfg, 1.0, "phi_T")) for x in phi)
                assert fisher_cost(seq.eta, tx, None, cfgc) == pytest.approx(ref, rel=1e-10)

    def test_isotropic_shortcut_argmin(self):
        cost = FisherCost(ArrayModel.ula(4))
        m = ArrayModel.ula(4).m
        a = [cost(s.eta) for s in ALL4]
        b = [fisher_cost_isotropic_ula(s.eta, m) for s in ALL4]
        assert argmin_set(a) == argmin_set(b)
        # on a ULA the general path is a fixed multiple of the shortcut
        assert np.allclose(a, 4 * np.pi * np.pi * np.array(b))

    def test_refine_never_lowers(self):
        eta = SwitchingSequence((5, 2, 7, 1, 3, 8, 4, 6)).eta
        tx = synthetic_patch_ula(8)
        coarse = fisher_cost(eta, tx, None, FisherCostConfig(n_phi=31))
        fine = fisher_cost(eta, tx, None, FisherCostConfig(n_phi=31, refine=True))
        assert fine >= coarse

    def test_config_validation(self):
        with pytest.raises(DomainError):
            FisherCostConfig(side="both")
        with pytest.raises(DomainError):
            FisherCostConfig(active=("delay",))
        with pytest.raises(DomainError):
            FisherCostConfig(n_phi=1)


class TestIsotropic:
    def test_trivial(self):
        assert fisher_cost_isotropic_ula([-1.5, -0.5, 0.5, 1.5], [-1.5, -0.5, 0.5, 1.5]) == 5.0

    def test_example_perm(self):
        eta = SwitchingSequence((1, 4, 2, 3)).eta
        assert np.allclose(eta, [-1.5, 1.5, -0.5, 0.5])
        assert fisher_cost_isotropic_ula(eta, ArrayModel.ula(4).m) == 2.0

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-10, 10), min_size=2, max_size=10))
    def test_orthogonal_zero(self, x):
        m = np.arange(len(x)) - (len(x) - 1) / 2
        eta = np.asarray(x) - (np.asarray(x) @ m) / (m @ m) * m
        assert fisher_cost_isotropic_ula(eta, m) <= 1e-9 * (1 + np.abs(x).sum() * np.abs(m).sum())

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            fisher_cost_isotropic_ula([1.0, 2.0], [1.0])


class TestSplit:
    def test_single_element(self):
        assert fisher_cost_split(np.zeros(1), ArrayModel.ula(1)) == 0.0
        assert fisher_cost_split(np.zeros(1), synthetic_patch_ula(1)) == 0.0

    def test_zero_timing(self):
        assert fisher_cost_split(np.zeros(4), synthetic_patch_ula(4), "TX") == 0.0

    def test_joint_ordering(self):
        tx, rx = synthetic_patch_ula(4), ArrayModel.ula(2, 0.5)
        cfgc = FisherCostConfig(n_phi=91)
        joint_cost = FisherCost(tx, rx, cfgc)
        rng = np.random.default_rng(6)
        split, joint = [], []
        for _ in range(10):
            sT = SwitchingSequence(tuple(int(v) for v in rng.permutation(4) + 1))
            sR = SwitchingSequence(tuple(int(v) for v in rng.permutation(2) + 1))
            split.append(fisher_cost_split(sT.eta, tx, "TX", cfgc) + fisher_cost_split(sR.eta, rx, "RX", cfgc))
            joint.append(joint_cost(kronecker_schedule(sT, sR).eta))
        # with M_T = 2 M_R the joint cost is exactly M_R^2 (J_T + J_R)
        assert np.allclose(joint, 4 * np.array(split), rtol=1e-12)
        assert list(np.argsort(joint, kind="stable")) == list(np.argsort(split, kind="stable"))


class TestWideband:
    def test_single_frequency(self):
        tx = synthetic_patch_ula(4)
        eta = SwitchingSequence((2, 4, 1, 3)).eta
        nb = fisher_cost(eta, tx)
        assert wideband_fisher_cost(eta, [tx], mode="sum") == pytest.approx(nb, rel=1e-12)
        assert wideband_fisher_cost(eta, [tx], mode="composite") == pytest.approx(nb, rel=1e-12)

    def test_flat_patterns(self):
        tx = synthetic_patch_ula(4)
        for s in ALL4[:6]:
            nb = fisher_cost(s.eta, tx)
            assert wideband_fisher_cost(s.eta, [tx] * 3, mode="sum") == pytest.approx(3 * nb, rel=1e-12)

    def test_composite_flat_argmin(self):
        tx = synthetic_patch_ula(4)
        nb = [fisher_cost(s.eta, tx) for s in ALL4]
        comp = [wideband_fisher_cost(s.eta, [tx] * 3, mode="composite") for s in ALL4]
        assert argmin_set(nb) == argmin_set(comp)
        ratio = np.array(comp)[np.array(nb) > 0] / np.array(nb)[np.array(nb) > 0]
        assert np.all(ratio > 0) and np.allclose(ratio, ratio[0])

    def test_errors(self):
        with pytest.raises(DomainError):
            wideband_fisher_cost(np.zeros(4), [])
        with pytest.raises(DomainError):
            wideband_fisher_cost(np.zeros(4), [ArrayModel.ula(4)], mode="peak")


def test_fim_from_jacobian_matches_formula():
    rng = np.random.default_rng(0)
    D = rng.standard_normal((10, 3)) + 1j * rng.standard_normal((10, 3))
    F = fim_from_jacobian(D, 2.0, ("a", "b", "c"))
    assert isinstance(F, FisherMatrix)
    assert np.allclose(F.values, 0.5 * np.real(D.conj().T @ D))
