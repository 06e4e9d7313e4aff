import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from switchseq.array_model import (EADF, ArrayModel, array_high_xpr, array_response,
                                   array_response_derivatives, centered_indices,
                                   eadf_from_sampled_pattern, high_xpr_check, responses,
                                   steering_phase_vector, synthetic_patch_ula)
from switchseq.errors import DimensionError, FormatError, MissingPolarizationError


def random_eadf(rng, M=3, a_phi=5, a_theta=3, pol="V"):
    c = rng.standard_normal((M, a_phi, a_theta)) + 1j * rng.standard_normal((M, a_phi, a_theta))
    return EADF.from_coefficients(c, pol)


class TestSteeringPhase:
    def test_zero_angle(self):
        assert np.allclose(steering_phase_vector(0.0, [-1, 0, 1]), [1, 1, 1])

    def test_pi(self):
        assert np.allclose(steering_phase_vector(np.pi, [-1, 0, 1]), [-1, 1, -1])

    def test_scalar_loop(self):
        alpha = [-2, -1, 0, 1, 2]
        ref = [complex(np.cos(0.7 * a), np.sin(0.7 * a)) for a in alpha]
        assert np.allclose(steering_phase_vector(0.7, alpha), ref, atol=1e-15)


class TestArrayResponse:
    def test_broadside_two_elements(self):
        assert np.allclose(array_response(ArrayModel.ula(2, 0.5), "V", np.pi / 2), [1, 1])

    def test_endfire_four_elements(self):
        b = array_response(ArrayModel.ula(4, 0.5), "V", 0.0)
        expected = np.exp(1j * np.pi * np.array([1.5, 0.5, -0.5, -1.5]))
        assert np.allclose(b, expected)

    def test_flat_eadf_constant(self):
        G = np.zeros((2, 9), complex)
        G[:, 4] = [1.0, 2.0 - 1j]  # centre coefficient of a 3x3 grid
        arr = ArrayModel.measured(V=EADF(G, centered_indices(3), centered_indices(3)))
        b0 = array_response(arr, "V", 0.1, 0.2)
        for phi, th in [(1.0, -0.3), (-2.5, 1.1)]:
            assert np.allclose(array_response(arr, "V", phi, th), b0)

    def test_missing_polarization(self):
        with pytest.raises(MissingPolarizationError):
            array_response(ArrayModel.ula(4, 0.5, {"H": 1.0}), "V", 0.3)

    def test_eadf_is_row_kron(self):
        rng = np.random.default_rng(1)
        e = random_eadf(rng)
        arr = ArrayModel.measured(V=e)
        phi, th = 0.4, -0.9
        ref = e.G @ np.kron(steering_phase_vector(phi, e.alpha_phi), steering_phase_vector(th, e.alpha_theta))
        assert np.allclose(array_response(arr, "V", phi, th), ref)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 12), st.floats(0.1, 2.0), st.floats(-10, 10))
    def test_ula_unit_modulus_and_length(self, M, d, phi):
        b = array_response(ArrayModel.ula(M, d), "V", phi)
        assert b.shape == (M,)
        assert np.allclose(np.abs(b), 1.0)


def _fd(model, pol, phi, th, h=1e-6):
    dp = (array_response(model, pol, phi + h, th) - array_response(model, pol, phi - h, th)) / (2 * h)
    dt = (array_response(model, pol, phi, th + h) - array_response(model, pol, phi, th - h)) / (2 * h)
    return dp, dt


class TestDerivatives:
    def test_finite_difference_100_draws(self):
        rng = np.random.default_rng(7)
        for k in range(100):
            if k % 2:
                model = ArrayModel.ula(int(rng.integers(1, 9)), float(rng.uniform(0.2, 1.0)))
            else:
                model = ArrayModel.measured(V=random_eadf(rng, int(rng.integers(1, 5)), 7, 5))
            phi, th = rng.uniform(-np.pi, np.pi), rng.uniform(-1.5, 1.5)
            d_phi, d_th = array_response_derivatives(model, "V", phi, th)
            f_phi, f_th = _fd(model, "V", phi, th)
            scale = max(np.linalg.norm(d_phi), np.linalg.norm(f_phi), 1e-3)
            assert np.linalg.norm(d_phi - f_phi) / scale < 1e-5
            scale = max(np.linalg.norm(d_th), np.linalg.norm(f_th), 1e-3)
            assert np.linalg.norm(d_th - f_th) / scale < 1e-5

    def test_ula_broadside_structure(self):
        model = ArrayModel.ula(5, 0.5)
        b = array_response(model, "V", np.pi / 2)
        d_phi, d_th = array_response_derivatives(model, "V", np.pi / 2)
        assert np.allclose(d_phi, b * (1j * 2 * np.pi * 0.5 * model.m))
        assert np.allclose(d_th, 0)

    def test_flat_pattern_zero_derivatives(self):
        G = np.zeros((3, 15), complex)
        G[:, 7] = 1.0
        arr = ArrayModel.measured(V=EADF(G, centered_indices(5), centered_indices(3)))
        d_phi, d_th = array_response_derivatives(arr, "V", 0.7, 0.2)
        assert np.allclose(d_phi, 0) and np.allclose(d_th, 0)


class TestSampledPattern:
    def test_pure_harmonic(self):
        phi = 2 * np.pi * np.arange(7) / 7
        s = np.exp(1j * phi)[None, :, None]
        e = eadf_from_sampled_pattern(s)
        cube = e.coefficient_cube()
        assert np.isclose(cube[0, 4, 0], 1.0)
        cube[0, 4, 0] = 0
        assert np.allclose(cube, 0, atol=1e-14)

    def test_constant_pattern(self):
        e = eadf_from_sampled_pattern(np.full((2, 5, 3), 3.0 + 1j))
        cube = e.coefficient_cube()
        assert np.allclose(cube[:, 2, 1], 3.0 + 1j)
        cube[:, 2, 1] = 0
        assert np.allclose(cube, 0, atol=1e-14)

    def test_round_trip_band_limited(self):
        rng = np.random.default_rng(3)
        true = random_eadf(rng, M=4, a_phi=9, a_theta=5)
        model = ArrayModel.measured(V=true)
        n_phi, n_theta = 11, 7
        phi = 2 * np.pi * np.arange(n_phi) / n_phi
        th = 2 * np.pi * np.arange(n_theta) / n_theta
        P, T = np.meshgrid(phi, th, indexing="ij")
        s = responses(model, "V", P.ravel(), T.ravel()).T.reshape(4, n_phi, n_theta)
        rebuilt = ArrayModel.measured(V=eadf_from_sampled_pattern(s))
        r = responses(rebuilt, "V", P.ravel(), T.ravel()).T.reshape(4, n_phi, n_theta)
        assert np.linalg.norm(r - s) / np.linalg.norm(s) < 1e-8

    def test_offset_grid(self):
        rng = np.random.default_rng(4)
        model = ArrayModel.measured(V=random_eadf(rng, 2, 5, 1))
        phi = -np.pi + 2 * np.pi * np.arange(9) / 9
        s = responses(model, "V", phi, 0.0).T[:, :, None]
        e = eadf_from_sampled_pattern(s, phi_grid=phi, theta_grid=[0.0])
        back = responses(ArrayModel.measured(V=e), "V", phi, 0.0).T[:, :, None]
        assert np.linalg.norm(back - s) / np.linalg.norm(s) < 1e-8

    def test_non_uniform_grid_rejected(self):
        phi = np.sort(np.random.default_rng(0).uniform(0, 2 * np.pi, 5))
        with pytest.raises(FormatError):
            eadf_from_sampled_pattern(np.ones((1, 5, 1)), phi_grid=phi)

    def test_even_grid_rejected(self):
        with pytest.raises(FormatError):
            eadf_from_sampled_pattern(np.ones((1, 4, 1)))


class TestHighXPR:
    def test_pure_v(self):
        v = np.ones((10, 4))
        assert high_xpr_check(np.zeros_like(v), v)

    def test_equal(self):
        v = np.ones((10, 4))
        assert not high_xpr_check(v, v)

    def test_synthetic_levels(self):
        v = np.exp(1j * np.linspace(0, 3, 40)).reshape(10, 4)
        assert high_xpr_check(v * 10 ** (-40 / 20), v)
        assert not high_xpr_check(v * 10 ** (-20 / 20), v)
        assert high_xpr_check(v * 10 ** (-20 / 20), v, threshold_db=15)

    def test_zero_elements_pass(self):
        assert high_xpr_check(np.zeros((3, 2)), np.zeros((3, 2)))

    def test_mismatched_grids(self):
        with pytest.raises(DimensionError):
            high_xpr_check(np.ones((3, 2)), np.ones((4, 2)))

    def test_alternating_array(self):
        h = np.arange(6) % 2 == 0
        arr = ArrayModel.ula(6, 0.5, {"H": h.astype(float), "V": (~h).astype(float)})
        assert array_high_xpr(arr, np.linspace(-np.pi, np.pi, 31))
        mixed = ArrayModel.ula(6, 0.5, {"H": 1.0, "V": 1.0})
        assert not array_high_xpr(mixed, np.linspace(-np.pi, np.pi, 31))


class TestModels:
    def test_centered_indices_sum_zero(self):
        for n in range(1, 10):
            assert abs(centered_indices(n).sum()) < 1e-12

    def test_eadf_validation(self):
        with pytest.raises(DimensionError):
            EADF(np.ones((2, 5)), centered_indices(3), centered_indices(3))
        with pytest.raises(FormatError):
            EADF(np.ones((2, 3)), [0, 1, 2], [0])

    def test_measured_polarizations_share_M(self):
        rng = np.random.default_rng(0)
        with pytest.raises(DimensionError):
            ArrayModel.measured(H=random_eadf(rng, 2, pol="H"), V=random_eadf(rng, 3))

    def test_ula_spacing_positive(self):
        with pytest.raises(FormatError):
            ArrayModel.ula(4, 0.0)

    def test_patch_main_lobe_forward(self):
        arr = synthetic_patch_ula(8)
        front = np.abs(array_response(arr, "V", np.pi / 2))
        back = np.abs(array_response(arr, "V", -np.pi / 2))
        assert np.all(front > 5 * back)
        # band-limited fit of a ULA: phases vanish at broadside up to truncation
        assert np.allclose(np.angle(array_response(arr, "V", np.pi / 2)), 0, atol=1e-5)
