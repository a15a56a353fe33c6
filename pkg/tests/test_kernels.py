from fractions import Fraction

import numpy as np
import pytest

from unirecover.errors import DimensionMismatchError, NonFiniteInputError
from unirecover.kernels import (
    KernelKind,
    KernelSpec,
    dirichlet_eval,
    fejer_eval,
    fejer_tensor_eval,
    kernel_eval,
    kernel_fourier_coeff,
    kernel_matrix,
    vp_eval,
    vp_tensor_eval,
)


def direct_sum(coefficients, x):
    """sum_k c_k e^{ikx} for a symmetric real coefficient map"""
    x = np.asarray(x, dtype=np.float64)
    return sum(float(c) * np.cos(k * x) for k, c in coefficients.items())


def dirichlet_coeffs(j):
    return {k: 1 for k in range(-j, j + 1)}


def fejer_coeffs(j):
    return {k: 1 - abs(k) / j for k in range(-j + 1, j)}


def vp_coeffs(j):
    coeffs = {}
    for k, c in fejer_coeffs(2 * j).items():
        coeffs[k] = coeffs.get(k, 0) + 2 * c
    for k, c in fejer_coeffs(j).items():
        coeffs[k] = coeffs.get(k, 0) - c
    return coeffs


X = np.linspace(-7.0, 7.0, 57)


class TestClosedForms:
    @pytest.mark.parametrize("j", [0, 1, 4, 9])
    def test_dirichlet(self, j):
        np.testing.assert_allclose(dirichlet_eval(j, X), direct_sum(dirichlet_coeffs(j), X), atol=1e-10)

    @pytest.mark.parametrize("j", [1, 2, 8, 13])
    def test_fejer(self, j):
        np.testing.assert_allclose(fejer_eval(j, X), direct_sum(fejer_coeffs(j), X), atol=1e-10)

    @pytest.mark.parametrize("j", [1, 2, 8, 16])
    def test_vallee_poussin(self, j):
        np.testing.assert_allclose(vp_eval(j, X), direct_sum(vp_coeffs(j), X), atol=1e-9)


class TestSingularities:
    @pytest.mark.parametrize("j", [1, 3, 7])
    def test_limits_at_zero(self, j):
        """Exact limit values at multiples of 2*pi"""
        for x in (0.0, 2 * np.pi, -4 * np.pi):
            assert dirichlet_eval(j, x) == 2 * j + 1
            assert fejer_eval(j, x) == j
            assert vp_eval(j, x) == 3 * j

    def test_near_zero_is_continuous(self):
        """Cosine summation near the singular point stays close to the limit"""
        np.testing.assert_allclose(vp_eval(5, 1e-9), 15.0, rtol=1e-9)
        np.testing.assert_allclose(dirichlet_eval(5, 2 * np.pi + 1e-9), 11.0, rtol=1e-9)

    def test_scalar_in_scalar_out(self):
        assert isinstance(fejer_eval(3, 0.5), float)

    def test_non_finite(self):
        with pytest.raises(NonFiniteInputError):
            vp_eval(2, np.nan)

    @pytest.mark.parametrize("fn", [fejer_eval, vp_eval])
    def test_order_zero_rejected(self, fn):
        with pytest.raises(ValueError):
            fn(0, 0.3)


class TestFourierCoefficients:
    @pytest.mark.parametrize("j", [1, 2, 5, 16, 32])
    def test_vp_matches_oracle(self, j):
        oracle = vp_coeffs(j)
        spec = KernelSpec(KernelKind.VALLEE_POUSSIN, j)
        for k in range(-2 * j - 2, 2 * j + 3):
            assert kernel_fourier_coeff(spec, k) == Fraction(oracle.get(k, 0)).limit_denominator(4 * j)

    @pytest.mark.parametrize("j", [1, 4, 11])
    def test_fejer_and_dirichlet(self, j):
        for k in range(-j - 2, j + 3):
            assert kernel_fourier_coeff(KernelSpec(KernelKind.FEJER, j), k) == max(
                Fraction(0), 1 - Fraction(abs(k), j)
            )
            assert kernel_fourier_coeff(KernelSpec(KernelKind.DIRICHLET, j), k) == (1 if abs(k) <= j else 0)

    def test_vp_reproduces_low_frequencies(self):
        """DFT of V_4 on 64 points: 1 up to |k| = 4, then 2 - |k|/4"""
        x = 2 * np.pi * np.arange(64) / 64
        values = vp_eval(4, x)
        for k, expected in [(0, 1.0), (3, 1.0), (4, 1.0), (6, 0.5), (8, 0.0)]:
            np.testing.assert_allclose(np.mean(values * np.cos(k * x)), expected, atol=1e-12)


class TestNormalization:
    @pytest.mark.parametrize("j", [1, 2, 7, 16])
    def test_fejer_nonnegative(self, j):
        x = np.linspace(-np.pi, np.pi, 4001)
        assert np.min(fejer_eval(j, x)) >= -1e-12

    @pytest.mark.parametrize("fn", [dirichlet_eval, fejer_eval, vp_eval])
    @pytest.mark.parametrize("j", [1, 3, 16])
    def test_unit_mean_on_uniform_grid(self, fn, j):
        """Equispaced means integrate degrees below 64 exactly, so each kernel averages to 1"""
        x = 2 * np.pi * np.arange(64) / 64
        np.testing.assert_allclose(np.mean(fn(j, x)), 1.0, atol=1e-12)


class TestTensor:
    def test_product_of_factors(self):
        x = np.array([[0.3, 1.1], [2.0, -0.4]])
        expected = vp_eval(2, x[:, 0]) * vp_eval(4, x[:, 1])
        np.testing.assert_allclose(vp_tensor_eval([2, 4], x), expected)
        np.testing.assert_allclose(fejer_tensor_eval([2, 4], x), fejer_eval(2, x[:, 0]) * fejer_eval(4, x[:, 1]))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            vp_tensor_eval([1, 2, 3], np.zeros((4, 2)))

    def test_kernel_eval_dispatch(self):
        assert kernel_eval(KernelSpec(KernelKind.DIRICHLET, 3), 0.0) == 7.0

    def test_kernel_matrix(self):
        x, y = np.array([0.1, 0.2, 0.3]), np.array([1.0, 2.0])
        matrix = kernel_matrix(2, x, y)
        assert matrix.shape == (3, 2)
        np.testing.assert_allclose(matrix[1, 0], vp_eval(2, 0.2 - 1.0))
