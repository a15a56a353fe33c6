import logging

import numpy as np
import pytest

from unirecover.basis import RealBasis
from unirecover.errors import DimensionMismatchError, NonFiniteInputError
from unirecover.function_classes import (
    SmoothnessVector,
    TrigPolynomial,
    make_test_function,
    random_trig_polynomial,
    trig_function,
)
from unirecover.kernels import vp_tensor_eval
from unirecover.lattices import fibonacci_lattice, korobov_lattice
from unirecover.recovery import (
    EvaluationGrid,
    _first_argmin,
    certified_budget,
    chebyshev_fit,
    lebesgue_factor,
    lebesgue_vs,
    universal_cheb_recover,
    universal_vp_recover,
    vs_apply,
)
from unirecover.torus import enumerate_shapes


def brute_lebesgue(lattice, s, grid):
    """max over grid and nodes of (1/m) sum_nu |prod_j V_{2^s_j}(x_j - y_j)|"""
    y = lattice.points.coordinates
    orders = [2**sj for sj in s]
    points = np.vstack([grid.points(), y])
    return max(
        float(np.mean(np.abs(vp_tensor_eval(orders, x[None, :] - y)))) for x in points
    )


class TestEvaluationGrid:
    def test_resolution_rule(self):
        grid = EvaluationGrid.for_shapes([(1, 2), (3, 0)], oversampling=4)
        assert grid.resolution == 32
        assert grid.d == 2

    def test_points(self):
        grid = EvaluationGrid(4, 2)
        points = grid.points()
        assert points.shape == (16, 2)
        np.testing.assert_allclose(points[1], [0.0, np.pi / 2])

    def test_empty_shapes(self):
        with pytest.raises(ValueError):
            EvaluationGrid.for_shapes([])


class TestVsApply:
    @pytest.mark.parametrize("n", [10, 12])
    def test_reproduces_certified_polynomials(self, n, rng):
        """V_s t = t for t in T(R(s)) whenever ||s||_1 is within the certified budget"""
        lattice = fibonacci_lattice(n)
        budget = certified_budget(lattice)
        assert budget >= 1
        for s in enumerate_shapes(budget, 2):
            grid = EvaluationGrid.for_shapes([s], 2)
            for _ in range(5):
                poly = random_trig_polynomial(s, rng)
                approx = vs_apply(lattice, poly.evaluate(lattice.points.coordinates), s)
                assert approx.within_budget
                truth = poly.evaluate_grid(grid)
                error = np.abs(approx.evaluate_grid(grid) - truth).max()
                assert error < 1e-8 * np.abs(truth).max()

    def test_grid_matches_pointwise(self, rng):
        lattice = fibonacci_lattice(8)
        approx = vs_apply(lattice, rng.standard_normal(lattice.m), (1, 1))
        grid = EvaluationGrid(12, 2)
        np.testing.assert_allclose(
            approx.evaluate_grid(grid),
            approx.evaluate(grid.points()).reshape(grid.tensor_shape),
            atol=1e-12,
        )

    def test_outside_budget_flagged(self, caplog):
        lattice = fibonacci_lattice(8)
        with caplog.at_level(logging.WARNING):
            approx = vs_apply(lattice, np.ones(lattice.m), (3, 3))
        assert approx.within_budget is False
        assert "outside the certified budget" in caplog.text

    def test_sample_count(self):
        with pytest.raises(ValueError):
            vs_apply(fibonacci_lattice(8), np.ones(5), (0, 0))

    def test_non_finite_samples(self):
        samples = np.ones(34)
        samples[3] = np.nan
        with pytest.raises(NonFiniteInputError):
            vs_apply(fibonacci_lattice(8), samples, (0, 0))

    def test_shape_dimension(self):
        with pytest.raises(DimensionMismatchError):
            vs_apply(fibonacci_lattice(8), np.ones(34), (0, 0, 0))

    def test_grid_dimension(self):
        approx = vs_apply(fibonacci_lattice(8), np.ones(34), (0, 0))
        with pytest.raises(DimensionMismatchError):
            approx.evaluate_grid(EvaluationGrid(8, 3))

    @pytest.mark.parametrize("s", [(0, 0), (1, 1), (2, 0), (3, 3)])
    def test_bounded_by_lebesgue_constant(self, s, rng):
        lattice = fibonacci_lattice(9)
        samples = rng.uniform(-2.0, 2.0, lattice.m)
        grid = EvaluationGrid(32, 2)
        approx = vs_apply(lattice, samples, s)
        bound = lebesgue_vs(lattice, s, grid) * np.abs(samples).max()
        assert np.abs(approx.evaluate_grid(grid)).max() <= bound + 1e-12


class TestLebesgue:
    @pytest.mark.parametrize("s", [(0, 0), (1, 0), (0, 2)])
    def test_matches_oracle(self, s):
        lattice = fibonacci_lattice(6)
        grid = EvaluationGrid(16, 2)
        np.testing.assert_allclose(lebesgue_vs(lattice, s, grid), brute_lebesgue(lattice, s, grid), rtol=1e-12)

    @pytest.mark.parametrize("n", [10, 11, 12])
    def test_certified_bound(self, n):
        lattice = fibonacci_lattice(n)
        budget = certified_budget(lattice)
        for weight in range(budget + 1):
            for s in enumerate_shapes(weight, 2):
                value = lebesgue_vs(lattice, s)
                assert 1.0 - 1e-12 <= value <= lebesgue_factor(2)

    def test_coarse_grid_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            lebesgue_vs(fibonacci_lattice(8), (2, 0), EvaluationGrid(4, 2))
        assert "below the floor" in caplog.text


class TestUniversalVp:
    def test_selects_matching_rectangle(self):
        """Frequency (2,0) is reproduced by V_(2,1) and annihilated by V_(1,2)"""
        lattice = fibonacci_lattice(10)
        poly = TrigPolynomial(np.array([[2, 0]]), np.array([1.0]), np.array([0.5]), constant=0.3)
        result = universal_vp_recover(lattice, trig_function(poly), 1)
        assert result.chosen_shape.entries == (1, 0)
        assert result.winner_error < 1e-9
        assert result.per_shape_errors[result.chosen_shape] == min(result.per_shape_errors.values())
        assert result.within_budget

    def test_budget_beyond_certificate(self):
        lattice = fibonacci_lattice(8)
        result = universal_vp_recover(lattice, lambda x: np.cos(x[:, 0]), 2)
        assert result.within_budget is False

    def test_negative_budget(self):
        with pytest.raises(ValueError):
            universal_vp_recover(fibonacci_lattice(8), np.ones(34), -1)

    def test_node_samples(self):
        """Node-only samples measure the error on the nodes"""
        lattice = fibonacci_lattice(10)
        values = np.cos(2 * lattice.points.coordinates[:, 1])
        result = universal_vp_recover(lattice, values, 1)
        assert result.chosen_shape.entries == (0, 1)
        assert result.winner_error < 1e-9

    def test_korobov_lattice(self):
        lattice = korobov_lattice(101, (1, 10))
        poly = TrigPolynomial(np.array([[0, 0]]), np.zeros(1), np.zeros(1), constant=2.5)
        result = universal_vp_recover(lattice, trig_function(poly), 0)
        assert result.winner_error < 1e-9

    def test_summary(self, rng):
        lattice = fibonacci_lattice(9)
        result = universal_vp_recover(lattice, trig_function(random_trig_polynomial((0, 1), rng)), 1)
        summary = result.summary()
        assert summary.method == "vp"
        assert summary.lattice == "fib:9"
        assert set(summary.per_shape_errors) == {"(0,1)", "(1,0)"}


def test_first_minimizer_wins_ties():
    assert _first_argmin([2.0, 1.0, 1.0, 3.0]) == 1


class TestScaleInvariance:
    """Multiplying f by a constant scales every error alike, so the chosen shape stays put"""

    f = make_test_function(SmoothnessVector((1.5, 3.0)), K=256, generator="sign")

    def scaled(self, x):
        return 3.7 * self.f.evaluate(x)

    def test_vp(self):
        lattice = fibonacci_lattice(12)
        plain = universal_vp_recover(lattice, self.f, 3)
        scaled = universal_vp_recover(lattice, self.scaled, 3)
        assert scaled.chosen_shape == plain.chosen_shape
        np.testing.assert_allclose(scaled.winner_error, 3.7 * plain.winner_error, rtol=1e-9)

    def test_cheb(self):
        lattice = fibonacci_lattice(10)
        plain = universal_cheb_recover(lattice, self.f, 1)
        scaled = universal_cheb_recover(lattice, self.scaled, 1)
        assert scaled.chosen_shape == plain.chosen_shape


class TestChebyshevFit:
    def test_constant_fit_of_cosine(self):
        """Best constant for cos(2x) on a uniform grid is 0 with residual 1"""
        x = 2 * np.pi * np.arange(8)[:, None] / 8
        fit = chebyshev_fit(x, np.cos(2 * x[:, 0]), (0,))
        np.testing.assert_allclose(fit.residual, 1.0, atol=1e-9)
        np.testing.assert_allclose(fit.approximant.coefficients, [0.0], atol=1e-9)

    def test_member_is_interpolated(self, rng):
        grid = EvaluationGrid(16, 2)
        basis = RealBasis.for_shape((1, 1))
        coefficients = rng.standard_normal(basis.dim)
        values = basis.evaluate(coefficients, grid.points())
        fit = chebyshev_fit(grid.points(), values, (1, 1))
        assert fit.residual < 1e-8
        assert not fit.rank_deficient
        np.testing.assert_allclose(fit.approximant.coefficients, coefficients, atol=1e-7)

    def test_rank_deficient(self):
        x = np.array([[0.1, 0.2], [1.0, 2.0], [3.0, 0.5]])
        fit = chebyshev_fit(x, np.array([1.0, -1.0, 0.5]), (1, 1))
        assert fit.rank_deficient
        assert fit.residual < 1e-8

    def test_residual_not_worse_than_members(self, rng):
        """The minimax residual is at most that of any polynomial in the space"""
        x = rng.uniform(0, 2 * np.pi, (40, 2))
        f = np.sign(np.sin(x[:, 0])) * np.cos(x[:, 1])
        fit = chebyshev_fit(x, f, (1, 0))
        basis = RealBasis.for_shape((1, 0))
        for _ in range(20):
            other = basis.evaluate(rng.standard_normal(basis.dim) * 0.3, x)
            assert fit.residual <= np.abs(f - other).max() + 1e-9


class TestUniversalCheb:
    def test_selects_matching_rectangle(self, rng):
        lattice = fibonacci_lattice(10)
        poly = random_trig_polynomial((0, 1), rng)
        result = universal_cheb_recover(lattice, trig_function(poly), 1)
        assert result.chosen_shape.entries == (0, 1)
        assert result.winner_error < 1e-7
        assert set(result.residuals) == set(enumerate_shapes(1, 2))

    def test_shape_list(self, rng):
        lattice = fibonacci_lattice(9)
        poly = random_trig_polynomial((1, 1), rng)
        result = universal_cheb_recover(lattice, trig_function(poly), [(0, 0), (1, 1)])
        assert result.chosen_shape.entries == (1, 1)

    def test_discretization_constant_carried(self, rng):
        lattice = fibonacci_lattice(9)
        result = universal_cheb_recover(lattice, np.ones(lattice.m), 1, discretization_constant=2.0)
        assert result.summary().discretization_constant == 2.0
