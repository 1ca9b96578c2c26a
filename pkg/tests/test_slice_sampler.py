import math

import numpy as np
import pytest
from scipy import integrate, stats

from config import SliceConfig
from em_engine import _log_w_posterior, _log_w_start
from exceptions import SliceSamplingError
from slice_sampler import SliceSampler


def standard_normal(x, rows):
    return -0.5 * x * x


class TestSliceSampler:
    def test_normal_target(self):
        sampler = SliceSampler(standard_normal, SliceConfig(burn_in=20, kept=1))
        draws = sampler.sample(np.zeros(20_000), np.random.default_rng(1)).ravel()
        assert draws.mean() == pytest.approx(0.0, abs=0.03)
        assert draws.std() == pytest.approx(1.0, abs=0.03)
        assert stats.kstest(draws, 'norm').pvalue > 0.001

    def test_kept_shape(self):
        sampler = SliceSampler(standard_normal, SliceConfig(burn_in=2, kept=3))
        assert sampler.sample(np.zeros(10), np.random.default_rng(2)).shape == (3, 10)

    def test_per_chain_targets(self):
        centres = np.array([-5.0, 0.0, 5.0])

        def shifted(x, rows):
            return -0.5 * (x - centres[rows]) ** 2

        sampler = SliceSampler(shifted, SliceConfig(burn_in=10, kept=400))
        draws = sampler.sample(np.zeros(3), np.random.default_rng(3))
        np.testing.assert_allclose(draws.mean(axis=0), centres, atol=0.25)

    def test_deterministic(self):
        sampler = SliceSampler(standard_normal, SliceConfig(burn_in=5))
        first = sampler.sample(np.zeros(50), np.random.default_rng(4))
        second = sampler.sample(np.zeros(50), np.random.default_rng(4))
        np.testing.assert_array_equal(first, second)

    def test_doubling_limit_bounds_the_interval(self):
        # 平坦目标上区间最多倍增 5 次，宽度不超过 32
        sampler = SliceSampler(lambda x, rows: np.zeros_like(x), SliceConfig(burn_in=0, max_doublings=5))
        draws = sampler.sample(np.zeros(200), np.random.default_rng(5))
        assert np.all(np.abs(draws) <= 32.0)

    def test_far_start_reaches_narrow_mode(self):
        """起点处密度极小、众数在左侧很远时仍能完成外扩"""
        def far_left(x, rows):
            return 2.5 * x - 5000.0 * np.exp(2.0 * x)

        sampler = SliceSampler(far_left, SliceConfig(burn_in=100, kept=1))
        draws = sampler.sample(np.zeros(2000), np.random.default_rng(8)).ravel()
        mode = 0.5 * math.log(2.5 / 10000.0)
        assert np.median(draws) == pytest.approx(mode, abs=0.3)

    def test_shrink_limit(self):
        # 切片只是一个点时收缩永远不会被接受
        sampler = SliceSampler(lambda x, rows: np.where(x == 0.0, 0.0, -np.inf), SliceConfig(max_shrinks=3))
        with pytest.raises(SliceSamplingError):
            sampler.sample(np.zeros(2), np.random.default_rng(9))

    def test_rejects_infeasible_start(self):
        sampler = SliceSampler(lambda x, rows: np.where(x > 1.0, 0.0, -np.inf))
        with pytest.raises(SliceSamplingError):
            sampler.sample(np.zeros(2), np.random.default_rng(6))


class TestWeightPosterior:
    def test_unskewed_posterior_matches_grid(self):
        """lambda = 0、d = 1：比较 w 的后验均值与数值积分"""
        alpha, v = 1.5, 0.8
        n = 20_000
        log_density = _log_w_posterior(np.full(n, v * v), np.zeros(n), 1, alpha, 1.0)
        sampler = SliceSampler(log_density, SliceConfig(burn_in=50, kept=1))
        u = sampler.sample(np.zeros(n), np.random.default_rng(7)).ravel()

        def density(w):
            return w ** alpha * math.exp(-w ** alpha - w * w * v * v / 2)

        norm, _ = integrate.quad(density, 0, np.inf)
        mean, _ = integrate.quad(lambda w: w * density(w), 0, np.inf)
        assert np.exp(u).mean() == pytest.approx(mean / norm, rel=0.02)

        edges = np.linspace(0.0, 2.5, 11)
        counts, _ = np.histogram(np.exp(u), bins=edges)
        expected = np.array([integrate.quad(density, lo, hi)[0] for lo, hi in zip(edges[:-1], edges[1:])]) / norm
        np.testing.assert_allclose(counts / n, expected, atol=0.05 * expected.max())

    @pytest.mark.parametrize('start', ['zero', 'mode'])
    def test_large_distance_row(self, start):
        """v_dist 约为 1e4 的观测：后验集中在 w ≈ 0.01 附近"""
        alpha, d, v = 1.5, 1, 1e4
        n = 5000
        v_dist = np.full(n, v)
        log_density = _log_w_posterior(v_dist, np.zeros(n), d, alpha, 1.0)
        grid = np.linspace(-12.0, 2.0, 40_001)
        log_grid = log_density(grid, np.zeros(grid.size, dtype=int))
        weights = np.exp(log_grid - log_grid.max())
        expected = np.sum(weights * np.exp(grid)) / np.sum(weights)

        x0 = np.zeros(n) if start == 'zero' else _log_w_start(v_dist, d, alpha)
        u = SliceSampler(log_density, SliceConfig()).sample(x0, np.random.default_rng(10)).ravel()
        assert np.exp(u).mean() == pytest.approx(expected, rel=0.03)


class TestStartingPoint:
    @pytest.mark.parametrize('v', [0.0, 1.0, 1e4, 1e8])
    @pytest.mark.parametrize('alpha, d', [(1.5, 1), (0.5, 3)])
    def test_solves_stationarity(self, v, alpha, d):
        u = _log_w_start(np.array([v]), d, alpha)[0]
        gradient = d + alpha - alpha * math.exp(alpha * u) - v * math.exp(2.0 * u)
        assert abs(gradient) < 1e-8 * (d + alpha)

    def test_moves_left_with_distance(self):
        u = _log_w_start(np.array([0.1, 10.0, 1e3, 1e6]), 2, 1.5)
        assert np.all(np.diff(u) < 0)
