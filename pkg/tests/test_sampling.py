import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import gamma

from exceptions import DomainError
from sampling import (exponential_sample, sample_hierarchy_v, sample_mixture, sample_ssg, sim_study_model,
                      weibull_sample)
from ssg_density import ComponentParams, MixtureModel


def ks_critical_value(n: int, m: int, level: float = 0.01) -> float:
    c = math.sqrt(-0.5 * math.log(level / 2))
    return c * math.sqrt((n + m) / (n * m))


class TestSampleSsg:
    def test_shape_and_finiteness(self, skewed_component):
        y = sample_ssg(500, skewed_component, seed=1)
        assert y.shape == (500, 2)
        assert np.all(np.isfinite(y))

    def test_rejects_empty_sample(self, skewed_component):
        with pytest.raises(DomainError):
            sample_ssg(0, skewed_component)

    def test_near_gaussian_mean(self):
        theta = ComponentParams(alpha=1.99, mu=[1.0, -2.0], sigma=[[1.0, 0.3], [0.3, 1.0]], lam=[0.0, 0.0])
        y = sample_ssg(100_000, theta, seed=2)
        np.testing.assert_allclose(y.mean(axis=0), theta.mu, atol=0.05)

    def test_skewed_mean(self):
        theta = ComponentParams(alpha=1.99, mu=[0.0, 1.0], sigma=np.eye(2), lam=[1.0, -0.5])
        y = sample_ssg(100_000, theta, seed=3)
        a = theta.alpha / 2
        sqrt_p_mean = gamma(1 - 0.5 / a) / gamma(0.5)
        np.testing.assert_allclose(y.mean(axis=0), theta.mu + theta.lam * math.sqrt(2 / math.pi) * sqrt_p_mean,
                                   atol=0.05)

    def test_heavy_tail(self):
        theta = ComponentParams(alpha=1.5, mu=[0.0, 0.0], sigma=np.eye(2), lam=[0.0, 0.0])
        norms = np.linalg.norm(sample_ssg(100_000, theta, seed=4), axis=1)
        assert np.mean(norms > 50 * np.median(norms)) > 0

    def test_gaussian_component(self):
        theta = ComponentParams(alpha=2.0, mu=[0.0], sigma=[[4.0]], lam=[0.0])
        y = sample_ssg(50_000, theta, seed=5)
        assert y.std() == pytest.approx(2.0, rel=0.02)


class TestSampleMixture:
    def test_deterministic(self, sim_model):
        first = sample_mixture(300, sim_model, seed=7)
        second = sample_mixture(300, sim_model, seed=7)
        np.testing.assert_array_equal(first.data, second.data)
        np.testing.assert_array_equal(first.labels, second.labels)

    def test_single_component_labels(self, skewed_component):
        sample = sample_mixture(50, MixtureModel(weights=[1.0], components=[skewed_component]), seed=1)
        assert np.all(sample.labels == 1)

    def test_simulation_study_label_counts(self, sim_model):
        sample = sample_mixture(400, sim_model, seed=1)
        assert set(np.unique(sample.labels)) <= {1, 2}
        assert abs(np.sum(sample.labels == 1) - 100) <= 3 * math.sqrt(400 * 0.25 * 0.75)

    def test_simulation_study_preset(self):
        model = sim_study_model()
        np.testing.assert_allclose(model.weights, [0.25, 0.75])
        np.testing.assert_allclose(model.components[0].lam, [5.0, 1.0])
        np.testing.assert_allclose(model.components[1].sigma, [[1.0, 0.5], [0.5, 1.0]])
        assert [c.alpha for c in model.components] == [1.5, 1.5]


class TestHierarchy:
    def test_weibull_mean(self):
        alpha = 1.5
        assert weibull_sample(alpha, 200_000, seed=1).mean() == pytest.approx(gamma(1 + 1 / alpha), rel=0.01)

    def test_exponential_mean(self):
        assert exponential_sample(200_000, seed=2).mean() == pytest.approx(1.0, rel=0.01)

    @pytest.mark.slow
    @pytest.mark.parametrize('alpha', [0.8, 1.5, 1.9])
    def test_constructions_agree_in_distribution(self, alpha):
        theta = ComponentParams(alpha=alpha, mu=[1.0, -1.0], sigma=[[1.0, 0.4], [0.4, 1.5]], lam=[1.5, -0.5])
        n = 100_000
        direct, hierarchy = sample_hierarchy_v(n, theta, seed=12)
        critical = ks_critical_value(n, n)
        for column in range(2):
            assert stats.ks_2samp(direct[:, column], hierarchy[:, column]).statistic < critical

    def test_symmetric_when_unskewed(self):
        theta = ComponentParams(alpha=1.99, mu=[0.0, 0.0], sigma=np.eye(2), lam=[0.0, 0.0])
        direct, hierarchy = sample_hierarchy_v(50_000, theta, seed=13)
        for sample in (direct, hierarchy):
            # V 的矩不存在，用分位数检查对称性
            q_low, q_mid, q_high = np.quantile(sample, [0.1, 0.5, 0.9], axis=0)
            np.testing.assert_allclose(q_mid, 0.0, atol=0.03)
            np.testing.assert_allclose(q_high, -q_low, rtol=0.05)
