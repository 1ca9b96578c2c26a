import math

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

import model_eval
from config import FitConfig
from exceptions import DomainError, InputError
from model_eval import Partition, adjusted_rand_index, bic, classify, loglik, n_free_parameters
from sampling import sample_mixture
from seeding import substream
from ssg_density import ComponentParams, McPool, MixtureModel, component_geometry, ssg_log_pdf


class TestBic:
    def test_unit_case(self):
        assert n_free_parameters(1, 1) == 4
        assert bic(0.0, math.e, 1, 1) == pytest.approx(4.0)

    def test_two_components_in_two_dimensions(self):
        assert n_free_parameters(2, 2) == 17

    def test_fewer_components_win_on_small_gain(self):
        n = 400
        threshold = (n_free_parameters(3, 2) - n_free_parameters(2, 2)) / 2 * math.log(n)
        assert bic(-1000.0, n, 2, 2) < bic(-1000.0 + 0.9 * threshold, n, 3, 2)
        assert bic(-1000.0, n, 2, 2) > bic(-1000.0 + 1.1 * threshold, n, 3, 2)

    def test_requires_more_than_one_observation(self):
        with pytest.raises(DomainError):
            bic(0.0, 1, 1, 1)


class TestAdjustedRandIndex:
    def test_identical(self):
        assert adjusted_rand_index([1, 1, 2, 2, 3], [1, 1, 2, 2, 3]) == 1.0

    def test_relabeling_invariance(self):
        assert adjusted_rand_index([1, 1, 2, 2, 3], [7, 7, 4, 4, 9]) == pytest.approx(1.0)

    def test_hand_case(self):
        assert adjusted_rand_index([1, 1, 2, 2], [1, 2, 1, 2]) == pytest.approx(-0.5)

    def test_degenerate_partitions(self):
        assert adjusted_rand_index(np.ones(6, dtype=int), np.arange(1, 7)) == 0.0

    def test_symmetric_and_matches_reference(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            a = rng.integers(1, 4, size=60)
            b = rng.integers(1, 5, size=60)
            assert adjusted_rand_index(a, b) == pytest.approx(adjusted_rand_index(b, a))
            assert adjusted_rand_index(a, b) == pytest.approx(adjusted_rand_score(a, b))

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            adjusted_rand_index([1, 2, 3], [1, 2])

    def test_partition_validation(self):
        with pytest.raises(InputError):
            Partition([])
        with pytest.raises(InputError):
            Partition([1.5, 2.0])


class TestClassify:
    def test_single_component(self, skewed_component):
        data = np.random.default_rng(1).standard_normal((30, 2))
        partition = classify(data, MixtureModel([1.0], [skewed_component]), FitConfig(n_mc=300))
        assert np.all(partition.labels == 1)

    def test_tie_goes_to_first_component(self, monkeypatch, skewed_component):
        # 两列对数密度完全相同时取编号最小的成分
        def equal_columns(y, model, pools, cfg):
            return np.zeros((len(y), model.k))

        monkeypatch.setattr(model_eval, 'component_log_densities', equal_columns)
        model = MixtureModel([0.5, 0.5], [skewed_component, skewed_component])
        assert list(classify(np.zeros((3, 2)), model, FitConfig(n_mc=10)).labels) == [1, 1, 1]

    def test_recovers_separated_components(self):
        far = MixtureModel([0.5, 0.5], [
            ComponentParams(alpha=1.8, mu=[10.0, 10.0], sigma=np.eye(2), lam=[0.5, 0.5]),
            ComponentParams(alpha=1.8, mu=[-10.0, -10.0], sigma=np.eye(2), lam=[0.5, 0.5]),
        ])
        sample = sample_mixture(200, far, seed=4)
        labels = classify(sample.data, far, FitConfig(n_mc=500)).labels
        assert adjusted_rand_index(labels, sample.labels) > 0.9

    def test_permuting_components_permutes_labels(self, sim_model):
        sample = sample_mixture(100, sim_model, seed=5)
        swapped = MixtureModel(sim_model.weights[::-1], sim_model.components[::-1])
        cfg = FitConfig(n_mc=500)
        original = classify(sample.data, sim_model, cfg).labels
        permuted = classify(sample.data, swapped, cfg).labels
        # 交换后各成分使用不同的子流，只有边界附近的点可能改变
        assert np.mean(permuted == 3 - original) >= 0.9


class TestLoglik:
    def test_single_component_sum(self, skewed_component):
        data = np.random.default_rng(2).standard_normal((25, 2))
        cfg = FitConfig(n_mc=400, seed=9)
        pool = McPool.draw(1.5, 400, substream(9, 'loglik', 0))
        expected = np.sum(ssg_log_pdf(data, skewed_component, component_geometry(skewed_component), pool,
                                      cfg.series))
        assert loglik(data, MixtureModel([1.0], [skewed_component]), cfg) == pytest.approx(expected, rel=1e-12)
