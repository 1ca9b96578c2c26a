import pytest
from pydantic import ValidationError

from config import DEFAULT_MIN_ITER, FitConfig
from exceptions import InputError


class TestFitConfig:
    def test_defaults(self):
        cfg = FitConfig()
        assert cfg.max_iter == 500
        assert cfg.min_iter == DEFAULT_MIN_ITER == 30

    @pytest.mark.parametrize('max_iter', [1, 3, 10, 29])
    def test_short_runs_lower_min_iter(self, max_iter):
        assert FitConfig(max_iter=max_iter).min_iter == max_iter

    def test_explicit_min_iter_kept(self):
        assert FitConfig(max_iter=100, min_iter=5).min_iter == 5

    def test_min_iter_above_max_iter(self):
        with pytest.raises(ValidationError):
            FitConfig(max_iter=5, min_iter=6)

    def test_alpha_init_outside_bounds(self):
        with pytest.raises(ValidationError):
            FitConfig(alpha_bounds=(0.5, 1.5), alpha_init=1.7)


class TestFromEnv:
    def test_overrides_take_precedence(self, monkeypatch):
        monkeypatch.setenv('SSGMIX_MAX_ITER', '200')
        cfg = FitConfig.from_env(max_iter=3)
        assert cfg.max_iter == 3
        assert cfg.min_iter == 3

    def test_reads_environment(self, monkeypatch):
        monkeypatch.setenv('SSGMIX_N_MC', '1234')
        monkeypatch.setenv('SSGMIX_MAX_ITER', '12')
        cfg = FitConfig.from_env()
        assert cfg.n_mc == 1234
        assert cfg.min_iter == 12

    def test_none_override_ignored(self, monkeypatch):
        monkeypatch.setenv('SSGMIX_SEED', '7')
        assert FitConfig.from_env(seed=None).seed == 7

    def test_bad_integer(self, monkeypatch):
        monkeypatch.setenv('SSGMIX_N_TERMS', 'eighty')
        with pytest.raises(InputError):
            FitConfig.from_env()
