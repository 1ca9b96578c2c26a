"""配置模块

本模块定义拟合算法的全部常数（级数项数、蒙特卡洛样本量、CM步重复次数、
停止准则阈值、迭代上限、尾指数边界、切片采样参数、随机种子），
并支持从环境变量读取默认值。

核心类：
- SeriesConfig：级数展开与蒙特卡洛近似的规模
- SliceConfig：切片采样器的调节参数
- FitConfig：EM/ECM拟合的全部配置
"""

from typing import Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from env_loader import get_env_float, get_env_int

__version__ = "0.1.0"

DEFAULT_MIN_ITER = 30


class SeriesConfig(BaseModel):
    """级数项数与蒙特卡洛样本量"""
    n_terms: int = Field(80, ge=1)
    n_mc: int = Field(3000, ge=1)


class SliceConfig(BaseModel):
    width: float = Field(1.0, gt=0)
    burn_in: int = Field(50, ge=0)
    kept: int = Field(1, ge=1)
    max_doublings: int = Field(50, ge=1)
    max_shrinks: int = Field(200, ge=1)


class FitConfig(BaseModel):
    """EM/ECM算法配置

    默认值：级数项数80、蒙特卡洛样本量3000、CM步重复5次、停止阈值0.10。
    """
    n_terms: int = Field(80, ge=1)
    n_mc: int = Field(3000, ge=1)
    m_repeats: int = Field(5, ge=1)
    eps: float = Field(0.10, gt=0)
    max_iter: int = Field(500, ge=1)
    # 未给出时取 min(30, max_iter)
    min_iter: Optional[int] = Field(None, ge=1)
    check_start: int = Field(20, ge=20)
    window: int = Field(20, ge=1)
    alpha_bounds: Tuple[float, float] = (0.3, 1.99)
    alpha_init: float = 1.7
    slice: SliceConfig = Field(default_factory=SliceConfig)
    seed: int = Field(0, ge=0)
    threads: int = Field(1, ge=1)
    progress: bool = False

    @field_validator('alpha_bounds')
    @classmethod
    def _check_bounds(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        lo, hi = value
        if not (0.0 < lo < hi < 2.0):
            raise ValueError(f"alpha_bounds 必须满足 0 < lo < hi < 2，当前为 {value}")
        return value

    @model_validator(mode='after')
    def _check_iterations(self) -> 'FitConfig':
        if self.min_iter is None:
            self.min_iter = min(DEFAULT_MIN_ITER, self.max_iter)
        if self.min_iter > self.max_iter:
            raise ValueError("min_iter 不能大于 max_iter")
        lo, hi = self.alpha_bounds
        if not (lo <= self.alpha_init <= hi):
            raise ValueError("alpha_init 必须位于 alpha_bounds 之内")
        return self

    @property
    def series(self) -> SeriesConfig:
        return SeriesConfig(n_terms=self.n_terms, n_mc=self.n_mc)

    @classmethod
    def from_env(cls, **overrides) -> 'FitConfig':
        """从 SSGMIX_* 环境变量读取默认值，显式参数优先"""
        values = {
            'n_mc': get_env_int('SSGMIX_N_MC', 3000),
            'n_terms': get_env_int('SSGMIX_N_TERMS', 80),
            'm_repeats': get_env_int('SSGMIX_M_REPEATS', 5),
            'eps': get_env_float('SSGMIX_EPS', 0.10),
            'max_iter': get_env_int('SSGMIX_MAX_ITER', 500),
            'seed': get_env_int('SSGMIX_SEED', 0),
            'threads': get_env_int('SSGMIX_THREADS', 1),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)
