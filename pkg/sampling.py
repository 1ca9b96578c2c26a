"""SSG抽样模块

本模块通过随机表示 Y = μ + √P λ|Z₀| + √P Σ^{1/2} Z₁ 生成SSG随机向量
与带真实标签的混合样本，并提供Weibull层次表示下 V = (Y−μ)/√E 的两种构造，
用于分布一致性检验。

主要功能：
- sample_ssg：单个成分的独立抽样
- sample_mixture：按权重多项抽取标签后逐成分抽样
- sample_hierarchy_v：V 的两种构造（指数除法与Weibull层次）
- sim_study_model：两成分模拟研究的参数预设
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from exceptions import DomainError
from seeding import SeedLike, as_generator
from ssg_density import ComponentParams, MixtureModel
from stable_core import positive_stable_sample

logger = logging.getLogger('ssgmix.sampling')


@dataclass(eq=False)
class LabeledSample:
    data: np.ndarray
    labels: np.ndarray
    seed: object = None


def _check_count(n: int) -> None:
    if n < 1:
        raise DomainError(f"样本量必须 >= 1，当前 n={n}")


def _mixing_draws(theta: ComponentParams, n: int, rng: np.random.Generator) -> np.ndarray:
    if theta.stable is None:
        return np.ones(n)
    return positive_stable_sample(theta.stable, n, rng)


def _skew_normal_part(theta: ComponentParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """λ|Z₀| + Σ^{1/2} Z₁（Σ^{1/2} 取Cholesky因子）"""
    chol = np.linalg.cholesky(theta.sigma)
    z0 = np.abs(rng.standard_normal(n))
    z1 = rng.standard_normal((n, theta.d))
    return z0[:, None] * theta.lam[None, :] + z1 @ chol.T


def sample_ssg(n: int, theta: ComponentParams, seed: SeedLike = None) -> np.ndarray:
    """n 个独立的SSG随机向量，返回 n×d 矩阵"""
    _check_count(n)
    rng = as_generator(seed)
    p = _mixing_draws(theta, n, rng)
    return theta.mu[None, :] + np.sqrt(p)[:, None] * _skew_normal_part(theta, n, rng)


def sample_mixture(n: int, model: MixtureModel, seed: SeedLike = None) -> LabeledSample:
    """先按权重抽取标签（1..K），再从对应成分抽样"""
    _check_count(n)
    rng = as_generator(seed)
    labels = rng.choice(model.k, size=n, p=model.weights) + 1
    data = np.empty((n, model.d))
    for k, theta in enumerate(model.components, start=1):
        rows = np.flatnonzero(labels == k)
        if rows.size:
            data[rows] = sample_ssg(rows.size, theta, rng)
    logger.debug("混合抽样完成: n=%d, 各成分计数=%s", n, np.bincount(labels, minlength=model.k + 1)[1:])
    return LabeledSample(data=data, labels=labels, seed=seed)


def weibull_sample(alpha: float, n: int, seed: SeedLike = None) -> np.ndarray:
    """逆变换抽样 w = (−log U)^{1/α}"""
    rng = as_generator(seed)
    u = rng.uniform(size=n)
    return (-np.log(u)) ** (1.0 / alpha)


def exponential_sample(n: int, seed: SeedLike = None) -> np.ndarray:
    """逆变换抽样 e = −log U"""
    rng = as_generator(seed)
    return -np.log(rng.uniform(size=n))


def sample_hierarchy_v(n: int, theta: ComponentParams, seed: SeedLike = None) -> Tuple[np.ndarray, np.ndarray]:
    """V = (Y−μ)/√E 的两种构造

    Returns:
        (由SSG样本除以 √E 得到的 V, 由 W ~ Weibull(α)、T = |Z₀|/W、V = λT + Σ^{1/2}Z₁/W 得到的 V)
    """
    _check_count(n)
    rng = as_generator(seed)
    y = sample_ssg(n, theta, rng)
    e = exponential_sample(n, rng)
    v_direct = (y - theta.mu[None, :]) / np.sqrt(e)[:, None]

    w = weibull_sample(theta.alpha, n, rng)
    v_hierarchy = _skew_normal_part(theta, n, rng) / w[:, None]
    return v_direct, v_hierarchy


def sim_study_model() -> MixtureModel:
    """两成分模拟研究的参数"""
    return MixtureModel(
        weights=[0.25, 0.75],
        components=[
            ComponentParams(alpha=1.5, mu=[1.0, 1.0], sigma=[[1.0, -0.5], [-0.5, 1.0]], lam=[5.0, 1.0]),
            ComponentParams(alpha=1.5, mu=[-2.0, -2.0], sigma=[[1.0, 0.5], [0.5, 1.0]], lam=[1.0, 5.0]),
        ],
    )
