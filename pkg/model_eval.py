"""模型评价模块

本模块提供模型选择与聚类质量指标。

主要功能：
- bic：贝叶斯信息准则 −2·loglik + N_free·log n
- adjusted_rand_index：基于列联表的调整兰德指数
- classify：按后验概率 τ 的最大值给出硬标签
- loglik：混合模型在数据上的对数似然
"""

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import logsumexp

from config import FitConfig
from exceptions import DomainError, InputError
from seeding import substream
from ssg_density import McPool, MixtureModel, component_log_densities

logger = logging.getLogger('ssgmix.model_eval')


@dataclass(eq=False)
class Partition:
    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels).reshape(-1)
        if self.labels.size == 0:
            raise InputError("标签序列为空")
        if not np.issubdtype(self.labels.dtype, np.integer):
            raise InputError("标签必须是整数")

    def __len__(self) -> int:
        return self.labels.size


LabelsLike = Union[Partition, np.ndarray, list]


def n_free_parameters(k: int, d: int) -> int:
    """每个成分 α(1) + μ(d) + λ(d) + Σ(d(d+1)/2)，外加 K−1 个权重"""
    return k * (1 + 2 * d + d * (d + 1) // 2) + (k - 1)


def bic(loglik: float, n: float, k: int, d: int) -> float:
    if not n > 1:
        raise DomainError(f"BIC 要求 n > 1，当前 n={n}")
    return -2.0 * loglik + n_free_parameters(k, d) * math.log(n)


def _pairs(counts: np.ndarray) -> float:
    counts = counts.astype(float)
    return float(np.sum(counts * (counts - 1.0) / 2.0))


def adjusted_rand_index(a: LabelsLike, b: LabelsLike) -> float:
    """Hubert–Arabie 调整兰德指数；期望指数等于最大指数时返回0"""
    a = a if isinstance(a, Partition) else Partition(a)
    b = b if isinstance(b, Partition) else Partition(b)
    if len(a) != len(b):
        raise InputError(f"两组标签长度不一致: {len(a)} != {len(b)}")
    _, rows = np.unique(a.labels, return_inverse=True)
    _, cols = np.unique(b.labels, return_inverse=True)
    table = np.zeros((rows.max() + 1, cols.max() + 1), dtype=np.int64)
    np.add.at(table, (rows, cols), 1)

    index = _pairs(table)
    sum_rows = _pairs(table.sum(axis=1))
    sum_cols = _pairs(table.sum(axis=0))
    expected = sum_rows * sum_cols / _pairs(np.array([len(a)]))
    maximum = 0.5 * (sum_rows + sum_cols)
    if maximum == expected:
        return 0.0
    return (index - expected) / (maximum - expected)


def _log_weighted_densities(data: np.ndarray, model: MixtureModel, cfg: FitConfig, stream: str) -> np.ndarray:
    # 第 k 个成分使用子流 stream@k
    pools = [McPool.draw(c.alpha, cfg.n_mc, substream(cfg.seed, stream, k), f'{stream}@{k}')
             for k, c in enumerate(model.components)]
    return component_log_densities(data, model, pools, cfg.series)


def classify(data: np.ndarray, model: MixtureModel, cfg: FitConfig = None) -> Partition:
    """labels[i] = argmax_k τ_ik（1..K），并列时取最小的 k"""
    cfg = cfg or FitConfig()
    log_dens = _log_weighted_densities(np.asarray(data, dtype=float), model, cfg, 'classify')
    labels = np.argmax(log_dens, axis=1) + 1
    return Partition(labels)


def loglik(data: np.ndarray, model: MixtureModel, cfg: FitConfig = None) -> float:
    """Σ_i log Σ_k ω_k f_Y(y_i|Θ_k)"""
    cfg = cfg or FitConfig()
    log_dens = _log_weighted_densities(np.asarray(data, dtype=float), model, cfg, 'loglik')
    return float(np.sum(logsumexp(log_dens, axis=1)))
