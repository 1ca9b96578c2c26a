"""正稳定分布模块

本模块实现SSG分布中的混合变量 P ~ S(α/2, 1, (cos(πα/4))^{2/α}, 0)，
其拉普拉斯变换为 E[exp(-sP)] = exp(-s^{α/2})。

主要功能：
- 级数密度：截断到 𝒩 项的交错级数，在收敛区域内使用
- 精确抽样：Kanter 表示（均匀角 + 指数变量）
- 上尾概率：基于抽样的蒙特卡洛估计
- 收敛阈值：2L^{2/α}，L 为 Γ 函数比值（对数空间计算）

核心类：
PositiveStableDist - 由父SSG分布的尾指数 α ∈ (0, 2) 确定的正稳定分布
SeriesFamily - 收敛阈值所属的级数族
"""

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Tuple, Union

import numpy as np
from scipy.special import gammaln

from config import SeriesConfig
from exceptions import DomainError, SeriesRegionError
from seeding import SeedLike, as_generator, substream

ArrayLike = Union[float, np.ndarray]

# 截断级数的最后一项超过部分和的该比例时视为未收敛
TAIL_TOLERANCE = 0.10

# 上尾概率表的默认网格
TAIL_TABLE_ALPHAS = (0.5, 0.8, 1.2, 1.5, 1.8, 1.9, 1.95)
TAIL_TABLE_POINTS = (2.0, 5.0, 10.0, 20.0, 100.0)


@dataclass(frozen=True)
class PositiveStableDist:
    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 2.0):
            raise DomainError(f"正稳定分布要求 0 < alpha < 2，当前 alpha={self.alpha}")

    @property
    def index(self) -> float:
        """正稳定变量自身的稳定指数 α/2"""
        return self.alpha / 2.0

    @property
    def scale(self) -> float:
        return math.cos(math.pi * self.alpha / 4.0) ** (2.0 / self.alpha)


class SeriesFamily(IntEnum):
    """收敛阈值所属的级数族

    DENSITY 对应 I(0)（L_{10}），INV_P 对应 I(1) 与 𝒥₂（L_{11} = L₃），
    CROSS 对应 𝒥₁（L₂），STABLE 对应一元正稳定密度本身。
    """
    DENSITY = 0
    INV_P = 1
    CROSS = 2
    STABLE = 3


# 各族在 Γ((d + jα + shift)/2) 中的平移量
_FAMILY_SHIFT = {
    SeriesFamily.DENSITY: 0.0,
    SeriesFamily.INV_P: 2.0,
    SeriesFamily.CROSS: 1.0,
}


def _log_step_ratio(j: np.ndarray, alpha: float) -> np.ndarray:
    """log[Γ(jα/2 + 1 + α/2) / (Γ(jα/2 + 1)(j + 1))]"""
    a = alpha / 2.0
    return gammaln(j * a + 1.0 + a) - gammaln(j * a + 1.0) - np.log(j + 1.0)


def log_L(family: Union[int, SeriesFamily], d: int, alpha: float, j: ArrayLike) -> ArrayLike:
    """收敛条件中的 log L，j 可以是数组"""
    family = SeriesFamily(family)
    j = np.asarray(j, dtype=float)
    step = _log_step_ratio(j, alpha)
    if family is SeriesFamily.STABLE:
        return step
    x = (d + j * alpha + _FAMILY_SHIFT[family]) / 2.0
    return step + gammaln(x + alpha / 2.0) - gammaln(x)


def series_threshold(i: Union[int, SeriesFamily], d: int, dist: PositiveStableDist,
                     cfg: SeriesConfig = None) -> float:
    """级数收敛阈值 2L^{2/α}

    多元族在 j = cfg.n_terms 处取 L；一元族取 j = 1..n_terms 上 L 的最大值，
    保证从第一项起各项递减。
    """
    cfg = cfg or SeriesConfig()
    if d < 1:
        raise DomainError(f"维数必须 >= 1，当前 d={d}")
    family = SeriesFamily(i)
    if family is SeriesFamily.STABLE:
        log_l = float(np.max(log_L(family, d, dist.alpha, np.arange(1, cfg.n_terms + 1))))
    else:
        log_l = float(log_L(family, d, dist.alpha, cfg.n_terms))
    return 2.0 * math.exp(2.0 / dist.alpha * log_l)


def series_log_coefficients(alpha: float, n_terms: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """级数系数 (-1)^{j-1} Γ(jα/2+1) sin(jπα/2) / Γ(j+1) 的对数模与符号

    Returns:
        (j, log|c_j|, sign_j)，sin 为零的项符号为 0
    """
    j = np.arange(1, n_terms + 1, dtype=float)
    a = alpha / 2.0
    sine = np.sin(math.pi * np.mod(j * a, 2.0))
    sine[np.abs(sine) < 1e-12] = 0.0
    sign = np.where(j % 2 == 1, 1.0, -1.0) * np.sign(sine)
    with np.errstate(divide='ignore'):
        log_mag = gammaln(j * a + 1.0) - gammaln(j + 1.0) + np.log(np.abs(sine))
    log_mag[sign == 0] = -np.inf
    return j, log_mag, sign


def sum_log_series(log_terms: np.ndarray, signs: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """逐行对 sign * exp(log_terms) 做补偿求和

    Args:
        log_terms: 形状 (n, J) 的项的对数模
        signs: 形状 (J,) 或 (n, J) 的符号

    Returns:
        (log|和|, 和是否为正, log|最后一个非零项|)
    """
    log_terms = np.atleast_2d(log_terms)
    signs = np.broadcast_to(signs, log_terms.shape)
    n = log_terms.shape[0]
    log_value = np.full(n, -np.inf)
    positive = np.zeros(n, dtype=bool)
    log_tail = np.full(n, -np.inf)
    for row in range(n):
        active = (signs[row] != 0) & np.isfinite(log_terms[row])
        if not np.any(active):
            continue
        logs = log_terms[row][active]
        top = logs.max()
        total = math.fsum((signs[row][active] * np.exp(logs - top)).tolist())
        log_tail[row] = logs[-1]
        if total > 0:
            positive[row] = True
            log_value[row] = top + math.log(total)
        elif total < 0:
            log_value[row] = top + math.log(-total)
    return log_value, positive, log_tail


def positive_stable_pdf(p: ArrayLike, dist: PositiveStableDist, cfg: SeriesConfig = None) -> ArrayLike:
    """正稳定密度的级数近似

    Raises:
        DomainError: p <= 0
        SeriesRegionError: p 低于收敛阈值或截断误差过大
    """
    cfg = cfg or SeriesConfig()
    scalar = np.ndim(p) == 0
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if np.any(~(p > 0)):
        raise DomainError("正稳定密度只定义在 p > 0 上")
    threshold = series_threshold(SeriesFamily.STABLE, 1, dist, cfg)
    if np.any(p <= threshold):
        raise SeriesRegionError(f"p={p.min():.6g} 不在级数收敛区域 p > {threshold:.6g} 内", threshold)

    j, log_c, sign = series_log_coefficients(dist.alpha, cfg.n_terms)
    log_terms = log_c[None, :] - (j[None, :] * dist.index + 1.0) * np.log(p)[:, None]
    log_value, positive, log_tail = sum_log_series(log_terms, sign)
    if np.any(log_tail > log_value + math.log(TAIL_TOLERANCE)):
        raise SeriesRegionError("截断级数的最后一项超过部分和的10%", threshold)
    # 交错级数在边界附近可能略小于0
    density = np.where(positive, np.exp(log_value) / math.pi, 0.0)
    return float(density[0]) if scalar else density


def positive_stable_sample(dist: PositiveStableDist, n: int, seed: SeedLike = None) -> np.ndarray:
    """Kanter 表示的精确抽样

    P = sin(aU) / sin(U)^{1/a} * (sin((1-a)U) / E)^{(1-a)/a}，a = α/2，
    U ~ Uniform(0, π)，E ~ Exp(1)。α = 1 时即 Lévy(0, 1/2)。
    """
    if n < 1:
        raise DomainError(f"抽样数量必须 >= 1，当前 n={n}")
    rng = as_generator(seed)
    a = dist.index
    u = rng.uniform(0.0, math.pi, size=n)
    e = rng.standard_exponential(size=n)
    # 对数空间计算，避免 a 较小时的溢出
    log_p = (np.log(np.sin(a * u)) - np.log(np.sin(u)) / a
             + (1.0 - a) / a * (np.log(np.sin((1.0 - a) * u)) - np.log(e)))
    return np.exp(log_p)


def positive_stable_upper_tail(p: float, dist: PositiveStableDist, n_draws: int = 1_000_000,
                               seed: SeedLike = None) -> float:
    """Pr(P > p) 的蒙特卡洛估计，标准误不超过 (4 n_draws)^{-1/2}"""
    if not p > 0:
        raise DomainError("上尾概率要求 p > 0")
    draws = positive_stable_sample(dist, n_draws, seed)
    return float(np.mean(draws > p))


def upper_tail_table(alphas: Iterable[float] = TAIL_TABLE_ALPHAS, points: Iterable[float] = TAIL_TABLE_POINTS,
                     n_draws: int = 1_000_000, seed: int = 0) -> np.ndarray:
    """上尾概率表：行对应 points，列对应 alphas，每个 α 共用一组抽样"""
    alphas = list(alphas)
    points = np.asarray(list(points), dtype=float)
    table = np.empty((points.size, len(alphas)))
    for col, alpha in enumerate(alphas):
        draws = positive_stable_sample(PositiveStableDist(alpha), n_draws, substream(seed, 'tail', col))
        table[:, col] = (draws[None, :] > points[:, None]).mean(axis=1)
    return table
