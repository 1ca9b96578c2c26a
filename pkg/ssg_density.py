"""SSG密度与条件期望模块

本模块计算偏斜亚高斯稳定（SSG）分布的密度以及E步所需的三个条件期望
E(P⁻¹|y)、E(P⁻¹T|y)、E(P⁻¹T²|y)。每个积分都有两种算法：
- 级数展开：d(y) 超过收敛阈值且截断误差合格时使用
- 蒙特卡洛：对同一组正稳定抽样（McPool）取平均

所有积分都在对数空间中计算，密度低于 1e-300 时取下限值。

核心类：
ComponentParams - 单个成分的参数 (α, μ, Σ, λ)
MixtureModel - 权重与成分列表
ComponentGeometry - 由参数导出的 Ω、Ω⁻¹、δ、log|Σ|、C₀
PointStats - 每个观测的 d(y) 与 m
McPool - 一个成分在一次迭代中共享的正稳定抽样
ComponentMoments - 一次计算得到的对数密度与三个条件期望
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammainc, gammaincc, gammaln, log_ndtr, logsumexp
from scipy.stats import t as student_t

from config import SeriesConfig
from exceptions import DegenerateDensityError, DomainError, SeriesRegionError, SingularMatrixError
from seeding import SeedLike, as_generator, substream
from stable_core import (TAIL_TOLERANCE, PositiveStableDist, SeriesFamily, positive_stable_sample,
                         series_log_coefficients, series_threshold, sum_log_series)

logger = logging.getLogger('ssgmix.ssg_density')

DENSITY_FLOOR = 1e-300
LOG_DENSITY_FLOOR = math.log(DENSITY_FLOOR)
DELTA_MIN = 1e-10
# 蒙特卡洛分支每块处理的行数（n × N 矩阵）
ROW_CHUNK = 512

METHODS = ('auto', 'series', 'mc')

# 积分名称到收敛阈值族的对应关系
INTEGRAL_FAMILY = {
    'I0': SeriesFamily.DENSITY,
    'I1': SeriesFamily.INV_P,
    'J1': SeriesFamily.CROSS,
    'J2': SeriesFamily.INV_P,
}


@dataclass(eq=False)
class ComponentParams:
    alpha: float
    mu: np.ndarray
    sigma: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        self.alpha = float(self.alpha)
        self.mu = np.asarray(self.mu, dtype=float).reshape(-1)
        self.lam = np.asarray(self.lam, dtype=float).reshape(-1)
        d = self.mu.size
        self.sigma = np.asarray(self.sigma, dtype=float).reshape(d, d)
        if not (0.0 < self.alpha <= 2.0):
            raise DomainError(f"尾指数必须位于 (0, 2]，当前 alpha={self.alpha}")
        if self.lam.size != d:
            raise DomainError(f"偏斜向量长度 {self.lam.size} 与维数 {d} 不一致")
        if not (np.all(np.isfinite(self.mu)) and np.all(np.isfinite(self.lam))
                and np.all(np.isfinite(self.sigma))):
            raise DomainError("成分参数包含非有限值")
        scale = max(float(np.max(np.abs(self.sigma))), 1e-300)
        if np.max(np.abs(self.sigma - self.sigma.T)) > 1e-10 * scale:
            raise DomainError("离散矩阵 sigma 不对称")

    @property
    def d(self) -> int:
        return self.mu.size

    @property
    def stable(self) -> Optional[PositiveStableDist]:
        """α = 2 时 P 退化为常数1，返回 None"""
        return PositiveStableDist(self.alpha) if self.alpha < 2.0 else None


@dataclass(eq=False)
class MixtureModel:
    weights: np.ndarray
    components: List[ComponentParams]

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        self.components = list(self.components)
        if len(self.components) < 1:
            raise DomainError("混合模型至少需要一个成分")
        if self.weights.size != len(self.components):
            raise DomainError("权重个数与成分个数不一致")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise DomainError(f"权重必须非负且和为1，当前和为 {self.weights.sum()!r}")
        dims = {c.d for c in self.components}
        if len(dims) != 1:
            raise DomainError("各成分的维数不一致")

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def d(self) -> int:
        return self.components[0].d


@dataclass(frozen=True, eq=False)
class ComponentGeometry:
    omega: np.ndarray
    omega_inv: np.ndarray
    delta: float
    log_det_sigma: float
    log_c0: float

    @property
    def c0(self) -> float:
        return math.exp(self.log_c0)


@dataclass(frozen=True, eq=False)
class PointStats:
    d_y: np.ndarray
    m: np.ndarray


@dataclass(frozen=True, eq=False)
class McPool:
    draws: np.ndarray
    alpha: float
    provenance: str = ''

    @classmethod
    def draw(cls, alpha: float, n_mc: int, seed: SeedLike = None, provenance: str = '') -> 'McPool':
        """为尾指数 alpha 抽取 n_mc 个正稳定变量；alpha = 2 时全部为1"""
        if alpha >= 2.0:
            draws = np.ones(n_mc)
        else:
            draws = positive_stable_sample(PositiveStableDist(alpha), n_mc, as_generator(seed))
        return cls(draws=draws, alpha=float(alpha), provenance=provenance)


@dataclass(frozen=True, eq=False)
class ComponentMoments:
    """一个成分在每个观测上的 log f_Y 与三个条件期望"""
    log_pdf: np.ndarray
    e_inv_p: np.ndarray
    e_inv_p_t: np.ndarray
    e_inv_p_t2: np.ndarray
    series_rows: int = 0


def component_geometry(theta: ComponentParams) -> ComponentGeometry:
    """计算 Ω = Σ + λλᵀ、δ = 1 − λᵀΩ⁻¹λ 与归一化常数 C₀"""
    d = theta.d
    try:
        chol_sigma = np.linalg.cholesky(theta.sigma)
    except np.linalg.LinAlgError as e:
        raise SingularMatrixError("离散矩阵 sigma 不是正定矩阵") from e
    diag = np.diag(chol_sigma)
    if diag.min() <= 1e-12 * diag.max():
        raise SingularMatrixError("离散矩阵 sigma 数值奇异")
    log_det_sigma = 2.0 * float(np.sum(np.log(diag)))

    omega = theta.sigma + np.outer(theta.lam, theta.lam)
    try:
        chol_omega = np.linalg.cholesky(omega)
    except np.linalg.LinAlgError as e:
        raise SingularMatrixError("矩阵 Omega 不是正定矩阵") from e
    inv_chol = np.linalg.solve(chol_omega, np.eye(d))
    omega_inv = inv_chol.T @ inv_chol
    omega_inv = 0.5 * (omega_inv + omega_inv.T)

    # Sherman–Morrison：1 − λᵀΩ⁻¹λ = 1 / (1 + λᵀΣ⁻¹λ)
    z = np.linalg.solve(chol_sigma, theta.lam)
    delta = 1.0 / (1.0 + float(z @ z))
    delta = min(max(delta, DELTA_MIN), 1.0)

    log_c0 = math.log(2.0) - 0.5 * (d + 1) * math.log(2.0 * math.pi) - 0.5 * log_det_sigma
    return ComponentGeometry(omega=omega, omega_inv=omega_inv, delta=delta,
                             log_det_sigma=log_det_sigma, log_c0=log_c0)


def _as_rows(y, d: int) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(y, dtype=float)
    single = arr.ndim == 1
    rows = np.atleast_2d(arr)
    if rows.shape[1] != d:
        raise DomainError(f"观测维数 {rows.shape[1]} 与模型维数 {d} 不一致")
    return rows, single


def point_stats(y, theta: ComponentParams, geom: ComponentGeometry) -> PointStats:
    """d(y) = (y−μ)ᵀΩ⁻¹(y−μ)，m = λᵀΩ⁻¹(y−μ)；y 可以是单个向量或 n×d 矩阵"""
    rows, single = _as_rows(y, theta.d)
    centered = rows - theta.mu
    scaled = centered @ geom.omega_inv
    d_y = np.maximum(np.einsum('ij,ij->i', scaled, centered), 0.0)
    m = scaled @ theta.lam
    if single:
        return PointStats(d_y=d_y[0], m=m[0])
    return PointStats(d_y=d_y, m=m)


def _log_partial_second_moment(nu, b) -> np.ndarray:
    """log ∫_{-∞}^b x² t_ν(x) dx = log{[ν T_ν(b) − b(ν+b²) t_ν(b)] / (ν−2)}"""
    nu, b = np.broadcast_arrays(np.asarray(nu, dtype=float), np.asarray(b, dtype=float))
    head = np.log(nu) + student_t.logcdf(b, nu)
    with np.errstate(divide='ignore', invalid='ignore'):
        tail = np.log(np.abs(b)) + np.log(nu + b * b) + student_t.logpdf(b, nu)
        # b < 0 时两项同号；b >= 0 时第二项严格小于第一项
        value = np.where(b < 0, np.logaddexp(head, tail),
                         head + np.log1p(-np.exp(np.minimum(tail - head, 0.0))))
    return value - np.log(nu - 2.0)


def truncated_t_second_moment(nu: float, b: float) -> float:
    """截断t分布 tt_ν(−∞, b) 的二阶矩

    M₂ = ν/(ν−2) − b(ν+b²) t_ν(b) / ((ν−2) T_ν(b))
    """
    if not nu > 2:
        raise DomainError(f"二阶矩要求自由度 nu > 2，当前 nu={nu}")
    if b == math.inf:
        return nu / (nu - 2.0)
    if math.isnan(b) or b == -math.inf:
        raise DomainError(f"截断点 b={b} 无效")
    log_partial = float(_log_partial_second_moment(nu, b))
    return math.exp(log_partial - float(student_t.logcdf(b, nu)))


def _series_log_terms(key: str, d_y: np.ndarray, m: np.ndarray, geom: ComponentGeometry,
                      d: int, alpha: float, n_terms: int):
    """返回 (项的对数模 n×J, 每行的对数前因子, 符号 J)"""
    j, log_c, sign = series_log_coefficients(alpha, n_terms)
    delta = geom.delta
    dy = d_y[:, None]
    mm = m[:, None]
    with np.errstate(divide='ignore', invalid='ignore'):
        if key in ('I0', 'I1'):
            nu = d + j * alpha + (2.0 if key == 'I1' else 0.0)
            b = mm * np.sqrt(nu / (dy * delta))
            logs = log_c + gammaln(nu / 2.0) - nu / 2.0 * np.log(dy / 2.0) + student_t.logcdf(b, nu)
            pre = np.full(d_y.size, geom.log_c0 + 0.5 * math.log(2.0 * delta / math.pi))
        elif key == 'J1':
            kappa = (d + 1.0 + j * alpha) / 2.0
            big_b = d_y / 2.0 + m ** 2 / (2.0 * delta)
            logs = log_c + gammaln(kappa) - kappa * np.log(big_b)[:, None]
            pre = np.full(d_y.size, geom.log_c0 + math.log(delta) - math.log(math.pi))
        else:
            nu = d + 2.0 + j * alpha
            b = mm * np.sqrt(nu / (dy * delta))
            logs = (log_c - (nu + 1.0) / 2.0 * np.log(dy / 2.0) + gammaln(nu / 2.0) - np.log(nu)
                    + _log_partial_second_moment(nu, b))
            pre = geom.log_c0 + 1.5 * np.log(d_y * delta) - 0.5 * math.log(math.pi)
    return logs, pre, sign


def _series_log_integrals(keys: Sequence[str], d_y: np.ndarray, m: np.ndarray, geom: ComponentGeometry,
                          d: int, alpha: float, n_terms: int) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
    """级数分支：返回各积分的对数值与逐行的收敛标志"""
    ok = d_y > 0
    values = {}
    for key in keys:
        logs, pre, sign = _series_log_terms(key, d_y, m, geom, d, alpha, n_terms)
        log_sum, positive, log_tail = sum_log_series(logs, sign)
        ok &= positive & (log_tail <= log_sum + math.log(TAIL_TOLERANCE))
        values[key] = pre + log_sum
    return values, ok


def _mc_log_integrals(keys: Sequence[str], d_y: np.ndarray, m: np.ndarray, geom: ComponentGeometry,
                      d: int, pool: McPool) -> Dict[str, np.ndarray]:
    """蒙特卡洛分支：所有积分共用同一组抽样"""
    delta = geom.delta
    p = pool.draws[None, :]
    log_p = np.log(p)
    log_n = math.log(pool.draws.size)
    values = {key: np.empty(d_y.size) for key in keys}
    for start in range(0, d_y.size, ROW_CHUNK):
        rows = slice(start, start + ROW_CHUNK)
        dy = d_y[rows, None]
        mm = m[rows, None]
        base = -dy / (2.0 * p)
        for key in keys:
            with np.errstate(divide='ignore'):
                if key in ('I0', 'I1'):
                    i = 1.0 if key == 'I1' else 0.0
                    terms = (-d / 2.0 - i) * log_p + base + log_ndtr(mm / np.sqrt(delta * p))
                    pre = geom.log_c0 + 0.5 * math.log(2.0 * math.pi * delta)
                elif key == 'J1':
                    terms = -(d + 1.0) / 2.0 * log_p + base - mm ** 2 / (2.0 * delta * p)
                    pre = geom.log_c0 + math.log(delta)
                else:
                    x = mm ** 2 / (2.0 * delta * p)
                    bracket = np.where(mm >= 0, 1.0 + gammainc(1.5, x), gammaincc(1.5, x))
                    terms = -d / 2.0 * log_p + base + np.log(bracket)
                    pre = 0.5 * math.log(2.0) + 1.5 * math.log(delta) + gammaln(1.5) + geom.log_c0
            values[key][rows] = pre + logsumexp(terms, axis=1) - log_n
    return values


def _log_integrals(keys: Sequence[str], y, theta: ComponentParams, geom: ComponentGeometry,
                   pool: Optional[McPool], cfg: SeriesConfig, method: str):
    """按行选择级数或蒙特卡洛分支，同一行的所有积分使用同一分支

    Returns:
        (PointStats, 是否单个观测, {积分名: 对数值}, 使用级数的行数)
    """
    if method not in METHODS:
        raise DomainError(f"未知的计算方法: {method}")
    cfg = cfg or SeriesConfig()
    geom = geom or component_geometry(theta)
    rows, single = _as_rows(y, theta.d)
    stats = point_stats(rows, theta, geom)
    n, d = rows.shape
    values = {key: np.empty(n) for key in keys}
    use_series = np.zeros(n, dtype=bool)

    dist = theta.stable
    if method != 'mc' and dist is not None:
        threshold = max(series_threshold(INTEGRAL_FAMILY[key], d, dist, cfg) for key in keys)
        candidates = np.flatnonzero(stats.d_y > threshold) if method == 'auto' else np.arange(n)
        if candidates.size:
            series_values, ok = _series_log_integrals(keys, stats.d_y[candidates], stats.m[candidates],
                                                      geom, d, theta.alpha, cfg.n_terms)
            if method == 'series' and not np.all(ok):
                raise SeriesRegionError("级数展开在部分观测上未收敛", threshold)
            for key in keys:
                values[key][candidates[ok]] = series_values[key][ok]
            use_series[candidates[ok]] = True
    elif method == 'series':
        raise SeriesRegionError("alpha = 2 时没有级数展开")

    mc_rows = np.flatnonzero(~use_series)
    if mc_rows.size:
        if pool is None:
            pool = McPool.draw(theta.alpha, cfg.n_mc, substream(0, 'pool', 0, 0), 'pool@(0,0)')
        mc_values = _mc_log_integrals(keys, stats.d_y[mc_rows], stats.m[mc_rows], geom, d, pool)
        for key in keys:
            values[key][mc_rows] = mc_values[key]
    series_rows = int(use_series.sum())
    logger.debug("积分 %s：级数 %d 行，蒙特卡洛 %d 行", ','.join(keys), series_rows, mc_rows.size)
    return stats, single, values, series_rows


def _finish(values: np.ndarray, single: bool):
    return float(values[0]) if single else values


def _floored(log_values: np.ndarray) -> np.ndarray:
    return np.exp(np.maximum(np.nan_to_num(log_values, nan=-np.inf), LOG_DENSITY_FLOOR))


def _check_density(log_i0: np.ndarray) -> None:
    if np.any(~(log_i0 > LOG_DENSITY_FLOOR)):
        raise DegenerateDensityError("密度下溢到下限值，条件期望无法计算")


def I_integral(i: int, y, theta: ComponentParams, geom: ComponentGeometry, pool: McPool,
               cfg: SeriesConfig = None, method: str = 'auto'):
    """I(i) = ∫∫ p⁻ⁱ f(y, t | p) f_P(p) dt dp，i ∈ {0, 1}"""
    if i not in (0, 1):
        raise DomainError(f"I(i) 只定义了 i ∈ {{0, 1}}，当前 i={i}")
    key = f'I{i}'
    _, single, values, _ = _log_integrals((key,), y, theta, geom, pool, cfg, method)
    return _finish(_floored(values[key]), single)


def ssg_pdf(y, theta: ComponentParams, geom: ComponentGeometry, pool: McPool,
            cfg: SeriesConfig = None, method: str = 'auto'):
    """SSG密度 f_Y(y|Θ) = I(0)"""
    return I_integral(0, y, theta, geom, pool, cfg, method)


def ssg_log_pdf(y, theta: ComponentParams, geom: ComponentGeometry, pool: McPool,
                cfg: SeriesConfig = None, method: str = 'auto'):
    _, single, values, _ = _log_integrals(('I0',), y, theta, geom, pool, cfg, method)
    return _finish(np.maximum(values['I0'], LOG_DENSITY_FLOOR), single)


def cond_E_invP(y, theta: ComponentParams, geom: ComponentGeometry, pool: McPool,
                cfg: SeriesConfig = None, method: str = 'auto'):
    """E(P⁻¹|y) = I(1)/I(0)"""
    _, single, values, _ = _log_integrals(('I0', 'I1'), y, theta, geom, pool, cfg, method)
    _check_density(values['I0'])
    return _finish(np.exp(values['I1'] - values['I0']), single)


def cond_E_invP_T(y, theta: ComponentParams, geom: ComponentGeometry, pool: McPool,
                  cfg: SeriesConfig = None, method: str = 'auto'):
    """E(P⁻¹T|y) = 𝒥₁/I(0) + m·I(1)/I(0)"""
    stats, single, values, _ = _log_integrals(('I0', 'I1', 'J1'), y, theta, geom, pool, cfg, method)
    _check_density(values['I0'])
    log_i0 = values['I0']
    result = np.exp(values['J1'] - log_i0) + np.atleast_1d(stats.m) * np.exp(values['I1'] - log_i0)
    return _finish(result, single)


def cond_E_invP_T2(y, theta: ComponentParams, geom: ComponentGeometry, pool: McPool,
                   cfg: SeriesConfig = None, method: str = 'auto'):
    """E(P⁻¹T²|y) = 𝒥₂/I(0) + 2m·𝒥₁/I(0) + m²·I(1)/I(0)"""
    moments = component_moments(y, theta, geom, pool, cfg, method)
    _check_density(moments.log_pdf)
    single = np.asarray(y).ndim == 1
    return _finish(moments.e_inv_p_t2, single)


def component_moments(y, theta: ComponentParams, geom: ComponentGeometry, pool: McPool,
                      cfg: SeriesConfig = None, method: str = 'auto') -> ComponentMoments:
    """一次计算 I(0)、I(1)、𝒥₁、𝒥₂ 并组合成E步所需的量

    log_pdf 不做下限截断；下溢行的条件期望由调用方处理。
    """
    stats, _, values, series_rows = _log_integrals(('I0', 'I1', 'J1', 'J2'), y, theta, geom, pool,
                                                   cfg, method)
    m = np.atleast_1d(stats.m)
    log_i0 = values['I0']
    with np.errstate(over='ignore', invalid='ignore'):
        ratio_i1 = np.exp(values['I1'] - log_i0)
        ratio_j1 = np.exp(values['J1'] - log_i0)
        ratio_j2 = np.exp(values['J2'] - log_i0)
    e_inv_p = ratio_i1
    e_inv_p_t = ratio_j1 + m * ratio_i1
    e_inv_p_t2 = np.maximum(ratio_j2 + 2.0 * m * ratio_j1 + m * m * ratio_i1, 0.0)
    return ComponentMoments(log_pdf=log_i0, e_inv_p=e_inv_p, e_inv_p_t=e_inv_p_t,
                            e_inv_p_t2=e_inv_p_t2, series_rows=series_rows)


def draw_pools(model: MixtureModel, n_mc: int, seed: int = 0, iteration: int = 0) -> List[McPool]:
    """为每个成分抽取本次迭代共享的蒙特卡洛样本

    第 k 个成分使用子流 pool@(iteration, k)，不同成分的抽样相互独立。
    """
    return [McPool.draw(c.alpha, n_mc, substream(seed, 'pool', iteration, k), f'pool@({iteration},{k})')
            for k, c in enumerate(model.components)]


def component_log_densities(y, model: MixtureModel, pools: Optional[Sequence[McPool]] = None,
                            cfg: SeriesConfig = None, seed: int = 0) -> np.ndarray:
    """返回 n×K 矩阵 log ω_k + log f_Y(y|Θ_k)"""
    cfg = cfg or SeriesConfig()
    pools = pools if pools is not None else draw_pools(model, cfg.n_mc, seed)
    rows, _ = _as_rows(y, model.d)
    out = np.empty((rows.shape[0], model.k))
    for k, (weight, theta) in enumerate(zip(model.weights, model.components)):
        log_pdf = ssg_log_pdf(rows, theta, component_geometry(theta), pools[k], cfg)
        with np.errstate(divide='ignore'):
            out[:, k] = math.log(weight) + log_pdf if weight > 0 else -np.inf
    return out


def mixture_log_pdf(y, model: MixtureModel, pools: Optional[Sequence[McPool]] = None,
                    cfg: SeriesConfig = None, seed: int = 0):
    rows, single = _as_rows(y, model.d)
    values = logsumexp(component_log_densities(rows, model, pools, cfg, seed), axis=1)
    return _finish(np.maximum(values, LOG_DENSITY_FLOOR), single)


def mixture_pdf(y, model: MixtureModel, pools: Optional[Sequence[McPool]] = None,
                cfg: SeriesConfig = None, seed: int = 0):
    """混合密度 g(y|Ψ) = Σ ω_k f_Y(y|Θ_k)"""
    rows, single = _as_rows(y, model.d)
    return _finish(np.exp(mixture_log_pdf(rows, model, pools, cfg, seed)), single)


def density_grid(model: MixtureModel, xlim: Tuple[float, float], ylim: Tuple[float, float], res: int,
                 cfg: SeriesConfig = None, seed: int = 0) -> np.ndarray:
    """二维模型在 res×res 网格上的密度，返回 (x, y, density) 三列"""
    if model.d != 2:
        raise DomainError(f"密度网格只支持二维模型，当前 d={model.d}")
    if res < 1:
        raise DomainError("网格分辨率必须 >= 1")
    xs = np.linspace(xlim[0], xlim[1], res)
    ys = np.linspace(ylim[0], ylim[1], res)
    gx, gy = np.meshgrid(xs, ys, indexing='ij')
    points = np.column_stack([gx.ravel(), gy.ravel()])
    density = mixture_pdf(points, model, None, cfg, seed)
    return np.column_stack([points, np.atleast_1d(density)])
