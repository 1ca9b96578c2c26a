"""EM/ECM拟合引擎模块

本模块实现SSG混合模型的完整拟合流程。

主要功能：
- initialize：L1 距离的 k-medoids 划分，逐簇给出 μ、Σ、λ、α 的初值
- e_step：后验概率 τ 以及 τ·E(P⁻¹)、τ·E(P⁻¹T)、τ·E(P⁻¹T²)
- m_step：依次更新 μ、λ、Σ 与权重 ω（α 不变）
- cm_step_alpha：对 V = (y−μ)/√E 的Weibull层次做切片采样，再最大化Weibull似然
- stopping_check：比较最近两个10次迭代块的对数似然斜率
- fit：驱动整个循环，对停止窗口内的参数取平均
- select_k：对给定的若干 K 分别拟合，按BIC选择

核心类：
EStepCache - E步的全部量
StopDecision - 停止准则的判定结果
FitResult - 拟合结果
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.spatial.distance import cdist
from scipy.special import log_ndtr, logsumexp
from scipy.stats import linregress, median_abs_deviation, skew
from tqdm import tqdm

from config import FitConfig
from exceptions import (DegenerateClusterError, FitError, InputError, SingularUpdateError,
                        SSGMixError)
from model_eval import bic, classify, loglik
from sampling import exponential_sample
from seeding import substream
from slice_sampler import SliceSampler
from ssg_density import (LOG_DENSITY_FLOOR, ComponentParams, MixtureModel, component_geometry,
                         component_moments, draw_pools)

logger = logging.getLogger('ssgmix.em_engine')

EIGEN_FLOOR = 1e-8
# 被修正的特征值总量超过迹的该比例时认为更新失败
EIGEN_REPAIR_LIMIT = 0.10
SHRINKAGE = 0.1
MIN_CM_POINTS = 5
BLOCK = 10


@dataclass(eq=False)
class EStepCache:
    tau: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    e3: np.ndarray
    loglik: float
    underflow_rows: int = 0


@dataclass(frozen=True)
class StopDecision:
    stop: bool
    window: Optional[Tuple[int, int]] = None
    slopes: Optional[Tuple[float, float]] = None


@dataclass(eq=False)
class FitResult:
    model: MixtureModel
    labels: np.ndarray
    loglik_trace: List[float]
    n_iter: int
    bic: float
    loglik: float
    converged: bool
    timing: float
    window: Optional[Tuple[int, int]] = None
    diagnostics: Dict[str, object] = field(default_factory=dict)


def _check_data(data, k: int) -> np.ndarray:
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] == 0:
        raise InputError("数据必须是非空的 n×d 矩阵")
    if not np.all(np.isfinite(data)):
        raise InputError("数据包含非有限值")
    if k < 1:
        raise InputError(f"成分个数必须 >= 1，当前 K={k}")
    n, d = data.shape
    if n <= k * (d + 2):
        raise InputError(f"样本量不足: 需要 n > K(d+2) = {k * (d + 2)}，当前 n={n}")
    return data


def kmedoids_l1(data: np.ndarray, k: int, max_iter: int = 100) -> Tuple[np.ndarray, np.ndarray]:
    """曼哈顿距离下的 k-medoids（贪心BUILD初始化 + 交替更新）

    Returns:
        (中心点下标, 每个观测所属簇 0..K-1)
    """
    dist = cdist(data, data, metric='cityblock')
    n = dist.shape[0]
    medoids = [int(np.argmin(dist.sum(axis=1)))]
    nearest = dist[:, medoids[0]].copy()
    for _ in range(1, k):
        gain = np.maximum(nearest[:, None] - dist, 0.0).sum(axis=0)
        gain[medoids] = -np.inf
        candidate = int(np.argmax(gain))
        medoids.append(candidate)
        nearest = np.minimum(nearest, dist[:, candidate])
    medoids = np.array(medoids)

    for _ in range(max_iter):
        assign = np.argmin(dist[:, medoids], axis=1)
        updated = medoids.copy()
        for c in range(k):
            members = np.flatnonzero(assign == c)
            if members.size:
                updated[c] = members[np.argmin(dist[np.ix_(members, members)].sum(axis=1))]
        if np.array_equal(updated, medoids):
            break
        medoids = updated
    assign = np.argmin(dist[:, medoids], axis=1)
    logger.debug("k-medoids 完成: n=%d, K=%d, 各簇大小=%s", n, k, np.bincount(assign, minlength=k))
    return medoids, assign


def initialize(data, k: int, seed: int = 0, cfg: FitConfig = None) -> MixtureModel:
    """k-medoids 划分后逐簇取中位数、收缩协方差、偏度符号乘以MAD 作为初值

    seed 用于打破 λ 的符号并列（偏度恰为0时）。
    """
    cfg = cfg or FitConfig()
    data = _check_data(data, k)
    n, d = data.shape
    rng = substream(seed, 'init')
    _, assign = kmedoids_l1(data, k)

    components = []
    weights = np.empty(k)
    for c in range(k):
        members = data[assign == c]
        if members.shape[0] < d + 2:
            raise DegenerateClusterError(f"第 {c + 1} 个簇只有 {members.shape[0]} 个点，至少需要 {d + 2} 个")
        cov = np.atleast_2d(np.cov(members, rowvar=False))
        sigma = (1.0 - SHRINKAGE) * cov + SHRINKAGE * np.diag(np.diag(cov))
        eig = np.linalg.eigvalsh(sigma)
        if eig.max() <= 0 or eig.min() <= 1e-12 * eig.max():
            raise DegenerateClusterError(f"第 {c + 1} 个簇的样本协方差退化")
        skewness = np.nan_to_num(skew(members, axis=0))
        signs = np.sign(skewness)
        ties = signs == 0
        signs[ties] = rng.choice([-1.0, 1.0], size=int(ties.sum()))
        lam = signs * median_abs_deviation(members, axis=0)
        components.append(ComponentParams(alpha=cfg.alpha_init, mu=np.median(members, axis=0),
                                          sigma=sigma, lam=lam))
        weights[c] = members.shape[0] / n
    return MixtureModel(weights=weights / weights.sum(), components=components)


def _row_chunks(n: int, threads: int) -> List[slice]:
    size = max(1, math.ceil(n / max(threads, 1)))
    return [slice(start, min(start + size, n)) for start in range(0, n, size)]


def e_step(data, model: MixtureModel, cfg: FitConfig = None, iteration: int = 0) -> EStepCache:
    """计算 τ 与 e1 = τ·E(P⁻¹|y)、e2 = τ·E(P⁻¹T|y)、e3 = τ·E(P⁻¹T²|y)

    每个成分在本次迭代抽取一组共享的蒙特卡洛样本；行按线程数分块并行计算。
    混合密度下溢的行取均匀的 τ。
    """
    cfg = cfg or FitConfig()
    data = np.asarray(data, dtype=float)
    n, K = data.shape[0], model.k
    pools = draw_pools(model, cfg.n_mc, cfg.seed, iteration)
    series = cfg.series

    log_pdf = np.empty((n, K))
    moments = np.empty((3, n, K))
    chunks = _row_chunks(n, cfg.threads)
    with ThreadPoolExecutor(max_workers=cfg.threads) as executor:
        for k, theta in enumerate(model.components):
            geom = component_geometry(theta)
            results = executor.map(lambda rows: component_moments(data[rows], theta, geom, pools[k], series),
                                   chunks)
            for rows, result in zip(chunks, results):
                log_pdf[rows, k] = result.log_pdf
                moments[0, rows, k] = result.e_inv_p
                moments[1, rows, k] = result.e_inv_p_t
                moments[2, rows, k] = result.e_inv_p_t2

    with np.errstate(divide='ignore'):
        log_weighted = np.log(model.weights)[None, :] + np.nan_to_num(log_pdf, nan=-np.inf)
    log_mix = logsumexp(log_weighted, axis=1)
    underflow = ~(log_mix > LOG_DENSITY_FLOOR)
    tau = np.empty((n, K))
    tau[~underflow] = np.exp(log_weighted[~underflow] - log_mix[~underflow, None])
    tau[underflow] = 1.0 / K
    tau /= tau.sum(axis=1, keepdims=True)
    if underflow.any():
        logger.warning("第 %d 次迭代有 %d 个观测的混合密度下溢，使用均匀后验概率", iteration, int(underflow.sum()))

    moments = np.nan_to_num(moments, nan=0.0, posinf=0.0, neginf=0.0)
    weighted = np.where(tau[None] > 0, tau[None] * moments, 0.0)
    total = float(np.sum(np.maximum(log_mix, LOG_DENSITY_FLOOR)))
    return EStepCache(tau=tau, e1=weighted[0], e2=weighted[1], e3=np.maximum(weighted[2], 0.0),
                      loglik=total, underflow_rows=int(underflow.sum()))


def _repair_sigma(sigma: np.ndarray, k: int) -> np.ndarray:
    sigma = 0.5 * (sigma + sigma.T)
    values, vectors = np.linalg.eigh(sigma)
    repair = float(np.sum(np.maximum(EIGEN_FLOOR - values, 0.0)))
    trace = float(np.sum(np.abs(values)))
    if repair > EIGEN_REPAIR_LIMIT * trace:
        raise SingularUpdateError(f"第 {k + 1} 个成分的离散矩阵更新需要修正 {repair:.3g}，超过迹的10%")
    sigma = (vectors * np.maximum(values, EIGEN_FLOOR)) @ vectors.T
    return 0.5 * (sigma + sigma.T)


def m_step(data, cache: EStepCache, model: MixtureModel) -> MixtureModel:
    """条件最大化：μ（给定旧 λ）→ λ（给定新 μ）→ Σ（给定新 μ、λ），ω 取 τ 的列均值"""
    data = np.asarray(data, dtype=float)
    components = []
    for k, theta in enumerate(model.components):
        tau, e1, e2, e3 = cache.tau[:, k], cache.e1[:, k], cache.e2[:, k], cache.e3[:, k]
        tau_sum, e1_sum, e3_sum = tau.sum(), e1.sum(), e3.sum()
        if tau_sum <= 1e-12 or e1_sum <= 0:
            logger.warning("第 %d 个成分没有分配到观测，保持原参数", k + 1)
            components.append(theta)
            continue
        mu = (e1 @ data - theta.lam * e2.sum()) / e1_sum
        centered = data - mu
        lam = (e2 @ centered) / e3_sum if e3_sum > 0 else theta.lam
        cross = np.outer(e2 @ centered, lam)
        sigma = ((centered * e1[:, None]).T @ centered - cross - cross.T
                 + e3_sum * np.outer(lam, lam)) / tau_sum
        components.append(ComponentParams(alpha=theta.alpha, mu=mu, sigma=_repair_sigma(sigma, k), lam=lam))
    weights = cache.tau.mean(axis=0)
    return MixtureModel(weights=weights / weights.sum(), components=components)


def weibull_alpha_mle(w: np.ndarray, bounds: Tuple[float, float]) -> float:
    """在 bounds 内最大化 n log α + α Σ log w − Σ w^α

    目标函数是凹函数，对导数 n/α + Σ log w − Σ w^α log w 求根。
    """
    log_w = np.log(np.asarray(w, dtype=float))
    n = log_w.size
    sum_log = float(log_w.sum())

    def score(alpha: float) -> float:
        return n / alpha + sum_log - float(np.sum(np.exp(alpha * log_w) * log_w))

    lo, hi = bounds
    if score(lo) <= 0:
        return lo
    if score(hi) >= 0:
        return hi
    return brentq(score, lo, hi, xtol=1e-10)


def _log_w_posterior(v_dist: np.ndarray, v_skew: np.ndarray, d: int, alpha: float, delta: float):
    """u = log w 的未归一化对数后验（含雅可比项）"""
    def log_density(u: np.ndarray, rows: np.ndarray) -> np.ndarray:
        w = np.exp(u)
        with np.errstate(over='ignore'):
            value = ((d + alpha) * u - np.exp(alpha * u) - w * w * v_dist[rows] / 2.0
                     + log_ndtr(v_skew[rows] * w / math.sqrt(delta)))
        return np.where(np.isfinite(value), value, -np.inf)

    return log_density


def _log_w_start(v_dist: np.ndarray, d: int, alpha: float, steps: int = 8) -> np.ndarray:
    """切片采样的起点：不含偏度项时后验众数的牛顿迭代

    g(u) = (d+α) − α e^{αu} − v e^{2u} 单调递减且为凹函数，从根的右侧出发的牛顿迭代单调收敛。
    两个候选点处 g <= 0，取较小者作为初值。
    """
    shape = d + alpha
    with np.errstate(divide='ignore'):
        u = np.minimum(0.5 * np.log(shape / v_dist), math.log(shape / alpha) / alpha)
    for _ in range(steps):
        grow, spread = np.exp(alpha * u), v_dist * np.exp(2.0 * u)
        u = u + (shape - alpha * grow - spread) / (alpha * alpha * grow + 2.0 * spread)
    return u


def _cm_component(data: np.ndarray, theta: ComponentParams, cfg: FitConfig, iteration: int, k: int) -> float:
    geom = component_geometry(theta)
    n_k, d = data.shape
    maximizers = []
    for m in range(1, cfg.m_repeats + 1):
        rng = substream(cfg.seed, 'cmstep', iteration, k, m)
        e = exponential_sample(n_k, rng)
        v = (data - theta.mu) / np.sqrt(e)[:, None]
        scaled = v @ geom.omega_inv
        v_dist = np.einsum('ij,ij->i', scaled, v)
        v_skew = scaled @ theta.lam
        sampler = SliceSampler(_log_w_posterior(v_dist, v_skew, d, theta.alpha, geom.delta), cfg.slice)
        u = sampler.sample(_log_w_start(v_dist, d, theta.alpha), rng)
        maximizers.append(weibull_alpha_mle(np.exp(u.ravel()), cfg.alpha_bounds))
    lo, hi = cfg.alpha_bounds
    return float(min(max(np.mean(maximizers), lo), hi))


def cm_step_alpha(data, labels_hard, model: MixtureModel, cfg: FitConfig = None, iteration: int = 0) -> np.ndarray:
    """随机CM步：返回每个成分新的尾指数

    硬分配少于5个点的成分保持原来的 α。子流为 cmstep@(iteration, k, m)。
    """
    cfg = cfg or FitConfig()
    data = np.asarray(data, dtype=float)
    labels_hard = np.asarray(labels_hard)
    alphas = np.array([c.alpha for c in model.components], dtype=float)

    def update(k: int) -> float:
        members = data[labels_hard == k + 1]
        if members.shape[0] < MIN_CM_POINTS:
            logger.warning("第 %d 个成分只有 %d 个硬分配点，保持 alpha=%.4f", k + 1, members.shape[0], alphas[k])
            return alphas[k]
        return _cm_component(members, model.components[k], cfg, iteration, k)

    with ThreadPoolExecutor(max_workers=cfg.threads) as executor:
        return np.array(list(executor.map(update, range(model.k))))


def _block_slope(values: np.ndarray) -> float:
    lo, hi = np.quantile(values, [0.1, 0.9])
    kept = values[(values >= lo) & (values <= hi)]
    if kept.size < 2:
        return 0.0
    return float(linregress(np.arange(1, kept.size + 1), kept).slope)


def stopping_check(loglik_trace: Sequence[float], eps: float, check_start: int = 20) -> StopDecision:
    """在第 r 次迭代（r >= check_start 且 r 是10的倍数）比较最近两个10次迭代块的斜率

    块为 r−19..r−10 与 r−9..r；各自截取到本块 [0.1, 0.9] 分位数之间后做最小二乘拟合，
    |β₁ − β₂| <= eps 时停止，窗口为 (r−19, r)。
    """
    trace = np.asarray(loglik_trace, dtype=float)
    r = trace.size
    if r < max(check_start, 2 * BLOCK) or r % BLOCK != 0:
        return StopDecision(stop=False)
    slope_1 = _block_slope(trace[r - 2 * BLOCK:r - BLOCK])
    slope_2 = _block_slope(trace[r - BLOCK:r])
    stop = abs(slope_1 - slope_2) <= eps
    return StopDecision(stop=stop, window=(r - 2 * BLOCK + 1, r) if stop else None, slopes=(slope_1, slope_2))


def aitken_asymptote(loglik_trace: Sequence[float]) -> Optional[float]:
    """Aitken加速估计的对数似然极限，仅作诊断"""
    if len(loglik_trace) < 3:
        return None
    l0, l1, l2 = (float(x) for x in loglik_trace[-3:])
    if l1 == l0:
        return None
    rate = (l2 - l1) / (l1 - l0)
    if rate == 1.0:
        return None
    return l1 + (l2 - l1) / (1.0 - rate)


def average_models(models: Sequence[MixtureModel]) -> MixtureModel:
    """逐成分平均权重、α、μ、λ、Σ"""
    weights = np.mean([m.weights for m in models], axis=0)
    components = []
    for k in range(models[0].k):
        parts = [m.components[k] for m in models]
        sigma = np.mean([p.sigma for p in parts], axis=0)
        components.append(ComponentParams(
            alpha=float(np.mean([p.alpha for p in parts])),
            mu=np.mean([p.mu for p in parts], axis=0),
            sigma=0.5 * (sigma + sigma.T),
            lam=np.mean([p.lam for p in parts], axis=0),
        ))
    return MixtureModel(weights=weights / weights.sum(), components=components)


def _with_alphas(model: MixtureModel, alphas: Iterable[float]) -> MixtureModel:
    components = [replace(c, alpha=float(a)) for c, a in zip(model.components, alphas)]
    return MixtureModel(weights=model.weights, components=components)


def fit(data, k: int, cfg: FitConfig = None) -> FitResult:
    """完整拟合：初始化后循环 E步 → M步 → CM步 → 停止准则

    最终参数是最后 window 次迭代的平均，标签由平均后的模型给出。
    循环中出现数值错误时返回 converged=False 的部分结果。
    """
    cfg = cfg or FitConfig()
    started = time.perf_counter()
    data = _check_data(data, k)
    n, d = data.shape
    model = initialize(data, k, cfg.seed, cfg)
    logger.info("开始拟合: n=%d, d=%d, K=%d, seed=%d", n, d, k, cfg.seed)

    trace: List[float] = []
    snapshots: List[MixtureModel] = []
    converged = False
    window = None
    error = None
    iterations = range(1, cfg.max_iter + 1)
    progress = tqdm(iterations, desc='EM', disable=not cfg.progress, leave=False)
    for iteration in progress:
        try:
            cache = e_step(data, model, cfg, iteration)
            trace.append(cache.loglik)
            model = m_step(data, cache, model)
            labels_hard = np.argmax(cache.tau, axis=1) + 1
            model = _with_alphas(model, cm_step_alpha(data, labels_hard, model, cfg, iteration))
        except SSGMixError as e:
            if not snapshots:
                raise FitError(f"第 {iteration} 次迭代失败: {e}") from e
            error = f"{type(e).__name__}: {e}"
            logger.error("第 %d 次迭代失败，返回部分结果: %s", iteration, error)
            trace = trace[:len(snapshots)]
            break
        snapshots.append(model)
        logger.debug("迭代 %d: loglik=%.6f, alpha=%s", iteration, cache.loglik,
                     [round(c.alpha, 4) for c in model.components])
        progress.set_postfix(loglik=f"{cache.loglik:.3f}")

        decision = stopping_check(trace, cfg.eps, cfg.check_start)
        if decision.stop and iteration >= cfg.min_iter:
            converged = True
            window = decision.window
            logger.info("第 %d 次迭代满足停止准则，斜率=%s", iteration, decision.slopes)
            break
    progress.close()

    n_iter = len(snapshots)
    final = average_models(snapshots[-cfg.window:])
    if window is None:
        window = (max(1, n_iter - cfg.window + 1), n_iter)
    labels = classify(data, final, cfg).labels
    final_loglik = loglik(data, final, cfg)
    result = FitResult(
        model=final,
        labels=labels,
        loglik_trace=trace,
        n_iter=n_iter,
        bic=bic(final_loglik, n, k, d),
        loglik=final_loglik,
        converged=converged,
        timing=time.perf_counter() - started,
        window=window,
        diagnostics={'aitken_asymptote': aitken_asymptote(trace), 'error': error},
    )
    logger.info("拟合结束: 迭代 %d 次, converged=%s, loglik=%.4f, BIC=%.4f", n_iter, converged,
                final_loglik, result.bic)
    return result


def select_k(data, ks: Iterable[int], cfg: FitConfig = None) -> Tuple[int, Dict[int, FitResult]]:
    """对每个给定的 K 拟合，返回BIC最小的 K 与全部结果"""
    cfg = cfg or FitConfig()
    results = {int(k): fit(data, int(k), cfg) for k in ks}
    if not results:
        raise InputError("K 的候选列表为空")
    best = min(results, key=lambda k: results[k].bic)
    logger.info("BIC 选择 K=%d: %s", best, {k: round(r.bic, 3) for k, r in results.items()})
    return best, results
