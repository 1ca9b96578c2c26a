"""切片采样模块

本模块实现一维切片采样（倍增外扩 + 收缩），并对许多条相互独立的链做向量化：
每个观测对应一条链，所有链同步推进，每一步只对仍未完成的链调用目标函数。

倍增外扩时区间每次随机向一侧加倍，最多 max_doublings 次；收缩阶段的候选点
还要通过倍增区间的可接受性检验，保证转移核以目标分布为不变分布。

目标函数签名为 log_density(x, rows) -> ndarray，其中 rows 是链的下标，
返回这些链在 x 处的未归一化对数密度。
"""

import logging
from typing import Callable

import numpy as np

from config import SliceConfig
from exceptions import SliceSamplingError

logger = logging.getLogger('ssgmix.slice_sampler')

LogDensity = Callable[[np.ndarray, np.ndarray], np.ndarray]


class SliceSampler:
    def __init__(self, log_density: LogDensity, cfg: SliceConfig = None):
        self.log_density = log_density
        self.cfg = cfg or SliceConfig()

    def _double(self, left: np.ndarray, right: np.ndarray, level: np.ndarray, rng: np.random.Generator):
        """两端都落到切片之下或达到倍增上限时停止"""
        rows = np.arange(left.size)
        log_left = self.log_density(left, rows)
        log_right = self.log_density(right, rows)
        for _ in range(self.cfg.max_doublings):
            rows = np.flatnonzero((log_left > level) | (log_right > level))
            if rows.size == 0:
                break
            width = right[rows] - left[rows]
            to_left = rng.uniform(size=rows.size) < 0.5
            grow_left, grow_right = rows[to_left], rows[~to_left]
            left[grow_left] -= width[to_left]
            right[grow_right] += width[~to_left]
            log_left[grow_left] = self.log_density(left[grow_left], grow_left)
            log_right[grow_right] = self.log_density(right[grow_right], grow_right)
        return left, right

    def _acceptable(self, x: np.ndarray, proposal: np.ndarray, left: np.ndarray, right: np.ndarray,
                    level: np.ndarray, rows: np.ndarray) -> np.ndarray:
        """倍增区间的可接受性检验：从 proposal 出发倍增不会得到同一区间时拒绝"""
        lo, hi = left.copy(), right.copy()
        split = np.zeros(rows.size, dtype=bool)
        ok = np.ones(rows.size, dtype=bool)
        active = np.flatnonzero(hi - lo > 1.1 * self.cfg.width)
        while active.size:
            mid = 0.5 * (lo[active] + hi[active])
            split[active] |= (x[active] < mid) != (proposal[active] < mid)
            below = proposal[active] < mid
            hi[active[below]] = mid[below]
            lo[active[~below]] = mid[~below]
            check = active[split[active]]
            if check.size:
                outside = ((level[check] >= self.log_density(lo[check], rows[check]))
                           & (level[check] >= self.log_density(hi[check], rows[check])))
                ok[check[outside]] = False
            active = np.flatnonzero(ok & (hi - lo > 1.1 * self.cfg.width))
        return ok

    def step(self, x: np.ndarray, log_px: np.ndarray, rng: np.random.Generator):
        """所有链各推进一步，返回 (新状态, 新状态的对数密度)"""
        n = x.size
        level = log_px - rng.standard_exponential(n)
        left = x - rng.uniform(size=n) * self.cfg.width
        right = left + self.cfg.width
        left, right = self._double(left, right, level, rng)

        x_new = x.copy()
        log_new = log_px.copy()
        lo, hi = left.copy(), right.copy()
        pending = np.arange(n)
        for _ in range(self.cfg.max_shrinks):
            proposal = lo[pending] + rng.uniform(size=pending.size) * (hi[pending] - lo[pending])
            log_prop = self.log_density(proposal, pending)
            accept = log_prop > level[pending]
            candidates = np.flatnonzero(accept)
            if candidates.size:
                rows = pending[candidates]
                accept[candidates] = self._acceptable(x[rows], proposal[candidates], left[rows], right[rows],
                                                      level[rows], rows)
            x_new[pending[accept]] = proposal[accept]
            log_new[pending[accept]] = log_prop[accept]

            rejected = pending[~accept]
            shrink_right = proposal[~accept] > x[rejected]
            hi[rejected[shrink_right]] = proposal[~accept][shrink_right]
            lo[rejected[~shrink_right]] = proposal[~accept][~shrink_right]
            pending = rejected
            if pending.size == 0:
                return x_new, log_new
        raise SliceSamplingError(f"收缩步数超过上限 {self.cfg.max_shrinks}，仍有 {pending.size} 条链未完成")

    def sample(self, x0: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """先预烧 burn_in 步，再保留 kept 步

        Returns:
            形状 (kept, n) 的样本
        """
        x = np.asarray(x0, dtype=float).copy()
        log_px = self.log_density(x, np.arange(x.size))
        if not np.all(np.isfinite(log_px)):
            raise SliceSamplingError("初始状态的对数密度不是有限值")
        for _ in range(self.cfg.burn_in):
            x, log_px = self.step(x, log_px, rng)
        kept = np.empty((self.cfg.kept, x.size))
        for index in range(self.cfg.kept):
            x, log_px = self.step(x, log_px, rng)
            kept[index] = x
        return kept
