"""随机数子流模块

由一个主种子派生出带名称的独立子流，例如 init、pool@(iter,k)、
cmstep@(iter,k,m)、classify。子流只由（主种子、名称、索引）决定，
因此并行执行或调整计算顺序都不会改变随机数。
"""

import zlib
from typing import Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]


def _stream_id(name: str) -> int:
    return zlib.crc32(name.encode('utf-8'))


def substream(seed: int, name: str, *indices: int) -> np.random.Generator:
    """返回主种子 seed 下名称为 name、索引为 indices 的子流"""
    key = (_stream_id(name),) + tuple(int(i) for i in indices)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=key))


def as_generator(seed: SeedLike) -> np.random.Generator:
    """把整数种子、SeedSequence 或 Generator 统一成 Generator"""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
