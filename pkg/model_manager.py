"""模型文件管理模块

本模块定义模型JSON的结构并负责读写，同时为每次命令生成运行清单（manifest）。

模型JSON结构：
{"k": int, "d": int, "weights": [...],
 "components": [{"alpha": ..., "mu": [...], "lambda": [...], "sigma": [[...], ...]}],
 "meta": {...}}
Σ 按行存储；写出后再读入再写出得到逐字节相同的文件。

核心类：
ComponentDocument / ModelDocument - 模型文件的 pydantic 模型
RunManifest - 一次命令运行的记录（命令、配置、种子、输入摘要、输出路径、耗时、版本）
"""

import json
import os
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from config import __version__
from exceptions import InputError
from ssg_density import ComponentParams, MixtureModel


class ComponentDocument(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    alpha: float
    mu: List[float]
    lam: List[float] = Field(alias='lambda')
    sigma: List[List[float]]


class ModelDocument(BaseModel):
    k: int
    d: int
    weights: List[float]
    components: List[ComponentDocument]
    meta: Dict[str, Any] = Field(default_factory=dict)

    @classmethod
    def from_model(cls, model: MixtureModel, meta: Optional[Dict[str, Any]] = None) -> 'ModelDocument':
        return cls(
            k=model.k,
            d=model.d,
            weights=[float(w) for w in model.weights],
            components=[ComponentDocument(alpha=c.alpha, mu=c.mu.tolist(), lam=c.lam.tolist(),
                                          sigma=c.sigma.tolist())
                        for c in model.components],
            meta=meta or {},
        )

    def to_model(self) -> MixtureModel:
        if len(self.components) != self.k or len(self.weights) != self.k:
            raise InputError(f"模型文件中 k={self.k} 与成分或权重个数不一致")
        components = [ComponentParams(alpha=c.alpha, mu=c.mu, sigma=c.sigma, lam=c.lam)
                      for c in self.components]
        model = MixtureModel(weights=self.weights, components=components)
        if model.d != self.d:
            raise InputError(f"模型文件中 d={self.d} 与成分维数 {model.d} 不一致")
        return model

    def dumps(self) -> str:
        return json.dumps(self.model_dump(by_alias=True), indent=2, ensure_ascii=False) + '\n'


def save_model(path: str, model: MixtureModel, meta: Optional[Dict[str, Any]] = None) -> ModelDocument:
    document = ModelDocument.from_model(model, meta)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write(document.dumps())
    return document


def load_document(path: str) -> ModelDocument:
    if not os.path.exists(path):
        raise InputError(f"模型文件不存在: {path}")
    try:
        with open(path, encoding='utf-8') as handle:
            return ModelDocument.model_validate(json.load(handle))
    except (json.JSONDecodeError, ValidationError) as e:
        raise InputError(f"模型文件格式错误: {path}: {e}") from e


def load_model(path: str) -> MixtureModel:
    return load_document(path).to_model()


class RunManifest(BaseModel):
    command: str
    config: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    input_digest: Optional[str] = None
    outputs: List[str] = Field(default_factory=list)
    wall_clock: float = 0.0
    version: str = __version__
    created: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec='seconds'))

    def write(self) -> Optional[str]:
        """写在第一个输出文件旁边：<输出>.manifest.json"""
        if not self.outputs:
            return None
        path = f"{self.outputs[0]}.manifest.json"
        with open(path, 'w', encoding='utf-8') as handle:
            handle.write(json.dumps(self.model_dump(), indent=2, ensure_ascii=False) + '\n')
        return path
