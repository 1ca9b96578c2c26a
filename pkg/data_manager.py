"""数据文件管理模块

本模块负责命令行使用的CSV文件读写。

CSV约定：
- 逗号分隔，小数点为 '.'
- 可选的单行表头；auto 模式下第一行含非数值字段即视为表头
- 表头中名为 label 的列不作为特征，单独返回
- 写出的浮点数使用 repr 格式，读回后逐位相同

主要功能：
- read_matrix / read_labels：读取观测矩阵与标签，解析失败时报告行号
- write_matrix / write_labels / write_trace / write_grid：写出结果文件
- file_digest：输入文件的 sha256 摘要
"""

import csv
import hashlib
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from exceptions import InputError

LABEL_COLUMN = 'label'
HEADER_MODES = ('auto', 'yes', 'no')


@dataclass(eq=False)
class DataTable:
    data: np.ndarray
    columns: List[str]
    extra: Dict[str, np.ndarray] = field(default_factory=dict)


def _is_numeric_row(row: Sequence[str]) -> bool:
    try:
        for value in row:
            float(value)
    except ValueError:
        return False
    return True


def _read_rows(path: str) -> List[tuple]:
    """返回 (行号, 字段列表)，跳过空行"""
    if not os.path.exists(path):
        raise InputError(f"文件不存在: {path}")
    with open(path, newline='', encoding='utf-8') as handle:
        rows = [(reader_line, [cell.strip() for cell in row])
                for reader_line, row in enumerate(csv.reader(handle), start=1)
                if row and any(cell.strip() for cell in row)]
    if not rows:
        raise InputError(f"文件为空: {path}")
    return rows


def read_matrix(path: str, header: str = 'auto') -> DataTable:
    """读取 n×d 数值矩阵

    Raises:
        InputError: 文件为空、列数不一致或含非数值字段（消息中给出行号）
    """
    if header not in HEADER_MODES:
        raise InputError(f"header 只能是 {HEADER_MODES} 之一")
    rows = _read_rows(path)
    first_line, first = rows[0]
    has_header = header == 'yes' or (header == 'auto' and not _is_numeric_row(first))
    if has_header:
        columns = first
        rows = rows[1:]
    else:
        columns = [f'x{i + 1}' for i in range(len(first))]
    if not rows:
        raise InputError(f"文件没有数据行: {path}")

    width = len(columns)
    values = np.empty((len(rows), width))
    for index, (line, row) in enumerate(rows):
        if len(row) != width:
            raise InputError(f"{path} 第 {line} 行有 {len(row)} 个字段，应为 {width} 个")
        try:
            values[index] = [float(cell) for cell in row]
        except ValueError as e:
            raise InputError(f"{path} 第 {line} 行包含非数值字段: {e}") from e
        if not np.all(np.isfinite(values[index])):
            raise InputError(f"{path} 第 {line} 行包含非有限值")

    extra = {}
    if LABEL_COLUMN in columns:
        position = columns.index(LABEL_COLUMN)
        extra[LABEL_COLUMN] = values[:, position].astype(int)
        values = np.delete(values, position, axis=1)
        columns = [c for c in columns if c != LABEL_COLUMN]
    if values.shape[1] == 0:
        raise InputError(f"文件没有特征列: {path}")
    return DataTable(data=values, columns=columns, extra=extra)


def read_labels(path: str) -> np.ndarray:
    """读取标签文件：有 label 列时取该列，否则取最后一列"""
    rows = _read_rows(path)
    _, first = rows[0]
    position = -1
    if not _is_numeric_row(first):
        if LABEL_COLUMN in first:
            position = first.index(LABEL_COLUMN)
        rows = rows[1:]
    if not rows:
        raise InputError(f"标签文件没有数据行: {path}")
    labels = []
    for line, row in rows:
        try:
            labels.append(int(float(row[position])))
        except (ValueError, IndexError) as e:
            raise InputError(f"{path} 第 {line} 行的标签无效: {e}") from e
    return np.asarray(labels, dtype=int)


def _fmt(value: float) -> str:
    return repr(float(value))


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def write_matrix(path: str, data: np.ndarray, columns: Optional[Sequence[str]] = None,
                 labels: Optional[np.ndarray] = None) -> None:
    data = np.atleast_2d(np.asarray(data, dtype=float))
    columns = list(columns) if columns else [f'x{i + 1}' for i in range(data.shape[1])]
    _ensure_parent(path)
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(columns + ([LABEL_COLUMN] if labels is not None else []))
        for index, row in enumerate(data):
            cells = [_fmt(v) for v in row]
            if labels is not None:
                cells.append(str(int(labels[index])))
            writer.writerow(cells)


def write_labels(path: str, labels: np.ndarray) -> None:
    """写出 row_index,label，row_index 从1开始"""
    _ensure_parent(path)
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['row_index', LABEL_COLUMN])
        for index, label in enumerate(labels, start=1):
            writer.writerow([index, int(label)])


def write_trace(path: str, trace: Sequence[float]) -> None:
    _ensure_parent(path)
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['iteration', 'loglik'])
        for iteration, value in enumerate(trace, start=1):
            writer.writerow([iteration, _fmt(value)])


def write_grid(path: str, grid: np.ndarray) -> None:
    """写出密度网格 (x, y, density)"""
    write_matrix(path, grid, columns=['x', 'y', 'density'])


def file_digest(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for block in iter(lambda: handle.read(1 << 16), b''):
            digest.update(block)
    return digest.hexdigest()
