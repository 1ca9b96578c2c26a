import os
from pathlib import Path
from typing import Optional
from dotenv import load_dotenv

from exceptions import InputError

# 获取项目根目录
BASE_DIR = Path(__file__).resolve().parent

# 加载环境变量（不覆盖已存在的变量）
env_path = os.path.join(BASE_DIR, '.env')
load_dotenv(env_path, override=False)


# 获取环境变量的辅助函数
def get_env_variable(var_name: str, default: Optional[str] = None) -> Optional[str]:
    """获取环境变量，如果不存在则返回默认值"""
    return os.environ.get(var_name, default)


def get_env_int(var_name: str, default: int) -> int:
    """读取整数型环境变量，格式错误时抛出InputError"""
    raw = get_env_variable(var_name)
    if raw is None or raw.strip() == '':
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise InputError(f"环境变量 {var_name} 不是整数: {raw!r}") from exc


def get_env_float(var_name: str, default: float) -> float:
    """读取浮点型环境变量"""
    raw = get_env_variable(var_name)
    if raw is None or raw.strip() == '':
        return default
    try:
        return float(raw)
    except ValueError as exc:
        raise InputError(f"环境变量 {var_name} 不是数值: {raw!r}") from exc
