"""异常定义模块

本模块集中定义ssgmix中使用的异常类型，并给出命令行退出码的映射规则。

退出码约定：
- 0：成功
- 2：输入错误（文件解析、参数、标签长度不一致等）
- 3：数值或拟合错误（奇异矩阵、密度退化、切片采样失败等）
"""

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3


class SSGMixError(Exception):
    """所有ssgmix异常的基类"""
    exit_code = EXIT_NUMERIC


class InputError(SSGMixError):
    """输入数据或参数不合法"""
    exit_code = EXIT_INPUT


class DomainError(SSGMixError, ValueError):
    """函数参数超出定义域，例如 p <= 0 或 nu <= 2"""
    exit_code = EXIT_INPUT


class SeriesRegionError(SSGMixError):
    """级数展开不在收敛区域内，调用方应改用蒙特卡洛近似"""

    def __init__(self, message: str, threshold: float = float('nan')):
        super().__init__(message)
        self.threshold = threshold


class SingularMatrixError(SSGMixError):
    """离散矩阵（或Omega）数值奇异"""


class DegenerateDensityError(SSGMixError):
    """密度下溢到下限值，条件期望无法计算"""


class DegenerateClusterError(SSGMixError):
    """初始划分中存在点数过少的簇"""


class SingularUpdateError(SSGMixError):
    """M步更新得到的离散矩阵需要过多的特征值修正"""


class SliceSamplingError(SSGMixError):
    """切片采样的外扩或收缩步数超过上限"""


class FitError(SSGMixError):
    """拟合过程中无法恢复的错误"""


def exit_code_for(error: BaseException) -> int:
    """根据异常类型返回命令行退出码"""
    if isinstance(error, SSGMixError):
        return error.exit_code
    if isinstance(error, (ValueError, OSError)):
        return EXIT_INPUT
    return EXIT_NUMERIC
