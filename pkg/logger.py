"""日志管理模块

本模块提供了统一的日志记录功能，支持运行日志和错误日志的记录。
主要特性：
- 按日期自动轮转日志文件
- 详细的错误堆栈信息记录
- 不同级别的日志支持
- 命令行命令的自动日志装饰器
"""

import os
import logging
from logging.handlers import TimedRotatingFileHandler
import traceback
from functools import wraps

from env_loader import BASE_DIR, get_env_variable

# 库内模块统一使用 ssgmix.* 命名空间的记录器
LIBRARY_LOGGER = 'ssgmix'


class LogManager:
    def __init__(self, logs_dir: str = None):
        self.logs_dir = logs_dir or get_env_variable('SSGMIX_LOG_DIR', os.path.join(BASE_DIR, 'logs'))
        self._ensure_log_dir()

        # 配置运行日志记录器（同时接收库内 ssgmix.* 的日志）
        self.run_logger = self._setup_logger(LIBRARY_LOGGER, 'fit.log',
            '%(asctime)s - %(levelname)s - %(message)s')
        self.run_logger.propagate = False  # 防止日志重复

        # 配置错误日志记录器
        self.error_logger = self._setup_logger('ssgmix_error', 'errors.log',
            '%(asctime)s - %(levelname)s - %(name)s - %(filename)s:%(lineno)d - %(message)s')
        self.error_logger.propagate = False

    def _ensure_log_dir(self):
        """确保日志目录存在"""
        os.makedirs(self.logs_dir, mode=0o755, exist_ok=True)

    def _setup_logger(self, name: str, filename: str, format_str: str) -> logging.Logger:
        """设置日志记录器

        Args:
            name: 日志记录器名称
            filename: 日志文件名
            format_str: 日志格式字符串

        Returns:
            配置好的日志记录器
        """
        logger = logging.getLogger(name)
        logger.setLevel(logging.INFO)

        log_file_path = os.path.join(self.logs_dir, filename)
        # 重复初始化时不叠加处理器
        for existing in logger.handlers:
            if getattr(existing, 'baseFilename', None) == os.path.abspath(log_file_path):
                return logger

        # 创建按天轮转的文件处理器
        handler = TimedRotatingFileHandler(
            log_file_path,
            when='midnight',
            interval=1,
            backupCount=30,  # 保留30天的日志
            encoding='utf-8',
            delay=True,
        )
        handler.setFormatter(logging.Formatter(format_str, datefmt='%Y-%m-%d %H:%M:%S'))
        logger.addHandler(handler)
        return logger

    def set_verbose(self, verbose: bool) -> None:
        """切换运行日志的级别（DEBUG记录每次迭代）"""
        self.run_logger.setLevel(logging.DEBUG if verbose else logging.INFO)

    def log_run(self, message: str, level: str = 'info') -> None:
        """记录运行日志

        Args:
            message: 日志消息
            level: 日志级别，默认为'info'
        """
        log_method = getattr(self.run_logger, level.lower(), self.run_logger.info)
        log_method(message)

    def log_error(self, error: Exception, module: str = None) -> None:
        """记录错误日志

        Args:
            error: 异常对象
            module: 发生错误的模块名称
        """
        error_info = ''.join(traceback.format_exception(type(error), error, error.__traceback__))
        module_info = f'[{module}] ' if module else ''
        self.error_logger.error(f'{module_info}Error occurred:\n{error_info}')

    def auto_log_run(self, func):
        """自动记录命令执行过程的装饰器"""

        @wraps(func)
        def wrapper(*args, **kwargs):
            command = func.__name__
            self.log_run(f"命令开始: {command}")
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                # typer/click 的正常退出不算失败
                if type(e).__name__ in ('Exit', 'SystemExit') and getattr(e, 'exit_code', getattr(e, 'code', 1)) == 0:
                    self.log_run(f"命令成功: {command}")
                    raise
                self.log_error(e, module=func.__module__)
                self.log_run(f"命令失败: {command} - {str(e)}", level='error')
                raise
            self.log_run(f"命令成功: {command}")
            return result

        return wrapper


# 创建全局日志管理器实例
log_manager = LogManager()
