"""命令行入口

提供拟合、模拟、分类、评价、密度网格、K 选择与上尾概率表等命令。
所有命令的失败都映射到退出码：0 成功，2 输入错误，3 数值或拟合错误。

用法示例：
    python app.py fit data.csv --k 2 --out model.json --labels labels.csv --trace trace.csv
    python app.py simulate --preset sim-study --n 400 --seed 1 --out data.csv
    python app.py eval --labels labels.csv --truth data.csv
"""

import time
from functools import wraps
from typing import List, Optional, Tuple

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

import data_manager
import model_manager
from config import FitConfig, __version__
from em_engine import FitResult, fit as fit_model, select_k as select_k_model
from exceptions import EXIT_INPUT, InputError, exit_code_for
from logger import log_manager
from model_eval import adjusted_rand_index, bic, classify as classify_model, loglik
from sampling import sample_mixture, sim_study_model
from ssg_density import density_grid as density_grid_values
from stable_core import TAIL_TABLE_ALPHAS, TAIL_TABLE_POINTS, upper_tail_table

app = typer.Typer(help="偏斜亚高斯稳定（SSG）混合模型的拟合与聚类工具", add_completion=False)
console = Console()
err_console = Console(stderr=True)

PRESETS = {'sim-study': sim_study_model}


def handle_errors(func):
    """把库内异常转换为带退出码的命令失败"""

    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except typer.Exit:
            raise
        except ValidationError as e:
            err_console.print(f"[red]参数错误[/red]: {e}")
            raise typer.Exit(code=EXIT_INPUT)
        except Exception as e:
            err_console.print(f"[red]{type(e).__name__}[/red]: {e}")
            raise typer.Exit(code=exit_code_for(e))

    return wrapper


def command(name: str):
    """注册命令：外层映射退出码，内层记录运行日志"""
    def decorator(func):
        return app.command(name)(handle_errors(log_manager.auto_log_run(func)))
    return decorator


@app.callback()
def main(verbose: bool = typer.Option(False, '--verbose', '-v', help="在 fit.log 中记录每次迭代")):
    log_manager.set_verbose(verbose)


def _fit_config(seed, max_iter, eps, n_mc, n_terms, m_repeats, threads, progress=False) -> FitConfig:
    return FitConfig.from_env(seed=seed, max_iter=max_iter, eps=eps, n_mc=n_mc, n_terms=n_terms,
                              m_repeats=m_repeats, threads=threads, progress=progress)


def _fit_meta(cfg: FitConfig, result: FitResult) -> dict:
    return {
        'seeds': {'master': cfg.seed},
        'config': cfg.model_dump(mode='json'),
        'loglik': result.loglik,
        'bic': result.bic,
        'n_iter': result.n_iter,
        'converged': result.converged,
        'version': __version__,
    }


def _config_from_document(document: model_manager.ModelDocument, seed: Optional[int] = None) -> FitConfig:
    """使用模型文件中记录的配置；文件中没有时取默认值"""
    values = dict(document.meta.get('config', {}))
    if seed is not None:
        values['seed'] = seed
    return FitConfig(**values)


@command('fit')
def fit(
    input_csv: str = typer.Argument(..., help="n×d 数值CSV"),
    k: int = typer.Option(..., '--k', help="成分个数"),
    seed: Optional[int] = typer.Option(None, '--seed'),
    max_iter: Optional[int] = typer.Option(None, '--max-iter'),
    eps: Optional[float] = typer.Option(None, '--eps'),
    n_mc: Optional[int] = typer.Option(None, '--n-mc'),
    n_terms: Optional[int] = typer.Option(None, '--n-terms'),
    m_repeats: Optional[int] = typer.Option(None, '--m-repeats'),
    threads: Optional[int] = typer.Option(None, '--threads', envvar='SSGMIX_THREADS'),
    header: str = typer.Option('auto', '--header', help="auto | yes | no"),
    out: str = typer.Option('model.json', '--out'),
    labels: Optional[str] = typer.Option(None, '--labels'),
    trace: Optional[str] = typer.Option(None, '--trace'),
    progress: bool = typer.Option(False, '--progress'),
):
    """拟合SSG混合模型"""
    started = time.perf_counter()
    table = data_manager.read_matrix(input_csv, header)
    cfg = _fit_config(seed, max_iter, eps, n_mc, n_terms, m_repeats, threads, progress)
    result = fit_model(table.data, k, cfg)

    model_manager.save_model(out, result.model, _fit_meta(cfg, result))
    outputs = [out]
    if labels:
        data_manager.write_labels(labels, result.labels)
        outputs.append(labels)
    if trace:
        data_manager.write_trace(trace, result.loglik_trace)
        outputs.append(trace)
    model_manager.RunManifest(command='fit', config=cfg.model_dump(mode='json'), seed=cfg.seed,
                              input_digest=data_manager.file_digest(input_csv), outputs=outputs,
                              wall_clock=time.perf_counter() - started).write()
    console.print(f"BIC = {result.bic:.4f}")
    console.print(f"迭代次数 = {result.n_iter}（converged={result.converged}）")


@command('simulate')
def simulate(
    model: Optional[str] = typer.Option(None, '--model', help="模型JSON"),
    preset: Optional[str] = typer.Option(None, '--preset', help="sim-study"),
    n: int = typer.Option(..., '--n'),
    seed: int = typer.Option(0, '--seed'),
    out: str = typer.Option('data.csv', '--out'),
):
    """从模型或预设生成带标签的数据"""
    started = time.perf_counter()
    if (model is None) == (preset is None):
        raise InputError("--model 与 --preset 必须且只能给出一个")
    if preset is not None:
        if preset not in PRESETS:
            raise InputError(f"未知的预设: {preset}，可选 {sorted(PRESETS)}")
        mixture = PRESETS[preset]()
        digest = None
    else:
        mixture = model_manager.load_model(model)
        digest = data_manager.file_digest(model)
    if n < 1:
        raise InputError(f"样本量必须 >= 1，当前 n={n}")
    sample = sample_mixture(n, mixture, seed)
    data_manager.write_matrix(out, sample.data, labels=sample.labels)
    model_manager.RunManifest(command='simulate', config={'preset': preset, 'n': n}, seed=seed,
                              input_digest=digest, outputs=[out],
                              wall_clock=time.perf_counter() - started).write()
    console.print(f"已写出 {n} 行到 {out}")


@command('density-grid')
def density_grid(
    model: str = typer.Option(..., '--model'),
    xlim: Tuple[float, float] = typer.Option(..., '--xlim'),
    ylim: Tuple[float, float] = typer.Option(..., '--ylim'),
    res: int = typer.Option(100, '--res'),
    seed: Optional[int] = typer.Option(None, '--seed'),
    out: str = typer.Option('grid.csv', '--out'),
):
    """在 res×res 网格上输出二维模型的密度"""
    started = time.perf_counter()
    document = model_manager.load_document(model)
    cfg = _config_from_document(document, seed)
    grid = density_grid_values(document.to_model(), xlim, ylim, res, cfg.series, cfg.seed)
    data_manager.write_grid(out, grid)
    model_manager.RunManifest(command='density-grid', config={'xlim': list(xlim), 'ylim': list(ylim), 'res': res},
                              seed=cfg.seed, input_digest=data_manager.file_digest(model), outputs=[out],
                              wall_clock=time.perf_counter() - started).write()
    console.print(f"已写出 {grid.shape[0]} 个网格点到 {out}")


@command('classify')
def classify(
    input_csv: str = typer.Argument(...),
    model: str = typer.Option(..., '--model'),
    header: str = typer.Option('auto', '--header'),
    out: str = typer.Option('labels.csv', '--out'),
):
    """按最大后验概率给出硬标签"""
    started = time.perf_counter()
    document = model_manager.load_document(model)
    cfg = _config_from_document(document)
    table = data_manager.read_matrix(input_csv, header)
    partition = classify_model(table.data, document.to_model(), cfg)
    data_manager.write_labels(out, partition.labels)
    model_manager.RunManifest(command='classify', seed=cfg.seed, input_digest=data_manager.file_digest(input_csv),
                              outputs=[out], wall_clock=time.perf_counter() - started).write()
    console.print(f"已写出 {len(partition)} 个标签到 {out}")


@command('eval')
def evaluate(
    labels: Optional[str] = typer.Option(None, '--labels'),
    truth: Optional[str] = typer.Option(None, '--truth'),
    model: Optional[str] = typer.Option(None, '--model'),
    data: Optional[str] = typer.Option(None, '--data'),
    header: str = typer.Option('auto', '--header'),
):
    """比较两组标签的ARI，或计算模型在数据上的对数似然与BIC"""
    if labels and truth:
        score = adjusted_rand_index(data_manager.read_labels(labels), data_manager.read_labels(truth))
        console.print(f"ARI = {score:.6f}")
    elif model and data:
        document = model_manager.load_document(model)
        mixture = document.to_model()
        table = data_manager.read_matrix(data, header)
        value = loglik(table.data, mixture, _config_from_document(document))
        n, d = table.data.shape
        console.print(f"loglik = {value:.6f}")
        console.print(f"BIC = {bic(value, n, mixture.k, d):.6f}")
    else:
        raise InputError("需要 --labels 与 --truth，或 --model 与 --data")


@command('select-k')
def select_k(
    input_csv: str = typer.Argument(...),
    ks: List[int] = typer.Option(..., '--k', help="可重复给出，例如 --k 1 --k 2 --k 3"),
    seed: Optional[int] = typer.Option(None, '--seed'),
    max_iter: Optional[int] = typer.Option(None, '--max-iter'),
    threads: Optional[int] = typer.Option(None, '--threads', envvar='SSGMIX_THREADS'),
    header: str = typer.Option('auto', '--header'),
    out: Optional[str] = typer.Option(None, '--out', help="保存BIC最优的模型"),
):
    """对给定的若干 K 分别拟合并按BIC比较"""
    started = time.perf_counter()
    data_table = data_manager.read_matrix(input_csv, header)
    cfg = _fit_config(seed, max_iter, None, None, None, None, threads)
    best, results = select_k_model(data_table.data, ks, cfg)

    table = Table(title="BIC 比较")
    table.add_column("K", justify="right")
    table.add_column("loglik", justify="right")
    table.add_column("BIC", justify="right")
    table.add_column("迭代", justify="right")
    for k, result in sorted(results.items()):
        marker = " *" if k == best else ""
        table.add_row(f"{k}{marker}", f"{result.loglik:.4f}", f"{result.bic:.4f}", str(result.n_iter))
    console.print(table)
    if out:
        model_manager.save_model(out, results[best].model, _fit_meta(cfg, results[best]))
        model_manager.RunManifest(command='select-k', config=cfg.model_dump(mode='json'), seed=cfg.seed,
                                  input_digest=data_manager.file_digest(input_csv), outputs=[out],
                                  wall_clock=time.perf_counter() - started).write()


@command('tail-table')
def tail_table(
    n_draws: int = typer.Option(1_000_000, '--n-draws'),
    seed: int = typer.Option(0, '--seed'),
):
    """正稳定分布的上尾概率 Pr(P > p) 表"""
    values = upper_tail_table(TAIL_TABLE_ALPHAS, TAIL_TABLE_POINTS, n_draws, seed)
    table = Table(title="Pr(P > p)")
    table.add_column("p", justify="right")
    for alpha in TAIL_TABLE_ALPHAS:
        table.add_column(f"α={alpha}", justify="right")
    for row, point in zip(values, TAIL_TABLE_POINTS):
        table.add_row(f"{point:g}", *[f"{v:.4f}" for v in row])
    console.print(table)


if __name__ == "__main__":
    app()
