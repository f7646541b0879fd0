"""cse_compress 命令行入口。"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from rich.console import Console
from rich.table import Table

from . import __version__
from .bench import ExperimentSpec, default_alpha_grid, run_bench, sweep
from .codec import CompressedMatrix, encode, storage_report
from .config import settings
from .errors import EXIT_DATA, EXIT_INTERNAL, EXIT_OK, EXIT_USAGE, CsemError, exit_code_for
from .extractor import CseSet, ExtractConfig, run_extraction
from .kernels import Kernel, check_equivalence, multiply
from .matrix import GenSpec, generate_dense
from .matrix_io import (
    FileFormat,
    format_vector,
    load_dense,
    load_matrix,
    load_vector,
    save_compressed,
    save_dense,
    write_sidecar,
)
from .report import BenchRecord, ReportManager, RowStatus, SweepRecord
from .utils.logger import get_logger, setup_logger

logger = get_logger(__name__)
console = Console()


class CliParser(argparse.ArgumentParser):
    """用法错误以退出码 1 结束（argparse 默认为 2，与数据错误冲突）"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: 错误: {message}\n")


def _dims(text: str) -> Tuple[int, int]:
    """"100x200" → (100, 200)，单个数字表示方阵"""
    parts = text.lower().replace("×", "x").split("x")
    try:
        values = [int(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"无法解析的矩阵尺寸: {text}")
    if len(values) == 1:
        values = values * 2
    if len(values) != 2 or min(values) < 1:
        raise argparse.ArgumentTypeError(f"矩阵尺寸应为 MxN 且均 ≥ 1: {text}")
    return values[0], values[1]


def _extract_config(args) -> ExtractConfig:
    """以 settings 为基础，命令行给出的项覆盖之"""
    overrides = {
        name: getattr(args, name)
        for name in ("iterations", "attempts", "seed")
        if getattr(args, name) is not None
    }
    if args.early_stop:
        overrides["early_stop"] = True
    return replace(settings.extract_config(), **overrides)


def _storage_table(title: str, report) -> Table:
    table = Table(title=title)
    table.add_column("指标")
    table.add_column("值", justify="right")
    for key, value in report.to_dict().items():
        table.add_row(key, f"{value:.4f}" if isinstance(value, float) else str(value))
    return table


def cmd_generate(args) -> int:
    spec = GenSpec(
        rows=args.rows,
        cols=args.cols,
        target_alpha=args.alpha,
        unique_values=args.unique_values,
        seed=args.seed if args.seed is not None else settings.seed,
        zero_level=args.zero_level,
        value_range=args.value_range if args.value_range is not None else settings.value_range,
    )
    m = generate_dense(spec)
    output = Path(args.output)
    fmt = save_dense(m, output, args.format)
    meta_path = write_sidecar(output, spec, m)
    logger.info(
        f"已生成 {m.rows}×{m.cols} 矩阵: E={m.nnz}, 不同非零值={m.unique_values().size}, "
        f"格式={fmt.value}, 参数记录={meta_path}"
    )
    return EXIT_OK


def cmd_extract(args) -> int:
    m = load_dense(Path(args.input), args.input_format)
    cfg = _extract_config(args)
    cfg.validate()

    started = time.perf_counter()
    result = run_extraction(m, cfg)
    elapsed = time.perf_counter() - started
    c = encode(result.remainder, result.commons, m.shape)
    report = storage_report(c, m.nnz)
    report.check_identities()

    if args.output:
        save_compressed(c, Path(args.output), args.format)
        logger.info(f"压缩结果已保存: {args.output}")

    table = _storage_table("CSE 压缩摘要", report)
    table.add_row("adds_after (E - gain)", str(m.nnz - report.gain))
    table.add_row("iterations", str(result.iterations_run))
    table.add_row("extract_seconds", f"{elapsed:.3f}")
    console.print(table)
    return EXIT_OK


def cmd_multiply(args) -> int:
    matrix = load_matrix(Path(args.matrix), args.input_format)
    v = load_vector(Path(args.vector))
    kernel = Kernel(args.kernel)

    if args.check:
        y, stats = check_equivalence(matrix, v, kernel)
    else:
        y, stats = multiply(matrix, v, kernel)

    payload = {
        "kernel": kernel.value,
        "y": format_vector(y),
        **stats.to_dict(),
    }
    if args.check:
        payload["check"] = "MATCH"

    if args.output:
        output = Path(args.output)
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_text(json.dumps(payload, ensure_ascii=False) + "\n", encoding="utf-8")

    console.print(f"y = {payload['y']}", soft_wrap=True)
    console.print(f"additions = {stats.additions}, multiplications = {stats.multiplications}")
    if args.check:
        console.print("MATCH")
    return EXIT_OK


def _bench_table(records: List[BenchRecord]) -> Table:
    table = Table(title="基准测试结果")
    for column in ("rows", "cols", "alpha", "U", "rep", "E", "gain", "|CSE|",
                   "adds_cse", "s_total", "s_csr", "vs_dense", "status"):
        table.add_column(column, justify="right")
    for r in records:
        table.add_row(
            str(r.rows), str(r.cols), f"{r.alpha:g}", str(r.unique_values), str(r.repetition),
            str(r.nnz), str(r.gain), str(r.n_cse), str(r.adds_cse), str(r.s_total), str(r.s_csr),
            f"{r.ratio_vs_dense:.2%}", r.status.value,
        )
    return table


def _sweep_table(records: List[SweepRecord]) -> Table:
    table = Table(title="存储量扫描")
    for column in ("U", "alpha", "E", "s_dense", "s_csr", "s_total", "crossover"):
        table.add_column(column, justify="right")
    for r in records:
        table.add_row(str(r.unique_values), f"{r.alpha:g}", str(r.nnz), str(r.s_dense),
                      str(r.s_csr), str(r.s_total), "✓" if r.crossover else "")
    return table


def cmd_bench(args) -> int:
    output = Path(args.output)

    if args.sweep:
        rows, cols = args.dims[0] if args.dims else (1000, 1000)
        alphas = args.alpha or default_alpha_grid()
        records = sweep(rows, cols, alphas, args.unique_values or [2, 4, 8])
        manager = ReportManager(output, SweepRecord)
        manager.extend(records)
        manager.save_to_csv()
        if not args.quiet:
            console.print(_sweep_table(records))
        return EXIT_OK

    spec = ExperimentSpec(
        dims=tuple(args.dims or [(100, 100)]),
        alphas=tuple(args.alpha or [0.25, 0.5, 0.75]),
        unique_values=tuple(args.unique_values or [2]),
        extract=_extract_config(args),
        repetitions=args.repetitions if args.repetitions is not None else settings.repetitions,
        zero_level=args.zero_level,
        value_range=args.value_range if args.value_range is not None else settings.value_range,
        timing=not args.no_timing,
        jobs=args.jobs if args.jobs is not None else settings.jobs,
    )

    def progress_callback(current: int, total: int):
        percentage = (current / total) * 100 if total > 0 else 0
        logger.info(f"基准测试进度: {current}/{total} ({percentage:.1f}%)")

    records = run_bench(spec, progress_callback)
    manager = ReportManager(output, BenchRecord)
    manager.extend(records)
    manager.save_to_csv()

    if not args.quiet:
        console.print(_bench_table(records))
    failed = manager.failed_records()
    if failed:
        logger.warning(f"{len(failed)} 个单元格失败，详见 CSV 的 error 列")
        if len(failed) == len(records):
            return EXIT_DATA
    return EXIT_OK


def cmd_inspect(args) -> int:
    loaded = load_matrix(Path(args.input), args.input_format)
    if isinstance(loaded, CompressedMatrix):
        c = loaded
    else:
        c = encode(loaded, CseSet(), loaded.shape)
    console.print_json(data=c.to_json_dict())
    report = storage_report(c)
    console.print(_storage_table("存储统计", report))
    return EXIT_OK


def cmd_config(args) -> int:
    if args.init:
        if not settings.save_to_file(Path(args.init)):
            return EXIT_DATA
    if args.show or not args.init:
        console.print(settings.dumps(), markup=False, highlight=False)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = CliParser(add_help=False)
    common.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        default=None,
        help="日志级别 (默认取自配置，通常为 INFO)"
    )
    common.add_argument("--log-file", help="日志文件路径 (可选)")
    common.add_argument(
        "--input-format",
        choices=[f.value for f in FileFormat],
        default=None,
        help="输入文件格式 (默认按后缀判断)"
    )

    search = CliParser(add_help=False)
    search.add_argument("--seed", type=int, default=None, help="随机种子")
    search.add_argument("--iterations", type=int, default=None, help="迭代次数 It")
    search.add_argument("--attempts", type=int, default=None, help="每轮交换尝试次数 At")
    search.add_argument("--early-stop", action="store_true", help="某轮收益为零时提前停止")

    parser = CliParser(
        prog="cse_compress",
        description=f"cse_compress v{__version__} - 常量矩阵 CSE 压缩与乘法基准工具",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
示例用法:
  python -m cse_compress generate -M 100 -N 100 --alpha 0.25 -U 2 --seed 7 -o m.csem
  python -m cse_compress extract m.csem -o m.cse.csem
  python -m cse_compress multiply m.cse.csem v.txt --kernel cse --check
  python -m cse_compress bench --alpha 0.25 0.5 0.75 -U 2 4 8 -o bench.csv
  python -m cse_compress bench --sweep -U 2 99 -o sweep.csv
        """
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="生成剪枝 + 量化的实验矩阵")
    p.add_argument("-M", "--rows", type=int, required=True, help="行数 M")
    p.add_argument("-N", "--cols", type=int, required=True, help="列数 N")
    p.add_argument("--alpha", type=float, required=True, help="非零率 α ∈ (0, 1]")
    p.add_argument("-U", "--unique-values", type=int, required=True, help="量化级数 U")
    p.add_argument("--seed", type=int, default=None, help="随机种子")
    p.add_argument("--zero-level", action="store_true", help="U 把零也算作一级（0/1 字母表）")
    p.add_argument("--value-range", type=int, default=None, help="定点网格范围 (默认: 127)")
    p.add_argument("-o", "--output", required=True, help="输出文件")
    p.add_argument("--format", choices=[f.value for f in FileFormat], default=None,
                   help="输出格式 (默认按后缀判断)")
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("extract", parents=[common, search], help="提取 CSE 并编码为压缩格式")
    p.add_argument("input", help="稠密矩阵文件")
    p.add_argument("-o", "--output", help="压缩结果输出文件 (可选)")
    p.add_argument("--format", choices=[FileFormat.CSEM.value, FileFormat.JSON.value], default=None,
                   help="输出格式 (默认按后缀判断)")
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser("multiply", parents=[common], help="执行矩阵-向量乘法并统计运算次数")
    p.add_argument("matrix", help="矩阵文件（稠密或压缩）")
    p.add_argument("vector", help="向量文件：JSON 数组或逗号/空白分隔的整数")
    p.add_argument("--kernel", choices=[k.value for k in Kernel], default=Kernel.DENSE.value,
                   help="乘法核 (默认: dense)")
    p.add_argument("--check", action="store_true", help="与稠密基线交叉验证")
    p.add_argument("-o", "--output", help="把结果和运算次数写入 JSON 文件 (可选)")
    p.set_defaults(handler=cmd_multiply)

    p = sub.add_parser("bench", parents=[common, search], help="运行实验网格并输出 CSV 报告")
    p.add_argument("--dims", type=_dims, nargs="+", default=None, help="矩阵尺寸列表，如 100x100 1024")
    p.add_argument("--alpha", type=float, nargs="+", default=None, help="非零率列表")
    p.add_argument("-U", "--unique-values", type=int, nargs="+", default=None, help="量化级数列表")
    p.add_argument("--repetitions", type=int, default=None, help="每个单元格重复次数")
    p.add_argument("--jobs", type=int, default=None, help="并发工作进程数")
    p.add_argument("--zero-level", action="store_true", help="U 把零也算作一级（0/1 字母表）")
    p.add_argument("--value-range", type=int, default=None, help="定点网格范围 (默认: 127)")
    p.add_argument("--no-timing", action="store_true", help="计时列写 0，使重复运行的 CSV 逐字节相同")
    p.add_argument("--sweep", action="store_true", help="只输出 |CSE|=0 的解析存储量曲线")
    p.add_argument("--quiet", action="store_true", help="不在终端打印结果表")
    p.add_argument("-o", "--output", default="bench.csv", help="CSV 输出路径 (默认: bench.csv)")
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("inspect", parents=[common], help="以 JSON 形式查看矩阵文件及其存储统计")
    p.add_argument("input", help="矩阵文件")
    p.set_defaults(handler=cmd_inspect)

    p = sub.add_parser("config", parents=[common], help="查看或初始化配置文件")
    p.add_argument("--show", action="store_true", help="以 TOML 打印当前配置")
    p.add_argument("--init", metavar="PATH", help="把当前配置写入 PATH")
    p.set_defaults(handler=cmd_config)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """主命令行入口函数，返回退出码"""
    settings.load_from_file()
    parser = build_parser()
    args = parser.parse_args(argv)

    log_file = Path(args.log_file) if args.log_file else None
    setup_logger(level=args.log_level or settings.log_level, log_file=log_file)
    logger.debug(f"cse_compress v{__version__} 启动: {args.command}")

    if not settings.validate():
        return EXIT_USAGE

    try:
        return args.handler(args)
    except CsemError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return exit_code_for(e)
    except OSError as e:
        logger.error(f"文件读写失败: {e}")
        return EXIT_DATA
    except KeyboardInterrupt:
        logger.info("用户中断处理")
        return EXIT_USAGE
    except Exception as e:
        logger.exception(f"程序执行失败: {e}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
