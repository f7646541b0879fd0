"""可复现的基准实验：生成 → 提取 → 编码 → 乘法，每个网格单元输出一行 CSV。

网格按 维度 × α × U × 重复 的顺序展开，单元格种子由基础种子和单元格序号经
SeedSequence 派生，生成与提取共用同一个派生种子。单元格可以在进程池中并发执行，
输出行的顺序始终与网格顺序一致。
"""
from __future__ import annotations

import asyncio
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .codec import crossover_predicate, decode, encode, storage_report
from .errors import DegenerateInputError, InvariantViolation
from .extractor import ExtractConfig, run_extraction
from .kernels import mm_compressed, mm_csr, mm_dense
from .matrix import GenSpec, csr_break_even_alpha, generate_dense, to_csr
from .report import BenchRecord, RowStatus, SweepRecord
from .utils.concurrency import run_tasks_with_limit
from .utils.logger import get_logger

logger = get_logger(__name__)

ProgressCallback = Callable[[int, int], None]

# 乘法输入向量的取值范围（闭区间）
VECTOR_LOW = -8
VECTOR_HIGH = 8


def default_alpha_grid() -> List[float]:
    """0.05, 0.10, ..., 1.00"""
    return [round(0.05 * k, 2) for k in range(1, 21)]


def derive_seed(base_seed: int, index: int) -> int:
    """单元格种子：由 (基础种子, 序号) 确定的 64 位整数"""
    state = np.random.SeedSequence([base_seed, index]).generate_state(1, dtype=np.uint64)
    return int(state[0])


@dataclass(frozen=True)
class BenchCell:
    """一个网格单元的全部输入，可在进程间传递"""

    index: int
    rows: int
    cols: int
    alpha: float
    unique_values: int
    repetition: int
    seed: int
    extract: ExtractConfig
    zero_level: bool = False
    value_range: int = 127
    timing: bool = True

    def gen_spec(self) -> GenSpec:
        return GenSpec(
            rows=self.rows,
            cols=self.cols,
            target_alpha=self.alpha,
            unique_values=self.unique_values,
            seed=self.seed,
            zero_level=self.zero_level,
            value_range=self.value_range,
        )


@dataclass(frozen=True)
class ExperimentSpec:
    """实验网格"""

    dims: Tuple[Tuple[int, int], ...] = ((100, 100),)
    alphas: Tuple[float, ...] = (0.25, 0.5, 0.75)
    unique_values: Tuple[int, ...] = (2,)
    extract: ExtractConfig = field(default_factory=ExtractConfig)
    repetitions: int = 1
    zero_level: bool = False
    value_range: int = 127
    timing: bool = True
    jobs: int = 1

    def validate(self) -> None:
        if not self.dims or not self.alphas or not self.unique_values:
            raise DegenerateInputError("维度、α、U 列表都不能为空")
        if self.repetitions < 1:
            raise DegenerateInputError(f"重复次数必须 ≥ 1，当前为 {self.repetitions}")
        if self.jobs < 1:
            raise DegenerateInputError(f"并发数必须 ≥ 1，当前为 {self.jobs}")
        self.extract.validate()
        for rows, cols in self.dims:
            for alpha in self.alphas:
                for u in self.unique_values:
                    GenSpec(rows, cols, alpha, u, zero_level=self.zero_level,
                            value_range=self.value_range).validate()

    def cells(self) -> List[BenchCell]:
        """按网格顺序展开的单元格"""
        out: List[BenchCell] = []
        index = 0
        for rows, cols in self.dims:
            for alpha in self.alphas:
                for u in self.unique_values:
                    for repetition in range(self.repetitions):
                        seed = derive_seed(self.extract.seed, index)
                        out.append(BenchCell(
                            index=index,
                            rows=rows,
                            cols=cols,
                            alpha=alpha,
                            unique_values=u,
                            repetition=repetition,
                            seed=seed,
                            extract=replace(self.extract, seed=seed),
                            zero_level=self.zero_level,
                            value_range=self.value_range,
                            timing=self.timing,
                        ))
                        index += 1
        return out


def _empty_record(cell: BenchCell) -> BenchRecord:
    return BenchRecord(
        rows=cell.rows,
        cols=cell.cols,
        alpha=cell.alpha,
        unique_values=cell.unique_values,
        zero_level=cell.zero_level,
        repetition=cell.repetition,
        seed=cell.seed,
    )


def _failed(record: BenchRecord, error: BaseException) -> BenchRecord:
    record.status = RowStatus.FAILED
    record.error = f"{type(error).__name__}: {error}"
    return record


def run_cell(cell: BenchCell) -> BenchRecord:
    """执行一个单元格；失败时返回 status=failed 的记录而不是抛出异常"""
    record = _empty_record(cell)
    try:
        m = generate_dense(cell.gen_spec())

        started = time.perf_counter()
        result = run_extraction(m, cell.extract)
        extracted = time.perf_counter()
        c = encode(result.remainder, result.commons, m.shape)
        encoded = time.perf_counter()

        v = np.random.default_rng(cell.seed).integers(VECTOR_LOW, VECTOR_HIGH + 1, size=m.cols)
        y_dense, dense_stats = mm_dense(m, v)
        y_csr, csr_stats = mm_csr(to_csr(m), v)
        multiply_started = time.perf_counter()
        y_cse, cse_stats = mm_compressed(c, v)
        multiplied = time.perf_counter()

        report = storage_report(c, m.nnz)
        report.check_identities()
        if decode(c) != m:
            raise InvariantViolation("解码结果与原矩阵不一致")
        if not (np.array_equal(y_dense, y_csr) and np.array_equal(y_dense, y_cse)):
            raise InvariantViolation("三种乘法核的结果不一致")
        if cse_stats.additions != m.nnz - report.gain:
            raise InvariantViolation(
                f"压缩核加法次数 {cse_stats.additions} ≠ E - gain = {m.nnz - report.gain}"
            )

        record.nnz = m.nnz
        record.gain = report.gain
        record.n_cse = report.n_cse
        record.adds_baseline = dense_stats.additions
        record.adds_csr = csr_stats.additions
        record.adds_cse = cse_stats.additions
        record.mults_cse = cse_stats.multiplications
        record.s_weights = report.s_weights
        record.s_cse = report.s_cse
        record.s_singles = report.s_singles
        record.s_total = report.s_total
        record.s_csr = report.s_csr
        record.ratio_vs_dense = report.ratio_vs_dense
        record.ratio_vs_csr = report.ratio_vs_csr
        record.crossover = crossover_predicate(
            Fraction(m.nnz, m.rows * m.cols), int(m.unique_values().size),
            m.rows, m.cols, report.n_cse, report.gain,
        )
        if cell.timing:
            record.extract_seconds = extracted - started
            record.encode_seconds = encoded - extracted
            record.multiply_seconds = multiplied - multiply_started
    except Exception as e:
        logger.warning(f"单元格 {cell.index} ({cell.rows}×{cell.cols}, α={cell.alpha}, U={cell.unique_values}) 失败: {e}")
        return _failed(record, e)

    return record


async def run_bench_async(spec: ExperimentSpec,
                          progress_callback: Optional[ProgressCallback] = None) -> List[BenchRecord]:
    """在工作池中运行整个网格，结果按网格顺序返回"""
    spec.validate()
    cells = spec.cells()
    logger.info(f"开始基准测试：{len(cells)} 个单元格，并发数 {spec.jobs}")

    results = await run_tasks_with_limit(
        run_cell,
        [(cell,) for cell in cells],
        spec.jobs,
        progress_callback,
    )

    records: List[BenchRecord] = []
    for cell, (record, error) in zip(cells, results):
        if error is not None or record is None:
            record = _failed(_empty_record(cell), error or RuntimeError("任务未返回结果"))
        records.append(record)

    failed = sum(r.status is RowStatus.FAILED for r in records)
    logger.info(f"基准测试完成：成功 {len(records) - failed}/{len(records)}")
    return records


def run_bench(spec: ExperimentSpec,
              progress_callback: Optional[ProgressCallback] = None) -> List[BenchRecord]:
    return asyncio.run(run_bench_async(spec, progress_callback))


def sweep(rows: int, cols: int, alphas: Sequence[float],
          unique_values: Sequence[int]) -> List[SweepRecord]:
    """|CSE| = 0 时 CSR、稠密与压缩格式的解析存储量随 α 的变化，每列字母表满额"""
    if rows < 1 or cols < 1:
        raise DegenerateInputError(f"矩阵尺寸必须 ≥ 1，当前为 {rows}×{cols}")
    total = rows * cols
    out: List[SweepRecord] = []
    for u in unique_values:
        if u < 1:
            raise DegenerateInputError(f"U 必须 ≥ 1，当前为 {u}")
        for alpha in alphas:
            if not 0 < alpha <= 1:
                raise DegenerateInputError(f"非零率 α 必须在 (0, 1] 内，当前为 {alpha}")
            nnz = int(np.floor(alpha * total + 0.5))
            s_csr = 2 * nnz + rows
            out.append(SweepRecord(
                rows=rows,
                cols=cols,
                alpha=alpha,
                unique_values=u,
                nnz=nnz,
                s_dense=total,
                s_csr=s_csr,
                s_total=cols * (u + 1) + nnz + rows,
                csr_efficient=Fraction(nnz, total) < csr_break_even_alpha(cols),
                crossover=crossover_predicate(Fraction(nnz, total), u, rows, cols),
            ))
    return out
