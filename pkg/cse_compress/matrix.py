"""稠密矩阵与 CSR 表示，以及实验矩阵生成（幅值剪枝 + 线性量化）。

权重一律为有符号整数，存储为只读的 numpy.int64 二维数组（行优先）。
构造时拒绝超出有符号 32 位范围的权重，这也是 CSEM 容器的元素宽度。
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Sequence

import numpy as np

from .errors import DegenerateInputError, DimensionMismatchError
from .utils.logger import get_logger

logger = get_logger(__name__)

INT32_MIN = -(2 ** 31)
INT32_MAX = 2 ** 31 - 1


def _readonly(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=np.int64, copy=True)
    out.setflags(write=False)
    return out


def _as_int_array(data, what: str) -> np.ndarray:
    array = np.asarray(data)
    if array.size == 0:
        return array.astype(np.int64)
    if not np.issubdtype(array.dtype, np.integer) and array.dtype != np.bool_:
        if not np.array_equal(array, np.rint(array)):
            raise DegenerateInputError(f"{what} 必须是整数")
    return array.astype(np.int64)


@dataclass(frozen=True, eq=False)
class DenseMatrix:
    """M×N 整数权重常量矩阵，所有预言（oracle）的基准。"""

    entries: np.ndarray

    def __post_init__(self):
        entries = _as_int_array(self.entries, "矩阵元素")
        if entries.ndim != 2:
            raise DegenerateInputError(f"矩阵必须是二维的，当前维数: {entries.ndim}")
        if entries.shape[0] < 1 or entries.shape[1] < 1:
            raise DegenerateInputError(f"矩阵行列数必须 ≥ 1，当前形状: {entries.shape}")
        if entries.min() < INT32_MIN or entries.max() > INT32_MAX:
            raise DegenerateInputError("权重超出有符号 32 位范围")
        object.__setattr__(self, "entries", _readonly(entries))

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[int]]) -> "DenseMatrix":
        """从嵌套列表创建矩阵"""
        return cls(np.array([list(row) for row in rows], dtype=np.int64))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "DenseMatrix":
        return cls(np.zeros((rows, cols), dtype=np.int64))

    @property
    def rows(self) -> int:
        return int(self.entries.shape[0])

    @property
    def cols(self) -> int:
        return int(self.entries.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def nnz(self) -> int:
        """非零元素个数 E"""
        return int(np.count_nonzero(self.entries))

    def unique_values(self) -> np.ndarray:
        """矩阵中出现的不同非零权重（升序）"""
        return np.unique(self.entries[self.entries != 0])

    def to_rows(self) -> List[List[int]]:
        return self.entries.tolist()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DenseMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.entries, other.entries))

    def __repr__(self) -> str:
        return f"DenseMatrix(rows={self.rows}, cols={self.cols}, nnz={self.nnz})"


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    """CSR 表示。row_ptr 沿用 SP 的约定：长度为 M，第 r 项为第 0..r 行的非零累计数。"""

    cols: int
    values: np.ndarray
    col_index: np.ndarray
    row_ptr: np.ndarray

    def __post_init__(self):
        values = _as_int_array(self.values, "values").reshape(-1)
        col_index = _as_int_array(self.col_index, "col_index").reshape(-1)
        row_ptr = _as_int_array(self.row_ptr, "row_ptr").reshape(-1)

        if self.cols < 1:
            raise DegenerateInputError(f"列数必须 ≥ 1，当前为 {self.cols}")
        if row_ptr.size < 1:
            raise DegenerateInputError("row_ptr 不能为空")
        if values.size != col_index.size:
            raise DimensionMismatchError(
                f"values 与 col_index 长度不一致: {values.size} != {col_index.size}"
            )
        if np.any(np.diff(row_ptr) < 0) or row_ptr[0] < 0:
            raise DegenerateInputError("row_ptr 必须单调不减")
        if row_ptr[-1] != values.size:
            raise DegenerateInputError(
                f"row_ptr 末项必须等于非零数 {values.size}，当前为 {row_ptr[-1]}"
            )
        if col_index.size and (col_index.min() < 0 or col_index.max() >= self.cols):
            raise DegenerateInputError("col_index 超出列范围")

        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "col_index", _readonly(col_index))
        object.__setattr__(self, "row_ptr", _readonly(row_ptr))

    @property
    def rows(self) -> int:
        return int(self.row_ptr.size)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    def row_of_entries(self) -> np.ndarray:
        """每个非零元素所在的行号"""
        counts = np.diff(self.row_ptr, prepend=0)
        return np.repeat(np.arange(self.rows), counts)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CsrMatrix):
            return NotImplemented
        return (
            self.cols == other.cols
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.col_index, other.col_index)
            and np.array_equal(self.row_ptr, other.row_ptr)
        )


@dataclass(frozen=True)
class GenSpec:
    """实验矩阵生成参数。

    zero_level 为 True 时 U 把零也算作一个量化级（前人工作的 0/1 字母表），
    非零字母表为 1..U-1；否则生成 U 个有符号非零级，幸存值先映射到 ±value_range。
    """

    rows: int
    cols: int
    target_alpha: float
    unique_values: int
    seed: int = 0
    zero_level: bool = False
    value_range: int = 127

    def validate(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise DegenerateInputError(f"矩阵尺寸必须 ≥ 1，当前为 {self.rows}×{self.cols}")
        if not 0 < self.target_alpha <= 1:
            raise DegenerateInputError(f"非零率 α 必须在 (0, 1] 内，当前为 {self.target_alpha}")
        if self.unique_values < 1:
            raise DegenerateInputError(f"U 必须 ≥ 1，当前为 {self.unique_values}")
        if self.zero_level and self.unique_values < 2:
            raise DegenerateInputError("zero_level 模式下 U 包含零，至少需要 2")
        if not 0 <= self.seed < 2 ** 64:
            raise DegenerateInputError(f"种子必须是 64 位无符号整数，当前为 {self.seed}")
        if self.value_range < 1:
            raise DegenerateInputError(f"value_range 必须 ≥ 1，当前为 {self.value_range}")

    @property
    def target_nnz(self) -> int:
        """round(α·M·N)，0.5 向上取整"""
        return math.floor(self.target_alpha * self.rows * self.cols + 0.5)


def quantize_linear(values, levels: int) -> np.ndarray:
    """把数值映射到 [min, max] 上 levels 个等距量化级中最近的一级。

    等距时取较低的一级。量化级四舍五入为整数；落在零上的级沿自身符号方向
    平移一个量化步长，保证输出中没有零（是否为零只由剪枝决定）。
    """
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise DegenerateInputError("量化输入不能为空")
    if levels < 1:
        raise DegenerateInputError(f"量化级数必须 ≥ 1，当前为 {levels}")

    lo = float(values.min())
    hi = float(values.max())
    if levels == 1 or hi == lo:
        grid = np.array([lo])
        step = 1.0 if hi == lo else hi - lo
        index = np.zeros(values.size, dtype=np.int64)
    else:
        step = (hi - lo) / (levels - 1)
        grid = np.linspace(lo, hi, levels)
        position = (values - lo) / step
        index = np.floor(position)
        index += (position - index) > 0.5
        index = np.clip(index, 0, levels - 1).astype(np.int64)

    level_values = np.rint(grid).astype(np.int64)
    for k in np.flatnonzero(level_values == 0):
        direction = 1.0 if grid[k] >= 0 else -1.0
        displaced = int(np.rint(grid[k] + direction * step))
        level_values[k] = displaced if displaced != 0 else int(direction)

    return level_values[index]


def _quantize_survivors(survivors: np.ndarray, spec: GenSpec) -> np.ndarray:
    if spec.zero_level:
        levels = spec.unique_values - 1
        magnitudes = np.abs(survivors)
        lo, hi = magnitudes.min(), magnitudes.max()
        if levels == 1 or hi == lo:
            return np.ones(survivors.size, dtype=np.int64)
        scaled = 1.0 + (magnitudes - lo) / (hi - lo) * (levels - 1)
        return quantize_linear(scaled, levels)

    peak = float(np.abs(survivors).max())
    scaled = survivors / peak * spec.value_range
    return quantize_linear(scaled, spec.unique_values)


def generate_dense(spec: GenSpec) -> DenseMatrix:
    """按剪枝 + 线性量化流程构造实验矩阵。

    从 N(0,1) 抽取 M·N 个值，保留绝对值最大的 round(α·M·N) 个（幅值相同按行优先
    位置决胜），其余置零，再把幸存值线性量化为至多 U 个非零级。相同种子逐位可复现。
    """
    spec.validate()
    total = spec.rows * spec.cols
    target = spec.target_nnz
    if target < 1:
        raise DegenerateInputError(
            f"α·M·N = {spec.target_alpha * total:.3f} < 1，生成的矩阵将为空"
        )

    rng = np.random.default_rng(spec.seed)
    raw = rng.standard_normal(total)

    # 稳定排序：幅值相同者保持行优先顺序
    order = np.argsort(-np.abs(raw), kind="stable")
    keep = np.sort(order[:target])

    flat = np.zeros(total, dtype=np.int64)
    flat[keep] = _quantize_survivors(raw[keep], spec)

    matrix = DenseMatrix(flat.reshape(spec.rows, spec.cols))
    logger.debug(
        f"生成矩阵 {spec.rows}×{spec.cols}: E={matrix.nnz}, "
        f"不同非零值={matrix.unique_values().size}, seed={spec.seed}"
    )
    return matrix


def nonzero_ratio(m: DenseMatrix) -> float:
    """非零率 α = E / (M·N)"""
    return m.nnz / (m.rows * m.cols)


def to_csr(m: DenseMatrix) -> CsrMatrix:
    """无损转换为 CSR（行优先遍历非零元素）"""
    row_idx, col_idx = np.nonzero(m.entries)
    counts = np.bincount(row_idx, minlength=m.rows)
    return CsrMatrix(
        cols=m.cols,
        values=m.entries[row_idx, col_idx],
        col_index=col_idx,
        row_ptr=np.cumsum(counts),
    )


def from_csr(c: CsrMatrix) -> DenseMatrix:
    """CSR 还原为稠密矩阵"""
    entries = np.zeros((c.rows, c.cols), dtype=np.int64)
    entries[c.row_of_entries(), c.col_index] = c.values
    return DenseMatrix(entries)


def csr_storage_size(m: CsrMatrix) -> int:
    """CSR 存储的元素个数 2E + M"""
    return 2 * m.nnz + m.rows


def csr_break_even_alpha(n_cols: int) -> Fraction:
    """CSR 比稠密存储更省空间的非零率上界 (N-1)/(2N)，精确分数"""
    return Fraction(n_cols - 1, 2 * n_cols)
