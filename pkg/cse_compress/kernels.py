"""常量矩阵-向量乘法核：稠密基线、CSR、CSE 压缩格式，均精确统计加法与乘法次数。

计数约定：累加进初值为零的输出向量也算一次加法，因此稠密基线在 E 个非零元上
恰好是 E 次加法、E 次乘法。整数运算在每次乘法和累加后检查有符号 64 位范围，
越界抛出 KernelOverflowError 而不是静默回绕。
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .codec import CompressedMatrix, decode
from .errors import DimensionMismatchError, FormatError, InvariantViolation, KernelOverflowError
from .matrix import CsrMatrix, DenseMatrix, from_csr, to_csr
from .utils.logger import get_logger

logger = get_logger(__name__)

INT64_MIN = -(2 ** 63)
INT64_MAX = 2 ** 63 - 1

AnyMatrix = Union[DenseMatrix, CsrMatrix, CompressedMatrix]


class Kernel(Enum):
    """乘法核类型"""
    DENSE = "dense"
    CSR = "csr"
    CSE = "cse"


@dataclass(frozen=True, eq=False)
class InputVector:
    """长度为 N 的有符号整数输入向量"""

    values: np.ndarray

    def __post_init__(self):
        array = np.asarray(self.values)
        if array.ndim != 1:
            raise DimensionMismatchError(f"输入向量必须是一维的，当前维数: {array.ndim}")
        if array.size and not np.issubdtype(array.dtype, np.integer):
            if not np.array_equal(array, np.rint(array)):
                raise DimensionMismatchError("输入向量必须是整数")
        out = array.astype(np.int64)
        out.setflags(write=False)
        object.__setattr__(self, "values", out)

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class OpStats:
    """乘法核执行的加法、乘法次数"""

    additions: int = 0
    multiplications: int = 0

    def to_dict(self) -> Dict[str, int]:
        return {"additions": self.additions, "multiplications": self.multiplications}


KernelResult = Tuple[np.ndarray, OpStats]


def as_vector(values: Union[InputVector, Sequence[int], np.ndarray],
              n_cols: Optional[int] = None) -> InputVector:
    """转换为 InputVector，并检查长度是否等于矩阵列数"""
    vector = values if isinstance(values, InputVector) else InputVector(np.asarray(values))
    if n_cols is not None and len(vector) != n_cols:
        raise DimensionMismatchError(f"输入向量长度 {len(vector)} 与矩阵列数 {n_cols} 不一致")
    return vector


def _checked(value: int) -> int:
    if value < INT64_MIN or value > INT64_MAX:
        raise KernelOverflowError(f"整数运算结果 {value} 超出有符号 64 位范围")
    return value


def mm_dense(m: DenseMatrix, v) -> KernelResult:
    """稠密基线：嵌套循环，跳过零元素，对非零元素做乘加"""
    x = as_vector(v, m.cols).values.tolist()
    y = []
    count = 0
    for row in m.entries.tolist():
        acc = 0
        for j, t in enumerate(row):
            if t == 0:
                continue
            acc = _checked(acc + _checked(t * x[j]))
            count += 1
        y.append(acc)
    return np.array(y, dtype=np.int64), OpStats(additions=count, multiplications=count)


def mm_csr(m: CsrMatrix, v) -> KernelResult:
    """CSR 乘法：逐行遍历 values/col_index"""
    x = as_vector(v, m.cols).values.tolist()
    values = m.values.tolist()
    col_index = m.col_index.tolist()
    y = []
    start = 0
    for end in m.row_ptr.tolist():
        acc = 0
        for k in range(start, end):
            acc = _checked(acc + _checked(values[k] * x[col_index[k]]))
        y.append(acc)
        start = end
    return np.array(y, dtype=np.int64), OpStats(additions=m.nnz, multiplications=m.nnz)


def mm_compressed(c: CompressedMatrix, v) -> KernelResult:
    """直接在六个数组上执行乘法，分三个阶段：

    1. 乘积：P[k] = weights[k]·v[col(k)]，每个权重槽一次乘法；
    2. CSE：每条记录先算 s = P[widx_i] + P[widx_j]，再累加到每个出现行；
    3. Singles：逐个把 P[singles[idx]] 累加到所在行。
    """
    x = as_vector(v, c.cols).values.tolist()
    columns = c.weight_columns().tolist()
    products = [_checked(w * x[col]) for w, col in zip(c.weights.tolist(), columns)]

    y = [0] * c.rows
    additions = 0
    for widx_i, widx_j, occ_rows in c.records():
        if occ_rows.size < 2:
            raise FormatError("CSE 记录长度必须 ≥ 4")
        shared = _checked(products[widx_i] + products[widx_j])
        additions += 1
        for r in occ_rows.tolist():
            y[r] = _checked(y[r] + shared)
            additions += 1

    for r, widx in zip(c.single_rows().tolist(), c.singles.tolist()):
        y[r] = _checked(y[r] + products[widx])
        additions += 1

    return np.array(y, dtype=np.int64), OpStats(additions=additions, multiplications=len(products))


def multiply(matrix: AnyMatrix, v, kernel: Union[Kernel, str] = Kernel.DENSE) -> KernelResult:
    """按核类型分派；稠密/CSR 核可以接受任意表示，CSE 核只接受压缩矩阵"""
    kernel = Kernel(kernel)
    if kernel is Kernel.CSE:
        if not isinstance(matrix, CompressedMatrix):
            raise FormatError("cse 核需要 CSEM 压缩矩阵作为输入")
        return mm_compressed(matrix, v)

    if isinstance(matrix, CompressedMatrix):
        dense = decode(matrix)
    elif isinstance(matrix, CsrMatrix):
        dense = from_csr(matrix)
    else:
        dense = matrix

    if kernel is Kernel.CSR:
        csr = matrix if isinstance(matrix, CsrMatrix) else to_csr(dense)
        return mm_csr(csr, v)
    return mm_dense(dense, v)


def check_equivalence(matrix: AnyMatrix, v, kernel: Union[Kernel, str]) -> KernelResult:
    """运行指定核并与稠密基线逐元素比较，不一致时抛出 InvariantViolation"""
    y, stats = multiply(matrix, v, kernel)
    expected, _ = multiply(matrix, v, Kernel.DENSE)
    if not np.array_equal(y, expected):
        mismatch = np.flatnonzero(y != expected)
        raise InvariantViolation(
            f"{Kernel(kernel).value} 核结果与稠密基线不一致，首个不同的行: {int(mismatch[0])}"
        )
    logger.debug(f"{Kernel(kernel).value} 核与稠密基线一致")
    return y, stats
