"""CSE 压缩格式：三对一维数组（Weights/WP、CSE/CP、Singles/SP）的编解码与存储分析。

每对数组中第一个存值，第二个存指针，指针数组的最后一项等于第一个数组的长度：
    weights  每列出现的不同非零权重，按列分组、组内升序
    wp       wp[j] 为第 j+1 列权重组的起始下标（第 0 列从 0 开始）
    cse      每条记录为 [widx_i, widx_j, r1, r2, ..., rz]
    cp       cp[k] 为第 k+1 条记录在 cse 中的起始下标
    singles  余项矩阵中的元素（权重下标），行优先
    sp       sp[r] 为第 0..r 行 singles 的累计个数

二进制容器（小端）：
    "CSEM" | u16 版本 | u32 M | u32 N | 六个数组依次为 u32 元素个数 + 元素（weights 为 i32，其余为 u32）
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, BinaryIO, Dict, Iterator, Optional, Tuple, Union

import numpy as np

from .errors import (
    ConsistencyError,
    CorruptedSetError,
    DimensionMismatchError,
    FormatError,
    InvariantViolation,
    OverlappingCoverageError,
    TruncatedStreamError,
)
from .extractor import CseSet, ExtractConfig, ExtractResult, run_extraction
from .matrix import INT32_MAX, INT32_MIN, DenseMatrix
from .utils.logger import get_logger

logger = get_logger(__name__)

MAGIC = b"CSEM"
FORMAT_VERSION = 1
ARRAY_NAMES = ("weights", "wp", "cse", "cp", "singles", "sp")

_HEADER = struct.Struct("<4sHII")
_COUNT = struct.Struct("<I")
_UINT32_MAX = 2 ** 32 - 1
_KEY_STRIDE = np.int64(2 ** 32)


def _readonly(array) -> np.ndarray:
    out = np.array(array, dtype=np.int64, copy=True).reshape(-1)
    out.setflags(write=False)
    return out


def _check_pointer_array(name: str, pointers: np.ndarray, target_length: int) -> None:
    if pointers.size == 0:
        if target_length != 0:
            raise FormatError(f"{name} 为空，但对应的数据数组长度为 {target_length}")
        return
    if pointers[0] < 0 or np.any(np.diff(pointers) < 0):
        raise FormatError(f"{name} 必须单调不减")
    if pointers[-1] != target_length:
        raise FormatError(f"{name} 末项 {pointers[-1]} 与数据数组长度 {target_length} 不一致")


@dataclass(frozen=True, eq=False)
class CompressedMatrix:
    """六个一维数组加上原始维度；构造时校验全部格式不变量"""

    rows: int
    cols: int
    weights: np.ndarray
    wp: np.ndarray
    cse: np.ndarray
    cp: np.ndarray
    singles: np.ndarray
    sp: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rows", int(self.rows))
        object.__setattr__(self, "cols", int(self.cols))
        for name in ARRAY_NAMES:
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        """检查格式不变量，违反时抛出 FormatError"""
        if self.rows < 1 or self.cols < 1:
            raise FormatError(f"矩阵尺寸必须 ≥ 1，当前为 {self.rows}×{self.cols}")
        if self.wp.size != self.cols:
            raise FormatError(f"wp 长度 {self.wp.size} 与列数 {self.cols} 不一致")
        if self.sp.size != self.rows:
            raise FormatError(f"sp 长度 {self.sp.size} 与行数 {self.rows} 不一致")

        _check_pointer_array("wp", self.wp, self.weights.size)
        _check_pointer_array("cp", self.cp, self.cse.size)
        _check_pointer_array("sp", self.sp, self.singles.size)

        if np.any(self.weights == 0):
            raise FormatError("weights 中不能出现零")
        columns = self.weight_columns()
        keys = columns * _KEY_STRIDE + self.weights
        if np.unique(keys).size != keys.size:
            raise FormatError("同一列的权重组内存在重复值")

        n_weights = self.weights.size
        if self.singles.size and (self.singles.min() < 0 or self.singles.max() >= n_weights):
            raise FormatError("singles 中的权重下标越界")

        for widx_i, widx_j, occ_rows in self.records():
            if occ_rows.size < 2:
                raise FormatError("CSE 记录长度必须 ≥ 4（两个权重下标 + 至少两行）")
            for widx in (widx_i, widx_j):
                if not 0 <= widx < n_weights:
                    raise FormatError(f"CSE 记录中的权重下标 {widx} 越界")
            if columns[widx_i] == columns[widx_j]:
                raise FormatError(f"CSE 记录的两个权重属于同一列 {columns[widx_i]}")
            if occ_rows.min() < 0 or occ_rows.max() >= self.rows:
                raise FormatError("CSE 记录中的行号越界")

    @property
    def n_cse(self) -> int:
        return int(self.cp.size)

    @property
    def gain(self) -> int:
        """每条记录长 z+2，故 gain = Σ(z-1) = len(cse) - 3·|CSE|"""
        return int(self.cse.size) - 3 * self.n_cse

    @property
    def nnz(self) -> int:
        """原矩阵的非零数 E = 2·Σz + len(singles)，每次出现覆盖两个单元格"""
        return 2 * (int(self.cse.size) - 2 * self.n_cse) + int(self.singles.size)

    def weight_columns(self) -> np.ndarray:
        """与 weights 平行的列号数组（仅在内存中使用，不参与序列化）"""
        return np.repeat(np.arange(self.cols), np.diff(self.wp, prepend=0))

    def single_rows(self) -> np.ndarray:
        return np.repeat(np.arange(self.rows), np.diff(self.sp, prepend=0))

    def records(self) -> Iterator[Tuple[int, int, np.ndarray]]:
        """逐条给出 (widx_i, widx_j, 出现行)"""
        start = 0
        for end in self.cp.tolist():
            record = self.cse[start:end]
            if record.size < 2:
                raise FormatError(f"CSE 记录 [{start}, {end}) 长度不足")
            yield int(record[0]), int(record[1]), record[2:]
            start = end

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CompressedMatrix):
            return NotImplemented
        return (self.rows, self.cols) == (other.rows, other.cols) and all(
            np.array_equal(getattr(self, name), getattr(other, name)) for name in ARRAY_NAMES
        )

    def __repr__(self) -> str:
        return (f"CompressedMatrix(rows={self.rows}, cols={self.cols}, "
                f"weights={self.weights.size}, n_cse={self.n_cse}, singles={self.singles.size})")

    def to_json_dict(self) -> Dict[str, Any]:
        """JSON 调试导出，数组按名称给出"""
        data: Dict[str, Any] = {
            "format": MAGIC.decode("ascii"),
            "version": FORMAT_VERSION,
            "rows": self.rows,
            "cols": self.cols,
        }
        for name in ARRAY_NAMES:
            data[name] = getattr(self, name).tolist()
        return data

    @classmethod
    def from_json_dict(cls, data: Dict[str, Any]) -> "CompressedMatrix":
        try:
            return cls(rows=data["rows"], cols=data["cols"],
                       **{name: data[name] for name in ARRAY_NAMES})
        except KeyError as e:
            raise FormatError(f"JSON 中缺少字段: {e}") from e


@dataclass(frozen=True)
class StorageReport:
    """各数组对的元素个数与 CSR 对照"""

    rows: int
    cols: int
    nnz: int
    n_unique: int
    s_weights: int
    s_cse: int
    s_singles: int
    s_total: int
    s_csr: int
    gain: int
    n_cse: int

    @property
    def s_dense(self) -> int:
        return self.rows * self.cols

    @property
    def ratio_vs_dense(self) -> float:
        return self.s_total / self.s_dense

    @property
    def ratio_vs_csr(self) -> float:
        return self.s_total / self.s_csr

    @property
    def weights_bound(self) -> int:
        """权重数组对的上界 N·(U+1)，每列都含全部 U 个值时取等"""
        return self.cols * (self.n_unique + 1)

    @property
    def total_bound(self) -> int:
        """总存储上界 N·(U+1) + E + M + 2·|CSE| - gain"""
        return self.weights_bound + self.nnz + self.rows + 2 * self.n_cse - self.gain

    def check_identities(self) -> None:
        """核对存储恒等式，不成立时抛出 InvariantViolation"""
        expected_cse = self.gain + 4 * self.n_cse
        if self.s_cse != expected_cse:
            raise InvariantViolation(f"CSE 数组对长度 {self.s_cse}，应为 gain+4|CSE|={expected_cse}")
        expected_singles = self.nnz - 2 * (self.gain + self.n_cse) + self.rows
        if self.s_singles != expected_singles:
            raise InvariantViolation(
                f"Singles 数组对长度 {self.s_singles}，应为 E-2(gain+|CSE|)+M={expected_singles}"
            )
        if self.s_weights > self.weights_bound:
            raise InvariantViolation(f"Weights 数组对长度 {self.s_weights} 超过 N(U+1)={self.weights_bound}")
        if self.s_total != self.s_weights + self.s_cse + self.s_singles:
            raise InvariantViolation("总存储不等于三对数组之和")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "nnz": self.nnz,
            "n_unique": self.n_unique,
            "gain": self.gain,
            "n_cse": self.n_cse,
            "s_weights": self.s_weights,
            "s_cse": self.s_cse,
            "s_singles": self.s_singles,
            "s_total": self.s_total,
            "s_csr": self.s_csr,
            "s_dense": self.s_dense,
            "ratio_vs_dense": self.ratio_vs_dense,
            "ratio_vs_csr": self.ratio_vs_csr,
        }


def encode(remainder: DenseMatrix, commons: CseSet,
           original_dims: Tuple[int, int]) -> CompressedMatrix:
    """把 (余项矩阵, CSE 集合) 编码为六个数组。

    权重组列出原矩阵（余项 ∪ CSE 单元格）每列的全部不同非零值；CSE 记录按
    (col_i, col_j, w_i, w_j) 升序排列，出现行升序，保证输出唯一。
    """
    rows, cols = original_dims
    if remainder.shape != (rows, cols):
        raise DimensionMismatchError(f"余项矩阵形状 {remainder.shape} 与原始维度 {original_dims} 不一致")
    try:
        commons.check_disjoint()
    except CorruptedSetError as e:
        raise ConsistencyError(str(e)) from e

    terms = commons.canonical().terms
    for term in terms:
        if term.occ_rows[-1] >= rows or not (0 <= term.col_i < cols and 0 <= term.col_j < cols):
            raise ConsistencyError(f"CSE 超出矩阵范围: {term}")
        if np.any(remainder.entries[list(term.occ_rows), [term.col_i]] != 0) or \
                np.any(remainder.entries[list(term.occ_rows), [term.col_j]] != 0):
            raise ConsistencyError(f"CSE 单元格与余项矩阵重叠: {term}")

    rem_rows, rem_cols = np.nonzero(remainder.entries)
    rem_values = remainder.entries[rem_rows, rem_cols]

    term_cols = np.array([c for t in terms for c in (t.col_i, t.col_j)], dtype=np.int64)
    term_values = np.array([w for t in terms for w in (t.w_i, t.w_j)], dtype=np.int64)

    all_keys = np.concatenate([rem_cols * _KEY_STRIDE + rem_values,
                               term_cols * _KEY_STRIDE + term_values])
    group_keys = np.unique(all_keys)
    weight_cols = np.floor_divide(group_keys + _KEY_STRIDE // 2, _KEY_STRIDE)
    weights = group_keys - weight_cols * _KEY_STRIDE
    wp = np.cumsum(np.bincount(weight_cols, minlength=cols))

    def lookup(col: int, value: int) -> int:
        key = col * int(_KEY_STRIDE) + value
        idx = int(np.searchsorted(group_keys, key))
        if idx >= group_keys.size or group_keys[idx] != key:
            raise ConsistencyError(f"列 {col} 的权重组中没有 {value}")
        return idx

    cse_parts = []
    cp = []
    length = 0
    for term in terms:
        record = [lookup(term.col_i, term.w_i), lookup(term.col_j, term.w_j), *term.occ_rows]
        cse_parts.extend(record)
        length += len(record)
        cp.append(length)

    singles = np.searchsorted(group_keys, rem_cols * _KEY_STRIDE + rem_values)
    sp = np.cumsum(np.bincount(rem_rows, minlength=rows))

    return CompressedMatrix(
        rows=rows,
        cols=cols,
        weights=weights,
        wp=wp,
        cse=np.array(cse_parts, dtype=np.int64),
        cp=np.array(cp, dtype=np.int64),
        singles=singles,
        sp=sp,
    )


def decode(c: CompressedMatrix) -> DenseMatrix:
    """从六个数组无损还原原始 M×N 矩阵"""
    entries = np.zeros((c.rows, c.cols), dtype=np.int64)
    written = np.zeros((c.rows, c.cols), dtype=bool)
    columns = c.weight_columns()

    def write(row_idx: np.ndarray, col_idx: np.ndarray, values: np.ndarray) -> None:
        flat = row_idx * c.cols + col_idx
        if np.unique(flat).size != flat.size or written[row_idx, col_idx].any():
            raise OverlappingCoverageError("同一单元格被写入两次")
        entries[row_idx, col_idx] = values
        written[row_idx, col_idx] = True

    for widx_i, widx_j, occ_rows in c.records():
        for widx in (widx_i, widx_j):
            write(occ_rows, np.full(occ_rows.size, columns[widx]),
                  np.full(occ_rows.size, c.weights[widx]))

    write(c.single_rows(), columns[c.singles], c.weights[c.singles])
    return DenseMatrix(entries)


def storage_report(c: CompressedMatrix, e_original: Optional[int] = None) -> StorageReport:
    """按实际数组长度统计存储开销；e_original 缺省时由数组推出"""
    nnz = c.nnz if e_original is None else int(e_original)
    s_weights = c.weights.size + c.wp.size
    s_cse = c.cse.size + c.cp.size
    s_singles = c.singles.size + c.sp.size
    return StorageReport(
        rows=c.rows,
        cols=c.cols,
        nnz=nnz,
        n_unique=int(np.unique(c.weights).size),
        s_weights=int(s_weights),
        s_cse=int(s_cse),
        s_singles=int(s_singles),
        s_total=int(s_weights + s_cse + s_singles),
        s_csr=2 * nnz + c.rows,
        gain=c.gain,
        n_cse=c.n_cse,
    )


def alpha_threshold(unique_values: int, rows: int, cols: int,
                    n_cse: int = 0, gain: int = 0) -> Fraction:
    """压缩优于 CSR 的非零率阈值 (U+1)/M + (2|CSE| - gain)/(M·N)"""
    return Fraction(unique_values + 1, rows) + Fraction(2 * n_cse - gain, rows * cols)


def crossover_predicate(alpha: Union[float, Fraction], unique_values: int, rows: int,
                        cols: int, n_cse: int = 0, gain: int = 0) -> bool:
    """α 严格大于阈值时返回 True。

    α = E/(M·N)，分母整除 M·N，所以浮点输入先还原为该分母下的精确分数，
    阈值相等（例如 α=0.1、U=99、M=N=1000）时结果为 False。
    """
    if rows < 1 or cols < 1:
        raise DimensionMismatchError(f"矩阵尺寸必须 ≥ 1，当前为 {rows}×{cols}")
    exact = alpha if isinstance(alpha, Fraction) else Fraction(alpha).limit_denominator(rows * cols)
    return exact > alpha_threshold(unique_values, rows, cols, n_cse, gain)


def compress(m: DenseMatrix, cfg: ExtractConfig) -> Tuple[CompressedMatrix, ExtractResult]:
    """提取 CSE 并编码"""
    result = run_extraction(m, cfg)
    return encode(result.remainder, result.commons, m.shape), result


def _array_bytes(name: str, array: np.ndarray) -> bytes:
    if name == "weights":
        if array.size and (array.min() < INT32_MIN or array.max() > INT32_MAX):
            raise FormatError("weights 超出有符号 32 位范围")
        return array.astype("<i4").tobytes()
    if array.size and (array.min() < 0 or array.max() > _UINT32_MAX):
        raise FormatError(f"{name} 超出无符号 32 位范围")
    return array.astype("<u4").tobytes()


def serialize(c: CompressedMatrix, sink: BinaryIO) -> int:
    """写入 CSEM 二进制容器，返回写入的字节数"""
    written = sink.write(_HEADER.pack(MAGIC, FORMAT_VERSION, c.rows, c.cols))
    for name in ARRAY_NAMES:
        array = getattr(c, name)
        written += sink.write(_COUNT.pack(array.size))
        written += sink.write(_array_bytes(name, array))
    return written


def _remaining(source: BinaryIO) -> Optional[int]:
    try:
        if not source.seekable():
            return None
        here = source.tell()
        end = source.seek(0, io.SEEK_END)
        source.seek(here)
        return end - here
    except (AttributeError, OSError):
        return None


def _read_exact(source: BinaryIO, n: int, what: str) -> bytes:
    remaining = _remaining(source)
    if remaining is not None and remaining < n:
        raise TruncatedStreamError(f"读取 {what} 时数据流提前结束：需要 {n} 字节，剩余 {remaining}")
    data = source.read(n)
    if len(data) != n:
        raise TruncatedStreamError(f"读取 {what} 时数据流提前结束：需要 {n} 字节，得到 {len(data)}")
    return data


def deserialize(source: BinaryIO) -> CompressedMatrix:
    """读取 CSEM 二进制容器；任何错误都不会产生部分对象"""
    magic, version, rows, cols = _HEADER.unpack(_read_exact(source, _HEADER.size, "文件头"))
    if magic != MAGIC:
        raise FormatError(f"魔数不匹配: {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"不支持的格式版本: {version}")

    arrays = {}
    for name in ARRAY_NAMES:
        (count,) = _COUNT.unpack(_read_exact(source, _COUNT.size, f"{name} 长度"))
        data = _read_exact(source, 4 * count, name)
        dtype = "<i4" if name == "weights" else "<u4"
        arrays[name] = np.frombuffer(data, dtype=dtype).astype(np.int64)

    try:
        return CompressedMatrix(rows=rows, cols=cols, **arrays)
    except FormatError as e:
        raise FormatError(f"载入的数据违反格式不变量: {e}") from e


def to_bytes(c: CompressedMatrix) -> bytes:
    buffer = io.BytesIO()
    serialize(c, buffer)
    return buffer.getvalue()


def from_bytes(data: bytes) -> CompressedMatrix:
    return deserialize(io.BytesIO(data))
