"""矩阵与向量文件的导入导出。

稠密矩阵可以保存为 CSEM 容器（cse/cp 为空）、JSON 或无表头的 CSV；
压缩矩阵保存为 CSEM 或 JSON。格式未指定时按文件后缀判断。
"""
from __future__ import annotations

import json
import re
from dataclasses import asdict
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from .codec import MAGIC, CompressedMatrix, decode, deserialize, encode, serialize
from .errors import FormatError
from .extractor import CseSet
from .matrix import DenseMatrix, GenSpec
from .utils.logger import get_logger

logger = get_logger(__name__)


class FileFormat(Enum):
    """矩阵文件格式"""
    CSEM = "csem"
    JSON = "json"
    CSV = "csv"


def resolve_format(path: Path, fmt: Optional[Union[FileFormat, str]] = None) -> FileFormat:
    """显式格式优先，否则按后缀判断，未知后缀视为 CSEM"""
    if fmt is not None:
        return FileFormat(fmt)
    suffix = Path(path).suffix.lower().lstrip(".")
    try:
        return FileFormat(suffix)
    except ValueError:
        return FileFormat.CSEM


def _read_json(path: Path) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"JSON 解析失败 {path}: {e}") from e


def _write_json(path: Path, data: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, ensure_ascii=False, indent=2)
        f.write("\n")


def save_dense(m: DenseMatrix, path: Path, fmt: Optional[Union[FileFormat, str]] = None) -> FileFormat:
    """保存稠密矩阵，返回实际使用的格式"""
    path = Path(path)
    fmt = resolve_format(path, fmt)
    path.parent.mkdir(parents=True, exist_ok=True)

    if fmt is FileFormat.CSEM:
        save_compressed(encode(m, CseSet(), m.shape), path, fmt)
    elif fmt is FileFormat.JSON:
        _write_json(path, {"rows": m.rows, "cols": m.cols, "entries": m.to_rows()})
    else:
        pd.DataFrame(m.entries).to_csv(path, header=False, index=False)

    logger.debug(f"保存稠密矩阵 {m.rows}×{m.cols} 到 {path} ({fmt.value})")
    return fmt


def save_compressed(c: CompressedMatrix, path: Path,
                    fmt: Optional[Union[FileFormat, str]] = None) -> FileFormat:
    """保存压缩矩阵（CSEM 或 JSON）"""
    path = Path(path)
    fmt = resolve_format(path, fmt)
    path.parent.mkdir(parents=True, exist_ok=True)

    if fmt is FileFormat.CSEM:
        with open(path, "wb") as f:
            serialize(c, f)
    elif fmt is FileFormat.JSON:
        _write_json(path, c.to_json_dict())
    else:
        raise FormatError("压缩矩阵不支持 CSV 格式，请使用 csem 或 json")
    return fmt


def load_matrix(path: Path, fmt: Optional[Union[FileFormat, str]] = None
                ) -> Union[DenseMatrix, CompressedMatrix]:
    """读取矩阵文件：CSEM 容器与带 format 字段的 JSON 返回 CompressedMatrix，其余返回 DenseMatrix"""
    path = Path(path)
    if not path.exists():
        raise FormatError(f"文件不存在: {path}")
    fmt = resolve_format(path, fmt)

    if fmt is FileFormat.CSEM:
        with open(path, "rb") as f:
            return deserialize(f)

    if fmt is FileFormat.JSON:
        data = _read_json(path)
        if isinstance(data, dict) and data.get("format") == MAGIC.decode("ascii"):
            return CompressedMatrix.from_json_dict(data)
        entries = data.get("entries") if isinstance(data, dict) else data
        if entries is None:
            raise FormatError(f"JSON 中缺少 entries 字段: {path}")
        return DenseMatrix(np.array(entries, dtype=np.int64))

    try:
        frame = pd.read_csv(path, header=None)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise FormatError(f"CSV 解析失败 {path}: {e}") from e
    if frame.isna().any().any():
        raise FormatError(f"CSV 中存在缺失值: {path}")
    return DenseMatrix(frame.to_numpy())


def load_dense(path: Path, fmt: Optional[Union[FileFormat, str]] = None) -> DenseMatrix:
    """读取作为提取输入的稠密矩阵；已包含 CSE 记录的压缩文件被拒绝"""
    loaded = load_matrix(path, fmt)
    if isinstance(loaded, CompressedMatrix):
        if loaded.n_cse > 0:
            raise FormatError(
                f"{path} 已经是 CSE 压缩矩阵（|CSE|={loaded.n_cse}），提取只接受未压缩的稠密矩阵"
            )
        return decode(loaded)
    return loaded


def load_vector(path: Path) -> np.ndarray:
    """读取输入向量：JSON 数组，或以逗号/空白分隔的整数"""
    path = Path(path)
    if not path.exists():
        raise FormatError(f"文件不存在: {path}")
    text = path.read_text(encoding="utf-8").strip()
    if text.startswith("["):
        try:
            values = json.loads(text)
        except json.JSONDecodeError as e:
            raise FormatError(f"向量 JSON 解析失败 {path}: {e}") from e
    else:
        values = [token for token in re.split(r"[,\s]+", text) if token]
    try:
        return np.array([int(value) for value in values], dtype=np.int64)
    except (TypeError, ValueError) as e:
        raise FormatError(f"向量中存在非整数元素 {path}: {e}") from e


def sidecar_path(path: Path) -> Path:
    """<output>.meta.json"""
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_sidecar(path: Path, spec: GenSpec, m: DenseMatrix) -> Path:
    """记录生成参数与实际非零数"""
    meta: Dict[str, Any] = asdict(spec)
    meta.update({
        "alpha": spec.target_alpha,
        "nnz": m.nnz,
        "distinct_values": int(m.unique_values().size),
    })
    meta.pop("target_alpha")
    target = sidecar_path(path)
    _write_json(target, meta)
    return target


def read_sidecar(path: Path) -> Dict[str, Any]:
    return _read_json(sidecar_path(path))


def format_vector(values: np.ndarray) -> List[int]:
    return [int(v) for v in np.asarray(values).tolist()]
