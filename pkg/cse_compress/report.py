"""基准测试结果记录与 CSV 报告读写。"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Sequence, Type, TypeVar, Union

import pandas as pd

from .utils.logger import get_logger

logger = get_logger(__name__)


class RowStatus(Enum):
    """单元格处理状态"""
    OK = "ok"
    FAILED = "failed"


@dataclass
class BenchRecord:
    """网格中一个 (维度, α, U, 重复) 单元格的结果"""

    rows: int
    cols: int
    alpha: float
    unique_values: int
    zero_level: bool = False
    repetition: int = 0
    seed: int = 0
    nnz: int = 0
    gain: int = 0
    n_cse: int = 0
    adds_baseline: int = 0
    adds_csr: int = 0
    adds_cse: int = 0
    mults_cse: int = 0
    s_weights: int = 0
    s_cse: int = 0
    s_singles: int = 0
    s_total: int = 0
    s_csr: int = 0
    ratio_vs_dense: float = 0.0
    ratio_vs_csr: float = 0.0
    crossover: bool = False
    extract_seconds: float = 0.0
    encode_seconds: float = 0.0
    multiply_seconds: float = 0.0
    status: RowStatus = RowStatus.OK
    error: str = ""

    def to_dict(self) -> Dict[str, Any]:
        """转换为字典格式"""
        data = asdict(self)
        data["status"] = self.status.value
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BenchRecord":
        """从字典创建记录"""
        values = _coerce(cls, data)
        values["status"] = RowStatus(values.get("status", "ok"))
        return cls(**values)


@dataclass
class SweepRecord:
    """存储曲线扫描中的一个点（|CSE| = 0 的解析存储量）"""

    rows: int
    cols: int
    alpha: float
    unique_values: int
    nnz: int
    s_dense: int
    s_csr: int
    s_total: int
    csr_efficient: bool
    crossover: bool

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SweepRecord":
        return cls(**_coerce(cls, data))


Record = Union[BenchRecord, SweepRecord]
R = TypeVar("R", BenchRecord, SweepRecord)


def _coerce(cls: Type, data: Dict[str, Any]) -> Dict[str, Any]:
    # pandas 读回的 NaN（空字符串列）与 numpy 标量统一转换为字段声明的类型
    values: Dict[str, Any] = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        raw = data[f.name]
        if f.type in ("int", int):
            values[f.name] = int(raw)
        elif f.type in ("float", float):
            values[f.name] = float(raw)
        elif f.type in ("bool", bool):
            values[f.name] = raw if isinstance(raw, bool) else str(raw).lower() == "true"
        elif f.type in ("str", str):
            values[f.name] = "" if pd.isna(raw) else str(raw)
        else:
            values[f.name] = raw
    return values


def columns_of(cls: Type[Record]) -> List[str]:
    """CSV 列顺序即字段声明顺序"""
    return [f.name for f in fields(cls)]


class ReportManager:
    """CSV 报告管理器"""

    def __init__(self, report_path: Path, record_type: Type[R] = BenchRecord):
        self.report_path = Path(report_path)
        self.record_type = record_type
        self.records: List[R] = []

    def extend(self, records: Sequence[R]) -> None:
        self.records.extend(records)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [record.to_dict() for record in self.records],
            columns=columns_of(self.record_type),
        )

    def save_to_csv(self) -> None:
        """保存记录到 CSV 文件，表头总是写在第一行"""
        self.report_path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(self.report_path, index=False, encoding="utf-8", lineterminator="\n")
        logger.info(f"报告已保存: {self.report_path} ({len(self.records)} 行)")

    def load_from_csv(self) -> None:
        """从 CSV 文件加载记录"""
        if not self.report_path.exists():
            logger.warning(f"报告文件不存在: {self.report_path}")
            return

        frame = pd.read_csv(self.report_path, keep_default_na=False, float_precision="round_trip")
        self.records = []
        for row in frame.to_dict(orient="records"):
            try:
                self.records.append(self.record_type.from_dict(row))
            except (TypeError, ValueError) as e:
                logger.error(f"解析 CSV 行时出错: {row}, 错误: {e}")

    def failed_records(self) -> List[BenchRecord]:
        """获取所有失败的单元格"""
        return [r for r in self.records
                if isinstance(r, BenchRecord) and r.status is RowStatus.FAILED]
