"""异常层次 - 库内所有错误都派生自 CsemError，CLI 根据类型映射退出码。"""
from __future__ import annotations


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class CsemError(Exception):
    """所有 cse_compress 错误的基类"""

    exit_code = EXIT_DATA


class DegenerateInputError(CsemError, ValueError):
    """输入退化：空矩阵、列数不足、参数越界等"""


class DimensionMismatchError(CsemError, ValueError):
    """矩阵与向量（或两个矩阵）的维度不匹配"""


class FormatError(CsemError):
    """压缩格式或文件格式错误"""


class TruncatedStreamError(FormatError):
    """CSEM 数据流在声明的长度之前结束"""


class OverlappingCoverageError(FormatError):
    """解码时同一个单元格被写入两次"""


class ConsistencyError(CsemError):
    """编码输入（余项矩阵与 CSE 集合）互相矛盾"""


class CorruptedSetError(CsemError):
    """CSE 集合引用了已经为零或数值不符的单元格"""


class KernelOverflowError(CsemError, ArithmeticError):
    """整数累加超出有符号 64 位范围"""


class InvariantViolation(CsemError, AssertionError):
    """运行期交叉校验失败（存储恒等式、加法计数、核等价性）"""

    exit_code = EXIT_INTERNAL


def exit_code_for(exc: BaseException) -> int:
    """根据异常类型返回 CLI 退出码"""
    if isinstance(exc, CsemError):
        return exc.exit_code
    return EXIT_INTERNAL
