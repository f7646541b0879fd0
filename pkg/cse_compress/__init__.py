"""cse_compress - 稀疏常量矩阵的 CSE 压缩工具

检测两项公共子表达式，把常量矩阵编码为 Weights/CSE/Singles 三对一维数组，
并提供带运算计数的乘法核与可复现的基准实验。
"""

__version__ = "0.1.0"
__author__ = "cse_compress Team"

__all__ = [
    "__version__",
    "__author__",
]
