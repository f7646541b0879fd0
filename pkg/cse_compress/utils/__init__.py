"""工具包 - 日志、并发执行等通用工具。"""

__all__ = ["concurrency", "logger"]
