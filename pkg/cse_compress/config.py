"""配置管理模块 - 读写 ~/.cse_compress.toml 和环境变量。"""
from __future__ import annotations

import os
import sys
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_CONFIG_PATH = Path.home() / ".cse_compress.toml"

# 当前目录下的 .env 优先于默认值，但不覆盖已经导出的环境变量
load_dotenv()


def _env_bool(name: str, default: bool) -> bool:
    raw = os.getenv(name)
    if raw is None:
        return default
    return raw.strip().lower() in ("1", "true", "yes", "on")


class Settings:
    """应用设置类，支持从环境变量和配置文件读取。"""

    def __init__(self):
        # 提取参数
        self.iterations: int = int(os.getenv("CSEM_ITERATIONS", "100"))
        self.attempts: int = int(os.getenv("CSEM_ATTEMPTS", "500"))
        self.seed: int = int(os.getenv("CSEM_SEED", "0"))
        self.early_stop: bool = _env_bool("CSEM_EARLY_STOP", False)

        # 生成参数：浮点幸存值映射到 ±value_range 的定点网格
        self.value_range: int = int(os.getenv("CSEM_VALUE_RANGE", "127"))

        # 基准测试
        self.jobs: int = int(os.getenv("CSEM_JOBS", "1"))
        self.repetitions: int = int(os.getenv("CSEM_REPETITIONS", "1"))

        self.log_level: str = os.getenv("CSEM_LOG_LEVEL", "INFO")

    def validate(self) -> bool:
        """验证配置项是否在合法范围内。"""
        problems = []
        if self.iterations < 1:
            problems.append(f"iterations 必须 ≥ 1，当前为 {self.iterations}")
        if self.attempts < 0:
            problems.append(f"attempts 不能为负数，当前为 {self.attempts}")
        if self.jobs < 1:
            problems.append(f"jobs 必须 ≥ 1，当前为 {self.jobs}")
        if self.repetitions < 1:
            problems.append(f"repetitions 必须 ≥ 1，当前为 {self.repetitions}")
        if self.value_range < 1:
            problems.append(f"value_range 必须 ≥ 1，当前为 {self.value_range}")

        for problem in problems:
            logger.error(f"配置错误：{problem}")
        return not problems

    def load_from_file(self, config_path: Optional[Path] = None) -> bool:
        """从配置文件加载设置。

        Args:
            config_path: 配置文件路径，默认为 ~/.cse_compress.toml

        Returns:
            是否成功加载配置
        """
        if config_path is None:
            config_path = DEFAULT_CONFIG_PATH

        if not config_path.exists():
            logger.debug(f"配置文件不存在: {config_path}")
            return False

        try:
            with open(config_path, "rb") as f:
                config_data = tomllib.load(f)
        except (OSError, tomllib.TOMLDecodeError) as e:
            logger.error(f"加载配置文件失败: {e}")
            return False

        extract_config = config_data.get("extract", {})
        self.iterations = int(extract_config.get("iterations", self.iterations))
        self.attempts = int(extract_config.get("attempts", self.attempts))
        self.seed = int(extract_config.get("seed", self.seed))
        self.early_stop = bool(extract_config.get("early_stop", self.early_stop))

        generate_config = config_data.get("generate", {})
        self.value_range = int(generate_config.get("value_range", self.value_range))

        bench_config = config_data.get("bench", {})
        self.jobs = int(bench_config.get("jobs", self.jobs))
        self.repetitions = int(bench_config.get("repetitions", self.repetitions))

        logging_config = config_data.get("logging", {})
        self.log_level = str(logging_config.get("level", self.log_level))

        logger.info(f"成功加载配置文件: {config_path}")
        return True

    def to_toml_dict(self) -> Dict[str, Any]:
        """按配置文件的分节结构导出"""
        return {
            "extract": {
                "iterations": self.iterations,
                "attempts": self.attempts,
                "seed": self.seed,
                "early_stop": self.early_stop,
            },
            "generate": {
                "value_range": self.value_range,
            },
            "bench": {
                "jobs": self.jobs,
                "repetitions": self.repetitions,
            },
            "logging": {
                "level": self.log_level,
            },
        }

    def dumps(self) -> str:
        """当前设置的 TOML 文本"""
        return tomli_w.dumps(self.to_toml_dict())

    def save_to_file(self, config_path: Optional[Path] = None) -> bool:
        """保存设置到配置文件。

        Args:
            config_path: 配置文件路径，默认为 ~/.cse_compress.toml

        Returns:
            是否成功保存配置
        """
        if config_path is None:
            config_path = DEFAULT_CONFIG_PATH

        try:
            config_path.parent.mkdir(parents=True, exist_ok=True)
            with open(config_path, "wb") as f:
                tomli_w.dump(self.to_toml_dict(), f)
        except OSError as e:
            logger.error(f"保存配置文件失败: {e}")
            return False

        logger.info(f"成功保存配置文件: {config_path}")
        return True

    def to_dict(self) -> Dict[str, Any]:
        """将配置转换为字典格式"""
        return {
            "iterations": self.iterations,
            "attempts": self.attempts,
            "seed": self.seed,
            "early_stop": self.early_stop,
            "value_range": self.value_range,
            "jobs": self.jobs,
            "repetitions": self.repetitions,
            "log_level": self.log_level,
        }

    def update_from_dict(self, data: Dict[str, Any]) -> None:
        """从字典更新配置"""
        for key, value in data.items():
            if hasattr(self, key):
                setattr(self, key, value)

    def extract_config(self):
        """用当前设置构建 ExtractConfig"""
        from .extractor import ExtractConfig

        return ExtractConfig(
            iterations=self.iterations,
            attempts=self.attempts,
            seed=self.seed,
            early_stop=self.early_stop,
        )


# 全局设置实例
settings = Settings()
