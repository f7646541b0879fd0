"""cse_compress 包的主入口点。

使用方式:
    python -m cse_compress --help
    python -m cse_compress bench --alpha 0.25 0.5 0.75 -U 2 -o bench.csv
"""
from __future__ import annotations

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
