"""耗时较长的质量验收测试，设置 CSEM_SLOW_TESTS=1 时运行"""
import os
import time
import unittest
from pathlib import Path
import sys

# 添加项目路径到 sys.path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from cse_compress.codec import compress, storage_report
from cse_compress.extractor import ExtractConfig, run_extraction
from cse_compress.kernels import mm_compressed
from cse_compress.matrix import GenSpec, generate_dense

SLOW = os.getenv("CSEM_SLOW_TESTS") == "1"

# 100×100 二值矩阵上压缩后的加法次数参考值
REFERENCE_ADDS = {0.25: 1923, 0.5: 3326, 0.75: 4492}


@unittest.skipUnless(SLOW, "设置 CSEM_SLOW_TESTS=1 以运行耗时测试")
class TestCompressionQuality(unittest.TestCase):
    """压缩质量与规模"""

    def test_binary_matrix_additions(self):
        """5 个种子中最好的一次不超过参考加法数的 110%。

        只检查上界：搜索比参考值做得更好（加法更少）不算失败，实测常低 7%~13%。
        """
        for alpha, reference in REFERENCE_ADDS.items():
            best = None
            for seed in range(5):
                m = generate_dense(GenSpec(100, 100, alpha, 2, seed=seed, zero_level=True))
                result = run_extraction(m, ExtractConfig(iterations=200, attempts=500, seed=seed))
                adds = m.nnz - result.total_gain
                best = adds if best is None else min(best, adds)
            with self.subTest(alpha=alpha):
                self.assertLessEqual(best, reference * 1.1)

    def test_storage_ordering_at_1024(self):
        n = 1024
        for alpha in (0.25, 0.5, 0.75):
            ratios = []
            for u in (2, 4, 8):
                m = generate_dense(GenSpec(n, n, alpha, u, seed=u, zero_level=True))
                c, _ = compress(m, ExtractConfig(iterations=10, attempts=200, seed=u))
                report = storage_report(c, m.nnz)
                report.check_identities()
                ratios.append(report.ratio_vs_dense)
                self.assertAlmostEqual(report.s_csr / (n * n), 2 * alpha + 1 / n, delta=0.005)
                if u == 2 and alpha == 0.25:
                    self.assertLessEqual(report.ratio_vs_dense, 0.27)
            with self.subTest(alpha=alpha):
                self.assertLess(ratios[0], ratios[1])
                self.assertLess(ratios[1], ratios[2])

    def test_million_entry_matrix(self):
        m = generate_dense(GenSpec(1000, 1000, 0.25, 2, seed=1, zero_level=True))
        started = time.perf_counter()
        c, result = compress(m, ExtractConfig(iterations=20, attempts=500, seed=1))
        elapsed = time.perf_counter() - started
        self.assertLessEqual(elapsed, 300)
        self.assertGreater(result.total_gain, 0)
        _, stats = mm_compressed(c, [1] * 1000)
        self.assertEqual(stats.additions, m.nnz - result.total_gain)


if __name__ == "__main__":
    unittest.main()
