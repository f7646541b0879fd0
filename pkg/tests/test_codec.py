"""压缩格式编解码、存储统计与二进制容器测试"""
import io
import struct
import unittest
from fractions import Fraction
from pathlib import Path
import sys

import numpy as np

# 添加项目路径到 sys.path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from cse_compress.codec import (
    CompressedMatrix,
    alpha_threshold,
    compress,
    crossover_predicate,
    decode,
    deserialize,
    encode,
    from_bytes,
    serialize,
    storage_report,
    to_bytes,
)
from cse_compress.errors import (
    ConsistencyError,
    DimensionMismatchError,
    FormatError,
    OverlappingCoverageError,
    TruncatedStreamError,
)
from cse_compress.extractor import CseSet, CseTerm, ExtractConfig, extract
from cse_compress.matrix import DenseMatrix, GenSpec, generate_dense

WORKED = [[2, 0, 1, 0], [2, 0, 1, 0], [0, 3, 0, 5], [2, 0, 0, 5]]
WORKED_TERM = CseTerm(col_i=0, col_j=2, w_i=2, w_j=1, occ_rows=(0, 1))
WORKED_REMAINDER = [[0, 0, 0, 0], [0, 0, 0, 0], [0, 3, 0, 5], [2, 0, 0, 5]]


def worked_compressed() -> CompressedMatrix:
    return encode(DenseMatrix.from_rows(WORKED_REMAINDER), CseSet((WORKED_TERM,)), (4, 4))


def full_alphabet_matrix() -> DenseMatrix:
    """1000×1000，α=0.1，每列都含全部 99 个值"""
    entries = np.zeros((1000, 1000), dtype=np.int64)
    entries[:100, :] = (np.arange(100) % 99 + 1)[:, None]
    return DenseMatrix(entries)


class TestWorkedExample(unittest.TestCase):
    """测试 4×4 手算示例"""

    def test_arrays(self):
        c = worked_compressed()
        self.assertEqual(c.weights.tolist(), [2, 3, 1, 5])
        self.assertEqual(c.wp.tolist(), [1, 2, 3, 4])
        self.assertEqual(c.cse.tolist(), [0, 2, 0, 1])
        self.assertEqual(c.cp.tolist(), [4])
        self.assertEqual(c.singles.tolist(), [1, 3, 0, 3])
        self.assertEqual(c.sp.tolist(), [0, 0, 2, 4])
        self.assertEqual(c.n_cse, 1)
        self.assertEqual(c.gain, 1)
        self.assertEqual(c.nnz, 8)

    def test_decode(self):
        self.assertEqual(decode(worked_compressed()), DenseMatrix.from_rows(WORKED))

    def test_storage(self):
        report = storage_report(worked_compressed())
        self.assertEqual(report.s_weights, 8)
        self.assertEqual(report.s_cse, 5)
        self.assertEqual(report.s_singles, 8)
        self.assertEqual(report.s_total, 21)
        self.assertEqual(report.s_csr, 20)
        self.assertGreater(report.ratio_vs_csr, 1.0)
        self.assertLessEqual(report.s_total, report.total_bound)
        report.check_identities()

    def test_nnz_counts_both_cells_of_occurrences(self):
        term = CseTerm(col_i=0, col_j=1, w_i=1, w_j=1, occ_rows=(0, 1, 2))
        c = encode(DenseMatrix.zeros(3, 2), CseSet((term,)), (3, 2))
        self.assertEqual(c.singles.size, 0)
        self.assertEqual(c.nnz, 6)
        report = storage_report(c)
        self.assertEqual(report.nnz, 6)
        self.assertEqual(report.s_csr, 2 * 6 + 3)
        report.check_identities()

    def test_binary_roundtrip(self):
        c = worked_compressed()
        data = to_bytes(c)
        self.assertEqual(data[:4], b"CSEM")
        self.assertEqual(len(data), 14 + 6 * 4 + 4 * 21)
        self.assertEqual(from_bytes(data), c)

    def test_json_roundtrip(self):
        c = worked_compressed()
        self.assertEqual(CompressedMatrix.from_json_dict(c.to_json_dict()), c)

    def test_no_cse(self):
        m = DenseMatrix.from_rows(WORKED)
        c = encode(m, CseSet(), m.shape)
        self.assertEqual(c.cse.size, 0)
        self.assertEqual(c.cp.size, 0)
        self.assertEqual(decode(c), m)

    def test_empty_matrix(self):
        m = DenseMatrix.zeros(3, 2)
        c = encode(m, CseSet(), m.shape)
        self.assertEqual(c.weights.size, 0)
        self.assertEqual(c.wp.tolist(), [0, 0])
        self.assertEqual(c.sp.tolist(), [0, 0, 0])
        self.assertEqual(decode(c), m)


class TestEncodeErrors(unittest.TestCase):
    """测试编码输入校验"""

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            encode(DenseMatrix.from_rows(WORKED_REMAINDER), CseSet((WORKED_TERM,)), (4, 5))

    def test_commons_overlap_remainder(self):
        with self.assertRaises(ConsistencyError):
            encode(DenseMatrix.from_rows(WORKED), CseSet((WORKED_TERM,)), (4, 4))

    def test_overlapping_terms(self):
        other = CseTerm(col_i=0, col_j=1, w_i=2, w_j=7, occ_rows=(0, 1))
        with self.assertRaises(ConsistencyError):
            encode(DenseMatrix.from_rows(WORKED_REMAINDER), CseSet((WORKED_TERM, other)), (4, 4))


class TestFormatValidation(unittest.TestCase):
    """测试格式不变量"""

    def base(self, **overrides):
        arrays = dict(rows=4, cols=4, weights=[2, 3, 1, 5], wp=[1, 2, 3, 4],
                      cse=[0, 2, 0, 1], cp=[4], singles=[1, 3, 0, 3], sp=[0, 0, 2, 4])
        arrays.update(overrides)
        return CompressedMatrix(**arrays)

    def test_short_record(self):
        with self.assertRaises(FormatError):
            self.base(cse=[0, 2, 0], cp=[3])

    def test_weight_index_out_of_range(self):
        with self.assertRaises(FormatError):
            self.base(singles=[1, 3, 0, 9])

    def test_zero_weight(self):
        with self.assertRaises(FormatError):
            self.base(weights=[2, 0, 1, 5])

    def test_pointer_mismatch(self):
        with self.assertRaises(FormatError):
            self.base(wp=[1, 2, 3, 5])
        with self.assertRaises(FormatError):
            self.base(sp=[0, 0, 2])

    def test_overlapping_coverage(self):
        c = self.base(singles=[0, 1, 3, 0, 3], sp=[1, 1, 3, 5])
        with self.assertRaises(OverlappingCoverageError):
            decode(c)


class TestRoundtripProperty(unittest.TestCase):
    """随机矩阵上的无损往返与存储恒等式"""

    def test_random_matrices(self):
        rng = np.random.default_rng(20240101)
        checked = 0
        while checked < 500:
            rows = int(rng.integers(1, 65))
            cols = int(rng.integers(1, 65))
            alpha = float(rng.choice(np.round(np.arange(0.05, 1.0001, 0.05), 2)))
            u = int(rng.choice([1, 2, 4, 8, 16]))
            spec = GenSpec(rows, cols, alpha, u, seed=int(rng.integers(0, 2 ** 32)))
            if spec.target_nnz < 1:
                continue
            m = generate_dense(spec)
            commons, remainder = extract(m, ExtractConfig(iterations=2, attempts=10, seed=checked))
            c = encode(remainder, commons, m.shape)

            self.assertEqual(decode(c), m)
            data = to_bytes(c)
            self.assertEqual(from_bytes(data), c)
            self.assertEqual(to_bytes(from_bytes(data)), data)

            report = storage_report(c, m.nnz)
            report.check_identities()
            self.assertEqual(storage_report(c), report)
            self.assertEqual(c.nnz, m.nnz)
            self.assertEqual(c.gain, commons.total_gain)
            checked += 1

    def test_compress_convenience(self):
        m = generate_dense(GenSpec(100, 100, 0.25, 2, seed=7, zero_level=True))
        c, result = compress(m, ExtractConfig(iterations=5, attempts=100, seed=7))
        self.assertEqual(decode(c), m)
        self.assertEqual(c.gain, result.total_gain)
        self.assertGreater(c.gain, 0)


class TestCrossover(unittest.TestCase):
    """测试与 CSR 的交叉点"""

    def test_threshold(self):
        self.assertEqual(alpha_threshold(99, 1000, 1000), Fraction(1, 10))
        self.assertEqual(alpha_threshold(2, 100, 100, n_cse=10, gain=50), Fraction(3, 100) - Fraction(30, 10000))

    def test_predicate_at_boundary(self):
        self.assertFalse(crossover_predicate(0.1, 99, 1000, 1000))
        self.assertTrue(crossover_predicate(0.1001, 99, 1000, 1000))
        self.assertFalse(crossover_predicate(0.0999, 99, 1000, 1000))
        self.assertTrue(crossover_predicate(Fraction(1, 4), 2, 100, 100))

    def test_full_alphabet_matches_csr(self):
        m = full_alphabet_matrix()
        self.assertEqual(m.nnz, 100000)
        c = encode(m, CseSet(), m.shape)
        report = storage_report(c)
        self.assertEqual(report.s_weights, 1000 * 100)
        self.assertEqual(report.s_total, 2 * 100000 + 1000)
        self.assertEqual(report.s_total, report.s_csr)
        self.assertEqual(report.s_total, report.total_bound)

    def test_predicate_implies_smaller_than_csr(self):
        for seed, alpha in enumerate([0.3, 0.5, 0.8]):
            m = generate_dense(GenSpec(60, 60, alpha, 4, seed=seed))
            c, _ = compress(m, ExtractConfig(iterations=3, attempts=30, seed=seed))
            report = storage_report(c, m.nnz)
            if crossover_predicate(Fraction(m.nnz, 3600), report.n_unique, 60, 60, c.n_cse, c.gain):
                self.assertLess(report.ratio_vs_csr, 1.0)


class TestSerializationErrors(unittest.TestCase):
    """测试二进制容器的错误处理"""

    def test_truncated(self):
        data = to_bytes(worked_compressed())
        for cut in (3, 13, 20, len(data) - 1):
            with self.assertRaises(TruncatedStreamError):
                from_bytes(data[:cut])

    def test_bad_magic(self):
        data = bytearray(to_bytes(worked_compressed()))
        data[:4] = b"XXXX"
        with self.assertRaises(FormatError):
            from_bytes(bytes(data))

    def test_bad_version(self):
        data = bytearray(to_bytes(worked_compressed()))
        data[4:6] = struct.pack("<H", 2)
        with self.assertRaises(FormatError):
            from_bytes(bytes(data))

    def test_invariant_violation_in_payload(self):
        data = bytearray(to_bytes(worked_compressed()))
        # wp 的第一个元素在头部、weights 计数与 4 个权重之后
        offset = 14 + 4 + 16 + 4
        data[offset:offset + 4] = struct.pack("<I", 3)
        with self.assertRaises(FormatError):
            from_bytes(bytes(data))

    def test_stream_api(self):
        c = worked_compressed()
        buffer = io.BytesIO()
        written = serialize(c, buffer)
        self.assertEqual(written, len(buffer.getvalue()))
        buffer.seek(0)
        self.assertEqual(deserialize(buffer), c)


if __name__ == "__main__":
    unittest.main()
